"""Fingerprint database: per-grid-point models/vectors plus JSON persistence."""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .geometry import Grid, Position
from .signals import FingerprintKind, FingerprintMeta, FingerprintVector

__all__ = [
    "DatabaseMeta",
    "FingerprintDatabase",
    "euclidean_match",
    "save_database",
    "load_database",
    "database_to_json",
    "database_from_json",
    "register_codec",
    "encode_item",
    "decode_item",
]

FORMAT_VERSION = "fingerloc-db-1"

# ---------------------------------------------------------------------------
# item codecs: every object type a database entry can hold registers one
# ---------------------------------------------------------------------------

_CODECS = {}        # tag -> (cls, encode, decode)
_CLASS_TAGS = {}    # cls -> tag


def register_codec(tag, cls, encode, decode):
    """Register a serializable entry type.

    ``encode(obj) -> dict`` (JSON-safe, without the type tag),
    ``decode(dict) -> obj``.
    """
    _CODECS[tag] = (cls, encode, decode)
    _CLASS_TAGS[cls] = tag


def encode_item(obj) -> dict:
    tag = _CLASS_TAGS.get(type(obj))
    if tag is None:
        raise TypeError(f"no codec registered for entry type {type(obj).__name__}")
    body = _CODECS[tag][1](obj)
    return {"type": tag, **body}


def decode_item(data: dict):
    tag = data.get("type")
    if tag not in _CODECS:
        raise ValueError(f"unknown entry type tag {tag!r}")
    return _CODECS[tag][2](data)


def complex_to_json(values) -> list:
    """Complex 1-D array -> [[re, im], ...] (floats round-trip exactly)."""
    arr = np.asarray(values, dtype=complex)
    return [[float(v.real), float(v.imag)] for v in arr]


def complex_from_json(pairs) -> np.ndarray:
    return np.array([complex(re, im) for re, im in pairs], dtype=complex)


def real_to_json(values) -> list:
    return [float(v) for v in np.asarray(values, dtype=float)]


# -- fingerprint vector codec ------------------------------------------------

def _encode_fingerprint(fp: FingerprintVector) -> dict:
    if np.iscomplexobj(fp.values):
        vals = complex_to_json(fp.values)
    else:
        vals = real_to_json(fp.values)
    meta = {}
    if fp.meta.sensor is not None:
        meta["sensor"] = int(fp.meta.sensor)
    if fp.meta.pair is not None:
        meta["pair"] = [int(i) for i in fp.meta.pair]
    if fp.meta.pairs is not None:
        meta["pairs"] = [[int(i) for i in p] for p in fp.meta.pairs]
    if fp.meta.freq_hz is not None:
        meta["freq_hz"] = float(fp.meta.freq_hz)
    if fp.meta.bandwidth_hz is not None:
        meta["bandwidth_hz"] = float(fp.meta.bandwidth_hz)
    return {"kind": fp.kind.value, "values": vals, "meta": meta}


def _decode_fingerprint(data: dict) -> FingerprintVector:
    kind = FingerprintKind(data["kind"])
    raw = data["values"]
    if raw and isinstance(raw[0], list):
        values = complex_from_json(raw)
    else:
        values = np.asarray(raw, dtype=float)
    m = data.get("meta", {})
    meta = FingerprintMeta(
        sensor=m.get("sensor"),
        pair=tuple(m["pair"]) if "pair" in m else None,
        pairs=tuple(tuple(p) for p in m["pairs"]) if "pairs" in m else None,
        freq_hz=m.get("freq_hz"),
        bandwidth_hz=m.get("bandwidth_hz"),
    )
    return FingerprintVector(kind=kind, values=values, meta=meta)


register_codec("fingerprint", FingerprintVector, _encode_fingerprint, _decode_fingerprint)

# bare scalars (detection probabilities, confidences)
register_codec("scalar", float, lambda v: {"value": float(v)}, lambda d: float(d["value"]))


# ---------------------------------------------------------------------------
# database container
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DatabaseMeta:
    """Training provenance: frequencies/bandwidths used, derived-data marker."""

    train_freqs_hz: tuple = ()
    train_bandwidths_hz: tuple = ()
    derived: bool = False
    extra: dict = field(default_factory=dict)


class FingerprintDatabase:
    """Learned radio map: one entry dict per grid index.

    Entry dicts map a string key (e.g. ``"pair_0_3"``) to a learned model or a
    raw :class:`FingerprintVector`.  Every grid index has an entry, in grid
    order.
    """

    def __init__(self, grid: Grid, entries=None, meta: DatabaseMeta | None = None):
        self.grid = grid
        if entries is None:
            entries = [dict() for _ in range(len(grid))]
        entries = list(entries)
        if len(entries) != len(grid):
            raise ValueError(
                f"database needs one entry per grid point, got {len(entries)} for {len(grid)}"
            )
        self.entries = entries
        self.meta = meta if meta is not None else DatabaseMeta()

    def __len__(self):
        return len(self.entries)

    def items_of_kind(self, kind: FingerprintKind, key: str | None = None):
        """Per grid index, the unique raw vector of ``kind`` (or the one at ``key``).

        Raises if any entry lacks such a vector or holds several candidates.
        """
        out = []
        for idx, entry in enumerate(self.entries):
            if key is not None:
                item = entry.get(key)
                if not isinstance(item, FingerprintVector) or item.kind is not kind:
                    raise ValueError(
                        f"entry {idx} key {key!r} does not hold a {kind.value} fingerprint"
                    )
                out.append(item)
                continue
            found = [v for v in entry.values()
                     if isinstance(v, FingerprintVector) and v.kind is kind]
            if len(found) == 0:
                raise ValueError(f"database entry {idx} holds no {kind.value} fingerprint")
            if len(found) > 1:
                raise ValueError(
                    f"database entry {idx} holds {len(found)} {kind.value} fingerprints; "
                    "pass an explicit key"
                )
            out.append(found[0])
        return out


def euclidean_match(target: FingerprintVector, db: FingerprintDatabase,
                    key: str | None = None) -> int:
    """Nearest-database-vector matching: argmin of the Euclidean distance.

    Args:
        target: the measured fingerprint.
        db: database whose entries hold raw mean vectors of ``target.kind``.
        key: optional entry key when entries hold several vectors of the kind.

    Returns:
        Grid index of the closest stored vector (lowest index on ties).
    """
    refs = db.items_of_kind(target.kind, key=key)
    dists = np.empty(len(refs), dtype=float)
    for i, ref in enumerate(refs):
        if ref.dim != target.dim:
            raise ValueError(
                f"dimension mismatch at entry {i}: target {target.dim}, stored {ref.dim}"
            )
        dists[i] = np.linalg.norm(target.values - ref.values)
    return int(np.argmin(dists))


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def database_to_json(db: FingerprintDatabase) -> str:
    doc = {
        "version": FORMAT_VERSION,
        "grid": {
            "points": [[float(p.x), float(p.y)] for p in db.grid.points],
            "spacing": float(db.grid.spacing),
        },
        "meta": {
            "train_freqs_hz": [float(f) for f in db.meta.train_freqs_hz],
            "train_bandwidths_hz": [float(b) for b in db.meta.train_bandwidths_hz],
            "derived": bool(db.meta.derived),
            "extra": db.meta.extra,
        },
        "entries": [
            {k: encode_item(v) for k, v in sorted(entry.items())} for entry in db.entries
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def database_from_json(text: str) -> FingerprintDatabase:
    doc = json.loads(text)
    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported database format version {version!r}")
    grid = Grid(
        points=tuple(Position(x, y) for x, y in doc["grid"]["points"]),
        spacing=float(doc["grid"]["spacing"]),
    )
    m = doc.get("meta", {})
    meta = DatabaseMeta(
        train_freqs_hz=tuple(m.get("train_freqs_hz", ())),
        train_bandwidths_hz=tuple(m.get("train_bandwidths_hz", ())),
        derived=bool(m.get("derived", False)),
        extra=m.get("extra", {}),
    )
    entries = [
        {k: decode_item(v) for k, v in entry.items()} for entry in doc["entries"]
    ]
    return FingerprintDatabase(grid=grid, entries=entries, meta=meta)


def save_database(db: FingerprintDatabase, path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(database_to_json(db))
        fh.write("\n")


def load_database(path) -> FingerprintDatabase:
    with open(path, "r", encoding="utf-8") as fh:
        return database_from_json(fh.read())
