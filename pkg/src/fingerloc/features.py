"""Fingerprint extraction from impulse responses and raw sample buffers."""

import numpy as np

from .signals import (
    Cir,
    FingerprintKind,
    FingerprintMeta,
    FingerprintVector,
    SignalBuffer,
)

__all__ = [
    "xcorr",
    "cir_xcorr_fingerprint",
    "rssi_rspd",
    "rx_xcorr_fingerprint",
    "phasediff_fingerprint",
    "estimate_cir",
]


def xcorr(a, b, max_lag: int) -> np.ndarray:
    """Cross-correlation on a symmetric lag window.

    The entry at lag tau is ``sum_t a(t) * conj(b(t - tau))``, with both
    sequences zero-padded outside their support.  Output is ordered by
    ascending lag, ``out[i]`` holding lag ``i - max_lag``; so if ``b`` is a
    copy of ``a`` delayed by k samples the peak appears at lag ``-k``.

    Args:
        a: first sequence (complex or real, non-empty).
        b: second sequence (conjugated side).
        max_lag: half-width of the lag window,
            ``0 <= max_lag <= max(len(a), len(b)) - 1``.

    Returns:
        Complex array of length ``2 * max_lag + 1``.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.size == 0 or b.size == 0:
        raise ValueError("cross-correlation inputs must be non-empty")
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("cross-correlation inputs must be 1-D")
    if not (0 <= max_lag <= max(a.size, b.size) - 1):
        raise ValueError(
            f"max_lag must lie in [0, {max(a.size, b.size) - 1}], got {max_lag}"
        )
    # full linear correlation covers lags -(len(b)-1) .. len(a)-1
    full = np.correlate(a, b, mode="full")
    out = np.zeros(2 * max_lag + 1, dtype=complex)
    lo = max(-max_lag, -(b.size - 1))
    hi = min(max_lag, a.size - 1)
    if lo <= hi:
        out[lo + max_lag: hi + max_lag + 1] = full[lo + b.size - 1: hi + b.size]
    return out


def cir_xcorr_fingerprint(cir_i: Cir, cir_j: Cir,
                          meta: FingerprintMeta | None = None) -> FingerprintVector:
    """Fingerprint from the full cross-correlation of two impulse responses.

    Both responses must share the same tap count L; the result spans every
    lag with any overlap, giving dimension 2L - 1.
    """
    if len(cir_i) != len(cir_j):
        raise ValueError(
            f"impulse responses must have equal tap counts, got {len(cir_i)} and {len(cir_j)}"
        )
    if cir_i.bandwidth_hz != cir_j.bandwidth_hz:
        raise ValueError("impulse responses must share a bandwidth")
    values = xcorr(cir_i.taps, cir_j.taps, len(cir_i) - 1)
    return FingerprintVector(kind=FingerprintKind.CIR_XCORR, values=values,
                             meta=meta or FingerprintMeta())


def rssi_rspd(buf_i: SignalBuffer, buf_j: SignalBuffer) -> tuple:
    """Received power and relative phase of two synchronized sample buffers.

    Returns:
        (rssi, phase): ``rssi`` is the mean squared magnitude of ``buf_i``
        (linear power); ``phase`` is the argument of the averaged sample
        cross-product ``mean(y_i * conj(y_j))`` in (-pi, pi].  Passing the
        same buffer twice yields phase 0.
    """
    if buf_i.sample_rate_hz != buf_j.sample_rate_hz:
        raise ValueError("sample rates must match")
    if len(buf_i) != len(buf_j):
        raise ValueError("buffers must have equal lengths for sample-wise products")
    yi = buf_i.samples
    yj = buf_j.samples
    rssi = float(np.mean(np.abs(yi) ** 2))
    phase = float(np.angle(np.mean(yi * np.conj(yj))))
    return rssi, phase


def rx_xcorr_fingerprint(buf_m: SignalBuffer, buf_mp: SignalBuffer, max_lag: int,
                         meta: FingerprintMeta | None = None) -> FingerprintVector:
    """Fingerprint from the cross-correlation of raw received samples.

    The correlation is divided by the shorter buffer length so captures of
    different durations produce comparable magnitudes.  For a shared transmit
    signal the result estimates the channel-pair correlation shaped by the
    pulse autocorrelation, plus a zero-lag noise spike on self-pairs.
    """
    if buf_m.sample_rate_hz != buf_mp.sample_rate_hz:
        raise ValueError("sample rates must match")
    n = min(len(buf_m), len(buf_mp))
    values = xcorr(buf_m.samples, buf_mp.samples, max_lag) / n
    return FingerprintVector(kind=FingerprintKind.RX_XCORR, values=values,
                             meta=meta or FingerprintMeta())


def phasediff_fingerprint(bufs, pairs, meta: FingerprintMeta | None = None) -> FingerprintVector:
    """Inter-element phase differences across an antenna array.

    Args:
        bufs: per-element sample buffers, index-aligned.
        pairs: (i, j) element index pairs; one output phase per pair.

    Returns:
        Phase-difference fingerprint with ``meta.pairs`` recording the pairs.
    """
    pairs = tuple(tuple(p) for p in pairs)
    if len(pairs) == 0:
        raise ValueError("at least one element pair is required")
    phases = []
    for i, j in pairs:
        _, phase = rssi_rspd(bufs[i], bufs[j])
        phases.append(phase)
    base = meta or FingerprintMeta()
    out_meta = FingerprintMeta(sensor=base.sensor, pair=base.pair, pairs=pairs,
                               freq_hz=base.freq_hz, bandwidth_hz=base.bandwidth_hz)
    return FingerprintVector(kind=FingerprintKind.PHASE_DIFF,
                             values=np.asarray(phases, dtype=float), meta=out_meta)


def estimate_cir(rx: SignalBuffer, replica, tap_count: int) -> Cir:
    """Correlate a capture against a known transmit replica to recover taps.

    Convenience for replica-based sounding: the sliding correlation at lags
    0 .. tap_count - 1, normalized by the replica energy.  Faithful only when
    the replica autocorrelation is impulse-like.
    """
    replica = np.asarray(replica, dtype=complex)
    if replica.size == 0:
        raise ValueError("replica must be non-empty")
    if tap_count < 1:
        raise ValueError("tap_count must be >= 1")
    energy = float(np.sum(np.abs(replica) ** 2))
    if energy == 0.0:
        raise ValueError("replica has zero energy")
    max_lag = max(len(rx), replica.size) - 1
    corr = xcorr(rx.samples, replica, max_lag)
    taps = np.zeros(tap_count, dtype=complex)
    take = min(tap_count, max_lag + 1)
    taps[:take] = corr[max_lag: max_lag + take] / energy
    return Cir(taps=taps, bandwidth_hz=rx.sample_rate_hz)
