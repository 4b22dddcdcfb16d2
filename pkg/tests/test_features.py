"""Feature extraction against brute-force and analytic oracles."""

import math

import numpy as np
import pytest

from fingerloc.features import (
    cir_xcorr_fingerprint,
    estimate_cir,
    phasediff_fingerprint,
    rssi_rspd,
    rx_xcorr_fingerprint,
    xcorr,
)
from fingerloc.signals import Cir, FingerprintKind, FingerprintMeta, SignalBuffer, wrap_angle
from fingerloc.simulate import zadoff_chu


def xcorr_brute(a, b, max_lag):
    """O(L^2) reference: out[i] = sum_t a(t) conj(b(t - (i - max_lag)))."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    out = np.zeros(2 * max_lag + 1, dtype=complex)
    for i, tau in enumerate(range(-max_lag, max_lag + 1)):
        acc = 0.0 + 0.0j
        for t in range(a.size):
            tb = t - tau
            if 0 <= tb < b.size:
                acc += a[t] * np.conj(b[tb])
        out[i] = acc
    return out


def test_xcorr_matches_brute_force_on_integer_data():
    # integer-valued complex data keeps every sum exact in float64, so the
    # fast path must agree bit for bit regardless of summation order
    rng = np.random.default_rng(2024)
    for _ in range(300):
        na = int(rng.integers(1, 9))
        nb = int(rng.integers(1, 9))
        a = rng.integers(-8, 9, size=na) + 1j * rng.integers(-8, 9, size=na)
        b = rng.integers(-8, 9, size=nb) + 1j * rng.integers(-8, 9, size=nb)
        max_lag = int(rng.integers(0, max(na, nb)))
        assert np.array_equal(xcorr(a, b, max_lag), xcorr_brute(a, b, max_lag))


def test_xcorr_matches_brute_force_on_float_data():
    rng = np.random.default_rng(77)
    for _ in range(200):
        na = int(rng.integers(1, 14))
        nb = int(rng.integers(1, 14))
        a = rng.standard_normal(na) + 1j * rng.standard_normal(na)
        b = rng.standard_normal(nb) + 1j * rng.standard_normal(nb)
        max_lag = int(rng.integers(0, max(na, nb)))
        got = xcorr(a, b, max_lag)
        want = xcorr_brute(a, b, max_lag)
        assert np.allclose(got, want, rtol=1e-12, atol=1e-12)


def test_xcorr_unit_impulses():
    delta0 = np.array([1.0, 0.0, 0.0])
    assert np.array_equal(xcorr(delta0, delta0, 1), [0.0, 1.0, 0.0])
    # a is an impulse at sample 2: the only overlap with delta0 is at lag +2
    delta2 = np.array([0.0, 0.0, 1.0])
    out = xcorr(delta2, delta0, 2)
    expect = np.zeros(5, dtype=complex)
    expect[2 + 2] = 1.0
    assert np.array_equal(out, expect)


def test_xcorr_delay_convention():
    # b = a delayed by k  =>  peak at lag -k
    rng = np.random.default_rng(8)
    a = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    for k in (1, 3, 5):
        b = np.concatenate([np.zeros(k), a])
        out = xcorr(a, b, max_lag=8)
        assert int(np.argmax(np.abs(out))) == 8 - k


def test_xcorr_small_complex_example():
    out = xcorr([1.0, 1.0j], [1.0, 1.0], 1)
    # lag -1: a0 conj(b1) = 1; lag 0: a0 conj(b0) + a1 conj(b1) = 1 + i;
    # lag +1: a1 conj(b0) = i
    assert np.array_equal(out, np.array([1.0, 1.0 + 1.0j, 1.0j]))


def test_xcorr_conjugate_symmetry_of_autocorrelation():
    rng = np.random.default_rng(15)
    a = rng.standard_normal(12) + 1j * rng.standard_normal(12)
    out = xcorr(a, a, 11)
    for tau in range(12):
        assert out[11 + tau] == pytest.approx(np.conj(out[11 - tau]), abs=1e-12)


def test_xcorr_scaling():
    rng = np.random.default_rng(23)
    a = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    b = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    base = xcorr(a, b, 5)
    alpha = 2.0 - 0.5j
    assert np.allclose(xcorr(alpha * a, b, 5), alpha * base, rtol=1e-12)
    assert np.allclose(xcorr(a, alpha * b, 5), np.conj(alpha) * base, rtol=1e-12)


def test_xcorr_validates_inputs():
    with pytest.raises(ValueError):
        xcorr([], [1.0], 0)
    with pytest.raises(ValueError):
        xcorr([1.0], [1.0], -1)
    with pytest.raises(ValueError):
        xcorr([1.0, 2.0], [1.0], 2)
    with pytest.raises(ValueError):
        xcorr(np.ones((2, 2)), [1.0], 0)
    assert np.array_equal(xcorr([2.0], [4.0], 0), [8.0])


def test_cir_xcorr_fingerprint_spans_all_lags():
    rng = np.random.default_rng(31)
    taps_i = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    taps_j = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    fp = cir_xcorr_fingerprint(Cir(taps=taps_i, bandwidth_hz=2e7),
                               Cir(taps=taps_j, bandwidth_hz=2e7))
    assert fp.kind is FingerprintKind.CIR_XCORR
    assert fp.dim == 2 * 5 - 1
    assert np.allclose(fp.values, xcorr_brute(taps_i, taps_j, 4), rtol=1e-12)


def test_cir_xcorr_fingerprint_checks_compatibility():
    a = Cir(taps=np.ones(4), bandwidth_hz=2e7)
    with pytest.raises(ValueError):
        cir_xcorr_fingerprint(a, Cir(taps=np.ones(5), bandwidth_hz=2e7))
    with pytest.raises(ValueError):
        cir_xcorr_fingerprint(a, Cir(taps=np.ones(4), bandwidth_hz=1e7))


def test_rssi_rspd_analytic_cases():
    same = SignalBuffer(samples=np.array([1.0, 1.0]), sample_rate_hz=1.0)
    rssi, phase = rssi_rspd(same, same)
    assert rssi == 1.0 and phase == 0.0
    quad = SignalBuffer(samples=np.array([1.0j, 1.0j]), sample_rate_hz=1.0)
    rssi, phase = rssi_rspd(same, quad)
    assert rssi == 1.0
    assert phase == pytest.approx(-math.pi / 2, abs=1e-12)


def test_rssi_rspd_power_is_mean_square_of_first_buffer():
    rng = np.random.default_rng(40)
    yi = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    yj = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    bi = SignalBuffer(samples=yi, sample_rate_hz=2e7)
    bj = SignalBuffer(samples=yj, sample_rate_hz=2e7)
    rssi, phase = rssi_rspd(bi, bj)
    assert rssi == pytest.approx(float(np.mean(np.abs(yi) ** 2)), rel=1e-12)
    assert phase == pytest.approx(float(np.angle(np.mean(yi * np.conj(yj)))), abs=1e-12)
    with pytest.raises(ValueError):
        rssi_rspd(bi, SignalBuffer(samples=yj, sample_rate_hz=1e7))
    with pytest.raises(ValueError):
        rssi_rspd(bi, SignalBuffer(samples=yj[:10], sample_rate_hz=2e7))


def test_rx_xcorr_normalizes_by_shorter_length():
    # shared transmit signal through h1 = delta_0 and h2 = delta_1:
    # the correlation peaks at lag -1 with unit value for a unit-power probe
    x = zadoff_chu(3, 64)
    y1 = SignalBuffer(samples=x, sample_rate_hz=1e7)
    y2 = SignalBuffer(samples=np.concatenate([[0.0], x]), sample_rate_hz=1e7)
    fp = rx_xcorr_fingerprint(y1, y2, max_lag=4)
    assert fp.kind is FingerprintKind.RX_XCORR
    assert fp.dim == 9
    assert int(np.argmax(np.abs(fp.values))) == 4 - 1
    assert abs(fp.values[3]) == pytest.approx(1.0, rel=1e-12)
    expect = xcorr_brute(y1.samples, y2.samples, 4) / 64
    assert np.allclose(fp.values, expect, rtol=1e-12)


def test_phasediff_fingerprint_recovers_element_phase_offsets():
    rng = np.random.default_rng(55)
    x = zadoff_chu(1, 32)
    offsets = rng.uniform(-math.pi, math.pi, size=4)
    bufs = [SignalBuffer(samples=x * np.exp(1j * o), sample_rate_hz=1e7)
            for o in offsets]
    pairs = ((0, 1), (0, 2), (1, 3))
    fp = phasediff_fingerprint(bufs, pairs, meta=FingerprintMeta(sensor=2))
    assert fp.kind is FingerprintKind.PHASE_DIFF
    assert fp.meta.pairs == pairs and fp.meta.sensor == 2
    for value, (i, j) in zip(fp.values, pairs):
        assert value == pytest.approx(wrap_angle(offsets[i] - offsets[j]), abs=1e-12)
    with pytest.raises(ValueError):
        phasediff_fingerprint(bufs, ())


def test_estimate_cir_with_unit_replica_reads_samples():
    rx = SignalBuffer(samples=np.array([3.0, 4.0, 5.0]), sample_rate_hz=2e6)
    cir = estimate_cir(rx, [1.0], tap_count=2)
    assert np.array_equal(cir.taps, [3.0, 4.0])
    assert cir.bandwidth_hz == 2e6
    # replica [2] has energy 4: correlation 2*rx divided by 4 gives rx/2
    cir2 = estimate_cir(rx, [2.0], tap_count=3)
    assert np.allclose(cir2.taps, [1.5, 2.0, 2.5], rtol=1e-12)


def test_estimate_cir_recovers_delayed_replica():
    x = zadoff_chu(5, 63)
    rx = SignalBuffer(samples=np.concatenate([np.zeros(2), x]), sample_rate_hz=1e7)
    cir = estimate_cir(rx, x, tap_count=5)
    assert abs(cir.taps[2]) == pytest.approx(1.0, rel=1e-12)
    others = np.delete(np.abs(cir.taps), 2)
    assert np.all(others < 0.2)  # ZC linear sidelobes are small but nonzero


def test_estimate_cir_validation():
    rx = SignalBuffer(samples=np.ones(4), sample_rate_hz=1.0)
    with pytest.raises(ValueError):
        estimate_cir(rx, [], tap_count=2)
    with pytest.raises(ValueError):
        estimate_cir(rx, [1.0], tap_count=0)
    with pytest.raises(ValueError):
        estimate_cir(rx, [0.0, 0.0], tap_count=2)


def test_estimate_cir_pads_beyond_buffer():
    # tap_count longer than the available lags: the tail stays zero
    rx = SignalBuffer(samples=np.array([1.0, 2.0]), sample_rate_hz=1.0)
    cir = estimate_cir(rx, [1.0], tap_count=6)
    assert np.array_equal(cir.taps, [1.0, 2.0, 0.0, 0.0, 0.0, 0.0])
