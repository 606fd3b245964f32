import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cojumps.detect import (MU1, VARIANTS, DetectionConfig, DetectionResult, detect_all, detect_jumps,
                            ewma_abs_vol, ewma_bv_vol, ewma_weight, intersect_jumps)
from cojumps.events import EventSeries
from cojumps.ingest import ReturnSeries, SessionSpec

ALPHA = 2 / 61


def literal_ewma(r, bipower, alpha=ALPHA, theta=4.0, warmup=60):
    """Direct transcription of the recursions, scanning back for admissible returns.

    Admissible: finite and (inside warm-up, or not a detected jump).
    """
    n = len(r)
    finite = [i for i in range(n) if np.isfinite(r[i])]
    head = finite[:warmup]
    warm_end = head[-1] + 1
    if bipower:
        prods = [abs(r[head[i]]) * abs(r[head[i - 1]]) for i in range(1, len(head))]
        state = sum(prods) / len(prods) / MU1 ** 2
    else:
        state = sum(abs(r[i]) for i in head) / len(head) / MU1
    sig, adm = [], []
    for t in range(n):
        s = math.sqrt(state) if bipower else state
        sig.append(s)
        x = r[t]
        ok = np.isfinite(x) and (t < warm_end or abs(x) / s <= theta)
        adm.append(ok)
        past = [i for i in range(t + 1) if adm[i]]
        if bipower and len(past) >= 2:
            state = alpha * abs(r[past[-1]]) * abs(r[past[-2]]) / MU1 ** 2 + (1 - alpha) * state
        elif not bipower and past:
            state = alpha * abs(r[past[-1]]) / MU1 + (1 - alpha) * state
    return np.array(sig)


def test_weight():
    assert ewma_weight(60) == pytest.approx(2 / 61)
    assert math.log(2) / -math.log(1 - ewma_weight(60)) == pytest.approx(20.8, abs=0.1)


@pytest.mark.parametrize("fn", [ewma_abs_vol, ewma_bv_vol])
def test_constant_magnitude_fixed_point(fn):
    c = 0.003
    r = c * np.random.default_rng(0).choice([-1, 1], 500)
    v = fn(r)
    np.testing.assert_allclose(v.values, c / MU1, rtol=1e-12)


def test_hand_recursion_with_jump():
    c, k = 1.0, 50.0
    r = np.array([c, 2 * c, k * c, c])
    v = ewma_abs_vol(r, warmup=2).values
    s0 = 1.5 * c / MU1
    s1 = s0  # index 0 and 1 are warm-up; sigma[0], sigma[1] are the seed before any update
    s2 = ALPHA * c / MU1 + (1 - ALPHA) * s0  # after r0
    s2 = ALPHA * 2 * c / MU1 + (1 - ALPHA) * s2  # after r1
    s3 = ALPHA * 2 * c / MU1 + (1 - ALPHA) * s2  # jump at index 2 skipped: latest admissible is r1
    assert v[0] == pytest.approx(s0) and v[1] == pytest.approx(ALPHA * c / MU1 + (1 - ALPHA) * s1)
    assert v[2] == pytest.approx(s2) and v[3] == pytest.approx(s3)
    assert abs(r[2]) / v[2] > 4


def test_memoryless_limit():
    rng = np.random.default_rng(4)
    r = rng.normal(size=200)
    v = ewma_abs_vol(r, alpha=1 - 1e-12, theta=1e9, warmup=1).values
    np.testing.assert_allclose(v[1:], np.abs(r[:-1]) / MU1, rtol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_matches_literal_recursion(seed, bipower):
    rng = np.random.default_rng(seed)
    r = rng.standard_t(3, size=400)
    r[rng.random(400) < 0.05] = np.nan
    r[rng.choice(400, 6)] *= 30
    fn = ewma_bv_vol if bipower else ewma_abs_vol
    np.testing.assert_allclose(fn(r, warmup=30).values, literal_ewma(r, bipower, warmup=30), rtol=1e-12)


@pytest.mark.parametrize("fn", [ewma_abs_vol, ewma_bv_vol])
def test_jump_magnitude_does_not_leak(fn):
    rng = np.random.default_rng(9)
    r = rng.normal(size=1000)
    base = fn(r).values
    a, b, na = r.copy(), r.copy(), r.copy()
    a[500] = 100 * base[500]
    b[500] = 1000 * base[500]
    na[500] = np.nan
    va, vb, vn = fn(a).values, fn(b).values, fn(na).values
    assert np.array_equal(va, vb)
    assert np.array_equal(va, vn)
    np.testing.assert_array_equal(va[:501], base[:501])


def test_isolated_jump_bipower_path_unchanged():
    c = 0.01
    r = np.full(300, c)
    j = r.copy()
    j[200] = 100 * c / MU1
    assert np.array_equal(ewma_bv_vol(r).values, ewma_bv_vol(j).values)


def test_bipower_consistency_on_gaussian_returns():
    rng = np.random.default_rng(5)
    sigma0 = 0.7
    means, sq = [], []
    for _ in range(50):
        v = ewma_bv_vol(rng.normal(0, sigma0, 5000)).values[60:]
        means.append(v.mean())
        sq.append((v ** 2).mean())
    sq = np.array(sq)
    # the variance proxy is unbiased; its square root carries a small Jensen gap
    assert abs(sq.mean() - sigma0 ** 2) < 3 * sq.std(ddof=1) / math.sqrt(sq.size)
    assert abs(np.mean(means) / sigma0 - 1) < 0.01


@pytest.mark.parametrize("fn", [ewma_abs_vol, ewma_bv_vol])
def test_scale_equivariance(fn):
    rng = np.random.default_rng(12)
    r = rng.standard_t(4, size=3000)
    v1, v2 = fn(r), fn(r * 8.0)
    np.testing.assert_allclose(v2.values, 8.0 * v1.values, rtol=1e-12)
    assert np.array_equal(detect_jumps(r, v1).times, detect_jumps(r * 8.0, v2).times)


def test_all_na_rejected():
    with pytest.raises(ValueError):
        ewma_abs_vol(np.full(100, np.nan))
    with pytest.raises(ValueError):
        ewma_abs_vol(np.ones(100), alpha=1.5)


def test_threshold_is_strict():
    r = np.ones(100)
    vol = ewma_abs_vol(r, warmup=10)
    sig = vol.values
    r2 = r.copy()
    r2[50] = 4 * sig[50]
    r2[70] = -5 * sig[70]
    vol2 = ewma_abs_vol(r2, warmup=10)
    ev = detect_jumps(r2, vol2)
    assert ev.times.tolist() == [71]
    assert ev.directions.tolist() == [-1]
    r3 = r.copy()
    r3[30] = 5 * sig[30]
    ev = detect_jumps(r3, ewma_abs_vol(r3, warmup=10))
    assert ev.times.tolist() == [31] and ev.directions.tolist() == [1]


def test_no_detection_in_warmup_or_na():
    r = np.ones(200)
    r[5] = 1000.0
    r[100] = np.nan
    ev = detect_jumps(r, ewma_abs_vol(r))
    assert len(ev) == 0


def test_gaussian_size_below_one_per_mille():
    rng = np.random.default_rng(21)
    n = 4400 * 505
    r = rng.normal(size=n)
    for fn in (ewma_abs_vol, ewma_bv_vol):
        ev = detect_jumps(r, fn(r))
        hits = len(ev)
        # binomial upper tolerance at 0.1%
        assert hits < 0.001 * n - 3 * math.sqrt(0.001 * n)


def test_intersection():
    a = EventSeries("x", [1, 5, 9], [1, 1, -1])
    b = EventSeries("x", [5, 9, 20], [1, -1, 1])
    c = EventSeries("x", [5, 9], [1, -1])
    out = intersect_jumps([a, b, c])
    assert out.times.tolist() == [5, 9] and out.directions.tolist() == [1, -1]
    assert np.array_equal(intersect_jumps([a, a]).times, a.times)
    with pytest.raises(ValueError):
        intersect_jumps([a, EventSeries("x", [5], [-1])])


def make_series(r, days):
    s = SessionSpec(len(r) // days, days)
    out = {}
    rng = np.random.default_rng(0)
    for m in ("MO1", "MO2", "MO3"):
        v = r.copy()
        if m != "MO1":
            v[rng.random(v.size) < 0.02] = np.nan
        out[m] = ReturnSeries("X", v, m, s)
    return out


def test_detect_all_and_masks():
    rng = np.random.default_rng(2)
    r = rng.normal(size=505 * 20)
    r[rng.choice(r.size, 60, replace=False)] *= 12
    res = detect_all(make_series(r, 20))
    assert set(res.variants) == set(VARIANTS)
    inter = set(res.jumps.times.tolist())
    for ev in res.variants.values():
        assert inter <= set(ev.times.tolist())
    minutes, dirs, masks = res.method_mask()
    full = {int(t) for t, m in zip(minutes, masks) if m == 63}
    assert full == inter
    bit0 = {int(t) for t, m in zip(minutes, masks) if m & 1}
    assert bit0 == set(res.variants[("MO1", "abs")].times.tolist())
    assert res.combined(methods=["MO1"]).times.size >= res.jumps.times.size


def test_config_validation():
    with pytest.raises(ValueError):
        DetectionConfig(theta=0)
    with pytest.raises(ValueError):
        DetectionConfig(methods=())
    assert DetectionConfig(m=60).alpha == pytest.approx(2 / 61)


def test_result_without_variants_of_one_method():
    r = np.random.default_rng(3).normal(size=505 * 3)
    res = detect_all(make_series(r, 3), DetectionConfig(methods=(("MO3", "abs"), ("MO3", "bv"))))
    assert isinstance(res, DetectionResult) and len(res.variants) == 2
