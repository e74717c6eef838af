"""Detection scores and separation statistics against brute-force counting."""

import numpy as np
import pytest
from scipy import stats as sps

import oracles
from mislabel_forge.errors import ConfigurationError
from mislabel_forge.metrics import cohens_d, score_detection, separation_stats, wasserstein_1d


def test_symmetric_f1_case():
    # tp=8, fp=2, fn=2, tn=8
    mask = np.array([True] * 10 + [False] * 10)
    flags = np.concatenate([np.arange(8), np.array([10, 11])])
    rep = score_detection(flags, mask)
    assert (rep.tp, rep.fp, rep.fn, rep.tn) == (8, 2, 2, 8)
    assert rep.precision == pytest.approx(0.8)
    assert rep.recall == pytest.approx(0.8)
    assert rep.f1 == pytest.approx(0.8)


def test_perfect_detection():
    mask = np.array([True, False, True, False, False])
    rep = score_detection(np.array([0, 2]), mask)
    assert rep.f1 == 1.0 and rep.balanced_accuracy == 1.0


def test_balanced_accuracy_formula():
    # TPR = 1, TNR = 0.5 -> BA = 0.75
    mask = np.array([True, True, False, False])
    rep = score_detection(np.array([0, 1, 2]), mask)
    assert rep.recall == 1.0
    assert rep.balanced_accuracy == pytest.approx(0.75)


def test_zero_denominator_conventions():
    mask = np.zeros(5, dtype=bool)
    rep = score_detection(np.array([], dtype=int), mask)
    assert rep.precision == 0.0 and rep.recall == 0.0 and rep.f1 == 0.0
    assert rep.balanced_accuracy == pytest.approx(0.5)  # TNR = 1, TPR = 0
    rep = score_detection(np.array([0]), mask)  # a flag with nothing corrupted
    assert rep.precision == 0.0 and rep.f1 == 0.0


def test_counts_match_oracle_randomized():
    rng = np.random.default_rng(6)
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        mask = rng.random(n) < rng.uniform(0, 1)
        flags = np.where(rng.random(n) < rng.uniform(0, 1))[0]
        rep = score_detection(flags, mask)
        want = oracles.brute_metrics(flags, mask.tolist())
        assert (rep.tp, rep.fp, rep.tn, rep.fn) == want
        assert rep.tp + rep.fp + rep.tn + rep.fn == n
        if rep.precision and rep.recall:
            assert min(rep.precision, rep.recall) - 1e-12 <= rep.f1 <= max(rep.precision, rep.recall) + 1e-12
        if rep.tp == 0:
            assert rep.f1 == 0.0


def test_include_mask_restricts_evaluation():
    mask = np.array([True, True, False, False])
    include = np.array([True, False, True, False])
    rep = score_detection(np.array([0, 1]), mask, include=include)
    assert (rep.tp, rep.fp, rep.tn, rep.fn) == (1, 0, 1, 0)


def test_random_detector_balanced_accuracy_near_half():
    rng = np.random.default_rng(9)
    n = 200
    mask = np.zeros(n, dtype=bool)
    mask[:40] = True
    bas = []
    for _ in range(10000):
        flags = rng.random(n) < 0.3
        bas.append(score_detection(flags, mask).balanced_accuracy)
    assert abs(np.mean(bas) - 0.5) < 0.02


# ---------------------------------------------------------------------------
# Cohen's d
# ---------------------------------------------------------------------------


def test_cohens_d_basics():
    rng = np.random.default_rng(0)
    a = rng.normal(size=50)
    assert cohens_d(a, a) == 0.0
    b = np.array([0.0, 2.0])
    c = np.array([1.0, 3.0])  # means 1 apart, pooled std 2 -> wait, computed below
    pooled = np.sqrt((np.var(b, ddof=1) + np.var(c, ddof=1)) / 2)
    assert cohens_d(b, c) == pytest.approx(1.0 / pooled)


def test_cohens_d_unit_case():
    # means 0 and 1 with pooled std exactly 1
    a = np.array([-1.0, 1.0]) / np.sqrt(2)  # var = 1, mean 0
    b = a + 1.0
    assert cohens_d(a, b) == pytest.approx(1.0, rel=1e-12)


def test_cohens_d_affine_equivariance():
    rng = np.random.default_rng(13)
    for _ in range(100):
        a = rng.normal(size=rng.integers(2, 30))
        b = rng.normal(loc=1.0, size=rng.integers(2, 30))
        s = rng.uniform(0.1, 5) * rng.choice([-1, 1])
        t = rng.normal()
        base = cohens_d(a, b)
        mapped = cohens_d(s * a + t, s * b + t)
        assert mapped == pytest.approx(base, rel=1e-9, abs=1e-12)


def test_cohens_d_degenerate():
    assert np.isnan(cohens_d(np.array([1.0, 1.0]), np.array([1.0, 1.0])))
    with pytest.raises(ConfigurationError):
        cohens_d(np.array([1.0]), np.array([1.0, 2.0]))


# ---------------------------------------------------------------------------
# Wasserstein
# ---------------------------------------------------------------------------


def test_wasserstein_identity_and_shift():
    rng = np.random.default_rng(1)
    a = rng.normal(size=64)
    assert wasserstein_1d(a, a) == 0.0
    for delta in (0.25, 1.0, 3.5):
        assert abs(wasserstein_1d(a, a + delta) - delta) < 1e-12


def test_wasserstein_equal_size_matches_naive_sort():
    rng = np.random.default_rng(2)
    for _ in range(100):
        n = int(rng.integers(1, 50))
        a = rng.normal(size=n)
        b = rng.normal(loc=rng.uniform(-2, 2), size=n)
        assert wasserstein_1d(a, b) == pytest.approx(oracles.naive_wasserstein_equal(a, b), rel=1e-12)


def test_wasserstein_unequal_matches_scipy():
    rng = np.random.default_rng(3)
    for _ in range(100):
        a = rng.normal(size=int(rng.integers(2, 60)))
        b = rng.normal(loc=rng.uniform(-1, 1), scale=rng.uniform(0.5, 2), size=int(rng.integers(2, 60)))
        assert wasserstein_1d(a, b) == pytest.approx(sps.wasserstein_distance(a, b), rel=1e-9, abs=1e-12)


def test_wasserstein_metric_properties():
    rng = np.random.default_rng(4)
    for _ in range(200):
        a = rng.normal(size=int(rng.integers(2, 20)))
        b = rng.normal(size=int(rng.integers(2, 20)))
        c = rng.normal(size=int(rng.integers(2, 20)))
        dab = wasserstein_1d(a, b)
        assert dab >= 0
        assert dab == pytest.approx(wasserstein_1d(b, a), rel=1e-12)
        assert dab <= wasserstein_1d(a, c) + wasserstein_1d(c, b) + 1e-12
    # zero iff identical empirical distributions
    a = np.array([1.0, 2.0, 3.0])
    assert wasserstein_1d(a, np.array([3.0, 1.0, 2.0])) == 0.0
    assert wasserstein_1d(a, np.array([1.0, 2.0, 3.5])) > 0
    with pytest.raises(ConfigurationError):
        wasserstein_1d(np.array([]), a)


def test_separation_stats():
    rng = np.random.default_rng(5)
    values = np.concatenate([rng.normal(size=50), rng.normal(loc=3, size=50)])
    mask = np.array([False] * 50 + [True] * 50)
    d, w = separation_stats(values, mask)
    assert d == pytest.approx(cohens_d(values[mask], values[~mask]))
    assert w == pytest.approx(wasserstein_1d(values[mask], values[~mask]))
    # degenerate cohorts are reported as NaN
    d, w = separation_stats(values, np.zeros(100, dtype=bool))
    assert np.isnan(d) and np.isnan(w)
