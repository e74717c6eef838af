"""Acceptance suite: one test per release criterion, each printing a verdict line.

Run with `pytest tests/test_acceptance.py -s` to see every verdict. The
desk-scale benchmark is synthetic blobs (4 classes, 16 features, 2000
samples, moderate overlap); detection quality criteria use the package
defaults, while the training-dynamics criterion uses a sharper-fitting
configuration (higher learning rate, wider layer) noted in its config.
"""

import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats as sps

import oracles
from mislabel_forge.config import DEFAULT_CUTOFF_GRID, DEFAULT_GAMMA_GRID, parse_config
from mislabel_forge.confident_learning import estimate_confident_joint, prune, ProbMatrix
from mislabel_forge.corruption import CorruptionSpec, corrupt
from mislabel_forge.data import generate_blobs, SyntheticSpec
from mislabel_forge.losses import (
    LossSpec,
    blurry,
    blurry_stationary_point,
    ce,
    focal,
    gce,
    loss_batch,
    loss_grad_logits,
    piecewise_zero,
)
from mislabel_forge.metrics import cohens_d, score_detection, wasserstein_1d
from mislabel_forge.net import NetConfig, init_network
from mislabel_forge.pipeline import build_dataset, run_detect, run_trial, _trial_corrupted, _trial_net_config
from mislabel_forge.seeding import derive_seed
from mislabel_forge.training import TrainConfig, accuracy, train

BENCHMARK = """
[dataset]
kind = blobs
classes = 4
samples_per_class = 500
feature_dim = 16
separation = 8.0
spread = 1.4
seed = 11

[corruption]
mode = uniform
eta = 0.3

[train]
epochs = 10
batch_size = 128
learning_rate = 0.01

[network]
hidden_dims = 64
activation = relu
init_seed = 0

[detector]
kind = cl
method = both
folds = 5

[run]
seeds = 101,102,103,104,105
jobs = 1
"""

# Sharper-fitting configuration for the training-dynamics study: the model
# must become confident within ten epochs for the cohort effects to appear.
DYNAMICS_LR = 0.12
DYNAMICS_HIDDEN = (128,)


def verdict(num, name, ok, detail=""):
    print(f"ACCEPTANCE {num:02d} {name}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"criterion {num} ({name}) failed: {detail}"


def budget(num, name, elapsed, limit):
    print(f"ACCEPTANCE {num:02d} {name} runtime: {elapsed:.1f}s (limit {limit:.0f}s)")
    assert elapsed < limit, f"criterion {num} exceeded runtime budget: {elapsed:.1f}s >= {limit}s"


def random_simplex(rng, k):
    p = rng.dirichlet(np.ones(k))
    return np.clip(p, 1e-6, None) / np.clip(p, 1e-6, None).sum()


# ---------------------------------------------------------------------------
# 1. Loss reduction identities
# ---------------------------------------------------------------------------


def test_c01_loss_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst_gce_ce = 0.0
    for _ in range(1000):
        k = int(rng.integers(2, 6))
        p = random_simplex(rng, k)
        y = int(rng.integers(k))
        base = ce(p, y).value
        assert focal(p, y, 0.0).value == base
        assert blurry(p, y, 0.0).value == base
        assert piecewise_zero(p, y, 0.0).value == base
        py = float(np.clip(p[y], 1e-12, 1 - 1e-12))
        assert gce(p, y, 1.0).value == pytest.approx(1.0 - py, rel=1e-12)
        if 0.01 <= py <= 0.99:
            worst_gce_ce = max(worst_gce_ce, abs(gce(p, y, 1e-6).value - base))
    elapsed = time.perf_counter() - t0
    verdict(1, "loss identities", worst_gce_ce < 1e-4, f"max |GCE(q=1e-6) - CE| = {worst_gce_ce:.2e}")
    budget(1, "loss identities", elapsed, 1.0)


# ---------------------------------------------------------------------------
# 2. Analytic gradients vs finite differences
# ---------------------------------------------------------------------------

GRAD_CASES = [
    ("ce", {}),
    ("fl", {"gamma": 2.0}),
    ("gce", {"q": 0.7}),
    ("bl", {"gamma": 0.5}),
    ("pz", {"cutoff": 0.1}),
    ("anl_ce", {"alpha": 1.0, "beta": 1.0}),
    ("anl_fl", {"alpha": 1.0, "beta": 1.0, "gamma": 2.0}),
]


def _eval_grad(kind, params, p, y):
    spec_kw = dict(kind=kind, **params)
    values, grad_p, _ = loss_batch(LossSpec(**spec_kw), np.asarray(p)[None, :], np.asarray([y]))
    return float(grad_p[0])


def test_c02_gradient_correctness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    worst = 0.0
    for kind, params in GRAD_CASES:
        checked = 0
        while checked < 200:
            k = int(rng.integers(2, 6))
            p = random_simplex(rng, k)
            y = int(rng.integers(k))
            py = p[y]
            if not (0.005 <= py <= 0.995):
                continue
            if kind == "pz" and abs(py - params["cutoff"]) < 1e-4:
                continue
            if kind == "bl" and abs(py - blurry_stationary_point(params["gamma"])) < 1e-4:
                continue
            got = _eval_grad(kind, params, p, y)
            want = oracles.fd_gradient(kind, p, y, step=1e-7, **params)
            rel = abs(got - want) / max(abs(got), abs(want), 1e-8)
            worst = max(worst, rel)
            checked += 1
    # blurry sign brackets around the stationary point
    sign_ok = True
    for i in range(100):
        gamma = (0.3, 0.5, 1.0)[i % 3]
        pivot = blurry_stationary_point(gamma)
        delta = 10 ** rng.uniform(-3, -0.7)
        lo, hi = pivot * (1 - delta), pivot * (1 + delta)
        if not (1e-9 < lo and hi < 0.999):
            continue
        k = 4
        p_lo = np.full(k, (1 - lo) / (k - 1))
        p_lo[0] = lo
        p_hi = np.full(k, (1 - hi) / (k - 1))
        p_hi[0] = hi
        sign_ok &= blurry(p_lo, 0, gamma).grad_p > 0
        sign_ok &= blurry(p_hi, 0, gamma).grad_p < 0
    elapsed = time.perf_counter() - t0
    verdict(2, "gradient correctness", worst < 1e-5 and sign_ok, f"max rel err = {worst:.2e}, sign brackets ok = {sign_ok}")
    budget(2, "gradient correctness", elapsed, 5.0)


# ---------------------------------------------------------------------------
# 3. Network backprop under every loss
# ---------------------------------------------------------------------------


def test_c03_network_backprop():
    t0 = time.perf_counter()
    net_cfg = NetConfig(input_dim=5, hidden_dims=(8, 6), num_classes=3, activation="tanh", init_seed=303)
    rng = np.random.default_rng(303)
    base = init_network(net_cfg)
    assert base.num_parameters() <= 1000
    step = 1e-6
    worst = 0.0
    for kind, params in GRAD_CASES:
        spec = LossSpec(kind=kind, **params)
        for _ in range(20):
            net = base.copy()
            x = rng.normal(size=(1, 5))
            y = rng.integers(3, size=1)
            _, probs = net.forward_batch(x)
            if kind == "pz" and abs(probs[0, y[0]] - params["cutoff"]) < 1e-3:
                continue
            _, dlogits = loss_grad_logits(spec, probs, y)
            grads = net.backward(dlogits)

            def loss_at():
                p = net.predict_probs(x)
                v, _, _ = loss_batch(spec, p, y)
                return float(v.mean())

            for layer, (dw, db) in enumerate(grads):
                for arr, g in ((net.weights[layer], dw), (net.biases[layer], db)):
                    it = np.nditer(arr, flags=["multi_index"])
                    for _ in it:
                        idx = it.multi_index
                        keep = arr[idx]
                        arr[idx] = keep + step
                        lp = loss_at()
                        arr[idx] = keep - step
                        lm = loss_at()
                        arr[idx] = keep
                        fd = (lp - lm) / (2 * step)
                        # the 1e-4 floor keeps fd roundoff (~1e-10 absolute) from
                        # masquerading as relative error on near-zero gradients
                        rel = abs(fd - g[idx]) / max(abs(fd), abs(g[idx]), 1e-4)
                        worst = max(worst, rel)
    elapsed = time.perf_counter() - t0
    verdict(3, "network backprop", worst < 1e-5, f"max rel err over {base.num_parameters()} params x 20 inputs x {len(GRAD_CASES)} losses = {worst:.2e}")
    budget(3, "network backprop", elapsed, 30.0)


# ---------------------------------------------------------------------------
# 4. Confident-joint oracle equivalence
# ---------------------------------------------------------------------------


def test_c04_confident_joint_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    all_ok = True
    for _ in range(100):
        n = int(rng.integers(10, 101))
        k = int(rng.integers(2, 6))
        probs = rng.dirichlet(np.ones(k) * rng.uniform(0.3, 3.0), size=n)
        labels = rng.integers(k, size=n)
        matrix = ProbMatrix(probs=probs, fold_index=np.zeros(n, dtype=np.intp))
        joint = estimate_confident_joint(matrix, labels)
        thresholds = oracles.confident_thresholds(probs.tolist(), labels.tolist(), k)
        want = oracles.brute_confident_joint(probs.tolist(), labels.tolist(), thresholds)
        all_ok &= joint.counts.tolist() == want
        for method in ("pbc", "pbnr", "both"):
            got = set(prune(joint, matrix, labels, method).tolist())
            all_ok &= got == oracles.brute_prune(want, probs.tolist(), labels.tolist(), method)
    elapsed = time.perf_counter() - t0
    verdict(4, "confident-joint oracle equivalence", all_ok, "100 randomized instances, counts and all three detection sets exact")
    budget(4, "confident-joint oracle equivalence", elapsed, 10.0)


# ---------------------------------------------------------------------------
# 5. Corruption injector
# ---------------------------------------------------------------------------


def test_c05_corruption_injector():
    t0 = time.perf_counter()
    rng = np.random.default_rng(505)
    n, k, eta = 40000, 4, 0.3
    labels = rng.integers(k, size=n)
    from mislabel_forge.data import LabeledDataset

    data = LabeledDataset.from_clean(np.zeros((n, 1)), labels, num_classes=k)
    out = corrupt(data, CorruptionSpec(mode="uniform", eta=eta, seed=55))
    flipped = np.where(out.corrupted_mask)[0]
    count_ok = flipped.size == round(eta * n)
    no_self = bool(np.all(out.observed_labels[flipped] != out.clean_labels[flipped]))
    slots = []
    for i in flipped:
        others = [c for c in range(k) if c != out.clean_labels[i]]
        slots.append(others.index(out.observed_labels[i]))
    counts = np.bincount(slots, minlength=k - 1)
    _, pvalue = sps.chisquare(counts)
    elapsed = time.perf_counter() - t0
    verdict(
        5,
        "corruption injector",
        count_ok and no_self and pvalue > 0.001,
        f"flips = {flipped.size}, chi-square p = {pvalue:.4f}",
    )
    budget(5, "corruption injector", elapsed, 5.0)


# ---------------------------------------------------------------------------
# 6. Metric unit cases
# ---------------------------------------------------------------------------


def test_c06_metric_unit_cases():
    t0 = time.perf_counter()
    rng = np.random.default_rng(606)
    exact = True
    for _ in range(500):
        n = int(rng.integers(1, 60))
        mask = rng.random(n) < rng.uniform(0, 1)
        flags = np.where(rng.random(n) < rng.uniform(0, 1))[0]
        rep = score_detection(flags, mask)
        tp, fp, tn, fn = oracles.brute_metrics(flags, mask.tolist())
        exact &= (rep.tp, rep.fp, rep.tn, rep.fn) == (tp, fp, tn, fn)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        exact &= rep.precision == prec and rep.recall == rec
        f1 = 2 * prec * rec / (prec + rec) if prec and rec else 0.0
        tnr = tn / (tn + fp) if tn + fp else 0.0
        exact &= rep.f1 == f1 and rep.balanced_accuracy == 0.5 * (rec + tnr)
    shift_ok = True
    for _ in range(50):
        a = rng.normal(size=int(rng.integers(2, 100)))
        delta = float(rng.uniform(0.1, 5))
        shift_ok &= abs(wasserstein_1d(a, a + delta) - delta) < 1e-12
    affine_ok = True
    for _ in range(50):
        a = rng.normal(size=int(rng.integers(2, 40)))
        b = rng.normal(loc=1, size=int(rng.integers(2, 40)))
        s = float(rng.uniform(0.2, 4)) * float(rng.choice([-1, 1]))
        t = float(rng.normal())
        affine_ok &= abs(cohens_d(s * a + t, s * b + t) - cohens_d(a, b)) < 1e-12
    elapsed = time.perf_counter() - t0
    verdict(6, "metric unit cases", exact and shift_ok and affine_ok,
            f"counts exact = {exact}, shift ok = {shift_ok}, affine ok = {affine_ok}")
    budget(6, "metric unit cases", elapsed, 5.0)


# ---------------------------------------------------------------------------
# 7 & 8. End-to-end robustness trend and the delay ablation
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def benchmark():
    """Shared desk-scale benchmark runs at eta = 0.3: CE, GCE, BL grid, PZ grid, PZ d=0."""
    t0 = time.perf_counter()
    cfg = parse_config(text=BENCHMARK)
    clean = build_dataset(cfg)

    def mean_f1(loss):
        trials = [run_trial(clean, cfg.with_loss(loss), s) for s in cfg.seeds]
        return float(np.mean([t.report.f1 for t in trials]))

    results = {
        "ce": mean_f1(LossSpec(kind="ce")),
        "gce": mean_f1(LossSpec(kind="gce", q=0.7)),
        "bl": {g: mean_f1(LossSpec(kind="bl", gamma=g)) for g in DEFAULT_GAMMA_GRID},
        "pz": {c: mean_f1(LossSpec(kind="pz", cutoff=c, delay=1)) for c in DEFAULT_CUTOFF_GRID},
    }
    best_c = max(results["pz"], key=results["pz"].get)
    results["pz_d0_at_best_c"] = mean_f1(LossSpec(kind="pz", cutoff=best_c, delay=0))
    results["best_c"] = best_c
    results["best_gamma"] = max(results["bl"], key=results["bl"].get)
    # clean-test accuracy under the benchmark training configuration
    test_set = generate_blobs(replace(cfg.blobs, seed=999))
    net = init_network(cfg.net_config(clean.feature_dim, clean.num_classes))
    train(net, clean, cfg.train_config())
    results["clean_test_acc"] = accuracy(net, test_set)
    results["elapsed"] = time.perf_counter() - t0
    results["cfg"] = cfg
    return results


def test_c07_end_to_end_robustness_trend(benchmark):
    r = benchmark
    acc_ok = 0.90 <= r["clean_test_acc"] <= 0.97
    best_bl = r["bl"][r["best_gamma"]]
    best_pz = r["pz"][r["best_c"]]
    margin_bl = best_bl - r["ce"]
    margin_pz = best_pz - r["ce"]
    vs_gce_bl = best_bl - (r["gce"] - 0.01)
    vs_gce_pz = best_pz - (r["gce"] - 0.01)
    ok = acc_ok and margin_bl >= 0.02 and margin_pz >= 0.02 and vs_gce_bl >= 0 and vs_gce_pz >= 0
    verdict(
        7,
        "end-to-end robustness trend",
        ok,
        f"clean acc = {r['clean_test_acc']:.3f}, CE = {r['ce']:.4f}, GCE = {r['gce']:.4f}, "
        f"BL(gamma={r['best_gamma']:g}) = {best_bl:.4f} (+{margin_bl:.4f}), "
        f"PZ(c={r['best_c']:g}, d=1) = {best_pz:.4f} (+{margin_pz:.4f})",
    )
    budget(7, "end-to-end robustness trend", r["elapsed"], 600.0)


def test_c08_delay_ablation(benchmark):
    r = benchmark
    d1 = r["pz"][r["best_c"]]
    d0 = r["pz_d0_at_best_c"]
    verdict(8, "delay ablation shape", d1 >= d0, f"PZ(c={r['best_c']:g}): F1 d=1 {d1:.4f} >= d=0 {d0:.4f}")
    # runtime was included in the shared benchmark budget of criterion 7


# ---------------------------------------------------------------------------
# 9. Gradient-cohort dynamics
# ---------------------------------------------------------------------------


def test_c09_gradient_cohort_dynamics():
    t0 = time.perf_counter()
    cfg = parse_config(text=BENCHMARK)
    cfg = replace(
        cfg,
        corruption=cfg.corruption.with_eta(0.4),
        learning_rate=DYNAMICS_LR,
        network_hidden=DYNAMICS_HIDDEN,
    )
    clean = build_dataset(cfg)

    def final_epoch_grads(loss, seed):
        corrupted = _trial_corrupted(clean, cfg, seed)
        net = init_network(_trial_net_config(cfg, clean.feature_dim, clean.num_classes, seed))
        tcfg = TrainConfig(
            epochs=cfg.epochs,
            learning_rate=cfg.learning_rate,
            loss=loss,
            batch_size=cfg.batch_size,
            shuffle_seed=derive_seed(seed, "shuffle"),
            record_grad_per_epoch=True,
        )
        _, trace = train(net, corrupted, tcfg)
        return trace.grad_p[-1], corrupted.corrupted_mask

    seeds = (101, 102, 103)
    ce_ok, bl_fracs, pz_fracs = True, [], []
    for seed in seeds:
        g, m = final_epoch_grads(LossSpec(kind="ce"), seed)
        ce_ok &= np.median(g[m]) < np.median(g[~m])
    for seed in seeds:
        g, m = final_epoch_grads(LossSpec(kind="bl", gamma=0.5), seed)
        bl_fracs.append(float(np.mean(g[m] > 0)))
    for seed in seeds:
        g, m = final_epoch_grads(LossSpec(kind="pz", cutoff=0.05, delay=1), seed)
        pz_fracs.append(float(np.mean(g[m] == 0.0)))
    elapsed = time.perf_counter() - t0
    bl_ok = all(f >= 0.6 for f in bl_fracs)
    pz_ok = all(f >= 0.9 for f in pz_fracs)
    verdict(
        9,
        "gradient-cohort dynamics",
        ce_ok and bl_ok and pz_ok,
        f"CE medians ordered = {ce_ok}, BL positive fracs = {[f'{f:.2f}' for f in bl_fracs]}, "
        f"PZ zero fracs = {[f'{f:.2f}' for f in pz_fracs]}",
    )
    budget(9, "gradient-cohort dynamics", elapsed, 300.0)


# ---------------------------------------------------------------------------
# 10. AUM separation ordering
# ---------------------------------------------------------------------------


def test_c10_aum_separation_ordering():
    t0 = time.perf_counter()
    cfg = parse_config(text=BENCHMARK.replace("kind = cl", "kind = aum"))
    cfg = replace(cfg, corruption=cfg.corruption.with_eta(0.1))
    clean = build_dataset(cfg)
    wins_d = wins_w = 0
    details = []
    for seed in cfg.seeds:
        r_ce = run_trial(clean, cfg.with_loss(LossSpec(kind="ce")), seed).report
        r_pz = run_trial(clean, cfg.with_loss(LossSpec(kind="pz", cutoff=0.025, delay=1)), seed).report
        wins_d += r_pz.cohens_d > r_ce.cohens_d
        wins_w += r_pz.wasserstein > r_ce.wasserstein
        details.append(f"{seed}: d {r_ce.cohens_d:.2f}->{r_pz.cohens_d:.2f}")
    elapsed = time.perf_counter() - t0
    verdict(
        10,
        "AUM separation ordering",
        wins_d >= 4 and wins_w >= 4,
        f"cohens_d wins {wins_d}/5, wasserstein wins {wins_w}/5 ({'; '.join(details)})",
    )
    budget(10, "AUM separation ordering", elapsed, 600.0)


# ---------------------------------------------------------------------------
# 11. Determinism of the detect pipeline
# ---------------------------------------------------------------------------


def test_c11_determinism(tmp_path):
    cfg = parse_config(text=BENCHMARK, overrides={"run.seeds": "101,102"})
    a = run_detect(cfg, tmp_path / "a", write_outputs=True)
    b = run_detect(cfg, tmp_path / "b", write_outputs=True)
    ja = json.loads((tmp_path / "a" / "report.json").read_text())
    jb = json.loads((tmp_path / "b" / "report.json").read_text())
    ja.pop("created_at")
    jb.pop("created_at")
    verdict(11, "determinism", ja == jb, "repeated detect runs agree modulo timestamp")
