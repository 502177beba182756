"""Acceptance criteria, one test each, with a PASS/FAIL line per criterion.

Every criterion returns its verdict plus a canonical byte string of its
outputs; the determinism criterion re-runs all of them with 8 threads and
compares those bytes.
"""

import json
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from rmflab import _rng
from rmflab.experiments import (
    ExperimentConfig,
    emit_report,
    gram_reference,
    prime_table,
    run_ballot,
    run_covariance_survey,
    run_moment_scaling,
    run_large_value_probe,
)
from rmflab.gaussian import (
    FullRectangle,
    covariance_matrix,
    direct_covariance_sum,
    hybrid_large_prime_sums,
    max_comparison_experiment,
    normal_approx_experiment,
    perron_covariance,
    perron_step,
)
from rmflab.products import MomentSpec, expected_moment_formula, log_expected_moment_oracle, monte_carlo_moment
from rmflab.rmf import ModelKind, sample_model
from rmflab.sums import XGrid, parseval_residual, partial_sums

SEED = 1


def _bytes(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, default=lambda a: np.asarray(a).tolist()).encode()


def _record(n: int, passed: bool, detail: str, seconds: float | None = None) -> None:
    timing = "" if seconds is None else f" [{seconds:.1f}s]"
    line = f"CRITERION {n}: {'PASS' if passed else 'FAIL'} {detail}{timing}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def _report_files(record, tmp_path) -> bytes:
    emit_report(record, tmp_path)
    return (tmp_path / "summary.json").read_bytes() + (tmp_path / "replicas.csv").read_bytes()


# ---------------------------------------------------------------- criteria


def criterion_1(threads, tmp_path):
    X = 50
    table = prime_table(2500)
    grid = XGrid.log_spaced(X, 20, math.log(51) / math.log(X), 2.0)
    assert grid.points.max() <= 2500
    worst, out = 0.0, []
    for kind in ModelKind:
        for seed in range(10):
            s = sample_model(kind, _rng.derive_seed(SEED, seed), 2500, table)
            series = partial_sums(s, grid, table)
            rel = series.residuals / (1 + np.abs(series.totals))
            worst = max(worst, float(rel.max()))
            out.append(series.totals)
    ok = worst <= 1e-9
    return ok, f"max |total - smooth - large|/(1+|total|) = {worst:.2e} (tol 1e-09)", 1.0, _bytes([np.real(out), np.imag(out)])


def criterion_2(threads, tmp_path):
    table = prime_table(100_000)
    g = _rng.generator(SEED, 2)
    worst, gaps, ok = 0.0, [], True
    for trial in range(60):
        kind = list(ModelKind)[trial % 2]
        k = 1 + trial % 3
        alphas = g.uniform(-1.5, 1.5, k)
        alphas *= min(1.0, 3.0 / np.abs(alphas).sum())
        spec = MomentSpec(tuple(alphas), tuple(g.uniform(-10, 10, k)), 0.0, 1e4, 1e5)
        f = expected_moment_formula(kind, spec, table)
        gap = abs(log_expected_moment_oracle(kind, spec, table) - f.log_value)
        gaps.append(gap)
        worst = max(worst, gap / f.error_radius)
        ok &= gap <= f.error_radius
    return ok, f"60 random specs, worst |log oracle - log formula| / radius = {worst:.3f} (tol 1)", 10.0, _bytes(gaps)


def criterion_3(threads, tmp_path):
    table = prime_table(10)
    spec = MomentSpec((1.0,), (0.0,), 0.0, 4, 5)
    st = monte_carlo_moment("steinhaus", spec, 100_000, SEED, table, threads=threads)
    rd = monte_carlo_moment("rademacher", spec, 100_000, SEED, table, threads=threads)
    zs, zr = abs(st.estimate - 1.25) / st.stderr, abs(rd.estimate - 1.2) / rd.stderr
    ok = zs <= 3 and zr <= 3
    detail = f"Steinhaus {st.estimate:.5f} vs 1.25 ({zs:.2f} se), Rademacher {rd.estimate:.5f} vs 1.2 ({zr:.2f} se)"
    return ok, detail, 5.0, _bytes([st.estimate, st.stderr, rd.estimate, rd.stderr])


def criterion_4(threads, tmp_path):
    trivial = parseval_residual({1: 1.0}, 0.5, 1e3)
    r1 = abs(trivial.rhs - 1.0)
    g = _rng.generator(SEED, 4)
    coef = g.standard_normal(50) + 1j * g.standard_normal(50)
    res = parseval_residual(coef, 0.5, 1e3)
    r2 = abs(res.lhs - res.rhs) / abs(res.lhs)
    ok = r1 <= 1e-3 and r2 <= 0.01
    return ok, f"trivial rel err {r1:.2e} (tol 1e-3), 50 random coefficients rel err {r2:.2e} (tol 1e-2)", 10.0, _bytes([r1, r2])


def criterion_5(threads, tmp_path):
    X = 50
    table = prime_table(2500)
    pts = XGrid.log_spaced(X, 4, math.log(60) / math.log(X), math.log(2000) / math.log(X)).points
    grid = XGrid.from_points(X, pts)
    worst_z, worst_gram, worst_neg, out = 0.0, 0.0, 0.0, []
    for i, kind in enumerate(ModelKind):
        s = sample_model(kind, _rng.derive_seed(SEED, 50 + i), 2000, table)
        M = covariance_matrix(s, grid, X, table, threads=threads).matrix
        Z = hybrid_large_prime_sums(s, pts, X, table, 100_000, _rng.derive_seed(SEED, 60 + i), threads=threads).real
        for a in range(len(pts)):
            for b in range(a, len(pts)):
                prod = Z[:, a] * Z[:, b]
                z = abs(prod.mean() - M[a, b]) / (prod.std(ddof=1) / math.sqrt(prod.size))
                worst_z = max(worst_z, z)
        G = gram_reference(s, pts, X)
        worst_gram = max(worst_gram, float(np.abs(M - G).max()))
        lam = np.linalg.eigvalsh(M)
        worst_neg = min(worst_neg, float(lam.min() / lam.max()))
        out.append([M, Z[:50]])
    ok = worst_z <= 3 and worst_gram <= 1e-10 and worst_neg >= -1e-9
    detail = f"worst Monte Carlo deviation {worst_z:.2f} se (tol 3), Gram residual {worst_gram:.1e} (tol 1e-10), min eig/max eig {worst_neg:.1e} (tol -1e-9)"
    return ok, detail, 30.0, _bytes(out)


def criterion_6(threads, tmp_path):
    X = 100
    table = prime_table(int(X ** (4 / 3)) + 1)
    s = sample_model("steinhaus", _rng.derive_seed(SEED, 6), int(X ** (4 / 3)), table)
    pts = XGrid.log_spaced(X, 4).points
    pairs = [(pts[0], pts[0]), (pts[0], pts[-1]), (pts[1], pts[2]), (pts[3], pts[3])]
    step = perron_step(X)

    def worst(h):
        d = 0.0
        for x, y in pairs:
            direct = direct_covariance_sum(s, x, y, X, table)
            p = perron_covariance(s, x, y, X, FullRectangle(X**0.75), False, table, step=h)
            d = max(d, abs(p - direct) / abs(direct))
        return d

    d1, d2 = worst(step), worst(step / 2)
    ok = d1 <= 0.1 and d2 < d1
    detail = f"relative discrepancy {d1:.6e} at step 1/(20 log X) (tol 0.1), {d2:.6e} at half step (must decrease)"
    return ok, detail, 60.0, _bytes([d1, d2])


def criterion_7(threads, tmp_path):
    a = max_comparison_experiment(1024, 0.0, 0.01, 10_000, SEED, threads=threads)
    b = max_comparison_experiment(4096, 0.005, 0.01, 10_000, SEED, threads=threads)
    target = math.sqrt(2 * math.log(1024))
    ok = abs(a.median_max - target) <= 0.2 and b.probability <= 0.05
    detail = (
        f"median max of 1024 = {a.median_max:.3f} vs {target:.3f} +- 0.2; "
        f"P(max <= {b.threshold:.3f}) at n=4096 = {b.probability:.4f} (tol <= 0.05)"
    )
    return ok, detail, 30.0, _bytes([a.median_max, a.probability, b.median_max, b.probability])


def criterion_8(threads, tmp_path):
    X = 50
    table = prime_table(2500)
    grid = XGrid.log_spaced(X, 8)
    s = sample_model("steinhaus", _rng.derive_seed(SEED, 8), int(grid.points.max()), table)
    rep = normal_approx_experiment(s, grid, X, 10_000, SEED, table, threads=threads)
    ok = rep.sup_distance <= 0.05
    return ok, f"sup CDF distance {rep.sup_distance:.4f} (tol 0.05)", 120.0, _bytes([rep.sup_distance, rep.hybrid_max, rep.gaussian_max])


def criterion_9(threads, tmp_path):
    rec = run_ballot(ExperimentConfig(experiment="ballot", replicas=1_000_000, master_seed=SEED, threads=threads))
    slope = rec.summary["slope"]
    ok = slope is not None and -1.8 <= slope <= -1.2
    probs = ", ".join(f"{p:.4f}" for p in rec.columns["probability"])
    return ok, f"slope {slope:.3f} in [-1.8, -1.2]; P = {probs} for J = 16, 64, 256", 60.0, _report_files(rec, tmp_path)


def criterion_10(threads, tmp_path):
    rec = run_large_value_probe(ExperimentConfig(experiment="theorem2", X=1e4, W=(1, 2, 3), replicas=300, master_seed=SEED, threads=threads))
    probs = [w["probability"] for w in rec.summary["per_W"]]
    ok = all(a <= b for a, b in zip(probs, probs[1:])) and probs[-1] >= 0.8
    return ok, f"success probabilities {probs} for W = 1, 2, 3 (nondecreasing, >= 0.8 at W=3)", 300.0, _report_files(rec, tmp_path)


def criterion_11(threads, tmp_path):
    rec = run_moment_scaling(ExperimentConfig(experiment="moments", replicas=2000, master_seed=SEED, threads=threads))
    s = rec.summary
    ok = s["strictly_decreasing"] and s["adjacent_separated"]
    cis = "; ".join(f"x={r['x']:.0e}: {r['mean']:.4f} [{r['ci_low']:.4f}, {r['ci_high']:.4f}]" for r in s["per_x"])
    detail = (
        f"means strictly decreasing: {s['strictly_decreasing']}, consecutive 95% CIs disjoint: {s['adjacent_separated']}, "
        f"10^2 vs 10^6 CIs disjoint: {s['endpoints_separated']}; {cis}"
    )
    return ok, detail, 600.0, _report_files(rec, tmp_path)


def criterion_12(threads, tmp_path):
    rec = run_covariance_survey(ExperimentConfig(experiment="covariance", X=1e3, grid_points=30, replicas=100, master_seed=SEED, threads=threads))
    files = _report_files(rec, tmp_path)
    archived = json.loads((tmp_path / "summary.json").read_text())["summary"]
    frac = rec.summary["fraction_within_bound"]
    ok = frac >= 0.9 and sum(archived["histogram_counts"]) > 0
    detail = f"max_x #B_x <= {rec.summary['count_bound']} in {frac:.0%} of seeds (tol >= 90%); worst count {max(rec.columns['max_count'])}; histogram archived"
    return ok, detail, 300.0, files


CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 13)}
_OUTPUTS: dict[int, bytes] = {}


def _run(n, threads, tmp_path):
    t0 = time.perf_counter()
    ok, detail, budget, blob = CRITERIA[n](threads, tmp_path)
    return ok, detail, budget, blob, time.perf_counter() - t0


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, tmp_path):
    ok, detail, budget, blob, secs = _run(n, 1, tmp_path)
    _OUTPUTS[n] = blob
    fast = secs <= budget
    if not fast:
        detail += f"; runtime over the {budget:.0f}s budget"
    _record(n, ok and fast, detail, secs)
    assert ok and fast, detail


def test_criterion_13_determinism(tmp_path):
    mismatched = []
    for n in sorted(CRITERIA):
        if n not in _OUTPUTS:
            _OUTPUTS[n] = _run(n, 1, tmp_path / f"c{n}-1")[3]
        blob = _run(n, 8, tmp_path / f"c{n}-8")[3]
        if blob != _OUTPUTS[n]:
            mismatched.append(n)
    ok = not mismatched
    detail = "outputs of criteria 1-12 byte-identical with 1 and 8 threads" if ok else f"outputs differ for criteria {mismatched}"
    _record(13, ok, detail)
    assert ok, detail
