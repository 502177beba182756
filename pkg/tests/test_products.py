import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rmflab import _rng
from rmflab.errors import CapacityError, PreconditionError
from rmflab.primes import build_prime_table
from rmflab.products import (
    MomentSpec,
    evaluate_grid,
    expected_moment_formula,
    expected_moment_oracle,
    log_expected_moment_oracle,
    log_euler_product,
    moment_error_radius,
    monte_carlo_moment,
)
from rmflab.rmf import ModelKind, constant_sample, sample_model


def test_degenerate_rademacher_product(small_table):
    s = constant_sample("rademacher", -1, 10, small_table)
    F = math.exp(log_euler_product(s, 1.5, 0.0, 0, 10, small_table).real)
    # (3/4)(8/9)(24/25)(48/49)
    assert F == pytest.approx(0.6269387755102041, rel=1e-13)


def test_empty_product_levels(small_table):
    s = sample_model("steinhaus", 1, 100, small_table)
    assert log_euler_product(s, 0.0, 3.0, 5, 100, small_table) == 0


def test_modulus_matches_real_part(small_table):
    s = sample_model("steinhaus", 9, 1000, small_table)
    p = s.primes.astype(float)
    direct = np.prod(np.abs(1 / (1 - s.values * p ** (-(0.6 + 2.5j)))))
    assert math.exp(log_euler_product(s, 0.1, 2.5, 0, 1000, small_table).real) == pytest.approx(direct, rel=1e-12)


def test_sigma_precondition(small_table):
    s = sample_model("steinhaus", 9, 1000, small_table)
    with pytest.raises(PreconditionError):
        log_euler_product(s, -0.5, 0.0, 0, 1000, small_table)


def test_grid_matches_direct_products(small_table):
    s = sample_model("rademacher", 4, 10_000, small_table)
    ts = np.linspace(-2, 2, 9)
    grid = evaluate_grid(s, 0.0, ts, [0, 1, 2], 10_000, small_table)
    for j in (0, 1, 2):
        for t in ts:
            assert grid.row(j)[grid.index_of(t)] == pytest.approx(log_euler_product(s, 0.0, t, j, 10_000, small_table), abs=1e-10)


def test_levels_without_new_primes_coincide(small_table):
    s = sample_model("steinhaus", 4, 100, small_table)
    # 100^(e^-3) ~ 1.26 and 100^(e^-4) ~ 1.09: both levels are empty
    grid = evaluate_grid(s, 0.0, [0.0, 1.0], [3, 4], 100, small_table)
    assert np.array_equal(grid.row(3), grid.row(4))


def test_grid_capacity(small_table):
    s = sample_model("steinhaus", 4, 10_000, small_table)
    import rmflab.products as prod

    old = prod.MAX_GRID_CELLS
    prod.MAX_GRID_CELLS = 100
    try:
        with pytest.raises(CapacityError):
            evaluate_grid(s, 0.0, np.linspace(0, 1, 50), [0], 10_000, small_table)
    finally:
        prod.MAX_GRID_CELLS = old


def test_all_ones_product_is_mertens_third_theorem():
    t = build_prime_table(100_000)
    ones = constant_sample("steinhaus", 1, 100_000, t)
    F = math.exp(log_euler_product(ones, 0.5, 0.0, 0, 100_000, t).real)
    assert F == pytest.approx(math.exp(0.5772156649015329) * math.log(1e5), rel=0.1)


def test_formula_examples(table):
    spec = MomentSpec((0.5, 0.5), (0.0, 0.0), 0.0, 1e4, 1e5)
    f = expected_moment_formula("steinhaus", spec, table)
    # sum_{1e4 < p <= 1e5} 1/p computed with mpmath
    assert f.log_value == pytest.approx(0.2222122318137035, abs=1e-13)
    assert f.value == pytest.approx(1.2488363925536252, rel=1e-13)
    empty = MomentSpec((1.0,), (0.0,), 0.0, 1e4, 1e4)
    assert expected_moment_formula("rademacher", empty, table).value == 1
    one = MomentSpec((1.0,), (3.7,), 0.1, 1e4, 1e5)
    p = table.primes_in(1e4, 1e5).astype(float)
    assert expected_moment_formula("steinhaus", one, table).log_value == pytest.approx(math.fsum(p**-1.2), rel=1e-13)


def test_formula_hypothesis_enforced(table):
    spec = MomentSpec((2.0,), (0.0,), 0.0, 200, 1000)
    with pytest.raises(PreconditionError):
        expected_moment_formula("steinhaus", spec, table)
    expected_moment_oracle("steinhaus", spec, table)


def test_single_prime_oracles(small_table):
    st_spec = MomentSpec((1.0,), (0.0,), 0.0, 4, 5)
    assert expected_moment_oracle("steinhaus", st_spec, small_table) == pytest.approx(1.25, abs=1e-12)
    assert expected_moment_oracle("rademacher", st_spec, small_table) == pytest.approx(1.2, abs=1e-12)


def test_oracle_within_formula_radius(table):
    spec = MomentSpec((0.5, 0.5), (0.0, 0.0), 0.0, 1e4, 1e5)
    for kind in ModelKind:
        f = expected_moment_formula(kind, spec, table)
        o = expected_moment_oracle(kind, spec, table)
        assert abs(o / f.value - 1) <= f.error_radius
    assert moment_error_radius(spec) == pytest.approx(1 / (100 * math.log(1e4)))


@settings(max_examples=12, deadline=None)
@given(
    kind=st.sampled_from(list(ModelKind)),
    alphas=st.lists(st.floats(-1, 1), min_size=1, max_size=3),
    seed=st.integers(0, 1000),
)
def test_oracle_formula_agreement_property(table, kind, alphas, seed):
    ts = np.random.default_rng(seed).uniform(-10, 10, len(alphas))
    spec = MomentSpec(tuple(alphas), tuple(ts), 0.0, 1e4, 1e5)
    f = expected_moment_formula(kind, spec, table)
    assert abs(log_expected_moment_oracle(kind, spec, table) - f.log_value) <= f.error_radius


def test_monte_carlo_single_prime(small_table):
    st_spec = MomentSpec((1.0,), (0.0,), 0.0, 4, 5)
    est = monte_carlo_moment("steinhaus", st_spec, 100_000, 1, small_table)
    assert abs(est.estimate - 1.25) <= 3 * est.stderr
    est = monte_carlo_moment("rademacher", st_spec, 100_000, 1, small_table)
    assert abs(est.estimate - 1.2) <= 3 * est.stderr
    zero = monte_carlo_moment("steinhaus", MomentSpec((0.0, 0.0), (1.0, 2.0), 0.0, 4, 100), 10, 1, small_table)
    assert zero == (1.0, 0.0)


def test_monte_carlo_against_oracle_window(small_table):
    spec = MomentSpec((0.7, -0.3), (0.0, 1.5), 0.0, 100, 2000)
    for kind in ModelKind:
        est = monte_carlo_moment(kind, spec, 20_000, 3, small_table)
        assert abs(est.estimate - expected_moment_oracle(kind, spec, small_table)) <= 4 * est.stderr


def test_monte_carlo_thread_independent(small_table):
    spec = MomentSpec((1.0,), (0.5,), 0.0, 10, 500)
    a = monte_carlo_moment("steinhaus", spec, 5000, 8, small_table, chunk=700, threads=1)
    b = monte_carlo_moment("steinhaus", spec, 5000, 8, small_table, chunk=700, threads=4)
    assert a == b


def test_steinhaus_translation_invariance(small_table):
    ts = [0.0, 7.0, 31.0]
    seeds = _rng.derive_seeds(17, 2000)
    moms = []
    for t in ts:
        vals = np.array([
            math.exp(evaluate_grid(sample_model("steinhaus", int(s), 1000, small_table), 0.0, [t], [0], 1000, small_table).row(0)[0].real)
            for s in seeds
        ])
        moms.append((vals.mean(), vals.std(ddof=1) / math.sqrt(vals.size)))
    for (m1, e1), (m2, e2) in zip(moms, moms[1:]):
        assert abs(m1 - m2) <= 4 * math.hypot(e1, e2)


@pytest.mark.parametrize("kind", ["steinhaus", "rademacher"])
def test_oracle_log_keeps_tiny_exponents(table, kind):
    spec = MomentSpec((1e-120,), (0.236,), 0.0, 1e4, 1e5)
    f = expected_moment_formula(kind, spec, table)
    lo = log_expected_moment_oracle(kind, spec, table)
    assert abs(lo - f.log_value) <= f.error_radius
    assert expected_moment_oracle(kind, spec, table) == 1.0
