import csv
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zerodelay import (StateSpaceModel, bounds, grid_oracle_nrdf, rate_distortion_sweep,
                       reverse_waterfill, solve_nrdf, validate_model)
from zerodelay.exceptions import DimensionTooLarge, InvalidGp, NonPositiveInput, NoConvergence
from zerodelay.nrdf import G_SPHERE, joint_diagonalizer, write_sweep_csv

from .frozen import (GAP_SCALAR, NRDF_EX, NRDF_EX_TOL, UNSTABLE_LOG_SUM_EX, scalar_nrdf,
                     scalar_water_level)


def scalar(a, b=1.0):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)    # a = 1 is marginal
        return validate_model(StateSpaceModel([[a]], [[b]]))


# -- reverse water-filling ----------------------------------------------------------

@pytest.mark.parametrize("lam, D, delta, xi", [
    ((4.0, 1.0), 2.0, (1.0, 1.0), 1.0),
    ((1.0, 1.0), 4.0, (1.0, 1.0), 1.0),
    ((1.0,), 0.5, (0.5,), 0.5),
    ((9.0, 1.0, 0.25), 3.0, (1.75, 1.0, 0.25), 1.75),
])
def test_reverse_waterfill_examples(lam, D, delta, xi):
    d, level = reverse_waterfill(lam, D)
    assert np.allclose(d, delta) and level == pytest.approx(xi)


def test_reverse_waterfill_rejects_nonpositive():
    with pytest.raises(NonPositiveInput):
        reverse_waterfill([1.0, 0.0], 1.0)
    with pytest.raises(NonPositiveInput):
        reverse_waterfill([1.0], -1.0)


@given(st.floats(0.05, 10), st.floats(0.05, 10), st.floats(0.02, 25))
def test_reverse_waterfill_is_optimal_on_a_grid(l1, l2, D):
    delta, _ = reverse_waterfill([l1, l2], D)
    assert delta.sum() <= D * (1 + 1e-12) and np.all(delta <= [l1, l2])

    def cost(d1, d2):
        return 0.5 * (math.log2(l1 / d1) + math.log2(l2 / d2))

    best = cost(*delta)
    for d1 in np.linspace(1e-3, min(l1, D), 400):
        d2 = min(l2, D - d1)
        if d2 > 0:
            assert best <= cost(d1, d2) + 1e-9


# -- solver ------------------------------------------------------------------------

def test_scalar_examples():
    assert solve_nrdf(scalar(1.0), 1.0).rate == pytest.approx(0.5, abs=1e-10)
    assert solve_nrdf(scalar(1.0), 1.0).pi_prior[0, 0] == pytest.approx(2.0, abs=1e-8)
    sol = solve_nrdf(scalar(0.5), 2.0)
    assert sol.rate == 0.0 and sol.method == "lyapunov"
    assert sol.pi_post[0, 0] == pytest.approx(4 / 3)


@pytest.mark.parametrize("D", sorted(NRDF_EX))
def test_example_model_reference_values(example_model, D):
    assert solve_nrdf(example_model, D).rate == pytest.approx(NRDF_EX[D], abs=NRDF_EX_TOL[D])


def test_fixed_point_is_an_upper_bound(example_model):
    for D in (0.5, 1.0, 2.0):
        fp = solve_nrdf(example_model, D, method="fixed_point")
        assert fp.rate >= NRDF_EX[D] - 1e-9
        assert np.trace(fp.pi_post) == pytest.approx(D, abs=1e-8)


def test_fixed_point_optimal_for_scalar():
    for a, b, D in [(1.2, 1.0, 0.3), (0.4, 2.0, 0.7), (-1.7, 0.5, 0.05)]:
        sol = solve_nrdf(scalar(a, b), D, method="fixed_point")
        assert sol.rate == pytest.approx(scalar_nrdf(a, b, D), abs=1e-9)


@pytest.mark.parametrize("D", [0.3, 2.0])
def test_scalar_water_level(D):
    sol = solve_nrdf(scalar(1.2, 1.0), D)
    assert sol.water_level == pytest.approx(scalar_water_level(1.2, 1.0, D), rel=1e-5)


def test_solution_structure(example_model):
    sol = solve_nrdf(example_model, 1.0)
    assert not sol.orthogonal
    assert np.allclose(sol.E @ sol.pi_prior @ sol.E.T, np.diag(sol.lam), atol=1e-10)
    assert np.allclose(sol.E @ sol.pi_post @ sol.E.T, np.diag(sol.delta), atol=1e-10)
    assert np.allclose(np.linalg.norm(sol.E, axis=1), 1.0)
    assert np.all(np.diff(sol.lam) <= 0)
    assert set(sol.summary()) >= {"D", "rate_bits", "pi_post", "E", "residual"}


def test_unknown_method(example_model):
    with pytest.raises(ValueError):
        solve_nrdf(example_model, 1.0, method="newton")


def test_no_convergence_reported(example_model):
    with pytest.raises(NoConvergence) as info:
        solve_nrdf(example_model, 1.0, method="fixed_point", max_iter=3, tol=1e-14,
                   init=np.diag([0.9, 0.1]))
    assert info.value.iterations == 3


def test_unvalidated_model_accepted():
    with pytest.warns(RuntimeWarning):
        assert solve_nrdf(StateSpaceModel([[1.0]], [[1.0]]), 1.0).rate == pytest.approx(0.5)


def _random_model(seed, p):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1.4, 1.4, (p, p))
    B = rng.standard_normal((p, p)) + 2 * np.eye(p)
    return validate_model(StateSpaceModel(A, B))


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.floats(0.1, 4.0))
def test_solution_invariants(seed, p, scale):
    m = _random_model(seed, p)
    D = scale * np.trace(m.W) / p
    sol = solve_nrdf(m, D)
    # unstable floor
    assert sol.rate >= m.spectrum.unstable_log_sum - 1e-6
    # eigen-factored and determinant forms of the rate agree
    det_form = 0.5 * (np.linalg.slogdet(sol.pi_prior)[1]
                      - np.linalg.slogdet(sol.pi_post)[1]) / math.log(2)
    assert 0.5 * np.sum(np.log2(sol.lam / sol.delta)) == pytest.approx(det_form, abs=1e-9)
    # distortion is spent whenever the rate is positive
    if sol.rate > 0:
        assert np.trace(sol.pi_post) == pytest.approx(D, abs=1e-8)
    # feasibility
    gap = np.linalg.eigvalsh(sol.pi_prior - sol.pi_post)
    assert gap.min() >= -1e-9 * max(1.0, gap.max())
    assert np.allclose(sol.pi_prior, m.A @ sol.pi_post @ m.A.T + m.W, atol=1e-9)


@given(st.floats(-2, 2), st.floats(0.1, 2), st.floats(0.01, 5))
def test_scalar_closed_form(a, b, D):
    assert solve_nrdf(scalar(a, b), D).rate == pytest.approx(scalar_nrdf(a, b, D), abs=1e-9)


# -- oracle -------------------------------------------------------------------------

def test_oracle_scalar():
    assert grid_oracle_nrdf(scalar(1.0), 1.0, resolution=10_000) == pytest.approx(0.5, abs=1e-3)


def test_oracle_iid_source():
    m = validate_model(StateSpaceModel(np.zeros((2, 2)), np.eye(2)))
    assert grid_oracle_nrdf(m, 2.0) == pytest.approx(0.0, abs=1e-12)


def test_oracle_example_model(example_model):
    assert grid_oracle_nrdf(example_model, 1.0) == pytest.approx(
        solve_nrdf(example_model, 1.0).rate, abs=1e-3)


def test_oracle_dimension_limit():
    with pytest.raises(DimensionTooLarge):
        grid_oracle_nrdf(StateSpaceModel(np.eye(3) * 0.5, np.eye(3)), 1.0)


@pytest.mark.parametrize("seed", range(3))
def test_oracle_agrees_on_random_scalar(seed):
    rng = np.random.default_rng(seed)
    m = scalar(rng.uniform(-2, 2), rng.uniform(0.1, 2))
    for D in (0.2, 1.0, 3.0):
        assert grid_oracle_nrdf(m, D) == pytest.approx(solve_nrdf(m, D).rate, abs=1e-3)


# -- sweeps and bounds -------------------------------------------------------------

def test_sweep_monotone_and_floored(example_model):
    grid = np.linspace(0.2, 3.0, 15)
    res = rate_distortion_sweep(example_model, grid)
    rates = [sol.rate for _, sol in res]
    assert [d for d, _ in res] == list(grid)
    assert np.all(np.diff(rates) <= 1e-9)
    assert min(rates) >= UNSTABLE_LOG_SUM_EX


def test_sweep_hits_zero_past_lyapunov_trace():
    res = rate_distortion_sweep(scalar(0.5), [1.0, 1.3, 4 / 3, 1.4, 2.0])
    rates = [sol.rate for _, sol in res]
    assert rates[0] > rates[1] > 0
    assert rates[2:] == [0.0, 0.0, 0.0]


def test_sweep_single_point(example_model):
    (d, sol), = rate_distortion_sweep(example_model, [1.0])
    assert sol.rate == solve_nrdf(example_model, 1.0).rate


def test_sweep_validates_grid(example_model):
    with pytest.raises(ValueError):
        rate_distortion_sweep(example_model, [1.0, 0.5])
    with pytest.raises(ValueError):
        rate_distortion_sweep(example_model, [])


def test_sweep_parallel_matches_serial(example_model):
    grid = [0.5, 1.0, 2.0]
    serial = [s.rate for _, s in rate_distortion_sweep(example_model, grid)]
    parallel = [s.rate for _, s in rate_distortion_sweep(example_model, grid, n_jobs=2)]
    assert serial == parallel


def test_sweep_csv(tmp_path, example_model):
    path = tmp_path / "sweep.csv"
    write_sweep_csv(rate_distortion_sweep(example_model, [1.0, 2.0]), path)
    rows = list(csv.reader(path.open()))
    assert rows[0][:2] == ["D", "rate_bits"] and len(rows) == 3


def test_bounds_examples():
    sol1 = solve_nrdf(scalar(0.5), 2.0)
    assert bounds(sol1).upper_scalar == pytest.approx(GAP_SCALAR[1], abs=1e-12)
    m2 = validate_model(StateSpaceModel(np.diag([1.2, 0.5]), np.eye(2)))
    sol2 = solve_nrdf(m2, 0.8)
    b = bounds(sol2, g_p=G_SPHERE)
    assert b.upper_scalar == pytest.approx(sol2.rate + GAP_SCALAR[2], abs=1e-12)
    assert b.upper_lattice == pytest.approx(sol2.rate + 1, abs=1e-12)
    assert bounds(sol2).upper_lattice is None


def test_bounds_rejects_impossible_lattice(example_model):
    sol = solve_nrdf(example_model, 1.0)
    with pytest.raises(InvalidGp):
        bounds(sol, g_p=0.05)
    # the hexagonal lattice is a valid (better than scalar) choice
    hexagonal = 5 / (36 * math.sqrt(3))
    b = bounds(sol, g_p=hexagonal)
    assert sol.rate + 1 < b.upper_lattice < b.upper_scalar


def test_joint_diagonalizer_commuting_case():
    E, lam, delta = joint_diagonalizer(np.diag([1.0, 3.0]), np.diag([0.5, 1.0]))
    assert np.allclose(lam, [3.0, 1.0]) and np.allclose(delta, [1.0, 0.5])
    assert np.allclose(np.abs(E), [[0, 1], [1, 0]])


@given(st.integers(0, 2**32 - 1))
def test_joint_diagonalizer_general(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((2, 2))
    post = M @ M.T + 0.1 * np.eye(2)
    N = rng.standard_normal((2, 2))
    prior = post + N @ N.T + 0.1 * np.eye(2)
    E, lam, delta = joint_diagonalizer(prior, post)
    assert np.allclose(E @ prior @ E.T, np.diag(lam), atol=1e-8 * lam.max())
    assert np.allclose(E @ post @ E.T, np.diag(delta), atol=1e-8 * lam.max())


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_scalar_gap_formula(p):
    sol = solve_nrdf(validate_model(StateSpaceModel(0.9 * np.eye(p), np.eye(p))), 0.2 * p,
                     method="fixed_point")
    b = bounds(sol)
    assert b.space_filling_gap_scalar == pytest.approx(GAP_SCALAR[p], abs=1e-12)

