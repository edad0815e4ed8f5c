import math

import numpy as np
import pytest

from oracles import char_poly, expm_series, scattered_product
from tsconsensus.spectral import (
    ConditionsViolated,
    GammaSpec,
    NoConvergenceError,
    NonRegressiveError,
    NotSymmetricError,
    compute_bound_constants,
    eigendecompose,
    lemma1_bounds,
    lemma3_bound,
    modal_factors,
    require_conditions,
    scalar_ts_exponential,
    spectral_norm_exponential,
    ts_matrix_exponential,
)
from tsconsensus.timescale import FamilySpec, build_explicit, build_family, decompose

# frozen from the pure-python oracles in oracles.py and closed forms
LAMBDA_MIN = 2 - math.sqrt(2)
M_EXACT = math.exp(-LAMBDA_MIN)
DENSE_UNIT_NORM = 0.3098791564968262  # exp(-2 * (2 - sqrt 2))
EX5_LEMMA1_DENSE = 0.6769711017659948  # 0.557 ** (2 / 3)
EX6_LEMMA3_AT_9 = 3.501520212234768e-04
EX6_NORM_AT_9 = 7.759342860805822e-06
EX6_SCALAR_AT_10 = 41.64898022135139  # exp(5p) (1 + p)^4, p = 0.25 / M


class TestEigendecompose:
    def test_leader_matrix(self, leader_b):
        eig = eigendecompose(leader_b)
        expected = sorted([2 - math.sqrt(2), 2 + math.sqrt(2), 3.0, 4.0])
        assert eig.lambdas == pytest.approx(expected, abs=1e-9)
        for lam in eig.lambdas:
            assert abs(char_poly(leader_b.tolist(), lam)) < 1e-9
        # the printed value 2 is not a root
        assert char_poly(leader_b.tolist(), 2.0) == pytest.approx(-4.0)

    def test_residual_and_orthogonality(self, leader_b):
        eig = eigendecompose(leader_b)
        U = eig.basis
        assert np.allclose(U.T @ U, np.eye(4), atol=1e-10)
        assert np.linalg.norm(leader_b - eig.compose(eig.lambdas)) <= 1e-10 * np.linalg.norm(leader_b)

    def test_identity(self):
        eig = eigendecompose(np.eye(3))
        assert eig.lambdas.tolist() == [1.0, 1.0, 1.0]
        assert np.array_equal(eig.basis, np.eye(3))
        assert eig.sweeps == 0

    def test_diagonal_sorted(self):
        eig = eigendecompose(np.diag([5.0, -1.0]))
        assert eig.lambdas.tolist() == [-1.0, 5.0]

    def test_not_symmetric(self):
        with pytest.raises(NotSymmetricError):
            eigendecompose([[1.0, 2.0], [2.0 + 1e-15, 1.0]])
        with pytest.raises(NotSymmetricError):
            eigendecompose([[1.0, 2.0, 3.0]])

    def test_sweep_budget(self, leader_b):
        with pytest.raises(NoConvergenceError):
            eigendecompose(leader_b, max_sweeps=0)

    def test_bad_tolerance(self, leader_b):
        with pytest.raises(ValueError):
            eigendecompose(leader_b, tol=0)


class TestExponential:
    def test_identity_at_start(self, leader_b):
        ts = build_explicit([(0, 1)])
        eig = eigendecompose(leader_b)
        out = ts_matrix_exponential(ts, eig, GammaSpec.constant(2), 0.5, 0.5)
        assert np.array_equal(out, np.eye(4))

    def test_scattered_path_matches_product(self, leader_b):
        b = leader_b / 10
        ts = build_explicit([(k, k) for k in range(6)])
        eig = eigendecompose(b)
        got = ts_matrix_exponential(ts, eig, GammaSpec.constant(1), 0, 5)
        assert np.allclose(got, scattered_product(b, [(1.0, 1.0)] * 5), atol=1e-13)
        assert np.allclose(modal_factors(ts, eig, GammaSpec.constant(1), 0, 5), (1 - eig.lambdas) ** 5)

    def test_dense_path_matches_series(self, leader_b):
        ts = build_explicit([(0, 1)])
        eig = eigendecompose(leader_b)
        got = ts_matrix_exponential(ts, eig, GammaSpec.constant(2), 0, 1)
        assert np.allclose(got, expm_series(-2 * leader_b), atol=1e-12)

    def test_mixed_path_matches_series_and_product(self, leader_b):
        b = leader_b / 8
        ts = build_explicit([(0, 0.5), (1.5, 2.0)])
        eig = eigendecompose(b)
        g = GammaSpec.constant(1.5)
        expected = expm_series(-1.5 * 0.5 * b) @ scattered_product(b, [(1.0, 1.5)]) @ expm_series(-1.5 * 0.5 * b)
        assert np.allclose(ts_matrix_exponential(ts, eig, g, 0, 2), expected, atol=1e-13)

    def test_non_regressive(self):
        ts = build_explicit([(0, 0), (1, 1)])
        eig = eigendecompose(np.diag([3.0]))
        with pytest.raises(NonRegressiveError):
            ts_matrix_exponential(ts, eig, GammaSpec.constant(1 / 3), 0, 1)

    def test_window_errors(self, leader_b):
        ts = build_explicit([(0, 1)])
        eig = eigendecompose(leader_b)
        with pytest.raises(ValueError):
            ts_matrix_exponential(ts, eig, GammaSpec.constant(1), 0.8, 0.2)
        with pytest.raises(ValueError):
            ts_matrix_exponential(ts, eig, GammaSpec.constant(1), 0, 3)


class TestSpectralNorm:
    def test_start_is_one(self, leader_b):
        ts = build_explicit([(0, 1)])
        assert spectral_norm_exponential(ts, eigendecompose(leader_b), GammaSpec.constant(2), 0, 0) == 1.0

    def test_dense_unit_run(self, leader_b):
        ts = build_explicit([(0, 1)])
        got = spectral_norm_exponential(ts, eigendecompose(leader_b), GammaSpec.constant(2), 0, 1)
        assert got == pytest.approx(DENSE_UNIT_NORM, rel=1e-12)

    def test_one_scattered_point(self):
        # mu gamma lambda_min = 0.5; the other factors are 1 - 0.5 * (lambda / lambda_min)
        ts = build_explicit([(0, 0), (1, 1)])
        lams = np.array([1.0, 1.5, 2.5])
        eig = eigendecompose(np.diag(lams))
        got = spectral_norm_exponential(ts, eig, GammaSpec.constant(0.5), 0, 1)
        assert got == pytest.approx(max(abs(1 - 0.5 * lams)))
        assert got == 0.5


class TestScalarExponential:
    def test_zero_rate(self):
        ts = build_family(FamilySpec("ex6", 8, 12))
        assert scalar_ts_exponential(ts, 0.0, 1, 10) == 1.0

    def test_dense(self):
        ts = build_explicit([(0, 2)])
        assert scalar_ts_exponential(ts, 1.0, 0, 2) == pytest.approx(math.e**2)

    def test_ex6_through_ten(self):
        ts = build_family(FamilySpec("ex6", 8, 12))
        p = 0.25 / M_EXACT
        assert scalar_ts_exponential(ts, p, 1, 10) == pytest.approx(EX6_SCALAR_AT_10, rel=1e-12)

    def test_one_by_one_agrees_with_matrix(self):
        ts = build_family(FamilySpec("ex5", 3, 8))
        eig = eigendecompose([[0.7]])
        d = ts_matrix_exponential(ts, eig, GammaSpec.constant(1.2), ts.t0, 3.5)[0, 0]
        assert d == pytest.approx(scalar_ts_exponential(ts, -1.2 * 0.7, ts.t0, 3.5), rel=1e-13)


class TestBoundConstants:
    def test_ex5_window(self, leader_b):
        ts = build_family(FamilySpec("ex5", 3, 50))
        eig = eigendecompose(leader_b)
        bc = compute_bound_constants(eig, GammaSpec.constant(2), ts, 0.25)
        # delta = min_i (1/2 - 1/i) * 2 * lambda_min, reached at i = 3
        assert bc.delta == pytest.approx((1 / 6) * 2 * LAMBDA_MIN, rel=1e-12)
        assert bc.m_star_star == pytest.approx(M_EXACT)
        assert bc.m == pytest.approx(1 - bc.delta)

    def test_stated_override(self, leader_b):
        ts = build_family(FamilySpec("ex5", 3, 50))
        bc = compute_bound_constants(eigendecompose(leader_b), GammaSpec.constant(2), ts, 0.25, m_star=0.39,
                                     mu_star=0.5)
        assert bc.m == pytest.approx(0.557, abs=1e-3)
        assert bc.m_star == 0.39
        assert bc.delta == pytest.approx(0.61)
        assert bc.mu_star == 0.5

    def test_negative_spectrum(self):
        ts = build_explicit([(0, 1)])
        bc = compute_bound_constants(eigendecompose(np.diag([-1.0, -3.0])), GammaSpec.constant(-1), ts, 0.0)
        assert bc.m_star_star == pytest.approx(math.exp(-1.0))
        assert bc.delta is None


def _ex5_setup(leader_b, stated=True):
    ts = build_family(FamilySpec("ex5", 3, 50))
    eig = eigendecompose(leader_b)
    g = GammaSpec.constant(2)
    kw = {"m_star": 0.39, "mu_star": 0.5} if stated else {}
    return ts, eig, g, compute_bound_constants(eig, g, ts, 0.25, **kw)


class TestLemmaBounds:
    def test_power_of_m_on_scattered_segment(self):
        ts = build_explicit([(k, k) for k in range(6)])
        eig = eigendecompose(np.diag([0.5, 0.8]))
        g = GammaSpec.constant(1)
        bc = compute_bound_constants(eig, g, ts, 0.0)
        d = decompose(ts)
        for k in range(6):
            assert lemma1_bounds(ts, d, eig, g, bc, 0, k) == pytest.approx(bc.m**k)

    def test_empty_segment_is_one(self):
        ts = build_explicit([(0, 1)])
        eig = eigendecompose(np.diag([0.5]))
        g = GammaSpec.constant(1)
        bc = compute_bound_constants(eig, g, ts, 0.0)
        assert lemma1_bounds(ts, None, eig, g, bc, 0, 0) == 1.0

    def test_ex5_dense_run(self, leader_b):
        ts, eig, g, bc = _ex5_setup(leader_b)
        bc = type(bc)(bc.delta, bc.m_star, bc.m_star_star, 0.557, bc.mu_star, bc.lip)
        got = lemma1_bounds(ts, None, eig, g, bc, 1, 1.5 + 1 / 3, enforce=False)
        assert got == pytest.approx(EX5_LEMMA1_DENSE, rel=1e-12)

    def test_ex5_hypotheses_fail(self, leader_b):
        ts, eig, g, bc = _ex5_setup(leader_b)
        with pytest.raises(ConditionsViolated) as info:
            lemma1_bounds(ts, None, eig, g, bc, 1, 1.6)
        assert info.value.witness["index"] == 1
        assert info.value.witness["value"] >= 1.0

    def test_lemma3_start(self):
        ts = build_explicit([(0, 0), (1, 2)])
        eig = eigendecompose(np.diag([0.5]))
        g = GammaSpec.constant(1)
        bc = compute_bound_constants(eig, g, ts, 0.0)
        assert lemma3_bound(ts, None, eig, g, bc, 0) == 1.0

    def test_lemma3_scattered_only(self):
        ts = build_explicit([(k, k) for k in range(5)])
        eig = eigendecompose(np.diag([0.3, 0.6]))
        g = GammaSpec.constant(1)
        bc = compute_bound_constants(eig, g, ts, 0.0)
        assert lemma3_bound(ts, None, eig, g, bc, 4) == pytest.approx(bc.m**4)

    def test_ex6_through_nine(self, leader_b):
        ts = build_family(FamilySpec("ex6", 8, 12))
        eig = eigendecompose(leader_b)
        g = GammaSpec.cosine(2, 1)
        bc = compute_bound_constants(eig, g, ts, 0.25)
        assert bc.m == pytest.approx(M_EXACT)
        bound = lemma3_bound(ts, None, eig, g, bc, 9, enforce=False)
        exact = spectral_norm_exponential(ts, eig, g, 1, 9)
        assert bound == pytest.approx(EX6_LEMMA3_AT_9, rel=1e-10)
        assert exact == pytest.approx(EX6_NORM_AT_9, rel=1e-10)
        assert exact <= bound


class TestConditions:
    def test_zero_gain_fails_sign(self, leader_b):
        ts = build_explicit([(0, 1)])
        with pytest.raises(ConditionsViolated) as info:
            require_conditions(eigendecompose(leader_b), GammaSpec.constant(0), ts)
        assert info.value.witness["t"] == 0.0

    def test_m_below_floor(self):
        ts = build_explicit([(0, 0), (1, 1)])
        # true delta is 0.5 and M** = exp(-5), so a stated M* of 0.1 is too small
        eig = eigendecompose(np.diag([5.0]))
        g = GammaSpec.constant(0.1)
        bc = compute_bound_constants(eig, g, ts, 0.0, m_star=0.1)
        with pytest.raises(ConditionsViolated):
            require_conditions(eig, g, ts, bc)


class TestGamma:
    def test_abs_integral_cosine(self):
        g = GammaSpec.cosine(0, 1)
        assert g.dense_abs_integral(0, math.pi) == pytest.approx(2.0)
        assert g.dense_integral(0, math.pi) == pytest.approx(0.0, abs=1e-15)

    def test_abs_integral_polynomial_against_grid(self):
        g = GammaSpec.polynomial([-0.5, 0.5])
        x = np.linspace(0, 3, 300001)
        y = np.abs(-0.5 + 0.5 * x)
        ref = float(np.sum((y[1:] + y[:-1]) / 2 * np.diff(x)))
        assert g.dense_abs_integral(0, 3) == pytest.approx(ref, rel=1e-8)

    def test_per_branch(self):
        g = GammaSpec.per_branch(GammaSpec.inverse_graininess(), GammaSpec.constant(0))
        assert g.value(1.0, 0.25) == 4.0
        assert g.value(1.0) == 0.0
        with pytest.raises(ValueError):
            GammaSpec.inverse_graininess().value(1.0)

    @pytest.mark.parametrize(
        "g",
        [
            GammaSpec.constant(2),
            GammaSpec.polynomial([0, 0, 0.25]),
            GammaSpec.cosine(2, 1),
            GammaSpec.inverse_graininess(),
            GammaSpec.per_branch(GammaSpec.inverse_graininess(), GammaSpec.constant(0)),
        ],
    )
    def test_dict_round_trip(self, g):
        assert GammaSpec.from_dict(g.to_dict()) == g
