import math

import numpy as np
import pytest

from relflow import eos
from relflow.eos import BoundaryCase, ModelParams
from relflow.errors import DomainError, ParameterError, SingularityError


def params_for(gamma, A=1.0, **kw):
    beta = kw.pop("beta", max(5.0, gamma + 1.0))
    return ModelParams(A=A, gamma=gamma, beta=beta, **kw)


class TestModelParams:
    def test_defaults_valid(self):
        p = ModelParams()
        assert p.boundary_case is BoundaryCase.PERIODIC

    @pytest.mark.parametrize(
        "kw, invariant",
        [
            (dict(A=0.0), "A > 0"),
            (dict(mu=0.0), "mu > 0"),
            (dict(mu=0.1, lambda_=-1.0), "2*mu + 3*lambda >= 0"),
            (dict(gamma=1.1), "gamma >= 6/5 (periodic)"),
            (dict(gamma=1.0, boundary_case="dirichlet"), "gamma > 1 (dirichlet)"),
            (dict(eps=1.5), "eps in [0, 1]"),
            (dict(a=0.0), "a > 0"),
            (dict(beta=3.0), "beta > max(4, gamma)"),
        ],
    )
    def test_invariant_violations_named(self, kw, invariant):
        with pytest.raises(ParameterError) as err:
            ModelParams(**kw)
        assert err.value.invariant == invariant

    def test_gamma_above_2_needs_larger_beta(self):
        with pytest.raises(ParameterError):
            ModelParams(gamma=4.5, beta=4.4)
        ModelParams(gamma=4.5, beta=5.0)

    def test_dirichlet_allows_small_gamma(self):
        p = ModelParams(gamma=1.1, boundary_case="dirichlet")
        assert p.boundary_case is BoundaryCase.DIRICHLET

    def test_json_round_trip_uses_lambda_key(self):
        p = ModelParams(lambda_=0.05)
        d = p.to_dict()
        assert d["lambda"] == 0.05 and "lambda_" not in d
        assert ModelParams.from_dict(d) == p


class TestPressure:
    def test_vacuum(self):
        assert eos.pressure(0.0, params_for(2.0)) == 0.0

    def test_power_law(self):
        assert eos.pressure(3.0, params_for(2.0)) == pytest.approx(9.0, rel=1e-14)

    def test_unit_density_returns_coefficient(self):
        assert eos.pressure(1.0, params_for(1.4, A=2.0)) == pytest.approx(2.0, rel=1e-14)

    def test_monotone(self, rng):
        p = params_for(1.4)
        rho = np.sort(rng.uniform(0, 10, 100))
        vals = eos.pressure(rho, p)
        assert np.all(np.diff(vals) >= 0)

    def test_negative_density_rejected(self):
        with pytest.raises(DomainError):
            eos.pressure(-0.1, params_for(2.0))


class TestPotential:
    def test_point_values(self):
        p = params_for(2.0)
        assert eos.pressure_potential(3.0, p) == pytest.approx(9.0, rel=1e-14)
        assert eos.pressure_potential_derivative(3.0, p) == pytest.approx(6.0, rel=1e-14)
        assert eos.pressure_potential_second(3.0, p) == pytest.approx(2.0, rel=1e-14)

    def test_legendre_identity_at_5(self):
        p = params_for(2.0)
        lhs = eos.pressure_potential_derivative(5.0, p) * 5.0 - eos.pressure_potential(5.0, p)
        assert lhs == pytest.approx(25.0, rel=1e-14)
        assert lhs == pytest.approx(eos.pressure(5.0, p), rel=1e-14)

    @pytest.mark.parametrize("gamma", [1.2, 1.4, 5.0 / 3.0, 2.0, 3.0])
    def test_identities_random(self, gamma, rng):
        p = params_for(gamma)
        r = rng.uniform(1e-3, 10.0, 10_000)
        first = eos.pressure_potential_derivative(r, p) * r - eos.pressure_potential(r, p)
        second = eos.pressure_potential_second(r, p) * r
        assert np.allclose(first, eos.pressure(r, p), rtol=1e-12, atol=0)
        assert np.allclose(second, eos.pressure_derivative(r, p), rtol=1e-12, atol=0)

    def test_second_derivative_singular_at_vacuum_soft_law(self):
        with pytest.raises(SingularityError):
            eos.pressure_potential_second(0.0, params_for(1.4))
        # gamma = 2 is regular at vacuum: P'' = A*gamma identically
        assert eos.pressure_potential_second(0.0, params_for(2.0)) == 2.0


class TestArtificialPotential:
    def test_values(self):
        p = params_for(2.0, beta=5.0)
        assert eos.artificial_potential(0.0, p) == 0.0
        assert eos.artificial_potential(1.0, p) == pytest.approx(0.25, rel=1e-14)
        assert eos.artificial_potential_second(1.0, p) == pytest.approx(5.0, rel=1e-14)
        assert eos.artificial_potential(2.0, p) == pytest.approx(8.0, rel=1e-14)


class TestBregmanGap:
    def test_zero_at_equal_arguments(self, rng):
        p = params_for(1.4)
        r = rng.uniform(0.1, 10, 50)
        assert np.all(eos.bregman_gap(r, r, p) == 0.0)

    def test_quadratic_for_gamma_two(self):
        p = params_for(2.0)
        assert eos.bregman_gap(3.0, 1.0, p) == pytest.approx(4.0, rel=1e-14)

    def test_vacuum_value_equals_pressure(self):
        # gap(0, r) = P'(r) r - P(r) = p(r)
        p = params_for(2.0)
        assert eos.bregman_gap(0.0, 2.0, p) == pytest.approx(eos.pressure(2.0, p), rel=1e-14)

    @pytest.mark.parametrize("gamma", [1.2, 1.4, 5.0 / 3.0, 2.0, 3.0])
    def test_nonnegative(self, gamma, rng):
        p = params_for(gamma)
        rho = rng.uniform(0.0, 10.0, 10_000)
        r = rng.uniform(1e-3, 10.0, 10_000)
        assert eos.bregman_gap(rho, r, p).min() >= -1e-12

    def test_rejects_nonpositive_reference(self):
        with pytest.raises(DomainError):
            eos.bregman_gap(1.0, 0.0, params_for(2.0))

    def test_midpoint_convexity_in_rho(self, rng):
        p = params_for(1.4)
        rho1 = rng.uniform(0, 10, 300)
        rho2 = rng.uniform(0, 10, 300)
        r = rng.uniform(0.1, 10, 300)
        mid = eos.bregman_gap(0.5 * (rho1 + rho2), r, p)
        avg = 0.5 * (eos.bregman_gap(rho1, r, p) + eos.bregman_gap(rho2, r, p))
        assert np.all(mid <= avg + 1e-10)


class TestGapCoercivity:
    def test_quadratic_law_essential_constant_is_one(self):
        c = eos.gap_coercivity_constant((1.0, 2.0), (0.0, 4.0), params_for(2.0))
        assert c.ess == pytest.approx(1.0, rel=1e-12)

    def test_residual_constant_bounded_by_sample_ratio(self):
        # at (rho=4, r=1): gap = 9 and 1 + |rho-r|^2 = 10
        c = eos.gap_coercivity_constant((1.0, 2.0), (0.0, 4.0), params_for(2.0))
        assert c.res <= 0.9 + 1e-12

    def test_brute_force_oracle_agreement(self):
        p = params_for(1.4)
        c = eos.gap_coercivity_constant((1.0, 2.0), (0.0, 4.0), p, samples=40)
        ess_best, res_best = math.inf, math.inf
        for r in np.linspace(1.0, 2.0, 40):
            for rho in np.linspace(0.0, 4.0, 40):
                gap = eos.bregman_gap(rho, r, p)
                d = abs(rho - r)
                if d <= 0.5 * r:
                    if d > 1e-9:
                        ess_best = min(ess_best, gap / d**2)
                else:
                    res_best = min(res_best, gap / (1.0 + d**p.gamma))
        assert c.ess == pytest.approx(ess_best, rel=1e-12)
        assert c.res == pytest.approx(res_best, rel=1e-12)

    def test_degenerate_sample_set_masks(self):
        # single point rho = r: the essential ratio set is empty -> no constraint
        c = eos.gap_coercivity_constant((1.0, 1.0), (1.0, 1.0), params_for(2.0), samples=3)
        assert c.ess == math.inf and c.res == math.inf

    def test_invalid_ranges(self):
        with pytest.raises(ValueError):
            eos.gap_coercivity_constant((0.0, 1.0), (0.0, 1.0), params_for(2.0))
        with pytest.raises(ValueError):
            eos.gap_coercivity_constant((1.0, 2.0), (-1.0, 1.0), params_for(2.0))
