import numpy as np
import pytest

from relflow import entropy, fields
from relflow.entropy import (
    EntropyConstants,
    TestPair,
    bound_side,
    continuity_residual,
    cumulative_trapezoid,
    dissipative_verdict,
    entropy_side,
    essential_residual_masks,
    gronwall_factor,
    growth_rate,
    growth_rate_base,
    growth_rate_base_terms,
    momentum_residual,
    relative_energy,
    validate_pair,
)
from relflow.eos import ModelParams
from relflow.errors import PairBoundsError, ParameterError
from relflow.fields import Grid, ScalarField, VectorField
from relflow.solver import FluidState, Recipe, manufactured_forcing, manufactured_pair

PI = np.pi


def static_pair(grid, r_vals, v_vals, r1, r2=None, label="static"):
    return TestPair(
        grid=grid,
        r1=r1,
        r2=r2,
        label=label,
        density_fn=lambda t: ScalarField(grid, np.array(r_vals, dtype=float)),
        velocity_fn=lambda t: VectorField(grid, np.array(v_vals, dtype=float)),
        density_rate_fn=lambda t: ScalarField(grid, np.zeros(grid.shape)),
        velocity_rate_fn=lambda t: VectorField(grid, np.zeros((grid.dim,) + grid.shape)),
    )


def x_velocity(grid, profile):
    vals = np.zeros((grid.dim,) + grid.shape)
    vals[0] = profile
    return vals


def static_states(grid, rho_vals, u_vals, times):
    rho = np.asarray(rho_vals, dtype=float)
    m = rho * np.asarray(u_vals, dtype=float)
    return [FluidState(float(t), ScalarField(grid, rho), VectorField(grid, m)) for t in times]


CONSTS = EntropyConstants(C0=1.0, c_hat=1.0, c_gamma=1.0)


class TestPairValidation:
    def test_r1_enforced_on_evaluation(self, grid2d):
        pair = static_pair(grid2d, np.ones(grid2d.shape), np.zeros((2,) + grid2d.shape), r1=2.0)
        with pytest.raises(PairBoundsError):
            pair.density(0.0)

    def test_upper_bound_required_for_large_gamma(self, grid2d):
        pair = static_pair(grid2d, np.ones(grid2d.shape), np.zeros((2,) + grid2d.shape), r1=0.5)
        params = ModelParams(gamma=3.0, beta=5.0)
        with pytest.raises(PairBoundsError):
            validate_pair(pair, params)
        ok = static_pair(
            grid2d, np.ones(grid2d.shape), np.zeros((2,) + grid2d.shape), r1=0.5, r2=2.0
        )
        validate_pair(ok, params)

    def test_nonpositive_r1_rejected(self, grid2d):
        with pytest.raises(PairBoundsError):
            static_pair(grid2d, np.ones(grid2d.shape), np.zeros((2,) + grid2d.shape), r1=0.0)

    def test_constants_validation(self):
        with pytest.raises(ParameterError):
            EntropyConstants(C0=-1.0, c_hat=1.0, c_gamma=1.0)
        with pytest.raises(ParameterError):
            EntropyConstants(C0=1.0, c_hat=0.0, c_gamma=1.0)
        EntropyConstants(C0=0.0, c_hat=1.0, c_gamma=1.0)  # degenerate C0 admitted

    def test_sampled_pair_rates_second_order(self):
        grid = Grid(1, 32)
        times = np.linspace(0.0, 1.0, 201)
        densities = [ScalarField.constant(grid, 1.0 + 0.1 * np.sin(t)) for t in times]
        velocities = [VectorField.zero(grid) for _ in times]
        pair = TestPair.from_samples(times, densities, velocities, r1=0.5)
        got = pair.density_rate(0.5).values.flat[0]
        assert got == pytest.approx(0.1 * np.cos(0.5), abs=1e-4)


class TestResiduals:
    def test_continuity_zero_for_steady_rest(self, grid2d):
        pair = static_pair(grid2d, 2 * np.ones(grid2d.shape), np.zeros((2,) + grid2d.shape), 1.0)
        assert np.abs(continuity_residual(pair, 0.0).values).max() == 0.0

    def test_continuity_transport_value(self, grid2d):
        x = grid2d.nodes()[0]
        pair = static_pair(
            grid2d, 2 * np.ones(grid2d.shape), x_velocity(grid2d, np.sin(x)), 1.0
        )
        res = continuity_residual(pair, 0.0)
        assert np.abs(res.values - 2 * np.cos(x)).max() < 1e-12

    def test_momentum_zero_for_uniform_rest(self, grid2d):
        pair = static_pair(grid2d, np.ones(grid2d.shape), np.zeros((2,) + grid2d.shape), 0.5)
        params = ModelParams(A=1.0, gamma=2.0, mu=1.0, lambda_=0.0)
        assert np.abs(momentum_residual(pair, 0.0, params).values).max() == 0.0

    def test_momentum_longitudinal_value(self, grid2d):
        # r = 1, v = (sin x, 0): E2_0 = sin x cos x + (2mu+lam) sin x
        x = grid2d.nodes()[0]
        pair = static_pair(grid2d, np.ones(grid2d.shape), x_velocity(grid2d, np.sin(x)), 0.5)
        params = ModelParams(A=1.0, gamma=2.0, mu=1.0, lambda_=0.0)
        res = momentum_residual(pair, 0.0, params)
        expected = np.sin(x) * np.cos(x) + 2.0 * np.sin(x)
        assert np.abs(res.values[0] - expected).max() < 1e-12
        assert np.abs(res.values[1]).max() < 1e-12

    def test_manufactured_pair_residuals_at_spectral_floor(self):
        grid = Grid(2, 32)
        params = ModelParams(mu=0.1)
        rec = Recipe(kind="acoustic", amplitude=0.1)
        pair = manufactured_pair(rec, grid)
        forcing = manufactured_forcing(rec, grid, params)
        t = 0.37
        assert fields.lp_norm(continuity_residual(pair, t), 2.0) < 1e-10
        e2 = momentum_residual(pair, t, params)
        assert fields.lp_norm(e2 - forcing(t), 2.0) < 1e-10


class TestGrowthRate:
    def test_zero_velocity(self, grid2d):
        pair = static_pair(grid2d, np.ones(grid2d.shape), np.zeros((2,) + grid2d.shape), 1.0)
        params = ModelParams(mu=1.0)
        assert growth_rate_base(pair, 0.0, params, CONSTS) == 0.0
        assert growth_rate(pair, 0.0, params, CONSTS) == 1.0  # periodic adds mu

    def test_boundary_branch_offset_is_mu(self, grid2d):
        x = grid2d.nodes()[0]
        pair = static_pair(grid2d, np.ones(grid2d.shape), x_velocity(grid2d, np.sin(x)), 1.0)
        per = ModelParams(mu=0.7, gamma=2.0)
        dir_ = ModelParams(mu=0.7, gamma=2.0, boundary_case="dirichlet")
        diff = growth_rate(pair, 0.0, per, CONSTS) - growth_rate(pair, 0.0, dir_, CONSTS)
        assert diff == pytest.approx(0.7, rel=1e-12)

    def test_quadrature_oracle_for_fractional_norms(self):
        # v = (sin x, 0), mu=1, lam=0, gamma=2, r1=1, c_hat*c_gamma^2 = 1:
        # base = 1 + ||2 sin x||^2_{L^{12/7}} + 2*||2 sin x||_{L^4}
        grid = Grid(2, 256)
        x = grid.nodes()[0]
        pair = static_pair(grid, np.ones(grid.shape), x_velocity(grid, np.sin(x)), 1.0)
        params = ModelParams(A=1.0, gamma=2.0, mu=1.0, lambda_=0.0)
        s = np.linspace(0, 2 * PI, 400001)
        area = 2 * PI  # transverse extent of the 2-D torus
        norm_127 = (area * np.trapezoid(np.abs(2 * np.sin(s)) ** (12.0 / 7.0), s)) ** (7.0 / 12.0)
        norm_4 = (area * np.trapezoid((2 * np.sin(s)) ** 4, s)) ** 0.25
        expected = 1.0 + norm_127**2 + 2.0 * norm_4
        got = growth_rate_base(pair, 0.0, params, CONSTS)
        assert got == pytest.approx(expected, rel=1e-5)

    def test_term_homogeneity_degrees(self, grid2d):
        x = grid2d.nodes()[0]
        params = ModelParams(A=1.0, gamma=2.0, mu=1.0, lambda_=0.0)
        one = static_pair(grid2d, np.ones(grid2d.shape), x_velocity(grid2d, np.sin(x)), 1.0)
        two = static_pair(grid2d, np.ones(grid2d.shape), x_velocity(grid2d, 2 * np.sin(x)), 1.0)
        t1 = growth_rate_base_terms(one, 0.0, params, CONSTS)
        t2 = growth_rate_base_terms(two, 0.0, params, CONSTS)
        assert t2[0] == pytest.approx(2 * t1[0], rel=1e-12)
        assert t2[1] == pytest.approx(4 * t1[1], rel=1e-12)
        assert t2[2] == pytest.approx(2 * t1[2], rel=1e-12)


class TestMasks:
    def test_equal_densities_all_essential(self, grid2d):
        r = ScalarField.constant(grid2d, 1.0)
        ess, res = essential_residual_masks(r, r)
        assert ess.all() and not res.any()

    def test_double_density_all_residual(self, grid2d):
        rho = ScalarField.constant(grid2d, 2.0)
        r = ScalarField.constant(grid2d, 1.0)
        ess, res = essential_residual_masks(rho, r)
        assert res.all() and not ess.any()

    @pytest.mark.parametrize("rho_val, is_ess", [(1.4, True), (1.5, True), (1.51, False)])
    def test_boundary_inclusive(self, grid2d, rho_val, is_ess):
        ess, _ = essential_residual_masks(
            ScalarField.constant(grid2d, rho_val), ScalarField.constant(grid2d, 1.0)
        )
        assert ess.all() == is_ess

    def test_partition(self, grid2d, rng):
        rho = ScalarField(grid2d, np.abs(rng.standard_normal(grid2d.shape)) + 0.01)
        r = ScalarField(grid2d, np.abs(rng.standard_normal(grid2d.shape)) + 0.5)
        ess, res = essential_residual_masks(rho, r)
        assert np.array_equal(ess ^ res, np.ones(grid2d.shape, dtype=bool))


class TestGronwall:
    def test_zero_rate(self):
        t = np.linspace(0, 1, 11)
        assert gronwall_factor(t, np.zeros(11), 0.0, 1.0, 5.0) == 1.0

    def test_constant_rate_closed_form(self):
        t = np.linspace(0, 2, 21)
        lam = np.full(21, 0.3)
        got = gronwall_factor(t, lam, 0.25, 1.75, 2.0)
        assert got == pytest.approx(np.exp(2.0 * 0.3 * 1.5), rel=1e-14)

    def test_linear_rate(self):
        t = np.linspace(0, 1, 101)
        got = gronwall_factor(t, t, 0.0, 1.0, 1.0)
        assert got == pytest.approx(np.exp(0.5), rel=1e-12)  # trapezoid exact on linears

    def test_reversed_interval_rejected(self):
        t = np.linspace(0, 1, 11)
        with pytest.raises(ValueError):
            gronwall_factor(t, np.zeros(11), 0.5, 0.2, 1.0)


def _entropy_setup(grid):
    params = ModelParams(A=1.0, gamma=2.0, mu=1.0, lambda_=0.0)
    return params


class TestEntropySide:
    def test_identical_pair_gives_zero(self, grid2d):
        params = _entropy_setup(grid2d)
        rho = np.ones(grid2d.shape)
        u = np.zeros((2,) + grid2d.shape)
        states = static_states(grid2d, rho, u, np.linspace(0, 1, 11))
        pair = static_pair(grid2d, rho, u, 0.5)
        ls = entropy_side(states, pair, params)
        assert np.abs(ls.total).max() == 0.0

    def test_static_gap_only(self, grid2d):
        params = _entropy_setup(grid2d)
        rho = 2 * np.ones(grid2d.shape)
        u = np.zeros((2,) + grid2d.shape)
        states = static_states(grid2d, rho, u, np.linspace(0, 1, 11))
        pair = static_pair(grid2d, np.ones(grid2d.shape), u, 0.5)
        ls = entropy_side(states, pair, params)
        gap_mass = fields.integral(ScalarField(grid2d, (rho - 1.0) ** 2))
        assert np.allclose(ls.total, gap_mass, rtol=1e-12)

    def test_analytic_shear_history_on_torus3(self):
        # rho = r = 1, u - v = (sin x, 0, 0) static, mu=1, lam=0, t=1:
        # LS = 0.5*||sin||_2^2 + 0.5*t*(2mu+lam)*4pi^3 = 2pi^3 + 4pi^3
        grid = Grid(3, 16)
        params = _entropy_setup(grid)
        x = grid.nodes()[0]
        u = x_velocity(grid, np.sin(x))
        states = static_states(grid, np.ones(grid.shape), u, np.linspace(0, 1, 21))
        pair = static_pair(grid, np.ones(grid.shape), np.zeros((3,) + grid.shape), 0.5)
        ls = entropy_side(states, pair, params)
        assert ls.total[-1] == pytest.approx(6 * PI**3, rel=1e-8)
        assert ls.energy[-1] == pytest.approx(2 * PI**3, rel=1e-8)
        assert ls.dissipation[-1] == pytest.approx(4 * PI**3, rel=1e-8)

    def test_dissipation_summand_monotone(self, grid2d, rng):
        params = _entropy_setup(grid2d)
        x = grid2d.nodes()[0]
        states = static_states(
            grid2d, np.ones(grid2d.shape), x_velocity(grid2d, np.sin(x)), np.linspace(0, 2, 17)
        )
        pair = static_pair(grid2d, np.ones(grid2d.shape), np.zeros((2,) + grid2d.shape), 0.5)
        ls = entropy_side(states, pair, params)
        assert np.all(np.diff(ls.dissipation) >= -1e-12)
        assert np.all(ls.energy >= -1e-12) and np.all(ls.dissipation >= -1e-12)


class TestBoundSide:
    def test_vanishes_for_exact_match(self, grid2d):
        params = _entropy_setup(grid2d)
        rho = np.ones(grid2d.shape)
        u = np.zeros((2,) + grid2d.shape)
        states = static_states(grid2d, rho, u, np.linspace(0, 1, 11))
        pair = static_pair(grid2d, rho, u, 0.5)
        rs = bound_side(states, pair, params, CONSTS)
        assert np.abs(rs.total).max() == 0.0

    def test_pure_initial_term_closed_form(self, grid2d):
        # E1 = E2 = 0 (constant r, v = 0), rho != r: RS = e0 * exp(C0*mu*t)
        params = _entropy_setup(grid2d)
        rho = 2 * np.ones(grid2d.shape)
        u = np.zeros((2,) + grid2d.shape)
        times = np.linspace(0, 1, 41)
        states = static_states(grid2d, rho, u, times)
        pair = static_pair(grid2d, np.ones(grid2d.shape), u, 0.5)
        consts = EntropyConstants(C0=2.0, c_hat=1.0, c_gamma=1.0)
        rs = bound_side(states, pair, params, consts)
        e0 = fields.integral(ScalarField(grid2d, (rho - 1.0) ** 2))
        assert np.allclose(rs.total, e0 * np.exp(2.0 * params.mu * times), rtol=1e-12)
        assert np.abs(rs.e1_term).max() == 0.0 and np.abs(rs.e2_term).max() == 0.0

    def test_continuity_term_analytic_value(self):
        # rho = 1, r = 2 steady, v = (sin x, 0): E1 = 2 cos x, P''(2) = 2,
        # |r - rho| = 1, Lambda suppressed via C0 = 0:
        # RS_E1(1) = int_0^1 int |4 cos x| dx ds = 4 * 4 * 2pi on the 2-torus
        grid = Grid(2, 64)
        params = _entropy_setup(grid)
        x = grid.nodes()[0]
        times = np.linspace(0, 1, 11)
        states = static_states(grid, np.ones(grid.shape), np.zeros((2,) + grid.shape), times)
        pair = static_pair(grid, 2 * np.ones(grid.shape), x_velocity(grid, np.sin(x)), 1.0)
        consts = EntropyConstants(C0=0.0, c_hat=1.0, c_gamma=1.0)
        rs = bound_side(states, pair, params, consts)
        expected = 4.0 * 4.0 * 2 * PI
        assert rs.e1_term[-1] == pytest.approx(expected, rel=1e-3)  # |cos| kinks limit quadrature

    def test_initial_override(self, grid2d):
        params = _entropy_setup(grid2d)
        rho = np.ones(grid2d.shape)
        u = np.zeros((2,) + grid2d.shape)
        states = static_states(grid2d, rho, u, np.linspace(0, 1, 5))
        pair = static_pair(grid2d, rho, u, 0.5)
        other = FluidState(
            0.0, ScalarField(grid2d, 2 * rho), VectorField(grid2d, u)
        )
        rs = bound_side(states, pair, params, CONSTS, initial=other)
        assert rs.initial[0] == pytest.approx(
            relative_energy(other.rho, other.velocity(), pair.density(0.0), pair.velocity(0.0), params),
            rel=1e-12,
        )


class TestVerdict:
    def test_exact_pair_passes(self, grid2d):
        params = _entropy_setup(grid2d)
        rho = np.ones(grid2d.shape)
        u = np.zeros((2,) + grid2d.shape)
        states = static_states(grid2d, rho, u, np.linspace(0, 1, 11))
        pair = static_pair(grid2d, rho, u, 0.5)
        rep = dissipative_verdict(states, pair, params, CONSTS, tolerance=1e-8)
        assert rep.verdict and rep.first_violation_time is None

    def test_violation_reports_first_time(self, grid2d):
        # rho = r = 1, v = 0, u = (sin x, 0): E2 = 0 so RS stays at e0
        # while the LS dissipation grows: the verdict must fail and name
        # the first violating sample
        params = _entropy_setup(grid2d)
        x = grid2d.nodes()[0]
        times = np.linspace(0, 1, 11)
        states = static_states(grid2d, np.ones(grid2d.shape), x_velocity(grid2d, np.sin(x)), times)
        pair = static_pair(grid2d, np.ones(grid2d.shape), np.zeros((2,) + grid2d.shape), 0.5)
        consts = EntropyConstants(C0=0.0, c_hat=1.0, c_gamma=1.0)
        rep = dissipative_verdict(states, pair, params, consts, tolerance=1e-8)
        assert not rep.verdict
        assert rep.first_violation_time == pytest.approx(times[1])
        assert rep.max_violation > 0

    def test_report_serialization(self, grid2d, tmp_path):
        params = _entropy_setup(grid2d)
        rho = np.ones(grid2d.shape)
        u = np.zeros((2,) + grid2d.shape)
        states = static_states(grid2d, rho, u, np.linspace(0, 1, 5))
        pair = static_pair(grid2d, rho, u, 0.5)
        rep = dissipative_verdict(states, pair, params, CONSTS)
        csv_path = tmp_path / "report.csv"
        rep.to_csv(csv_path)
        header = csv_path.read_text().splitlines()[0]
        assert header == "t,LS,LS_energy,LS_dissipation,RS,RS_initial,RS_E1,RS_E2,lambda,ess_fraction"
        json_path = tmp_path / "report.json"
        rep.to_json(json_path)
        import json

        payload = json.loads(json_path.read_text())
        assert payload["verdict"] is True
        assert set(payload["series"]) == set(rep.CSV_COLUMNS)

    def test_ess_fraction_tracks_masks(self, grid2d):
        params = _entropy_setup(grid2d)
        rho = np.ones(grid2d.shape)
        u = np.zeros((2,) + grid2d.shape)
        states = static_states(grid2d, rho, u, [0.0, 1.0])
        pair = static_pair(grid2d, 4 * np.ones(grid2d.shape), u, 1.0)
        rep = dissipative_verdict(states, pair, params, CONSTS)
        assert np.all(rep.ess_fraction == 0.0)  # |1 - 4| > 2


class TestCumulativeTrapezoid:
    def test_matches_numpy_on_linear(self):
        t = np.linspace(0, 1, 11)
        f = 3 * t
        out = cumulative_trapezoid(t, f)
        assert out[-1] == pytest.approx(1.5, rel=1e-14)
        assert out[0] == 0.0
