"""Scripted experiments: weak-strong runs, dissipative-verdict suites,
regularization-strength sweeps and constant calibration.

Every experiment is deterministic given (config, seed, backend); reports
serialize to CSV/JSON byte-identically across reruns.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import fields, stress
from ._golden import BUDGET_KAPPA
from .entropy import (
    EntropyConstants,
    EntropyReport,
    TestPair,
    compute_series,
    cumulative_trapezoid,
    entropy_side_from_series,
    validate_pair,
    verdict_from_series,
)
from .eos import ModelParams, pressure_potential_derivative
from .errors import CalibrationError, ParameterError
from .fields import Grid, ScalarField, VectorField
from .mollify import loglog_slope
from .solver import (
    FluidState,
    Recipe,
    SolverConfig,
    Trajectory,
    integrate,
    manufactured_forcing,
    manufactured_pair,
    pair_initial_state,
)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: scenario, lattice, physics, stepping, pair recipe."""

    scenario: str
    grid: Grid
    model: ModelParams
    solver: SolverConfig
    recipe: Recipe
    eps_list: tuple = ()
    constants: Optional[EntropyConstants] = None  # None -> golden defaults
    verdict_tolerance: float = 1e-8
    budget_scale: float = 1.0
    slope_threshold: float = 0.4
    mollify_deltas: tuple = (0.2, 0.1, 0.05, 0.025)
    forced: bool = True  # apply the manufactured forcing in simulate/weak-strong
    seed: int = 0
    output_dir: str = "out"

    def __post_init__(self):
        eps = tuple(self.eps_list)
        object.__setattr__(self, "eps_list", eps)
        if any(e2 >= e1 for e1, e2 in zip(eps, eps[1:])):
            raise ParameterError("eps_list strictly decreasing")
        if not self.verdict_tolerance > 0:
            raise ParameterError("verdict_tolerance > 0")
        if not self.budget_scale > 0:
            raise ParameterError("budget_scale > 0")
        object.__setattr__(self, "mollify_deltas", tuple(self.mollify_deltas))

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "grid": {"dim": self.grid.dim, "n": self.grid.n},
            "model": self.model.to_dict(),
            "solver": self.solver.to_dict(),
            "pair": self.recipe.to_dict(),
            "eps_list": list(self.eps_list),
            "constants": self.constants.to_dict() if self.constants else None,
            "tolerances": {
                "verdict": self.verdict_tolerance,
                "budget_scale": self.budget_scale,
                "slope_threshold": self.slope_threshold,
            },
            "mollify_deltas": list(self.mollify_deltas),
            "forced": self.forced,
            "seed": self.seed,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        tol = d.get("tolerances", {})
        return cls(
            scenario=d["scenario"],
            grid=Grid(**d["grid"]),
            model=ModelParams.from_dict(d["model"]),
            solver=SolverConfig.from_dict(d["solver"]),
            recipe=Recipe.from_dict(d["pair"]),
            eps_list=tuple(d.get("eps_list", ())),
            constants=EntropyConstants.from_dict(d["constants"]) if d.get("constants") else None,
            verdict_tolerance=tol.get("verdict", 1e-8),
            budget_scale=tol.get("budget_scale", 1.0),
            slope_threshold=tol.get("slope_threshold", 0.4),
            mollify_deltas=tuple(d.get("mollify_deltas", (0.2, 0.1, 0.05, 0.025))),
            forced=d.get("forced", True),
            seed=d.get("seed", 0),
            output_dir=d.get("output_dir", "out"),
        )

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def entropy_constants(self) -> EntropyConstants:
        return self.constants or EntropyConstants.default()


def discretization_budget(h: float, dt: float, eps: float, scale: float = 1.0) -> float:
    """tol(h, dt, eps) = k1*h^2 + k2*dt^2 + k3*eps with the golden kappas."""
    k1, k2, k3 = BUDGET_KAPPA
    return scale * (k1 * h**2 + k2 * dt**2 + k3 * eps)


def build_scenario(config: ExperimentConfig):
    """(pair, forcing, initial state) for the configured recipe."""
    pair = manufactured_pair(config.recipe, config.grid)
    forcing = manufactured_forcing(config.recipe, config.grid, config.model)
    return pair, forcing, pair_initial_state(pair)


def run_simulation(config: ExperimentConfig) -> tuple[Trajectory, TestPair]:
    pair, forcing, state0 = build_scenario(config)
    traj = integrate(state0, config.model, config.solver, forcing=forcing if config.forced else None)
    return traj, pair


# ---------------------------------------------------------------------------
# weak-strong uniqueness


@dataclass
class WeakStrongResult:
    report: EntropyReport
    max_ls: float
    budget: float
    mean_dt: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "max_ls": self.max_ls,
            "budget": self.budget,
            "mean_dt": self.mean_dt,
            "passed": bool(self.passed),
            "report": self.report.to_dict(),
        }


def run_weak_strong(config: ExperimentConfig) -> WeakStrongResult:
    """Solver data built from the pair itself (zero initial relative entropy),
    integrated with the manufactured forcing; max_t LS must stay below the
    discretization+regularization budget."""
    pair, forcing, state0 = build_scenario(config)
    traj = integrate(state0, config.model, config.solver, forcing=forcing)
    constants = config.entropy_constants()
    series = compute_series(traj, pair, config.model, constants, config.solver.backend)
    report = verdict_from_series(series, constants, config.verdict_tolerance, label=pair.label)
    ls = entropy_side_from_series(series)
    max_ls = float(ls.total.max())
    dts = [row["dt"] for row in traj.ledger[1:]]
    mean_dt = float(np.mean(dts)) if dts else 0.0
    budget = discretization_budget(
        config.grid.h, mean_dt, config.model.eps, scale=config.budget_scale
    )
    return WeakStrongResult(
        report=report, max_ls=max_ls, budget=budget, mean_dt=mean_dt, passed=max_ls <= budget
    )


# ---------------------------------------------------------------------------
# dissipative-verdict suite


def _modulated_pair(base: TestPair, label: str, mode_axis: int, mode: int, amp: float,
                    target: str) -> TestPair:
    """Static multiplicative density modulation or additive velocity bump."""
    grid = base.grid
    coords = grid.nodes()
    wave = np.sin(mode * coords[mode_axis % grid.dim])
    if target == "density":
        mod = 1.0 + amp * wave

        def density_fn(t):
            return ScalarField(grid, base.density_fn(t).values * mod)

        def rate_fn(t):
            return ScalarField(grid, base.density_rate_fn(t).values * mod)

        return TestPair(
            grid=grid,
            r1=base.r1 * (1.0 - amp),
            r2=None if base.r2 is None else base.r2 * (1.0 + amp),
            label=label,
            density_fn=density_fn,
            velocity_fn=base.velocity_fn,
            density_rate_fn=rate_fn,
            velocity_rate_fn=base.velocity_rate_fn,
        )
    if target == "velocity":
        bump = np.zeros((grid.dim,) + grid.shape)
        bump[0] = amp * wave

        def velocity_fn(t):
            return VectorField(grid, base.velocity_fn(t).values + bump)

        return TestPair(
            grid=grid,
            r1=base.r1,
            r2=base.r2,
            label=label,
            density_fn=base.density_fn,
            velocity_fn=velocity_fn,
            density_rate_fn=base.density_rate_fn,
            velocity_rate_fn=base.velocity_rate_fn,
        )
    raise ValueError("target must be 'density' or 'velocity'")


def perturbed_catalogue(config: ExperimentConfig, pair: TestPair) -> list[TestPair]:
    """Base pair plus deterministic smooth perturbations, plus the other
    admissible catalogue recipes on the same grid."""
    rng = np.random.default_rng(config.seed)
    amps = 0.03 + 0.04 * rng.random(3)
    pairs = [pair]
    pairs.append(_modulated_pair(pair, "velocity-bump", 0, 1, float(amps[0]), "velocity"))
    axis2 = 1 if config.grid.dim >= 2 else 0
    pairs.append(_modulated_pair(pair, "velocity-bump-2", axis2, 2, float(amps[1]), "velocity"))
    pairs.append(_modulated_pair(pair, "density-modulation", 0, 1, float(amps[2]), "density"))
    rest = manufactured_pair(
        Recipe(kind="rest", mean_density=config.recipe.mean_density), config.grid
    )
    pairs.append(rest)
    if config.grid.dim >= 2 and config.recipe.kind != "shear":
        pairs.append(
            manufactured_pair(
                Recipe(kind="shear", amplitude=0.2, mean_density=config.recipe.mean_density),
                config.grid,
            )
        )
    return pairs


@dataclass
class SuiteResult:
    reports: list  # (label, EntropyReport)
    constants: EntropyConstants

    @property
    def passed(self) -> bool:
        return all(rep.verdict for _, rep in self.reports)

    def to_dict(self) -> dict:
        return {
            "constants": self.constants.to_dict(),
            "passed": bool(self.passed),
            "reports": {label: rep.to_dict() for label, rep in self.reports},
        }


def suite_series(config: ExperimentConfig, constants: EntropyConstants,
                 trajectory: Optional[Trajectory] = None, catalogue=None):
    """One free (unforced) run of the regularized system plus the per-pair
    entropy series; pairs are validated before anything runs."""
    pair, _, state0 = build_scenario(config)
    if catalogue is None:
        catalogue = perturbed_catalogue(config, pair)
    for p in catalogue:
        validate_pair(p, config.model, state0.t)
    if trajectory is None:
        trajectory = integrate(state0, config.model, config.solver, forcing=None)
    out = []
    for p in catalogue:
        out.append((p.label, compute_series(trajectory, p, config.model, constants,
                                            config.solver.backend)))
    return trajectory, out


def run_dissipative_suite(
    config: ExperimentConfig,
    constants: Optional[EntropyConstants] = None,
    trajectory: Optional[Trajectory] = None,
    catalogue=None,
) -> SuiteResult:
    consts = constants or config.entropy_constants()
    _, series_list = suite_series(config, consts, trajectory, catalogue)
    reports = [
        (label, verdict_from_series(s, consts, config.verdict_tolerance, label=label))
        for label, s in series_list
    ]
    return SuiteResult(reports=reports, constants=consts)


# ---------------------------------------------------------------------------
# constant calibration


@dataclass
class CalibrationResult:
    constants: EntropyConstants
    c0_star: float
    details: dict

    def to_dict(self) -> dict:
        return {"constants": self.constants.to_dict(), "C0_star": self.c0_star, **self.details}


def calibrate_constants(
    config: ExperimentConfig, c0_max: float = 512.0, catalogue=None
) -> CalibrationResult:
    """Embedding constants from their estimators plus the least C0 (1%
    relative bisection) making the dissipative suite pass.

    The series are computed once; only the exponential weights move during
    the bisection, so the search is cheap and deterministic.
    """
    c_hat = fields.sobolev_embedding_constant(config.grid, seed=config.seed)
    pair = manufactured_pair(config.recipe, config.grid)
    weight = pair.density(0.0)
    c_gamma = stress.korn_type_constant(config.grid, weight, config.model, seed=config.seed)
    base = EntropyConstants(C0=0.0, c_hat=c_hat, c_gamma=c_gamma)
    _, series_list = suite_series(config, base, catalogue=catalogue)

    def failures(c0: float):
        bad = []
        for label, s in series_list:
            rep = verdict_from_series(
                s, EntropyConstants(C0=c0, c_hat=c_hat, c_gamma=c_gamma),
                config.verdict_tolerance, label=label,
            )
            if not rep.verdict:
                bad.append(label)
        return bad

    if not failures(0.0):
        c0_star = 0.0
    else:
        hi = 1.0
        while failures(hi):
            hi *= 2.0
            if hi > c0_max:
                bad = failures(c0_max)
                raise CalibrationError(
                    f"no C0 <= {c0_max} satisfies the suite; violating: {bad}",
                    scenario=bad[0] if bad else None,
                )
        lo = hi / 2.0
        while hi - lo > 0.01 * hi:
            mid = 0.5 * (lo + hi)
            if failures(mid):
                lo = mid
            else:
                hi = mid
        c0_star = hi
    constants = EntropyConstants(C0=c0_star, c_hat=c_hat, c_gamma=c_gamma)
    return CalibrationResult(
        constants=constants,
        c0_star=c0_star,
        details={"pairs": [label for label, _ in series_list], "c0_max": c0_max},
    )


# ---------------------------------------------------------------------------
# regularization-strength sweep


@dataclass
class SweepEntry:
    eps: float
    battery: dict  # name -> (value, ceiling)
    r3: float
    r4: float
    final_ls: float
    final_rs: float


@dataclass
class SweepReport:
    entries: list
    r3_slope: float
    r4_slope: float
    r3_decreasing: bool
    r4_decreasing: bool
    battery_uniform: bool
    ceilings_ok: bool
    slope_threshold: float

    @property
    def passed(self) -> bool:
        # the slope threshold is a diagnostic choice, not a claim of the theory
        return (
            self.r3_decreasing
            and self.r4_decreasing
            and self.r3_slope >= self.slope_threshold
            and self.r4_slope >= self.slope_threshold
            and self.battery_uniform
            and self.ceilings_ok
        )

    CSV_COLUMNS = (
        "eps",
        "sup_sqrt_rho_u_L2",
        "sup_rho_Lgamma",
        "int_u_H1",
        "eps_grad_rho_L2",
        "R3",
        "R4",
        "final_LS",
        "final_RS",
    )

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(self.CSV_COLUMNS) + "\n")
            for e in self.entries:
                vals = [
                    e.eps,
                    e.battery["sup_sqrt_rho_u_L2"][0],
                    e.battery["sup_rho_Lgamma"][0],
                    e.battery["int_u_H1"][0],
                    e.battery["eps_grad_rho_L2"][0],
                    e.r3,
                    e.r4,
                    e.final_ls,
                    e.final_rs,
                ]
                fh.write(",".join(repr(float(v)) for v in vals) + "\n")

    def to_dict(self) -> dict:
        return {
            "entries": [
                {
                    "eps": e.eps,
                    "battery": {k: {"value": v, "ceiling": c} for k, (v, c) in e.battery.items()},
                    "R3": e.r3,
                    "R4": e.r4,
                    "final_LS": e.final_ls,
                    "final_RS": e.final_rs,
                }
                for e in self.entries
            ],
            "R3_slope": self.r3_slope,
            "R4_slope": self.r4_slope,
            "R3_decreasing": self.r3_decreasing,
            "R4_decreasing": self.r4_decreasing,
            "battery_uniform": self.battery_uniform,
            "ceilings_ok": self.ceilings_ok,
            "slope_threshold": self.slope_threshold,
            "passed": bool(self.passed),
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _sweep_member(config: ExperimentConfig, eps: float, constants: EntropyConstants) -> SweepEntry:
    model = replace(config.model, eps=eps)
    pair = manufactured_pair(config.recipe, config.grid)
    state0 = pair_initial_state(pair)
    traj = integrate(state0, model, config.solver, forcing=None)
    backend = config.solver.backend
    t = traj.times

    sqrt_rho_u = []
    rho_gamma = []
    u_h1 = []
    eps_grad = []
    g3 = []
    g4 = []
    for s in traj.states:
        u = s.velocity(config.solver.floor(model))
        sqrt_rho_u.append(
            float(np.sqrt(np.sum(s.rho.values * np.sum(u.values**2, axis=0)) * s.grid.h**s.grid.dim))
        )
        rho_gamma.append(fields.lp_norm(s.rho, model.gamma))
        u_h1.append(fields.h1_norm(u))
        grad_rho = fields.gradient(s.rho, backend)
        g2 = np.sum(grad_rho.values**2, axis=0)
        eps_grad.append(
            float((np.power(s.rho.values, model.gamma - 2.0) * g2).sum() * s.grid.h**s.grid.dim)
        )
        v = pair.velocity(s.t)
        jac_v = fields.jacobian(v, backend)
        advected = np.einsum("j...,ij...->i...", grad_rho.values, jac_v.values)
        diff = u.values - v.values
        g3.append(float(np.sum(advected * diff) * s.grid.h**s.grid.dim))
        grad_pprime = fields.gradient(
            ScalarField(s.grid, pressure_potential_derivative(pair.density(s.t).values, model)),
            backend,
        )
        g4.append(float(np.sum(grad_rho.values * grad_pprime.values) * s.grid.h**s.grid.dim))

    series = compute_series(traj, pair, model, constants, backend)
    expo = cumulative_trapezoid(t, constants.C0 * series.lam)
    tail_weight = np.exp(expo[-1] - expo)  # exp(int_s^T C0 lam)
    r3 = eps * float(np.trapezoid(tail_weight * np.asarray(g3), t))
    r4 = eps * float(np.trapezoid(tail_weight * np.asarray(g4), t))

    e0 = energy_of_state(state0, model)
    t_end = float(t[-1])
    battery = {
        "sup_sqrt_rho_u_L2": (max(sqrt_rho_u), float(np.sqrt(2.0 * e0))),
        "sup_rho_Lgamma": (
            max(rho_gamma),
            float(((model.gamma - 1.0) * e0 / model.A) ** (1.0 / model.gamma)),
        ),
        "int_u_H1": (
            float(np.trapezoid(u_h1, t)),
            constants.c_gamma
            * (np.sqrt(t_end) * np.sqrt(e0 / model.mu) + t_end * np.sqrt(2.0 * e0)),
        ),
        "eps_grad_rho_L2": (
            eps * float(np.trapezoid(eps_grad, t)),
            e0 / (model.A * model.gamma),
        ),
    }
    ls = entropy_side_from_series(series)
    from .entropy import bound_side_from_series

    rs = bound_side_from_series(series, constants.C0)
    return SweepEntry(
        eps=eps,
        battery=battery,
        r3=r3,
        r4=r4,
        final_ls=float(ls.total[-1]),
        final_rs=float(rs.total[-1]),
    )


def energy_of_state(state: FluidState, params: ModelParams) -> float:
    from .solver import energy

    return energy(state, params)


def run_eps_sweep(config: ExperimentConfig) -> SweepReport:
    """Sweep the regularization strength and track the remainder terms.

    Reports |R3|, |R4| (decay expected as eps -> 0; the slope threshold is
    a diagnostic, flagged as such), the a priori bound battery against its
    initial-energy ceilings, and the uniformity across eps of the three
    eps-independent battery members.
    """
    if len(config.eps_list) < 3:
        raise ParameterError("eps_list with >= 3 entries", "sweep needs at least 3 eps values")
    constants = config.entropy_constants()
    entries = [_sweep_member(config, eps, constants) for eps in config.eps_list]

    r3_abs = [abs(e.r3) for e in entries]
    r4_abs = [abs(e.r4) for e in entries]
    # eps_list is decreasing: decay toward eps -> 0 means the sequence decreases
    r3_dec = all(b < a for a, b in zip(r3_abs, r3_abs[1:]))
    r4_dec = all(b < a for a, b in zip(r4_abs, r4_abs[1:]))
    eps_vals = [e.eps for e in entries]
    r3_slope = loglog_slope(eps_vals, r3_abs)
    r4_slope = loglog_slope(eps_vals, r4_abs)

    uniform = True
    for name in ("sup_sqrt_rho_u_L2", "sup_rho_Lgamma", "int_u_H1"):
        vals = [e.battery[name][0] for e in entries]
        if max(vals) > 2.0 * min(vals) + 1e-300:
            uniform = False
    ceilings_ok = all(
        v <= c * (1.0 + 1e-9) for e in entries for v, c in e.battery.values()
    )
    return SweepReport(
        entries=entries,
        r3_slope=r3_slope,
        r4_slope=r4_slope,
        r3_decreasing=r3_dec,
        r4_decreasing=r4_dec,
        battery_uniform=uniform,
        ceilings_ok=ceilings_ok,
        slope_threshold=config.slope_threshold,
    )


# ---------------------------------------------------------------------------
# budget pilot


def measure_budget_constants(configs, safety: float = 10.0):
    """Fit the budget kappas from pilot weak-strong runs.

    For each config, run the forced scenario and attribute max LS to the
    dominant refinement parameter; the returned kappas are safety * the
    least-squares coefficients, floored at zero. Used once to populate the
    golden values; kept for reproducibility.
    """
    rows = []
    targets = []
    for cfg in configs:
        pair, forcing, state0 = build_scenario(cfg)
        traj = integrate(state0, cfg.model, cfg.solver, forcing=forcing)
        constants = cfg.entropy_constants()
        series = compute_series(traj, pair, cfg.model, constants, cfg.solver.backend)
        ls = entropy_side_from_series(series)
        dts = [row["dt"] for row in traj.ledger[1:]]
        rows.append([cfg.grid.h**2, float(np.mean(dts)) ** 2, cfg.model.eps])
        targets.append(float(ls.total.max()))
    coef, *_ = np.linalg.lstsq(np.asarray(rows), np.asarray(targets), rcond=None)
    return tuple(float(max(c, 0.0)) * safety for c in coef)
