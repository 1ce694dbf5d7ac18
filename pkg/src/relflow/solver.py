"""Time integration of the regularized compressible model with energy
monitoring, renormalized-continuity residuals, approximate initial data
and manufactured solutions.

The evolved unknowns are conservative: density rho and momentum m; the
velocity is derived with a vacuum floor. The right-hand side assembles

    d_t rho = -div m + eps*Lap(rho)
    d_t m   = -div(rho u (x) u) - grad p(rho) - eps^a grad(rho^beta)
              + div S(grad u) + eps div(u (x) grad rho)

with (u (x) grad rho)_ij = u_i d_j rho. Setting eps = 0 runs the plain
system for manufactured-solution work. Time stepping is classical RK4
under a combined advective/viscous CFL restriction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import sympy as sp

from . import fields
from .entropy import TestPair
from .eos import ModelParams, pressure, pressure_derivative, pressure_potential, \
    pressure_potential_second, artificial_potential, artificial_potential_second
from .errors import DomainError, NumericsError, ParameterError, VacuumError
from .fields import Grid, ScalarField, VectorField, TensorField
from .mollify import MollifierSpec, space_mollify

_TINY = 1e-300


@dataclass(frozen=True)
class FluidState:
    """(density, momentum) snapshot at one instant."""

    t: float
    rho: ScalarField
    m: VectorField

    def __post_init__(self):
        if self.rho.grid != self.m.grid:
            raise ValueError("density and momentum grids differ")

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    def velocity(self, floor: float = 0.0) -> VectorField:
        """m / max(rho, floor); with floor = 0 vacuum nodes map to zero velocity."""
        denom = np.maximum(self.rho.values, max(floor, _TINY))
        vals = np.where(self.rho.values > 0, self.m.values / denom, 0.0)
        return VectorField(self.grid, vals)


@dataclass(frozen=True)
class SolverConfig:
    cfl: float = 0.4
    t_end: float = 1.0
    sample_stride: int = 1
    backend: str = "spectral"
    rho_floor: Optional[float] = None  # None -> params.eps
    dealias: bool = True
    max_steps: int = 500_000

    def __post_init__(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ParameterError("cfl in (0, 1]")
        if not self.t_end > 0:
            raise ParameterError("t_end > 0")
        if self.backend not in fields.BACKENDS:
            raise ParameterError(f"backend in {fields.BACKENDS}")
        if self.sample_stride < 1:
            raise ParameterError("sample_stride >= 1")

    def floor(self, params: ModelParams) -> float:
        return params.eps if self.rho_floor is None else self.rho_floor

    def to_dict(self) -> dict:
        return {
            "cfl": self.cfl,
            "t_end": self.t_end,
            "sample_stride": self.sample_stride,
            "backend": self.backend,
            "rho_floor": self.rho_floor,
            "dealias": self.dealias,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        return cls(**d)


def _maybe_dealias(f, config: SolverConfig):
    if config.dealias and config.backend == "spectral":
        return fields.dealias_filter(f)
    return f


def brenner_rhs(
    state: FluidState,
    params: ModelParams,
    config: SolverConfig,
    forcing: Optional[Callable[[float], VectorField]] = None,
) -> tuple[ScalarField, VectorField]:
    """Instantaneous rates (d_t rho, d_t m) of the regularized system.

    The mass flux uses div(m) directly, so mass is conserved to round-off.
    Pointwise nonlinear products (convection tensor, pressures, the
    u (x) grad rho tensor) are dealiased under the 2/3 rule on the
    spectral backend.
    """
    g = state.grid
    floor = config.floor(params)
    min_rho = float(state.rho.values.min())
    if min_rho < floor / 2.0 or min_rho <= 0.0:
        raise VacuumError(f"density {min_rho:.3e} below floor/2 = {floor / 2:.3e}", time=state.t)
    backend = config.backend
    u = state.velocity(floor)

    d_rho = -fields.divergence(state.m, backend).values
    if params.eps > 0:
        d_rho = d_rho + params.eps * fields.laplacian(state.rho, backend).values

    conv = TensorField(
        g, np.einsum("i...,j...->ij...", state.m.values, u.values)
    )
    conv = _maybe_dealias(conv, config)
    d_m = -fields.tensor_divergence(conv, backend).values

    total_p = pressure(state.rho.values, params)
    if params.eps > 0:
        total_p = total_p + params.eps**params.a * np.power(state.rho.values, params.beta)
    p_field = _maybe_dealias(ScalarField(g, total_p), config)
    d_m = d_m - fields.gradient(p_field, backend).values

    lap_u = fields.laplacian(u, backend)
    grad_div_u = fields.gradient(fields.divergence(u, backend), backend)
    d_m = d_m + params.mu * lap_u.values + (params.mu + params.lambda_) * grad_div_u.values

    if params.eps > 0:
        grad_rho = fields.gradient(state.rho, backend)
        brenner = TensorField(g, np.einsum("i...,j...->ij...", u.values, grad_rho.values))
        brenner = _maybe_dealias(brenner, config)
        d_m = d_m + params.eps * fields.tensor_divergence(brenner, backend).values

    if forcing is not None:
        d_m = d_m + forcing(state.t).values

    return ScalarField(g, d_rho), VectorField(g, d_m)


def cfl_time_step(state: FluidState, params: ModelParams, config: SolverConfig) -> float:
    """cfl * min(advective, viscous) step.

    Advective scale h/(max|u| + max c_s) with c_s^2 = p'(rho) +
    eps^a*beta*rho^(beta-1); viscous scale h^2/(2d*nu_max) with
    nu_max = max((2mu+lambda)/rho_floor, eps). A zero floor (eps = 0 runs)
    falls back to the current minimum density in the viscous scale.
    """
    g = state.grid
    floor = config.floor(params)
    u = state.velocity(floor)
    speed = float(np.sqrt(np.sum(u.values**2, axis=0)).max())
    c2 = pressure_derivative(state.rho.values, params)
    if params.eps > 0:
        c2 = c2 + params.eps**params.a * params.beta * np.power(
            state.rho.values, params.beta - 1.0
        )
    sound = float(np.sqrt(c2.max()))
    adv = g.h / max(speed + sound, _TINY)
    denom_floor = floor if floor > 0 else max(float(state.rho.values.min()), _TINY)
    nu_max = max((2.0 * params.mu + params.lambda_) / denom_floor, params.eps)
    visc = g.h**2 / (2.0 * g.dim * max(nu_max, _TINY))
    return config.cfl * min(adv, visc)


def step(
    state: FluidState,
    params: ModelParams,
    config: SolverConfig,
    forcing=None,
    dt: Optional[float] = None,
) -> FluidState:
    """One classical 4-stage Runge-Kutta advance of (rho, m)."""
    if dt is None:
        dt = cfl_time_step(state, params, config)
    g = state.grid

    def rhs_of(t, rho_vals, m_vals):
        s = FluidState(t, ScalarField(g, rho_vals), VectorField(g, m_vals))
        d_rho, d_m = brenner_rhs(s, params, config, forcing)
        return d_rho.values, d_m.values

    r0, m0 = state.rho.values, state.m.values
    k1r, k1m = rhs_of(state.t, r0, m0)
    k2r, k2m = rhs_of(state.t + dt / 2, r0 + dt / 2 * k1r, m0 + dt / 2 * k1m)
    k3r, k3m = rhs_of(state.t + dt / 2, r0 + dt / 2 * k2r, m0 + dt / 2 * k2m)
    k4r, k4m = rhs_of(state.t + dt, r0 + dt * k3r, m0 + dt * k3m)
    new_rho = r0 + dt / 6.0 * (k1r + 2 * k2r + 2 * k3r + k4r)
    new_m = m0 + dt / 6.0 * (k1m + 2 * k2m + 2 * k3m + k4m)
    return FluidState(state.t + dt, ScalarField(g, new_rho), VectorField(g, new_m))


@dataclass
class Trajectory:
    """Sampled states plus the per-sample diagnostics ledger."""

    states: list
    ledger: list  # dicts with keys LEDGER_COLUMNS

    LEDGER_COLUMNS = (
        "t",
        "mass",
        "momentum_0",
        "momentum_1",
        "momentum_2",
        "energy",
        "dissipation_rate",
        "min_rho",
        "max_speed",
        "dt",
    )

    def __iter__(self):
        return iter(self.states)

    def __len__(self):
        return len(self.states)

    def __getitem__(self, i):
        return self.states[i]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def ledger_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(self.LEDGER_COLUMNS) + "\n")
            for row in self.ledger:
                fh.write(",".join(repr(float(row[c])) for c in self.LEDGER_COLUMNS) + "\n")


def _ledger_row(state: FluidState, params: ModelParams, config: SolverConfig, dt: float) -> dict:
    mom = fields.integral(state.m)
    mom3 = list(mom) + [0.0] * (3 - len(mom))
    u = state.velocity(config.floor(params))
    return {
        "t": state.t,
        "mass": fields.integral(state.rho),
        "momentum_0": mom3[0],
        "momentum_1": mom3[1],
        "momentum_2": mom3[2],
        "energy": energy(state, params),
        "dissipation_rate": energy_dissipation_rate(state, params, config.backend),
        "min_rho": float(state.rho.values.min()),
        "max_speed": float(np.sqrt(np.sum(u.values**2, axis=0)).max()),
        "dt": dt,
    }


def integrate(
    state0: FluidState,
    params: ModelParams,
    config: SolverConfig,
    forcing=None,
) -> Trajectory:
    """March to t_end, sampling every ``sample_stride`` accepted steps.

    Aborts with a contextual error (never a silent clamp) on vacuum or
    non-finite values; the exception carries the failure time and step.
    """
    states = [state0]
    ledger = [_ledger_row(state0, params, config, 0.0)]
    state = state0
    steps = 0
    while state.t < config.t_end - 1e-12:
        dt = min(cfl_time_step(state, params, config), config.t_end - state.t)
        try:
            state = step(state, params, config, forcing=forcing, dt=dt)
        except (VacuumError, NumericsError) as err:
            err.time = getattr(err, "time", None) or state.t
            err.step = steps
            raise
        steps += 1
        if steps > config.max_steps:
            raise NumericsError(
                f"exceeded max_steps={config.max_steps} before t_end", time=state.t, step=steps
            )
        if steps % config.sample_stride == 0 or state.t >= config.t_end - 1e-12:
            states.append(state)
            ledger.append(_ledger_row(state, params, config, dt))
    return Trajectory(states=states, ledger=ledger)


# ---------------------------------------------------------------------------
# energy bookkeeping


def energy(state: FluidState, params: ModelParams) -> float:
    """integral of 0.5*rho*|u|^2 + P(rho) + eps^a*Q(rho)."""
    u = state.velocity()
    kinetic = 0.5 * np.sum(state.m.values * u.values, axis=0)
    dens = kinetic + pressure_potential(state.rho.values, params)
    if params.eps > 0:
        dens = dens + params.eps**params.a * artificial_potential(state.rho.values, params)
    return float(dens.sum() * state.grid.h**state.grid.dim)


def energy_dissipation_rate(state: FluidState, params: ModelParams, backend: str = "spectral") -> float:
    """integral of S(grad u):grad u + eps*P''(rho)*|grad rho|^2
    + eps^(1+a)*Q''(rho)*|grad rho|^2."""
    from . import stress as _stress

    u = state.velocity()
    rate = _stress.dissipation(u, VectorField.zero(state.grid), params, backend, route="norm")
    if params.eps > 0:
        grad_rho = fields.gradient(state.rho, backend)
        g2 = np.sum(grad_rho.values**2, axis=0)
        dens = params.eps * pressure_potential_second(state.rho.values, params) * g2
        dens = dens + params.eps ** (1.0 + params.a) * artificial_potential_second(
            state.rho.values, params
        ) * g2
        rate += float(dens.sum() * state.grid.h**state.grid.dim)
    return rate


@dataclass
class EnergyMonitorResult:
    times: np.ndarray          # midpoint times of each interval
    defects: np.ndarray        # [E(t+dt)-E(t)]/dt + averaged dissipation rate
    tolerances: np.ndarray
    max_defect: float
    passed: bool


def energy_inequality_monitor(
    trajectory: Trajectory,
    params: ModelParams,
    tol_constant: Optional[float] = None,
    backend: str = "spectral",
) -> EnergyMonitorResult:
    """Per-interval defect of the discrete energy inequality on a free run.

    defect_k = [E(t_{k+1}) - E(t_k)]/dt + (D_k + D_{k+1})/2 should be
    <= tol_constant*(dt^2 + h^2); a forced run legitimately injects energy
    and is outside this monitor's contract.
    """
    if tol_constant is None:
        from ._golden import ENERGY_DEFECT_CONSTANT

        tol_constant = ENERGY_DEFECT_CONSTANT
    states = trajectory.states
    if len(states) < 2:
        raise ValueError("monitor needs at least two samples")
    h = states[0].grid.h
    e = np.array([energy(s, params) for s in states])
    d = np.array([energy_dissipation_rate(s, params, backend) for s in states])
    t = trajectory.times
    dt = np.diff(t)
    defects = np.diff(e) / dt + 0.5 * (d[:-1] + d[1:])
    tol = tol_constant * (dt**2 + h**2)
    return EnergyMonitorResult(
        times=0.5 * (t[:-1] + t[1:]),
        defects=defects,
        tolerances=tol,
        max_defect=float(np.abs(defects).max()),
        passed=bool(np.all(defects <= tol)),
    )


def renormalized_continuity_residual(
    trajectory: Trajectory,
    b: Callable,
    b_prime: Callable,
    b_double_prime: Callable,
    params: ModelParams,
    backend: str = "spectral",
):
    """L1 norms of the renormalized mass-balance residual at interior samples.

    residual = d_t B(rho) + div(B(rho) u) + (B'(rho) rho - B(rho)) div u
               - eps div(B'(rho) grad rho) + eps B''(rho) |grad rho|^2,

    with d_t B by centered differences across stored samples. Vanishes at
    the discretization level when B is applied to a smooth solution of the
    regularized mass balance.
    """
    states = trajectory.states
    if len(states) < 3:
        raise ValueError("need at least three samples")
    t = trajectory.times
    norms = []
    times = []
    w = states[0].grid.h ** states[0].grid.dim
    for k in range(1, len(states) - 1):
        s = states[k]
        rho = s.rho.values
        try:
            brho = np.asarray(b(rho), dtype=float)
            bp = np.asarray(b_prime(rho), dtype=float)
            bpp = np.asarray(b_double_prime(rho), dtype=float)
        except (ValueError, FloatingPointError, ZeroDivisionError) as exc:
            raise DomainError(f"renormalizing function undefined on density range: {exc}")
        if not (np.isfinite(brho).all() and np.isfinite(bp).all() and np.isfinite(bpp).all()):
            raise DomainError("renormalizing function not finite on the density range")
        u = s.velocity()
        g = s.grid
        # 3-point derivative, second order also on nonuniform sample spacing
        # (the final step is clipped to t_end, so spacings are not equal)
        dp = t[k + 1] - t[k]
        dm = t[k] - t[k - 1]
        bp_next = b(states[k + 1].rho.values)
        bp_prev = b(states[k - 1].rho.values)
        dtb = (bp_next * dm**2 - bp_prev * dp**2 + brho * (dp**2 - dm**2)) / (
            dp * dm * (dp + dm)
        )
        div_bu = fields.divergence(VectorField(g, brho * u.values), backend).values
        div_u = fields.divergence(u, backend).values
        res = dtb + div_bu + (bp * rho - brho) * div_u
        if params.eps > 0:
            grad_rho = fields.gradient(s.rho, backend)
            res = res - params.eps * fields.divergence(
                VectorField(g, bp * grad_rho.values), backend
            ).values
            res = res + params.eps * bpp * np.sum(grad_rho.values**2, axis=0)
        norms.append(float(np.abs(res).sum() * w))
        times.append(t[k])
    return np.array(times), np.array(norms)


# ---------------------------------------------------------------------------
# approximate initial data


@dataclass(frozen=True)
class InitialData:
    state: FluidState
    clamped_fraction: float
    mass: float


def initial_data(
    params: ModelParams,
    grid: Grid,
    density_fn,
    momentum_fn,
    delta: Optional[float] = None,
) -> InitialData:
    """Approximate initial data: clamp the target density into
    [eps, eps^(-a/(2*beta))], mollify, and derive a smoothed velocity.

    The smoothing width defaults to max(2h, eps^(gamma/(gamma+1))), which
    balances the smoothing error against the clamp level so the L^gamma
    distance to the target decays at first order in eps. Momentum must
    vanish wherever the target density does.
    """
    if params.eps <= 0:
        raise ParameterError("eps > 0", "approximate initial data requires eps > 0")
    rho0 = np.asarray(density_fn(*grid.nodes()), dtype=float) * np.ones(grid.shape)
    if np.any(rho0 < 0):
        raise DomainError("target density must be nonnegative")
    m0 = np.stack(
        [np.asarray(f, dtype=float) * np.ones(grid.shape) for f in momentum_fn(*grid.nodes())]
    )
    vacuum = rho0 == 0
    if np.any(np.abs(m0[:, vacuum]) > 0):
        raise ValueError("momentum must vanish on the vacuum set of the target density")

    lo = params.eps
    hi = params.eps ** (-params.a / (2.0 * params.beta))
    clamped = np.clip(rho0, lo, hi)
    clamped_fraction = float(np.mean(clamped != rho0))

    if delta is None:
        delta = max(2.0 * grid.h, params.eps ** (params.gamma / (params.gamma + 1.0)))
    spec = MollifierSpec(delta=min(delta, 1.0))
    rho_eps = space_mollify(ScalarField(grid, clamped), spec)
    # convex smoothing can undershoot the clamp floor by round-off only
    rho_vals = np.maximum(rho_eps.values, lo)

    u0 = m0 / np.maximum(rho0, params.eps)
    u_eps = space_mollify(VectorField(grid, u0), spec)
    state = FluidState(0.0, ScalarField(grid, rho_vals), VectorField(grid, rho_vals * u_eps.values))
    mass = fields.integral(state.rho)
    if mass <= 0:
        raise DomainError("approximate initial density has nonpositive mass")
    return InitialData(state=state, clamped_fraction=clamped_fraction, mass=mass)


# ---------------------------------------------------------------------------
# manufactured solutions


@dataclass(frozen=True)
class Recipe:
    """Catalogue entry for a manufactured comparison pair.

    kinds: "rest" (uniform state), "acoustic" (traveling density wave with
    the mass-exact transport velocity), "shear" (steady unidirectional
    shear layer, constant density; needs dim >= 2).
    """

    kind: str
    amplitude: float = 0.1
    mean_density: float = 1.0
    speed: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rest", "acoustic", "shear"):
            raise ValueError(f"unknown recipe kind {self.kind!r}")
        if self.mean_density <= 0:
            raise ValueError("mean_density must be positive")
        if self.kind == "acoustic" and not 0 <= self.amplitude < self.mean_density:
            raise ValueError("acoustic amplitude must satisfy 0 <= amplitude < mean_density")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "amplitude": self.amplitude,
            "mean_density": self.mean_density,
            "speed": self.speed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Recipe":
        return cls(**d)


def _symbolic_pair(recipe: Recipe, dim: int):
    """Symbolic (r, v) with E1 = d_t r + div(r v) identically zero."""
    ts = sp.Symbol("t")
    xs = sp.symbols(f"x0:{dim}")
    rho_bar = sp.Float(recipe.mean_density)
    if recipe.kind == "rest":
        r = rho_bar
        v = [sp.Integer(0)] * dim
    elif recipe.kind == "acoustic":
        s = sp.sin(xs[0] - sp.Float(recipe.speed) * ts)
        r = rho_bar + sp.Float(recipe.amplitude) * s
        v = [sp.Float(recipe.speed) * sp.Float(recipe.amplitude) * s / r] + [sp.Integer(0)] * (
            dim - 1
        )
    else:  # shear
        if dim < 2:
            raise ValueError("shear recipe needs dim >= 2")
        r = rho_bar
        v = [sp.Float(recipe.amplitude) * sp.sin(xs[1])] + [sp.Integer(0)] * (dim - 1)
    e1 = sp.simplify(sp.diff(r, ts) + sum(sp.diff(r * v[j], xs[j]) for j in range(dim)))
    assert e1 == 0, "catalogue recipes must be mass-exact"
    return ts, xs, r, v


def _lambdify_scalar(ts, xs, expr, grid: Grid):
    fn = sp.lambdify((ts, *xs), expr, modules="numpy")
    coords = grid.nodes()

    def evaluate(t: float) -> np.ndarray:
        return np.asarray(fn(t, *coords), dtype=float) * np.ones(grid.shape)

    return evaluate


def manufactured_pair(recipe: Recipe, grid: Grid) -> TestPair:
    """Comparison pair with exact symbolic time-derivative evaluators."""
    ts, xs, r, v = _symbolic_pair(recipe, grid.dim)
    r_eval = _lambdify_scalar(ts, xs, r, grid)
    rt_eval = _lambdify_scalar(ts, xs, sp.diff(r, ts), grid)
    v_evals = [_lambdify_scalar(ts, xs, comp, grid) for comp in v]
    vt_evals = [_lambdify_scalar(ts, xs, sp.diff(comp, ts), grid) for comp in v]

    if recipe.kind == "acoustic":
        r1 = recipe.mean_density - recipe.amplitude
        r2 = recipe.mean_density + recipe.amplitude
    else:
        r1 = r2 = recipe.mean_density

    return TestPair(
        grid=grid,
        r1=r1,
        r2=r2,
        label=recipe.kind,
        density_fn=lambda t: ScalarField(grid, r_eval(t)),
        velocity_fn=lambda t: VectorField(grid, np.stack([e(t) for e in v_evals])),
        density_rate_fn=lambda t: ScalarField(grid, rt_eval(t)),
        velocity_rate_fn=lambda t: VectorField(grid, np.stack([e(t) for e in vt_evals])),
    )


def manufactured_forcing(recipe: Recipe, grid: Grid, params: ModelParams):
    """Momentum source (added to d_t m) that makes the recipe's pair an exact
    solution of the forced, unregularized system.

    Computed by symbolic differentiation of the pair, independent of the
    discrete operators, so it doubles as an oracle for residual tests.
    """
    ts, xs, r, v = _symbolic_pair(recipe, grid.dim)
    dim = grid.dim
    mu, lam, A, gamma = params.mu, params.lambda_, params.A, params.gamma
    div_v = sum(sp.diff(v[j], xs[j]) for j in range(dim))
    comps = []
    for i in range(dim):
        convection = sum(v[j] * sp.diff(v[i], xs[j]) for j in range(dim))
        lap = sum(sp.diff(v[i], xs[j], 2) for j in range(dim))
        # left unsimplified: lambdify handles the raw expression and
        # sympy.simplify is prohibitively slow on the rational trig terms
        e2_i = (
            r * sp.diff(v[i], ts)
            + r * convection
            + sp.diff(A * r**gamma, xs[i])
            - mu * lap
            - (mu + lam) * sp.diff(div_v, xs[i])
        )
        comps.append(e2_i)
    evals = [_lambdify_scalar(ts, xs, c, grid) for c in comps]

    def forcing(t: float) -> VectorField:
        return VectorField(grid, np.stack([e(t) for e in evals]))

    return forcing


def pair_initial_state(pair: TestPair, t: float = 0.0) -> FluidState:
    """Solver initial data built from the pair itself (zero initial gap)."""
    r = pair.density(t)
    v = pair.velocity(t)
    return FluidState(t, r, VectorField(pair.grid, r.values * v.values))
