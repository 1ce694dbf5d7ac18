"""Relative-entropy verification apparatus.

Given a computed trajectory (rho, u) and a smooth comparison pair (r, v),
this module evaluates the two sides of the relative-entropy inequality:

* the entropy side ``LS``: relative energy plus half the accumulated
  viscous dissipation of the velocity difference, and
* the bound side ``RS``: the exponentially weighted initial relative
  energy plus the accumulated continuity/momentum residual terms,

and issues a dissipative-solution verdict LS <= RS + tolerance at every
sampled time. Comparison pairs carry analytic time-derivative evaluators;
spatial derivatives are taken on the sampled fields with the selected
backend. All time integrals and exponent integrals use the trapezoid rule
on the trajectory's sample times.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import fields, stress
from .eos import (
    BoundaryCase,
    ModelParams,
    bregman_gap,
    pressure,
    pressure_potential_second,
)
from .errors import GridMismatchError, PairBoundsError, ParameterError
from .fields import Grid, ScalarField, VectorField


# ---------------------------------------------------------------------------
# comparison pairs


@dataclass(frozen=True)
class TestPair:
    """Smooth comparison pair (r, v) with analytic time-derivative evaluators.

    ``density``/``velocity`` evaluate the fields at a time; the rate
    evaluators return the exact partial time derivatives, never finite
    differences of stored fields. r must stay >= r1 > 0 at every node;
    an upper bound r2 is required by the admissibility check when the
    adiabatic exponent exceeds 2.
    """

    __test__ = False  # not a pytest class, despite the domain name

    grid: Grid
    r1: float
    density_fn: Callable[[float], ScalarField] = field(repr=False)
    velocity_fn: Callable[[float], VectorField] = field(repr=False)
    density_rate_fn: Callable[[float], ScalarField] = field(repr=False)
    velocity_rate_fn: Callable[[float], VectorField] = field(repr=False)
    r2: Optional[float] = None
    label: str = "pair"

    def __post_init__(self):
        if not self.r1 > 0:
            raise PairBoundsError("r1 must be positive")

    def density(self, t: float) -> ScalarField:
        r = self.density_fn(t)
        if r.values.min() < self.r1 - 1e-12:
            raise PairBoundsError(
                f"{self.label}: comparison density dips below r1={self.r1} at t={t}"
            )
        if self.r2 is not None and r.values.max() > self.r2 + 1e-12:
            raise PairBoundsError(
                f"{self.label}: comparison density exceeds r2={self.r2} at t={t}"
            )
        return r

    def velocity(self, t: float) -> VectorField:
        return self.velocity_fn(t)

    def density_rate(self, t: float) -> ScalarField:
        return self.density_rate_fn(t)

    def velocity_rate(self, t: float) -> VectorField:
        return self.velocity_rate_fn(t)

    @classmethod
    def from_samples(cls, times, densities, velocities, r1, r2=None, label="sampled-pair"):
        """Pair backed by uniformly sampled fields.

        Field values interpolate linearly in time; the rate evaluators use
        centered differences across samples (one-sided at the ends), an
        O(dt^2) approximation documented for externally supplied data.
        """
        times = np.asarray(times, dtype=float)
        grid = densities[0].grid
        rho_stack = np.stack([f.values for f in densities])
        vel_stack = np.stack([f.values for f in velocities])

        def interp(stack, t):
            i = int(np.clip(np.searchsorted(times, t) - 1, 0, len(times) - 2))
            w = (t - times[i]) / (times[i + 1] - times[i])
            w = min(max(w, 0.0), 1.0)
            return (1.0 - w) * stack[i] + w * stack[i + 1]

        def rate(stack, t):
            i = int(np.clip(np.searchsorted(times, t), 1, len(times) - 2))
            return (stack[i + 1] - stack[i - 1]) / (times[i + 1] - times[i - 1])

        return cls(
            grid=grid,
            r1=r1,
            r2=r2,
            label=label,
            density_fn=lambda t: ScalarField(grid, interp(rho_stack, t)),
            velocity_fn=lambda t: VectorField(grid, interp(vel_stack, t)),
            density_rate_fn=lambda t: ScalarField(grid, rate(rho_stack, t)),
            velocity_rate_fn=lambda t: VectorField(grid, rate(vel_stack, t)),
        )


def validate_pair(pair: TestPair, params: ModelParams, t: float = 0.0):
    """Admissibility: r >= r1 > 0 always; r <= r2 required when gamma > 2."""
    if params.gamma > 2.0 and pair.r2 is None:
        raise PairBoundsError(f"{pair.label}: r2 upper bound required when gamma > 2")
    pair.density(t)


@dataclass(frozen=True)
class EntropyConstants:
    """Constants entering the bound side: Gronwall constant C0, Sobolev
    embedding constant c_hat and Korn/Poincare constant c_gamma.

    C0 = 0 is admitted (it is what calibration returns on a degenerate
    catalogue); the embedding constants must be positive.
    """

    C0: float
    c_hat: float
    c_gamma: float

    def __post_init__(self):
        if self.C0 < 0:
            raise ParameterError("C0 >= 0")
        if not (self.c_hat > 0 and self.c_gamma > 0):
            raise ParameterError("c_hat > 0 and c_gamma > 0")

    @classmethod
    def default(cls) -> "EntropyConstants":
        from ._golden import C0_DEFAULT, C_GAMMA_DEFAULT, C_HAT_DEFAULT

        return cls(C0=C0_DEFAULT, c_hat=C_HAT_DEFAULT, c_gamma=C_GAMMA_DEFAULT)

    def to_dict(self) -> dict:
        return {"C0": self.C0, "c_hat": self.c_hat, "c_gamma": self.c_gamma}

    @classmethod
    def from_dict(cls, d: dict) -> "EntropyConstants":
        return cls(C0=d["C0"], c_hat=d["c_hat"], c_gamma=d["c_gamma"])


# ---------------------------------------------------------------------------
# residual fields and the growth rate


def continuity_residual(pair: TestPair, t: float, backend: str = "spectral") -> ScalarField:
    """d_t r + div(r v); vanishes iff the pair satisfies mass conservation."""
    r = pair.density(t)
    v = pair.velocity(t)
    flux = VectorField(pair.grid, r.values * v.values)
    return ScalarField(pair.grid, pair.density_rate(t).values + fields.divergence(flux, backend).values)


def momentum_residual(
    pair: TestPair, t: float, params: ModelParams, backend: str = "spectral"
) -> VectorField:
    """r d_t v + r (v.grad) v + grad p(r) - div S(grad v).

    Zero iff (r, v) solves the momentum balance with density r.
    """
    r = pair.density(t)
    v = pair.velocity(t)
    J = fields.jacobian(v, backend)
    convection = np.einsum("ij...,j...->i...", J.values, v.values)
    grad_p = fields.gradient(ScalarField(pair.grid, pressure(r.values, params)), backend)
    div_s = stress.stress_divergence(v, params, backend)
    vals = (
        r.values * (pair.velocity_rate(t).values + convection)
        + grad_p.values
        - div_s.values
    )
    return VectorField(pair.grid, vals)


def growth_rate_base_terms(
    pair: TestPair,
    t: float,
    params: ModelParams,
    constants: EntropyConstants,
    backend: str = "spectral",
) -> tuple[float, float, float]:
    """The three summands of the base growth rate: the sup of the strain
    rate, the squared fractional-exponent stress-divergence norm weighted
    by c_hat*c_gamma^2/(mu*r1), and the linear one weighted by (1+sqrt(r1))/r1."""
    v = pair.velocity(t)
    d_inf = fields.lp_norm(stress.strain_rate(v, backend), np.inf)
    div_s = stress.stress_divergence(v, params, backend)
    g = params.gamma
    q1 = 6.0 * g / (5.0 * g - 3.0)
    q2 = 2.0 * g / (g - 1.0)
    r1 = pair.r1
    term2 = (
        constants.c_hat * constants.c_gamma**2 / (params.mu * r1) * fields.lp_norm(div_s, q1) ** 2
    )
    term3 = (1.0 + np.sqrt(r1)) / r1 * fields.lp_norm(div_s, q2)
    return d_inf, term2, term3


def growth_rate_base(pair, t, params, constants, backend: str = "spectral") -> float:
    return sum(growth_rate_base_terms(pair, t, params, constants, backend))


def growth_rate(pair, t, params, constants, backend: str = "spectral") -> float:
    """Growth rate in the Gronwall weight: mu + base rate on the torus,
    the base rate alone under Dirichlet conditions."""
    base = growth_rate_base(pair, t, params, constants, backend)
    if params.boundary_case is BoundaryCase.PERIODIC:
        return params.mu + base
    return base


def essential_residual_masks(rho: ScalarField, r: ScalarField):
    """Partition of the nodes: essential where |rho - r| <= r/2, residual else."""
    if rho.grid != r.grid:
        raise GridMismatchError("masks need fields on one grid")
    ess = np.abs(rho.values - r.values) <= 0.5 * r.values
    return ess, ~ess


# ---------------------------------------------------------------------------
# trajectory series


def cumulative_trapezoid(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    out = np.zeros_like(np.asarray(f, dtype=float))
    out[1:] = np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(t))
    return out


def gronwall_factor(times, lam, s: float, t: float, C0: float) -> float:
    """exp of the trapezoid integral of C0*lam over [s, t] on the sampled grid."""
    times = np.asarray(times, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if s > t:
        raise ValueError("gronwall_factor needs s <= t")
    if s < times[0] - 1e-12 or t > times[-1] + 1e-12:
        raise ValueError("interval outside the sampled range")
    inner = times[(times > s) & (times < t)]
    knots = np.concatenate([[s], inner, [t]])
    vals = np.interp(knots, times, lam)
    return float(np.exp(C0 * np.trapezoid(vals, knots)))


def relative_energy(rho: ScalarField, u: VectorField, r: ScalarField, v: VectorField,
                    params: ModelParams) -> float:
    """integral of 0.5*rho*|u - v|^2 + Bregman gap(rho, r)."""
    diff2 = np.sum((u.values - v.values) ** 2, axis=0)
    dens = 0.5 * rho.values * diff2 + bregman_gap(rho.values, r.values, params)
    return float(dens.sum() * rho.grid.h**rho.grid.dim)


@dataclass
class EntropySeries:
    """Per-sample ingredients of both inequality sides for one (trajectory, pair)."""

    t: np.ndarray
    rel_energy: np.ndarray
    diss_rate: np.ndarray
    lam: np.ndarray
    e1_mass: np.ndarray
    e2_mass: np.ndarray
    ess_fraction: np.ndarray
    initial_rel_energy: float


def compute_series(
    trajectory,
    pair: TestPair,
    params: ModelParams,
    constants: EntropyConstants,
    backend: str = "spectral",
    initial=None,
    initial_pair: Optional[TestPair] = None,
) -> EntropySeries:
    states = list(trajectory)
    if not states:
        raise ValueError("empty trajectory")
    if states[0].rho.grid != pair.grid:
        raise GridMismatchError("trajectory and pair live on different grids")
    validate_pair(pair, params, states[0].t)

    n = len(states)
    t = np.array([s.t for s in states])
    rel_e = np.zeros(n)
    diss = np.zeros(n)
    lam = np.zeros(n)
    e1m = np.zeros(n)
    e2m = np.zeros(n)
    essf = np.zeros(n)
    w = pair.grid.h ** pair.grid.dim

    for k, state in enumerate(states):
        tk = state.t
        r = pair.density(tk)
        v = pair.velocity(tk)
        u = state.velocity()
        rel_e[k] = relative_energy(state.rho, u, r, v, params)
        diss[k] = stress.dissipation(u, v, params, backend, route="norm")
        lam[k] = growth_rate(pair, tk, params, constants, backend)
        e1 = continuity_residual(pair, tk, backend)
        e1m[k] = float(
            np.abs(
                (r.values - state.rho.values)
                * pressure_potential_second(r.values, params)
                * e1.values
            ).sum()
            * w
        )
        e2 = momentum_residual(pair, tk, params, backend)
        dot = np.einsum("i...,i...->...", e2.values, v.values - u.values)
        e2m[k] = float(np.abs(state.rho.values / r.values * dot).sum() * w)
        ess, _ = essential_residual_masks(state.rho, r)
        total_mass = state.rho.values.sum()
        essf[k] = float((state.rho.values * ess).sum() / total_mass) if total_mass > 0 else 1.0

    init_state = states[0] if initial is None else initial
    init_pair = pair if initial_pair is None else initial_pair
    t0 = states[0].t
    e0 = relative_energy(
        init_state.rho,
        init_state.velocity(),
        init_pair.density(t0),
        init_pair.velocity(t0),
        params,
    )
    return EntropySeries(
        t=t,
        rel_energy=rel_e,
        diss_rate=diss,
        lam=lam,
        e1_mass=e1m,
        e2_mass=e2m,
        ess_fraction=essf,
        initial_rel_energy=e0,
    )


@dataclass
class EntropySide:
    """LS(t): relative energy plus half the accumulated dissipation."""

    t: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.energy + self.dissipation


@dataclass
class EntropyBound:
    """RS(t): weighted initial energy plus the residual accumulation terms."""

    t: np.ndarray
    initial: np.ndarray
    e1_term: np.ndarray
    e2_term: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.initial + self.e1_term + self.e2_term


def entropy_side_from_series(series: EntropySeries) -> EntropySide:
    return EntropySide(
        t=series.t,
        energy=series.rel_energy,
        dissipation=0.5 * cumulative_trapezoid(series.t, series.diss_rate),
    )


def bound_side_from_series(series: EntropySeries, C0: float) -> EntropyBound:
    expo = cumulative_trapezoid(series.t, C0 * series.lam)
    growth = np.exp(expo)
    decay = np.exp(-expo)
    e1 = growth * cumulative_trapezoid(series.t, decay * series.e1_mass)
    e2 = growth * cumulative_trapezoid(series.t, decay * series.e2_mass)
    return EntropyBound(
        t=series.t,
        initial=growth * series.initial_rel_energy,
        e1_term=e1,
        e2_term=e2,
    )


def entropy_side(trajectory, pair, params, constants=None, backend="spectral") -> EntropySide:
    """LS series for a trajectory against a pair. ``constants`` is accepted
    for signature symmetry with the bound side but does not enter LS."""
    consts = constants or EntropyConstants.default()
    return entropy_side_from_series(compute_series(trajectory, pair, params, consts, backend))


def bound_side(
    trajectory,
    pair,
    params,
    constants,
    initial=None,
    initial_pair=None,
    backend="spectral",
) -> EntropyBound:
    """RS series; ``initial``/``initial_pair`` override the data entering the
    initial relative-energy term (defaults: first trajectory state, the pair)."""
    series = compute_series(
        trajectory, pair, params, constants, backend, initial=initial, initial_pair=initial_pair
    )
    return bound_side_from_series(series, constants.C0)


# ---------------------------------------------------------------------------
# verdict report


@dataclass
class EntropyReport:
    """Term-by-term breakdown of both inequality sides with the verdict."""

    label: str
    t: np.ndarray
    ls_total: np.ndarray
    ls_energy: np.ndarray
    ls_dissipation: np.ndarray
    rs_total: np.ndarray
    rs_initial: np.ndarray
    rs_e1: np.ndarray
    rs_e2: np.ndarray
    lam: np.ndarray
    ess_fraction: np.ndarray
    tolerance: float
    constants: EntropyConstants
    verdict: bool
    first_violation_time: Optional[float]
    max_violation: float

    CSV_COLUMNS = (
        "t",
        "LS",
        "LS_energy",
        "LS_dissipation",
        "RS",
        "RS_initial",
        "RS_E1",
        "RS_E2",
        "lambda",
        "ess_fraction",
    )

    def rows(self):
        cols = (
            self.t,
            self.ls_total,
            self.ls_energy,
            self.ls_dissipation,
            self.rs_total,
            self.rs_initial,
            self.rs_e1,
            self.rs_e2,
            self.lam,
            self.ess_fraction,
        )
        for k in range(len(self.t)):
            yield [float(c[k]) for c in cols]

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(self.CSV_COLUMNS) + "\n")
            for row in self.rows():
                fh.write(",".join(repr(x) for x in row) + "\n")

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "tolerance": self.tolerance,
            "constants": self.constants.to_dict(),
            "verdict": bool(self.verdict),
            "first_violation_time": self.first_violation_time,
            "max_violation": self.max_violation,
            "series": {
                name: [float(x) for x in col]
                for name, col in zip(
                    self.CSV_COLUMNS,
                    (
                        self.t,
                        self.ls_total,
                        self.ls_energy,
                        self.ls_dissipation,
                        self.rs_total,
                        self.rs_initial,
                        self.rs_e1,
                        self.rs_e2,
                        self.lam,
                        self.ess_fraction,
                    ),
                )
            },
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def verdict_from_series(
    series: EntropySeries,
    constants: EntropyConstants,
    tolerance: float,
    label: str = "pair",
) -> EntropyReport:
    ls = entropy_side_from_series(series)
    rs = bound_side_from_series(series, constants.C0)
    violation = ls.total - rs.total
    bad = violation > tolerance
    first_bad = float(series.t[np.argmax(bad)]) if bad.any() else None
    return EntropyReport(
        label=label,
        t=series.t,
        ls_total=ls.total,
        ls_energy=ls.energy,
        ls_dissipation=ls.dissipation,
        rs_total=rs.total,
        rs_initial=rs.initial,
        rs_e1=rs.e1_term,
        rs_e2=rs.e2_term,
        lam=series.lam,
        ess_fraction=series.ess_fraction,
        tolerance=tolerance,
        constants=constants,
        verdict=not bad.any(),
        first_violation_time=first_bad,
        max_violation=float(violation.max()),
    )


def dissipative_verdict(
    trajectory,
    pair: TestPair,
    params: ModelParams,
    constants: EntropyConstants,
    tolerance: float = 1e-8,
    backend: str = "spectral",
    initial=None,
    initial_pair=None,
) -> EntropyReport:
    """Check LS(t) <= RS(t) + tolerance at every sampled time; inputs untouched."""
    series = compute_series(
        trajectory, pair, params, constants, backend, initial=initial, initial_pair=initial_pair
    )
    return verdict_from_series(series, constants, tolerance, label=pair.label)
