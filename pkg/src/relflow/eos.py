"""Isentropic pressure law, pressure potentials and the Bregman gap.

All thermodynamic functions accept scalars or numpy arrays and are pure.
Code units are dimensionless throughout.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, ParameterError, SingularityError


class BoundaryCase(str, enum.Enum):
    PERIODIC = "periodic"
    DIRICHLET = "dirichlet"


@dataclass(frozen=True)
class ModelParams:
    """Physical and regularization constants with admissibility validation.

    A: pressure coefficient; gamma: adiabatic exponent; mu, lambda_: shear
    and bulk-related viscosities; eps: regularization strength (0 switches
    the regularization off); a: artificial-pressure exponent; beta:
    artificial adiabatic exponent.
    """

    A: float = 1.0
    gamma: float = 2.0
    mu: float = 0.1
    lambda_: float = 0.0
    eps: float = 1e-3
    a: float = 1.0
    beta: float = 5.0
    boundary_case: BoundaryCase = BoundaryCase.PERIODIC

    def __post_init__(self):
        object.__setattr__(self, "boundary_case", BoundaryCase(self.boundary_case))
        if not self.A > 0:
            raise ParameterError("A > 0")
        if not self.mu > 0:
            raise ParameterError("mu > 0")
        if not 2.0 * self.mu + 3.0 * self.lambda_ >= 0:
            raise ParameterError("2*mu + 3*lambda >= 0")
        if self.boundary_case is BoundaryCase.PERIODIC:
            if not self.gamma >= 6.0 / 5.0:
                raise ParameterError("gamma >= 6/5 (periodic)")
        elif not self.gamma > 1.0:
            raise ParameterError("gamma > 1 (dirichlet)")
        if not 0.0 <= self.eps <= 1.0:
            raise ParameterError("eps in [0, 1]")
        if not self.a > 0:
            raise ParameterError("a > 0")
        if not self.beta > max(4.0, self.gamma):
            raise ParameterError("beta > max(4, gamma)")

    def to_dict(self) -> dict:
        return {
            "A": self.A,
            "gamma": self.gamma,
            "mu": self.mu,
            "lambda": self.lambda_,
            "eps": self.eps,
            "a": self.a,
            "beta": self.beta,
            "boundary_case": self.boundary_case.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        d = dict(d)
        if "lambda" in d:
            d["lambda_"] = d.pop("lambda")
        return cls(**d)


def _check_rho(rho):
    if np.any(np.asarray(rho) < 0):
        raise DomainError("density must be nonnegative")


def pressure(rho, params: ModelParams):
    """p(rho) = A * rho^gamma."""
    _check_rho(rho)
    return params.A * np.power(rho, params.gamma)


def pressure_derivative(rho, params: ModelParams):
    """p'(rho) = A * gamma * rho^(gamma-1)."""
    _check_rho(rho)
    return params.A * params.gamma * np.power(rho, params.gamma - 1.0)


def pressure_potential(rho, params: ModelParams):
    """P(rho) = A/(gamma-1) * rho^gamma, the potential with P'(r) r - P(r) = p(r)."""
    _check_rho(rho)
    return params.A / (params.gamma - 1.0) * np.power(rho, params.gamma)


def pressure_potential_derivative(rho, params: ModelParams):
    """P'(rho) = A*gamma/(gamma-1) * rho^(gamma-1)."""
    _check_rho(rho)
    return params.A * params.gamma / (params.gamma - 1.0) * np.power(rho, params.gamma - 1.0)


def pressure_potential_second(rho, params: ModelParams):
    """P''(rho) = A*gamma*rho^(gamma-2); singular at vacuum when gamma < 2.

    Callers must floor the density first; failing loudly here beats
    propagating infinities.
    """
    _check_rho(rho)
    if params.gamma < 2.0 and np.any(np.asarray(rho) == 0):
        raise SingularityError("P'' is singular at rho = 0 for gamma < 2")
    return params.A * params.gamma * np.power(rho, params.gamma - 2.0)


def artificial_potential(rho, params: ModelParams):
    """Q(rho) = rho^beta / (beta - 1), the high-density stabilizer potential."""
    _check_rho(rho)
    return np.power(rho, params.beta) / (params.beta - 1.0)


def artificial_potential_second(rho, params: ModelParams):
    """Q''(rho) = beta * rho^(beta-2)."""
    _check_rho(rho)
    return params.beta * np.power(rho, params.beta - 2.0)


def bregman_gap(rho, r, params: ModelParams):
    """Convexity gap P(rho) - P'(r)(rho - r) - P(r); >= 0, zero iff rho = r."""
    _check_rho(rho)
    if np.any(np.asarray(r) <= 0):
        raise DomainError("comparison density r must be positive")
    return (
        pressure_potential(rho, params)
        - pressure_potential_derivative(r, params) * (np.asarray(rho) - np.asarray(r))
        - pressure_potential(r, params)
    )


class GapCoercivity(NamedTuple):
    """Largest constants with gap >= ess*|rho-r|^2 on the essential set and
    gap >= res*(1 + |rho-r|^gamma) on the residual set; inf for an empty branch."""

    ess: float
    res: float


def gap_coercivity_constant(
    r_range: tuple[float, float],
    rho_range: tuple[float, float],
    params: ModelParams,
    samples: int = 200,
    diag_tol: float = 1e-9,
) -> GapCoercivity:
    """Estimate the per-branch coercivity constants of the Bregman gap.

    Dense tensor sampling of (rho, r) over the given compact ranges; the
    essential branch is |rho - r| <= r/2, the residual branch is the
    complement. Pairs with |rho - r| below ``diag_tol`` count as the
    degenerate diagonal (where the ratio is 0/0 up to round-off noise)
    and are excluded from the essential ratio.
    """
    r_lo, r_hi = r_range
    rho_lo, rho_hi = rho_range
    if not (r_hi >= r_lo > 0):
        raise ValueError("r_range must be a compact subset of (0, inf)")
    if not (rho_hi >= rho_lo >= 0):
        raise ValueError("rho_range must be a compact subset of [0, inf)")
    r = np.linspace(r_lo, r_hi, samples)
    rho = np.linspace(rho_lo, rho_hi, samples)
    R, P = np.meshgrid(r, rho, indexing="ij")
    diff = np.abs(P - R)
    ess = diff <= 0.5 * R
    ess_pts = ess & (diff > diag_tol)
    res_pts = ~ess
    if ess_pts.any():
        # cancellation-free gap on the near-diagonal branch:
        # gap = A/(g-1) * r^g * (expm1(g*log1p(x)) - g*x),  x = (rho - r)/r
        x = (P[ess_pts] - R[ess_pts]) / R[ess_pts]
        g = params.gamma
        with np.errstate(divide="ignore"):
            shape = np.expm1(g * np.log1p(x)) - g * x
        gap_ess = params.A / (g - 1.0) * np.power(R[ess_pts], g) * shape
        c_ess = float(np.min(gap_ess / diff[ess_pts] ** 2))
    else:
        c_ess = math.inf
    if res_pts.any():
        gap_res = bregman_gap(P[res_pts], R[res_pts], params)
        c_res = float(np.min(gap_res / (1.0 + diff[res_pts] ** params.gamma)))
    else:
        c_res = math.inf
    return GapCoercivity(ess=c_ess, res=c_res)
