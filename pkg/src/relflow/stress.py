"""Newtonian viscous stress, the exact dissipation identity and the
weighted Korn-type constant estimator."""

from __future__ import annotations

import numpy as np

from . import fields
from .eos import ModelParams
from .errors import GridMismatchError, HypothesisError
from .fields import Grid, ScalarField, TensorField, VectorField


def strain_rate(v: VectorField, backend: str = "spectral") -> TensorField:
    """Symmetric velocity gradient (J + J^T)/2."""
    J = fields.jacobian(v, backend)
    return TensorField(v.grid, 0.5 * (J.values + np.swapaxes(J.values, 0, 1)))


def viscous_stress(v: VectorField, params: ModelParams, backend: str = "spectral") -> TensorField:
    """mu*(J + J^T) + lambda*(div v)*I; trace equals (2*mu + d*lambda) div v."""
    g = v.grid
    J = fields.jacobian(v, backend)
    sym = J.values + np.swapaxes(J.values, 0, 1)
    div = np.einsum("ii...->...", J.values)
    eye = np.eye(g.dim).reshape((g.dim, g.dim) + (1,) * g.dim)
    return TensorField(g, params.mu * sym + params.lambda_ * div * eye)


def stress_divergence(v: VectorField, params: ModelParams, backend: str = "spectral") -> VectorField:
    """div S(grad v) = mu*Lap(v) + (mu + lambda)*grad(div v)."""
    lap = fields.laplacian(v, backend)
    grad_div = fields.gradient(fields.divergence(v, backend), backend)
    return VectorField(v.grid, params.mu * lap.values + (params.mu + params.lambda_) * grad_div.values)


def dissipation(
    u: VectorField,
    v: VectorField,
    params: ModelParams,
    backend: str = "spectral",
    route: str = "contraction",
) -> float:
    """Viscous dissipation integral of the velocity difference w = u - v.

    route="contraction" contracts S(grad w) with grad w and integrates;
    route="norm" evaluates the equivalent closed form
    mu*||grad w||_2^2 + (mu + lambda)*||div w||_2^2. The two agree to
    backend accuracy; nonnegative whenever mu > 0 and 2*mu + 3*lambda >= 0.
    """
    if u.grid != v.grid:
        raise GridMismatchError("dissipation requires fields on one grid")
    w = u - v
    if route == "contraction":
        S = viscous_stress(w, params, backend)
        J = fields.jacobian(w, backend)
        dens = np.einsum("ij...,ij...->...", S.values, J.values)
        return float(dens.sum() * w.grid.h**w.grid.dim)
    if route == "norm":
        grad2 = fields.lp_norm(fields.jacobian(w, backend), 2.0) ** 2
        div2 = fields.lp_norm(fields.divergence(w, backend), 2.0) ** 2
        return params.mu * grad2 + (params.mu + params.lambda_) * div2
    raise ValueError("route must be 'contraction' or 'norm'")


def korn_type_constant(
    grid: Grid,
    weight: ScalarField,
    params: ModelParams,
    seed: int = 0,
    ensemble: int = 200,
    max_mode: int = 4,
) -> float:
    """Estimate c with ||w||_H1 <= c*(||grad w||_2 + ||sqrt(weight) w||_2).

    The weight must be nonnegative with positive mass (the estimator also
    reports nothing about weights with unbounded L^gamma norm, which is
    checked to be finite). The estimate is the supremum of the quotient
    over constants, low single-mode fields and a seeded band-limited
    ensemble; near-extremizers are low-mode, so the ensemble dominates
    fresh random fields in practice. Being an ensemble max it is a lower
    bound on the true constant -- the safe direction for growth-rate use.
    """
    if np.any(weight.values < 0):
        raise HypothesisError("weight must be nonnegative")
    mass = fields.integral(weight)
    if mass <= 0:
        raise HypothesisError("weight must have positive mass")
    gamma_norm = fields.lp_norm(weight, params.gamma)
    if not np.isfinite(gamma_norm):
        raise HypothesisError("weight must have finite L^gamma norm")

    sqrt_w = np.sqrt(weight.values)

    def quotient(vec: VectorField) -> float:
        denom = fields.lp_norm(fields.jacobian(vec), 2.0) + fields.lp_norm(
            VectorField(grid, sqrt_w * vec.values), 2.0
        )
        if denom < 1e-300:
            return 0.0
        return fields.h1_norm(vec) / denom

    rng = np.random.default_rng(seed)
    best = 0.0
    for i in range(grid.dim):
        vals = np.zeros((grid.dim,) + grid.shape)
        vals[i] = 1.0
        best = max(best, quotient(VectorField(grid, vals)))
    coords = grid.nodes()
    for axis in range(grid.dim):
        for mode in (1, 2):
            for comp in range(grid.dim):
                vals = np.zeros((grid.dim,) + grid.shape)
                vals[comp] = np.sin(mode * coords[axis])
                best = max(best, quotient(VectorField(grid, vals)))
    for _ in range(ensemble):
        vec = fields.random_band_limited(grid, rng, max_mode=max_mode, kind="vector")
        best = max(best, quotient(vec))
    return best
