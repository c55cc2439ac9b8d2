"""Observable quantities: spectra, projection errors, structure residuals."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .lowrank import density
from .operators import VelocityGrid

__all__ = [
    "SpectrumReport",
    "AssumptionReport",
    "singular_spectrum",
    "projection_errors",
    "rank1_deviation",
    "assumption_residuals",
    "h_matrix_determinant",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpectrumReport:
    """Nonincreasing singular values and their decay ratios sigma_k / sigma_1."""

    values: np.ndarray
    ratios: np.ndarray


def singular_spectrum(u: np.ndarray) -> SpectrumReport:
    """Full singular value spectrum of a dense field, sorted descending."""
    values = np.linalg.svd(np.asarray(u, dtype=float), compute_uv=False)
    lead = values[0] if values.size and values[0] > 0 else 1.0
    return SpectrumReport(values=values, ratios=values / lead)


def projection_errors(
    u_ref: np.ndarray, x_factor: np.ndarray, v_factor: np.ndarray, l: int
) -> tuple[float, float]:
    """Frobenius residuals of the rank-l spatial and velocity projections.

    err_x = ||u - X_l X_l^T u||_F and err_v = ||u - u V_l V_l^T||_F with
    X_l, V_l the leading l columns of the factors.
    """
    if not 1 <= l <= min(x_factor.shape[1], v_factor.shape[1]):
        raise ValueError(f"l={l} out of range for rank {x_factor.shape[1]}")
    u_ref = np.asarray(u_ref, dtype=float)
    xl = x_factor[:, :l]
    vl = v_factor[:, :l]
    err_x = np.linalg.norm(u_ref - xl @ (xl.T @ u_ref))
    err_v = np.linalg.norm(u_ref - (u_ref @ vl) @ vl.T)
    return float(err_x), float(err_v)


def rank1_deviation(u: np.ndarray, vgrid: VelocityGrid) -> float:
    """Relative Frobenius distance of u from its equilibrium rho e^T.

    Zero for a velocity-independent field; 1 for a zero-mean field. The
    zero field is defined to have deviation 0.
    """
    u = np.asarray(u, dtype=float)
    total = float(np.linalg.norm(u))
    if total == 0.0:
        return 0.0
    rho = density(u, vgrid)
    return float(np.linalg.norm(u - rho[:, None]) / total)


@dataclass(frozen=True)
class AssumptionReport:
    """Distances of the constant and linear velocity modes to span(V)."""

    residual_e: float
    residual_v: float
    epsilon: float
    tol_e: float
    tol_v: float

    @property
    def e_within_tol(self) -> bool:
        return self.residual_e <= self.tol_e

    @property
    def v_within_tol(self) -> bool:
        return self.residual_v <= self.tol_v


def assumption_residuals(
    v_factor: np.ndarray,
    vgrid: VelocityGrid,
    epsilon: float,
    tol_e: float | None = None,
    tol_v: float | None = None,
) -> AssumptionReport:
    """Measure how well span(V) contains the diffusive velocity structure.

    A solution near the diffusive regime keeps the normalized constant
    vector in span(V) up to second order in the stiffness parameter and
    the normalized velocity coordinate up to first order; the default
    pass thresholds scale accordingly (10 eps^2 and 10 eps).
    """
    n_v = v_factor.shape[0]
    e_n = np.full(n_v, 1.0 / np.sqrt(n_v))
    v_n = vgrid.points / np.linalg.norm(vgrid.points)
    residual_e = float(np.linalg.norm(e_n - v_factor @ (v_factor.T @ e_n)))
    residual_v = float(np.linalg.norm(v_n - v_factor @ (v_factor.T @ v_n)))
    return AssumptionReport(
        residual_e=residual_e,
        residual_v=residual_v,
        epsilon=float(epsilon),
        tol_e=10.0 * epsilon**2 if tol_e is None else tol_e,
        tol_v=10.0 * epsilon if tol_v is None else tol_v,
    )


def h_matrix_determinant(rho: np.ndarray, d_central: np.ndarray) -> float:
    """Nondegeneracy functional (D rho)^T (D rho) of the density gradient.

    In one spatial dimension the gradient Gram matrix is a scalar; a zero
    value flags a spatially flat density for which the velocity-basis
    propagation argument degenerates.
    """
    d = np.asarray(d_central, dtype=float)
    scale = np.abs(d).max() if d.size else 0.0
    if not np.allclose(d, -d.T, atol=1e-12 * max(scale, 1.0)):
        raise ValueError("h_matrix_determinant expects a skew-symmetric central difference")
    g = d @ np.asarray(rho, dtype=float)
    value = float(g @ g)
    if value == 0.0:
        logger.warning("h_matrix_determinant: flat density, nondegeneracy check is zero")
    return value
