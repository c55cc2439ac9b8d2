"""Projected coefficient blocks and the three implicit substep solves.

Each substep advances one factor of the splitting by solving a matrix
equation of the common form

    U/dt + (1/eps) sum_m A_m U B_m - (1/eps^2) G U H = RHS

on the vectorized unknown via a dense LU factorization of the Kronecker
system; the per-step cost is cubic in the unknown count, which is what
makes the factored representation pay off against a full-grid solve.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .lowrank import LowRankState, qr_columns
from .operators import CrossSection, FluxDecomposition

__all__ = [
    "SolverError",
    "ProjectedCoefficients",
    "SubstepSystem",
    "project_coefficients",
    "velocity_projections",
    "apply_system",
    "assemble_system_matrix",
    "solve_substep",
    "step_l",
    "step_s",
    "step_k",
    "dump_substep_system",
]

RESIDUAL_RTOL = 1e-10


class SolverError(RuntimeError):
    """A linear solve failed or produced a non-finite or inaccurate result."""


@dataclass(frozen=True)
class ProjectedCoefficients:
    """Coefficient blocks of the substep equations in the current bases.

    a_flux[m] = X^T D_m X, a_sigma = X^T diag(sigma) X,
    xi_flux[m] = V^T diag(p_m) V, gamma = V^T C V.
    """

    a_flux: tuple[np.ndarray, ...]
    a_sigma: np.ndarray
    xi_flux: tuple[np.ndarray, ...]
    gamma: np.ndarray


def velocity_projections(
    v_factor: np.ndarray, flux: FluxDecomposition, collision: np.ndarray
) -> tuple[tuple[np.ndarray, ...], np.ndarray]:
    """Project the velocity multipliers and the collision matrix onto span(V)."""
    xi = tuple(v_factor.T @ (p[:, None] * v_factor) for _, p in flux.terms)
    gamma = v_factor.T @ collision @ v_factor
    return xi, gamma


def project_coefficients(
    x_factor: np.ndarray,
    v_factor: np.ndarray,
    flux: FluxDecomposition,
    sigma: CrossSection,
    collision: np.ndarray,
) -> ProjectedCoefficients:
    """Congruence-project all operator blocks onto the current factor bases."""
    n_x = x_factor.shape[0]
    if sigma.values.shape[0] != n_x:
        raise ValueError("cross-section length does not match the spatial factor")
    a_flux = tuple(x_factor.T @ d @ x_factor for d, _ in flux.terms)
    a_sigma = x_factor.T @ (sigma.values[:, None] * x_factor)
    xi_flux, gamma = velocity_projections(v_factor, flux, collision)
    return ProjectedCoefficients(a_flux=a_flux, a_sigma=a_sigma, xi_flux=xi_flux, gamma=gamma)


@dataclass(frozen=True)
class SubstepSystem:
    """Descriptive record of one substep matrix equation.

    The unknown U of shape ``shape`` satisfies
    U/dt + (1/eps) sum_m left_flux[m] U right_flux[m]
         - (1/eps^2) left_collision U right_collision = RHS.
    """

    left_flux: tuple[np.ndarray, ...]
    right_flux: tuple[np.ndarray, ...]
    left_collision: np.ndarray
    right_collision: np.ndarray
    shape: tuple[int, int]

    def __post_init__(self):
        p, q = self.shape
        if len(self.left_flux) != len(self.right_flux):
            raise ValueError("left/right flux coefficient lists differ in length")
        for a, b in zip(self.left_flux, self.right_flux):
            if a.shape != (p, p) or b.shape != (q, q):
                raise ValueError(
                    f"flux coefficient shapes {a.shape}/{b.shape} inconsistent with {self.shape}"
                )
        if self.left_collision.shape != (p, p) or self.right_collision.shape != (q, q):
            raise ValueError(
                f"collision coefficient shapes inconsistent with unknown shape {self.shape}"
            )


def apply_system(sys: SubstepSystem, u: np.ndarray, epsilon: float) -> np.ndarray:
    """Apply the non-identity part (1/eps) sum A U B - (1/eps^2) G U H."""
    out = np.zeros_like(u)
    for a, b in zip(sys.left_flux, sys.right_flux):
        out += a @ u @ b
    out /= epsilon
    out -= (sys.left_collision @ u @ sys.right_collision) / epsilon**2
    return out


def assemble_system_matrix(sys: SubstepSystem, dt: float, epsilon: float) -> np.ndarray:
    """Dense matrix of the vectorized equation (column-major vec convention)."""
    p, q = sys.shape
    m = np.eye(p * q) / dt
    for a, b in zip(sys.left_flux, sys.right_flux):
        m += np.kron(b.T, a) / epsilon
    m -= np.kron(sys.right_collision.T, sys.left_collision) / epsilon**2
    return m


def _operator_scale(sys: SubstepSystem, dt: float, epsilon: float) -> float:
    scale = 1.0 / dt
    for a, b in zip(sys.left_flux, sys.right_flux):
        scale += np.abs(a).max() * np.abs(b).max() * max(sys.shape) / epsilon
    scale += (
        np.abs(sys.left_collision).max()
        * np.abs(sys.right_collision).max()
        * max(sys.shape)
        / epsilon**2
    )
    return scale


def solve_substep(sys: SubstepSystem, dt: float, epsilon: float, rhs: np.ndarray) -> np.ndarray:
    """LU-solve the vectorized substep equation for U.

    The caller assembles the right-hand side (U_old / dt for implicit
    Euler). The matrix-equation residual is verified against
    ``RESIDUAL_RTOL * ||rhs||_F``, relaxed only by the round-off floor of
    the operator scale so that very stiff solves do not trip the check
    spuriously.
    """
    if not dt > 0 or not epsilon > 0:
        raise ValueError(f"dt and epsilon must be positive, got dt={dt}, epsilon={epsilon}")
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != tuple(sys.shape):
        raise ValueError(f"rhs shape {rhs.shape} does not match system shape {sys.shape}")
    if not np.isfinite(rhs).all():
        raise SolverError("non-finite entries in the substep right-hand side")
    m = assemble_system_matrix(sys, dt, epsilon)
    if not np.isfinite(m).all():
        raise SolverError("non-finite entries in the assembled substep system")
    try:
        vec = np.linalg.solve(m, rhs.reshape(-1, order="F"))
    except np.linalg.LinAlgError as exc:
        raise SolverError(
            f"singular substep system (cond ~ {np.linalg.cond(m):.3e})"
        ) from exc
    u = vec.reshape(sys.shape, order="F")
    if not np.isfinite(u).all():
        raise SolverError("non-finite substep solution")
    residual = np.linalg.norm(u / dt + apply_system(sys, u, epsilon) - rhs)
    floor = 100.0 * np.finfo(float).eps * _operator_scale(sys, dt, epsilon) * np.linalg.norm(u)
    tol = max(RESIDUAL_RTOL * np.linalg.norm(rhs), floor)
    if residual > tol:
        raise SolverError(
            f"substep residual {residual:.3e} exceeds tolerance {tol:.3e} "
            f"(cond ~ {np.linalg.cond(m):.3e})"
        )
    return u


def _advance(
    sys: SubstepSystem, dt: float, epsilon: float, u_old: np.ndarray, variant: str
) -> np.ndarray:
    if variant == "euler":
        return solve_substep(sys, dt, epsilon, u_old / dt)
    if variant == "crank_nicolson":
        halved = replace(
            sys,
            left_flux=tuple(0.5 * a for a in sys.left_flux),
            left_collision=0.5 * sys.left_collision,
        )
        rhs = u_old / dt - 0.5 * apply_system(sys, u_old, epsilon)
        return solve_substep(halved, dt, epsilon, rhs)
    raise ValueError(f"unknown time variant {variant!r}")


def step_l(
    state: LowRankState,
    coeffs: ProjectedCoefficients,
    collision: np.ndarray,
    velocity_diags: tuple[np.ndarray, ...],
    dt: float,
    epsilon: float,
    variant: str = "euler",
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Advance L = S V^T and re-orthonormalize the velocity basis.

    Solves (L' - L)/dt + (1/eps) sum_m A_m L' diag(p_m)
                       = (1/eps^2) A_sigma L' C
    (the crank_nicolson variant applies the dynamics to the midpoint
    (L' + L)/2), then factors L'^T = v_new s_new^T by thin QR.

    Returns (s_new, v_new, l_raw).
    """
    l_old = state.core @ state.v_factor.T
    sys = SubstepSystem(
        left_flux=coeffs.a_flux,
        right_flux=tuple(np.diag(p) for p in velocity_diags),
        left_collision=coeffs.a_sigma,
        right_collision=collision,
        shape=l_old.shape,
    )
    l_raw = _advance(sys, dt, epsilon, l_old, variant)
    q, rfac = qr_columns(l_raw.T)
    return rfac.T, q, l_raw


def step_s(
    s_in: np.ndarray,
    coeffs: ProjectedCoefficients,
    dt: float,
    epsilon: float,
    variant: str = "euler",
) -> np.ndarray:
    """Advance the core backward in the projected dynamics.

    Relative to the L update both signs flip: transport enters with a
    minus and the projected collision term with a plus. ``coeffs`` must
    carry xi/gamma built from the velocity basis produced by the L step.
    """
    sys = SubstepSystem(
        left_flux=tuple(-a for a in coeffs.a_flux),
        right_flux=coeffs.xi_flux,
        left_collision=-coeffs.a_sigma,
        right_collision=coeffs.gamma,
        shape=s_in.shape,
    )
    return _advance(sys, dt, epsilon, s_in, variant)


def step_k(
    k_in: np.ndarray,
    flux: FluxDecomposition,
    sigma: CrossSection,
    xi_flux: tuple[np.ndarray, ...],
    gamma: np.ndarray,
    dt: float,
    epsilon: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Advance K = X S with the full spatial operators (implicit Euler only).

    Solves (K' - K)/dt + (1/eps) sum_m D_m K' Xi_m = (1/eps^2) diag(sigma) K' Gamma
    and returns the thin-QR pair (x_new, s_new) with K' = x_new s_new.
    """
    sys = SubstepSystem(
        left_flux=tuple(d for d, _ in flux.terms),
        right_flux=tuple(xi_flux),
        left_collision=np.diag(sigma.values),
        right_collision=gamma,
        shape=k_in.shape,
    )
    k_new = _advance(sys, dt, epsilon, k_in, "euler")
    q, rfac = qr_columns(k_new)
    return q, rfac


def dump_substep_system(sys: SubstepSystem, dt: float, epsilon: float, path) -> None:
    """Write the assembled Kronecker matrix to a .npz file for inspection."""
    np.savez(
        path,
        matrix=assemble_system_matrix(sys, dt, epsilon),
        shape=np.asarray(sys.shape),
        dt=dt,
        epsilon=epsilon,
    )
