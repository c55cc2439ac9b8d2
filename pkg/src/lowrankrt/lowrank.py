"""Rank-r factorization u = X S V^T and its basic manipulations."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .operators import SpatialGrid, VelocityGrid

__all__ = [
    "LowRankState",
    "init_from_matrix",
    "init_from_function",
    "to_dense",
    "density",
    "state_density",
    "qr_columns",
    "deficient_columns",
    "orthonormality_residual",
    "save_matrix_csv",
    "load_matrix_csv",
]

logger = logging.getLogger(__name__)

# Triangular pivots below this fraction of ||m||_F mark a rank-deficient
# column; the orthonormal complement supplied by the factorization is kept
# and the corresponding row of the triangular factor is zeroed.
QR_DEFICIENCY_RTOL = 1e-12


@dataclass(frozen=True)
class LowRankState:
    """Orthonormal spatial and velocity factors around an r x r core.

    Treated as an immutable value; every operation returns a new state.
    """

    x_factor: np.ndarray
    core: np.ndarray
    v_factor: np.ndarray

    def __post_init__(self):
        r = self.core.shape[0]
        if self.core.ndim != 2 or self.core.shape != (r, r):
            raise ValueError(f"core must be square, got shape {self.core.shape}")
        if self.x_factor.shape[1] != r or self.v_factor.shape[1] != r:
            raise ValueError("factor column counts must match the core rank")
        if not 1 <= r <= min(self.x_factor.shape[0], self.v_factor.shape[0]):
            raise ValueError(f"rank {r} out of range for shape {self.shape}")

    @property
    def rank(self) -> int:
        return self.core.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.x_factor.shape[0], self.v_factor.shape[0])


def init_from_matrix(values: np.ndarray, r: int) -> LowRankState:
    """Best rank-r factorization of a dense field by truncated SVD.

    The reconstruction error equals the Frobenius norm of the discarded
    singular values (optimal truncation).
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError(f"expected a 2-d field, got shape {values.shape}")
    if not np.isfinite(values).all():
        raise ValueError("non-finite samples in the initial field")
    if not 1 <= r <= min(values.shape):
        raise ValueError(f"rank {r} out of range for shape {values.shape}")
    u, s, vt = np.linalg.svd(values, full_matrices=False)
    return LowRankState(
        x_factor=np.ascontiguousarray(u[:, :r]),
        core=np.diag(s[:r]),
        v_factor=np.ascontiguousarray(vt[:r].T),
    )


def init_from_function(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    grid: SpatialGrid,
    vgrid: VelocityGrid,
    r: int,
) -> LowRankState:
    """Sample f(x, v) on the tensor grid and factorize it.

    ``f`` must accept broadcastable arrays: it is called with x of shape
    (n_x, 1) and v of shape (1, n_v).
    """
    raw = np.asarray(f(grid.points[:, None], vgrid.points[None, :]), dtype=float)
    try:
        samples = np.ascontiguousarray(np.broadcast_to(raw, (grid.n_x, vgrid.n_v)))
    except ValueError as exc:
        raise ValueError(
            f"initial condition returned shape {raw.shape}, "
            f"expected broadcastable to ({grid.n_x}, {vgrid.n_v})"
        ) from exc
    return init_from_matrix(samples, r)


def to_dense(state: LowRankState) -> np.ndarray:
    """Reassemble the dense field X S V^T."""
    return state.x_factor @ state.core @ state.v_factor.T


def density(u: np.ndarray, vgrid: VelocityGrid) -> np.ndarray:
    """Velocity average rho_i = (1/n_v) sum_j u_ij (rectangle rule)."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[1] != vgrid.n_v:
        raise ValueError(f"field shape {u.shape} does not match n_v={vgrid.n_v}")
    return u.sum(axis=1) * vgrid.weight


def state_density(state: LowRankState, vgrid: VelocityGrid) -> np.ndarray:
    """Density of a factored state without densifying it."""
    v_mean = state.v_factor.sum(axis=0) * vgrid.weight
    return state.x_factor @ (state.core @ v_mean)


def qr_columns(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR with a nonnegative-diagonal sign convention.

    Returns (q, rfac) with m = q rfac and q^T q = I. Columns whose
    triangular pivot falls below ``QR_DEFICIENCY_RTOL * ||m||_F`` are
    rank deficient: the orthonormal complement column produced by the
    factorization is kept, the matching row of rfac is zeroed, and the
    event is logged so runs can flag it. Shapes never shrink.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {m.shape}")
    p, r = m.shape
    if p < r:
        raise ValueError(f"qr_columns needs p >= r, got shape {m.shape}")
    q, rfac = np.linalg.qr(m)
    signs = np.where(np.diagonal(rfac) < 0.0, -1.0, 1.0)
    q = q * signs[None, :]
    rfac = rfac * signs[:, None]
    floor = QR_DEFICIENCY_RTOL * np.linalg.norm(m)
    deficient = np.abs(np.diagonal(rfac)) <= floor
    if deficient.any():
        rfac[deficient, :] = 0.0
        logger.warning(
            "qr_columns: %d rank-deficient column(s) completed with arbitrary "
            "orthonormal directions",
            int(deficient.sum()),
        )
    return q, rfac


def deficient_columns(rfac: np.ndarray) -> int:
    """Count the zeroed pivots left behind by rank-deficiency handling."""
    return int(np.count_nonzero(np.diagonal(rfac) == 0.0))


def orthonormality_residual(factor: np.ndarray) -> float:
    """Frobenius norm of factor^T factor - I."""
    r = factor.shape[1]
    return float(np.linalg.norm(factor.T @ factor - np.eye(r)))


def save_matrix_csv(path, m: np.ndarray) -> None:
    """Write a matrix as row-major CSV with a ``# rows cols`` header."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    lines = [f"# {m.shape[0]} {m.shape[1]}"]
    for row in m:
        lines.append(",".join(f"{x:.17g}" for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_matrix_csv(path) -> np.ndarray:
    """Read a matrix written by :func:`save_matrix_csv`."""
    lines = Path(path).read_text().strip().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing shape header")
    rows, cols = (int(tok) for tok in lines[0][1:].split())
    data = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
    if data.shape != (rows, cols):
        raise ValueError(f"{path}: header says {(rows, cols)}, data is {data.shape}")
    return data
