"""Periodic grids and the discrete operators of the slab transport problem.

Builds the uniform cell-centered spatial grid, the symmetric midpoint
velocity grid on [-1, 1], named scattering cross-section profiles, the
rectangle-rule collision matrix, and the flux decompositions that express
the transport term v * du/dx as a sum of matrix products D_m u diag(p_m).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SpatialGrid",
    "VelocityGrid",
    "CrossSection",
    "FluxDecomposition",
    "Discretization",
    "CROSS_SECTION_TAGS",
    "FLUX_SCHEMES",
    "build_spatial_grid",
    "build_velocity_grid",
    "cross_section",
    "build_collision_matrix",
    "central_difference",
    "backward_difference",
    "forward_difference",
    "build_flux",
    "apply_transport",
    "build_discretization",
]

CROSS_SECTION_TAGS = ("constant2", "quartic", "contrast")
FLUX_SCHEMES = ("central", "upwind", "ccp")


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform cell-centered grid with periodic topology.

    Attributes
    ----------
    n_x : int
        Number of cells.
    x_min, x_max : float
        Domain endpoints.
    dx : float
        Cell width (x_max - x_min) / n_x.
    points : ndarray of shape (n_x,)
        Cell centers x_i = x_min + (i + 1/2) dx.
    """

    n_x: int
    x_min: float
    x_max: float
    dx: float
    points: np.ndarray


def build_spatial_grid(n_x: int, x_min: float = 0.0, x_max: float = 2.0) -> SpatialGrid:
    """Build a uniform cell-centered periodic grid on [x_min, x_max]."""
    if n_x < 2:
        raise ValueError(f"invalid count: n_x must be >= 2, got {n_x}")
    if not x_max > x_min:
        raise ValueError(f"degenerate domain: need x_max > x_min, got [{x_min}, {x_max}]")
    dx = (x_max - x_min) / n_x
    points = x_min + (np.arange(n_x) + 0.5) * dx
    return SpatialGrid(n_x=int(n_x), x_min=float(x_min), x_max=float(x_max), dx=dx, points=points)


@dataclass(frozen=True)
class VelocityGrid:
    """Symmetric midpoint grid on [-1, 1] with uniform quadrature weight.

    Attributes
    ----------
    n_v : int
        Number of nodes (even, so the grid mirrors exactly about 0).
    points : ndarray of shape (n_v,)
        Nodes v_j = -1 + (2j - 1) / n_v, stored so that
        points[::-1] == -points bitwise.
    weight : float
        Rectangle-rule weight 1 / n_v for the normalized measure.
    """

    n_v: int
    points: np.ndarray
    weight: float


def build_velocity_grid(n_v: int) -> VelocityGrid:
    """Build the midpoint velocity grid on [-1, 1].

    n_v must be even; mirroring the positive half makes every odd moment
    cancel pairwise, which the structure-preservation arguments rely on.
    """
    if n_v < 2 or n_v % 2 != 0:
        raise ValueError(f"odd-count: n_v must be even and >= 2, got {n_v}")
    half = (2.0 * np.arange(n_v // 2) + 1.0) / n_v
    points = np.concatenate([-half[::-1], half])
    return VelocityGrid(n_v=int(n_v), points=points, weight=1.0 / n_v)


@dataclass(frozen=True)
class CrossSection:
    """Scattering cross-section sampled at the cell centers."""

    values: np.ndarray
    tag: str


def cross_section(tag: str, grid: SpatialGrid) -> CrossSection:
    """Evaluate a named cross-section profile on the grid.

    Known tags:

    - ``constant2``: sigma(x) = 2
    - ``quartic``: sigma(x) = 100 (x - 1)^4
    - ``contrast``: 0.02 on [0.35, 0.65] and [1.35, 1.65], 1 elsewhere
    """
    x = grid.points
    if tag == "constant2":
        values = np.full(grid.n_x, 2.0)
    elif tag == "quartic":
        values = 100.0 * (x - 1.0) ** 4
    elif tag == "contrast":
        thin = ((x >= 0.35) & (x <= 0.65)) | ((x >= 1.35) & (x <= 1.65))
        values = np.where(thin, 0.02, 1.0)
    else:
        raise ValueError(f"unknown cross-section tag {tag!r}; known: {CROSS_SECTION_TAGS}")
    if not (values > 0).all():
        raise ValueError(f"cross-section {tag!r} is not strictly positive on this grid")
    return CrossSection(values=values, tag=tag)


def build_collision_matrix(n_v: int) -> np.ndarray:
    """Rectangle-rule collision matrix c = (1/n_v) e e^T - I.

    Symmetric, annihilates constants, and has spectrum {0} (simple)
    union {-1} (multiplicity n_v - 1).
    """
    if n_v < 2:
        raise ValueError(f"invalid count: n_v must be >= 2, got {n_v}")
    return np.full((n_v, n_v), 1.0 / n_v) - np.eye(n_v)


@dataclass(frozen=True)
class FluxDecomposition:
    """Transport term v * d/dx written as sum_m D_m u diag(p_m).

    ``terms`` pairs a periodic difference matrix in x with the diagonal
    of a velocity multiplier. The sign split puts the backward stencil
    on positive velocities and the forward stencil on negative ones.
    """

    terms: tuple[tuple[np.ndarray, np.ndarray], ...]
    scheme: str


def _shift(n: int, k: int) -> np.ndarray:
    m = np.zeros((n, n))
    m[np.arange(n), (np.arange(n) + k) % n] = 1.0
    return m


def central_difference(grid: SpatialGrid) -> np.ndarray:
    """Periodic central difference (u_{i+1} - u_{i-1}) / (2 dx); skew-symmetric."""
    return (_shift(grid.n_x, 1) - _shift(grid.n_x, -1)) / (2.0 * grid.dx)


def backward_difference(grid: SpatialGrid) -> np.ndarray:
    """Periodic backward difference (u_i - u_{i-1}) / dx."""
    return (np.eye(grid.n_x) - _shift(grid.n_x, -1)) / grid.dx


def forward_difference(grid: SpatialGrid) -> np.ndarray:
    """Periodic forward difference (u_{i+1} - u_i) / dx."""
    return (_shift(grid.n_x, 1) - np.eye(grid.n_x)) / grid.dx


def build_flux(
    scheme: str, grid: SpatialGrid, vgrid: VelocityGrid, epsilon: float = 1.0
) -> FluxDecomposition:
    """Build the flux decomposition for one of the named schemes.

    - ``central``: single skew-symmetric term (D_c, v).
    - ``upwind``: backward stencil on max(v, 0), forward stencil on min(v, 0).
    - ``ccp``: upwind pair weighted by min(epsilon, 1) plus the central
      term weighted by the complement, so the scheme is pure upwind in
      the kinetic regime and central in the diffusive one. The blend
      weight saturates at 1 for epsilon > 1.
    """
    v = vgrid.points
    v_pos = np.maximum(v, 0.0)
    v_neg = np.minimum(v, 0.0)
    if scheme == "central":
        terms = [(central_difference(grid), v.copy())]
    elif scheme == "upwind":
        terms = [
            (backward_difference(grid), v_pos),
            (forward_difference(grid), v_neg),
        ]
    elif scheme == "ccp":
        if not epsilon > 0:
            raise ValueError(f"ccp blend needs epsilon > 0, got {epsilon}")
        w = min(float(epsilon), 1.0)
        terms = [
            (w * backward_difference(grid), v_pos),
            (w * forward_difference(grid), v_neg),
        ]
        if w < 1.0:
            terms.append(((1.0 - w) * central_difference(grid), v.copy()))
    else:
        raise ValueError(f"unknown flux scheme {scheme!r}; known: {FLUX_SCHEMES}")
    return FluxDecomposition(terms=tuple(terms), scheme=scheme)


def apply_transport(flux: FluxDecomposition, u: np.ndarray) -> np.ndarray:
    """Evaluate sum_m D_m u diag(p_m) on a dense field."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 2:
        raise ValueError(f"expected a 2-d field, got shape {u.shape}")
    out = np.zeros_like(u)
    for d, p in flux.terms:
        if d.shape[1] != u.shape[0] or p.shape[0] != u.shape[1]:
            raise ValueError(
                f"shape mismatch: field {u.shape} vs flux term "
                f"({d.shape[0]}x{d.shape[1]}, {p.shape[0]})"
            )
        out += (d @ u) * p[None, :]
    return out


@dataclass(frozen=True)
class Discretization:
    """Everything the solvers need to know about one fixed grid."""

    grid: SpatialGrid
    vgrid: VelocityGrid
    sigma: CrossSection
    flux: FluxDecomposition
    collision: np.ndarray


def build_discretization(
    n_x: int,
    n_v: int,
    sigma_tag: str,
    scheme: str,
    epsilon: float,
    x_min: float = 0.0,
    x_max: float = 2.0,
) -> Discretization:
    """Construct the grids and all operator blocks in one call."""
    grid = build_spatial_grid(n_x, x_min, x_max)
    vgrid = build_velocity_grid(n_v)
    sigma = cross_section(sigma_tag, grid)
    flux = build_flux(scheme, grid, vgrid, epsilon)
    return Discretization(
        grid=grid,
        vgrid=vgrid,
        sigma=sigma,
        flux=flux,
        collision=build_collision_matrix(n_v),
    )
