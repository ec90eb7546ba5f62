"""Rectangular cell-centered grids, trigonometric transforms, and difference operators.

The domain is an open box (0, L_1) x ... x (0, L_n) discretized by cell
centers x_j = (j + 1/2) h.  Scalar fields come in two boundary flavors:

* ``neumann``  -- zero normal derivative, even (reflecting) ghost cells,
  diagonalized by the type-II cosine transform;
* ``dirichlet`` -- zero boundary value, odd (antireflecting) ghost cells,
  diagonalized by the type-II sine transform.

Two compatible families of difference operators are provided.  The
face-offset pair ``gradient``/``divergence`` composes to the compact
ghost-cell Laplacian exactly and satisfies summation by parts for fluxes
that vanish on the boundary.  The centered pair ``centered_gradient``/
``divergence(..., "dirichlet")`` is a mutually adjoint conservative pair
(every centered divergence sums to exactly zero), which is what the
pressure projection needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft

__all__ = [
    "Grid",
    "Spectrum",
    "build_grid",
    "cosine_transform",
    "inverse_cosine_transform",
    "sine_transform",
    "inverse_sine_transform",
    "gradient",
    "centered_gradient",
    "divergence",
    "laplacian",
]

_PARITY = {"neumann": 1.0, "dirichlet": -1.0}


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalue tables of the grid Laplacians, indexed by wavenumber multi-index.

    ``neumann_eigenvalues`` and ``dirichlet_eigenvalues`` are the continuum
    eigenvalues sum_i (k_i pi / L_i)^2 (cosine modes count from k=0, sine
    modes from k=1); the ``*_symbol`` tables hold the compact
    finite-difference symbols 2(1 - cos(k pi h / L)) / h^2, which are the
    exact eigenvalues of the ghost-cell Laplacian matrices.
    ``projection_symbol`` is the symbol of centered-divergence o
    centered-gradient (the wide Laplacian) used by the pressure solve.
    """

    neumann_eigenvalues: np.ndarray
    dirichlet_eigenvalues: np.ndarray
    neumann_symbol: np.ndarray
    dirichlet_symbol: np.ndarray
    projection_symbol: np.ndarray


@dataclass(frozen=True)
class Grid:
    """Cell-centered box grid.

    Parameters
    ----------
    n_dim : int
        Spatial dimension, 2 or 3.
    cells : tuple of int
        Cells per axis; each must be a power of two >= 4.
    lengths : tuple of float
        Box edge lengths, all positive.
    """

    n_dim: int
    cells: tuple[int, ...]
    lengths: tuple[float, ...]
    spacings: tuple[float, ...] = field(init=False)
    cell_volume: float = field(init=False)

    def __post_init__(self) -> None:
        if self.n_dim not in (2, 3):
            raise ValueError(f"n_dim must be 2 or 3, got {self.n_dim}")
        if len(self.cells) != self.n_dim or len(self.lengths) != self.n_dim:
            raise ValueError("cells and lengths must have n_dim entries")
        for n in self.cells:
            if n < 4 or (n & (n - 1)) != 0:
                raise ValueError(f"cells must be powers of two >= 4, got {n}")
        for length in self.lengths:
            if not (length > 0.0):
                raise ValueError(f"lengths must be positive, got {length}")
        object.__setattr__(
            self, "spacings", tuple(L / n for L, n in zip(self.lengths, self.cells))
        )
        object.__setattr__(self, "cell_volume", float(np.prod(self.spacings)))

    def axis_centers(self, axis: int) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        h = self.spacings[axis]
        return (np.arange(self.cells[axis]) + 0.5) * h

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinate arrays, shaped like a scalar field."""
        axes = [self.axis_centers(a) for a in range(self.n_dim)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def spectrum(self) -> Spectrum:
        neu, diri, neu_sym, diri_sym, proj = [], [], [], [], []
        for a in range(self.n_dim):
            n, L, h = self.cells[a], self.lengths[a], self.spacings[a]
            k_neu = np.arange(n)
            k_dir = np.arange(n) + 1
            neu.append((k_neu * np.pi / L) ** 2)
            diri.append((k_dir * np.pi / L) ** 2)
            neu_sym.append((2.0 - 2.0 * np.cos(k_neu * np.pi / n)) / h**2)
            diri_sym.append((2.0 - 2.0 * np.cos(k_dir * np.pi / n)) / h**2)
            proj.append((np.sin(k_neu * np.pi / n) / h) ** 2)
        return Spectrum(
            neumann_eigenvalues=_outer_sum(neu),
            dirichlet_eigenvalues=_outer_sum(diri),
            neumann_symbol=_outer_sum(neu_sym),
            dirichlet_symbol=_outer_sum(diri_sym),
            projection_symbol=_outer_sum(proj),
        )


def build_grid(
    n_dim: int, cells: tuple[int, ...], lengths: tuple[float, ...]
) -> Grid:
    """Validate and construct a Grid."""
    return Grid(n_dim=n_dim, cells=tuple(cells), lengths=tuple(lengths))


def _outer_sum(per_axis: list[np.ndarray]) -> np.ndarray:
    total = per_axis[0]
    for arr in per_axis[1:]:
        total = total[..., None] + arr
    return total


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def _spatial_axes(grid: Grid, arr: np.ndarray) -> tuple[int, ...]:
    if arr.ndim < grid.n_dim or arr.shape[-grid.n_dim :] != grid.cells:
        raise ValueError(
            f"field trailing shape {arr.shape} does not match grid cells {grid.cells}"
        )
    return tuple(range(arr.ndim - grid.n_dim, arr.ndim))


def cosine_transform(grid: Grid, arr: np.ndarray) -> np.ndarray:
    """Coefficients of ``arr`` in the orthonormal cosine (Neumann) eigenbasis."""
    return scipy.fft.dctn(arr, type=2, norm="ortho", axes=_spatial_axes(grid, arr))


def inverse_cosine_transform(grid: Grid, coeff: np.ndarray) -> np.ndarray:
    return scipy.fft.idctn(coeff, type=2, norm="ortho", axes=_spatial_axes(grid, coeff))


def sine_transform(grid: Grid, arr: np.ndarray) -> np.ndarray:
    """Coefficients of ``arr`` in the orthonormal sine (Dirichlet) eigenbasis."""
    return scipy.fft.dstn(arr, type=2, norm="ortho", axes=_spatial_axes(grid, arr))


def inverse_sine_transform(grid: Grid, coeff: np.ndarray) -> np.ndarray:
    return scipy.fft.idstn(coeff, type=2, norm="ortho", axes=_spatial_axes(grid, coeff))


# ---------------------------------------------------------------------------
# difference operators
# ---------------------------------------------------------------------------

def _axis_index(grid: Grid, arr: np.ndarray, axis: int) -> int:
    return arr.ndim - grid.n_dim + axis


def _ghost(arr: np.ndarray, ax: int, side: int, parity: float) -> np.ndarray:
    # side=0: ghost before the first cell; side=-1: after the last.
    edge = np.take(arr, [0 if side == 0 else -1], axis=ax)
    return parity * edge


def forward_diff(grid: Grid, arr: np.ndarray, axis: int, bc_kind: str) -> np.ndarray:
    """(u[j+1]-u[j])/h with the bc ghost at the far end; entry j sits at face j+1."""
    parity = _PARITY[bc_kind]
    ax = _axis_index(grid, arr, axis)
    padded = np.concatenate([arr, _ghost(arr, ax, -1, parity)], axis=ax)
    return np.diff(padded, axis=ax) / grid.spacings[axis]


def centered_diff(grid: Grid, arr: np.ndarray, axis: int, parity: float) -> np.ndarray:
    """(u[j+1]-u[j-1])/2h with parity ghosts on both ends."""
    ax = _axis_index(grid, arr, axis)
    padded = np.concatenate(
        [_ghost(arr, ax, 0, parity), arr, _ghost(arr, ax, -1, parity)], axis=ax
    )
    lo = np.take(padded, range(0, arr.shape[ax]), axis=ax)
    hi = np.take(padded, range(2, arr.shape[ax] + 2), axis=ax)
    return (hi - lo) / (2.0 * grid.spacings[axis])


def gradient(grid: Grid, u: np.ndarray, bc_kind: str) -> np.ndarray:
    """Face-offset gradient of a scalar field; component i lives on i-faces."""
    return np.stack([forward_diff(grid, u, a, bc_kind) for a in range(grid.n_dim)])


def centered_gradient(grid: Grid, u: np.ndarray, bc_kind: str) -> np.ndarray:
    """Cell-centered gradient (the exact negative adjoint of the dirichlet divergence)."""
    parity = _PARITY[bc_kind]
    return np.stack([centered_diff(grid, u, a, parity) for a in range(grid.n_dim)])


def divergence(grid: Grid, F: np.ndarray, bc_kind: str) -> np.ndarray:
    """Discrete divergence of a vector field.

    ``neumann``: backward differences with zero boundary flux, so that
    divergence(gradient(u)) is exactly the compact Neumann Laplacian.
    ``dirichlet``: conservative centered differences with antireflection
    ghosts; the result sums to exactly zero for every input, which keeps the
    singular pressure Poisson problem solvable.
    """
    if F.shape[0] != grid.n_dim:
        raise ValueError(f"expected {grid.n_dim} components, got {F.shape[0]}")
    out = np.zeros(F.shape[1:])
    for a in range(grid.n_dim):
        comp = F[a]
        if bc_kind == "neumann":
            ax = _axis_index(grid, comp, a)
            zero = np.zeros_like(np.take(comp, [0], axis=ax))
            padded = np.concatenate([zero, comp], axis=ax)
            out += np.diff(padded, axis=ax) / grid.spacings[a]
        elif bc_kind == "dirichlet":
            out += centered_diff(grid, comp, a, _PARITY["dirichlet"])
        else:
            raise ValueError(f"unknown bc_kind {bc_kind!r}")
    return out


def laplacian(grid: Grid, u: np.ndarray, bc_kind: str) -> np.ndarray:
    """Compact ghost-cell Laplacian (u[j+1] - 2u[j] + u[j-1])/h^2 summed over axes."""
    parity = _PARITY[bc_kind]
    out = np.zeros_like(u)
    for a in range(grid.n_dim):
        ax = _axis_index(grid, u, a)
        padded = np.concatenate(
            [_ghost(u, ax, 0, parity), u, _ghost(u, ax, -1, parity)], axis=ax
        )
        out += np.diff(padded, n=2, axis=ax) / grid.spacings[a] ** 2
    return out
