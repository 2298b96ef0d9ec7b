"""
Conservative finite-difference discretization of the steady-state system.

The equations are assembled in divergence form,

    [(d1 + alpha v) u' - alpha u v']' + f(u, v) = 0,
    [(d2 + beta u) v' - beta v u']' + g(u, v) = 0,

on a uniform vertex-centred grid. Edge fluxes use arithmetic-average midpoint
values; the two boundary half-edges carry zero flux, and boundary nodes own
half-width control volumes. Unknowns are interleaved (u0, v0, u1, v1, ...),
so the Jacobian is banded with three sub- and three super-diagonals.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
import scipy.sparse

from .errors import SizeMismatchError
from .model import ModelParams, reaction, reaction_jacobian
from .types import Grid, Norms, StateVector

logger = logging.getLogger(__name__)

SYSTEM_BANDWIDTH = 3

_OFFSET = {"u": 0, "v": 1}


@dataclass
class BandedMatrix:
    """
    Square banded matrix in LAPACK/scipy diagonal-ordered storage.

    ``data[ku + i - j, j] == A[i, j]`` for ``-ku <= i - j <= kl``, with ``kl``
    sub-diagonals and ``ku`` super-diagonals.
    """
    data: np.ndarray
    kl: int
    ku: int

    @property
    def size(self) -> int:
        return self.data.shape[1]

    @classmethod
    def zeros(cls, size: int, kl: int, ku: int) -> "BandedMatrix":
        return cls(np.zeros((kl + ku + 1, size)), kl, ku)

    @classmethod
    def from_triplets(cls, size: int, kl: int, ku: int, rows: np.ndarray, cols: np.ndarray, values: np.ndarray) -> "BandedMatrix":
        """Sum duplicate (row, col, value) entries into banded storage."""
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        offsets = rows - cols
        if np.any(offsets > kl) or np.any(-offsets > ku):
            raise SizeMismatchError("Entry outside the declared band")
        matrix = cls.zeros(size, kl, ku)
        np.add.at(matrix.data, (ku + offsets, cols), values)
        return matrix

    @classmethod
    def from_dense(cls, dense: np.ndarray, kl: int, ku: int) -> "BandedMatrix":
        size = dense.shape[0]
        matrix = cls.zeros(size, kl, ku)
        for offset in range(-ku, kl + 1):
            diagonal = np.diagonal(dense, -offset)
            if offset >= 0:
                matrix.data[ku + offset, : size - offset] = diagonal
            else:
                matrix.data[ku + offset, -offset:] = diagonal
        return matrix

    def to_dense(self) -> np.ndarray:
        size = self.size
        dense = np.zeros((size, size))
        for offset in range(-self.ku, self.kl + 1):
            row = self.data[self.ku + offset]
            if offset >= 0:
                dense += np.diag(row[: size - offset], -offset)
            else:
                dense += np.diag(row[-offset:], -offset)
        return dense

    def to_sparse(self) -> scipy.sparse.csc_matrix:
        diagonals, offsets = [], []
        size = self.size
        for offset in range(-self.ku, self.kl + 1):
            row = self.data[self.ku + offset]
            diagonals.append(row[: size - offset] if offset >= 0 else row[-offset:])
            offsets.append(-offset)
        return scipy.sparse.diags(diagonals, offsets, shape=(size, size), format="csc")

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        size = self.size
        y = np.zeros(size)
        for offset in range(-self.ku, self.kl + 1):
            row = self.data[self.ku + offset]
            if offset >= 0:
                y[offset:] += row[: size - offset] * x[: size - offset]
            else:
                y[: size + offset] += row[-offset:] * x[-offset:]
        return y

    def shifted(self, scale: float, diagonal: float) -> "BandedMatrix":
        """diagonal * I + scale * A."""
        data = scale * self.data
        data[self.ku] += diagonal
        return BandedMatrix(data, self.kl, self.ku)

    def norm_max(self) -> float:
        return float(np.abs(self.data).max())


def grid_for(params: ModelParams, n: int) -> Grid:
    """Uniform grid of n nodes on the model interval."""
    return Grid(n=n, length=params.domain_length, x_left=params.x_left)


def _check_sizes(state: StateVector, grid: Grid) -> None:
    if state.n != grid.n:
        raise SizeMismatchError(f"State has {state.n} nodes but the grid has {grid.n}")


def divergence(flux: np.ndarray, grid: Grid) -> np.ndarray:
    """Discrete divergence of edge fluxes with zero flux through the boundary half-edges."""
    padded = np.concatenate(([0.0], flux, [0.0]))
    return np.diff(padded) / grid.volumes


def apply_laplacian(w: np.ndarray, grid: Grid) -> np.ndarray:
    """Conservative three-point Neumann Laplacian of nodal values."""
    return divergence(np.diff(w) / grid.h, grid)


def neumann_laplacian(grid: Grid) -> BandedMatrix:
    """Tridiagonal matrix of ``apply_laplacian``."""
    edges = np.arange(grid.n - 1)
    weight = 1.0 / grid.h
    volumes = grid.volumes
    rows = np.concatenate([edges, edges, edges + 1, edges + 1])
    cols = np.concatenate([edges, edges + 1, edges, edges + 1])
    values = np.concatenate([-weight / volumes[edges], weight / volumes[edges],
                             weight / volumes[edges + 1], -weight / volumes[edges + 1]])
    return BandedMatrix.from_triplets(grid.n, 1, 1, rows, cols, values)


def edge_fluxes(state: StateVector, d2: float, params: ModelParams, grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    """Midpoint fluxes (d1 + alpha v) u' - alpha u v' and (d2 + beta u) v' - beta v u' on the n - 1 edges."""
    h = grid.h
    du = np.diff(state.u) / h
    dv = np.diff(state.v) / h
    u_mid = 0.5 * (state.u[:-1] + state.u[1:])
    v_mid = 0.5 * (state.v[:-1] + state.v[1:])
    flux_u = (params.d1 + params.alpha * v_mid) * du - params.alpha * u_mid * dv
    flux_v = (d2 + params.beta * u_mid) * dv - params.beta * v_mid * du
    return flux_u, flux_v


def assemble_residual(state: StateVector, d2: float, params: ModelParams, grid: Grid) -> np.ndarray:
    """
    Discrete residual F(d2, u, v) as a packed vector of 2n entries.

    Raises:
        SizeMismatchError: If the state does not live on ``grid``
    """
    _check_sizes(state, grid)
    flux_u, flux_v = edge_fluxes(state, d2, params, grid)
    f, g = reaction(state.u, state.v, params)
    residual = np.empty(2 * grid.n)
    residual[0::2] = divergence(flux_u, grid) + f
    residual[1::2] = divergence(flux_v, grid) + g
    return residual


def _edge_partials(state: StateVector, d2: float, params: ModelParams, grid: Grid,
                   frozen: bool) -> Dict[str, Dict[Tuple[str, int], np.ndarray]]:
    """Partials of each edge flux with respect to the unknowns at its left (0) and right (1) node."""
    h = grid.h
    alpha, beta = params.alpha, params.beta
    du = np.diff(state.u) / h
    dv = np.diff(state.v) / h
    u_mid = 0.5 * (state.u[:-1] + state.u[1:])
    v_mid = 0.5 * (state.v[:-1] + state.v[1:])
    uu = (params.d1 + alpha * v_mid) / h
    uv = -alpha * u_mid / h
    vv = (d2 + beta * u_mid) / h
    vu = -beta * v_mid / h
    partials = {
        "u": {("u", 0): -uu, ("u", 1): uu, ("v", 0): -uv, ("v", 1): uv},
        "v": {("u", 0): -vu, ("u", 1): vu, ("v", 0): -vv, ("v", 1): vv},
    }
    if not frozen:
        # midpoint coefficients depend on the unknowns too
        for end in (0, 1):
            partials["u"][("v", end)] = partials["u"][("v", end)] + 0.5 * alpha * du
            partials["u"][("u", end)] = partials["u"][("u", end)] - 0.5 * alpha * dv
            partials["v"][("u", end)] = partials["v"][("u", end)] + 0.5 * beta * dv
            partials["v"][("v", end)] = partials["v"][("v", end)] - 0.5 * beta * du
    return partials


def _flux_triplets(partials: Dict[str, Dict[Tuple[str, int], np.ndarray]], grid: Grid) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    edges = np.arange(grid.n - 1)
    volumes = grid.volumes
    rows, cols, values = [], [], []
    for flux_name, entries in partials.items():
        row_offset = _OFFSET[flux_name]
        for (var, end), partial in entries.items():
            col = 2 * (edges + end) + _OFFSET[var]
            rows.append(2 * edges + row_offset)
            cols.append(col)
            values.append(partial / volumes[edges])
            rows.append(2 * (edges + 1) + row_offset)
            cols.append(col)
            values.append(-partial / volumes[edges + 1])
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(values)


def flux_matrix(state: StateVector, d2: float, params: ModelParams, grid: Grid) -> BandedMatrix:
    """
    Flux operator with coefficients frozen at ``state``.

    Applied to ``state.pack()`` it reproduces the divergence part of the residual.
    """
    _check_sizes(state, grid)
    rows, cols, values = _flux_triplets(_edge_partials(state, d2, params, grid, frozen=True), grid)
    size = 2 * grid.n
    return BandedMatrix.from_triplets(size, SYSTEM_BANDWIDTH, SYSTEM_BANDWIDTH, rows, cols, values)


def assemble_jacobian(state: StateVector, d2: float, params: ModelParams, grid: Grid) -> BandedMatrix:
    """
    Exact Jacobian of ``assemble_residual`` with respect to the packed unknowns.

    Block-tridiagonal with 2x2 blocks, stored with three sub- and super-diagonals.
    With alpha = beta = 0 the fields couple only through the reaction blocks.
    """
    _check_sizes(state, grid)
    rows, cols, values = _flux_triplets(_edge_partials(state, d2, params, grid, frozen=False), grid)
    f_u, f_v, g_u, g_v = reaction_jacobian(state.u, state.v, params)
    nodes = np.arange(grid.n)
    rows = np.concatenate([rows, 2 * nodes, 2 * nodes, 2 * nodes + 1, 2 * nodes + 1])
    cols = np.concatenate([cols, 2 * nodes, 2 * nodes + 1, 2 * nodes, 2 * nodes + 1])
    values = np.concatenate([values, f_u, f_v, g_u, g_v])
    return BandedMatrix.from_triplets(2 * grid.n, SYSTEM_BANDWIDTH, SYSTEM_BANDWIDTH, rows, cols, values)


def d2_derivative(state: StateVector, grid: Grid) -> np.ndarray:
    """Derivative of the residual with respect to d2: Laplacian of v in the v-rows, zero in the u-rows."""
    _check_sizes(state, grid)
    derivative = np.zeros(2 * grid.n)
    derivative[1::2] = apply_laplacian(state.v, grid)
    return derivative


def integrate(values: np.ndarray, grid: Grid) -> float:
    """Trapezoid rule on the grid."""
    return float(np.dot(grid.volumes, values))


def norms(state: StateVector, grid: Grid) -> Norms:
    """Trapezoid L2 norms, sup norms and forward-difference H1 seminorms of u and v."""
    _check_sizes(state, grid)
    h = grid.h
    return Norms(
        l2_u=float(np.sqrt(integrate(state.u ** 2, grid))),
        l2_v=float(np.sqrt(integrate(state.v ** 2, grid))),
        sup_u=float(np.abs(state.u).max()),
        sup_v=float(np.abs(state.v).max()),
        h1_u=float(np.sqrt(h * np.sum((np.diff(state.u) / h) ** 2))),
        h1_v=float(np.sqrt(h * np.sum((np.diff(state.v) / h) ** 2))),
    )


def prolong(state: StateVector, coarse: Grid, fine: Grid) -> StateVector:
    """
    Piecewise-linear interpolation of a state from ``coarse`` onto ``fine``.

    Raises:
        SizeMismatchError: If the state is not on ``coarse`` or ``fine`` leaves the coarse interval
    """
    _check_sizes(state, coarse)
    slack = 1e-12 * max(1.0, coarse.length)
    if fine.x_left < coarse.x_left - slack or fine.x_right > coarse.x_right + slack:
        raise SizeMismatchError(
            f"Fine interval [{fine.x_left}, {fine.x_right}] is not covered by [{coarse.x_left}, {coarse.x_right}]"
        )
    x_coarse, x_fine = coarse.nodes, fine.nodes
    return StateVector(np.interp(x_fine, x_coarse, state.u), np.interp(x_fine, x_coarse, state.v))
