"""Grid graph Laplacians and Dirichlet energies.

Grids are open (non-periodic).  The 4NN topology connects pixels at L1
distance 1 with unit weights; 8NN adds diagonal edges with weight 1/sqrt(2).
The normalized variants are built on the 4NN adjacency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Invalid graph construction or unsupported topology for an operation."""


TOPOLOGIES = ("Grid4NN", "Grid8NN", "RandomWalk", "SymNormalized", "Identity")


@dataclass(frozen=True)
class GraphLaplacian:
    """Sparse Laplacian with its topology tag and a cheap spectral bound.

    ``spectral_upper_bound`` is guaranteed to dominate the largest eigenvalue
    of the (symmetrized) matrix; it backs the spectral flip in the eigensolver.
    """

    topology: str
    nodes: int
    matrix: sp.csr_matrix
    is_symmetric: bool
    spectral_upper_bound: float
    height: int
    width: int
    channels: int = 1

    def apply(self, x) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float)

    def apply_symmetrized(self, x) -> np.ndarray:
        """L x for symmetric topologies, (L + L^T) x / 2 otherwise."""
        x = np.asarray(x, dtype=float)
        if self.is_symmetric:
            return self.matrix @ x
        return 0.5 * (self.matrix @ x + self.matrix.T @ x)


def _grid_edges(height, width, diagonal):
    idx = np.arange(height * width).reshape(height, width)
    rows, cols, vals = [], [], []

    def add(a, b, w):
        rows.append(a.ravel())
        cols.append(b.ravel())
        vals.append(np.full(a.size, w))

    add(idx[:, :-1], idx[:, 1:], 1.0)
    add(idx[:-1, :], idx[1:, :], 1.0)
    if diagonal:
        wd = 1.0 / math.sqrt(2.0)
        add(idx[:-1, :-1], idx[1:, 1:], wd)
        add(idx[:-1, 1:], idx[1:, :-1], wd)
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)
    n = height * width
    adj = sp.coo_matrix((np.r_[v, v], (np.r_[r, c], np.r_[c, r])), shape=(n, n))
    return adj.tocsr()


def build_laplacian(topology, height, width) -> GraphLaplacian:
    """Build a grid Laplacian of the requested topology on an open grid."""
    if height < 1 or width < 1:
        raise GraphError("grid dimensions must be positive")
    n = height * width
    if topology == "Identity":
        lap = sp.identity(n, format="csr")
        return GraphLaplacian("Identity", n, lap, True, 2.0, height, width)

    if topology in ("Grid4NN", "Grid8NN"):
        adj = _grid_edges(height, width, diagonal=(topology == "Grid8NN"))
        deg = np.asarray(adj.sum(axis=1)).ravel()
        lap = (sp.diags(deg) - adj).tocsr()
        return GraphLaplacian(topology, n, lap, True, 2.0 * deg.max(), height, width)

    if topology in ("RandomWalk", "SymNormalized"):
        adj = _grid_edges(height, width, diagonal=False)
        deg = np.asarray(adj.sum(axis=1)).ravel()
        if np.any(deg == 0):
            raise GraphError(f"{topology} undefined on a grid with isolated nodes")
        if topology == "SymNormalized":
            dinv = sp.diags(1.0 / np.sqrt(deg))
            lap = (sp.identity(n) - dinv @ adj @ dinv).tocsr()
            return GraphLaplacian(topology, n, lap, True, 2.0, height, width)
        dinv = sp.diags(1.0 / deg)
        lap = (sp.identity(n) - dinv @ adj).tocsr()
        sym = 0.5 * (lap + lap.T)
        bound = float(np.max(np.abs(sym).sum(axis=1)))
        return GraphLaplacian("RandomWalk", n, lap, False, bound, height, width)

    raise GraphError(f"unknown topology {topology!r}")


def dirichlet_energy(lap: GraphLaplacian, x) -> float:
    """x^T L x = (1/2) sum_ij W_ij (x_i - x_j)^2 for symmetric topologies."""
    if not lap.is_symmetric:
        raise GraphError("Dirichlet energy is defined for symmetric Laplacians only")
    x = np.asarray(x, dtype=float).ravel()
    if x.size != lap.nodes:
        raise GraphError(f"expected vector of length {lap.nodes}, got {x.size}")
    return float(x @ (lap.matrix @ x))


def channel_lift(lap: GraphLaplacian, channels) -> GraphLaplacian:
    """Block-diagonal replication of L across channels (Kronecker with I_C)."""
    c = int(channels)
    if c < 1:
        raise GraphError("channel count must be >= 1")
    if c == 1:
        return lap
    lifted = sp.kron(sp.identity(c), lap.matrix, format="csr")
    return GraphLaplacian(
        lap.topology,
        c * lap.nodes,
        lifted,
        lap.is_symmetric,
        lap.spectral_upper_bound,
        lap.height,
        lap.width,
        channels=c * lap.channels,
    )


def spectral_bound(lap: GraphLaplacian) -> float:
    """Gershgorin-type bound 2 * max_i d_i >= lambda_max(L)."""
    if not lap.is_symmetric:
        raise GraphError("spectral bound is defined for symmetric Laplacians only")
    return 2.0 * float(lap.matrix.diagonal().max())


def export_triplets(lap: GraphLaplacian, path):
    """Write the Laplacian as CSV triplets (i, j, value) for debugging."""
    coo = lap.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("i,j,value\n")
        for k in order:
            fh.write(f"{coo.row[k]},{coo.col[k]},{coo.data[k]:.17g}\n")
