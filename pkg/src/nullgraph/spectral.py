"""Smoothest null-space modes of the null-restricted graph operator.

The central object is the operator x -> P_n L P_n x, applied matrix-free
(neither the projector nor the restricted operator is ever materialized on
the iterative path).  Its smallest eigenpairs restricted to Null(H) are the
smoothest invisible patterns; stacked as rows they form the projection matrix
whose coefficients a = S x read the null-space content of an image.

Eigensolver strategy: Lanczos with full reorthogonalization on the flipped
operator B = c I - P_n L P_n with c = (spectral bound of L) + 1.  On the
invariant subspace Null(H) the largest eigenvalues of B correspond to the
smallest eigenvalues of the restricted operator, and no linear solves are
needed.  The starting vector and every Lanczos vector are re-projected onto
Null(H) to control drift; converged Ritz vectors are locked and deflated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphs import GraphLaplacian
from .operators import LinearMap


class SpectralError(ValueError):
    """Invalid request (k out of range, dense cap exceeded)."""


class ConvergenceError(RuntimeError):
    """Eigensolver failed to reach the residual tolerance within its cap."""

    def __init__(self, msg, achieved_residuals=None):
        super().__init__(msg)
        self.achieved_residuals = achieved_residuals


DENSE_EVD_CAP = 4096


def apply_null_restricted(op: LinearMap, lap: GraphLaplacian, x) -> np.ndarray:
    """P_n L P_n x, computed matrix-free; asymmetric L is symmetrized."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != op.n:
        raise SpectralError(f"expected vector of length {op.n}, got {x.size}")
    xn = op.project_null(x)
    return op.project_null(lap.apply_symmetrized(xn))


@dataclass(frozen=True)
class NullSpectralBasis:
    """Orthonormal null modes (rows) with nondecreasing eigenvalues.

    ``null_dim`` is the dimension of Null(H) (effective for blur); ``source``
    records where the basis came from for caching and diagnostics.
    """

    vectors: np.ndarray      # (k, n), rows orthonormal, each in Null(H)
    eigenvalues: np.ndarray  # (k,), nondecreasing
    null_dim: int
    source: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.vectors.shape[0]

    @property
    def n(self) -> int:
        return self.vectors.shape[1]

    def truncate(self, p: int) -> "NullSpectralBasis":
        """Keep the p smoothest modes (the first p rows)."""
        if not 0 <= p <= self.k:
            raise SpectralError(f"p must be in [0, {self.k}], got {p}")
        return NullSpectralBasis(
            _fix_signs(self.vectors[:p].copy()),
            self.eigenvalues[:p].copy(),
            self.null_dim,
            dict(self.source, p=p),
        )

    def project(self, x) -> np.ndarray:
        """Coefficients a_j = <v_j, x>."""
        return self.vectors @ np.asarray(x, dtype=float).ravel()

    def lift(self, a) -> np.ndarray:
        """Sum_j a_j v_j, an element of Null(H)."""
        return self.vectors.T @ np.asarray(a, dtype=float).ravel()


def _fix_signs(vectors):
    # Deterministic sign: first entry with magnitude > 1e-12 is made positive.
    for row in vectors:
        nz = np.nonzero(np.abs(row) > 1e-12)[0]
        if nz.size and row[nz[0]] < 0:
            row *= -1.0
    return vectors


def build_s(basis: NullSpectralBasis, p: int) -> NullSpectralBasis:
    """Truncated basis whose rows form the p-mode projection matrix."""
    return basis.truncate(p)


def eig_dense_null(op: LinearMap, lap: GraphLaplacian, k=None) -> NullSpectralBasis:
    """Dense-EVD oracle: form the restricted operator, drop range-kernel modes.

    The restricted operator vanishes on Range(H^T), so the dense spectrum
    contains spurious zero eigenpairs there; eigenvectors with
    ||P_n v - v|| > 1e-8 are discarded before sorting by eigenvalue.
    """
    if op.n > DENSE_EVD_CAP:
        raise SpectralError(f"dense path capped at n <= {DENSE_EVD_CAP}, got {op.n}")
    q = op.null_dim
    if k is None:
        k = q
    if not 0 <= k <= q:
        raise SpectralError(f"k must be in [0, {q}], got {k}")
    un = op.null_basis()
    ldense = lap.matrix.toarray()
    if not lap.is_symmetric:
        ldense = 0.5 * (ldense + ldense.T)
    pn = un @ un.T
    tmat = pn @ ldense @ pn
    tmat = 0.5 * (tmat + tmat.T)
    mu, vecs = np.linalg.eigh(tmat)
    keep = []
    for j in range(op.n):
        v = vecs[:, j]
        if np.linalg.norm(op.project_null(v) - v) <= 1e-8:
            keep.append(j)
    keep = np.array(keep, dtype=int)
    order = keep[np.argsort(mu[keep], kind="stable")][:k]
    vectors = _fix_signs(vecs[:, order].T.copy())
    return NullSpectralBasis(
        vectors,
        np.maximum(mu[order], 0.0),
        q,
        {
            "method": "dense",
            "operator": op.params_key(),
            "topology": lap.topology,
            "discarded": op.n - keep.size,
        },
    )


def eig_smallest_null(
    op: LinearMap,
    lap: GraphLaplacian,
    k: int,
    tol: float = 1e-10,
    max_restarts: int | None = None,
    seed: int = 0,
) -> NullSpectralBasis:
    """k smallest eigenpairs of the null-restricted operator via projected Lanczos."""
    q = op.null_dim
    if not 1 <= k <= q:
        raise SpectralError(f"k must be in [1, {q}], got {k}")
    if max_restarts is None:
        max_restarts = 50 * k
    n = op.n
    c = lap.spectral_upper_bound + 1.0

    def bmat(v):
        vn = op.project_null(v)
        return c * vn - op.project_null(lap.apply_symmetrized(vn))

    rng = np.random.default_rng(seed)
    locked = np.zeros((0, n))
    locked_mu = []

    def fresh_start():
        for _ in range(20):
            v = op.project_null(rng.standard_normal(n))
            if locked.shape[0]:
                v -= locked.T @ (locked @ v)
            nv = np.linalg.norm(v)
            if nv > 1e-10:
                return v / nv
        raise ConvergenceError("could not seed a start vector inside Null(H)")

    start = fresh_start()
    worst_residual = np.inf
    for _restart in range(max_restarts + 1):
        if len(locked_mu) >= k:
            break
        want = k - len(locked_mu)
        steps = min(q - len(locked_mu), max(2 * want + 20, 30))
        basis_v = np.zeros((steps, n))
        alphas = np.zeros(steps)
        betas = np.zeros(steps)
        v = start - locked.T @ (locked @ start) if locked.shape[0] else start.copy()
        v = op.project_null(v)
        nv = np.linalg.norm(v)
        v = fresh_start() if nv < 1e-10 else v / nv
        used = 0
        for j in range(steps):
            basis_v[j] = v
            w = bmat(v)
            alphas[j] = v @ w
            w -= alphas[j] * v
            if j > 0:
                w -= betas[j - 1] * basis_v[j - 1]
            # Full reorthogonalization (twice) against the Krylov basis and
            # the locked invariant subspace.
            for _ in range(2):
                w -= basis_v[: j + 1].T @ (basis_v[: j + 1] @ w)
                if locked.shape[0]:
                    w -= locked.T @ (locked @ w)
            used = j + 1
            beta = np.linalg.norm(w)
            betas[j] = beta
            if beta < 1e-13:
                break  # Krylov space exhausted the remaining invariant subspace
            v = w / beta
        trid = np.diag(alphas[:used])
        if used > 1:
            off = betas[: used - 1]
            trid += np.diag(off, 1) + np.diag(off, -1)
        theta, ritz = np.linalg.eigh(trid)
        order = np.argsort(theta)[::-1]  # largest of B first = smallest mode
        start = None
        for idx in order:
            u = basis_v[:used].T @ ritz[:, idx]
            u = op.project_null(u)
            nu = np.linalg.norm(u)
            if nu < 1e-10:
                continue
            u /= nu
            resid = np.linalg.norm(bmat(u) - theta[idx] * u)
            if resid <= tol and len(locked_mu) < k:
                if locked.shape[0]:
                    u -= locked.T @ (locked @ u)
                    u /= np.linalg.norm(u)
                locked = np.vstack([locked, u])
                locked_mu.append(c - theta[idx])
            else:
                worst_residual = resid
                start = u
                break
        if start is None:
            start = fresh_start()
    if len(locked_mu) < k:
        raise ConvergenceError(
            f"converged {len(locked_mu)}/{k} modes within {max_restarts} restarts "
            f"(best unconverged residual {worst_residual:.3e}, tol {tol:.1e})",
            achieved_residuals=worst_residual,
        )
    mu = np.maximum(np.array(locked_mu), 0.0)
    order = np.argsort(mu, kind="stable")
    vectors = _fix_signs(locked[order])
    return NullSpectralBasis(
        vectors,
        mu[order],
        q,
        {
            "method": "lanczos",
            "operator": op.params_key(),
            "topology": lap.topology,
            "tol": tol,
            "flip_constant": c,
        },
    )


def null_mode_basis(op, lap, k=None, tol=1e-10, method="auto", seed=0):
    """Convenience dispatcher; defaults to all null modes (k = null_dim)."""
    q = op.null_dim
    if k is None:
        k = q
    if method == "dense":
        return eig_dense_null(op, lap, k)
    if method == "lanczos":
        return eig_smallest_null(op, lap, k, tol=tol, seed=seed)
    if method != "auto":
        raise SpectralError(f"unknown method {method!r}")
    # Dense is cheaper when most of the spectrum is requested.
    if op.n <= DENSE_EVD_CAP and (k == 0 or k > q // 4):
        return eig_dense_null(op, lap, k)
    return eig_smallest_null(op, lap, k, tol=tol, seed=seed)


def save_basis(basis: NullSpectralBasis, path):
    """Portable CSV serialization: header (n, p, q, topology), one eigenpair per row."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{basis.n},{basis.k},{basis.null_dim},{basis.source.get('topology', '?')}\n")
        for mu, vec in zip(basis.eigenvalues, basis.vectors):
            fh.write(f"{mu:.17g}," + ",".join(f"{v:.17g}" for v in vec) + "\n")


def load_basis(path) -> NullSpectralBasis:
    with open(path, "r", encoding="utf-8") as fh:
        n, k, q, topology = fh.readline().strip().split(",")
        n, k, q = int(n), int(k), int(q)
        mus = np.zeros(k)
        vecs = np.zeros((k, n))
        for i in range(k):
            parts = fh.readline().strip().split(",")
            mus[i] = float(parts[0])
            vecs[i] = [float(p) for p in parts[1:]]
    return NullSpectralBasis(vecs, mus, q, {"method": "file", "topology": topology})
