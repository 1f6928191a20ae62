"""Gaussian Markov random field prior and the null-space analytics built on it.

The prior has precision alpha*L + epsilon*I, which shares eigenvectors with
the null-restricted operator; its null-space covariance spectrum is
lambda_i = 1/(alpha*mu_i + epsilon).  This closed form drives the coverage
curve, the automatic choice of the mode count p, the worst-case (minimax)
approximation bound, and the per-mode predictability analysis.

Everything here is dense by design (desk-scale caps); these are verification
tools, not large-scale solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .graphs import GraphLaplacian
from .operators import LinearMap
from .spectral import NullSpectralBasis

DENSE_CAP = 4096


class GmrfError(ValueError):
    pass


@dataclass(frozen=True)
class GmrfPrior:
    """Zero-mean Gaussian with sparse precision alpha*L + epsilon*I."""

    laplacian: GraphLaplacian
    alpha: float = 1.0
    epsilon: float = 0.01

    def __post_init__(self):
        if not self.laplacian.is_symmetric:
            raise GmrfError("GMRF prior requires a symmetric Laplacian")
        if self.alpha < 0:
            raise GmrfError("alpha must be nonnegative")
        if self.epsilon <= 0:
            raise GmrfError("epsilon must be positive to keep the precision definite")

    @property
    def n(self) -> int:
        return self.laplacian.nodes

    def precision_dense(self) -> np.ndarray:
        return self.alpha * self.laplacian.matrix.toarray() + self.epsilon * np.eye(self.n)

    def covariance_dense(self) -> np.ndarray:
        q = self.precision_dense()
        chol = np.linalg.cholesky(q)
        return scipy.linalg.cho_solve((chol, True), np.eye(self.n))


def prior_spectrum(prior: GmrfPrior, basis: NullSpectralBasis) -> np.ndarray:
    """Null-covariance eigenvalues 1/(alpha*mu_i + epsilon), nonincreasing."""
    return 1.0 / (prior.alpha * basis.eigenvalues + prior.epsilon)


def sample_gmrf(prior: GmrfPrior, count: int, seed: int, operator=None) -> np.ndarray:
    """Draw zero-mean samples with precision Q via dense Cholesky.

    Returns an array of shape (count, n).  With Q = R R^T (R lower), solving
    R^T x = z for standard normal z gives Cov(x) = Q^{-1}.
    """
    if prior.n > DENSE_CAP:
        raise GmrfError(f"dense Cholesky capped at n <= {DENSE_CAP}, got {prior.n}")
    if operator is not None and operator.n != prior.n:
        raise GmrfError(
            f"operator expects n = {operator.n}, prior has n = {prior.n}"
        )
    chol = np.linalg.cholesky(prior.precision_dense())
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((prior.n, int(count)))
    x = scipy.linalg.solve_triangular(chol.T, z, lower=False)
    return x.T


@dataclass(frozen=True)
class CoverageCurve:
    """Cumulative fraction of null-space variance captured by the first p modes."""

    values: np.ndarray  # C(1..q), nondecreasing, C(q) = 1
    q: int
    mode: str  # "closed_form" | "empirical"

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.size != self.q:
            raise GmrfError("coverage curve must have one value per null mode")

    def increments(self) -> np.ndarray:
        return np.diff(self.values, prepend=0.0)


def _require_full(basis: NullSpectralBasis, what):
    if basis.null_dim == 0:
        raise GmrfError(f"{what} undefined for an operator with a trivial null space")
    if basis.k != basis.null_dim:
        raise GmrfError(
            f"{what} needs all {basis.null_dim} null modes, basis has {basis.k}"
        )


def coverage_closed_form(prior: GmrfPrior, basis: NullSpectralBasis) -> CoverageCurve:
    """C(p) = sum_{i<=p} lambda_i / sum_i lambda_i with the prior's spectrum."""
    _require_full(basis, "closed-form coverage")
    lam = prior_spectrum(prior, basis)
    cum = np.cumsum(lam)
    return CoverageCurve(cum / cum[-1], basis.null_dim, "closed_form")


def coverage_empirical(basis: NullSpectralBasis, op: LinearMap, samples) -> CoverageCurve:
    """Dataset coverage: project centered null components onto the modes.

    samples: array (N, n).  Null components are x_n = P_n(x - mean); the
    per-mode energies v_j^T Cov v_j accumulate into the coverage ratios.
    """
    _require_full(basis, "empirical coverage")
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise GmrfError("empirical coverage needs a nonempty (N, n) sample array")
    centered = samples - samples.mean(axis=0)
    xn = np.stack([op.project_null(row) for row in centered])
    coeffs = xn @ basis.vectors.T  # (N, q)
    energy = (coeffs**2).mean(axis=0)
    total = (xn**2).sum(axis=1).mean()
    cum = np.cumsum(energy)
    return CoverageCurve(cum / total, basis.null_dim, "empirical")


def coverage_lower_bound(prior: GmrfPrior, basis: NullSpectralBasis, p: int) -> float:
    """Closed-form floor p*lam_p / (p*lam_1 + (q-p)*lam_{p+1}) for p < q."""
    _require_full(basis, "coverage lower bound")
    q = basis.null_dim
    if not 1 <= p < q:
        raise GmrfError(f"bound defined for 1 <= p < q, got p={p}, q={q}")
    lam = prior_spectrum(prior, basis)
    return float(p * lam[p - 1] / (p * lam[0] + (q - p) * lam[p]))


def select_p(curve: CoverageCurve, kappa=0.95, delta=1e-3, plateau_len=10) -> int:
    """Smallest p reaching coverage kappa whose next plateau_len increments
    all stay below delta; q when no p qualifies."""
    q = curve.q
    inc = curve.increments()
    for p in range(1, q + 1):
        if curve.values[p - 1] >= kappa:
            window = inc[p : min(p + plateau_len, q)]
            if window.size == 0 or window.max() <= delta:
                return p
    return q


def select_p_from_spectrum(lam, kappa=0.95, delta=1e-3, plateau_len=10) -> int:
    """Run the plateau rule directly on nonincreasing variances lam_1 >= ... >= lam_q."""
    lam = np.asarray(lam, dtype=float)
    cum = np.cumsum(lam)
    curve = CoverageCurve(cum / cum[-1], lam.size, "closed_form")
    return select_p(curve, kappa, delta, plateau_len)


@dataclass(frozen=True)
class MinimaxBound:
    """Worst-case residual of the best p-mode approximation over the energy ellipsoid."""

    bound: float
    witness: np.ndarray | None
    p: int
    tau: float
    degenerate: bool = False


def minimax_bound(basis: NullSpectralBasis, p: int, tau: float) -> MinimaxBound:
    """tau / mu_{p+1}, attained by sqrt(tau/mu_{p+1}) times mode p+1.

    Degenerate when mu_{p+1} = 0: the bound is infinite and reported as such.
    """
    if not 0 <= p < basis.k:
        raise GmrfError(f"need p < k = {basis.k} to access mode p+1, got p={p}")
    if tau <= 0:
        raise GmrfError("tau must be positive")
    mu_next = float(basis.eigenvalues[p])
    if mu_next <= 1e-14:
        return MinimaxBound(math.inf, None, p, tau, degenerate=True)
    bound = tau / mu_next
    witness = math.sqrt(bound) * basis.vectors[p]
    return MinimaxBound(bound, witness, p, tau)


@dataclass(frozen=True)
class PredictabilityReport:
    """Per-mode population R^2 of the best linear estimate from measurements."""

    rho2: np.ndarray    # achieved predictability, in [0, 1]
    bound: np.ndarray   # c_j / (c_j + mu_j(Q_nn))
    c: np.ndarray       # coupling strengths, >= 0
    mu: np.ndarray      # restricted-operator eigenvalues of the modes
    sigma2: float

    @property
    def k(self) -> int:
        return self.rho2.size


def per_mode_predictability(
    prior: GmrfPrior, op: LinearMap, basis: NullSpectralBasis, sigma2: float
) -> PredictabilityReport:
    """Population R^2 per mode and its coupling bound, by dense block algebra.

    For mode v_j with null coefficient a_j = <v_j, x>:
      Cov(a_j, y) = v_j^T C_nr H^T,   C_y = H C_rr H^T + sigma2 I,
      rho_j^2 = Cov(a_j,y) C_y^{-1} Cov(y,a_j) / Var(a_j) <= c_j/(c_j + mu_j(Q_nn)),
    with c_j the coupling energy v_j^T Q_rn C_rr Q_nr v_j and
    mu_j(Q_nn) = alpha*mu_j + epsilon.
    """
    n = op.n
    if n > DENSE_CAP:
        raise GmrfError(f"dense block algebra capped at n <= {DENSE_CAP}, got {n}")
    if prior.n != n:
        raise GmrfError(f"prior has n = {prior.n}, operator expects {n}")
    if basis.k == 0:
        z = np.zeros(0)
        return PredictabilityReport(z, z, z, z, float(sigma2))

    qmat = prior.precision_dense()
    cov = prior.covariance_dense()
    ur = op.range_basis()
    pr = ur @ ur.T
    crr = pr @ cov @ pr
    hd = op.dense()
    cy = hd @ crr @ hd.T + sigma2 * np.eye(op.m)

    vecs = basis.vectors  # (k, n), all in Null(H)
    cov_v = cov @ vecs.T                     # (n, k)
    cross = hd @ (pr @ cov_v)                # Cov(a_j, y) = v_j^T C_nr H^T as columns
    var_a = np.einsum("ij,ij->j", vecs.T, cov_v)
    solved = np.linalg.solve(cy, cross)
    rho2 = np.einsum("ij,ij->j", cross, solved) / var_a

    w = pr @ (qmat @ vecs.T)                 # Q_rn-side sandwich, columns in Range
    c = np.einsum("ij,ij->j", w, crr @ w)
    mu_qnn = prior.alpha * basis.eigenvalues + prior.epsilon
    bound = c / (c + mu_qnn)
    return PredictabilityReport(rho2, bound, np.maximum(c, 0.0), basis.eigenvalues.copy(), float(sigma2))


@dataclass(frozen=True)
class BlockIdentityReport:
    """Frobenius-relative residuals of the two precision/covariance block identities."""

    residual_nr: float
    residual_nn: float

    @property
    def max_residual(self) -> float:
        return max(self.residual_nr, self.residual_nn)


def block_identity_check(prior_or_precision, op: LinearMap) -> BlockIdentityReport:
    """Verify C_nr = -Q_nn^-1 Q_nr C_rr and the C_nn expansion in block coordinates.

    Accepts a GmrfPrior or any dense symmetric positive definite precision.
    """
    if isinstance(prior_or_precision, GmrfPrior):
        qmat = prior_or_precision.precision_dense()
    else:
        qmat = np.asarray(prior_or_precision, dtype=float)
    n = op.n
    if qmat.shape != (n, n):
        raise GmrfError(f"precision must be {n}x{n}")
    ur = op.range_basis()
    un = op.null_basis()
    bmat = np.hstack([ur, un])
    r = ur.shape[1]
    qb = bmat.T @ qmat @ bmat
    cb = np.linalg.inv(qb)
    q_rr, q_rn = qb[:r, :r], qb[:r, r:]
    q_nr, q_nn = qb[r:, :r], qb[r:, r:]
    c_rr, c_nr, c_nn = cb[:r, :r], cb[r:, :r], cb[r:, r:]
    q_nn_inv = np.linalg.inv(q_nn)
    rhs_nr = -q_nn_inv @ q_nr @ c_rr
    rhs_nn = q_nn_inv + q_nn_inv @ q_nr @ c_rr @ q_rn @ q_nn_inv

    def rel(a, b):
        scale = max(np.linalg.norm(b), 1e-30)
        return float(np.linalg.norm(a - b) / scale)

    return BlockIdentityReport(rel(c_nr, rhs_nr), rel(c_nn, rhs_nn))
