"""Plug-and-play proximal gradient descent with null-space regularization.

One iteration takes a gradient step on the smooth terms

    (1/2)||Hx - y||^2 + (gamma/2)||S x - coeff_hat||^2 + (gamma_g/2) x^T (P_n L P_n) x

and then applies a denoiser.  The nonsmooth prior weight ``lam`` is realized
solely through the denoiser (its threshold), as is standard in PnP, and is
therefore excluded from reported objective values.  The initialization is
x0 = H^T y + S^T coeff_hat; a config flag switches the first term to pinv(H) y,
which fixes the scale mismatch of unnormalized operators.

Fixed constants: the divergence guard aborts once the iterate norm (or the
error norm when the target is known) exceeds 1e6, and contraction summaries
skip a burn-in of 5 iterations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graphs import GraphLaplacian
from .operators import ImageSignal, LinearMap
from .predictors import CoeffPredictor
from .spectral import NullSpectralBasis, apply_null_restricted
from .wavelet import wavelet_soft_denoise

DIVERGENCE_GUARD = 1e6
BURN_IN = 5


class SolverError(RuntimeError):
    pass


class SolverDivergence(SolverError):
    """Iterate norm blew past the divergence guard."""


# ---------------------------------------------------------------------------
# Denoisers
# ---------------------------------------------------------------------------


class IdentityDenoiser:
    name = "Identity"

    def __call__(self, image):
        return image


@dataclass(frozen=True)
class WaveletSoftDenoiser:
    """Orthogonal wavelet soft-thresholding; nonexpansive for any threshold."""

    filt: str = "haar"
    levels: int = 2
    threshold: float = 0.0
    name = "WaveletSoft"

    def __call__(self, image):
        return wavelet_soft_denoise(image, self.filt, self.levels, self.threshold)


@dataclass(frozen=True)
class TvProxDenoiser:
    """Total-variation proximal step (Chambolle), per image stack."""

    weight: float = 0.05
    inner_iters: int = 50
    name = "TvProx"

    def __call__(self, image):
        from skimage.restoration import denoise_tv_chambolle

        channel_axis = 0 if image.ndim == 3 and image.shape[0] > 1 else None
        return denoise_tv_chambolle(
            image, weight=self.weight, max_num_iter=self.inner_iters,
            channel_axis=channel_axis,
        )


def make_denoiser(name, **params):
    name = name.lower()
    if name == "identity":
        return IdentityDenoiser()
    if name == "waveletsoft":
        return WaveletSoftDenoiser(
            filt=params.get("filt", "haar"),
            levels=int(params.get("levels", 2)),
            threshold=float(params.get("threshold", 0.0)),
        )
    if name == "tvprox":
        return TvProxDenoiser(
            weight=float(params.get("weight", 0.05)),
            inner_iters=int(params.get("inner_iters", 50)),
        )
    raise SolverError(f"unknown denoiser {name!r}")


# ---------------------------------------------------------------------------
# Configuration and trace
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    step_alpha: float | str = "auto"  # "auto" = 1 / lambda_max(H^T H + gamma_g T)
    gamma: float = 0.0                # predicted-coefficient consistency weight
    gamma_g: float = 0.0              # null-only graph regularizer weight
    lam: float = 0.0                  # prior weight; enters via the denoiser only
    iterations: int = 100
    denoiser: object = field(default_factory=IdentityDenoiser)
    delta: float = 0.0                # assumed denoiser expansion bound
    init_pinv: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise SolverError("iteration count must be >= 1")
        if isinstance(self.step_alpha, str) and self.step_alpha != "auto":
            raise SolverError("step_alpha must be a positive float or 'auto'")
        if not isinstance(self.step_alpha, str) and self.step_alpha <= 0:
            raise SolverError("step_alpha must be positive")


@dataclass
class RunTrace:
    """Per-iteration diagnostics (length iterations+1, including the init)."""

    objective: np.ndarray
    psnr: np.ndarray       # vs ground truth when given, else NaN
    err_norm: np.ndarray   # ||x_k - x*|| when ground truth given, else NaN
    final: ImageSignal
    alpha: float

    def rows(self):
        for k in range(self.objective.size):
            yield (k, self.objective[k], self.psnr[k], self.err_norm[k])


# ---------------------------------------------------------------------------
# Objective / gradient
# ---------------------------------------------------------------------------


def smooth_objective(op, y, x, basis=None, coeff_hat=None, laplacian=None,
                     gamma=0.0, gamma_g=0.0) -> float:
    """Value of the smooth terms (denoiser prior excluded, see module docs)."""
    r = op.apply(x) - y
    val = 0.5 * float(r @ r)
    if gamma > 0.0:
        d = basis.project(x) - coeff_hat
        val += 0.5 * gamma * float(d @ d)
    if gamma_g > 0.0:
        val += 0.5 * gamma_g * float(x @ apply_null_restricted(op, laplacian, x))
    return val


def smooth_gradient(op, y, x, basis=None, coeff_hat=None, laplacian=None,
                    gamma=0.0, gamma_g=0.0) -> np.ndarray:
    """H^T(Hx - y) + gamma S^T(Sx - coeff_hat) + gamma_g P_n L P_n x."""
    g = op.adjoint(op.apply(x) - y)
    if gamma > 0.0:
        g = g + gamma * basis.lift(basis.project(x) - coeff_hat)
    if gamma_g > 0.0:
        g = g + gamma_g * apply_null_restricted(op, laplacian, x)
    return g


# ---------------------------------------------------------------------------
# Step sizing and contraction analysis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepSpectrum:
    alpha_star: float
    lam_min: float
    lam_max: float
    kappa: float     # inf when lam_min <= 0
    rho_star: float  # (1+delta)(kappa-1)/(kappa+1)
    delta: float
    singular: bool   # lam_min <= 0 flagged, not fatal


def _quadratic_matvec(op, laplacian, gamma_g):
    def av(x):
        out = op.adjoint(op.apply(x))
        if gamma_g > 0.0:
            out = out + gamma_g * apply_null_restricted(op, laplacian, x)
        return out

    return av


def spectral_step_size(op, laplacian=None, gamma_g=0.0, delta=0.0,
                       method="dense") -> StepSpectrum:
    """Extremes of H^T H + gamma_g P_n L P_n over R^n, with alpha*, kappa, rho*."""
    if gamma_g > 0.0 and laplacian is None:
        raise SolverError("gamma_g > 0 requires a graph Laplacian")
    if method == "dense":
        hd = op.dense()
        a = hd.T @ hd
        if gamma_g > 0.0:
            un = op.null_basis()
            pn = un @ un.T
            ld = laplacian.matrix.toarray()
            if not laplacian.is_symmetric:
                ld = 0.5 * (ld + ld.T)
            a = a + gamma_g * (pn @ ld @ pn)
        a = 0.5 * (a + a.T)
        eigs = np.linalg.eigvalsh(a)
        lam_min, lam_max = float(eigs[0]), float(eigs[-1])
    elif method == "power":
        av = _quadratic_matvec(op, laplacian, gamma_g)
        lam_max = _power_extreme(av, op.n)
        lam_min = lam_max - _power_extreme(lambda x: lam_max * x - av(x), op.n)
    else:
        raise SolverError(f"unknown method {method!r}")
    if abs(lam_min) < 1e-12:
        lam_min = 0.0
    singular = lam_min <= 0.0
    kappa = math.inf if singular else lam_max / lam_min
    rho_star = (1.0 + delta) * (1.0 if singular else (kappa - 1.0) / (kappa + 1.0))
    alpha_star = 2.0 / (lam_min + lam_max)
    return StepSpectrum(alpha_star, lam_min, lam_max, kappa, rho_star, delta, singular)


def _power_extreme(av, n, iters=50, tol=1e-8, seed=0):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = av(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v_next = w / nw
        lam_next = float(v_next @ av(v_next))
        if abs(lam_next - lam) <= tol * max(abs(lam_next), 1.0):
            return lam_next
        v, lam = v_next, lam_next
    return lam


def auto_step(op, laplacian=None, gamma_g=0.0) -> float:
    """Conservative step 1/lambda_max(H^T H + gamma_g T) by power iteration."""
    lam_max = _power_extreme(_quadratic_matvec(op, laplacian, gamma_g), op.n)
    if lam_max <= 0:
        raise SolverError("cannot size a step for a zero quadratic form")
    return 1.0 / lam_max


def contraction_rate(err_norms, burn_in=BURN_IN):
    """Per-iteration ratios ||x_{k+1}-x*||/||x_k-x*||; max after burn-in.

    Iterations whose denominator vanished (already converged) are skipped.
    """
    err = np.asarray(err_norms, dtype=float)
    ratios = np.full(err.size - 1, np.nan)
    # Denominators at the numerical noise floor count as converged.
    floor = 1e-12 * max(err.max(), 1.0) if err.size else 0.0
    nz = err[:-1] > floor
    ratios[nz] = err[1:][nz] / err[:-1][nz]
    tail = ratios[burn_in:]
    tail = tail[np.isfinite(tail)]
    summary = float(tail.max()) if tail.size else math.nan
    return ratios, summary


def psnr(x, x_ref, peak=1.0) -> float:
    """10 log10(peak^2 / MSE); +inf for identical signals."""
    if peak <= 0:
        raise ValueError("peak must be positive")
    x = np.asarray(getattr(x, "data", x), dtype=float).ravel()
    x_ref = np.asarray(getattr(x_ref, "data", x_ref), dtype=float).ravel()
    if x.shape != x_ref.shape:
        raise ValueError("psnr requires equal shapes")
    mse = float(np.mean((x - x_ref) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak**2 / mse)


# ---------------------------------------------------------------------------
# Main loop
# ---------------------------------------------------------------------------


def run_pnp_pgd(
    op: LinearMap,
    y,
    config: SolverConfig,
    basis: NullSpectralBasis | None = None,
    predictor: CoeffPredictor | None = None,
    laplacian: GraphLaplacian | None = None,
    x_true=None,
    coeff_hat=None,
) -> RunTrace:
    """Proximal-gradient PnP with predicted-coefficient and null-graph terms.

    ``coeff_hat`` overrides the predictor output (useful when measurements were
    centered externally).  The run is deterministic: no randomness enters the
    iteration.
    """
    y = np.asarray(y, dtype=float).ravel()
    gamma, gamma_g = config.gamma, config.gamma_g
    if gamma > 0.0:
        if basis is None:
            raise SolverError("gamma > 0 requires a null-mode basis")
        if coeff_hat is None:
            if predictor is None:
                raise SolverError("gamma > 0 requires a predictor or explicit coeff_hat")
            coeff_hat = predictor.predict(y)
        coeff_hat = np.asarray(coeff_hat, dtype=float).ravel()
        if coeff_hat.size != basis.k:
            raise SolverError("predicted coefficients do not match the basis size")
    if gamma_g > 0.0 and laplacian is None:
        raise SolverError("gamma_g > 0 requires a graph Laplacian")

    if config.step_alpha == "auto":
        alpha = auto_step(op, laplacian, gamma_g)
    else:
        alpha = float(config.step_alpha)

    x = op.pinv_apply(y) if config.init_pinv else op.adjoint(y)
    if gamma > 0.0:
        x = x + basis.lift(coeff_hat)

    if x_true is not None:
        x_true = np.asarray(getattr(x_true, "data", x_true), dtype=float).ravel()

    k_iter = config.iterations
    objective = np.zeros(k_iter + 1)
    psnrs = np.full(k_iter + 1, np.nan)
    errs = np.full(k_iter + 1, np.nan)

    def record(slot, xv):
        objective[slot] = smooth_objective(
            op, y, xv, basis, coeff_hat, laplacian, gamma, gamma_g
        )
        if x_true is not None:
            psnrs[slot] = psnr(xv, x_true)
            errs[slot] = float(np.linalg.norm(xv - x_true))

    record(0, x)
    shape3 = op.image_shape
    for k in range(1, k_iter + 1):
        grad = smooth_gradient(op, y, x, basis, coeff_hat, laplacian, gamma, gamma_g)
        x = x - alpha * grad
        x = np.asarray(config.denoiser(x.reshape(shape3)), dtype=float).ravel()
        guard = errs[k - 1] if x_true is not None else float(np.linalg.norm(x))
        if not np.isfinite(x).all() or float(np.linalg.norm(x)) > DIVERGENCE_GUARD:
            raise SolverDivergence(
                f"iterate diverged at step {k}: |x| = {np.linalg.norm(x):.3e}, "
                f"previous error {guard:.3e}, alpha = {alpha:.3e}"
            )
        record(k, x)

    final = ImageSignal(x, *shape3)
    return RunTrace(objective, psnrs, errs, final, alpha)


def quadratic_fixed_point(op, y, basis=None, coeff_hat=None, laplacian=None,
                          gamma=0.0, gamma_g=0.0) -> np.ndarray:
    """Minimizer of the smooth terms (dense solve); the identity-denoiser limit."""
    hd = op.dense()
    a = hd.T @ hd
    b = hd.T @ np.asarray(y, dtype=float).ravel()
    if gamma > 0.0:
        a = a + gamma * basis.vectors.T @ basis.vectors
        b = b + gamma * basis.vectors.T @ np.asarray(coeff_hat, dtype=float).ravel()
    if gamma_g > 0.0:
        un = op.null_basis()
        pn = un @ un.T
        ld = laplacian.matrix.toarray()
        if not laplacian.is_symmetric:
            ld = 0.5 * (ld + ld.T)
        a = a + gamma_g * (pn @ ld @ pn)
    return np.linalg.solve(a, b)
