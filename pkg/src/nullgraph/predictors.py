"""Linear predictors of null-space coefficients from measurements.

Two flavors: the population (Wiener) predictor assembled from the GMRF
blocks, whose per-mode R^2 equals the predictability values, and an empirical
ridge predictor fit on (y, a) pairs.  Both are plain weight matrices applied
to raw measurements; optional whitening standardizes the inputs first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gmrf import DENSE_CAP, GmrfError, GmrfPrior
from .operators import LinearMap
from .spectral import NullSpectralBasis


class PredictorError(ValueError):
    pass


@dataclass(frozen=True)
class CoeffPredictor:
    """a_hat = weights @ ((y - shift) / scale) + offset."""

    weights: np.ndarray  # (p, m)
    kind: str            # "wiener" | "ridge" | "zero"
    shift: np.ndarray | None = None   # per-measurement centering (whitening)
    scale: np.ndarray | None = None   # per-measurement scaling (whitening)
    offset: np.ndarray | None = None  # coefficient mean added back
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2:
            raise PredictorError("weights must be a p x m matrix")
        if not np.all(np.isfinite(w)):
            raise PredictorError("weights contain non-finite entries")
        object.__setattr__(self, "weights", w)

    @property
    def p(self) -> int:
        return self.weights.shape[0]

    @property
    def m(self) -> int:
        return self.weights.shape[1]

    def predict(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.m:
            raise PredictorError(f"expected measurements of length {self.m}")
        if self.shift is not None:
            y = y - self.shift
        if self.scale is not None:
            y = y / self.scale
        out = y @ self.weights.T
        if self.offset is not None:
            out = out + self.offset
        return out

    __call__ = predict


def predict_coeffs(predictor: CoeffPredictor, y) -> np.ndarray:
    return predictor.predict(y)


def zero_predictor(p, m) -> CoeffPredictor:
    return CoeffPredictor(np.zeros((p, m)), "zero")


def wiener_predictor(
    prior: GmrfPrior, op: LinearMap, basis: NullSpectralBasis, sigma2: float
) -> CoeffPredictor:
    """Optimal linear predictor Cov(a, y) C_y^{-1} under the GMRF prior."""
    n = op.n
    if n > DENSE_CAP:
        raise GmrfError(f"dense assembly capped at n <= {DENSE_CAP}, got {n}")
    cov = prior.covariance_dense()
    ur = op.range_basis()
    pr = ur @ ur.T
    crr = pr @ cov @ pr
    hd = op.dense()
    cy = hd @ crr @ hd.T + sigma2 * np.eye(op.m)
    cross = hd @ (pr @ (cov @ basis.vectors.T))  # (m, p)
    weights = np.linalg.solve(cy, cross).T       # (p, m)
    return CoeffPredictor(
        weights,
        "wiener",
        meta={"sigma2": float(sigma2), "alpha": prior.alpha, "epsilon": prior.epsilon},
    )


def population_mode_r2(
    predictor: CoeffPredictor,
    prior: GmrfPrior,
    op: LinearMap,
    basis: NullSpectralBasis,
    sigma2: float,
) -> np.ndarray:
    """Per-mode population R^2 of an arbitrary linear predictor on the prior.

    R^2_j = 1 - E(a_j - w_j^T y)^2 / Var(a_j), evaluated in closed form.
    """
    cov = prior.covariance_dense()
    ur = op.range_basis()
    pr = ur @ ur.T
    crr = pr @ cov @ pr
    hd = op.dense()
    cy = hd @ crr @ hd.T + sigma2 * np.eye(op.m)
    cross = hd @ (pr @ (cov @ basis.vectors.T))  # (m, p)
    var_a = np.einsum("ij,ji->i", basis.vectors, cov @ basis.vectors.T)
    w = predictor.weights  # (p, m)
    mse = var_a - 2.0 * np.einsum("pm,mp->p", w, cross) + np.einsum(
        "pm,mn,pn->p", w, cy, w
    )
    return 1.0 - mse / var_a


def _pairs_to_arrays(pairs):
    ys, coeffs = [], []
    for y, a in pairs:
        ys.append(np.asarray(y, dtype=float).ravel())
        coeffs.append(np.asarray(a, dtype=float).ravel())
    return np.asarray(ys), np.asarray(coeffs)


def default_ridge_beta(ys) -> float:
    """1e-3 * tr(Y Y^T) / m, a scale-aware default shrinkage."""
    ys = np.asarray(ys, dtype=float)
    return 1e-3 * float((ys**2).sum()) / ys.shape[1]


def train_ridge(pairs, beta=None, whiten=False) -> CoeffPredictor:
    """Fit weights = A Y^T (Y Y^T + beta I)^{-1} on (y, a) training pairs."""
    ys, coeffs = _pairs_to_arrays(pairs)
    if ys.shape[0] < 2:
        raise PredictorError("ridge training needs at least 2 pairs")
    if beta is None:
        beta = default_ridge_beta(ys)
    if beta <= 0:
        raise PredictorError("ridge strength beta must be positive")
    shift = scale = offset = None
    if whiten:
        shift = ys.mean(axis=0)
        scale = np.maximum(ys.std(axis=0), 1e-12)
        offset = coeffs.mean(axis=0)
        ys = (ys - shift) / scale
        coeffs = coeffs - offset
    gram = ys.T @ ys + beta * np.eye(ys.shape[1])
    weights = np.linalg.solve(gram, ys.T @ coeffs).T
    return CoeffPredictor(
        weights,
        "ridge",
        shift=shift,
        scale=scale,
        offset=offset,
        meta={"beta": float(beta), "samples": ys.shape[0], "whiten": bool(whiten)},
    )


def r2_score(predictor: CoeffPredictor, pairs, basis: NullSpectralBasis | None = None) -> float:
    """1 - E||G(y) - a||^2 / E||a||^2 on held-out (y, a = Sx) pairs."""
    ys, coeffs = _pairs_to_arrays(pairs)
    if ys.shape[0] == 0:
        raise PredictorError("empty test set")
    if basis is not None and coeffs.shape[1] != basis.k:
        raise PredictorError(
            f"pairs carry {coeffs.shape[1]} coefficients, basis has {basis.k} modes"
        )
    denom = float((coeffs**2).sum())
    if denom <= 0:
        raise PredictorError("all target coefficients are zero; R^2 undefined")
    pred = predictor.predict(ys)
    return 1.0 - float(((pred - coeffs) ** 2).sum()) / denom


def make_pairs(op: LinearMap, basis: NullSpectralBasis, images, sigma2, seed):
    """Measure each image (seeded noise) and pair y with its coefficients a = Sx."""
    rng = np.random.default_rng(seed)
    pairs = []
    for img in images:
        x = np.asarray(getattr(img, "data", img), dtype=float).ravel()
        y = op.apply(x)
        if sigma2 > 0:
            y = y + rng.normal(0.0, np.sqrt(sigma2), size=op.m)
        pairs.append((y, basis.project(x)))
    return pairs


def save_weights_csv(predictor: CoeffPredictor, path):
    """Serialize the weight matrix (p rows x m columns) with a metadata header."""
    beta = predictor.meta.get("beta", "")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# kind={predictor.kind},p={predictor.p},m={predictor.m},beta={beta}\n")
        for row in predictor.weights:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
