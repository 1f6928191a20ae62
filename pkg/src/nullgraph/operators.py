"""Forward sensing operators with matrix-free adjoints, pseudoinverses and
range/null-space projectors.

Every operator maps a flattened image vector of length n = channels*height*width
to a measurement vector of length m <= n.  The four built-in families have
closed-form Gram matrices (or a thresholded SVD for blur), so pseudoinverse and
projector applications never require an iterative solve.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg


class OperatorError(ValueError):
    """Invalid operator construction or dimension mismatch."""


DENSE_SVD_CAP = 4096


@dataclass(frozen=True)
class ImageSignal:
    """Flattened real image with (channels, height, width) metadata."""

    data: np.ndarray
    channels: int
    height: int
    width: int

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float).ravel()
        object.__setattr__(self, "data", data)
        if self.channels < 1 or self.height < 1 or self.width < 1:
            raise ValueError("image dimensions must be positive")
        if data.size != self.n:
            raise ValueError(
                f"data length {data.size} != channels*height*width = {self.n}"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("image contains non-finite entries")

    @property
    def n(self) -> int:
        return self.channels * self.height * self.width

    @property
    def shape3(self) -> tuple[int, int, int]:
        return (self.channels, self.height, self.width)

    def as_chw(self) -> np.ndarray:
        return self.data.reshape(self.shape3)

    @classmethod
    def from_chw(cls, arr) -> "ImageSignal":
        arr = np.asarray(arr, dtype=float)
        if arr.ndim == 2:
            arr = arr[None]
        c, h, w = arr.shape
        return cls(arr.ravel(), c, h, w)


@dataclass(frozen=True)
class Measurement:
    """Measurement vector together with the variance of its additive noise."""

    data: np.ndarray
    noise_sigma2: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "data", np.asarray(self.data, dtype=float).ravel())
        if self.noise_sigma2 < 0:
            raise ValueError("noise variance must be nonnegative")


@dataclass(frozen=True)
class RnsdSplit:
    """Orthogonal decomposition x = range_part + null_part."""

    range_part: np.ndarray
    null_part: np.ndarray


class LinearMap:
    """Abstract m x n operator; subclasses supply apply/adjoint/pinv hooks.

    Instances are immutable after construction; all methods are pure and safe
    to call concurrently.
    """

    kind = "abstract"

    def __init__(self, channels, height, width, m):
        self.channels = int(channels)
        self.height = int(height)
        self.width = int(width)
        self.n = self.channels * self.height * self.width
        self.m = int(m)
        if not (1 <= self.m <= self.n):
            raise OperatorError(f"need 1 <= m <= n, got m={self.m}, n={self.n}")

    # -- core hooks -------------------------------------------------------
    def apply(self, x) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self, z) -> np.ndarray:
        raise NotImplementedError

    def pinv_apply(self, z) -> np.ndarray:
        raise NotImplementedError

    # -- derived operations ------------------------------------------------
    def project_range(self, x) -> np.ndarray:
        """Orthogonal projection onto Range(H^T)."""
        x = self._check_image(x)
        return self.pinv_apply(self.apply(x))

    def project_null(self, x) -> np.ndarray:
        """Orthogonal projection onto Null(H): x - pinv(H) H x."""
        x = self._check_image(x)
        return x - self.pinv_apply(self.apply(x))

    def split(self, x) -> RnsdSplit:
        x = self._check_image(x)
        xr = self.project_range(x)
        return RnsdSplit(range_part=xr, null_part=x - xr)

    @property
    def null_dim(self) -> int:
        """Dimension of Null(H); n - m for the exact-null-space kinds."""
        return self.n - self.m

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return (self.channels, self.height, self.width)

    # -- dense views (desk scale only) --------------------------------------
    def dense(self) -> np.ndarray:
        out = np.empty((self.m, self.n))
        e = np.zeros(self.n)
        for j in range(self.n):
            e[j] = 1.0
            out[:, j] = self.apply(e)
            e[j] = 0.0
        return out

    def range_basis(self) -> np.ndarray:
        """Orthonormal columns spanning Range(H^T), shape (n, rank)."""
        q, _ = np.linalg.qr(self.dense().T)
        return q

    def null_basis(self) -> np.ndarray:
        """Orthonormal columns spanning Null(H), shape (n, null_dim)."""
        pn = np.eye(self.n) - self.range_basis() @ self.range_basis().T
        q, _, _ = scipy.linalg.qr(pn, pivoting=True)
        return q[:, : self.null_dim]

    def params_key(self) -> str:
        return f"{self.kind}:{self.channels}x{self.height}x{self.width}:m={self.m}"

    def operator_hash(self) -> str:
        return hashlib.sha1(self.params_key().encode()).hexdigest()[:16]

    def _check_image(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.n:
            raise OperatorError(f"expected vector of length {self.n}, got {x.size}")
        return x

    def _check_measurement(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float).ravel()
        if z.size != self.m:
            raise OperatorError(f"expected vector of length {self.m}, got {z.size}")
        return z


def _fwht(v: np.ndarray) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform, Sylvester ordering."""
    a = v.astype(float).copy()
    n = a.size
    h = 1
    while h < n:
        a = a.reshape(-1, 2 * h)
        top = a[:, :h].copy()
        a[:, :h] = top + a[:, h:]
        a[:, h:] = top - a[:, h:]
        a = a.ravel()
        h *= 2
    return a


class HadamardCS(LinearMap):
    """First m rows of the n x n Sylvester Hadamard matrix (entries +-1).

    Rows are mutually orthogonal with squared norm n, so H H^T = n I and the
    pseudoinverse is H^T / n.
    """

    kind = "HadamardCS"

    def __init__(self, channels, height, width, rows):
        super().__init__(channels, height, width, rows)
        if self.n & (self.n - 1):
            raise OperatorError(f"Hadamard operator requires n a power of two, got {self.n}")

    def apply(self, x):
        return _fwht(self._check_image(x))[: self.m]

    def adjoint(self, z):
        z = self._check_measurement(z)
        padded = np.zeros(self.n)
        padded[: self.m] = z
        # Sylvester Hadamard matrices are symmetric, so H^T z = H_full [z; 0].
        return _fwht(padded)

    def pinv_apply(self, z):
        return self.adjoint(z) / self.n

    def dense(self):
        return scipy.linalg.hadamard(self.n).astype(float)[: self.m]

    def range_basis(self):
        return scipy.linalg.hadamard(self.n).astype(float)[: self.m].T / math.sqrt(self.n)

    def null_basis(self):
        # The remaining Hadamard rows are an exact orthogonal complement.
        return scipy.linalg.hadamard(self.n).astype(float)[self.m :].T / math.sqrt(self.n)

    def params_key(self):
        return f"{self.kind}:{self.channels}x{self.height}x{self.width}:rows={self.m}"


class BlockAverageSR(LinearMap):
    """Block-averaging downsampler: each row is 1/f^2 over one f x f block.

    Rows have disjoint support, so H H^T = (1/f^2) I and pinv(H) = f^2 H^T.
    """

    kind = "BlockAverageSR"

    def __init__(self, channels, height, width, factor):
        f = int(factor)
        if f < 1 or height % f or width % f:
            raise OperatorError(
                f"height and width must be divisible by the SR factor {f}"
            )
        self.factor = f
        m = channels * (height // f) * (width // f)
        super().__init__(channels, height, width, m)

    def apply(self, x):
        x = self._check_image(x).reshape(self.image_shape)
        f = self.factor
        c, h, w = self.image_shape
        blocks = x.reshape(c, h // f, f, w // f, f)
        return blocks.mean(axis=(2, 4)).ravel()

    def adjoint(self, z):
        z = self._check_measurement(z)
        f = self.factor
        c, h, w = self.image_shape
        low = z.reshape(c, h // f, w // f) / (f * f)
        up = np.repeat(np.repeat(low, f, axis=1), f, axis=2)
        return up.ravel()

    def pinv_apply(self, z):
        return self.adjoint(z) * self.factor**2

    def range_basis(self):
        # Normalized rows: value 1/f on each block, disjoint supports.
        return self.dense().T * self.factor

    def null_basis(self):
        f2 = self.factor**2
        # Orthonormal complement of the constant vector inside one block,
        # via the Householder reflection sending e_1 to ones/sqrt(f^2).
        ones = np.full(f2, 1.0 / math.sqrt(f2))
        house = np.eye(f2)
        v = ones - np.eye(f2)[:, 0]
        if np.linalg.norm(v) > 1e-12:
            v /= np.linalg.norm(v)
            house = house - 2.0 * np.outer(v, v)
        comp = house[:, 1:]  # (f^2, f^2 - 1), orthonormal, orthogonal to ones
        c, h, w = self.image_shape
        nb = (h // self.factor) * (w // self.factor)
        out = np.zeros((self.n, self.null_dim))
        col = 0
        x3 = np.arange(self.n).reshape(self.image_shape)
        f = self.factor
        for ch in range(c):
            for bi in range(h // f):
                for bj in range(w // f):
                    idx = x3[ch, bi * f : (bi + 1) * f, bj * f : (bj + 1) * f].ravel()
                    out[idx, col : col + f2 - 1] = comp
                    col += f2 - 1
        return out

    def params_key(self):
        return f"{self.kind}:{self.channels}x{self.height}x{self.width}:f={self.factor}"


BAYER_PATTERNS = {"RGGB": ((0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 2))}


class BayerMosaic(LinearMap):
    """Color filter array sampling: one channel per pixel on a 2x2 RGGB tile.

    Rows are distinct selection rows, hence H H^T = I and pinv(H) = H^T.
    """

    kind = "BayerMosaic"

    def __init__(self, channels, height, width, phase=(0, 0)):
        if channels != 3:
            raise OperatorError("Bayer mosaic requires 3 channels")
        if height % 2 or width % 2:
            raise OperatorError("Bayer mosaic requires even height and width")
        super().__init__(channels, height, width, height * width)
        self.phase = (int(phase[0]) % 2, int(phase[1]) % 2)
        ii, jj = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
        pi = (ii + self.phase[0]) % 2
        pj = (jj + self.phase[1]) % 2
        chan = np.where((pi == 0) & (pj == 0), 0, np.where((pi == 1) & (pj == 1), 2, 1))
        self._flat_index = (chan * height * width + ii * width + jj).ravel()

    def apply(self, x):
        return self._check_image(x)[self._flat_index]

    def adjoint(self, z):
        z = self._check_measurement(z)
        out = np.zeros(self.n)
        out[self._flat_index] = z
        return out

    def pinv_apply(self, z):
        return self.adjoint(z)

    def range_basis(self):
        out = np.zeros((self.n, self.m))
        out[self._flat_index, np.arange(self.m)] = 1.0
        return out

    def null_basis(self):
        unsampled = np.setdiff1d(np.arange(self.n), self._flat_index)
        out = np.zeros((self.n, self.null_dim))
        out[unsampled, np.arange(self.null_dim)] = 1.0
        return out

    def params_key(self):
        return (
            f"{self.kind}:{self.channels}x{self.height}x{self.width}:"
            f"phase={self.phase[0]}{self.phase[1]}"
        )


def _periodic_gaussian_kernel(height, width, sigma):
    dy = np.minimum(np.arange(height), height - np.arange(height))
    dx = np.minimum(np.arange(width), width - np.arange(width))
    ker = np.exp(-(dy[:, None] ** 2 + dx[None, :] ** 2) / (2.0 * sigma**2))
    return ker / ker.sum()


class GaussianBlur(LinearMap):
    """Circular 2-D Gaussian convolution applied per channel (m = n).

    H is numerically invertible, so the null space is *effective*: the right
    singular directions whose singular value falls below tau_svd * sigma_max.
    A dense per-channel SVD (spatial size <= DENSE_SVD_CAP) backs the
    thresholded projectors and pseudoinverse.
    """

    kind = "GaussianBlur"

    def __init__(self, channels, height, width, sigma_k=1.0, tau_svd=1e-3):
        n = channels * height * width
        if n > DENSE_SVD_CAP:
            raise OperatorError(
                f"GaussianBlur dense SVD capped at n <= {DENSE_SVD_CAP}, got {n}"
            )
        super().__init__(channels, height, width, n)
        if sigma_k <= 0 or tau_svd <= 0:
            raise OperatorError("sigma_k and tau_svd must be positive")
        self.sigma_k = float(sigma_k)
        self.tau_svd = float(tau_svd)

        hw = height * width
        ker = _periodic_gaussian_kernel(height, width, self.sigma_k)
        # Circulant blur matrix on one channel: column j is the kernel rolled
        # to pixel j.
        mat = np.empty((hw, hw))
        for i in range(height):
            for j in range(width):
                mat[:, i * width + j] = np.roll(np.roll(ker, i, axis=0), j, axis=1).ravel()
        u, s, vt = np.linalg.svd(mat)
        self._spatial = mat
        self._u, self._s, self._vt = u, s, vt
        self._keep = s >= self.tau_svd * s[0]

    def apply(self, x):
        x = self._check_image(x).reshape(self.channels, -1)
        return (x @ self._spatial.T).ravel()

    def adjoint(self, z):
        z = self._check_measurement(z).reshape(self.channels, -1)
        return (z @ self._spatial).ravel()

    def pinv_apply(self, z):
        z = self._check_measurement(z).reshape(self.channels, -1)
        coef = (z @ self._u[:, self._keep]) / self._s[self._keep]
        return (coef @ self._vt[self._keep]).ravel()

    def project_range(self, x):
        # Through the orthonormal singular basis rather than pinv(H) H, which
        # would amplify roundoff by 1/s near the threshold.
        x = self._check_image(x).reshape(self.channels, -1)
        vk = self._vt[self._keep]
        return ((x @ vk.T) @ vk).ravel()

    def project_null(self, x):
        return self._check_image(x) - self.project_range(x)

    @property
    def null_dim(self):
        return self.channels * int(np.sum(~self._keep))

    @property
    def sigma_max(self):
        return float(self._s[0])

    def dense(self):
        return scipy.linalg.block_diag(*[self._spatial] * self.channels)

    def range_basis(self):
        return scipy.linalg.block_diag(*[self._vt[self._keep].T] * self.channels)

    def null_basis(self):
        return scipy.linalg.block_diag(*[self._vt[~self._keep].T] * self.channels)

    def params_key(self):
        return (
            f"{self.kind}:{self.channels}x{self.height}x{self.width}:"
            f"sigma={self.sigma_k!r}:tau={self.tau_svd!r}"
        )


class ExplicitDense(LinearMap):
    """Arbitrary dense m x n operator; SVD-backed projectors and pinv."""

    kind = "ExplicitDense"

    def __init__(self, matrix, channels, height, width, rank_tol=1e-10):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2:
            raise OperatorError("explicit operator must be a 2-D matrix")
        m, n = matrix.shape
        if n != channels * height * width:
            raise OperatorError(
                f"matrix has {n} columns but image shape gives {channels * height * width}"
            )
        if m > n:
            raise OperatorError("explicit operator requires m <= n")
        if n > DENSE_SVD_CAP:
            raise OperatorError(f"explicit dense operator capped at n <= {DENSE_SVD_CAP}")
        super().__init__(channels, height, width, m)
        self.matrix = matrix
        u, s, vt = np.linalg.svd(matrix, full_matrices=True)
        keep = s >= rank_tol * (s[0] if s.size and s[0] > 0 else 1.0)
        self._u, self._s, self._vt, self._keep = u, s, vt, keep
        self._rank = int(np.sum(keep))

    def apply(self, x):
        return self.matrix @ self._check_image(x)

    def adjoint(self, z):
        return self.matrix.T @ self._check_measurement(z)

    def pinv_apply(self, z):
        z = self._check_measurement(z)
        coef = (self._u[:, : self.m].T @ z)[self._keep[: self.m]] / self._s[self._keep]
        return self._vt[: self.m][self._keep[: self.m]].T @ coef

    def project_range(self, x):
        x = self._check_image(x)
        vk = self._vt[: self.m][self._keep[: self.m]]
        return vk.T @ (vk @ x)

    def project_null(self, x):
        return self._check_image(x) - self.project_range(x)

    @property
    def null_dim(self):
        return self.n - self._rank

    def dense(self):
        return self.matrix

    def range_basis(self):
        return self._vt[: self.m][self._keep[: self.m]].T

    def null_basis(self):
        keep_full = np.zeros(self.n, dtype=bool)
        keep_full[: self.m] = self._keep[: self.m]
        return self._vt[~keep_full].T

    def params_key(self):
        digest = hashlib.sha1(np.ascontiguousarray(self.matrix).tobytes()).hexdigest()[:12]
        return f"{self.kind}:{self.channels}x{self.height}x{self.width}:sha={digest}"


def build_operator(kind, channels, height, width, **params) -> LinearMap:
    """Construct a forward operator by kind name.

    Kind-specific parameters: HadamardCS(rows), BlockAverageSR(factor),
    BayerMosaic(phase), GaussianBlur(sigma_k, tau_svd), ExplicitDense(matrix).
    """
    kinds = {
        "HadamardCS": HadamardCS,
        "BlockAverageSR": BlockAverageSR,
        "BayerMosaic": BayerMosaic,
        "GaussianBlur": GaussianBlur,
        "ExplicitDense": ExplicitDense,
    }
    if kind not in kinds:
        raise OperatorError(f"unknown operator kind {kind!r}")
    return kinds[kind](channels=channels, height=height, width=width, **params)


def measure(op: LinearMap, x, noise_sigma2=0.05, seed=None) -> Measurement:
    """y = H x + omega with omega ~ N(0, noise_sigma2 I); deterministic under seed."""
    y = op.apply(x)
    if noise_sigma2 > 0:
        rng = np.random.default_rng(seed)
        y = y + rng.normal(0.0, math.sqrt(noise_sigma2), size=op.m)
    return Measurement(y, noise_sigma2)


def load_dense_csv(path, channels, height, width) -> ExplicitDense:
    """Read a row-major CSV matrix whose first line is 'rows,cols'."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if len(header) != 2:
            raise OperatorError(f"{path}: expected 'rows,cols' header")
        rows, cols = int(header[0]), int(header[1])
        mat = np.loadtxt(fh, delimiter=",", ndmin=2)
    if mat.shape != (rows, cols):
        raise OperatorError(
            f"{path}: header promises {rows}x{cols}, file has {mat.shape[0]}x{mat.shape[1]}"
        )
    return ExplicitDense(mat, channels, height, width)


def save_dense_csv(op: LinearMap, path):
    mat = op.dense()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{mat.shape[0]},{mat.shape[1]}\n")
        for row in mat:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
