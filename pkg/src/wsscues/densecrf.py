"""Fully connected CRF with Gaussian pairwise kernels, solved by mean field.

The pairwise potential between pixels i and j is a Potts penalty weighted by

    w1 * exp(-|p_i - p_j|^2 / (2 sa^2) - |I_i - I_j|^2 / (2 sb^2))
  + w2 * exp(-|p_i - p_j|^2 / (2 sg^2))

where p are pixel coordinates and I are RGB colours.  Two solvers share
the same synchronous update: a direct O(N^2 K) summation and a
permutohedral-lattice approximation that scales linearly in N.
"""
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import ConfigError, DimensionMismatch
from .imagery import check_image, check_same_hw, check_scoremap
from .lattice import PermutohedralLattice

UNARY_FLOOR = 1e-8
DEFAULT_CUTOFF = 4096
# dense kernel matrices above this many pixels are evaluated block by block
_DENSE_LIMIT = 4096
_BLOCK = 512


@dataclass(frozen=True)
class CrfParams:
    w1: float = 10.0
    w2: float = 3.0
    sigma_alpha: float = 80.0
    sigma_beta: float = 13.0
    sigma_gamma: float = 3.0
    iterations: int = 10

    def __post_init__(self):
        for name in ("w1", "w2", "sigma_alpha", "sigma_beta", "sigma_gamma"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")
        if self.w1 > 0 and not (self.sigma_alpha > 0 and self.sigma_beta > 0):
            raise ValueError("appearance kernel needs sigma_alpha, sigma_beta > 0")
        if self.w2 > 0 and not self.sigma_gamma > 0:
            raise ValueError("smoothness kernel needs sigma_gamma > 0")
        if int(self.iterations) != self.iterations or self.iterations < 0:
            raise ValueError("iterations must be a nonnegative integer")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown crf keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid crf config: {exc}") from exc

    def to_dict(self):
        return asdict(self)


def unary_from_probs(probs, floor=UNARY_FLOOR):
    """Negative log-probabilities, with ``floor`` guarding log(0)."""
    probs = check_scoremap(probs, kind="probability")
    return -np.log(np.maximum(probs.astype(np.float64), floor))


def _normalize_energy(energy):
    energy = energy - energy.min(axis=0, keepdims=True)
    q = np.exp(-energy)
    return q / q.sum(axis=0, keepdims=True)


def _pixel_features(img):
    h, w = img.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w]
    pos = np.stack([ys.ravel(), xs.ravel()], axis=1).astype(np.float64)
    col = img.reshape(h * w, 3).astype(np.float64)
    return pos, col


def _sqdist(a, b):
    d = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", d, d)


class DenseCRF:
    """Mean-field solver bound to one image and one parameter set.

    Construction does the per-image work (the dense kernel matrix, or the
    two lattices) so that :meth:`infer` can be called repeatedly, as the
    logits refiner does.

    Parameters
    ----------
    img : (H, W, 3) uint8 array
    params : CrfParams
    method : {"naive", "lattice"}
    backend : str, optional
        Kernel backend for the lattice method.
    """

    def __init__(self, img, params=None, method="naive", backend=None):
        self.img = check_image(img)
        self.params = params or CrfParams()
        if method not in ("naive", "lattice"):
            raise ValueError(f"unknown method {method!r}")
        self.method = method
        self.shape = self.img.shape[:2]
        self.n = self.shape[0] * self.shape[1]
        self._pos, self._col = _pixel_features(self.img)
        self._dense = None
        self._lattices = []
        p = self.params
        if method == "naive":
            if self.n <= _DENSE_LIMIT:
                self._dense = self._kernel_rows(0, self.n)
        else:
            if p.w1 > 0:
                feats = np.hstack([self._pos / p.sigma_alpha, self._col / p.sigma_beta])
                self._lattices.append((p.w1, PermutohedralLattice(feats, backend)))
            if p.w2 > 0:
                self._lattices.append((p.w2, PermutohedralLattice(self._pos / p.sigma_gamma, backend)))

    def _kernel_rows(self, start, stop):
        p = self.params
        dp = _sqdist(self._pos[start:stop], self._pos)
        k = np.zeros_like(dp)
        if p.w1 > 0:
            dc = _sqdist(self._col[start:stop], self._col)
            k += p.w1 * np.exp(-dp / (2 * p.sigma_alpha**2) - dc / (2 * p.sigma_beta**2))
        if p.w2 > 0:
            k += p.w2 * np.exp(-dp / (2 * p.sigma_gamma**2))
        rows = np.arange(start, stop)
        k[rows - start, rows] = 0.0
        return k

    def messages(self, q):
        """Kernel-weighted label mass from all other pixels, shape (K, N)."""
        if self.method == "naive":
            if self._dense is not None:
                return q @ self._dense
            out = np.empty_like(q)
            for start in range(0, self.n, _BLOCK):
                stop = min(start + _BLOCK, self.n)
                out[:, start:stop] = q @ self._kernel_rows(start, stop).T
            return out
        out = np.zeros_like(q)
        for weight, lat in self._lattices:
            filtered = lat.filter(q.T).T
            out += weight * (filtered - lat.self_response()[None, :] * q)
        return out

    def infer(self, probs, iterations=None):
        """Run mean field from ``probs`` and return the posterior marginals."""
        probs = check_scoremap(probs, kind="probability")
        check_same_hw(self.img, probs)
        iterations = self.params.iterations if iterations is None else iterations
        if iterations == 0:
            return probs.copy()
        k = probs.shape[0]
        unary = -np.log(np.maximum(probs.astype(np.float64), UNARY_FLOOR)).reshape(k, self.n)
        q = probs.astype(np.float64).reshape(k, self.n)
        for _ in range(iterations):
            if self.params.w1 == 0 and self.params.w2 == 0:
                msg = np.zeros_like(q)
            else:
                msg = self.messages(q)
            energy = unary + msg.sum(axis=0, keepdims=True) - msg
            q = _normalize_energy(energy)
        out_dtype = probs.dtype if probs.dtype in (np.float32, np.float64) else np.float64
        return q.reshape(probs.shape).astype(out_dtype)


def mean_field_naive(img, probs, params=None):
    return DenseCRF(img, params, method="naive").infer(probs)


def mean_field_lattice(img, probs, params=None, backend=None):
    return DenseCRF(img, params, method="lattice", backend=backend).infer(probs)


def choose_method(n_pixels, cutoff=DEFAULT_CUTOFF):
    return "lattice" if n_pixels > cutoff else "naive"


def crf_refine(img, probs, params=None, cutoff=DEFAULT_CUTOFF):
    """Dispatch to the lattice solver above ``cutoff`` pixels, else naive."""
    img = check_image(img)
    method = choose_method(img.shape[0] * img.shape[1], cutoff)
    return DenseCRF(img, params, method=method).infer(probs)


__all__ = [
    "CrfParams",
    "DenseCRF",
    "choose_method",
    "crf_refine",
    "mean_field_lattice",
    "mean_field_naive",
    "unary_from_probs",
]
