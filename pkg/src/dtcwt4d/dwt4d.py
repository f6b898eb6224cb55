"""Separable real 4D orthogonal DWT with periodic extension (comparison baseline)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .transform4d import NDIM, as_volume, max_levels

_SQ3 = np.sqrt(3.0)
_WAVELETS = {
    "haar": np.array([1.0, 1.0]) / np.sqrt(2.0),
    "db2": np.array([1 + _SQ3, 3 + _SQ3, 3 - _SQ3, 1 - _SQ3]) / (4 * np.sqrt(2.0)),
}


def wavelet_filters(name: str):
    """Orthonormal (low, high) analysis filters; high[j] = (-1)^j low[m-1-j]."""
    try:
        h = _WAVELETS[name]
    except KeyError:
        raise ValueError(f"unknown wavelet {name!r}; available: {sorted(_WAVELETS)}") from None
    g = h[::-1] * (-1.0) ** np.arange(len(h))
    return h, g


def _analysis_axis(x, h, axis):
    n = x.shape[axis]
    x = np.moveaxis(x, axis, 0)
    out = np.zeros((n // 2,) + x.shape[1:])
    base = 2 * np.arange(n // 2)
    for j, hj in enumerate(h):
        out += hj * x[(base + j) % n]
    return np.moveaxis(out, 0, axis)


def _synthesis_axis(y, h, axis):
    half = y.shape[axis]
    n = 2 * half
    y = np.moveaxis(y, axis, 0)
    out = np.zeros((n,) + y.shape[1:])
    base = 2 * np.arange(half)
    for j, hj in enumerate(h):
        # (base + j) % n is a permutation of the even or odd residues, so no collisions
        out[(base + j) % n] += hj * y
    return np.moveaxis(out, 0, axis)


@dataclass
class DwtCoeffs4D:
    """``details[j - 1]`` has shape ``(15, *band)`` indexed by ``kappa - 1``."""

    details: List[np.ndarray]
    approx: np.ndarray
    shape: Tuple[int, ...]
    wavelet: str = "db2"

    @property
    def levels(self) -> int:
        return len(self.details)

    def arrays(self):
        return list(self.details) + [self.approx]

    def to_vector(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_vector(self, vec) -> "DwtCoeffs4D":
        vec = np.asarray(vec, dtype=np.float64)
        pos = 0
        det = []
        for d in self.details:
            det.append(vec[pos:pos + d.size].reshape(d.shape))
            pos += d.size
        approx = vec[pos:pos + self.approx.size].reshape(self.approx.shape)
        if pos + approx.size != vec.size:
            raise ValueError("vector length does not match the coefficient layout")
        return DwtCoeffs4D(det, approx, self.shape, self.wavelet)

    def scaling_mask(self) -> np.ndarray:
        n_det = sum(d.size for d in self.details)
        mask = np.zeros(n_det + self.approx.size, dtype=bool)
        mask[n_det:] = True
        return mask

    def energy(self) -> float:
        return float(sum(np.sum(a * a) for a in self.arrays()))


def _check_levels(shape, levels):
    jmax = max_levels(shape)
    if not 1 <= levels <= jmax:
        raise ValueError(f"levels={levels} out of range 1..{jmax} (2**J <= min extent)")
    for n in shape:
        if n % (2 ** levels):
            raise ValueError(
                f"periodic DWT with J={levels} needs extents divisible by {2 ** levels}, got {shape}"
            )


def dwt_forward(v, levels: int, wavelet: str = "db2") -> DwtCoeffs4D:
    h, g = wavelet_filters(wavelet)
    x = as_volume(v)
    _check_levels(x.shape, levels)
    details = []
    for _ in range(levels):
        y = x[None]
        for d in range(NDIM):
            lo = _analysis_axis(y, h, d + 1)
            hi = _analysis_axis(y, g, d + 1)
            y = np.stack([lo, hi], axis=1).reshape((-1,) + lo.shape[1:])
        details.append(y[1:])
        x = y[0]
    return DwtCoeffs4D(details, x, tuple(v.shape), wavelet)


def dwt_inverse(c: DwtCoeffs4D, wavelet: str = None) -> np.ndarray:
    if wavelet is not None and wavelet != c.wavelet:
        raise ValueError(f"coefficients were computed with {c.wavelet!r}, not {wavelet!r}")
    h, g = wavelet_filters(c.wavelet)
    x = c.approx
    for det in reversed(c.details):
        if det.shape[1:] != x.shape or det.shape[0] != 15:
            raise ValueError("detail subbands do not match the approximation extents")
        y = np.concatenate([x[None], det], axis=0)
        for d in range(NDIM - 1, -1, -1):
            y = y.reshape((-1, 2) + y.shape[1:])
            y = _synthesis_axis(y[:, 0], h, d + 1) + _synthesis_axis(y[:, 1], g, d + 1)
        x = y[0]
    if x.shape != tuple(c.shape):
        raise ValueError("coefficient metadata does not match the reconstructed extents")
    return x
