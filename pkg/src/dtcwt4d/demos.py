"""Property experiments: shift invariance, directional selectivity and
single-subband reconstructions of the growing ball."""
from __future__ import annotations

import numpy as np

from .dwt4d import DwtCoeffs4D, dwt_forward, dwt_inverse
from .phantoms import PhantomSpec, growing_ball
from .transform4d import ORTHANT_SIGNS, Coeffs4D, forward, inverse


def gaussian_blob(shape, centre, sigma):
    grids = np.meshgrid(*[np.arange(n, dtype=float) for n in shape], indexing="ij")
    r2 = sum((g - c) ** 2 for g, c in zip(grids, centre))
    return np.exp(-r2 / (2.0 * sigma ** 2))


def _weighted_cv(energies):
    """Energy-weighted mean over subbands of std/mean across shifts.

    ``energies`` has shape ``(n_shifts, n_subbands)``.
    """
    mean = energies.mean(axis=0)
    keep = mean > 1e-12 * mean.max()
    cv = energies[:, keep].std(axis=0) / mean[keep]
    return float(np.sum(cv * mean[keep]) / np.sum(mean[keep]))


def shift_invariance_experiment(shape=(32, 16, 16, 16), levels=2, sigma=2.0, n_shifts=8,
                                bank=None, wavelet="db2"):
    """Coarsest-level wavelet subband energies of a blob shifted along x.

    Returns per-shift energies and the weighted coefficient of variation for
    both transforms.
    """
    centre = [(n - 1) / 2 for n in shape]
    centre[0] -= n_shifts / 2
    e_c, e_w = [], []
    for s in range(n_shifts):
        c = list(centre)
        c[0] += s
        blob = gaussian_blob(shape, c, sigma)
        hp = forward(blob, levels, bank).highpasses[-1]           # (15, 8, ...)
        e_c.append(np.sum(np.abs(hp) ** 2, axis=(2, 3, 4, 5)).ravel())
        det = dwt_forward(blob, levels, wavelet).details[-1]      # (15, ...)
        e_w.append(np.sum(det ** 2, axis=(1, 2, 3, 4)))
    e_c = np.array(e_c)
    e_w = np.array(e_w)
    return {
        "energies_dtcwt": e_c,
        "energies_dwt": e_w,
        "cv_dtcwt": _weighted_cv(e_c),
        "cv_dwt": _weighted_cv(e_w),
    }


def orthant_wave_vector(zeta, magnitude):
    s = ORTHANT_SIGNS[zeta - 1]
    return magnitude * np.array([s[0], s[1], s[2], 1.0])


def plane_wave(shape, k, window=True):
    grids = np.meshgrid(*[np.arange(n, dtype=float) - (n - 1) / 2 for n in shape], indexing="ij")
    phase = sum(kd * g for kd, g in zip(k, grids))
    wave = np.cos(phase)
    if window:
        for d, n in enumerate(shape):
            w = np.hanning(n + 2)[1:-1]
            wave = wave * w.reshape([-1 if i == d else 1 for i in range(4)])
    return wave


def directionality_experiment(shape=(16, 16, 16, 16), levels=2, magnitude=3 * np.pi / 8,
                              kappa=15, window=False, bank=None):
    """Share of the HHHH coarsest-level energy captured by each wave's orthant.

    Row ``zeta - 1`` of ``shares`` holds the energy fractions over the eight
    orthant subbands for the wave aimed at orthant ``zeta``.
    """
    shares = np.zeros((8, 8))
    for zeta in range(1, 9):
        wave = plane_wave(shape, orthant_wave_vector(zeta, magnitude), window)
        band = forward(wave, levels, bank).highpasses[-1][kappa - 1]   # (8, ...)
        e = np.sum(np.abs(band) ** 2, axis=(1, 2, 3, 4))
        shares[zeta - 1] = e / e.sum()
    return {"shares": shares, "matching": np.diag(shares).copy()}


def single_subband_dtcwt(c: Coeffs4D, level, kappa, zeta=None):
    """Zero all coefficients except configuration ``kappa`` at ``level`` (optionally one orthant)."""
    out = Coeffs4D([None if h is None else np.zeros_like(h) for h in c.highpasses],
                   np.zeros_like(c.lowpass), c.shape, c.bank, c.normalization)
    if kappa == 0:
        src, dst = c.lowpass, out.lowpass
        sel = slice(None) if zeta is None else slice(zeta - 1, zeta)
        dst[sel] = src[sel]
        return out
    sel = slice(None) if zeta is None else slice(zeta - 1, zeta)
    out.highpasses[level - 1][kappa - 1, sel] = c.highpasses[level - 1][kappa - 1, sel]
    return out


def single_subband_dwt(c: DwtCoeffs4D, level, kappa):
    det = [np.zeros_like(d) for d in c.details]
    approx = np.zeros_like(c.approx)
    if kappa == 0:
        approx[...] = c.approx
    else:
        det[level - 1][kappa - 1] = c.details[level - 1][kappa - 1]
    return DwtCoeffs4D(det, approx, c.shape, c.wavelet)


def growing_ball_subbands(spec: PhantomSpec = None, levels=2, kappa=15, zeta=1, bank=None, wavelet="db2"):
    """Reconstructions of the growing ball from one configuration at the coarsest level.

    Returns the phantom, the DT-CWT reconstruction from orthant ``zeta`` and
    the DWT reconstruction, plus subband energies of both transforms.
    """
    spec = spec or PhantomSpec(kind="growing_ball", extents=(16, 16, 16, 16),
                               radius_start=1.5, radius_end=6.0, supersample=4)
    ball = growing_ball(spec)
    c = forward(ball, levels, bank)
    w = dwt_forward(ball, levels, wavelet)
    rec_c = inverse(single_subband_dtcwt(c, levels, kappa, zeta), bank)
    rec_w = dwt_inverse(single_subband_dwt(w, levels, kappa))
    energy_c = np.sum(np.abs(c.highpasses[-1]) ** 2, axis=(2, 3, 4, 5))    # (15, 8)
    energy_w = np.sum(w.details[-1] ** 2, axis=(1, 2, 3, 4))               # (15,)
    return {"phantom": ball, "dtcwt": rec_c, "dwt": rec_w,
            "energies_dtcwt": energy_c, "energies_dwt": energy_w}
