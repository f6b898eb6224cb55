"""Forward, inverse and adjoint 4D dual-tree complex wavelet transform.

Conventions
-----------
Volumes are real float64 arrays indexed ``[x, y, z, t]``; every extent must be
even.

*Configuration* ``kappa`` (0..15) is a 4-bit high-pass mask read left to right
as ``x y z t``: ``kappa = 8*hx + 4*hy + 2*hz + ht``.  ``kappa = 0`` is LLLL,
``0b0010`` is LLHL.

*Tree index* ``iota`` (0..15) uses the same bit order with bit set for tree
``b``: ``aaaa = 0``, ``aaab = 1``, ..., ``bbbb = 15``.

*Orthant* ``zeta`` (1..8) fixes the imaginary-unit signs ``(I_x, I_y, I_z)``;
bit 0 of ``zeta - 1`` conjugates x, bit 1 y, bit 2 z, and ``I_t = +i``.

For each configuration the 16 real partial transforms ``P_iota`` are the
polyphase components of one separable filtering pass: tree ``a`` samples sit
at even and tree ``b`` samples at odd positions along each axis.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import _axis
from .filterbank import DEFAULT_BANK, FilterBank, builtin_filter_bank

logger = logging.getLogger(__name__)

__all__ = [
    "Coeffs4D",
    "DualTree4D",
    "ORTHANT_SIGNS",
    "REAL_SIGNS",
    "IMAG_SIGNS",
    "max_levels",
    "analyze_level1",
    "analyze_qshift",
    "combine_orthants",
    "split_orthants",
    "interleave_scaling",
    "deinterleave_scaling",
    "forward",
    "inverse",
    "adjoint",
]

NDIM = 4
N_CONFIG = 16
N_ORTHANT = 8

# (s_x, s_y, s_z) with I_d = s_d * i; row zeta - 1.
ORTHANT_SIGNS = np.array(
    [[1 - 2 * ((z >> d) & 1) for d in range(3)] for z in range(N_ORTHANT)], dtype=int
)


def _tree_bits(iota):
    return [(iota >> (NDIM - 1 - d)) & 1 for d in range(NDIM)]


def _build_sign_tables():
    real = np.zeros((N_ORTHANT, N_CONFIG))
    imag = np.zeros((N_ORTHANT, N_CONFIG))
    for z in range(N_ORTHANT):
        signs = list(ORTHANT_SIGNS[z]) + [1]
        for iota in range(N_CONFIG):
            bits = _tree_bits(iota)
            nb = sum(bits)
            prod = int(np.prod([s for s, b in zip(signs, bits) if b])) if nb else 1
            # i**nb: real for even nb, imaginary for odd nb
            if nb % 2 == 0:
                real[z, iota] = (-1) ** (nb // 2) * prod
            else:
                imag[z, iota] = (-1) ** ((nb - 1) // 2) * prod
    real.setflags(write=False)
    imag.setflags(write=False)
    return real, imag


REAL_SIGNS, IMAG_SIGNS = _build_sign_tables()

_NORMALIZATIONS = {
    # analysis, inverse split, adjoint split
    "standard": (0.5, 0.25, 0.5),
    "parseval": (8 ** -0.5, 8 ** -0.5, 8 ** -0.5),
}


def _factors(normalization):
    try:
        return _NORMALIZATIONS[normalization]
    except KeyError:
        raise ValueError(
            f"unknown normalization {normalization!r}; use one of {sorted(_NORMALIZATIONS)}"
        ) from None


# -- shapes -------------------------------------------------------------------

def _check_extents(extents):
    extents = tuple(int(e) for e in extents)
    if len(extents) != NDIM:
        raise ValueError(f"expected 4 extents, got {len(extents)}")
    for e in extents:
        if e <= 0 or e % 2:
            raise ValueError(f"all extents must be even and positive, got {extents}")
    return extents


def max_levels(extents: Sequence[int]) -> int:
    """Largest ``J`` with ``2**J <= min(extents)``."""
    extents = _check_extents(extents)
    return int(np.floor(np.log2(min(extents))))


def as_volume(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != NDIM:
        raise ValueError(f"volume must be 4-dimensional, got shape {arr.shape}")
    _check_extents(arr.shape)
    if not np.all(np.isfinite(arr)):
        raise ValueError("volume contains non-finite samples")
    return arr


@dataclass(frozen=True)
class _Level:
    input_shape: Tuple[int, ...]     # interleaved input before padding
    padded: Tuple[bool, ...]         # axes extended by one sample at each end
    band_shape: Tuple[int, ...]      # subband (P_iota) extents


def _plan(shape, levels) -> List[_Level]:
    plan = []
    cur = tuple(shape)
    for j in range(1, levels + 1):
        if j == 1:
            padded = (False,) * NDIM
            stacked = cur
        else:
            padded = tuple(n % 4 != 0 for n in cur)
            stacked = tuple((n + 2 * p) // 2 for n, p in zip(cur, padded))
        plan.append(_Level(cur, padded, tuple(n // 2 for n in stacked)))
        cur = stacked
    return plan


# -- P_iota blocks ------------------------------------------------------------

def split_trees(y: np.ndarray) -> np.ndarray:
    """Polyphase split of the last four axes: ``(..., n1..n4) -> (..., 16, n1/2..n4/2)``."""
    lead = y.shape[:-NDIM]
    sp = y.shape[-NDIM:]
    r = y.reshape(lead + sum(((n // 2, 2) for n in sp), ()))
    nl = len(lead)
    parity = [nl + 2 * d + 1 for d in range(NDIM)]
    half = [nl + 2 * d for d in range(NDIM)]
    r = r.transpose(list(range(nl)) + parity + half)
    return r.reshape(lead + (N_CONFIG,) + tuple(n // 2 for n in sp))


def deinterleave_scaling(s: np.ndarray) -> np.ndarray:
    """Inverse of :func:`interleave_scaling`."""
    return split_trees(s)


def interleave_scaling(p: np.ndarray) -> np.ndarray:
    """Place the 16 ``P_iota`` blocks on a grid of twice the extents.

    Parity ``(e_x, e_y, e_z, e_t)`` of an output sample selects tree ``b`` on
    odd and tree ``a`` on even coordinates.
    """
    if p.shape[-NDIM - 1] != N_CONFIG:
        raise ValueError("expected 16 P blocks before the spatial axes")
    lead = p.shape[:-NDIM - 1]
    sp = p.shape[-NDIM:]
    nl = len(lead)
    r = p.reshape(lead + (2,) * NDIM + sp)
    order = list(range(nl))
    for d in range(NDIM):
        order += [nl + NDIM + d, nl + d]
    r = r.transpose(order)
    return r.reshape(lead + tuple(2 * n for n in sp))


def combine_orthants(p: np.ndarray, normalization: str = "standard") -> np.ndarray:
    """Signed sums of the 16 ``P_iota`` into 8 complex orthant subbands.

    ``p`` has shape ``(..., 16, n1, n2, n3, n4)``; the result replaces the
    16-axis by an 8-axis (``zeta - 1``).
    """
    if p.shape[-NDIM - 1] != N_CONFIG:
        raise ValueError("expected 16 P blocks before the spatial axes")
    scale = _factors(normalization)[0]
    flat = p.reshape(p.shape[:-NDIM] + (-1,))
    out = np.empty(p.shape[:-NDIM - 1] + (N_ORTHANT,) + p.shape[-NDIM:], dtype=np.complex128)
    oflat = out.reshape(out.shape[:-NDIM] + (-1,))
    oflat.real = REAL_SIGNS @ flat
    oflat.imag = IMAG_SIGNS @ flat
    out *= scale
    return out


def split_orthants(c: np.ndarray, normalization: str = "inverse", scheme: str = "standard") -> np.ndarray:
    """Recover the 16 ``P_iota`` from 8 orthant subbands.

    ``normalization`` is ``"inverse"`` (factor 1/4 under the standard scheme) or
    ``"adjoint"`` (factor 1/2).
    """
    if c.shape[-NDIM - 1] != N_ORTHANT:
        raise ValueError("expected 8 orthant arrays before the spatial axes")
    if normalization not in ("inverse", "adjoint"):
        raise ValueError(f"normalization must be 'inverse' or 'adjoint', got {normalization!r}")
    _, inv, adj = _factors(scheme)
    scale = inv if normalization == "inverse" else adj
    lead = c.shape[:-NDIM]
    p = REAL_SIGNS.T @ c.real.reshape(lead + (-1,))
    p += IMAG_SIGNS.T @ c.imag.reshape(lead + (-1,))
    p *= scale
    return p.reshape(c.shape[:-NDIM - 1] + (N_CONFIG,) + c.shape[-NDIM:])


# -- analysis stages ----------------------------------------------------------

def _analysis_stack(x, lo_fn, hi_fn):
    y = x[None]
    for d in range(NDIM):
        lo = lo_fn(y, d + 1)
        hi = hi_fn(y, d + 1)
        y = np.stack([lo, hi], axis=1).reshape((-1,) + lo.shape[1:])
    return y


def _level1_stack(x, fb: FilterBank):
    l1 = fb.level1
    if min(x.shape) < 2:
        raise ValueError("volume too small for the level-1 filters")
    return _analysis_stack(
        x,
        lambda y, ax: _axis.filter_undecimated(y, l1.analysis_low, ax),
        lambda y, ax: _axis.filter_undecimated(y, l1.analysis_high, ax),
    )


def _qshift_stack(s, fb: FilterBank):
    q = fb.qshift
    return _analysis_stack(
        s,
        lambda y, ax: _axis.qshift_analysis(y, q.tree_a_low, q.tree_b_low, ax),
        lambda y, ax: _axis.qshift_analysis(y, q.tree_a_high, q.tree_b_high, ax),
    )


def analyze_level1(v, fb: Optional[FilterBank] = None):
    """First decomposition level.

    Returns ``(scaling, details)``: the LLLL block of shape ``(16, *n/2)`` and
    the wavelet blocks of shape ``(15, 16, *n/2)`` (configurations 1..15).
    """
    fb = fb or builtin_filter_bank(DEFAULT_BANK)
    p = split_trees(_level1_stack(as_volume(v), fb))
    return p[0], p[1:]


def analyze_qshift(s, fb: Optional[FilterBank] = None):
    """One q-shift level on an interleaved scaling array (extents multiples of 4)."""
    fb = fb or builtin_filter_bank(DEFAULT_BANK)
    s = np.asarray(s, dtype=np.float64)
    if any(n % 2 for n in s.shape):
        raise ValueError(f"q-shift level needs even extents, got {s.shape}")
    p = split_trees(_qshift_stack(s, fb))
    return p[0], p[1:]


# -- coefficient container ----------------------------------------------------

@dataclass
class Coeffs4D:
    """Complex DT-CWT coefficients.

    ``highpasses[j - 1]`` has shape ``(15, 8, *band)`` indexed
    ``[kappa - 1, zeta - 1]``, or is ``None`` when level-1 details were
    discarded.  ``lowpass`` holds the 8 final scaling subbands, ``(8, *band)``.
    """

    highpasses: List[Optional[np.ndarray]]
    lowpass: np.ndarray
    shape: Tuple[int, ...]
    bank: str = DEFAULT_BANK
    normalization: str = "standard"

    @property
    def levels(self) -> int:
        return len(self.highpasses)

    @property
    def level1_details_included(self) -> bool:
        return self.highpasses[0] is not None

    def subband(self, level: int, kappa: int, zeta: int) -> np.ndarray:
        if kappa == 0:
            if level != self.levels:
                raise KeyError("scaling subbands exist only at the final level")
            return self.lowpass[zeta - 1]
        band = self.highpasses[level - 1]
        if band is None:
            raise KeyError(f"level {level} details are not stored")
        return band[kappa - 1, zeta - 1]

    def arrays(self):
        return [h for h in self.highpasses if h is not None] + [self.lowpass]

    def to_vector(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_vector(self, vec) -> "Coeffs4D":
        """Same layout, values taken from a flat vector (inverse of :meth:`to_vector`)."""
        vec = np.asarray(vec)
        pos = 0
        out = []
        for h in self.highpasses:
            if h is None:
                out.append(None)
                continue
            out.append(vec[pos:pos + h.size].reshape(h.shape).astype(np.complex128))
            pos += h.size
        low = vec[pos:pos + self.lowpass.size].reshape(self.lowpass.shape).astype(np.complex128)
        if pos + low.size != vec.size:
            raise ValueError("vector length does not match the coefficient layout")
        return Coeffs4D(out, low, self.shape, self.bank, self.normalization)

    def scaling_mask(self) -> np.ndarray:
        """Boolean mask over :meth:`to_vector` marking the final scaling subbands."""
        n_hi = sum(h.size for h in self.highpasses if h is not None)
        mask = np.zeros(n_hi + self.lowpass.size, dtype=bool)
        mask[n_hi:] = True
        return mask

    def zeros_like(self) -> "Coeffs4D":
        return self.with_vector(np.zeros(self.to_vector().size, dtype=np.complex128))

    def energy(self) -> float:
        return float(sum(np.vdot(a, a).real for a in self.arrays()))


def inner(c1: Coeffs4D, c2: Coeffs4D) -> float:
    """Real part of the Hermitian inner product on coefficient space."""
    return float(sum(np.vdot(a, b).real for a, b in zip(c1.arrays(), c2.arrays())))


# -- transforms ---------------------------------------------------------------

def _resolve_bank(fb):
    if fb is None:
        return builtin_filter_bank(DEFAULT_BANK)
    if isinstance(fb, str):
        return builtin_filter_bank(fb)
    return fb


def forward(v, levels: int, fb=None, include_level1_details: bool = True,
            normalization: str = "standard") -> Coeffs4D:
    """Analysis operator: volume -> complex coefficients."""
    fb = _resolve_bank(fb)
    x = as_volume(v)
    jmax = max_levels(x.shape)
    if not 1 <= levels <= jmax:
        raise ValueError(
            f"levels={levels} out of range: need 1 <= J with 2**J <= min extent "
            f"{min(x.shape)} (J <= {jmax})"
        )
    _factors(normalization)
    plan = _plan(x.shape, levels)
    highpasses = []
    s = x
    p = None
    for j, lev in enumerate(plan, start=1):
        if j == 1:
            y = _level1_stack(s, fb)
        else:
            for ax, padded in enumerate(lev.padded):
                if padded:
                    s = _axis.pad_edges(s, ax)
            y = _qshift_stack(s, fb)
        p = split_trees(y)
        if j > 1 or include_level1_details:
            highpasses.append(combine_orthants(p[1:], normalization))
        else:
            highpasses.append(None)
        s = y[0]
    lowpass = combine_orthants(p[0], normalization)
    return Coeffs4D(highpasses, lowpass, tuple(x.shape), fb.name, normalization)


def _synthesize(c: Coeffs4D, fb: FilterBank, mode: str, allow_lossy: bool) -> np.ndarray:
    if not c.level1_details_included and not allow_lossy:
        raise ValueError(
            "imperfect reconstruction: level-1 details missing "
            "(pass allow_lossy=True to reconstruct with zeros there)"
        )
    plan = _plan(c.shape, c.levels)
    l1 = fb.level1
    q = fb.qshift
    s = None
    for j in range(c.levels, 0, -1):
        lev = plan[j - 1]
        hp = c.highpasses[j - 1]
        if hp is None:
            p_hi = np.zeros((N_CONFIG - 1, N_CONFIG) + lev.band_shape)
        else:
            p_hi = split_orthants(hp, mode, c.normalization)
        if j == c.levels:
            y0 = interleave_scaling(split_orthants(c.lowpass, mode, c.normalization))
        else:
            y0 = s
        y = np.concatenate([y0[None], interleave_scaling(p_hi)], axis=0)
        for d in range(NDIM - 1, -1, -1):
            y = y.reshape((-1, 2) + y.shape[1:])
            lo, hi = y[:, 0], y[:, 1]
            ax = d + 1
            if j == 1:
                if mode == "inverse":
                    g0, g1 = l1.synthesis_low, l1.synthesis_high
                else:
                    g0, g1 = l1.analysis_low[::-1], l1.analysis_high[::-1]
                y = _axis.filter_undecimated(lo, g0, ax) + _axis.filter_undecimated(hi, g1, ax)
            else:
                y = (_axis.qshift_analysis_transpose(lo, q.tree_a_low, q.tree_b_low, ax)
                     + _axis.qshift_analysis_transpose(hi, q.tree_a_high, q.tree_b_high, ax))
        s = y[0]
        for ax, padded in enumerate(lev.padded):
            if padded:
                s = _axis.crop_edges(s, ax) if mode == "inverse" else _axis.crop_edges_adjoint(s, ax)
    return s


def inverse(c: Coeffs4D, fb=None, allow_lossy: bool = False) -> np.ndarray:
    """Exact synthesis: ``inverse(forward(v)) == v`` up to rounding."""
    return _synthesize(c, _resolve_bank(fb), "inverse", allow_lossy)


def adjoint(c: Coeffs4D, fb=None, allow_lossy: bool = False) -> np.ndarray:
    """Synthesis operator approximating the adjoint of :func:`forward`.

    Same pipeline as :func:`inverse` with the adjoint split factor and the
    level-1 synthesis done by the time-reversed analysis filters.
    """
    return _synthesize(c, _resolve_bank(fb), "adjoint", allow_lossy)


@dataclass
class DualTree4D:
    """A transform bound to its shape, depth, bank and flags."""

    shape: Tuple[int, ...]
    levels: int
    bank: FilterBank = field(default_factory=lambda: builtin_filter_bank(DEFAULT_BANK))
    include_level1_details: bool = True
    normalization: str = "standard"

    def __post_init__(self):
        self.shape = _check_extents(self.shape)
        self.bank = _resolve_bank(self.bank)
        jmax = max_levels(self.shape)
        if not 1 <= self.levels <= jmax:
            raise ValueError(f"levels={self.levels} out of range 1..{jmax} for shape {self.shape}")
        _factors(self.normalization)

    def forward(self, v) -> Coeffs4D:
        return forward(v, self.levels, self.bank, self.include_level1_details, self.normalization)

    def inverse(self, c: Coeffs4D, allow_lossy: bool = False) -> np.ndarray:
        return inverse(c, self.bank, allow_lossy)

    def adjoint(self, c: Coeffs4D) -> np.ndarray:
        return adjoint(c, self.bank, allow_lossy=True)
