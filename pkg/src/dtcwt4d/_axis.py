"""One-dimensional filtering along a chosen axis of an n-d array.

All boundaries use half-sample symmetric extension (``d c b a | a b c d``),
repeated as often as needed so that filters longer than the signal work.
"""
import numpy as np
from scipy.ndimage import convolve1d


def reflect_index(i, n):
    """Map integer positions onto ``range(n)`` by half-sample symmetric reflection."""
    i = np.mod(np.asarray(i), 2 * n)
    return np.where(i >= n, 2 * n - 1 - i, i)


def _sl(ndim, axis, s):
    idx = [slice(None)] * ndim
    idx[axis] = s
    return tuple(idx)


def filter_undecimated(x, h, axis):
    """``y[n] = sum_j h[j] x[n + c - j]`` with ``c = (len(h) - 1) // 2``.

    Same length as ``x`` along ``axis``; centred for odd-length filters.
    """
    n = x.shape[axis]
    m = len(h)
    if m % 2:
        # scipy's "reflect" is the same half-sample symmetric extension
        return convolve1d(np.asarray(x, dtype=np.float64), np.asarray(h, dtype=np.float64),
                          axis=axis, mode="reflect")
    c = (m - 1) // 2
    xe = np.take(x, reflect_index(np.arange(c - m + 1, n + c), n), axis=axis)
    y = np.zeros_like(x, dtype=np.result_type(x, np.float64))
    for j in range(m):
        if h[j] != 0.0:
            y += h[j] * xe[_sl(x.ndim, axis, slice(m - 1 - j, m - 1 - j + n))]
    return y


def _qshift_ext(n, m):
    # positions 4k + m - 2j (+1) for k < n/4, j < m span [2 - m, n - 3 + m]
    return reflect_index(np.arange(2 - m, n - 2 + m), n)


def qshift_analysis(x, h_a, h_b, axis):
    """Decimating q-shift analysis along ``axis``.

    ``x`` is tree-interleaved (tree a on even, tree b on odd samples) and its
    length is a multiple of 4.  Returns an array of half the length, again
    tree-interleaved::

        out[2k]     = sum_j h_a[j] x[4k + m - 2j]
        out[2k + 1] = sum_j h_b[j] x[4k + m - 2j + 1]

    where out-of-range positions reflect about the ends of the composite
    signal.  For a q-shift pair with ``h_b = h_a[::-1]`` this map (low and
    high pass together) is orthogonal.
    """
    n = x.shape[axis]
    if n % 4:
        raise ValueError(f"q-shift analysis needs a multiple of 4 samples, got {n}")
    m = len(h_a)
    k = n // 4
    xe = np.take(x, _qshift_ext(n, m), axis=axis)
    shape = list(x.shape)
    shape[axis] = n // 2
    out = np.zeros(shape, dtype=np.result_type(x, np.float64))
    ya = out[_sl(x.ndim, axis, slice(0, None, 2))]
    yb = out[_sl(x.ndim, axis, slice(1, None, 2))]
    for j in range(m):
        s = 2 * m - 2 - 2 * j
        ya += h_a[j] * xe[_sl(x.ndim, axis, slice(s, s + 4 * k, 4))]
        yb += h_b[j] * xe[_sl(x.ndim, axis, slice(s + 1, s + 1 + 4 * k, 4))]
    return out


def qshift_analysis_transpose(y, h_a, h_b, axis):
    """Exact transpose of :func:`qshift_analysis` for one filter pair."""
    half = y.shape[axis]
    n = 2 * half
    m = len(h_a)
    k = n // 4
    ext = _qshift_ext(n, m)
    shape = list(y.shape)
    shape[axis] = ext.size
    xe = np.zeros(shape, dtype=np.result_type(y, np.float64))
    ya = y[_sl(y.ndim, axis, slice(0, None, 2))]
    yb = y[_sl(y.ndim, axis, slice(1, None, 2))]
    for j in range(m):
        s = 2 * m - 2 - 2 * j
        xe[_sl(y.ndim, axis, slice(s, s + 4 * k, 4))] += h_a[j] * ya
        xe[_sl(y.ndim, axis, slice(s + 1, s + 1 + 4 * k, 4))] += h_b[j] * yb
    return fold(xe, ext, n, axis, m - 2)


def fold(xe, ext, n, axis, core):
    """Adjoint of ``np.take(x, ext, axis)``.

    ``ext[core:core + n]`` must be ``range(n)``; only the margins are looped.
    """
    moved_in = np.moveaxis(xe, axis, 0)
    out = moved_in[core:core + n].copy()
    for pos in (*range(core), *range(core + n, ext.size)):
        out[ext[pos]] += moved_in[pos]
    return np.moveaxis(out, 0, axis)


def pad_edges(x, axis):
    """Repeat the first and last sample once along ``axis``."""
    n = x.shape[axis]
    return np.take(x, np.concatenate(([0], np.arange(n), [n - 1])), axis=axis)


def crop_edges(x, axis):
    n = x.shape[axis]
    return x[_sl(x.ndim, axis, slice(1, n - 1))]


def crop_edges_adjoint(x, axis):
    """Adjoint of :func:`pad_edges`."""
    n = x.shape[axis] - 2
    return fold(x, np.concatenate(([0], np.arange(n), [n - 1])), n, axis, 1)
