"""Parallel-beam dynamic tomography operator (block diagonal over time).

Each time step ``t`` owns a list of projection angles.  Every z-slice of frame
``t`` is projected with the same 2D ray transform, discretized by Joseph's
method (linear interpolation between the two pixel centres nearest the ray in
each column, or row, crossed).  The operator for one angle list is a sparse
matrix, so the backprojection is its exact transpose.

Coordinates: pixel ``(i, j)`` of a slice ``[x, y]`` has centre
``((i - (nx-1)/2) * pixel_size, (j - (ny-1)/2) * pixel_size)``.  For angle
``theta`` the ray direction is ``(cos theta, sin theta)`` and detector bin
``k`` sits at offset ``(k - (n_det-1)/2) * det_spacing`` along
``(-sin theta, cos theta)``.  At ``theta = 0`` rays run along x.

Projection data for time ``t`` is an array ``(n_angles_t, nz, n_det)``; the
flat vector concatenates steps in time order, each C-ordered.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from ._linalg import power_iteration

logger = logging.getLogger(__name__)

GOLDEN = np.pi * (np.sqrt(5.0) - 1.0) / 2.0


def default_detector_count(n: int) -> int:
    """Smallest count >= sqrt(2)*n with the parity of n (covers the slice diagonal)."""
    m = int(np.ceil(np.sqrt(2.0) * n - 1e-9))
    if (m - n) % 2:
        m += 1
    return m


@dataclass
class Geometry:
    nx: int
    ny: int
    nz: int
    nt: int
    angles: List[np.ndarray]
    n_det: Optional[int] = None
    pixel_size: float = 1.0
    det_spacing: Optional[float] = None

    def __post_init__(self):
        for name in ("nx", "ny", "nz", "nt"):
            if int(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be positive")
        self.angles = [np.atleast_1d(np.asarray(a, dtype=np.float64)) for a in self.angles]
        if len(self.angles) != self.nt:
            raise ValueError(f"need one angle list per time step ({self.nt}), got {len(self.angles)}")
        if any(a.size == 0 for a in self.angles):
            raise ValueError("every time step needs at least one angle")
        if self.det_spacing is None:
            self.det_spacing = self.pixel_size
        if self.n_det is None:
            self.n_det = default_detector_count(max(self.nx, self.ny))

    @property
    def extents(self) -> Tuple[int, int, int, int]:
        return (self.nx, self.ny, self.nz, self.nt)

    def data_shape(self, t: int) -> Tuple[int, int, int]:
        return (self.angles[t].size, self.nz, self.n_det)

    def refined(self) -> "Geometry":
        """Same scanner at twice the slice resolution and twice the detector bins."""
        return Geometry(2 * self.nx, 2 * self.ny, self.nz, self.nt, self.angles,
                        2 * self.n_det, self.pixel_size / 2, self.det_spacing / 2)

    def to_dict(self) -> dict:
        return {
            "nx": self.nx, "ny": self.ny, "nz": self.nz, "nt": self.nt,
            "n_det": self.n_det, "pixel_size": self.pixel_size,
            "det_spacing": self.det_spacing,
            "angles": [a.tolist() for a in self.angles],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Geometry":
        keys = {"nx", "ny", "nz", "nt", "angles", "n_det", "pixel_size", "det_spacing"}
        unknown = set(d) - keys
        if unknown:
            raise ValueError(f"unknown geometry keys: {sorted(unknown)}")
        return cls(**d)


def parallel_geometry(n: int, nz: int, nt: int, n_angles: int, schedule: str = "same",
                      n_det: Optional[int] = None) -> Geometry:
    """Square slices with ``n_angles`` equispaced angles over [0, pi) per step.

    ``schedule="golden"`` rotates the set by a golden-angle offset each step.
    """
    base = np.pi * np.arange(n_angles) / n_angles
    if schedule == "same":
        angles = [base.copy() for _ in range(nt)]
    elif schedule == "golden":
        angles = [np.sort(np.mod(base + t * GOLDEN, np.pi)) for t in range(nt)]
    else:
        raise ValueError(f"unknown angle schedule {schedule!r}; use 'same' or 'golden'")
    return Geometry(n, n, nz, nt, angles, n_det)


@dataclass
class ProjectionData:
    """Sinograms per time step, each of shape ``(n_angles_t, nz, n_det)``."""

    data: List[np.ndarray]

    def as_vector(self) -> np.ndarray:
        return np.concatenate([d.ravel() for d in self.data])

    def like(self, vec) -> "ProjectionData":
        out, pos = [], 0
        for d in self.data:
            out.append(np.asarray(vec[pos:pos + d.size], dtype=np.float64).reshape(d.shape))
            pos += d.size
        if pos != len(vec):
            raise ValueError("vector length does not match the projection layout")
        return ProjectionData(out)

    def __sub__(self, other):
        return ProjectionData([a - b for a, b in zip(self.data, other.data)])

    def norm_sq(self) -> float:
        return float(sum(np.sum(d * d) for d in self.data))

    def dot(self, other) -> float:
        return float(sum(np.sum(a * b) for a, b in zip(self.data, other.data)))

    def max(self) -> float:
        return float(max(d.max() for d in self.data))


def _joseph_rows(theta, nx, ny, n_det, ps, ds):
    """COO triplets (row=bin, col=pixel, weight) for one angle."""
    c, s = np.cos(theta), np.sin(theta)
    u = (np.arange(n_det) - (n_det - 1) / 2) * ds
    if abs(c) >= abs(s):
        # march over x columns; y = u / cos + x tan
        xs = (np.arange(nx) - (nx - 1) / 2) * ps
        pos = u[:, None] / c + xs[None, :] * (s / c)
        frac = pos / ps + (ny - 1) / 2
        step = ps / abs(c)
        march_idx = np.broadcast_to(np.arange(nx), frac.shape)
        n_other, along_x = ny, True
    else:
        # march over y rows; x = -u / sin + y cot
        ys = (np.arange(ny) - (ny - 1) / 2) * ps
        pos = -u[:, None] / s + ys[None, :] * (c / s)
        frac = pos / ps + (nx - 1) / 2
        step = ps / abs(s)
        march_idx = np.broadcast_to(np.arange(ny), frac.shape)
        n_other, along_x = nx, False
    j0 = np.floor(frac).astype(np.int64)
    w1 = frac - j0
    bins = np.broadcast_to(np.arange(n_det)[:, None], frac.shape)
    rows, cols, vals = [], [], []
    for jj, ww in ((j0, 1.0 - w1), (j0 + 1, w1)):
        ok = (jj >= 0) & (jj < n_other) & (ww > 0)
        if along_x:
            pix = march_idx[ok] * ny + jj[ok]
        else:
            pix = jj[ok] * ny + march_idx[ok]
        rows.append(bins[ok])
        cols.append(pix)
        vals.append(step * ww[ok])
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


@lru_cache(maxsize=64)
def _system_matrix(angles: Tuple[float, ...], nx, ny, n_det, ps, ds) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for a, theta in enumerate(angles):
        r, c, v = _joseph_rows(theta, nx, ny, n_det, ps, ds)
        rows.append(r + a * n_det)
        cols.append(c)
        vals.append(v)
    m = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(angles) * n_det, nx * ny),
    )
    return m.tocsr()


def system_matrix(g: Geometry, t: int) -> sp.csr_matrix:
    """Sparse ray-transform matrix for step ``t``; rows (angle, bin), columns (x, y)."""
    return _system_matrix(tuple(float(a) for a in g.angles[t]), g.nx, g.ny, g.n_det,
                          float(g.pixel_size), float(g.det_spacing))


def _check_volume(v, g: Geometry):
    v = np.asarray(v, dtype=np.float64)
    if v.shape != g.extents:
        raise ValueError(f"volume extents {v.shape} do not match geometry {g.extents}")
    return v


def project(v, g: Geometry) -> ProjectionData:
    v = _check_volume(v, g)
    out = []
    for t in range(g.nt):
        m = system_matrix(g, t)
        slab = v[..., t].reshape(g.nx * g.ny, g.nz)
        res = m @ slab                                     # (angles*n_det, nz)
        out.append(res.reshape(g.angles[t].size, g.n_det, g.nz).transpose(0, 2, 1).copy())
    return ProjectionData(out)


def backproject(p: ProjectionData, g: Geometry) -> np.ndarray:
    """Exact adjoint of :func:`project`."""
    if len(p.data) != g.nt:
        raise ValueError(f"projection data has {len(p.data)} steps, geometry {g.nt}")
    v = np.zeros(g.extents)
    for t in range(g.nt):
        d = np.asarray(p.data[t], dtype=np.float64)
        if d.shape != g.data_shape(t):
            raise ValueError(f"step {t}: data shape {d.shape} != {g.data_shape(t)}")
        m = system_matrix(g, t)
        rows = d.transpose(0, 2, 1).reshape(-1, g.nz)
        v[..., t] = (m.T @ rows).reshape(g.nx, g.ny, g.nz)
    return v


def operator_norm_sq(g: Geometry, tol: float = 1e-3, max_iter: int = 500, seed: int = 0,
                     return_report: bool = False):
    """Power-iteration estimate of lambda_max(A^T A)."""
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal(g.extents)
    rep = power_iteration(lambda x: backproject(project(x, g), g), x0, tol=tol, max_iter=max_iter)
    if not rep.converged:
        logger.warning("operator norm estimate did not converge in %d iterations", rep.iterations)
    return rep if return_report else rep.value


def simulate_measurements(phantom_hi, g: Geometry, noise_rel: float = 0.05,
                          seed: int = 0) -> ProjectionData:
    """Project a 2x-resolution phantom, average detector pairs, add Gaussian noise.

    The noise standard deviation is ``noise_rel`` times the largest noiseless
    datum.  ``phantom_hi`` may also be a callable ``(t, k) -> fine 3D frame``
    giving the object seen by angle ``k`` of step ``t`` (motion within a step).
    """
    fine = g.refined()
    if callable(phantom_hi):
        clean = _project_per_angle(phantom_hi, fine)
    else:
        ph = np.asarray(phantom_hi, dtype=np.float64)
        if ph.shape != fine.extents:
            raise ValueError(
                f"fine phantom must have extents {fine.extents} (2x in x and y), got {ph.shape}"
            )
        clean = project(ph, fine)
    coarse = [0.5 * (d[..., 0::2] + d[..., 1::2]) for d in clean.data]
    if noise_rel < 0:
        raise ValueError("noise_rel must be non-negative")
    if noise_rel == 0:
        return ProjectionData(coarse)
    peak = max(float(np.max(d)) for d in coarse)
    sigma = noise_rel * peak
    rng = np.random.default_rng(seed)
    noisy = [d + sigma * rng.standard_normal(d.shape) for d in coarse]
    return ProjectionData(noisy)


def _project_per_angle(frame_fn, g: Geometry) -> ProjectionData:
    out = []
    for t in range(g.nt):
        rows = []
        for k, theta in enumerate(g.angles[t]):
            f3 = np.asarray(frame_fn(t, k), dtype=np.float64)
            if f3.shape != (g.nx, g.ny, g.nz):
                raise ValueError(f"frame for step {t} angle {k} has shape {f3.shape}")
            m = _system_matrix((float(theta),), g.nx, g.ny, g.n_det,
                               float(g.pixel_size), float(g.det_spacing))
            rows.append((m @ f3.reshape(g.nx * g.ny, g.nz)).T)
        out.append(np.stack(rows))
    return ProjectionData(out)
