"""Deterministic 4D test objects: a growing ball and a periodically deforming
multi-ellipsoid phantom.

Both are defined on the continuous cube ``[-1, 1]^3`` (grid cell centres) and
anti-aliased by averaging ``supersample**3`` sub-samples per voxel.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

# centre (x, y, z), semi-axes (a, b, c), rotation about z (rad), additive intensity
DEFAULT_ELLIPSOIDS = (
    ((0.0, 0.0, 0.0), (0.69, 0.82, 0.80), 0.0, 1.0),
    ((0.0, -0.02, 0.0), (0.62, 0.76, 0.74), 0.0, -0.8),
    ((0.22, 0.0, -0.05), (0.11, 0.31, 0.22), -0.31, -0.2),
    ((-0.22, 0.0, -0.05), (0.16, 0.41, 0.28), 0.31, -0.2),
    ((0.0, 0.35, 0.10), (0.21, 0.25, 0.35), 0.0, 0.3),
    ((0.0, -0.40, 0.20), (0.09, 0.09, 0.12), 0.0, 0.4),
)


@dataclass
class PhantomSpec:
    kind: str = "dynamic_ellipsoids"
    extents: Tuple[int, int, int, int] = (32, 32, 32, 8)
    # growing ball: radius in voxels, linear from r0 to r1 over the time axis
    radius_start: float = 2.0
    radius_end: float = 6.0
    # dynamic ellipsoids
    amplitude: float = 0.1
    period: Optional[float] = None        # defaults to the number of time steps
    phases: Tuple[float, float, float] = (0.0, 2 * np.pi / 3, 4 * np.pi / 3)
    intensity: float = 1.0
    supersample: int = 2
    intra_step_motion: bool = False

    def __post_init__(self):
        self.extents = tuple(int(e) for e in self.extents)
        if len(self.extents) != 4 or any(e <= 0 or e % 2 for e in self.extents):
            raise ValueError(f"phantom extents must be 4 positive even integers, got {self.extents}")
        if self.supersample < 1:
            raise ValueError("supersample must be >= 1")
        if self.kind not in ("growing_ball", "dynamic_ellipsoids"):
            raise ValueError(f"unknown phantom kind {self.kind!r}")
        self.phases = tuple(float(p) for p in self.phases)

    @property
    def period_steps(self) -> float:
        return float(self.period) if self.period else float(self.extents[3])

    def to_dict(self):
        return asdict(self)


def _axis_coords(n, ss):
    """Sub-sample coordinates in voxel units relative to the grid centre, shape (n, ss)."""
    off = (np.arange(ss) + 0.5) / ss - 0.5
    return (np.arange(n) - (n - 1) / 2)[:, None] + off[None, :]


def _supersampled(indicator_sum, shape, ss):
    """Average of an (n*ss)^3 evaluation down to ``shape``."""
    nx, ny, nz = shape
    return indicator_sum.reshape(nx, ss, ny, ss, nz, ss).mean(axis=(1, 3, 5))


def ball_radius(spec: PhantomSpec, t: float) -> float:
    nt = spec.extents[3]
    if nt == 1:
        return spec.radius_start
    return spec.radius_start + (spec.radius_end - spec.radius_start) * t / (nt - 1)


def growing_ball(spec: PhantomSpec, scale: Tuple[int, int, int] = (1, 1, 1)) -> np.ndarray:
    """Centred ball of radius ``r(t)`` voxels; ``scale`` refines the grid per axis."""
    nx, ny, nz, nt = spec.extents
    half = min(nx, ny, nz) / 2
    r_all = [ball_radius(spec, t) for t in range(nt)]
    if min(r_all) < 0:
        raise ValueError("ball radius must be non-negative")
    if max(r_all) > half:
        raise ValueError(f"ball radius {max(r_all)} exceeds half-extent {half}")
    ss = spec.supersample
    sx, sy, sz = scale
    cx = _axis_coords(nx * sx, ss).ravel() / sx
    cy = _axis_coords(ny * sy, ss).ravel() / sy
    cz = _axis_coords(nz * sz, ss).ravel() / sz
    d2 = cx[:, None, None] ** 2 + cy[None, :, None] ** 2 + cz[None, None, :] ** 2
    out = np.zeros((nx * sx, ny * sy, nz * sz, nt))
    for t, r in enumerate(r_all):
        out[..., t] = spec.intensity * _supersampled((d2 <= r * r).astype(float),
                                                     (nx * sx, ny * sy, nz * sz), ss)
    return out


def axis_scales(spec: PhantomSpec, t: float) -> np.ndarray:
    """Per-axis stretch factors ``1 + a sin(2 pi t / P + phase_d)``."""
    w = 2 * np.pi * t / spec.period_steps
    return 1.0 + spec.amplitude * np.sin(w + np.asarray(spec.phases))


def ellipsoid_frame(spec: PhantomSpec, t: float, scale=(1, 1, 1), ellipsoids=DEFAULT_ELLIPSOIDS) -> np.ndarray:
    """One 3D frame of the deforming phantom at continuous time ``t`` (steps)."""
    nx, ny, nz, _ = spec.extents
    ss = spec.supersample
    sx, sy, sz = scale
    k = axis_scales(spec, t)
    # normalized coordinates in [-1, 1] (cell centres), undeformed by k
    cx = _axis_coords(nx * sx, ss).ravel() / (nx * sx / 2) / k[0]
    cy = _axis_coords(ny * sy, ss).ravel() / (ny * sy / 2) / k[1]
    cz = _axis_coords(nz * sz, ss).ravel() / (nz * sz / 2) / k[2]
    X = cx[:, None, None]
    Y = cy[None, :, None]
    Z = cz[None, None, :]
    acc = np.zeros((cx.size, cy.size, cz.size))
    for (x0, y0, z0), (a, b, c), phi, val in ellipsoids:
        cp, sn = np.cos(phi), np.sin(phi)
        u = (X - x0) * cp + (Y - y0) * sn
        w = -(X - x0) * sn + (Y - y0) * cp
        acc += val * ((u / a) ** 2 + (w / b) ** 2 + ((Z - z0) / c) ** 2 <= 1.0)
    frame = _supersampled(acc, (nx * sx, ny * sy, nz * sz), ss)
    return spec.intensity * np.clip(frame, 0.0, 1.0)


def _check_fits(spec: PhantomSpec, ellipsoids):
    kmax = 1.0 + abs(spec.amplitude)
    for (x0, y0, z0), (a, b, c), _, _ in ellipsoids:
        r = max(a, b)
        if (max(abs(x0), abs(y0)) + r) * kmax > 1.0 or (abs(z0) + c) * kmax > 1.0:
            raise ValueError(f"amplitude {spec.amplitude} pushes an ellipsoid outside the grid")


def dynamic_ellipsoids(spec: PhantomSpec, scale=(1, 1, 1), ellipsoids=DEFAULT_ELLIPSOIDS) -> np.ndarray:
    _check_fits(spec, ellipsoids)
    nt = spec.extents[3]
    frames = [ellipsoid_frame(spec, t, scale, ellipsoids) for t in range(nt)]
    return np.stack(frames, axis=-1)


def generate(spec: PhantomSpec, scale=(1, 1, 1)) -> np.ndarray:
    if spec.kind == "growing_ball":
        return growing_ball(spec, scale)
    return dynamic_ellipsoids(spec, scale)


def block_average_xy(fine: np.ndarray) -> np.ndarray:
    nx, ny = fine.shape[0] // 2, fine.shape[1] // 2
    return fine.reshape(nx, 2, ny, 2, *fine.shape[2:]).mean(axis=(1, 3))


def fine_and_coarse(spec: PhantomSpec):
    """Phantom at 2x x/y resolution and its 2x2 block average."""
    fine = generate(spec, scale=(2, 2, 1))
    return fine, block_average_xy(fine)


def intra_step_frames(spec: PhantomSpec, angles_per_step: Sequence[int]):
    """Callable ``(t, k) -> fine frame`` evaluating the motion at ``t + k / n_angles``."""
    if spec.kind != "dynamic_ellipsoids":
        raise ValueError("intra-step motion is defined for dynamic_ellipsoids only")
    _check_fits(spec, DEFAULT_ELLIPSOIDS)

    def frame(t, k):
        return ellipsoid_frame(spec, t + k / angles_per_step[t], scale=(2, 2, 1))

    return frame
