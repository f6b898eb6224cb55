"""8-bit PGM slice export.

A pick is ``(plane, index, time)`` with plane ``xy``, ``xz`` or ``yz``; the
index addresses the remaining spatial axis (z, y or x).  Files are named
``slice_<plane>_<axis><index:03d>_t<time:02d>.pgm``.  Image rows follow the
first plane axis, columns the second.  Intensities map linearly from the
window ``[lo, hi]`` onto 0..255 with clipping.
"""
from pathlib import Path

import numpy as np

PLANES = {"xy": ("z", 2), "xz": ("y", 1), "yz": ("x", 0)}


def parse_pick(text: str):
    """``"xy,32,2"`` -> ``("xy", 32, 2)``."""
    parts = text.split(",")
    if len(parts) != 3 or parts[0] not in PLANES:
        raise ValueError(f"bad pick {text!r}; expected PLANE,INDEX,TIME with PLANE in {sorted(PLANES)}")
    return parts[0], int(parts[1]), int(parts[2])


def slice_name(plane, index, time):
    return f"slice_{plane}_{PLANES[plane][0]}{index:03d}_t{time:02d}.pgm"


def extract(volume, plane, index, time):
    if plane not in PLANES:
        raise ValueError(f"unknown plane {plane!r}")
    axis_name, axis = PLANES[plane]
    n = volume.shape[axis]
    nt = volume.shape[3]
    if not 0 <= index < n:
        raise ValueError(f"{axis_name} index {index} out of range 0..{n - 1}")
    if not 0 <= time < nt:
        raise ValueError(f"time index {time} out of range 0..{nt - 1}")
    return np.take(volume[..., time], index, axis=axis)


def to_bytes(img, window):
    lo, hi = float(window[0]), float(window[1])
    if hi <= lo:
        return np.full(img.shape, 128, dtype=np.uint8)
    scaled = np.clip((img - lo) / (hi - lo), 0.0, 1.0)
    return np.round(scaled * 255.0).astype(np.uint8)


def write_pgm(path, img8):
    img8 = np.ascontiguousarray(img8, dtype=np.uint8)
    rows, cols = img8.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(img8.tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise ValueError(f"{path} is not a binary PGM")
    cols, rows = int(fields[1]), int(fields[2])
    pos += 1    # single whitespace byte before the raster
    return np.frombuffer(data[pos:pos + rows * cols], dtype=np.uint8).reshape(rows, cols)


def default_window(volume):
    return (float(np.min(volume)), float(np.max(volume)))


def export_slices(volume, picks, outdir, window=None):
    """Write one PGM per pick; returns the written paths and the window used."""
    volume = np.asarray(volume, dtype=np.float64)
    window = tuple(window) if window is not None else default_window(volume)
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for plane, index, time in picks:
        img = extract(volume, plane, index, time)
        path = out / slice_name(plane, index, time)
        write_pgm(path, to_bytes(img, window))
        paths.append(path)
    return paths, window
