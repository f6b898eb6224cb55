"""Directory containers for volumes, coefficients and sinograms.

A container is a directory holding ``manifest.json`` and one raw blob per
array.  Blobs are little-endian float64 in x-fastest (Fortran) order; complex
arrays store real and imaginary parts interleaved per sample.  The manifest
lists every blob with its shape and dtype (``float64`` or ``complex128``).
Manifests carry no timestamps, so equal data gives byte-identical containers.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .dwt4d import DwtCoeffs4D
from .tomo import Geometry, ProjectionData
from .transform4d import Coeffs4D

FORMAT = "dtcwt4d-container"
VERSION = 1
_DTYPES = {"float64": "<f8", "complex128": "<c16"}


def atomic_write_text(path, text: str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_blob(root: Path, name: str, arr: np.ndarray) -> dict:
    kind = "complex128" if np.iscomplexobj(arr) else "float64"
    data = np.asarray(arr, dtype=_DTYPES[kind]).tobytes(order="F")
    fname = name + ".bin"
    with open(root / fname, "wb") as fh:
        fh.write(data)
    return {"name": name, "file": fname, "shape": list(arr.shape), "dtype": kind}


def _read_blob(root: Path, entry: dict) -> np.ndarray:
    dt = _DTYPES.get(entry.get("dtype"))
    if dt is None:
        raise ValueError(f"unsupported blob dtype {entry.get('dtype')!r}")
    shape = tuple(entry["shape"])
    raw = np.fromfile(root / entry["file"], dtype=dt)
    if raw.size != int(np.prod(shape)):
        raise ValueError(f"blob {entry['file']} has {raw.size} samples, expected {int(np.prod(shape))}")
    native = np.float64 if entry["dtype"] == "float64" else np.complex128
    return raw.reshape(shape, order="F").astype(native)


def _write(root, kind, meta, blobs):
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    entries = [_write_blob(root, name, arr) for name, arr in blobs]
    manifest = {"format": FORMAT, "version": VERSION, "kind": kind, "meta": meta, "blobs": entries}
    atomic_write_json(root / "manifest.json", manifest)
    return root


def read_manifest(root) -> dict:
    root = Path(root)
    path = root / "manifest.json"
    if not path.is_file():
        raise FileNotFoundError(f"no container manifest at {path}")
    with open(path) as fh:
        man = json.load(fh)
    if man.get("format") != FORMAT:
        raise ValueError(f"{path} is not a {FORMAT} manifest")
    return man


def _blobs(root, man):
    return {e["name"]: _read_blob(Path(root), e) for e in man["blobs"]}


def save_volume(root, v, meta=None):
    v = np.asarray(v, dtype=np.float64)
    return _write(root, "volume", {"extents": list(v.shape), **(meta or {})}, [("volume", v)])


def load_volume(root) -> np.ndarray:
    man = read_manifest(root)
    if man["kind"] != "volume":
        raise ValueError(f"expected a volume container, found {man['kind']!r}")
    return _blobs(root, man)["volume"]


def _band_name(level, kappa, zeta):
    return f"L{level}_k{kappa:02d}_z{zeta}"


def save_coeffs(root, c):
    if isinstance(c, DwtCoeffs4D):
        meta = {"levels": c.levels, "extents": list(c.shape), "wavelet": c.wavelet, "real": True}
        blobs = [(f"L{j}_k{k:02d}", det[k - 1]) for j, det in enumerate(c.details, 1) for k in range(1, 16)]
        blobs.append((f"L{c.levels}_k00", c.approx))
        return _write(root, "dwt_coeffs", meta, blobs)
    meta = {
        "levels": c.levels,
        "extents": list(c.shape),
        "bank": c.bank,
        "normalization": c.normalization,
        "level1_details_included": c.level1_details_included,
        "real": False,
    }
    blobs = []
    for j, hp in enumerate(c.highpasses, 1):
        if hp is None:
            continue
        for k in range(1, 16):
            for z in range(1, 9):
                blobs.append((_band_name(j, k, z), hp[k - 1, z - 1]))
    for z in range(1, 9):
        blobs.append((_band_name(c.levels, 0, z), c.lowpass[z - 1]))
    return _write(root, "coeffs", meta, blobs)


def load_coeffs(root):
    man = read_manifest(root)
    if man["kind"] not in ("coeffs", "dwt_coeffs"):
        raise ValueError(f"expected a coefficient container, found {man['kind']!r}")
    meta = man["meta"]
    b = _blobs(root, man)
    J = int(meta["levels"])
    if man["kind"] == "dwt_coeffs":
        det = [np.stack([b[f"L{j}_k{k:02d}"] for k in range(1, 16)]) for j in range(1, J + 1)]
        return DwtCoeffs4D(det, b[f"L{J}_k00"], tuple(meta["extents"]), meta["wavelet"])
    hps = []
    for j in range(1, J + 1):
        if j == 1 and not meta["level1_details_included"]:
            hps.append(None)
            continue
        hps.append(np.stack([np.stack([b[_band_name(j, k, z)] for z in range(1, 9)])
                             for k in range(1, 16)]))
    low = np.stack([b[_band_name(J, 0, z)] for z in range(1, 9)])
    return Coeffs4D(hps, low, tuple(meta["extents"]), meta["bank"], meta["normalization"])


def save_sinogram(root, p: ProjectionData, g: Geometry):
    blobs = [(f"t{t:02d}", d) for t, d in enumerate(p.data)]
    return _write(root, "sinogram", {"geometry": g.to_dict(), "axes": ["angle", "z", "bin"]}, blobs)


def load_sinogram(root):
    man = read_manifest(root)
    if man["kind"] != "sinogram":
        raise ValueError(f"expected a sinogram container, found {man['kind']!r}")
    g = Geometry.from_dict(man["meta"]["geometry"])
    b = _blobs(root, man)
    return ProjectionData([b[f"t{t:02d}"] for t in range(g.nt)]), g
