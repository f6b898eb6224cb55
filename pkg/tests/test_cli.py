import json

import numpy as np
import pytest

from dtcwt4d import containers, images
from dtcwt4d.cli import main

SMALL_CONFIG = {
    "phantom": {"kind": "dynamic_ellipsoids", "extents": [16, 16, 8, 4], "supersample": 1},
    "scan": {"n_angles": 10, "schedule": "same", "noise_rel": 0.05},
    "solver": {"max_iter": 4, "levels": 2},
    "sparsifiers": {"dtcwt": {"target_sparsity": 0.6}, "dwt": {"target_sparsity": 0.5}},
    "picks": ["xy,4,1"],
}


def files_bytes(root):
    """Bytes of every container file and CSV below ``root`` (run manifest excluded)."""
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.name != "run_manifest.json":
            out[str(p.relative_to(root))] = p.read_bytes()
    return out


def test_transform_forward_inverse(tmp_path, capsys):
    assert main(["transform", "--random", "8,8,8,8", "--levels", "2", "-o", str(tmp_path / "f")]) == 0
    line = capsys.readouterr().out
    err = float(line.split(":")[1])
    assert err < 1e-9
    assert (tmp_path / "f" / "run_manifest.json").is_file()
    assert main(["transform", str(tmp_path / "f" / "coeffs"), "--direction", "inverse",
                 "-o", str(tmp_path / "i")]) == 0
    v = containers.load_volume(tmp_path / "f" / "input")
    r = containers.load_volume(tmp_path / "i" / "volume")
    assert np.linalg.norm(r - v) / np.linalg.norm(v) < 1e-9


def test_transform_stored_volume(tmp_path, capsys):
    v = np.random.default_rng(0).standard_normal((8, 8, 8, 4))
    containers.save_volume(tmp_path / "vol", v)
    assert main(["transform", str(tmp_path / "vol"), "--levels", "1", "-o", str(tmp_path / "o")]) == 0
    assert "round-trip relative error" in capsys.readouterr().out


def test_transform_levels_too_large(tmp_path, capsys):
    code = main(["transform", "--random", "8,8,8,8", "--levels", "4", "-o", str(tmp_path)])
    assert code == 2
    assert "2^J" in capsys.readouterr().err


def test_transform_adjoint_check(tmp_path, capsys):
    main(["transform", "--random", "8,8,8,8", "-o", str(tmp_path / "f")])
    capsys.readouterr()
    assert main(["transform", str(tmp_path / "f" / "coeffs"), "--direction", "adjoint",
                 "--check-adjoint", "-o", str(tmp_path / "a")]) == 0
    out = capsys.readouterr().out
    assert float(out.split(":")[1]) < 1e-3


def test_transform_lossy_requires_flag(tmp_path, capsys):
    main(["transform", "--random", "8,8,8,8", "--no-level1-details", "-o", str(tmp_path / "f")])
    coeffs = str(tmp_path / "f" / "coeffs")
    assert main(["transform", coeffs, "--direction", "inverse", "-o", str(tmp_path / "i")]) == 2
    assert "level-1 details missing" in capsys.readouterr().err
    assert main(["transform", coeffs, "--direction", "inverse", "--allow-lossy",
                 "-o", str(tmp_path / "i")]) == 0


def test_unknown_demo(tmp_path, capsys):
    assert main(["demo", "fireworks", "-o", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "usage:" in err and "shift-invariance" in err


def test_bad_arguments_exit_2(tmp_path):
    assert main(["transform"]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["validate-bank", "--bank", "bogus"]) == 2


def test_missing_config_file(tmp_path, capsys):
    code = main(["--config", str(tmp_path / "nope.json"), "reconstruct", "-o", str(tmp_path / "r")])
    assert code == 2
    assert "config file not found" in capsys.readouterr().err


def test_validate_bank(capsys):
    assert main(["validate-bank"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_demo_shift_invariance(tmp_path, capsys):
    assert main(["demo", "shift-invariance", "-o", str(tmp_path)]) == 0
    rows = (tmp_path / "shift_invariance_cv.csv").read_text().splitlines()
    cv = {r.split(",")[0]: float(r.split(",")[1]) for r in rows[1:]}
    assert cv["dtcwt"] < 0.2 * cv["dwt"]


def test_demo_growing_ball(tmp_path):
    assert main(["demo", "growing-ball-subband", "-o", str(tmp_path)]) == 0
    for name in ("phantom", "dtcwt", "dwt"):
        assert (tmp_path / name / "slice_xy_z008_t08.pgm").is_file()
    lines = (tmp_path / "subband_energies.csv").read_text().splitlines()
    assert len(lines) == 1 + 120 + 15


def _reconstruct(tmp_path, name, extra=()):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(SMALL_CONFIG))
    out = tmp_path / name
    assert main(["--config", str(cfg), "reconstruct", "-o", str(out), *extra]) == 0
    return out


def test_reconstruct_outputs_and_determinism(tmp_path):
    a = _reconstruct(tmp_path, "a")
    for name in ("reference", "sinogram", "recon_dtcwt", "recon_dwt"):
        assert (a / name / "manifest.json").is_file()
    assert (a / "slices_dtcwt" / "slice_xy_z004_t01.pgm").is_file()
    lines = (a / "metrics.csv").read_text().splitlines()
    assert lines[0].startswith("sparsifier,relative_error,psnr_db")
    assert len(lines) == 3
    assert len((a / "convergence_dwt.csv").read_text().splitlines()) == 5
    b = _reconstruct(tmp_path, "b")
    assert files_bytes(a) == files_bytes(b)
    # replay from the run manifest
    c = tmp_path / "c"
    assert main(["--config", str(a / "run_manifest.json"), "reconstruct", "-o", str(c)]) == 0
    assert files_bytes(a) == files_bytes(c)
    man = json.loads((a / "run_manifest.json").read_text())
    assert man["command"] == "reconstruct" and man["seed"] == 0
    assert "wall_seconds" in man["timing"]


def test_reconstruct_from_sinogram(tmp_path):
    a = _reconstruct(tmp_path, "a", ["--sparsifier", "dwt"])
    b = _reconstruct(tmp_path, "b", ["--sparsifier", "dwt", "--sinogram", str(a / "sinogram")])
    assert (a / "recon_dwt" / "volume.bin").read_bytes() == (b / "recon_dwt" / "volume.bin").read_bytes()


def test_export(tmp_path, capsys):
    containers.save_volume(tmp_path / "v", np.full((8, 8, 8, 4), 2.0))
    assert main(["export", str(tmp_path / "v"), "-o", str(tmp_path / "img"),
                 "--pick", "xy,3,2", "--pick", "yz,0,0"]) == 0
    img = images.read_pgm(tmp_path / "img" / "slice_xy_z003_t02.pgm")
    assert np.all(img == 128)
    assert (tmp_path / "img" / "slice_yz_x000_t00.pgm").is_file()
    capsys.readouterr()
    assert main(["export", str(tmp_path / "v"), "-o", str(tmp_path / "img"), "--pick", "xy,9,0"]) == 2
    assert "0..7" in capsys.readouterr().err


def test_config_without_sparsifiers_runs_both(tmp_path):
    cfg = {k: v for k, v in SMALL_CONFIG.items() if k != "sparsifiers"}
    (tmp_path / "cfg.json").write_text(json.dumps({**cfg, "solver": {"max_iter": 2, "levels": 2}}))
    out = tmp_path / "r"
    assert main(["--config", str(tmp_path / "cfg.json"), "reconstruct", "-o", str(out)]) == 0
    assert (out / "recon_dtcwt").is_dir() and (out / "recon_dwt").is_dir()
