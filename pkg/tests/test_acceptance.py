"""Acceptance suite: one test per criterion, each at its stated tolerance.

Known reds are strict xfails; the assertion still uses the stated tolerance
and the analysis lives in the xfail reason. A summary line per criterion is
printed at the end of the run (see conftest.py).
"""
import csv
import time

import numpy as np
import pytest

from dtcwt4d import demos, solver, tomo
from dtcwt4d import transform4d as t4
from dtcwt4d._linalg import power_iteration
from dtcwt4d.cli import main
from dtcwt4d.phantoms import PhantomSpec, fine_and_coarse
from dtcwt4d.presets import get_preset


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _tree_bytes(root):
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.name != "run_manifest.json":
            out[str(p.relative_to(root))] = p.read_bytes()
    return out


@pytest.fixture(scope="module")
def dsl32(tmp_path_factory):
    """The dsl-32 preset run through the CLI, both sparsifiers."""
    out = tmp_path_factory.mktemp("dsl32")
    start = time.perf_counter()
    assert main(["reconstruct", "--preset", "dsl-32", "-o", str(out)]) == 0
    wall = time.perf_counter() - start
    rows = {r["sparsifier"]: r for r in _read_csv(out / "metrics.csv")}
    hist = {name: _read_csv(out / f"convergence_{name}.csv") for name in rows}
    return rows, hist, wall


@pytest.mark.criterion(1)
def test_c1_perfect_reconstruction(measured):
    rng = np.random.default_rng(101)
    worst = 0.0
    start = time.perf_counter()
    for _ in range(20):
        shape = tuple(int(n) for n in rng.choice([8, 16, 32], size=4))
        J = int(rng.integers(1, 4))
        v = rng.standard_normal(shape)
        r = t4.inverse(t4.forward(v, J, include_level1_details=True))
        worst = max(worst, np.linalg.norm(r - v) / np.linalg.norm(v))
    wall = time.perf_counter() - start
    measured(f"worst relative error {worst:.2e} (< 1e-9), runtime {wall:.1f} s (< 60 s)")
    assert worst < 1e-9
    assert wall < 60.0


@pytest.mark.criterion(2)
@pytest.mark.xfail(strict=True, reason=(
    "the level-1 near-symmetric pair is biorthogonal, so the frame is not tight; "
    "the energy ratio is about 2.0026 with relative std about 2.4e-4 across random volumes"))
def test_c2_tight_frame_constancy(measured):
    rng = np.random.default_rng(102)
    ratios = []
    for _ in range(20):
        v = rng.standard_normal((16, 16, 16, 16))
        c = t4.forward(v, 2)
        ratios.append(c.energy() / float(np.sum(v * v)))
    ratios = np.array(ratios)
    rel_std = ratios.std() / ratios.mean()
    measured(f"relative std {rel_std:.2e} (< 1e-6); constant {ratios.mean():.5f} "
             f"vs claimed frame bound u = 2")
    assert rel_std < 1e-6


@pytest.mark.criterion(3)
@pytest.mark.xfail(strict=True, reason=(
    "the dominant eigenvalue of C C* is about 2.41, not 4; the analysis energy "
    "ratio (about 2.0) is consistent with the measurement, not with u^2 = 4"))
def test_c3_normal_operator_eigenvalue(measured):
    shape = (16, 16, 16, 16)
    tmpl = t4.forward(np.zeros(shape), 2)

    def cc_star(x):
        # C C* on coefficient space (complex vector)
        return t4.forward(t4.adjoint(tmpl.with_vector(x)), 2).to_vector()

    rng = np.random.default_rng(103)
    n = tmpl.to_vector().size
    x0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    rep = power_iteration(cc_star, x0, tol=1e-5, max_iter=1000)
    v = rng.standard_normal(shape)
    ratio = t4.forward(v, 2).energy() / float(np.sum(v * v))
    lanczos = solver.normal_operator_lmax(t4.DualTree4D(shape, 2))
    measured(f"power iteration {rep.value:.4f} (converged={rep.converged}, {rep.iterations} its) "
             f"vs claimed 4; Lanczos {lanczos:.4f}; energy ratio {ratio:.5f}")
    assert rep.converged
    assert abs(rep.value - 4.0) / 4.0 < 0.05


@pytest.mark.criterion(4)
def test_c4_adjoint_accuracy(measured):
    rng = np.random.default_rng(104)
    worst = 0.0
    for _ in range(20):
        v = rng.standard_normal((16, 16, 8, 8))
        cv = t4.forward(v, 2)
        n = cv.to_vector().size
        c = cv.with_vector(rng.standard_normal(n) + 1j * rng.standard_normal(n))
        res = abs(t4.inner(cv, c) - float(np.sum(v * t4.adjoint(c))))
        worst = max(worst, res / (np.sqrt(cv.energy()) * np.sqrt(c.energy())))
    g = tomo.parallel_geometry(32, 4, 4, 30)
    worst_tomo = 0.0
    for _ in range(20):
        v = rng.standard_normal(g.extents)
        p = tomo.ProjectionData([rng.standard_normal(g.data_shape(t)) for t in range(g.nt)])
        av = tomo.project(v, g)
        res = abs(av.dot(p) - float(np.sum(v * tomo.backproject(p, g))))
        worst_tomo = max(worst_tomo, res / np.sqrt(av.norm_sq() * p.norm_sq()))
    measured(f"DT-CWT dot-test residual {worst:.2e} (< 1e-3); tomography {worst_tomo:.2e} (< 1e-10)")
    assert worst < 1e-3
    assert worst_tomo < 1e-10


@pytest.mark.criterion(5)
def test_c5_shift_invariance(measured):
    r = demos.shift_invariance_experiment()
    ratio = r["cv_dtcwt"] / r["cv_dwt"]
    measured(f"CV ratio {ratio:.4f} (< 0.2); dtcwt {r['cv_dtcwt']:.4g}, dwt {r['cv_dwt']:.4g}")
    assert ratio < 0.2


@pytest.mark.criterion(6)
def test_c6_directional_selectivity(measured):
    share = demos.directionality_experiment()["matching"]
    measured(f"minimum matching-orthant share {share.min():.3f} (>= 0.70); "
             + " ".join(f"{x:.3f}" for x in share))
    assert np.all(share >= 0.70)


@pytest.mark.criterion(7)
@pytest.mark.xfail(strict=True, reason=(
    "with both sparsifiers held at their target sparsity the DT-CWT error is about 0.35 "
    "against about 0.21 for the DWT; the controller drives mu high for the redundant "
    "complex frame and over-smooths"))
def test_c7_reconstruction_ordering(dsl32, measured):
    rows, hist, wall = dsl32
    e_c = float(rows["dtcwt"]["relative_error"])
    e_w = float(rows["dwt"]["relative_error"])
    its = max(int(r["iterations"]) for r in rows.values())
    measured(f"dtcwt {100 * e_c:.1f}% vs dwt {100 * e_w:.1f}% (dtcwt must be lower); "
             f"{its} iterations; wall {wall:.0f} s (< 900 s)")
    assert its <= 70
    assert wall < 900.0
    assert e_c < e_w


@pytest.mark.criterion(8)
def test_c8_sparsity_controller(dsl32, measured):
    rows, hist, _ = dsl32
    targets = get_preset("dsl-32")["sparsifiers"]
    parts = []
    ok = True
    for name, h in hist.items():
        d = targets[name]["target_sparsity"]
        s = np.array([float(r["sparsity"]) for r in h])
        inside = np.abs(s - d) <= 0.05
        out_idx = np.flatnonzero(~inside)
        entry = int(out_idx[-1]) + 2 if out_idx.size else 1   # first iteration of the final in-band run
        held = entry <= len(s)
        parts.append(f"{name} enters {entry if held else 'never'} (<= 40), final {s[-1]:.3f} (d={d})")
        ok = ok and held and entry <= 40
    measured("; ".join(parts))
    assert ok


@pytest.mark.criterion(9)
@pytest.mark.xfail(strict=True, reason=(
    "data are simulated on the 2x grid, so the coarse model cannot fit them: the "
    "noiseless data mismatch is 3.1% and the exact least-squares solution of one "
    "frame is 21% off; the iteration bottoms out at 12% near iteration 70 and "
    "then rises toward the least-squares floor"))
def test_c9_dense_angle_sanity(measured):
    spec = PhantomSpec(**get_preset("dsl-32")["phantom"])
    fine, coarse = fine_and_coarse(spec)
    nx, _, nz, nt = spec.extents
    g = tomo.parallel_geometry(nx, nz, nt, 90)
    m = tomo.simulate_measurements(fine, g, 0.0)
    cfg = solver.SolverConfig(sparsifier="dwt", max_iter=70, mu0=0.0, adapt_mu=False)
    f, rep = solver.solve(m, g, cfg)
    err = solver.metrics(f, coarse)["relative_error"]
    measured(f"relative error {100 * err:.1f}% (< 5%) after {rep.iterations} iterations")
    assert err < 0.05


@pytest.mark.criterion(10)
def test_c10_determinism(tmp_path, measured):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"phantom": {"kind": "dynamic_ellipsoids", "extents": [16, 16, 8, 4], '
                   '"supersample": 1}, "scan": {"n_angles": 10, "noise_rel": 0.05}, '
                   '"solver": {"max_iter": 5, "levels": 2}}')
    runs = {
        "transform": ["transform", "--random", "8,8,8,8", "--levels", "2"],
        "reconstruct": ["--config", str(cfg), "reconstruct"],
        "demo": ["demo", "directionality"],
    }
    checked = 0
    for name, argv in runs.items():
        a, b = tmp_path / f"{name}_a", tmp_path / f"{name}_b"
        assert main(argv + ["-o", str(a)]) == 0
        assert main(argv + ["-o", str(b)]) == 0
        ba, bb = _tree_bytes(a), _tree_bytes(b)
        assert ba and ba == bb, name
        checked += len(ba)
    # replaying the recorded manifest reproduces the reconstruction
    c = tmp_path / "replay"
    assert main(["--config", str(tmp_path / "reconstruct_a" / "run_manifest.json"),
                 "reconstruct", "-o", str(c)]) == 0
    assert _tree_bytes(c) == _tree_bytes(tmp_path / "reconstruct_a")
    measured(f"{checked} files bitwise identical across repeated transform, reconstruct, "
             f"demo runs and a manifest replay")
