import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dtcwt4d import solver, tomo
from dtcwt4d.phantoms import PhantomSpec, fine_and_coarse
from dtcwt4d.solver import PdfpState, SolverConfig


class IdentityC:
    """Trivial sparsifier for isolating the data-fidelity path."""

    def __init__(self, shape):
        self.shape = shape
        self.scaling = np.zeros(int(np.prod(shape)), dtype=bool)

    def forward(self, f):
        return np.asarray(f, dtype=np.float64).ravel().copy()

    def adjoint(self, v):
        return np.asarray(v).real.reshape(self.shape)


@pytest.fixture(scope="module")
def small_problem():
    spec = PhantomSpec(extents=(16, 16, 8, 4), supersample=2)
    fine, coarse = fine_and_coarse(spec)
    g = tomo.parallel_geometry(16, 8, 4, 12)
    m = tomo.simulate_measurements(fine, g, 0.05, seed=0)
    L = tomo.operator_norm_sq(g, tol=1e-4)
    return g, m, coarse, L


# -- thresholding -------------------------------------------------------------

def test_soft_threshold_examples():
    v = 3 * np.exp(1j * np.pi / 4)
    out = solver.radial_soft_threshold(np.array([v]), 1.0)[0]
    assert abs(out - 2 * np.exp(1j * np.pi / 4)) < 1e-15
    small = np.array([0.5j, -0.9, 1.0 + 0j])
    assert not solver.radial_soft_threshold(small, 1.0).any()
    x = np.array([1 - 2j, 0.3, -4j])
    np.testing.assert_array_equal(solver.radial_soft_threshold(x, 0.0), x)
    with pytest.raises(ValueError):
        solver.radial_soft_threshold(x, -1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 5), st.integers(0, 10**6))
def test_threshold_residual_identity(tau, seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(200) + 1j * rng.standard_normal(200)
    s = solver.radial_soft_threshold(u, tau)
    np.testing.assert_allclose(s + (u - s), u, atol=1e-14, rtol=0)
    # phase preserved, magnitude shrunk by tau
    nz = np.abs(s) > 0
    np.testing.assert_allclose(np.angle(s[nz]), np.angle(u[nz]), atol=1e-12)
    np.testing.assert_allclose(np.abs(s), np.maximum(np.abs(u) - tau, 0), atol=1e-12)


def test_achieved_sparsity():
    s = np.array([0, 0, 1e-12, 1.0, 2.0])
    assert solver.achieved_sparsity(s) == 0.6
    assert solver.achieved_sparsity(np.zeros(4)) == 1.0
    mask = np.array([True, True, False, False, False])
    assert solver.achieved_sparsity(np.array([0, 1.0, 0, 0, 0]), mask=mask) == 0.5


# -- controller ---------------------------------------------------------------

def test_update_mu_examples():
    cfg = SolverConfig(target_sparsity=0.6, gain=0.5)
    assert solver.update_mu(2.0, 0.6, cfg) == 2.0
    assert solver.update_mu(2.0, 0.4, cfg) > 2.0
    assert solver.update_mu(2.0, 0.8, cfg) < 2.0
    assert abs(solver.update_mu(2.0, 0.4, cfg) - 2.0 * (1 + 0.5 * 0.2)) < 1e-15


def test_update_mu_clamp_and_freeze():
    cfg = SolverConfig(target_sparsity=0.6, gain=1.0, mu_min=1.0, mu_max=3.0,
                       controller_tol=0.02, freeze_after=3)
    assert solver.update_mu(2.9, 0.0, cfg) == 3.0
    assert solver.update_mu(1.1, 1.0, cfg) == 1.0
    ctl = solver._Controller()
    mu = 2.0
    for _ in range(3):
        mu = solver.update_mu(mu, 0.59, cfg, ctl)
    assert ctl.frozen
    assert solver.update_mu(mu, 0.0, cfg, ctl) == mu


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(target_sparsity=1.5)
    with pytest.raises(ValueError):
        SolverConfig(sparsifier="curvelet")
    with pytest.raises(ValueError, match="unknown"):
        SolverConfig.from_dict({"bogus": 1})
    cfg = SolverConfig(gain=0.7)
    assert SolverConfig.from_dict(cfg.to_dict()) == cfg


# -- metrics ------------------------------------------------------------------

def test_metrics_examples():
    ref = np.random.default_rng(0).random((4, 4, 4, 2)) + 0.1
    m = solver.metrics(ref, ref)
    assert m["relative_error"] == 0 and m["psnr"] == solver.PSNR_CAP
    assert solver.metrics(np.zeros_like(ref), ref)["relative_error"] == 1.0
    off = ref + 0.1 * ref.max()
    assert abs(solver.metrics(off, ref)["psnr"] - 20.0) < 1e-10
    with pytest.raises(ValueError, match="mismatch"):
        solver.metrics(ref[..., :1], ref)
    with pytest.raises(ValueError, match="zero norm"):
        solver.metrics(ref, np.zeros_like(ref))


# -- PDFP iteration -----------------------------------------------------------

def _identity_setup():
    g = tomo.Geometry(1, 8, 2, 1, [[0.0]])
    A = solver.TomoOperator(g)
    C = IdentityC(g.extents)
    f_star = np.random.default_rng(1).random(g.extents)
    return g, A, C, f_star


def test_mu_zero_is_projected_gradient():
    g, A, C, f_star = _identity_setup()
    m = A.forward(f_star)
    cfg = SolverConfig(adapt_mu=False)
    gamma, lam = 0.7, 1.0
    state = PdfpState(np.zeros(g.extents), np.zeros(f_star.size), np.zeros(g.extents), 0.0)
    errs = [np.linalg.norm(state.f - f_star)]
    for _ in range(12):
        state = solver.pdfp_step(state, A, C, m, cfg, gamma, lam)
        errs.append(np.linalg.norm(state.f - f_star))
    # A^T A = I here: each pixel follows e_k = (1 - gamma)^k e_0
    ref = errs[0] * (1 - gamma) ** np.arange(13)
    np.testing.assert_allclose(errs, ref, rtol=1e-10, atol=1e-14)
    assert np.all(np.diff(errs) < 0)


def test_zero_data_fixed_point():
    g, A, C, _ = _identity_setup()
    m = np.zeros(A.forward(np.zeros(g.extents)).size)
    state = PdfpState(np.zeros(g.extents), np.zeros(16), np.zeros(g.extents), 1.0)
    for _ in range(3):
        state = solver.pdfp_step(state, A, C, m, SolverConfig(), 0.5, 1.0)
    assert not state.f.any() and not state.v.any()
    assert len(state.history) == state.iteration == 3


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_guard():
    g, A, C, f_star = _identity_setup()
    m = A.forward(f_star) * 1e300
    state = PdfpState(np.zeros(g.extents), np.zeros(16), np.zeros(g.extents), 0.0)
    with pytest.raises(solver.DivergenceError) as exc:
        for _ in range(5):
            state = solver.pdfp_step(state, A, C, m, SolverConfig(), 1e300, 1.0)
    assert exc.value.iteration >= 1


@pytest.mark.parametrize("sparsifier", ["dtcwt", "dwt"])
def test_solve_small(small_problem, sparsifier):
    g, m, ref, L = small_problem
    cfg = SolverConfig(sparsifier=sparsifier, max_iter=12, target_sparsity=0.5)
    f, rep = solver.solve(m, g, cfg, op_norm_sq=L)
    assert f.min() >= 0.0
    assert rep.iterations == len(rep.history) == 12
    assert rep.gamma == pytest.approx(1.9 / L)
    if sparsifier == "dwt":
        assert rep.lam == 1.0
    else:
        assert rep.lam == pytest.approx(1 / rep.lam_max)
        assert 2.0 < rep.lam_max < 2.5
    err = solver.metrics(f, ref)["relative_error"]
    assert err < 0.6
    mus = [r["mu"] for r in rep.history]
    assert mus[0] == rep.mu0 and len(set(mus)) > 1


def test_solve_deterministic(small_problem):
    g, m, _, L = small_problem
    cfg = SolverConfig(max_iter=5)
    f1, r1 = solver.solve(m, g, cfg, op_norm_sq=L)
    f2, r2 = solver.solve(m, g, cfg, op_norm_sq=L)
    assert f1.tobytes() == f2.tobytes()
    assert r1.history == r2.history


def test_objective_nonincreasing_fixed_mu(small_problem):
    g, m, _, L = small_problem
    for sp in ("dtcwt", "dwt"):
        cfg = SolverConfig(sparsifier=sp, max_iter=70, adapt_mu=False, mu0=0.5, tol=0)
        _, rep = solver.solve(m, g, cfg, op_norm_sq=L)
        obj = np.array([r["objective"] for r in rep.history])
        steps = obj[6:] / obj[5:-1] - 1
        assert np.all(steps < 1e-3), (sp, steps.max())


def test_history_csv(tmp_path, small_problem):
    g, m, _, L = small_problem
    _, rep = solver.solve(m, g, SolverConfig(sparsifier="dwt", max_iter=3), op_norm_sq=L)
    path = tmp_path / "conv.csv"
    rep.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(solver.HISTORY_FIELDS)
    assert len(lines) == 4


def test_stop_tolerance(small_problem):
    g, m, _, L = small_problem
    _, rep = solver.solve(m, g, SolverConfig(sparsifier="dwt", max_iter=50, tol=0.5), op_norm_sq=L)
    assert rep.converged and rep.iterations < 50
