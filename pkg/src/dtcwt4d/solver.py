"""PDFP reconstruction with wavelet-sparsity regularization.

Minimizes ``J(f) = 1/2 ||A f - m||^2 + mu ||C f||_1`` over ``f >= 0``::

    d <- P+(f - gamma * A^T(A f - m) - lam * C* v)
    v <- (I - S_{mu gamma / lam})(C d + v)
    f <- P+(f - gamma * A^T(A f - m) - lam * C* v)

``S`` is radial (phase-preserving) soft-thresholding.  ``mu`` is steered by a
proportional controller toward a target fraction of zero coefficients.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from . import tomo
from .dwt4d import dwt_forward, dwt_inverse
from .filterbank import DEFAULT_BANK
from .transform4d import DualTree4D

logger = logging.getLogger(__name__)

PSNR_CAP = 999.0
HISTORY_FIELDS = ("iteration", "objective", "misfit", "l1", "sparsity", "mu", "change")


class DivergenceError(RuntimeError):
    def __init__(self, iteration, what="iterate"):
        super().__init__(f"non-finite {what} at iteration {iteration}")
        self.iteration = iteration


@dataclass
class SolverConfig:
    gamma: Optional[float] = None          # default 1.9 / ||A^T A||
    lam: Optional[float] = None            # default 1 / lambda_max(C C*)
    mu0: Optional[float] = None            # default: threshold at the target quantile
    target_sparsity: float = 0.6
    gain: float = 0.3
    controller_tol: float = 0.02
    freeze_after: int = 5
    mu_min: Optional[float] = None         # default mu0 * 1e-3
    mu_max: Optional[float] = None         # default mu0 * 1e3
    adapt_mu: bool = True
    max_iter: int = 70
    tol: float = 1e-5
    sparsifier: str = "dtcwt"
    levels: int = 2
    bank: str = DEFAULT_BANK
    include_level1_details: bool = True
    normalization: str = "standard"
    wavelet: str = "db2"
    sparsity_floor: float = 1e-10
    count_scaling: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.target_sparsity <= 1.0:
            raise ValueError("target_sparsity must lie in [0, 1]")
        if self.sparsifier not in ("dtcwt", "dwt"):
            raise ValueError(f"sparsifier must be 'dtcwt' or 'dwt', got {self.sparsifier!r}")
        for name in ("gamma", "lam", "mu0"):
            val = getattr(self, name)
            if val is not None and val < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.max_iter < 1 or self.gain <= 0 or self.tol < 0:
            raise ValueError("max_iter and gain must be positive, tol non-negative")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown solver config keys: {sorted(unknown)}")
        return cls(**d)


# -- operators ----------------------------------------------------------------

class TomoOperator:
    def __init__(self, g: tomo.Geometry):
        self.g = g
        self._template = None

    def forward(self, f):
        p = tomo.project(f, self.g)
        if self._template is None:
            self._template = p
        return p.as_vector()

    def adjoint(self, vec):
        if self._template is None:
            self._template = tomo.project(np.zeros(self.g.extents), self.g)
        return tomo.backproject(self._template.like(vec), self.g)


class DtcwtSparsifier:
    def __init__(self, shape, cfg: SolverConfig):
        self.cfg = cfg
        self.tf = DualTree4D(tuple(shape), cfg.levels, cfg.bank,
                             cfg.include_level1_details, cfg.normalization)
        self.template = self.tf.forward(np.zeros(shape))
        self.scaling = self.template.scaling_mask()

    def forward(self, f):
        return self.tf.forward(f).to_vector()

    def adjoint(self, vec):
        return self.tf.adjoint(self.template.with_vector(vec))

    def lam_max(self, seed=0):
        """lambda_max(C C*) measured with Lanczos on a reduced grid of the same depth."""
        proxy = tuple(min(n, max(16, 2 ** (self.cfg.levels + 1))) for n in self.tf.shape)
        tf = DualTree4D(proxy, self.cfg.levels, self.tf.bank,
                        self.cfg.include_level1_details, self.cfg.normalization)
        return normal_operator_lmax(tf, seed=seed)


class DwtSparsifier:
    def __init__(self, shape, cfg: SolverConfig):
        self.levels = cfg.levels
        self.wavelet = cfg.wavelet
        self.template = dwt_forward(np.zeros(shape), cfg.levels, cfg.wavelet)
        self.scaling = self.template.scaling_mask()

    def forward(self, f):
        return dwt_forward(f, self.levels, self.wavelet).to_vector()

    def adjoint(self, vec):
        # orthonormal: adjoint equals inverse
        return dwt_inverse(self.template.with_vector(vec))

    def lam_max(self, seed=0):
        return 1.0


def make_sparsifier(shape, cfg: SolverConfig):
    if cfg.sparsifier == "dtcwt":
        return DtcwtSparsifier(shape, cfg)
    return DwtSparsifier(shape, cfg)


def normal_operator_lmax(tf: DualTree4D, seed=0, tol=1e-8) -> float:
    n = int(np.prod(tf.shape))
    op = LinearOperator((n, n), dtype=np.float64,
                        matvec=lambda x: tf.adjoint(tf.forward(x.reshape(tf.shape))).ravel())
    v0 = np.random.default_rng(seed).standard_normal(n)
    return float(eigsh(op, k=1, which="LA", tol=tol, v0=v0, return_eigenvectors=False)[0])


# -- elementary pieces --------------------------------------------------------

def radial_soft_threshold(v, tau):
    """``max(0, |v| - tau) * exp(i arg v)`` element-wise; works for real input too."""
    if tau < 0:
        raise ValueError("threshold must be non-negative")
    v = np.asarray(v)
    mag = np.abs(v)
    scale = np.zeros(mag.shape)
    nz = mag > tau
    scale[nz] = (mag[nz] - tau) / mag[nz]
    return v * scale


def achieved_sparsity(s, floor=1e-10, mask=None) -> float:
    """Fraction of entries whose magnitude is below ``floor * max``."""
    mag = np.abs(s if mask is None else s[mask])
    if mag.size == 0:
        return 0.0
    peak = mag.max()
    if peak == 0:
        return 1.0
    return float(np.mean(mag < floor * peak))


@dataclass
class _Controller:
    in_tol: int = 0
    frozen: bool = False


def update_mu(mu, achieved, cfg: SolverConfig, ctl: Optional[_Controller] = None):
    """``mu * (1 + K (d - achieved))`` clamped to ``[mu_min, mu_max]``.

    With a controller state the update freezes after ``freeze_after``
    consecutive iterations within ``controller_tol`` of the target.
    """
    err = cfg.target_sparsity - achieved
    if ctl is not None:
        if ctl.frozen:
            return mu
        ctl.in_tol = ctl.in_tol + 1 if abs(err) < cfg.controller_tol else 0
        if ctl.in_tol >= cfg.freeze_after:
            ctl.frozen = True
            logger.info("mu frozen at %.6g", mu)
            return mu
    new = mu * (1.0 + cfg.gain * err)
    lo = cfg.mu_min if cfg.mu_min is not None else 0.0
    hi = cfg.mu_max if cfg.mu_max is not None else np.inf
    return float(np.clip(new, lo, hi))


@dataclass
class PdfpState:
    f: np.ndarray
    v: np.ndarray
    d: np.ndarray
    mu: float
    iteration: int = 0
    history: List[dict] = field(default_factory=list)
    residual: Optional[np.ndarray] = None     # A f - m, cached
    cstar_v: Optional[np.ndarray] = None      # C* v, cached


def pdfp_step(state: PdfpState, A, C, m, cfg: SolverConfig, gamma: float, lam: float) -> PdfpState:
    """One PDFP iteration; returns a new state with one more history row."""
    it = state.iteration + 1
    if state.residual is None:
        state.residual = A.forward(state.f) - m
    if state.cstar_v is None:
        state.cstar_v = C.adjoint(state.v)
    base = state.f - gamma * A.adjoint(state.residual)

    d = np.maximum(base - lam * state.cstar_v, 0.0)
    u = C.forward(d) + state.v
    tau = state.mu * gamma / lam if lam > 0 else 0.0
    s = radial_soft_threshold(u, tau)
    v = u - s
    cstar_v = C.adjoint(v)
    f = np.maximum(base - lam * cstar_v, 0.0)
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(v))):
        raise DivergenceError(it)

    mask = None if cfg.count_scaling else ~C.scaling
    sparsity = achieved_sparsity(s, cfg.sparsity_floor, mask)
    residual = A.forward(f) - m
    misfit = 0.5 * float(np.dot(residual, residual))
    l1 = float(np.sum(np.abs(C.forward(f))))
    nf = np.linalg.norm(state.f)
    change = float(np.linalg.norm(f - state.f) / nf) if nf > 0 else float(np.linalg.norm(f) > 0)
    row = {
        "iteration": it,
        "objective": misfit + state.mu * l1,
        "misfit": misfit,
        "l1": l1,
        "sparsity": sparsity,
        "mu": state.mu,
        "change": change,
    }
    if not np.isfinite(row["objective"]):
        raise DivergenceError(it, "objective")
    return PdfpState(f, v, d, state.mu, it, state.history + [row], residual, cstar_v)


@dataclass
class ConvergenceReport:
    history: List[dict]
    converged: bool
    gamma: float
    lam: float
    op_norm_sq: float
    lam_max: float
    mu0: float

    @property
    def iterations(self) -> int:
        return len(self.history)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=HISTORY_FIELDS, lineterminator="\n")
            w.writeheader()
            for row in self.history:
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def initial_mu(A, C, m, cfg: SolverConfig, gamma, lam) -> float:
    """Weight whose first threshold zeroes the target fraction of the first dual input."""
    d1 = np.maximum(gamma * A.adjoint(m), 0.0)
    mag = np.abs(C.forward(d1))
    if not cfg.count_scaling:
        mag = mag[~C.scaling]
    tau = float(np.quantile(mag, cfg.target_sparsity)) if mag.size else 0.0
    return tau * lam / gamma


def solve(m, g: tomo.Geometry, cfg: Optional[SolverConfig] = None, op_norm_sq: Optional[float] = None):
    """Run PDFP on projection data ``m`` (ProjectionData or flat vector)."""
    cfg = cfg or SolverConfig()
    if isinstance(m, tomo.ProjectionData):
        m = m.as_vector()
    m = np.asarray(m, dtype=np.float64)
    A = TomoOperator(g)
    C = make_sparsifier(g.extents, cfg)

    L = op_norm_sq if op_norm_sq is not None else tomo.operator_norm_sq(g, tol=1e-4, seed=cfg.seed)
    gamma = cfg.gamma if cfg.gamma is not None else 1.9 / L
    lmax = C.lam_max(cfg.seed)
    lam = cfg.lam if cfg.lam is not None else 1.0 / lmax
    if not 0 < gamma < 2.0 / L:
        logger.warning("gamma=%.4g outside (0, 2/L=%.4g)", gamma, 2.0 / L)
    if lam > 1.0 / lmax * (1 + 1e-9):
        logger.warning("lam=%.4g exceeds 1/lambda_max=%.4g", lam, 1.0 / lmax)
    mu = cfg.mu0 if cfg.mu0 is not None else initial_mu(A, C, m, cfg, gamma, lam)
    cfg_mu = cfg
    if cfg.mu_min is None or cfg.mu_max is None:
        cfg_mu = SolverConfig.from_dict({**cfg.to_dict(),
                                         "mu_min": cfg.mu_min if cfg.mu_min is not None else mu * 1e-3,
                                         "mu_max": cfg.mu_max if cfg.mu_max is not None else mu * 1e3})
    logger.info("PDFP %s: L=%.5g gamma=%.5g lam=%.5g (lambda_max=%.5g) mu0=%.5g",
                cfg.sparsifier, L, gamma, lam, lmax, mu)

    zero = np.zeros(g.extents)
    v0 = np.zeros(C.template.to_vector().shape, dtype=C.template.to_vector().dtype)
    state = PdfpState(zero, v0, zero.copy(), mu)
    ctl = _Controller()
    converged = False
    for _ in range(cfg.max_iter):
        state = pdfp_step(state, A, C, m, cfg, gamma, lam)
        row = state.history[-1]
        logger.debug("it %d obj %.6g sparsity %.4f mu %.5g change %.3g", row["iteration"],
                     row["objective"], row["sparsity"], row["mu"], row["change"])
        if cfg.adapt_mu and state.mu > 0:
            state.mu = update_mu(state.mu, row["sparsity"], cfg_mu, ctl)
        if row["change"] < cfg.tol:
            converged = True
            break
    report = ConvergenceReport(state.history, converged, gamma, lam, L, lmax, mu)
    return state.f, report


def metrics(recon, reference) -> dict:
    """Relative l2 error and PSNR with the reference maximum as peak."""
    recon = np.asarray(recon, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if recon.shape != reference.shape:
        raise ValueError(f"extent mismatch {recon.shape} vs {reference.shape}")
    nref = np.linalg.norm(reference)
    if nref == 0:
        raise ValueError("reference has zero norm")
    err2 = float(np.sum((recon - reference) ** 2))
    rel = np.sqrt(err2) / nref
    if err2 == 0:
        psnr = PSNR_CAP
    else:
        psnr = min(PSNR_CAP, 10 * np.log10(reference.max() ** 2 * reference.size / err2))
    return {"relative_error": float(rel), "psnr": float(psnr)}
