"""Filter families for the dual-tree construction.

Level 1 uses a single biorthogonal low/high pair; the two trees are the even
and odd polyphase branches of its undecimated output.  Levels >= 2 use a pair
of orthogonal q-shift trees.

Coefficient tables are Kingsbury's published near-symmetric and q-shift sets.
In those tables the chain that consumes even-indexed samples is labelled
``b``; here it is tree ``a`` (even samples stay tree ``a`` at every level), so
``tree_a_low`` holds the table's ``h0b`` and ``tree_b_low`` holds ``h0a``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence

import numpy as np

from . import _axis

logger = logging.getLogger(__name__)

__all__ = [
    "Biorth1Filters",
    "QshiftFilters",
    "FilterBank",
    "Check",
    "ValidationReport",
    "builtin_filter_bank",
    "available_banks",
    "validate_filter_bank",
    "load_filter_bank",
    "save_filter_bank",
]

PR_TOLERANCE = 1e-10
MAGNITUDE_TOLERANCE = 0.05


def _frozen(coeffs: Sequence[float]) -> np.ndarray:
    arr = np.array(coeffs, dtype=np.float64).ravel()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Biorth1Filters:
    analysis_low: np.ndarray
    analysis_high: np.ndarray
    synthesis_low: np.ndarray
    synthesis_high: np.ndarray

    def __post_init__(self):
        for name in ("analysis_low", "analysis_high", "synthesis_low", "synthesis_high"):
            arr = _frozen(getattr(self, name))
            if arr.size == 0:
                raise ValueError(f"level-1 filter {name} is empty")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"level-1 filter {name} has non-finite coefficients")
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class QshiftFilters:
    """Analysis filters of the two orthogonal trees used at levels >= 2.

    Synthesis filters are never stored: they are the element-order reversal
    of the analysis filters (see :meth:`synthesis`).
    """

    tree_a_low: np.ndarray
    tree_a_high: np.ndarray
    tree_b_low: np.ndarray
    tree_b_high: np.ndarray

    def __post_init__(self):
        names = ("tree_a_low", "tree_a_high", "tree_b_low", "tree_b_high")
        for name in names:
            arr = _frozen(getattr(self, name))
            if arr.size == 0:
                raise ValueError(f"q-shift filter {name} is empty")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"q-shift filter {name} has non-finite coefficients")
            object.__setattr__(self, name, arr)
        lengths = {getattr(self, n).size for n in names}
        if len(lengths) != 1:
            raise ValueError("q-shift tree length mismatch")
        if self.tree_a_low.size % 2:
            raise ValueError("q-shift filters must have even length")

    @property
    def length(self) -> int:
        return self.tree_a_low.size

    def synthesis(self):
        """(low_a, high_a, low_b, high_b) reconstruction filters."""
        return tuple(f[::-1].copy() for f in
                     (self.tree_a_low, self.tree_a_high, self.tree_b_low, self.tree_b_high))


@dataclass(frozen=True)
class FilterBank:
    level1: Biorth1Filters
    qshift: QshiftFilters
    name: str = "custom"
    test_only: bool = False


# near_sym_b: 13-tap analysis low-pass / 19-tap analysis high-pass.
_NEARSYM13_19 = dict(
    analysis_low=[
        -0.0017578125, 0.0, 0.022265625, -0.046875, -0.0482421875, 0.296875,
        0.55546875, 0.296875, -0.0482421875, -0.046875, 0.022265625, 0.0,
        -0.0017578125],
    analysis_high=[
        -7.062639508928571e-05, 0.0, 0.0013419015066964285, -0.0018833705357142855,
        -0.007156808035714285, 0.023856026785714284, 0.05564313616071428,
        -0.05168805803571428, -0.29975760323660716, 0.5594308035714286,
        -0.29975760323660716, -0.05168805803571428, 0.05564313616071428,
        0.023856026785714284, -0.007156808035714285, -0.0018833705357142855,
        0.0013419015066964285, 0.0, -7.062639508928571e-05],
    synthesis_low=[
        7.062639508928571e-05, 0.0, -0.0013419015066964285, -0.0018833705357142855,
        0.007156808035714285, 0.023856026785714284, -0.05564313616071428,
        -0.05168805803571428, 0.29975760323660716, 0.5594308035714286,
        0.29975760323660716, -0.05168805803571428, -0.05564313616071428,
        0.023856026785714284, 0.007156808035714285, -0.0018833705357142855,
        -0.0013419015066964285, 0.0, 7.062639508928571e-05],
    synthesis_high=[
        -0.0017578125, 0.0, 0.022265625, 0.046875, -0.0482421875, -0.296875,
        0.55546875, -0.296875, -0.0482421875, 0.046875, 0.022265625, 0.0,
        -0.0017578125],
)

# near_sym_a: 5/7-tap pair.
_NEARSYM5_7 = dict(
    analysis_low=[-0.05, 0.25, 0.6, 0.25, -0.05],
    analysis_high=[
        0.010714285714285713, -0.05357142857142857, -0.26071428571428573,
        0.6071428571428571, -0.26071428571428573, -0.05357142857142857,
        0.010714285714285713],
    synthesis_low=[
        -0.010714285714285713, -0.05357142857142857, 0.26071428571428573,
        0.6071428571428571, 0.26071428571428573, -0.05357142857142857,
        -0.010714285714285713],
    synthesis_high=[-0.05, -0.25, 0.6, -0.25, -0.05],
)

# qshift_b, 14 taps.
_QSHIFT14 = dict(
    tree_a_low=[
        -0.004556895628475491, -0.005439475937274115, 0.01702522388155399,
        0.023825384794920298, -0.1067118046866654, 0.011866092033797,
        0.5688104207121227, 0.7561456438925225, 0.27529538466888204,
        -0.11720388769911527, -0.03887280126882779, 0.03466034684485349,
        -0.00388321199915849, 0.003253142763653182],
    tree_a_high=[
        -0.003253142763653182, -0.00388321199915849, -0.03466034684485349,
        -0.03887280126882779, 0.11720388769911527, 0.27529538466888204,
        -0.7561456438925225, 0.5688104207121227, -0.011866092033797,
        -0.1067118046866654, -0.023825384794920298, 0.01702522388155399,
        0.005439475937274115, -0.004556895628475491],
    tree_b_low=[
        0.003253142763653182, -0.00388321199915849, 0.03466034684485349,
        -0.03887280126882779, -0.11720388769911527, 0.27529538466888204,
        0.7561456438925225, 0.5688104207121227, 0.011866092033797,
        -0.1067118046866654, 0.023825384794920298, 0.01702522388155399,
        -0.005439475937274115, -0.004556895628475491],
    tree_b_high=[
        -0.004556895628475491, 0.005439475937274115, 0.01702522388155399,
        -0.023825384794920298, -0.1067118046866654, -0.011866092033797,
        0.5688104207121227, -0.7561456438925225, 0.27529538466888204,
        0.11720388769911527, -0.03887280126882779, -0.03466034684485349,
        -0.00388321199915849, -0.003253142763653182],
)

# qshift_a, 10 taps.
_QSHIFT10 = dict(
    tree_a_low=[
        -0.006181881892116438, -0.0016896812725281543, -0.1002312195074762,
        0.0008736226952170968, 0.5636557101270515, 0.7666284677930372,
        0.26383956105893763, -0.10983605166597087, -0.013975370246888838,
        0.051130405283831656],
    tree_a_high=[
        -0.051130405283831656, -0.013975370246888838, 0.10983605166597087,
        0.26383956105893763, -0.7666284677930372, 0.5636557101270515,
        -0.0008736226952170968, -0.1002312195074762, 0.0016896812725281543,
        -0.006181881892116438],
    tree_b_low=[
        0.051130405283831656, -0.013975370246888838, -0.10983605166597087,
        0.26383956105893763, 0.7666284677930372, 0.5636557101270515,
        0.0008736226952170968, -0.1002312195074762, -0.0016896812725281543,
        -0.006181881892116438],
    tree_b_high=[
        -0.006181881892116438, 0.0016896812725281543, -0.1002312195074762,
        -0.0008736226952170968, 0.5636557101270515, -0.7666284677930372,
        0.26383956105893763, 0.10983605166597087, -0.013975370246888838,
        -0.051130405283831656],
)

_S2 = np.sqrt(0.5)
_HAAR_QSHIFT = dict(tree_a_low=[_S2, _S2], tree_a_high=[-_S2, _S2],
                    tree_b_low=[_S2, _S2], tree_b_high=[-_S2, _S2])
# Odd symmetric level-1 pair with H0 + H1 = 1 and unit synthesis; PR holds
# under symmetric extension, which an even-length Haar pair would not give.
_HAAR_LEVEL1 = dict(analysis_low=[0.25, 0.5, 0.25], analysis_high=[-0.25, 0.5, -0.25],
                    synthesis_low=[1.0], synthesis_high=[1.0])

_BUILTINS = {
    "nearsym13_19+qshift14": (_NEARSYM13_19, _QSHIFT14, False),
    "nearsym5_7+qshift10": (_NEARSYM5_7, _QSHIFT10, False),
    "haar-test": (_HAAR_LEVEL1, _HAAR_QSHIFT, True),
}

DEFAULT_BANK = "nearsym13_19+qshift14"


def available_banks() -> List[str]:
    return sorted(_BUILTINS)


def builtin_filter_bank(name: str = DEFAULT_BANK) -> FilterBank:
    """Return one of the built-in filter banks by name.

    ``"haar-test"`` is a degenerate bank for tests: both trees use the 2-tap
    orthonormal pair, so perfect reconstruction holds but the trees are not a
    Hilbert pair.
    """
    try:
        l1, qs, test_only = _BUILTINS[name]
    except KeyError:
        raise ValueError(
            f"unknown filter bank {name!r}; available: {', '.join(available_banks())}"
        ) from None
    return FilterBank(Biorth1Filters(**l1), QshiftFilters(**qs), name=name, test_only=test_only)


# -- validation ---------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    residual: float
    threshold: float
    informational: bool = False

    def __str__(self):
        status = "info" if self.informational else ("PASS" if self.passed else "FAIL")
        return f"[{status}] {self.name}: {self.residual:.3e} (threshold {self.threshold:g})"


@dataclass
class ValidationReport:
    bank: str
    checks: List[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if not c.informational)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __str__(self):
        lines = [f"filter bank {self.bank}: {'PASS' if self.passed else 'FAIL'}"]
        lines += ["  " + str(c) for c in self.checks]
        return "\n".join(lines)


def _periodic_tree_roundtrip(low, high, x):
    """Two-channel periodic analysis then synthesis with reversed filters."""
    n = x.size
    k = np.arange(n // 2)
    lo = np.zeros(n // 2)
    hi = np.zeros(n // 2)
    for j in range(low.size):
        idx = (2 * k - j) % n
        lo += low[j] * x[idx]
        hi += high[j] * x[idx]
    y = np.zeros(n)
    for j in range(low.size):
        idx = (2 * k - j) % n
        np.add.at(y, idx, low[j] * lo + high[j] * hi)
    return y


def _level1_roundtrip(l1: Biorth1Filters, x):
    lo = _axis.filter_undecimated(x, l1.analysis_low, 0)
    hi = _axis.filter_undecimated(x, l1.analysis_high, 0)
    return (_axis.filter_undecimated(lo, l1.synthesis_low, 0)
            + _axis.filter_undecimated(hi, l1.synthesis_high, 0))


def _response(h, w):
    n = np.arange(h.size)
    return np.exp(-1j * np.outer(w, n)) @ h


def validate_filter_bank(fb: FilterBank, n_signals: int = 100, seed: int = 0) -> ValidationReport:
    """Run the numerical checks on ``fb``; failures are reported, never raised."""
    rng = np.random.default_rng(seed)
    lengths = 2 * rng.integers(8, 129, size=n_signals)  # even, 16..256
    l1_err = 0.0
    tree_err = {"a": 0.0, "b": 0.0}
    qs = fb.qshift
    with np.errstate(all="ignore"):
        for n in lengths:
            x = rng.standard_normal(int(n))
            nx = np.linalg.norm(x)
            y = _level1_roundtrip(fb.level1, x)
            l1_err = max(l1_err, float(np.linalg.norm(y - x) / nx))
            for tree, (lo, hi) in {"a": (qs.tree_a_low, qs.tree_a_high),
                                   "b": (qs.tree_b_low, qs.tree_b_high)}.items():
                y = _periodic_tree_roundtrip(lo, hi, x)
                tree_err[tree] = max(tree_err[tree], float(np.linalg.norm(y - x) / nx))

    w = np.linspace(0.0, np.pi, 512)
    la = _response(qs.tree_a_low, w)
    lb = _response(qs.tree_b_low, w)
    mag_dev = float(np.max(np.abs(np.abs(lb) - np.abs(la))))

    # Group-delay difference of the two low-pass trees near DC: ~0.5 sample
    # for a q-shift pair.  Reported only.
    dw = 1e-4
    phase = lambda h: np.unwrap(np.angle(_response(h, np.array([dw, 2 * dw]))))
    delay = lambda h: -(phase(h)[1] - phase(h)[0]) / dw
    delay_diff = float(abs(delay(qs.tree_b_low) - delay(qs.tree_a_low)))

    def _ok(v, t):
        return bool(np.isfinite(v) and v < t)

    checks = [
        Check("level1_pr", _ok(l1_err, PR_TOLERANCE), l1_err, PR_TOLERANCE),
        Check("qshift_tree_a_pr", _ok(tree_err["a"], PR_TOLERANCE), tree_err["a"], PR_TOLERANCE),
        Check("qshift_tree_b_pr", _ok(tree_err["b"], PR_TOLERANCE), tree_err["b"], PR_TOLERANCE),
        Check("magnitude_match", _ok(mag_dev, MAGNITUDE_TOLERANCE), mag_dev, MAGNITUDE_TOLERANCE),
        Check("half_sample_delay", abs(delay_diff - 0.5) < 0.1, abs(delay_diff - 0.5), 0.1,
              informational=True),
    ]
    return ValidationReport(fb.name, checks)


# -- file format --------------------------------------------------------------

_SECTIONS = {
    "level1.analysis_low": ("level1", "analysis_low"),
    "level1.analysis_high": ("level1", "analysis_high"),
    "level1.synthesis_low": ("level1", "synthesis_low"),
    "level1.synthesis_high": ("level1", "synthesis_high"),
    "qshift.a_low": ("qshift", "tree_a_low"),
    "qshift.a_high": ("qshift", "tree_a_high"),
    "qshift.b_low": ("qshift", "tree_b_low"),
    "qshift.b_high": ("qshift", "tree_b_high"),
}


def save_filter_bank(fb: FilterBank, path) -> None:
    lines = [f"# filter bank {fb.name}", "[name]", fb.name]
    for section, (group, attr) in _SECTIONS.items():
        lines.append(f"[{section}]")
        lines.extend(repr(float(c)) for c in getattr(getattr(fb, group), attr))
    Path(path).write_text("\n".join(lines) + "\n")


def load_filter_bank(path) -> FilterBank:
    """Parse a filter-bank text file.  The result is not validated."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"filter bank file not found: {path}")
    data = {}
    name = path.stem
    current = None
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current != "name" and current not in _SECTIONS:
                raise ValueError(f"{path}:{lineno}: unknown section [{current}]")
            if current in data:
                raise ValueError(f"{path}:{lineno}: duplicate section [{current}]")
            if current != "name":
                data[current] = []
            continue
        if current is None:
            raise ValueError(f"{path}:{lineno}: coefficient outside any section")
        if current == "name":
            name = line
            continue
        try:
            data[current].append(float(line))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: cannot parse coefficient {line!r}") from None
    missing = [s for s in _SECTIONS if s not in data]
    if missing:
        raise ValueError(f"{path}: missing sections {missing}")
    groups = {"level1": {}, "qshift": {}}
    for section, (group, attr) in _SECTIONS.items():
        groups[group][attr] = data[section]
    q = groups["qshift"]
    if len({len(v) for v in q.values()}) != 1:
        raise ValueError("q-shift tree length mismatch")
    return FilterBank(Biorth1Filters(**groups["level1"]), QshiftFilters(**q), name=name)
