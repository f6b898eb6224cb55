"""Built-in run configurations for ``dtcwt4d reconstruct``.

A run config is a JSON-compatible dict with sections ``phantom`` (PhantomSpec
keys), ``scan`` (``n_angles``, ``schedule``, ``noise_rel``, ``n_det``),
``solver`` (SolverConfig keys shared by all sparsifiers) and ``sparsifiers``
(per-sparsifier overrides, typically the target sparsity).
"""
import copy

PRESETS = {
    "dsl-32": {
        "phantom": {"kind": "dynamic_ellipsoids", "extents": [32, 32, 32, 8],
                    "amplitude": 0.1, "supersample": 2},
        "scan": {"n_angles": 30, "schedule": "same", "noise_rel": 0.05, "n_det": None},
        # controller gain and freeze tolerance tuned once on this preset
        "solver": {"max_iter": 70, "levels": 2, "gain": 0.5, "controller_tol": 0.005},
        "sparsifiers": {"dtcwt": {"target_sparsity": 0.6}, "dwt": {"target_sparsity": 0.5}},
    },
    "ball-16": {
        "phantom": {"kind": "growing_ball", "extents": [16, 16, 16, 16],
                    "radius_start": 1.5, "radius_end": 6.0, "supersample": 4},
        "scan": {"n_angles": 20, "schedule": "same", "noise_rel": 0.05, "n_det": None},
        "solver": {"max_iter": 40, "levels": 2},
        "sparsifiers": {"dtcwt": {"target_sparsity": 0.6}, "dwt": {"target_sparsity": 0.5}},
    },
}

SECTIONS = ("phantom", "scan", "solver", "sparsifiers")


def get_preset(name):
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None


def merge(base, override):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out
