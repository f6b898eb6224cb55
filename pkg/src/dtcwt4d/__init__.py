"""4D dual-tree complex wavelet transform and a PDFP dynamic-tomography pipeline."""
from .filterbank import (
    DEFAULT_BANK,
    FilterBank,
    available_banks,
    builtin_filter_bank,
    load_filter_bank,
    save_filter_bank,
    validate_filter_bank,
)
from .transform4d import Coeffs4D, DualTree4D, adjoint, forward, inverse, max_levels

__version__ = "0.1.0"
