"""Small shared helpers: number formatting and grid construction."""

import numpy as np


def fmt_g15(x) -> str:
    """Format a number to 15 significant digits (compact form)."""
    if isinstance(x, bool):
        return "true" if x else "false"
    return f"{float(x):.15g}"


def fmt_f15(x) -> str:
    """Format a number with 15 digits after the decimal point."""
    return f"{float(x):.15f}"


def geometric_grid(hi: float, lo: float, points: int) -> np.ndarray:
    """Geometric grid from ``hi`` down to ``lo`` (descending), inclusive."""
    if not (0 < lo < hi):
        raise ValueError(f"need 0 < lo < hi, got lo={lo}, hi={hi}")
    if points < 2:
        raise ValueError("need at least 2 grid points")
    return np.geomspace(hi, lo, points)
