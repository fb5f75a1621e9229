"""Round-trip-exact decimal formatting shared by every text format."""

import math


def fmt_float(x: float) -> str:
    """17 significant digits, compact exponent: 0.42 -> '4.2000000000000003e-1'."""
    x = float(x)
    if not math.isfinite(x):
        return repr(x)
    mant, exp = f"{x:.16e}".split("e")
    return f"{mant}e{int(exp)}"
