"""Numeric text formatting shared by the file formats and the generator.

All numeric output is printed with 9 significant digits; values that will be
serialized are quantized to that precision at creation time so write/read
round-trips are exact.
"""


def fmt9(x: float) -> str:
    return f"{float(x):.9g}"


def q9(x: float) -> float:
    """Quantize to the 9-significant-digit representation used on disk."""
    return float(fmt9(x))
