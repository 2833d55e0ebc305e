"""
Triangular distance: h(y) = y, φ(x) = (x - 1)² / (x + 1).
"""


def _phi(x: float) -> float:
    return (x - 1.0) ** 2 / (x + 1.0)


def _h(y: float) -> float:
    return y


TRIANGULAR_DIVERGENCE = {
    "name": "triangular",
    "display_name": "Triangular",
    "description": "Symmetric chi-square type distance",
    "scale_constant": 1.0,
    "degrees_of_freedom": 1,
    "phi": _phi,
    "h": _h,
}
