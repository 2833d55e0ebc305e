"""
Bhattacharyya distance: h(y) = -log(1 - y), φ(x) = -√x + (x + 1) / 2.
"""

import math


def _phi(x: float) -> float:
    return -math.sqrt(x) + (x + 1.0) / 2.0


def _h(y: float) -> float:
    return -math.log1p(-y)


BHATTACHARYYA_DIVERGENCE = {
    "name": "bhattacharyya",
    "display_name": "Bhattacharyya",
    "description": "Negative log of the Bhattacharyya coefficient",
    "scale_constant": 4.0,
    "degrees_of_freedom": 1,
    "phi": _phi,
    "h": _h,
}
