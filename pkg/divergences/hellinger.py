"""
Hellinger distance: h(y) = y / 2, φ(x) = (√x - 1)².

For equal-shape Gamma laws it equals 1 - BC with the Bhattacharyya
coefficient BC = (2 √(λ₁ λᵢ) / (λ₁ + λᵢ))^L.
"""

import math


def _phi(x: float) -> float:
    return (math.sqrt(x) - 1.0) ** 2


def _h(y: float) -> float:
    return y / 2.0


HELLINGER_DIVERGENCE = {
    "name": "hellinger",
    "display_name": "Hellinger",
    "description": "Bounded distance in [0, 1]",
    "scale_constant": 4.0,
    "degrees_of_freedom": 1,
    "phi": _phi,
    "h": _h,
}
