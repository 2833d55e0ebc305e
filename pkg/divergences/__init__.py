"""
Registry of (h, φ)-divergence instances.
Only Kullback–Leibler drives the filter; the others are evaluated numerically.
"""

from .kullback_leibler import KULLBACK_LEIBLER_DIVERGENCE
from .hellinger import HELLINGER_DIVERGENCE
from .bhattacharyya import BHATTACHARYYA_DIVERGENCE
from .triangular import TRIANGULAR_DIVERGENCE

DIVERGENCES = {
    "kullback_leibler": KULLBACK_LEIBLER_DIVERGENCE,
    "hellinger": HELLINGER_DIVERGENCE,
    "bhattacharyya": BHATTACHARYYA_DIVERGENCE,
    "triangular": TRIANGULAR_DIVERGENCE,
}

__all__ = [
    "DIVERGENCES",
    "KULLBACK_LEIBLER_DIVERGENCE",
    "HELLINGER_DIVERGENCE",
    "BHATTACHARYYA_DIVERGENCE",
    "TRIANGULAR_DIVERGENCE",
]
