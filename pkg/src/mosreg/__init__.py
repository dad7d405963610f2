"""Dense perspective image registration and mosaicing.

Two pixel-based registration algorithms over the 8-parameter projective
transform: quadratic-distance minimization by inverse composition, and
mutual-information maximization by stochastic gradient ascent.  Includes
synthetic ground-truth generation, sequence mosaicing, and an evaluation
harness for robustness, accuracy, and speed.
"""

__version__ = "0.1.0"

from .kernels import BACKEND as kernel_backend  # noqa: F401
