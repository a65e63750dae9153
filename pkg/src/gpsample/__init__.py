"""Pathwise sampling of Gaussian process posteriors.

Draw approximate prior functions, correct them with data-driven updates,
and verify against exact distributional oracles. See the kernels, linalg,
prior, conditioning, metrics, and bench modules.
"""

__version__ = "0.1.0"
