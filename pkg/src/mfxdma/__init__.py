"""Multifractal detrending moving-average cross-correlation analysis.

Estimates joint scaling exponents of two return series with
moving-average detrending, tests lagged cross-correlation significance
against chi-square critical values, fits the quadratic mass-exponent
model, and judges intrinsic joint multifractality with IAAFT surrogate
ensembles.
"""

import logging

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())
