"""Concentration of sums of rank-one random tensors: rates, chaining functionals
and Monte Carlo verification at desk scale."""

from tensorconc.covmodel import Spectrum, make_spectrum, effective_rank, operator_norm, trace
from tensorconc.sampling import DistributionSpec, Sample, sample

__all__ = [
    "Spectrum",
    "make_spectrum",
    "effective_rank",
    "operator_norm",
    "trace",
    "DistributionSpec",
    "Sample",
    "sample",
]

__version__ = "0.1.0"
