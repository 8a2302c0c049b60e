"""Finite-volume numerics for KMS states of anharmonic oscillator chains."""
from .basis import GridSpec, HermiteBasis, PotentialSpec, GaussianBump
from .chain import ChainSpec
from .errors import KMSChainError
from .operators import LabeledOperator

__version__ = "0.1.0"

__all__ = [
    "ChainSpec",
    "GaussianBump",
    "GridSpec",
    "HermiteBasis",
    "KMSChainError",
    "LabeledOperator",
    "PotentialSpec",
]
