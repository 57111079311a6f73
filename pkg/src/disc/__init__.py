"""Differential spectral clustering of features across datasets.

Finds groups of features whose connectivity is specific to one dataset by
projecting out the diffusion structure of the other dataset(s).
"""
__version__ = "0.1.0"

from .data_io import DataMatrix, align, load_csv, save_csv
from .errors import DiscError, InputError, NumericError
from .feature_graph import FeatureGraph, KernelSpec, build_graph
from .spectral import (DifferentialResult, Projector, SpectralBasis, complement_projector, differential_vectors,
                       disc_multi, disc_pair, leading_eigenvectors)
from .synth import ToySpec, generate

__all__ = [
    "DataMatrix", "align", "load_csv", "save_csv", "DiscError", "InputError", "NumericError",
    "FeatureGraph", "KernelSpec", "build_graph", "DifferentialResult", "Projector", "SpectralBasis",
    "complement_projector", "differential_vectors", "disc_multi", "disc_pair", "leading_eigenvectors",
    "ToySpec", "generate",
]
