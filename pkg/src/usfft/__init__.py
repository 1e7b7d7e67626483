"""Uniform sparse FFT surrogates for parametric elliptic PDEs."""

from .blackbox import BlackBoxError, CachedBlackBox, TrigPolynomial
from .config import ConfigError, ExperimentConfig
from .detect import Approximant, DetectionConfig, read_archive, usfft, write_archive
from .freq import CandidateGrid, FormatError, FrequencySet, nnz_partition
from .lattice import Rank1Lattice, build_cover, find_reconstructing, lattice_coefficients
from .pde import Mesh, PdeModel, as_blackbox, solve
from .periodize import Periodization
from .post import baseline_index_set, error_report, expectation, gsi_by_nnz, mc_expectation

__version__ = "0.1.0"

__all__ = [
    "Approximant", "BlackBoxError", "CachedBlackBox", "CandidateGrid", "ConfigError",
    "DetectionConfig", "ExperimentConfig", "FormatError", "FrequencySet", "Mesh", "PdeModel",
    "Periodization", "Rank1Lattice", "TrigPolynomial", "as_blackbox", "baseline_index_set",
    "build_cover", "error_report", "expectation", "find_reconstructing", "gsi_by_nnz",
    "lattice_coefficients", "mc_expectation", "nnz_partition", "read_archive", "solve",
    "usfft", "write_archive",
]
