"""Tensor-network phase-difference estimation on the 1D Hubbard model."""

from .circuits import BrickWallCircuit, init_brickwall
from .compress import BrickWallCompressor, enhance_overlap, environment_gate, optimize_evolution, optimize_prep
from .model import HubbardSpec, build_hubbard, exact_eigs
from .mps import MPO, MPS
from .pipeline import RunConfig, run_pipeline
from .spectral import MatrixPencilEstimator, TimeSeries, estimate_gap

__version__ = "0.1.0"

__all__ = [
    "BrickWallCircuit",
    "BrickWallCompressor",
    "HubbardSpec",
    "MPO",
    "MPS",
    "MatrixPencilEstimator",
    "RunConfig",
    "TimeSeries",
    "build_hubbard",
    "enhance_overlap",
    "environment_gate",
    "estimate_gap",
    "exact_eigs",
    "init_brickwall",
    "optimize_evolution",
    "optimize_prep",
    "run_pipeline",
]
