"""Spectral analysis of the two-mode non-self-adjoint Hill operator family.

The operators act on [0, 1] as -y'' + (a e^{-2 pi i x} + b e^{2 pi i x}) y
under t-quasiperiodic boundary conditions.  The package computes their
eigenvalues by two independent routes (truncated Fourier matrices and
monodromy shooting), traces the spectral arcs that make up the whole-line
spectrum, evaluates the closed-form band-edge asymptotics, and classifies
spectral singularities at infinity via the biorthogonal pairing and the
arithmetic of arg(ab)/pi.
"""

__version__ = "0.1.0"

from .model import (
    BandIndex,
    MathieuHillError,
    PotentialCoeffs,
    QuasiMomentum,
    SolverConfig,
    DEFAULT_CONFIG,
    fourier_coefficients,
    normalize_quasimomentum,
)

__all__ = [
    "BandIndex",
    "MathieuHillError",
    "PotentialCoeffs",
    "QuasiMomentum",
    "SolverConfig",
    "DEFAULT_CONFIG",
    "fourier_coefficients",
    "normalize_quasimomentum",
    "__version__",
]
