"""Domain types shared by all computational modules.

The operator family under study acts on [0, 1] as -y'' + q(x) y with the
two-mode potential q(x) = a e^{-2 pi i x} + b e^{2 pi i x} and boundary
conditions y(1) = e^{it} y(0), y'(1) = e^{it} y'(0).  Everything downstream
is parameterized by the coefficient pair (a, b), the quasi-momentum t and a
truncation/tolerance configuration.

All types here are immutable; all functions are pure.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import cached_property

TWO_PI = 2.0 * math.pi


class MathieuHillError(Exception):
    """Base class for numerical failures raised by this package."""


def _require_finite(name: str, z: complex) -> complex:
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"{name} must be finite, got {z!r}")
    return z


@dataclass(frozen=True)
class PotentialCoeffs:
    """Coefficient pair (a, b) of q(x) = a e^{-2 pi i x} + b e^{2 pi i x}.

    The spectrum depends on (a, b) only through the product a*b (gauge
    invariance), so ``product_ab`` is the quantity most computations key on.
    """

    a: complex
    b: complex

    def __post_init__(self):
        object.__setattr__(self, "a", _require_finite("a", self.a))
        object.__setattr__(self, "b", _require_finite("b", self.b))

    @cached_property
    def _ab(self) -> complex:
        return self.a * self.b

    def product_ab(self) -> complex:
        return self._ab

    @property
    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    @property
    def is_self_adjoint(self) -> bool:
        """True when b equals conj(a), making every H_t self-adjoint."""
        return self.b == self.a.conjugate()

    def q(self, x: float) -> complex:
        """Evaluate the potential at a point."""
        w = cmath.exp(2j * math.pi * x)
        return self.a / w + self.b * w


def fourier_coefficients(pot: PotentialCoeffs) -> dict[int, complex]:
    """Fourier map of the potential: index -1 carries a, index +1 carries b.

    Indices with zero coefficient are omitted, so the zero potential yields
    an empty map.
    """
    out: dict[int, complex] = {}
    if pot.a != 0:
        out[-1] = pot.a
    if pot.b != 0:
        out[1] = pot.b
    return out


@dataclass(frozen=True)
class QuasiMomentum:
    """Quasi-momentum t, stored normalized into (-pi, pi]."""

    t: float

    def __post_init__(self):
        t = float(self.t)
        if not math.isfinite(t):
            raise ValueError(f"quasi-momentum must be finite, got {t!r}")
        # fold into (-pi, pi]; the right endpoint is included, the left is not
        t = math.remainder(t, TWO_PI)
        if t <= -math.pi:
            t += TWO_PI
        object.__setattr__(self, "t", t)

    def __float__(self) -> float:
        return self.t


def normalize_quasimomentum(t_raw: float) -> QuasiMomentum:
    """Fold a real number into the fundamental interval (-pi, pi]."""
    return QuasiMomentum(t_raw)


def as_quasimomentum(t) -> QuasiMomentum:
    return t if isinstance(t, QuasiMomentum) else QuasiMomentum(float(t))


@dataclass(frozen=True, order=True)
class BandIndex:
    """Signed band label n.

    Near the degenerate points t in {0, pi} the literature indexes the two
    members of a colliding pair by (|n|, j) with j in {1, 2}; the signed
    label used throughout this package identifies j=1 with -|n| and j=2
    with +|n|.
    """

    n: int

    def __post_init__(self):
        object.__setattr__(self, "n", int(self.n))

    @property
    def j(self) -> int:
        """Sub-band index: 1 for negative labels, 2 otherwise."""
        return 1 if self.n < 0 else 2

    @property
    def magnitude(self) -> int:
        return abs(self.n)

    @classmethod
    def from_subband(cls, magnitude: int, j: int) -> "BandIndex":
        if j not in (1, 2):
            raise ValueError(f"sub-band index must be 1 or 2, got {j}")
        if magnitude < 0:
            raise ValueError("magnitude must be non-negative")
        return cls(-magnitude if j == 1 else magnitude)

    def __int__(self) -> int:
        return self.n


@dataclass(frozen=True)
class SolverConfig:
    """Numerical knobs: truncation width and tolerances.

    truncation_half_width M keeps Fourier modes -M..M; labels with
    |n| > M - 8 sit too close to the truncation boundary to be trusted.
    """

    truncation_half_width: int = 32
    ode_tolerance: float = 1e-12
    newton_tolerance: float = 1e-12
    max_newton_iters: int = 60
    eig_deflation_tol: float = 1e-9
    # labels with |n| <= asymptotic_floor are computed but carry no
    # asymptotic-formula guarantee
    asymptotic_floor: int = 3

    def __post_init__(self):
        if self.truncation_half_width < 1:
            raise ValueError("truncation_half_width must be >= 1")
        for name in ("ode_tolerance", "newton_tolerance", "eig_deflation_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.max_newton_iters < 1:
            raise ValueError("max_newton_iters must be >= 1")

    @property
    def M(self) -> int:
        return self.truncation_half_width

    def reliable_band_limit(self) -> int:
        """Largest |n| whose labeled eigenvalue is truncation-reliable."""
        return self.truncation_half_width - 8

    def for_band(self, n_max: int) -> "SolverConfig":
        """Config with the truncation widened to cover labels up to |n| = n_max."""
        need = abs(int(n_max)) + 8
        if self.truncation_half_width >= need:
            return self
        return SolverConfig(
            truncation_half_width=need,
            ode_tolerance=self.ode_tolerance,
            newton_tolerance=self.newton_tolerance,
            max_newton_iters=self.max_newton_iters,
            eig_deflation_tol=self.eig_deflation_tol,
            asymptotic_floor=self.asymptotic_floor,
        )


DEFAULT_CONFIG = SolverConfig()
