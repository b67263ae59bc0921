"""Closed-form asymptotics for nearly degenerate band-edge pairs.

For large |n| the two eigenvalues near (2 pi n +- t)^2 are governed by an
effective two-level system: diagonal shifts accumulated from off-resonant
walks through intermediate Fourier modes, and a pair of one-way couplings
obtained by walking the 2n-step ladder between the resonant modes.  The
couplings carry the factors a^{2n} and b^{2n}, which underflow binary64
beyond small n, so everything here is evaluated in log space and only
exponentiated on request.

Conventions:

* ``coupling_b`` multiplies the -n amplitude in the +n equation and is
  powered by b; ``coupling_a`` is its mirror, powered by a.
* ``discriminant`` is the quarter discriminant of the two-level system,
  (detuning + half_difference)^2 + coupling_b * coupling_a; its square root
  is half the eigenvalue splitting.
* At the band centers ((2 pi n)^2 at t=0) the couplings reduce to the
  closed forms b^{2n} ((2 pi)^{2n-1} (2n-1)!)^{-2} and its a-powered twin,
  whose geometric mean gives the gap formulas in ``predict_gaps``.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass

from .model import (
    TWO_PI,
    MathieuHillError,
    PotentialCoeffs,
    SolverConfig,
    as_quasimomentum,
)

# the two-level reduction holds for t within this distance of 0 or pi
ENDPOINT_REGIME = 0.02


class PoleProximityError(MathieuHillError):
    pass


class PredictorError(MathieuHillError):
    pass


def _log_ladder_norm(n: int, antiperiodic: bool) -> float:
    """log of the squared ladder product at the band center.

    Periodic: ((2 pi)^{2n-1} (2n-1)!)^2; antiperiodic: ((2 pi)^{2n} (2n)!)^2.
    """
    if antiperiodic:
        return 2.0 * (2 * n * math.log(TWO_PI) + math.lgamma(2 * n + 1))
    return 2.0 * ((2 * n - 1) * math.log(TWO_PI) + math.lgamma(2 * n))


@dataclass(frozen=True)
class GapPredictors:
    """Log-space band-edge constants for one band index n.

    log_coupling_a/b are complex logs of a^{2n} K_n and b^{2n} K_n with
    K_n = ((2 pi)^{2n-1}(2n-1)!)^{-2}; None marks an identically zero
    coupling (a = 0 or b = 0).  log_gap_* are real logs of the predicted
    endpoint gaps; None marks a zero gap (ab = 0).
    """

    n: int
    log_coupling_a: complex | None
    log_coupling_b: complex | None
    log_gap_periodic: float | None
    log_gap_antiperiodic: float | None

    @property
    def coupling_a(self) -> complex:
        return cmath.exp(self.log_coupling_a) if self.log_coupling_a is not None else 0j

    @property
    def coupling_b(self) -> complex:
        return cmath.exp(self.log_coupling_b) if self.log_coupling_b is not None else 0j

    @property
    def gap_periodic(self) -> float:
        return _safe_exp(self.log_gap_periodic)

    @property
    def gap_antiperiodic(self) -> float:
        return _safe_exp(self.log_gap_antiperiodic)


def _safe_exp(logv: float | None) -> float:
    if logv is None:
        return 0.0
    try:
        return math.exp(logv)
    except OverflowError:
        return math.inf


def gap_predictors(n: int, pot: PotentialCoeffs) -> GapPredictors:
    """Band-edge constants and predicted gaps for band n >= 1."""
    if n < 1:
        raise ValueError(f"band index must be >= 1, got {n}")
    log_norm = _log_ladder_norm(n, antiperiodic=False)
    log_a = 2 * n * cmath.log(pot.a) - log_norm if pot.a != 0 else None
    log_b = 2 * n * cmath.log(pot.b) - log_norm if pot.b != 0 else None
    ab = abs(pot.product_ab())
    if ab == 0:
        lg_per = lg_anti = None
    else:
        lg_per = math.log(2.0) + n * math.log(ab) - log_norm
        lg_anti = (math.log(2.0) + (n + 0.5) * math.log(ab)
                   - _log_ladder_norm(n, antiperiodic=True))
    return GapPredictors(n=n, log_coupling_a=log_a, log_coupling_b=log_b,
                         log_gap_periodic=lg_per, log_gap_antiperiodic=lg_anti)


def predict_gaps(n: int, pot: PotentialCoeffs) -> tuple[float, float]:
    """Predicted endpoint gaps (|pair split at t=0|, |pair split at t=pi|).

    Depends on the potential only through |ab|, hence gauge invariant.
    """
    gp = gap_predictors(n, pot)
    return gp.gap_periodic, gp.gap_antiperiodic


def _check_pole(lam: complex, pole: float):
    if abs(lam - pole) < 1e-8 * (1.0 + abs(pole)):
        raise PoleProximityError(
            f"lambda={lam!r} within tolerance of resolvent pole {pole!r}")


def leading_coupling_terms(n: int, pot: PotentialCoeffs, lam: complex, t,
                           antiperiodic: bool = False) -> tuple[complex, complex]:
    """Leading ladder terms (coupling_b, coupling_a) at (lam, t).

    Evaluated as exp of a complex log sum so the 2n-factor products neither
    underflow nor overflow prematurely; lower-order ladder terms vanish
    identically for this two-mode potential.
    """
    if n < 1:
        raise ValueError(f"band index must be >= 1, got {n}")
    tq = as_quasimomentum(t)
    lam = complex(lam)
    steps = 2 * n if antiperiodic else 2 * n - 1
    power = 2 * n + 1 if antiperiodic else 2 * n

    def _ladder(coeff: complex, poles: list[float]) -> complex:
        if coeff == 0:
            return 0j
        logv = power * cmath.log(coeff)
        for p in poles:
            _check_pole(lam, p)
            logv -= cmath.log(lam - p)
        try:
            return cmath.exp(logv)
        except OverflowError:
            return complex(math.inf, 0.0)

    poles_b = [(TWO_PI * (n - s) + tq.t) ** 2 for s in range(1, steps + 1)]
    if antiperiodic:
        poles_a = [(TWO_PI * (n + 1 - s) - tq.t) ** 2 for s in range(1, steps + 1)]
    else:
        poles_a = [(TWO_PI * (n - s) - tq.t) ** 2 for s in range(1, steps + 1)]
    return _ladder(pot.b, poles_b), _ladder(pot.a, poles_a)


def _walk_sum(pot: PotentialCoeffs, k: int, forbidden: tuple[int, int],
              pole_of, lam: complex) -> complex:
    """Sum over +-1 walks of length k avoiding the forbidden partial sums.

    Each walk contributes (product of hop coefficients) * (closing
    coefficient) / (product of resolvent factors at the partial sums); the
    closing coefficient is a for total displacement +1 and b for -1, and
    zero otherwise, so only odd k contribute.
    """
    coeff = {1: pot.b, -1: pot.a}
    total = 0j
    for path in itertools.product((1, -1), repeat=k):
        w = 1.0 + 0j
        partial = 0
        denom_logs = 0j
        ok = True
        for step in path:
            partial += step
            if partial in forbidden:
                ok = False
                break
            w *= coeff[step]
            if w == 0:
                ok = False
                break
            pole = pole_of(partial)
            _check_pole(lam, pole)
            denom_logs += cmath.log(lam - pole)
        if not ok:
            continue
        closing = {1: pot.a, -1: pot.b}.get(partial, 0j)
        if closing == 0:
            continue
        total += closing * w * cmath.exp(-denom_logs)
    return total


def diagonal_corrections(n: int, pot: PotentialCoeffs, lam: complex, t,
                         n_terms: int = 3,
                         antiperiodic: bool = False) -> tuple[complex, complex, complex]:
    """Truncated diagonal shifts (shift_plus, shift_minus, half_difference).

    Sums the odd walk orders 1, 3, ..., 2*n_terms - 1; even orders vanish
    for the two-mode potential.  half_difference is
    (shift_plus - shift_minus) / 2 and combines with the bare detuning in
    the two-level discriminant.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    if n < 1:
        raise ValueError(f"band index must be >= 1, got {n}")
    tq = as_quasimomentum(t)
    lam = complex(lam)
    if antiperiodic:
        plus_forbidden = (0, 2 * n + 1)
        minus_forbidden = (0, -(2 * n + 1))
        pole_plus = lambda p: (TWO_PI * (n - p) + tq.t) ** 2
        pole_minus = lambda p: (TWO_PI * (n + 1 + p) - tq.t) ** 2
    else:
        plus_forbidden = (0, 2 * n)
        minus_forbidden = (0, -2 * n)
        pole_plus = lambda p: (TWO_PI * (n - p) + tq.t) ** 2
        pole_minus = lambda p: (TWO_PI * (n + p) - tq.t) ** 2
    shift_plus = 0j
    shift_minus = 0j
    for m in range(1, n_terms + 1):
        k = 2 * m - 1
        shift_plus += _walk_sum(pot, k, plus_forbidden, pole_plus, lam)
        shift_minus += _walk_sum(pot, k, minus_forbidden, pole_minus, lam)
    return shift_plus, shift_minus, (shift_plus - shift_minus) / 2.0


@dataclass(frozen=True)
class PairSeries:
    """Assembled two-level data at one (n, lam, t)."""

    n: int
    t: float
    lam: complex
    shift_plus: complex
    shift_minus: complex
    coupling_b: complex
    coupling_a: complex
    half_difference: complex
    detuning: float
    discriminant: complex
    truncation_order: int
    antiperiodic: bool


def series_terms(n: int, pot: PotentialCoeffs, lam: complex, t,
                 n_terms: int = 3, antiperiodic: bool = False) -> PairSeries:
    """Evaluate shifts, couplings and the two-level discriminant."""
    tq = as_quasimomentum(t)
    sp, sm, half = diagonal_corrections(n, pot, lam, tq, n_terms, antiperiodic)
    cb, ca = leading_coupling_terms(n, pot, lam, tq, antiperiodic)
    if antiperiodic:
        detuning = TWO_PI * (2 * n + 1) * (tq.t - math.pi)
    else:
        detuning = 2.0 * TWO_PI * n * tq.t
    disc = (detuning + half) ** 2 + cb * ca
    return PairSeries(n=n, t=tq.t, lam=complex(lam), shift_plus=sp, shift_minus=sm,
                      coupling_b=cb, coupling_a=ca, half_difference=half,
                      detuning=detuning, discriminant=disc,
                      truncation_order=2 * n_terms - 1, antiperiodic=antiperiodic)


def splitting_discriminant(n: int, pot: PotentialCoeffs, lam: complex, t,
                           n_terms: int = 3) -> complex:
    """The two-level discriminant (detuning + half_difference)^2 + couplings."""
    return series_terms(n, pot, lam, t, n_terms).discriminant


def collision_quasimomentum(n: int, pot: PotentialCoeffs) -> float | None:
    """Quasi-momentum magnitude where the two-level discriminant can vanish.

    Solves (2 * 2 pi n t)^2 = |coupling_a * coupling_b| at the band center;
    an actual eigenvalue collision requires the phases to line up as well,
    so this is a search hint, not a certificate.  None when ab = 0.
    """
    gp = gap_predictors(n, pot)
    if gp.log_coupling_a is None or gp.log_coupling_b is None:
        return None
    log_mean = 0.5 * (gp.log_coupling_a.real + gp.log_coupling_b.real)
    return _safe_exp(log_mean - math.log(2.0 * TWO_PI * n))


@dataclass(frozen=True)
class PredictedPair:
    """Eigenvalue pair prediction at one (n, t).

    ``first``/``second`` follow the two fixed-point branches; ``labels``
    gives the band labels they continue from (regime dependent: the t=pi
    pair couples n with -(n+1)).
    """

    first: complex
    second: complex
    regime: str
    iterations: int
    labels: tuple[int, int]


def _sqrt_toward(z: complex, reference: complex) -> complex:
    """Square root of z on the branch continuous with ``reference``.

    When the reference is negligible the principal branch is returned; the
    two-level eigenvalues then simply swap roles, which callers treat as an
    unordered pair.
    """
    s = cmath.sqrt(z)
    if reference != 0 and (s.conjugate() * reference).real < 0:
        return -s
    return s


def predict_pair(n: int, pot: PotentialCoeffs, t, cfg: SolverConfig,
                 n_terms: int = 3) -> PredictedPair:
    """Predict both eigenvalues of band pair n at quasi-momentum t.

    Near t=0 (resp. t=pi) the two-level fixed point is iterated in lambda;
    mid-interval only the free leading terms are meaningful and are
    returned as-is.  The square-root branch is fixed by continuity from the
    zero-potential limit, where the discriminant is the squared detuning.
    """
    if n < 1:
        raise ValueError(f"band index must be >= 1, got {n}")
    tq = as_quasimomentum(t)
    tv = tq.t
    if not 0.0 <= tv <= math.pi:
        raise ValueError("prediction is parameterized on t in [0, pi]")
    if tv <= ENDPOINT_REGIME:
        regime = "periodic"
    elif tv >= math.pi - ENDPOINT_REGIME:
        regime = "antiperiodic"
    else:
        regime = "mid"

    if regime == "mid":
        lam1 = (TWO_PI * n - tv) ** 2
        lam2 = (TWO_PI * n + tv) ** 2
        return PredictedPair(first=complex(lam1), second=complex(lam2),
                             regime=regime, iterations=0, labels=(-n, n))

    anti = regime == "antiperiodic"
    if anti:
        base = (TWO_PI * n + tv) ** 2
        starts = (base, (TWO_PI * (n + 1) - tv) ** 2)
        labels = (n, -(n + 1))
    else:
        base = (TWO_PI * n + tv) ** 2
        starts = ((TWO_PI * n - tv) ** 2, base)
        labels = (-n, n)

    tol = max(cfg.newton_tolerance, 1e-14)
    preds = []
    iters_used = 0
    for j, start in zip((1, 2), starts):
        lam = complex(start)
        prev_step = math.inf
        growth = 0
        for it in range(1, cfg.max_newton_iters + 1):
            ps = series_terms(n, pot, lam, tq, n_terms, antiperiodic=anti)
            reference = -(ps.detuning + ps.half_difference) if anti \
                else (ps.detuning + ps.half_difference)
            root = _sqrt_toward(ps.discriminant, reference)
            mid = base - ps.detuning + 0.5 * (ps.shift_plus + ps.shift_minus)
            new = mid + ((-1) ** j) * root
            step = abs(new - lam)
            lam = new
            iters_used = max(iters_used, it)
            if step < tol * (1.0 + abs(lam)):
                break
            growth = growth + 1 if step > prev_step else 0
            if growth >= 3:
                raise PredictorError(
                    f"fixed point not contracting for n={n}, t={tv!r}, branch j={j}: "
                    f"last steps grew to {step:.3e}")
            prev_step = step
        else:
            raise PredictorError(
                f"fixed point did not converge in {cfg.max_newton_iters} iterations "
                f"for n={n}, t={tv!r}, branch j={j}")
        preds.append(lam)
    return PredictedPair(first=preds[0], second=preds[1], regime=regime,
                         iterations=iters_used, labels=labels)
