"""Independent oracle: monodromy integration of -y'' + q y = lambda y.

Integrates the fundamental solutions y1, y2 (y1(0)=1, y1'(0)=0, y2(0)=0,
y2'(0)=1) across one period together with their first (and optionally
second) derivatives with respect to lambda, evaluates the Hill discriminant

    disc(lambda) = y2'(1) + y1(1),

and solves the characteristic equation disc(lambda) = 2 cos t by Newton.
Multiple eigenvalues are located as zeros of d disc / d lambda.

The integrator is a hand-rolled Dormand-Prince 5(4) embedded pair acting on
the complex state; lambda-derivatives come from the variational equations
(w'' = (q - lambda) w - y), which are exact to integrator order, rather
than from finite differences.  A fixed-step classical RK4 with the same
right-hand side is provided for Richardson-style cross-checks.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .model import (
    MathieuHillError,
    PotentialCoeffs,
    SolverConfig,
    as_quasimomentum,
)


class IntegrationError(MathieuHillError):
    pass


class NewtonError(MathieuHillError):
    def __init__(self, msg, last_iterate=None, iterations=0):
        super().__init__(msg)
        self.last_iterate = last_iterate
        self.iterations = iterations


class NearCriticalError(NewtonError):
    """Newton stopped on a nearly vanishing derivative: possible multiple
    eigenvalue nearby."""


# Dormand-Prince 5(4) tableau; the last A row doubles as the 5th-order
# weights (FSAL)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 7))
_A[1, :1] = (1 / 5,)
_A[2, :2] = (3 / 40, 9 / 40)
_A[3, :3] = (44 / 45, -56 / 15, 32 / 9)
_A[4, :4] = (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729)
_A[5, :5] = (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656)
_A[6, :6] = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
# y5 - y4 weights for the local error estimate
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200,
               22 / 525, -1 / 40])

_MAX_STEPS = 200_000

try:  # compiled stepper; the pure-numpy fallback below is ~100x slower
    from numba import njit as _njit
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

    def _njit(*a, **k):
        def deco(f):
            return f
        return deco


@_njit(cache=True)
def _rhs_nb(x, y, out, a, b, lam, ncomp):  # pragma: no cover - compiled
    w = cmath.exp(2j * math.pi * x)
    g = a / w + b * w - lam
    out[0] = y[1]
    out[1] = g * y[0]
    out[2] = y[3]
    out[3] = g * y[2]
    out[4] = y[5]
    out[5] = g * y[4] - y[0]
    out[6] = y[7]
    out[7] = g * y[6] - y[2]
    if ncomp == 12:
        out[8] = y[9]
        out[9] = g * y[8] - 2.0 * y[4]
        out[10] = y[11]
        out[11] = g * y[10] - 2.0 * y[6]


@_njit(cache=True)
def _dp45_nb(a, b, lam, rtol, atol, ncomp, max_steps):  # pragma: no cover
    y = np.zeros(ncomp, np.complex128)
    y[0] = 1.0
    y[3] = 1.0
    x = 0.0
    h = min(0.1, 0.5 / (1.0 + abs(lam) ** 0.5))
    k = np.zeros((7, ncomp), np.complex128)
    yi = np.zeros(ncomp, np.complex128)
    _rhs_nb(x, y, k[0], a, b, lam, ncomp)
    est = 0.0
    steps = 0
    while x < 1.0:
        if steps > max_steps:
            return y, est, steps, 2
        if 1.0 - x < h:
            h = 1.0 - x
        if h < 1e-14:
            return y, est, steps, 1
        for i in range(1, 7):
            for c in range(ncomp):
                s = 0j
                for j in range(i):
                    aij = _A[i, j]
                    if aij != 0.0:
                        s += aij * k[j, c]
                yi[c] = y[c] + h * s
            _rhs_nb(x + _C[i] * h, yi, k[i], a, b, lam, ncomp)
        err = 0.0
        emax = 0.0
        for c in range(ncomp):
            e = 0j
            for j in range(7):
                ej = _E[j]
                if ej != 0.0:
                    e += ej * k[j, c]
            ea = abs(e) * h
            emax = max(emax, ea)
            sc = atol + rtol * max(abs(y[c]), abs(yi[c]))
            err = max(err, ea / sc)
        steps += 1
        if err <= 1.0:
            x += h
            for c in range(ncomp):
                y[c] = yi[c]       # A[6] row is the 5th-order solution
                k[0, c] = k[6, c]  # FSAL
            est += emax
        fac = 0.9 * (err + 1e-300) ** -0.2
        if fac < 0.2:
            fac = 0.2
        elif fac > 5.0:
            fac = 5.0
        h *= fac
    return y, est, steps, 0


def _dp45_py(a, b, lam, rtol, atol, ncomp, max_steps):
    def rhs(x, y):
        w = cmath.exp(2j * math.pi * x)
        g = a / w + b * w - lam
        out = np.empty(ncomp, complex)
        out[0], out[1] = y[1], g * y[0]
        out[2], out[3] = y[3], g * y[2]
        out[4], out[5] = y[5], g * y[4] - y[0]
        out[6], out[7] = y[7], g * y[6] - y[2]
        if ncomp == 12:
            out[8], out[9] = y[9], g * y[8] - 2 * y[4]
            out[10], out[11] = y[11], g * y[10] - 2 * y[6]
        return out

    y = np.zeros(ncomp, complex)
    y[0] = 1.0
    y[3] = 1.0
    x = 0.0
    h = min(0.1, 0.5 / (1.0 + math.sqrt(abs(lam))))
    k = [rhs(x, y)] + [None] * 6
    est = 0.0
    steps = 0
    while x < 1.0:
        if steps > max_steps:
            return y, est, steps, 2
        h = min(h, 1.0 - x)
        if h < 1e-14:
            return y, est, steps, 1
        for i in range(1, 7):
            yi = y + h * (_A[i, :i] @ np.vstack(k[:i]))
            k[i] = rhs(x + _C[i] * h, yi)
        err_vec = h * (_E @ np.vstack(k))
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(yi))
        err = float(np.max(np.abs(err_vec) / scale))
        steps += 1
        if err <= 1.0:
            x += h
            y = yi
            k[0] = k[6]
            est += float(np.max(np.abs(err_vec)))
        h *= min(5.0, max(0.2, 0.9 * (err + 1e-300) ** -0.2))
    return y, est, steps, 0


def _integrate_adaptive(pot: PotentialCoeffs, lam: complex, rtol: float,
                        atol: float, second_order: bool):
    """Dormand-Prince 5(4) from x=0 to x=1. Returns (state, est_error, steps)."""
    ncomp = 12 if second_order else 8
    core = _dp45_nb if _HAVE_NUMBA else _dp45_py
    y, est, steps, status = core(complex(pot.a), complex(pot.b), complex(lam),
                                 float(rtol), float(atol), ncomp, _MAX_STEPS)
    if status == 1:
        raise IntegrationError(f"step size underflow (lambda={lam!r})")
    if status == 2:
        raise IntegrationError(f"step limit exceeded (lambda={lam!r})")
    return y, est, steps


@dataclass(frozen=True)
class DiscriminantSample:
    """Monodromy data at one complex lambda.

    y1/y2 are the fundamental solutions evaluated at x=1; disc is the Hill
    discriminant y2p + y1 and disc_dlam its lambda-derivative from the
    variational system.  disc_dlam2 is populated only when the second-order
    variational equations were requested.
    """

    lam: complex
    y1: complex
    y1p: complex
    y2: complex
    y2p: complex
    disc: complex
    disc_dlam: complex
    est_error: float
    disc_dlam2: complex | None = None

    @property
    def wronskian_defect(self) -> float:
        """|y1 y2' - y1' y2 - 1|; must vanish for a trace-free system."""
        return abs(self.y1 * self.y2p - self.y1p * self.y2 - 1.0)

    def char_residual(self, t: float) -> float:
        return abs(self.disc - 2.0 * math.cos(t))


def integrate_fundamental(pot: PotentialCoeffs, lam: complex, cfg: SolverConfig,
                          second_order: bool = False) -> DiscriminantSample:
    """Shoot across one period and sample the discriminant at ``lam``."""
    lam = complex(lam)
    if not (math.isfinite(lam.real) and math.isfinite(lam.imag)):
        raise ValueError(f"lambda must be finite, got {lam!r}")
    tol = cfg.ode_tolerance
    y, est, _ = _integrate_adaptive(pot, lam, rtol=tol, atol=tol, second_order=second_order)
    return DiscriminantSample(
        lam=lam, y1=complex(y[0]), y1p=complex(y[1]), y2=complex(y[2]), y2p=complex(y[3]),
        disc=complex(y[3] + y[0]),
        disc_dlam=complex(y[7] + y[4]),
        est_error=est,
        disc_dlam2=complex(y[11] + y[8]) if second_order else None,
    )


def discriminant_fixed_step(pot: PotentialCoeffs, lam: complex,
                            n_steps: int) -> DiscriminantSample:
    """Classical RK4 with a fixed step; cross-check for the adaptive path.

    Successive halvings of ``n_steps`` admit Richardson extrapolation of
    order 4.
    """
    lam = complex(lam)
    a, b = complex(pot.a), complex(pot.b)

    def rhs(x, y):
        w = cmath.exp(2j * math.pi * x)
        g = a / w + b * w - lam
        return np.array([y[1], g * y[0], y[3], g * y[2],
                         y[5], g * y[4] - y[0], y[7], g * y[6] - y[2]])

    y = np.zeros(8, complex)
    y[0] = 1.0
    y[3] = 1.0
    h = 1.0 / n_steps
    x = 0.0
    for _ in range(n_steps):
        k1 = rhs(x, y)
        k2 = rhs(x + h / 2, y + (h / 2) * k1)
        k3 = rhs(x + h / 2, y + (h / 2) * k2)
        k4 = rhs(x + h, y + h * k3)
        y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        x += h
    return DiscriminantSample(
        lam=lam, y1=complex(y[0]), y1p=complex(y[1]), y2=complex(y[2]), y2p=complex(y[3]),
        disc=complex(y[3] + y[0]), disc_dlam=complex(y[7] + y[4]),
        est_error=float("nan"),
    )


@dataclass(frozen=True)
class NewtonResult:
    lam: complex
    iterations: int
    char_residual: float
    sample: DiscriminantSample


def solve_characteristic(pot: PotentialCoeffs, t, seed: complex,
                         cfg: SolverConfig) -> NewtonResult:
    """Newton iteration on disc(lambda) = 2 cos t starting from ``seed``.

    Convergence requires both a small characteristic residual and a small
    last step; the two-sided test avoids false convergence next to critical
    points, where the derivative collapses and steps blow up instead.
    """
    tq = as_quasimomentum(t)
    target = 2.0 * math.cos(tq.t)
    lam = complex(seed)
    tol = cfg.newton_tolerance
    last = None
    prev_resid = math.inf
    for it in range(1, cfg.max_newton_iters + 1):
        s = integrate_fundamental(pot, lam, cfg)
        last = s
        g = s.disc - target
        resid = abs(g)
        step_est = resid / max(abs(s.disc_dlam), 1e-300)
        stagnating = resid > 0.5 * prev_resid
        if resid < tol and (step_est < tol * (1.0 + abs(lam)) or stagnating):
            return NewtonResult(lam, it, resid, s)
        if stagnating and it >= 4:
            # the residual stopped improving: either we sit on the
            # integrator's noise floor next to a simple root (tiny would-be
            # step: accept with the achieved residual) or the derivative has
            # collapsed under a multiple eigenvalue (huge would-be step)
            if step_est < 1e3 * tol * (1.0 + abs(lam)):
                return NewtonResult(lam, it, resid, s)
            if resid < 1e6 * tol:
                raise NearCriticalError(
                    f"residual floor {resid:.3e} with |d disc/d lambda|="
                    f"{abs(s.disc_dlam):.3e} at lambda={lam!r}; possible "
                    "multiple eigenvalue", last_iterate=lam, iterations=it)
        # a Newton step bigger than the localization scale means we are at
        # a near-critical point, not in a root's basin
        if abs(s.disc_dlam) * (1.0 + abs(lam)) < 10.0 * resid:
            raise NearCriticalError(
                f"|d disc/d lambda|={abs(s.disc_dlam):.3e} too small at lambda={lam!r}; "
                "possible multiple eigenvalue", last_iterate=lam, iterations=it)
        lam = lam - g / s.disc_dlam
        prev_resid = resid
    raise NewtonError(
        f"characteristic Newton did not converge in {cfg.max_newton_iters} iterations "
        f"(last lambda={lam!r}, residual={abs(last.disc - target):.3e})",
        last_iterate=lam, iterations=cfg.max_newton_iters)


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned search region in the complex lambda plane."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_min <= self.re_max and self.im_min <= self.im_max):
            raise ValueError("degenerate rectangle")

    def contains(self, z: complex, pad: float = 0.0) -> bool:
        return (self.re_min - pad <= z.real <= self.re_max + pad
                and self.im_min - pad <= z.imag <= self.im_max + pad)

    @property
    def diameter(self) -> float:
        return math.hypot(self.re_max - self.re_min, self.im_max - self.im_min)


@dataclass(frozen=True)
class CriticalPoint:
    """Zero of d disc / d lambda, with the discriminant value attached so
    callers can test |disc| <= 2-type spectrum membership."""

    lam: complex
    disc: complex
    disc_dlam_residual: float


@dataclass(frozen=True)
class CriticalScan:
    points: tuple[CriticalPoint, ...]
    possibly_incomplete: bool
    note: str = ""


def find_critical_points(pot: PotentialCoeffs, region: Rectangle,
                         grid_density: int, cfg: SolverConfig) -> CriticalScan:
    """Locate zeros of the discriminant derivative inside ``region``.

    Grid seeding followed by Newton on disc_dlam (second derivative from the
    second-order variational system).  Completeness is best-effort: when the
    grid spacing exceeds the natural spacing of critical points (about
    pi * sqrt(lambda) for this operator family), the scan says so.
    """
    if grid_density < 1:
        raise ValueError("grid_density must be >= 1")
    res = np.linspace(region.re_min, region.re_max, grid_density + 1)
    ims = np.linspace(region.im_min, region.im_max, grid_density + 1)
    lam_scale = max(abs(complex(region.re_min, region.im_min)),
                    abs(complex(region.re_max, region.im_max)))
    spacing = max((region.re_max - region.re_min) / max(grid_density, 1),
                  (region.im_max - region.im_min) / max(grid_density, 1))
    natural = math.pi * (1.0 + math.sqrt(lam_scale))
    incomplete = spacing > 0.5 * natural
    note = ("grid spacing exceeds half the natural critical-point spacing; "
            "zeros may be missed" if incomplete else "")

    found: list[CriticalPoint] = []
    dscale = 0.0
    samples = {}
    for re in res:
        for im in ims:
            z = complex(re, im)
            s = integrate_fundamental(pot, z, cfg, second_order=True)
            samples[z] = s
            dscale = max(dscale, abs(s.disc_dlam))
    pad = 0.1 * (region.diameter + 1.0)
    for z0, s0 in samples.items():
        lam = z0
        s = s0
        ok = False
        for _ in range(cfg.max_newton_iters):
            if abs(s.disc_dlam2) == 0:
                break
            step = s.disc_dlam / s.disc_dlam2
            lam = lam - step
            if not region.contains(lam, pad=pad):
                break
            s = integrate_fundamental(pot, lam, cfg, second_order=True)
            if abs(step) < 1e-10 * (1.0 + abs(lam)):
                ok = True
                break
        if not ok or not region.contains(lam, pad=1e-9 * (1.0 + abs(lam))):
            continue
        if abs(s.disc_dlam) > 1e-7 * (dscale + 1e-30):
            continue
        if any(abs(lam - p.lam) < 1e-6 * (1.0 + abs(lam)) for p in found):
            continue
        found.append(CriticalPoint(lam=lam, disc=s.disc,
                                   disc_dlam_residual=abs(s.disc_dlam)))
    found.sort(key=lambda p: (p.lam.real, p.lam.imag))
    return CriticalScan(points=tuple(found), possibly_incomplete=incomplete, note=note)


def multiplicity_check(pot: PotentialCoeffs, t, lam: complex,
                       cfg: SolverConfig) -> str:
    """Classify an approximate eigenvalue as 'simple', 'multiple' or
    'indeterminate' from the discriminant derivative.

    The derivative is compared at the natural scale 1/(1+sqrt|lambda|) of
    the free discriminant's derivative.
    """
    tq = as_quasimomentum(t)
    s = integrate_fundamental(pot, lam, cfg)
    scale = 1.0 / (1.0 + math.sqrt(abs(lam)))
    resid = s.char_residual(tq.t)
    if abs(s.disc_dlam) > 1e-6 * scale:
        return "simple"
    if resid < 1e4 * cfg.newton_tolerance * (1.0 + abs(s.disc)) and abs(s.disc_dlam) < 1e-9 * scale:
        return "multiple"
    return "indeterminate"
