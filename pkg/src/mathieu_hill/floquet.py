"""Truncated Fourier-basis matrix of H_t and its complex eigendecomposition.

In the basis e^{i(2 pi n + t)x}, n = -M..M, the operator acts as a
tridiagonal matrix: diagonal (2 pi n + t)^2, constant superdiagonal a
(row n couples to c_{n+1} with weight a) and constant subdiagonal b.

Two solver paths are provided:

* a dense LAPACK path (``eigen_all``) used for everything at ordinary
  precision, and
* a determinant-recurrence Newton path in arbitrary precision
  (``charpoly_newton_hp`` / ``eigenvector_hp``) for nearly colliding
  eigenvalue pairs whose separation falls below what double precision can
  resolve (band-edge gaps shrink super-exponentially in n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from mpmath import mp, mpc, mpf
from scipy.optimize import linear_sum_assignment

from .model import (
    TWO_PI,
    BandIndex,
    MathieuHillError,
    PotentialCoeffs,
    QuasiMomentum,
    SolverConfig,
    as_quasimomentum,
)


class EigensolverError(MathieuHillError):
    pass


class LabelingError(MathieuHillError):
    pass


@dataclass(frozen=True)
class FloquetMatrix:
    """Tridiagonal representation of H_t on modes -M..M."""

    t: QuasiMomentum
    M: int
    diagonal: np.ndarray          # real, (2 pi n + t)^2 for n = -M..M
    superdiagonal_value: complex  # a
    subdiagonal_value: complex    # b

    @property
    def size(self) -> int:
        return 2 * self.M + 1

    @property
    def scale(self) -> float:
        """Crude operator-norm scale used for residual tolerances."""
        return float(np.max(np.abs(self.diagonal))) + abs(self.superdiagonal_value) + abs(self.subdiagonal_value)

    def centers(self) -> np.ndarray:
        """Unperturbed eigenvalues (2 pi n + t)^2 indexed n = -M..M."""
        return self.diagonal.copy()

    def to_dense(self) -> np.ndarray:
        T = np.diag(self.diagonal.astype(complex))
        N = self.size
        idx = np.arange(N - 1)
        T[idx, idx + 1] = self.superdiagonal_value
        T[idx + 1, idx] = self.subdiagonal_value
        return T

    def apply(self, vec: np.ndarray) -> np.ndarray:
        out = self.diagonal * vec
        out[:-1] = out[:-1] + self.superdiagonal_value * vec[1:]
        out[1:] = out[1:] + self.subdiagonal_value * vec[:-1]
        return out


def build_matrix(pot: PotentialCoeffs, t, M: int) -> FloquetMatrix:
    """Assemble the truncated matrix for modes -M..M."""
    if M < 1:
        raise ValueError(f"truncation half-width must be >= 1, got {M}")
    tq = as_quasimomentum(t)
    n = np.arange(-M, M + 1)
    diag = (TWO_PI * n + tq.t) ** 2
    return FloquetMatrix(t=tq, M=int(M), diagonal=diag,
                         superdiagonal_value=pot.a, subdiagonal_value=pot.b)


def eigen_all(mat: FloquetMatrix, cfg: SolverConfig) -> list[tuple[complex, np.ndarray]]:
    """Full eigendecomposition; returns 2M+1 (eigenvalue, unit vector) pairs.

    Every returned pair is residual-checked against the matrix; pairs whose
    residual exceeds cfg.eig_deflation_tol * scale trigger a failure rather
    than being silently returned.
    """
    T = mat.to_dense()
    try:
        w, V = scipy.linalg.eig(T)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise EigensolverError(f"dense eigensolver did not converge: {exc}") from exc
    out = []
    tol = cfg.eig_deflation_tol * mat.scale
    bad = []
    for k in range(mat.size):
        vec = V[:, k]
        vec = vec / np.linalg.norm(vec)
        res = np.linalg.norm(mat.apply(vec) - w[k] * vec)
        if res > tol:
            bad.append((k, res))
        out.append((complex(w[k]), vec))
    if bad:
        raise EigensolverError(
            f"{len(bad)} eigenpairs exceed residual tolerance {tol:.3e}: indices {[k for k, _ in bad]}")
    return out


@dataclass(frozen=True)
class EigenPair:
    """A labeled eigenvalue with its unit Fourier coefficient vector.

    amp_plus / amp_minus are the coefficients at modes +n and -n; together
    with tail_norm they satisfy |amp_plus|^2 + |amp_minus|^2 + tail_norm^2 = 1
    for n != 0.
    """

    label: BandIndex
    lam: complex
    coeffs: np.ndarray
    amp_plus: complex
    amp_minus: complex
    residual_norm: float
    truncation_unreliable: bool = False
    ambiguous: bool = False

    @property
    def tail_norm(self) -> float:
        n = self.label.magnitude
        M = (len(self.coeffs) - 1) // 2
        mask = np.ones(len(self.coeffs), bool)
        mask[M + n] = False
        mask[M - n] = False
        return float(np.linalg.norm(self.coeffs[mask]))


def ambiguity_radius(n: int) -> float:
    """Empirical localization radius used for ambiguity flagging."""
    return max(1.0, 4.0 * math.pi * abs(n) * 0.05)


def label_bands(eigs: list[tuple[complex, np.ndarray]], mat: FloquetMatrix,
                cfg: SolverConfig) -> dict[int, EigenPair]:
    """Assign eigenvalues to band labels n = -M..M.

    Uses a globally optimal one-to-one assignment of eigenvalues to the
    unperturbed centers (2 pi n + t)^2 (never per-eigenvalue independent
    nearest, which double-assigns near closed gaps).  Labels with
    |n| > M - 8 are flagged truncation-unreliable; assignments with an
    equidistant competitor or falling outside the localization disk are
    flagged ambiguous instead of being silently resolved.
    """
    M = mat.M
    if len(eigs) != mat.size:
        raise LabelingError(f"expected {mat.size} eigenvalues, got {len(eigs)}")
    centers = mat.centers()
    w = np.array([lam for lam, _ in eigs])
    cost = np.abs(w[None, :] - centers[:, None])
    rows, cols = linear_sum_assignment(cost)
    reliable = cfg.reliable_band_limit()
    out: dict[int, EigenPair] = {}
    for i, k in zip(rows, cols):
        n = int(i) - M
        lam, vec = eigs[k]
        d1 = cost[i, k]
        others = np.delete(cost[i, :], k)
        d2 = float(others.min()) if others.size else math.inf
        # ambiguous when a competitor eigenvalue sits at a comparable
        # distance from this center (degenerate-center regions near t=0, pi)
        # or when the assigned eigenvalue escapes the localization disk
        ambiguous = (d2 < 10.0 * d1 + 1e-9 * (1.0 + abs(centers[i]))) or (d1 > ambiguity_radius(n))
        res = float(np.linalg.norm(mat.apply(vec) - lam * vec))
        out[n] = EigenPair(
            label=BandIndex(n), lam=lam, coeffs=vec,
            amp_plus=complex(vec[M + abs(n)]) if abs(n) <= M else 0j,
            amp_minus=complex(vec[M - abs(n)]) if abs(n) <= M else 0j,
            residual_norm=res,
            truncation_unreliable=abs(n) > reliable,
            ambiguous=bool(ambiguous),
        )
    return out


def labeled_eigenpairs(pot: PotentialCoeffs, t, cfg: SolverConfig) -> dict[int, EigenPair]:
    """Convenience: build the matrix, diagonalize and label in one call."""
    mat = build_matrix(pot, t, cfg.truncation_half_width)
    return label_bands(eigen_all(mat, cfg), mat, cfg)


def eigenfunction_components(pair: EigenPair) -> tuple[complex, complex, float]:
    """Split a labeled eigenvector into (amp_plus, amp_minus, tail_norm)."""
    return pair.amp_plus, pair.amp_minus, pair.tail_norm


# ---------------------------------------------------------------------------
# high-precision path: determinant-recurrence Newton + inverse iteration
# ---------------------------------------------------------------------------

def _hp_inputs(mat: FloquetMatrix):
    a = mpc(complex(mat.superdiagonal_value))
    b = mpc(complex(mat.subdiagonal_value))
    t = mpf(float(mat.t.t))
    diag = [(2 * mp.pi * k + t) ** 2 for k in range(-mat.M, mat.M + 1)]
    return a, b, diag


def charpoly_newton_hp(mat: FloquetMatrix, seed: complex, dps: int = 50,
                       avoid: tuple = (), max_iters: int = 400):
    """One eigenvalue of the tridiagonal matrix to ``dps`` digits.

    Newton iteration on the characteristic determinant evaluated by the
    three-term recurrence; roots listed in ``avoid`` are deflated so the
    second member of a close pair can be found from a nearby seed.
    """
    with mp.workdps(dps):
        a, b, diag = _hp_inputs(mat)
        ab = a * b
        # keep mpmath seeds at full precision; only foreign types go
        # through complex()
        lam = mpc(seed) if isinstance(seed, (mpc, mpf)) else mpc(complex(seed))
        tol = mpf(10) ** (-dps + 6)
        for _ in range(max_iters):
            p_prev, p = mpc(1), diag[0] - lam
            dp_prev, dp = mpc(0), mpc(-1)
            for k in range(1, len(diag)):
                p_next = (diag[k] - lam) * p - ab * p_prev
                dp_next = -p + (diag[k] - lam) * dp - ab * dp_prev
                p_prev, p = p, p_next
                dp_prev, dp = dp, dp_next
            g = dp / p
            for r in avoid:
                g = g - 1 / (lam - r)
            step = 1 / g
            lam = lam - step
            if abs(step) < tol * (1 + abs(lam)):
                return lam
        raise EigensolverError(
            f"determinant-recurrence Newton did not converge from seed {complex(seed)!r} at dps={dps}")


def eigenvector_hp(mat: FloquetMatrix, lam, dps: int = 50) -> list:
    """Unit eigenvector for a high-precision eigenvalue, by inverse iteration.

    The tridiagonal solve is a Thomas sweep in mp arithmetic; the shift is
    perturbed at the working precision's last digits so the system stays
    solvable when lam is exact to all digits.
    """
    with mp.workdps(dps):
        a, b, diag = _hp_inputs(mat)
        eps = mpf(10) ** (-dps + 8)
        shift = mpc(lam) * (1 + eps) + eps
        d = [dk - shift for dk in diag]
        N = len(d)
        x = [mpc(1)] * N
        for _ in range(2):
            cp = [mpc(0)] * N
            dv = [mpc(0)] * N
            cp[0] = a / d[0]
            dv[0] = x[0] / d[0]
            for i in range(1, N):
                den = d[i] - b * cp[i - 1]
                cp[i] = a / den
                dv[i] = (x[i] - b * dv[i - 1]) / den
            y = [mpc(0)] * N
            y[N - 1] = dv[N - 1]
            for i in range(N - 2, -1, -1):
                y[i] = dv[i] - cp[i] * y[i + 1]
            nrm = mp.sqrt(sum(abs(v) ** 2 for v in y))
            x = [v / nrm for v in y]
        return x


def required_dps(scale: float, separation: float, extra: int = 25) -> int:
    """Digits needed to resolve an eigenvalue pair a given distance apart."""
    separation = max(separation, 1e-280)
    return max(40, extra + int(math.ceil(math.log10((1.0 + scale) / separation))))


def endpoint_pair_hp(pot: PotentialCoeffs, n: int, at_pi: bool, M: int,
                     separation_hint: float, dps: int | None = None):
    """Both members of the degenerate pair at t = 0 (labels +-n) or t = pi
    (labels n and -(n+1)), resolved in high precision.

    ``separation_hint`` (an a-priori estimate of |lam1 - lam2|, e.g. a
    predicted band gap) sets the working precision.  Returns
    (lam1, lam2, dps_used) with lam1, lam2 as mpmath numbers.
    """
    t = math.pi if at_pi else 0.0
    mat = build_matrix(pot, t, M)
    center = (TWO_PI * n + t) ** 2
    if dps is None:
        dps = required_dps(mat.scale, separation_hint)
    off = max(separation_hint, 1e-280) / 2
    lam1 = charpoly_newton_hp(mat, center + off, dps=dps)
    lam2 = charpoly_newton_hp(mat, center - off, dps=dps, avoid=(lam1,))
    return lam1, lam2, dps
