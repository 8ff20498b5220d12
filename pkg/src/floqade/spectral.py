"""Crossing geometry, gap analysis, and projector algebra.

The followed level ``lambda_{+,0}`` meets partner m where the branch
splitting equals ``m * varpi(s)``.  For monotone chirps the splitting
equation has one positive root per index, the roots accumulate at s = 0,
and between consecutive partition points the gap is piecewise linear in
leading order.  This module locates those roots, assembles per-crossing
ledgers with fitted local gap growth, and builds the rank-one projector
machinery (P, P', L and the reduced commutator operator) used by the
error-bound pipeline.

All functions are pure and ledgers are immutable once built, so per-index
construction parallelizes trivially; assembly order is deterministic.
"""

import csv
import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .model import (
    MINUS,
    PLUS,
    ModelSpec,
    branch_splitting,
    branch_splitting_deriv,
    eigenvalue,
    eigenvector_with_derivative,
    k_matrix,
)
from .util import fmt_f15

LEFT = "left"
RIGHT = "right"


class NoRootError(RuntimeError):
    """The splitting equation has no sign change on the search interval."""


class NearCrossingError(RuntimeError):
    """Operation requested too close to a crossing (gap below threshold)."""


class DegenerateFitError(RuntimeError):
    """Gap vanished at a non-crossing sample point; power-law fit impossible."""


class WindowIsolationError(RuntimeError):
    """Grid check of the well-separated-crossings property failed."""

    def __init__(self, offending: list):
        self.offending = list(offending)
        super().__init__(f"window-isolation check failed for k in {self.offending}")


class EdgeModeWarning(UserWarning):
    """A minimization was decided at the truncation edge; result suspect."""


def gap(spec: ModelSpec, s: float, m_max: Optional[int] = None) -> float:
    """Distance from lambda_{+,0}(s) to the rest of the ladder, |m| <= m_max.

    Computed from the closed-form eigenvalues.  Warns when the minimizer
    sits at the enumeration edge.  ``m_max=None`` sizes the enumeration
    automatically so the minimizer stays interior even close to the
    accumulation point.
    """
    w = spec.varpi(s)
    al = branch_splitting(spec, s)
    if w == 0.0:
        # Accumulation point: the same-branch ladder collapses entirely.
        return 0.0
    if m_max is None:
        # Unrestricted partner index: the minimizer of |al - m*w| is the
        # rounded ratio, so no enumeration window is needed.
        m_star = round(al / w)
        best_minus = min(abs(al - m * w) for m in (m_star - 1, m_star, m_star + 1))
        return min(abs(w), best_minus)
    if m_max < 2:
        raise ValueError("m_max must be >= 2")
    modes = np.arange(-m_max, m_max + 1)
    minus_dist = np.abs(al - modes * w)
    i_minus = int(np.argmin(minus_dist))
    best_minus = float(minus_dist[i_minus])
    # Same-branch partners sit at multiples of varpi.
    best_plus = abs(w)
    if abs(modes[i_minus]) == m_max and best_minus <= best_plus:
        warnings.warn(
            f"gap minimizer at |m| = m_max = {m_max} (s={s:g}); enlarge m_max",
            EdgeModeWarning,
            stacklevel=2,
        )
    return min(best_plus, best_minus)


def _splitting_root(spec: ModelSpec, coeff: float) -> float:
    """Unique positive root of branch_splitting(s) = coeff * varpi(s).

    Bisection to a 1e-10 bracket followed by Newton polish; the residual
    is driven below 1e-12.  Raises ``NoRootError`` when no sign change is
    found (index below the monotonicity threshold).
    """

    def f(s):
        return branch_splitting(spec, s) - coeff * spec.varpi(s)

    def fp(s):
        return branch_splitting_deriv(spec, s) - coeff * spec.varpi_deriv(s)

    lo = 0.0
    f_lo = f(lo)
    if not f_lo > 0:
        raise NoRootError(f"splitting at s=0 not positive (got {f_lo:g})")
    # Beyond ~1e12 the splitting equation is no longer resolvable in double
    # precision, so treat that horizon as "no root".
    horizon = 1e12
    hi = max(1.0, 2.0 * branch_splitting(spec, 0.0))
    while f(hi) > 0.0:
        hi *= 2.0
        if hi > horizon:
            raise NoRootError(
                f"no sign change up to s={horizon:g} for coefficient {coeff:g}; "
                "index below the monotone-splitting threshold"
            )
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if f(mid) <= 0.0:
            hi = mid
        else:
            lo = mid
    root = 0.5 * (lo + hi)
    for _ in range(4):
        resid = f(root)
        slope = fp(root)
        if abs(resid) <= 1e-12 or slope == 0.0:
            break
        root -= resid / slope
    if abs(f(root)) > 1e-12:
        raise NoRootError(f"root polish stalled at residual {f(root):g}")
    return root


def crossing_time(spec: ModelSpec, k: int) -> float:
    """Positive time of crossing k: branch_splitting(s) = k * varpi(s), k >= 2."""
    if k < 2:
        raise ValueError("crossing index must be >= 2")
    return _splitting_root(spec, float(k))


def find_crossings(spec: ModelSpec, k_min: int, k_max: int) -> list:
    """Crossing times for k in [k_min, k_max]; strictly decreasing in k."""
    if k_min < 2:
        raise ValueError("k_min must be >= 2")
    if k_max < k_min:
        raise ValueError("k_max must be >= k_min")
    return [crossing_time(spec, k) for k in range(k_min, k_max + 1)]


def partition_u(spec: ModelSpec, k: int) -> float:
    """Partition point u_k: branch_splitting(u) = (k + 1/2) * varpi(u), k >= 2.

    Sits strictly between consecutive crossings, u_k < z_k < u_{k-1}.
    """
    if k < 2:
        raise ValueError("partition index must be >= 2")
    return _splitting_root(spec, k + 0.5)


def u_asymptotic(spec: ModelSpec, k: int) -> float:
    """Leading large-k behaviour of u_k (error decays like 1/k^3)."""
    if k < 2:
        raise ValueError("partition index must be >= 2")
    al0 = branch_splitting(spec, 0.0)
    alp0 = branch_splitting_deriv(spec, 0.0)
    return al0 / (k + 0.5 - alp0)


@dataclass(frozen=True)
class CrossingRecord:
    """Per-crossing geometry and fitted local gap growth.

    Coordinates are distances from the accumulation point, so they are
    positive for both ledger sides and satisfy u_k < z_k < u_km1.
    """

    k: int
    z_k: float
    u_k: float
    u_km1: float
    v_lo: float
    v_hi: float
    delta_k: float
    g_k: float
    alpha_hat: float
    tau_k: float

    @property
    def v_width(self) -> float:
        return self.v_hi - self.v_lo


@dataclass(frozen=True)
class CrossingLedger:
    """Ordered crossing records on one side of the accumulation point."""

    side: str
    a: float
    alpha: float
    records: tuple

    def to_physical(self, distance: float) -> float:
        """Map a stored distance back to the physical slow-time axis."""
        return self.a + distance if self.side == RIGHT else self.a - distance

    @property
    def u_distances(self) -> np.ndarray:
        return np.array([r.u_k for r in self.records])

    @property
    def taus(self) -> np.ndarray:
        return np.array([r.tau_k for r in self.records])


def fit_window_samples(record, n_per_side: int = 12) -> np.ndarray:
    """Sample locations inside the crossing window used by the power fit.

    Log-spaced on each side of the crossing, excluding |s - z| < 1e-8 and
    keeping clear of the window endpoints.
    """
    if n_per_side < 8:
        raise ValueError("need at least 8 samples per side")
    z = record.z_k
    dists = []
    for width in (z - record.v_lo, record.v_hi - z):
        if width <= 1e-8:
            raise ValueError("crossing window side too narrow to sample")
        dists.append(np.geomspace(max(1e-8, 1e-4 * width), 0.95 * width, n_per_side))
    return np.concatenate([z - dists[0], z + dists[1]])


def estimate_local_power(
    gapfn: Callable[[float], float],
    record,
    n_per_side: int = 12,
    alpha_override: Optional[float] = None,
):
    """Fit g(s) ~ G |s - z|^alpha inside the crossing window.

    Least squares of log g against log |s - z| on samples from both sides
    of the crossing (excluding |s - z| < 1e-8), then G is reduced until
    G |s - z|^alpha <= g(s) holds at every sample.  With
    ``alpha_override`` the exponent is fixed and only G is fitted, which
    keeps the lower-bound discipline when a ledger-wide exponent is
    imposed.  Returns (alpha_hat, G_hat).
    """
    s_vals = fit_window_samples(record, n_per_side)
    d = np.abs(s_vals - record.z_k)
    g = np.array([gapfn(s) for s in s_vals])
    if np.any(g <= 0.0):
        bad = s_vals[g <= 0.0]
        raise DegenerateFitError(f"gap vanished away from the crossing, at s={bad[:3]}")
    log_d = np.log(d)
    log_g = np.log(g)
    if alpha_override is None:
        slope, intercept = np.polyfit(log_d, log_g, 1)
        alpha_hat = float(slope)
    else:
        alpha_hat = float(alpha_override)
        intercept = float(np.mean(log_g - alpha_hat * log_d))
    g_hat = min(math.exp(intercept), float(np.min(g / d**alpha_hat)))
    return alpha_hat, g_hat


def _isolation_grid_check(gapfn, rec: CrossingRecord, grid: int = 200) -> bool:
    """max g on the crossing window <= min g on its complement (+1e-10)."""
    inside = np.linspace(rec.v_lo, rec.v_hi, grid + 2)[1:-1]
    sup_inside = max(gapfn(s) for s in inside)
    outside = np.linspace(rec.v_hi, rec.u_km1, grid)
    inf_outside = min(gapfn(s) for s in outside)
    inf_outside = min(inf_outside, gapfn(rec.u_k))
    return sup_inside <= inf_outside + 1e-10


def build_ledger(
    spec: ModelSpec,
    k_min: int,
    k_max: int,
    side: str = RIGHT,
    m_max: Optional[int] = None,
) -> CrossingLedger:
    """Assemble crossing records for k in [k_min, k_max] on one side.

    The left side is analyzed through the mirrored spec, so stored
    coordinates are always positive distances from the accumulation point
    a = 0.  Each window (u_k, e_k) takes e_k as the point past the
    crossing where the gap climbs back to u_k/2 (clipped to u_{k-1} if it
    never does), which maximizes the window subject to the isolation
    property.  Raises ``WindowIsolationError`` listing offending k when the
    grid check fails.
    """
    if side not in (LEFT, RIGHT):
        raise ValueError("side must be 'left' or 'right'")
    if k_min < 3:
        raise ValueError("k_min must be >= 3 (u_{k-1} needs index >= 2)")
    work = spec if side == RIGHT else spec.mirrored()
    if m_max is None:
        m_max = k_max + 5

    def gapfn(s):
        return gap(work, s, m_max)

    u_prev = partition_u(work, k_min - 1)
    draft = []
    bad_windows = []
    for k in range(k_min, k_max + 1):
        z = crossing_time(work, k)
        u_k = partition_u(work, k)
        if not (u_k < z < u_prev):
            raise RuntimeError(f"interlacing u_{k} < z_{k} < u_{k-1} failed")
        target = 0.5 * u_k
        if gapfn(u_prev) < target:
            e_k = u_prev
        else:
            lo_e, hi_e = z, u_prev
            while hi_e - lo_e > 1e-12:
                mid = 0.5 * (lo_e + hi_e)
                if gapfn(mid) < target:
                    lo_e = mid
                else:
                    hi_e = mid
            e_k = 0.5 * (lo_e + hi_e)
        delta = max(abs(u_k - z), abs(u_prev - z))
        rec = CrossingRecord(
            k=k, z_k=z, u_k=u_k, u_km1=u_prev, v_lo=u_k, v_hi=e_k,
            delta_k=delta, g_k=0.0, alpha_hat=0.0, tau_k=0.0,
        )
        if not _isolation_grid_check(gapfn, rec):
            bad_windows.append(k)
        alpha_hat, _ = estimate_local_power(gapfn, rec)
        draft.append((rec, alpha_hat))
        u_prev = u_k
    if bad_windows:
        raise WindowIsolationError(bad_windows)
    alpha = max(a for _, a in draft)
    records = []
    for rec, alpha_hat in draft:
        _, g_hat = estimate_local_power(gapfn, rec, alpha_override=alpha)
        tau = max(rec.delta_k / g_hat**2, rec.delta_k**alpha / g_hat)
        records.append(replace(rec, g_k=g_hat, alpha_hat=alpha_hat, tau_k=tau))
    return CrossingLedger(side=side, a=0.0, alpha=alpha, records=tuple(records))


LEDGER_CSV_COLUMNS = [
    "k", "z_k", "u_k", "u_km1", "V_lo", "V_hi",
    "Delta_k", "G_k", "alpha_hat", "tau_k",
]


def write_ledger_csv(ledger: CrossingLedger, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LEDGER_CSV_COLUMNS)
        for r in ledger.records:
            writer.writerow(
                [r.k]
                + [
                    fmt_f15(v)
                    for v in (
                        r.z_k, r.u_k, r.u_km1, r.v_lo, r.v_hi,
                        r.delta_k, r.g_k, r.alpha_hat, r.tau_k,
                    )
                ]
            )


def read_ledger_csv(path) -> list:
    """Rows of a ledger CSV as dicts with numeric values."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for row in reader:
            parsed = {"k": int(row["k"])}
            for col in LEDGER_CSV_COLUMNS[1:]:
                parsed[col] = float(row[col])
            rows.append(parsed)
    return rows


def unit_interval_map(s_lo: float, s_hi: float):
    """Affine maps between [s_lo, s_hi] and [0, 1] (forward, inverse)."""
    span = s_hi - s_lo
    if span <= 0:
        raise ValueError("need s_lo < s_hi")
    return (lambda s: (s - s_lo) / span), (lambda t: s_lo + t * span)


def projector_and_L(spec: ModelSpec, s: float):
    """Rank-one projector P onto the followed level, P', and L = i [P', P].

    Built from the closed-form eigenvector and its analytic s-derivative;
    both diagonal blocks of L vanish identically (P L P = Q L Q = 0).
    """
    psi, dpsi = eigenvector_with_derivative(spec, s, PLUS, 0)
    proj = np.outer(psi, psi.conj())
    dproj = np.outer(dpsi, psi.conj()) + np.outer(psi, dpsi.conj())
    gen = 1j * (dproj @ proj - proj @ dproj)
    gen = 0.5 * (gen + gen.conj().T)
    return proj, dproj, gen


def reduced_commutator_RL(spec: ModelSpec, s: float, m_max: int) -> np.ndarray:
    """Resolvent sandwich of L around the followed eigenvalue.

    Evaluates the loop integral of R(s, lam) L R(s, lam) around a circle
    of radius g/2 at the followed eigenvalue in closed form: only the
    simple-pole cross terms survive, leaving

        R_L = P L S + S L P,   S = sum_{l != 0} |v_l><v_l| / (lam_0 - lam_l)

    over the eigendecomposition of the truncated operator.  Satisfies
    [R_L, K] = [L, P], has vanishing diagonal blocks, and obeys
    ||R_L|| <= 2 ||L|| / g.
    """
    g = gap(spec, s, m_max)
    if g <= 1e-6:
        raise NearCrossingError(
            f"gap {g:.3e} at s={s:g} below 1e-6; loop radius degenerates"
        )
    kmat = k_matrix(spec, s)
    evals, evecs = np.linalg.eigh(kmat)
    lam0 = eigenvalue(spec, s, PLUS, 0)
    i0 = int(np.argmin(np.abs(evals - lam0)))
    if abs(evals[i0] - lam0) > 1e-8:
        warnings.warn(
            f"followed eigenvalue off by {abs(evals[i0] - lam0):.2e} at s={s:g}",
            EdgeModeWarning,
            stacklevel=2,
        )
    v0 = evecs[:, i0]
    proj = np.outer(v0, v0.conj())
    rest = np.delete(np.arange(evals.size), i0)
    weights = 1.0 / (evals[i0] - evals[rest])
    vr = evecs[:, rest]
    reduced = (vr * weights) @ vr.conj().T
    _, _, gen = projector_and_L(spec, s)
    return proj @ gen @ reduced + reduced @ gen @ proj


@dataclass(frozen=True, eq=False)
class SpectrumSlice:
    """Instantaneous level table at fixed s (for reporting)."""

    s: float
    branches: tuple
    modes: tuple
    values: tuple
    gap: float


def spectrum_slice(spec: ModelSpec, s: float, m_max: int) -> SpectrumSlice:
    branches, modes, values = [], [], []
    for branch in (PLUS, MINUS):
        for m in range(-m_max, m_max + 1):
            branches.append(branch)
            modes.append(m)
            values.append(eigenvalue(spec, s, branch, m))
    return SpectrumSlice(
        s=s,
        branches=tuple(branches),
        modes=tuple(modes),
        values=tuple(values),
        gap=gap(spec, s, m_max),
    )
