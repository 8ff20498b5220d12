"""Error-bound pipeline: single-crossing estimate, crossing-count selector,
accumulation bound, and the power-law exponent classifier.

All operations are exact arithmetic on their inputs; constants left free by
the underlying estimates are normalized to C = 1 and calibrated empirically
elsewhere.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .util import fmt_g15


class EpsTooLargeError(RuntimeError):
    """The crossing-count selector is undefined: even K = 1 fails."""


def comparator_jump_bound(eps, C, u0, t, s, u1, g_t, g_s) -> float:
    """Single-crossing comparator jump bound.

    C * ( eps|u0-t|/g_t^2 + eps|u1-s|/g_s^2 + eps/g_t + eps/g_s + |s-t| )
    for u0 <= t < s <= u1 with g_t, g_s the gap infima on the outer
    subintervals.
    """
    if not (u0 <= t < s <= u1):
        raise ValueError(f"need u0 <= t < s <= u1, got {u0}, {t}, {s}, {u1}")
    if g_t <= 0 or g_s <= 0:
        raise ValueError("gap infima must be positive")
    if C <= 0:
        raise ValueError("C must be positive")
    return C * (
        eps * abs(u0 - t) / g_t**2
        + eps * abs(u1 - s) / g_s**2
        + eps / g_t
        + eps / g_s
        + abs(s - t)
    )


def startup_bound(eps: float, alpha: float, C: float = 1.0) -> float:
    """Adiabatic error when starting on a crossing that splits like s^alpha:
    C * eps^(1/(1+2 alpha)).

    With more detailed spectral information a sharper 1/(1+alpha) rate is
    plausible; only the established exponent is evaluated here.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if eps <= 0:
        raise ValueError("eps must be positive")
    return C * eps ** (1.0 / (1.0 + 2.0 * alpha))


def tau(Delta: float, G: float, alpha: float) -> float:
    """Crossing weight max{Delta/G^2, Delta^alpha/G}."""
    if G <= 0:
        raise ValueError("G must be positive")
    if Delta < 0:
        raise ValueError("Delta must be >= 0")
    return max(Delta / G**2, Delta**alpha / G)


def k_of_eps(
    eps: float,
    u_minus_a: Sequence[float],
    tau_seq: Sequence[float],
    alpha: float,
) -> int:
    """Greatest K with |u_K - a| / sum_{k<=K} tau_k^(1/(1+2a)) >= eps^(1/(1+2a)).

    Raises ``EpsTooLargeError`` when even K = 1 fails the inequality.
    """
    u = np.asarray(u_minus_a, dtype=float)
    t = np.asarray(tau_seq, dtype=float)
    if u.size != t.size or u.size == 0:
        raise ValueError("sequences must be aligned and non-empty")
    if np.any(t <= 0):
        raise ValueError("tau sequence must be positive")
    if np.any(np.diff(u) >= 0):
        raise ValueError("|u_k - a| must be strictly decreasing")
    power = 1.0 / (1.0 + 2.0 * alpha)
    ratios = u / np.cumsum(t**power)
    ok = np.nonzero(ratios >= eps**power)[0]
    if ok.size == 0:
        raise EpsTooLargeError(
            f"eps={eps:g} too large: K=1 ratio {ratios[0]:.6g} < {eps ** power:.6g}"
        )
    return int(ok[-1]) + 1


@dataclass(frozen=True)
class WindowCondition:
    ok: bool
    first_failure: Optional[int]
    varsigma_max: float


def window_condition(varsigma: float, eps: float, ledger, K: int) -> WindowCondition:
    """Check varsigma*(eps*tau_k)^(1/(1+2a)) <= |V_k|/2 for the first K records.

    Also reports the largest feasible varsigma for this eps and K.
    """
    if K < 1 or K > len(ledger.records):
        raise ValueError(f"K must be in [1, {len(ledger.records)}]")
    power = 1.0 / (1.0 + 2.0 * ledger.alpha)
    first_failure = None
    varsigma_max = math.inf
    for pos, rec in enumerate(ledger.records[:K], start=1):
        offset_unit = (eps * rec.tau_k) ** power
        half_v = 0.5 * rec.v_width
        varsigma_max = min(varsigma_max, half_v / offset_unit)
        if varsigma * offset_unit > half_v and first_failure is None:
            first_failure = pos
    return WindowCondition(ok=first_failure is None, first_failure=first_failure,
                       varsigma_max=varsigma_max)


def optimal_offset(eps: float, tau_k: float, varsigma: float, alpha: float) -> float:
    """Window offset balancing the two bound contributions:
    varsigma * (eps * tau_k)^(1/(1+2 alpha))."""
    if min(eps, tau_k, varsigma) <= 0:
        raise ValueError("eps, tau_k and varsigma must be positive")
    return varsigma * (eps * tau_k) ** (1.0 / (1.0 + 2.0 * alpha))


@dataclass(frozen=True)
class BoundReport:
    eps: float
    K_minus: int
    K_plus: int
    bound_value: float
    varsigma: float
    condition_ok: bool
    notes: tuple = ()


BOUND_CSV_COLUMNS = ["eps", "K_minus", "K_plus", "bound_value", "varsigma", "condition_ok"]


def bound_report_text(report: BoundReport) -> str:
    lines = [
        f"eps={fmt_g15(report.eps)}",
        f"K_minus={report.K_minus}",
        f"K_plus={report.K_plus}",
        f"bound_value={fmt_g15(report.bound_value)}",
        f"varsigma={fmt_g15(report.varsigma)}",
        f"condition_ok={'true' if report.condition_ok else 'false'}",
    ]
    lines.extend(f"note={n}" for n in report.notes)
    return "\n".join(lines)


def bound_report_csv_row(report: BoundReport) -> list:
    return [
        fmt_g15(report.eps),
        str(report.K_minus),
        str(report.K_plus),
        fmt_g15(report.bound_value),
        fmt_g15(report.varsigma),
        "true" if report.condition_ok else "false",
    ]


def accumulation_bound(eps: float, ledger_minus, ledger_plus,
                  varsigma: Optional[float] = None) -> BoundReport:
    """Accumulation-point error bound at adiabaticity eps (C = 1 convention).

    Selects K on each side, checks the window-size condition, and returns
    max(|u_{K-} - a|, |u_{K+} - a|).  With ``varsigma=None`` the largest
    jointly feasible value, halved for margin, is used.  An infeasible
    condition is flagged, not fatal.
    """
    sides = []
    for ledger in (ledger_minus, ledger_plus):
        K = k_of_eps(eps, ledger.u_distances, ledger.taus, ledger.alpha)
        sides.append((ledger, K))
    if varsigma is None:
        feasible = min(
            window_condition(0.0, eps, ledger, K).varsigma_max for ledger, K in sides
        )
        varsigma = 0.5 * feasible
    condition_ok = all(
        window_condition(varsigma, eps, ledger, K).ok for ledger, K in sides
    )
    (led_m, k_m), (led_p, k_p) = sides
    bound_value = max(led_m.records[k_m - 1].u_k, led_p.records[k_p - 1].u_k)
    notes = (
        "C=1 convention; calibrate against measured jumps for absolute scale",
        f"crossing indices covered: minus k={led_m.records[0].k}..{led_m.records[k_m - 1].k}, "
        f"plus k={led_p.records[0].k}..{led_p.records[k_p - 1].k}",
    )
    return BoundReport(
        eps=eps,
        K_minus=k_m,
        K_plus=k_p,
        bound_value=bound_value,
        varsigma=varsigma,
        condition_ok=condition_ok,
        notes=notes,
    )


SUPERCRITICAL = "supercritical"
CRITICAL = "critical"
SUBCRITICAL = "subcritical"


@dataclass(frozen=True)
class ExponentReport:
    alpha: float
    beta: float
    gamma: float
    delta: float
    mu: float
    case: str
    p: float
    minus_nu: bool
    delta_ok: bool


def exponent_p(alpha: float, beta: float, gamma: float, delta: float) -> ExponentReport:
    """Classify the decay exponent from the crossing-scaling parameters.

    mu = min{beta+1+2*gamma, alpha*(beta+1)+gamma}; p is 1/(1+2*alpha)
    above the critical line, the same value minus any nu > 0 on it
    (reported via the minus_nu flag), and beta/((beta+1)(1+2*alpha)-mu)
    below it.  delta must lie in [beta+1, beta+max{1, mu/(1+2*alpha)}].
    """
    if beta <= 0 or delta <= 0 or alpha < 0:
        raise ValueError("need beta > 0, delta > 0, alpha >= 0")
    mu = min(beta + 1.0 + 2.0 * gamma, alpha * (beta + 1.0) + gamma)
    crit = 1.0 + 2.0 * alpha
    if mu > crit:
        case, p, minus_nu = SUPERCRITICAL, 1.0 / crit, False
    elif mu == crit:
        case, p, minus_nu = CRITICAL, 1.0 / crit, True
    else:
        case, p, minus_nu = SUBCRITICAL, beta / ((beta + 1.0) * crit - mu), False
    delta_ok = (beta + 1.0 <= delta <= beta + max(1.0, mu / crit))
    return ExponentReport(
        alpha=alpha, beta=beta, gamma=gamma, delta=delta,
        mu=mu, case=case, p=p, minus_nu=minus_nu, delta_ok=delta_ok,
    )


EXPONENT_CSV_COLUMNS = [
    "alpha", "beta", "gamma", "delta", "mu", "case", "p", "minus_nu", "delta_ok",
]


def exponent_report_text(report: ExponentReport) -> str:
    p_txt = fmt_g15(report.p) + (" (minus-nu)" if report.minus_nu else "")
    lines = [
        f"alpha={fmt_g15(report.alpha)}",
        f"beta={fmt_g15(report.beta)}",
        f"gamma={fmt_g15(report.gamma)}",
        f"delta={fmt_g15(report.delta)}",
        f"mu={fmt_g15(report.mu)}",
        f"case={report.case}",
        f"p={p_txt}",
        f"delta_ok={'true' if report.delta_ok else 'false'}",
    ]
    if report.minus_nu:
        lines.append(
            "note=every exponent strictly below the quoted p holds; reaching "
            "p itself is plausible under a finer analysis but is not "
            "evaluated here"
        )
    return "\n".join(lines)


def exponent_report_csv_row(report: ExponentReport) -> list:
    return [
        fmt_g15(report.alpha),
        fmt_g15(report.beta),
        fmt_g15(report.gamma),
        fmt_g15(report.delta),
        fmt_g15(report.mu),
        report.case,
        fmt_g15(report.p),
        "true" if report.minus_nu else "false",
        "true" if report.delta_ok else "false",
    ]
