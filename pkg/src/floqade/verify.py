"""Invariant suite behind the ``verify`` CLI subcommand.

Each check returns a named pass/fail result with a one-line detail so the
command can print a readable report and exit nonzero on any failure.
"""

import math
from dataclasses import dataclass

import numpy as np

from .evolve import PropagationConfig, propagate_adiabatic, propagate_exact
from .model import (
    MINUS,
    PLUS,
    ModelSpec,
    eigenvalue,
    exact_eigenvector,
    interior_margin,
    k_matrix,
)
from .spectral import (
    build_ledger,
    crossing_time,
    gap,
    projector_and_L,
    reduced_commutator_RL,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _opnorm(mat: np.ndarray) -> float:
    return float(np.linalg.norm(mat, 2))


def check_hermiticity(spec: ModelSpec, s_values) -> CheckResult:
    worst = 0.0
    for s in s_values:
        mat = k_matrix(spec, s)
        scale = max(np.max(np.abs(mat)), 1e-300)
        worst = max(worst, float(np.max(np.abs(mat - mat.conj().T))) / scale)
    ok = worst <= 1e-13
    return CheckResult("hermiticity", ok, f"max relative residual {worst:.2e} (tol 1e-13)")


def check_ladder(spec: ModelSpec, s_values) -> CheckResult:
    worst = 0.0
    for s in s_values:
        w = spec.varpi(s)
        for branch in (PLUS, MINUS):
            base = eigenvalue(spec, s, branch, 0)
            for k in range(-(spec.n_modes - 2), spec.n_modes - 1):
                worst = max(worst, abs(eigenvalue(spec, s, branch, k) - base - k * w))
    ok = worst <= 1e-12
    return CheckResult("ladder-property", ok, f"max |lam_k - lam_0 - k*varpi| = {worst:.2e}")


def check_orthonormality(spec: ModelSpec, s: float) -> CheckResult:
    reach = spec.n_modes - interior_margin(spec)
    span = range(-reach, reach + 1)
    vecs = [exact_eigenvector(spec, s, b, m) for b in (PLUS, MINUS) for m in span]
    mat = np.array(vecs)
    gram = mat.conj() @ mat.T
    worst = float(np.max(np.abs(gram - np.eye(gram.shape[0]))))
    ok = worst <= 1e-10
    return CheckResult("orthonormality", ok, f"max Gram deviation {worst:.2e} at s={s:g}")


def check_spectral_consistency(spec: ModelSpec, s: float) -> CheckResult:
    mat = k_matrix(spec, s)
    evals, evecs = np.linalg.eigh(mat)
    reach = spec.n_modes - interior_margin(spec)
    worst_val, worst_vec = 0.0, 0.0
    for branch in (PLUS, MINUS):
        for m in range(-reach, reach + 1):
            lam = eigenvalue(spec, s, branch, m)
            idx = int(np.argmin(np.abs(evals - lam)))
            worst_val = max(worst_val, abs(evals[idx] - lam))
            overlap = abs(np.vdot(evecs[:, idx], exact_eigenvector(spec, s, branch, m)))
            worst_vec = max(worst_vec, 1.0 - overlap)
    ok = worst_val <= 1e-10 and worst_vec <= 1e-8
    return CheckResult(
        "spectral-consistency", ok,
        f"eigenvalue residual {worst_val:.2e}, eigenvector defect {worst_vec:.2e}",
    )


def check_projector_identities(spec: ModelSpec, s_values) -> CheckResult:
    worst = 0.0
    for s in s_values:
        proj, _, gen = projector_and_L(spec, s)
        comp = np.eye(proj.shape[0]) - proj
        worst = max(
            worst,
            _opnorm(proj @ proj - proj),
            abs(np.trace(proj).real - 1.0),
            _opnorm(proj @ gen @ proj),
            _opnorm(comp @ gen @ comp),
        )
    ok = worst <= 1e-10
    return CheckResult("projector-identities", ok,
                       f"max of P^2-P, tr P - 1, PLP, QLQ norms = {worst:.2e}")


def check_commutator_identity(spec: ModelSpec, s_values) -> CheckResult:
    worst = 0.0
    for s in s_values:
        mat = k_matrix(spec, s)
        proj, _, gen = projector_and_L(spec, s)
        rl = reduced_commutator_RL(spec, s, spec.n_modes)
        lhs = rl @ mat - mat @ rl
        rhs = gen @ proj - proj @ gen
        worst = max(worst, _opnorm(lhs - rhs) / max(_opnorm(gen), 1e-300))
    ok = worst <= 1e-8
    return CheckResult("commutator-identity", ok,
                       f"max ||[R_L,K]-[L,P]|| / ||L|| = {worst:.2e}")


def check_resolvent_norm(spec: ModelSpec, s_values) -> CheckResult:
    worst = -math.inf
    for s in s_values:
        rl = reduced_commutator_RL(spec, s, spec.n_modes)
        _, _, gen = projector_and_L(spec, s)
        g = gap(spec, s, spec.n_modes)
        worst = max(worst, _opnorm(rl) - 2.0 * _opnorm(gen) / g)
    ok = worst <= 1e-10
    return CheckResult("resolvent-norm-bound", ok,
                       f"max ||R_L|| - 2||L||/g = {worst:.2e} (should be <= 0)")


def check_intertwining(spec: ModelSpec, eps: float, window) -> CheckResult:
    cfg = PropagationConfig(eps=eps, s_start=window[0], s_end=window[1])
    psi0 = exact_eigenvector(spec, window[0], PLUS, 0)
    res = propagate_adiabatic(spec, cfg, psi0)
    ok = res.intertwine_residual <= 1e-6 and res.unitarity_drift <= 1e-8
    return CheckResult(
        f"intertwining[{spec.kind}]", ok,
        f"residual {res.intertwine_residual:.2e} (tol 1e-6), "
        f"norm drift {res.unitarity_drift:.2e} (tol 1e-8) at eps={eps:g}",
    )


def check_self_convergence(spec: ModelSpec, eps: float, window) -> CheckResult:
    psi0 = exact_eigenvector(spec, window[0], PLUS, 0)
    base = PropagationConfig(eps=eps, s_start=window[0], s_end=window[1])
    res_1 = propagate_exact(spec, base, psi0)
    n = res_1.steps
    half = PropagationConfig(
        eps=eps, s_start=window[0], s_end=window[1],
        step_h=abs(window[1] - window[0]) / (2 * n),
    )
    res_2 = propagate_exact(spec, half, psi0)
    change = float(np.linalg.norm(res_1.psi_U - res_2.psi_U))
    ok = change <= 1e-6
    return CheckResult("self-convergence", ok,
                       f"step halving moved the endpoint state by {change:.2e} (tol 1e-6)")


def check_crossing_windows(spec: ModelSpec, k_min: int, k_max: int) -> CheckResult:
    try:
        ledger = build_ledger(spec, k_min, k_max)
    except Exception as exc:
        return CheckResult("crossing-windows", False, f"ledger build failed: {exc}")
    alphas = [r.alpha_hat for r in ledger.records if 5 <= r.k <= 15]
    ok_alpha = all(0.95 <= a <= 1.05 for a in alphas)
    # Lower-bound discipline at the fitted samples, with the ledger exponent
    worst_slack = 0.0
    from .spectral import fit_window_samples

    for rec in ledger.records:
        for s in fit_window_samples(rec):
            lhs = rec.g_k * abs(s - rec.z_k) ** ledger.alpha
            rhs = gap(spec, s, k_max + 5) * (1.0 + 1e-9)
            worst_slack = max(worst_slack, lhs - rhs)
    ok = ok_alpha and worst_slack <= 0.0
    detail = (
        f"windows isolated for k={k_min}..{k_max}; fitted exponents in "
        f"[{min(alphas):.3f}, {max(alphas):.3f}] (band 0.95..1.05); "
        f"lower-bound slack {worst_slack:.2e}"
    )
    return CheckResult("crossing-windows", ok, detail)


def run_all(
    spec_rwa: ModelSpec,
    spec_modified: ModelSpec,
    eps: float = 1e-2,
    window=(-0.45, 0.45),
    k_range=(4, 20),
    seed: int = 20260810,
) -> list:
    """Run the full invariant suite; returns a list of CheckResult."""
    rng = np.random.default_rng(seed)
    samples = []
    while len(samples) < 20:
        s = float(rng.uniform(-1.4, 1.4))
        if gap(spec_rwa, s) > 1e-3 and gap(spec_modified, s) > 1e-3:
            samples.append(s)
    results = []
    results.append(check_hermiticity(spec_modified, samples))
    results.append(check_ladder(spec_modified, samples[:5]))
    results.append(check_orthonormality(spec_modified, samples[0]))
    results.append(check_spectral_consistency(spec_modified, samples[0]))
    results.append(check_projector_identities(spec_modified, samples))
    results.append(check_commutator_identity(spec_modified, samples))
    results.append(check_resolvent_norm(spec_modified, samples))
    results.append(check_crossing_windows(spec_rwa, *k_range))
    results.append(check_intertwining(spec_rwa, eps, window))
    results.append(check_intertwining(spec_modified, eps, window))
    results.append(check_self_convergence(spec_rwa, eps, window))
    return results
