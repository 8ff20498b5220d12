"""Acceptance suite: one test per criterion, printing one PASS/FAIL line each.

The full-scale scaling runs (A1, A2) come from session-scoped sweeps shared
with the harness tests; everything else is computed at its stated operating
point.  Each test asserts its criterion at the stated tolerance.
"""

import math

import numpy as np
import pytest

from floqade.bounds import exponent_p, k_of_eps
from floqade.evolve import PropagationConfig, adiabatic_error, w_jump_across_crossing
from floqade.model import MINUS, PLUS, ModelSpec, k_matrix
from floqade.spectral import (
    build_ledger,
    crossing_time,
    gap,
    partition_u,
    projector_and_L,
    reduced_commutator_RL,
    u_asymptotic,
)

SPEC = ModelSpec(omega0=1.0, Omega=1.0, kind="rwa", n_modes=16)


def report(name: str, ok: bool, detail: str) -> str:
    line = f"{name}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    return line


class TestA1RwaScaling:
    def test_criterion(self, rwa_sweep):
        """Decoupled preset: fitted slope in [0.8, 1.2] with R^2 >= 0.98."""
        fit = rwa_sweep.fit
        ok_p = 0.8 <= fit.p_hat <= 1.2
        ok_r2 = fit.r_squared >= 0.98
        line = report(
            "A1 rwa scaling",
            ok_p and ok_r2,
            f"p_hat={fit.p_hat:.4f} (band [0.8, 1.2]), "
            f"R^2={fit.r_squared:.4f} (needs >= 0.98), stderr={fit.stderr_p:.4f}",
        )
        assert ok_p, line
        # Known physical limitation: the deviation prefactor oscillates with
        # the accumulated boundary phase (the two window endpoints carry
        # unequal weights z'/eta^2, whose interference modulates the error by
        # ~+-30% as eps varies), which caps R^2 near 0.976 on this grid.
        # See test_evolve.py::test_perturbative_quadrature_oracle for the
        # quantitative first-order model reproducing every row to ~0.2%.
        assert ok_r2, line


class TestA2ModifiedScaling:
    def test_criterion(self, rwa_sweep, modified_sweep):
        """Modulated preset at depth 1: slope in [0.2, 0.5], well below A1."""
        fit = modified_sweep.fit
        separation = rwa_sweep.fit.p_hat - fit.p_hat
        ok_band = 0.2 <= fit.p_hat <= 0.5
        ok_sep = separation >= 0.3
        line = report(
            "A2 modified scaling",
            ok_band and ok_sep,
            f"p_hat={fit.p_hat:.4f} (band [0.2, 0.5]), "
            f"separation={separation:.4f} (needs >= 0.3)",
        )
        # Known physical limitation: with modulation depth 1 the couplings at
        # the crossings inside |s| <= 0.45 carry Bessel weights J_3(1)=0.020,
        # J_4(1)=0.0025, ..., so the stationary-phase contributions
        # (~1e-2*sqrt(eps)) stay below the smooth eps-linear boundary terms
        # (~0.3*eps) everywhere on this grid and the measured slope stays
        # near 1.  The crossing-dominated regime this criterion aims at is
        # demonstrated at depth 3 in
        # test_harness.py::test_crossing_dominated_regime_separates_slopes.
        assert ok_band, line
        assert ok_sep, line


class TestA3ExponentClassifier:
    @staticmethod
    def transcription(alpha, beta, gamma):
        # independent re-implementation of the case split
        mu = min(beta + 1 + 2 * gamma, alpha * (beta + 1) + gamma)
        crit = 1 + 2 * alpha
        if mu > crit:
            return mu, "supercritical", 1.0 / crit
        if mu == crit:
            return mu, "critical", 1.0 / crit
        return mu, "subcritical", beta / ((beta + 1) * crit - mu)

    def test_criterion(self):
        rep = exponent_p(1.0, 1.0, 1.0, 2.0)
        ok_ref = (
            rep.case == "critical"
            and rep.p == pytest.approx(1.0 / 3.0)
            and rep.minus_nu
            and rep.delta_ok
        )
        mismatches = 0
        for a in np.linspace(0.0, 2.25, 10):
            for b in np.linspace(0.2, 3.8, 10):
                for g in np.linspace(0.0, 3.6, 10):
                    got = exponent_p(a, b, g, b + 1.0)
                    mu, case, p = self.transcription(a, b, g)
                    if not (got.mu == mu and got.case == case and got.p == p):
                        mismatches += 1
        line = report(
            "A3 exponent classifier",
            ok_ref and mismatches == 0,
            f"reference case critical p=1/3 minus-nu delta_ok={rep.delta_ok}; "
            f"{mismatches} mismatches over the 10x10x10 grid",
        )
        assert ok_ref and mismatches == 0, line


class TestA4CrossingGeometry:
    def test_criterion(self):
        z2 = crossing_time(SPEC, 2)
        z3 = crossing_time(SPEC, 3)
        u3 = partition_u(SPEC, 3)
        ok_z2 = abs(z2 - 1.0) <= 1e-10
        ok_z3 = abs(z3 - (-1.0 + math.sqrt(7.0)) / 3.0) <= 1e-10
        ok_u3 = abs(u3 - (-2.0 + math.sqrt(46.0)) / 10.5) <= 1e-10
        residuals = [
            k**3 * abs(partition_u(SPEC, k) - u_asymptotic(SPEC, k))
            for k in range(4, 41)
        ]
        ok_res = max(residuals) <= 1.0 and max(residuals[20:]) <= max(residuals[:20])
        line = report(
            "A4 crossing geometry",
            ok_z2 and ok_z3 and ok_u3 and ok_res,
            f"z_2-1={z2 - 1.0:.2e}, z_3 dev={z3 - (-1 + math.sqrt(7)) / 3:.2e}, "
            f"u_3 dev={u3 - (-2 + math.sqrt(46)) / 10.5:.2e}, "
            f"k^3 residual in [{min(residuals):.3f}, {max(residuals):.3f}], no growth",
        )
        assert ok_z2 and ok_z3 and ok_u3 and ok_res, line


class TestA5WindowIsolationAndGapGrowth:
    def test_criterion(self, ledger_right):
        # the ledger build itself runs the window-isolation grid checks and
        # raises on violation, so its existence certifies them for k=4..20
        mid = [r for r in ledger_right.records if 5 <= r.k <= 15]
        alphas = [r.alpha_hat for r in mid]
        ratios = [r.g_k / r.k for r in mid]
        ok_alpha = all(0.95 <= a <= 1.05 for a in alphas)
        ok_ratio = all(0.85 <= r <= 1.05 for r in ratios)
        line = report(
            "A5 window isolation and gap growth",
            ok_alpha and ok_ratio,
            f"isolation checks passed for k=4..20; fitted exponent in "
            f"[{min(alphas):.4f}, {max(alphas):.4f}] (band [0.95, 1.05]); "
            f"G_k/k in [{min(ratios):.4f}, {max(ratios):.4f}] (band [0.85, 1.05])",
        )
        assert ok_alpha and ok_ratio, line


class TestA6OperatorIdentities:
    def test_criterion(self, spec_mod12):
        rng = np.random.default_rng(20260810)
        samples = []
        while len(samples) < 20:
            s = float(rng.uniform(-1.4, 1.4))
            if gap(spec_mod12, s) > 1e-3:
                samples.append(s)
        worst_diag = 0.0
        worst_comm = 0.0
        worst_norm = -math.inf
        for s in samples:
            kmat = k_matrix(spec_mod12, s)
            proj, _, gen = projector_and_L(spec_mod12, s)
            comp = np.eye(proj.shape[0]) - proj
            rl = reduced_commutator_RL(spec_mod12, s, spec_mod12.n_modes)
            n_gen = np.linalg.norm(gen, 2)
            worst_diag = max(
                worst_diag,
                np.linalg.norm(proj @ gen @ proj, 2),
                np.linalg.norm(comp @ gen @ comp, 2),
            )
            worst_comm = max(
                worst_comm,
                np.linalg.norm((rl @ kmat - kmat @ rl) - (gen @ proj - proj @ gen), 2)
                / n_gen,
            )
            worst_norm = max(
                worst_norm,
                np.linalg.norm(rl, 2)
                - 2.0 * n_gen / gap(spec_mod12, s, spec_mod12.n_modes),
            )
        ok = worst_diag <= 1e-10 and worst_comm <= 1e-8 and worst_norm <= 0.0
        line = report(
            "A6 operator identities",
            ok,
            f"20 samples: diag blocks {worst_diag:.2e} (tol 1e-10), "
            f"commutator {worst_comm:.2e} (tol 1e-8), "
            f"norm-bound slack {worst_norm:.2e} (<= 0)",
        )
        assert ok, line


class TestA7IntertwiningUnitarity:
    def test_criterion(self, spec_rwa16, spec_mod16):
        details = []
        ok = True
        for spec in (spec_rwa16, spec_mod16):
            cfg = PropagationConfig(eps=1e-2, s_start=-0.45, s_end=0.45)
            res = adiabatic_error(spec, cfg)
            ok_one = res.intertwine_residual <= 1e-6 and res.unitarity_drift <= 1e-8
            ok = ok and ok_one
            details.append(
                f"{spec.kind}: residual={res.intertwine_residual:.2e}, "
                f"drift={res.unitarity_drift:.2e}"
            )
        line = report(
            "A7 intertwining and unitarity",
            ok,
            "; ".join(details) + " (tols 1e-6, 1e-8)",
        )
        assert ok, line


class TestA8JumpBoundConsistency:
    def test_criterion(self, spec_mod16):
        ledger = build_ledger(spec_mod16, 4, 13)
        jumps = {}
        for rec in ledger.records:
            if 4 <= rec.k <= 12:
                measured, bound, fitted = w_jump_across_crossing(
                    spec_mod16, 1e-2, rec, alpha=ledger.alpha
                )
                jumps[rec.k] = (measured, bound, fitted)
        fitted = [v[2] for v in jumps.values()]
        spread = max(fitted) / min(fitted)
        ok_spread = spread < 10.0
        calibration = max(jumps[k][2] for k in range(4, 9))
        held_out_ok = all(
            jumps[k][0] <= calibration * jumps[k][1] for k in range(9, 13)
        )
        line = report(
            "A8 jump-bound consistency",
            ok_spread and held_out_ok,
            f"fitted_C spread x{spread:.2f} over k=4..12 (needs < 10); "
            f"held-out k=9..12 below the k=4..8-calibrated bound: {held_out_ok}",
        )
        assert ok_spread and held_out_ok, line


class TestA9SelectorDivergence:
    def test_criterion(self):
        u = [1.0 / k for k in range(1, 301)]
        taus = [k**-3.0 for k in range(1, 301)]

        def oracle(eps):
            total, best = 0.0, None
            for i, (ui, ti) in enumerate(zip(u, taus), start=1):
                total += ti ** (1.0 / 3.0)
                if ui / total >= eps ** (1.0 / 3.0):
                    best = i
            return best

        k_ref = k_of_eps(1e-3, u, taus, 1.0)
        ok_ref = k_ref == 4 == oracle(1e-3)
        values = [k_of_eps(eps, u, taus, 1.0) for eps in np.geomspace(1e-2, 1e-9, 20)]
        ok_monotone = all(b >= a for a, b in zip(values, values[1:]))
        ok_diverges = values[-1] > 50
        line = report(
            "A9 selector divergence",
            ok_ref and ok_monotone and ok_diverges,
            f"K(1e-3)={k_ref} (enumeration oracle 4); nondecreasing over a "
            f"20-point grid; K(1e-9)={values[-1]} > 50",
        )
        assert ok_ref and ok_monotone and ok_diverges, line
