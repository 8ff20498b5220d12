"""Command-line front end.

Subcommands: spectrum, crossings, analyze, bound, exponent, evolve, sweep,
verify.  Every run is a pure function of (argv, config file); the effective
configuration is echoed into the output header so results can be reproduced.
Exit codes: 0 success, 1 computation error, 2 usage error.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import bounds as bounds_mod
from . import harness as harness_mod
from . import spectral as spectral_mod
from . import verify as verify_mod
from .evolve import (
    EXP_MIDPOINT,
    RK4,
    TRANSITION_PROBABILITY,
    VECTOR_DEVIATION,
    PropagationConfig,
    adiabatic_error,
    write_checkpoint_csv,
)
from .model import MINUS, PLUS, ModelSpec, exact_eigenvector
from .util import fmt_f15, fmt_g15

INTEGRATOR_FLAGS = {"exp-midpoint": EXP_MIDPOINT, "rk4": RK4}
METRIC_FLAGS = {"deviation": VECTOR_DEVIATION, "transition": TRANSITION_PROBABILITY}


def _model_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("model")
    group.add_argument("--omega0", type=float, default=1.0,
                       help="level splitting (default 1.0)")
    group.add_argument("--omega-rabi", type=float, default=1.0, dest="omega_rabi",
                       help="coupling amplitude, must be > 0 (default 1.0)")
    group.add_argument("--rho", type=float, default=1.0,
                       help="phase-modulation amplitude for the modified preset")
    group.add_argument("--preset", choices=["rwa", "modified"], default="rwa")
    group.add_argument("--n-modes", type=int, default=16, dest="n_modes",
                       help="harmonic truncation N (default 16)")
    group.add_argument("--theta-grid", type=int, default=0, dest="theta_grid",
                       help="phase samples (0 = auto)")
    return parent


def _spec_from_args(args) -> ModelSpec:
    return ModelSpec(
        omega0=args.omega0,
        Omega=args.omega_rabi,
        rho=args.rho,
        kind=args.preset,
        n_modes=args.n_modes,
        theta_grid=args.theta_grid,
    )


def _parse_k_range(text: str):
    if ".." in text:
        lo, hi = text.split("..", 1)
        return int(lo), int(hi)
    k = int(text)
    return k, k


def _echo_config(args, extra=None) -> str:
    payload = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    if extra:
        payload.update(extra)
    return "# config: " + json.dumps(payload, sort_keys=True, default=str)


def _emit_csv(rows, header, out_path):
    if out_path:
        with open(out_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        print(f"wrote {out_path}")
    else:
        print(",".join(header))
        for row in rows:
            print(",".join(str(c) for c in row))


def cmd_spectrum(args) -> int:
    spec = _spec_from_args(args)
    print(_echo_config(args))
    if args.vector_branch is not None:
        branch = PLUS if args.vector_branch == "plus" else MINUS
        vec = exact_eigenvector(spec, args.s, branch, args.vector_mode)
        width = spec.mode_count
        rows = []
        for i, c in enumerate(vec):
            comp = "up" if i < width else "down"
            mode = (i % width) - spec.n_modes
            rows.append([comp, mode, fmt_g15(c.real), fmt_g15(c.imag)])
        _emit_csv(rows, ["component", "mode", "re", "im"], args.out)
        return 0
    table = spectral_mod.spectrum_slice(spec, args.s, args.m_max)
    rows = [
        [branch, mode, fmt_f15(value)]
        for branch, mode, value in zip(table.branches, table.modes, table.values)
    ]
    _emit_csv(rows, ["branch", "mode", "lambda"], args.out)
    print(f"gap={fmt_g15(table.gap)}")
    return 0


def cmd_crossings(args) -> int:
    spec = _spec_from_args(args)
    print(_echo_config(args))
    k_lo, k_hi = _parse_k_range(args.k)
    rows = []
    for k in range(k_lo, k_hi + 1):
        z = spectral_mod.crossing_time(spec, k)
        u = spectral_mod.partition_u(spec, k)
        ua = spectral_mod.u_asymptotic(spec, k)
        rows.append([k, fmt_f15(z), fmt_f15(u), fmt_f15(ua)])
    _emit_csv(rows, ["k", "z", "u", "u_asymptotic"], args.out)
    return 0


def cmd_analyze(args) -> int:
    spec = _spec_from_args(args)
    print(_echo_config(args))
    k_lo, k_hi = _parse_k_range(args.k)
    sides = [args.side] if args.side != "both" else ["right", "left"]
    for side in sides:
        ledger = spectral_mod.build_ledger(spec, k_lo, k_hi, side)
        alphas = [r.alpha_hat for r in ledger.records]
        ratios = [r.g_k / r.k for r in ledger.records]
        print(f"side={side}: {len(ledger.records)} crossing windows isolated "
              f"(k={k_lo}..{k_hi})")
        print(f"  gap exponent: fitted range [{min(alphas):.4f}, {max(alphas):.4f}],"
              f" ledger value {ledger.alpha:.4f}")
        print(f"  G_k/k range: [{min(ratios):.4f}, {max(ratios):.4f}]")
        if args.out:
            path = Path(args.out)
            if len(sides) == 2:
                path = path.with_name(path.stem + f"_{side}" + path.suffix)
            spectral_mod.write_ledger_csv(ledger, path)
            print(f"  wrote {path}")
    return 0


def cmd_bound(args) -> int:
    spec = _spec_from_args(args)
    print(_echo_config(args))
    k_lo, k_hi = _parse_k_range(args.k)
    led_left = spectral_mod.build_ledger(spec, k_lo, k_hi, "left")
    led_right = spectral_mod.build_ledger(spec, k_lo, k_hi, "right")
    report = bounds_mod.accumulation_bound(args.eps, led_left, led_right, args.varsigma)
    print(bounds_mod.bound_report_text(report))
    power = 1.0 / (1.0 + 2.0 * led_right.alpha)
    print("# selector trace (right side): position, |u-a| / cumulative tau^(1/(1+2a)), threshold")
    csum = 0.0
    for pos, rec in enumerate(led_right.records, start=1):
        csum += rec.tau_k**power
        marker = " <= K" if pos <= report.K_plus else ""
        print(f"  K={pos} (k={rec.k}): {fmt_g15(rec.u_k / csum)} vs "
              f"{fmt_g15(args.eps ** power)}{marker}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(bounds_mod.BOUND_CSV_COLUMNS)
            writer.writerow(bounds_mod.bound_report_csv_row(report))
        print(f"wrote {args.out}")
    return 0


def cmd_exponent(args) -> int:
    report = bounds_mod.exponent_p(args.alpha, args.beta, args.gamma, args.delta)
    print(_echo_config(args))
    print(bounds_mod.exponent_report_text(report))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(bounds_mod.EXPONENT_CSV_COLUMNS)
            writer.writerow(bounds_mod.exponent_report_csv_row(report))
        print(f"wrote {args.out}")
    return 0


def cmd_evolve(args) -> int:
    spec = _spec_from_args(args)
    print(_echo_config(args))
    cfg = PropagationConfig(
        eps=args.eps,
        s_start=args.s_start,
        s_end=args.s_end,
        integrator=INTEGRATOR_FLAGS[args.integrator],
        metric=METRIC_FLAGS[args.metric],
    )
    res = adiabatic_error(spec, cfg)
    print(f"vector_deviation={fmt_g15(res.error_vector_deviation)}")
    print(f"transition_prob={fmt_g15(res.transition_prob)}")
    print(f"unitarity_drift={fmt_g15(res.unitarity_drift)}")
    print(f"intertwine_residual={fmt_g15(res.intertwine_residual)}")
    print(f"steps={res.steps}")
    print(f"flags={';'.join(res.flags)}")
    if args.out:
        write_checkpoint_csv(res, args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_sweep(args) -> int:
    # precedence: package defaults < config file < explicit flags
    merged = {
        "spec": harness_mod.spec_to_dict(ModelSpec()),
        "eps_grid": {"eps_max": 1e-1, "eps_min": 3e-3, "points": 8},
        "s_window": [-0.45, 0.45],
        "metric": VECTOR_DEVIATION,
        "bound_overlay": False,
        "integrator": EXP_MIDPOINT,
        "output_dir": None,
    }
    if args.config:
        merged.update(harness_mod.config_to_dict(harness_mod.load_sweep_config(args.config)))
    spec_flags = {
        "omega0": args.omega0, "Omega": args.omega_rabi, "rho": args.rho,
        "kind": args.preset, "n_modes": args.n_modes, "theta_grid": args.theta_grid,
    }
    spec_given = {k: v for k, v in spec_flags.items() if v is not None}
    if spec_given:
        merged["spec"] = {**merged["spec"], **spec_given}
    grid_flags = {"eps_max": args.eps_max, "eps_min": args.eps_min,
                  "points": args.eps_points}
    grid_given = {k: v for k, v in grid_flags.items() if v is not None}
    if grid_given:
        merged["eps_grid"] = {**merged["eps_grid"], **grid_given}
    window = list(merged["s_window"])
    if args.s_start is not None:
        window[0] = args.s_start
    if args.s_end is not None:
        window[1] = args.s_end
    merged["s_window"] = window
    if args.metric is not None:
        merged["metric"] = METRIC_FLAGS[args.metric]
    if args.bound_overlay:
        merged["bound_overlay"] = True
    if args.integrator is not None:
        merged["integrator"] = INTEGRATOR_FLAGS[args.integrator]
    if args.out is not None:
        merged["output_dir"] = args.out
    merged = {k: v for k, v in merged.items() if v is not None}
    cfg = harness_mod.config_from_dict(merged)
    print(_echo_config(args, {"effective": harness_mod.config_to_dict(cfg)}))
    result = harness_mod.run_sweep(cfg)
    out_dir = cfg.output_dir or args.out or "sweep_out"
    paths = harness_mod.write_sweep_outputs(cfg, result, out_dir)
    for row in result.rows:
        print(f"eps={fmt_g15(row.eps)} error={fmt_g15(row.error)} "
              f"steps={row.steps} flags={';'.join(row.flags)}")
    if result.fit is not None:
        print(f"fit: p_hat={fmt_g15(result.fit.p_hat)} "
              f"log_prefactor={fmt_g15(result.fit.log_prefactor)} "
              f"r_squared={fmt_g15(result.fit.r_squared)} "
              f"stderr_p={fmt_g15(result.fit.stderr_p)}")
    for note in result.notes:
        print(f"note: {note}")
    print(f"wrote {paths['csv']}, {paths['svg']}, {paths['config']}")
    return 0


def cmd_verify(args) -> int:
    spec_rwa = ModelSpec(omega0=args.omega0, Omega=args.omega_rabi, rho=0.0,
                         kind="rwa", n_modes=args.n_modes)
    spec_mod = ModelSpec(omega0=args.omega0, Omega=args.omega_rabi, rho=args.rho,
                         kind="modified", n_modes=args.n_modes)
    print(_echo_config(args))
    results = verify_mod.run_all(
        spec_rwa, spec_mod, eps=args.eps,
        window=(args.s_start, args.s_end),
        k_range=_parse_k_range(args.k),
    )
    failed = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"{status}  {res.name}: {res.detail}")
        failed += 0 if res.passed else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="floqade",
        description=(
            "Two-level Floquet models with a quasi-energy crossing ladder: "
            "spectral analysis, adiabatic-error bounds, and propagator sweeps. "
            "--omega-rabi is the coupling amplitude (Omega); --omega0 the "
            "level splitting."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    model = _model_parent()

    p = sub.add_parser("spectrum", parents=[model],
                       help="level table or eigenvector coefficients at fixed s")
    p.add_argument("--s", type=float, default=0.3)
    p.add_argument("--m-max", type=int, default=8, dest="m_max")
    p.add_argument("--vector-branch", choices=["plus", "minus"], default=None)
    p.add_argument("--vector-mode", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("crossings", parents=[model],
                       help="crossing times, partition points, and asymptotics")
    p.add_argument("--k", default="4..12", help="index range, e.g. 2..6")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_crossings)

    p = sub.add_parser("analyze", parents=[model],
                       help="build crossing ledgers and report window checks")
    p.add_argument("--k", default="4..20")
    p.add_argument("--side", choices=["left", "right", "both"], default="right")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("bound", parents=[model],
                       help="accumulation-point error bound at one eps")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--k", default="4..20")
    p.add_argument("--varsigma", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("exponent", help="decay-exponent classifier")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--out", default=None, help="CSV row output path")
    p.set_defaults(func=cmd_exponent)

    p = sub.add_parser("evolve", parents=[model],
                       help="one exact-vs-adiabatic propagation")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--s-start", type=float, default=-0.45, dest="s_start")
    p.add_argument("--s-end", type=float, default=0.45, dest="s_end")
    p.add_argument("--integrator", choices=sorted(INTEGRATOR_FLAGS),
                   default="exp-midpoint")
    p.add_argument("--metric", choices=sorted(METRIC_FLAGS), default="deviation")
    p.add_argument("--out", default=None,
                   help="checkpoint CSV path (exact rows, then adiabatic rows)")
    p.set_defaults(func=cmd_evolve)

    # sweep flags default to None sentinels so file-vs-flag precedence is clean
    p = sub.add_parser("sweep", help="adiabaticity sweep with CSV/SVG artifacts")
    grp = p.add_argument_group("model")
    grp.add_argument("--omega0", type=float, default=None)
    grp.add_argument("--omega-rabi", type=float, default=None, dest="omega_rabi")
    grp.add_argument("--rho", type=float, default=None)
    grp.add_argument("--preset", choices=["rwa", "modified"], default=None)
    grp.add_argument("--n-modes", type=int, default=None, dest="n_modes")
    grp.add_argument("--theta-grid", type=int, default=None, dest="theta_grid")
    p.add_argument("--eps-min", type=float, default=None, dest="eps_min")
    p.add_argument("--eps-max", type=float, default=None, dest="eps_max")
    p.add_argument("--eps-points", type=int, default=None, dest="eps_points")
    p.add_argument("--s-start", type=float, default=None, dest="s_start")
    p.add_argument("--s-end", type=float, default=None, dest="s_end")
    p.add_argument("--metric", choices=sorted(METRIC_FLAGS), default=None)
    p.add_argument("--bound-overlay", action="store_true", dest="bound_overlay")
    p.add_argument("--integrator", choices=sorted(INTEGRATOR_FLAGS), default=None)
    p.add_argument("--config", default=None, help="JSON sweep config (flags override)")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", parents=[model],
                       help="run the invariant suite; nonzero exit on failure")
    p.add_argument("--eps", type=float, default=1e-2)
    p.add_argument("--s-start", type=float, default=-0.45, dest="s_start")
    p.add_argument("--s-end", type=float, default=0.45, dest="s_end")
    p.add_argument("--k", default="4..20")
    p.set_defaults(func=cmd_verify)

    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError,
            OSError,
            RuntimeError,
            np.linalg.LinAlgError) as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
