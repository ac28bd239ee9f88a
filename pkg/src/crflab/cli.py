"""Scenario-driven command line entry point.

Subcommands: verify-identities, run-flow, run-normalized, hopf-explicit,
hopf-verify, solve-ma, max-time, plot. Every run writes its manifest before
any heavy compute; identical manifests reproduce identical CSV bytes
(seeded generators, fixed float formatting, fixed iteration order).

Exit codes: 0 success, 2 validation error, 3 numerical failure,
64 usage error. ``CRFLAB_THREADS`` caps library thread pools (applied
before the numerical modules are imported).
"""

import argparse
import os
import sys

__version__ = "0.1.0"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _apply_thread_cap():
    cap = os.environ.get("CRFLAB_THREADS")
    if not cap:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, cap)


# -- config -> objects ------------------------------------------------------------


def _chart_from_config(cfg):
    from .geometry import TorusChart

    n = int(cfg["n"])
    resolution = cfg.get("resolution", 64)
    periods = cfg.get("periods")
    active = cfg.get("active_axes")
    if isinstance(active, (int, float)):
        active = (int(active),)
    return TorusChart(n, resolution, periods, active)


def _preset_chart(name, resolution):
    from .geometry import TorusChart

    if name == "torus1":
        return TorusChart(1, resolution, active_axes=(0,))
    if name == "torus2":
        return TorusChart(2, resolution, active_axes=(0, 2))
    raise ValueError(f"unknown chart preset {name!r} (torus1 or torus2)")


def _perturbations_from_config(cfg):
    from .models import Perturbation

    perts = []
    raw = cfg.get("perturbation", [])
    if isinstance(raw, dict):
        raw = [raw]
    for p in raw:
        wave = p["wavevector"]
        if isinstance(wave, (int, float)):
            wave = (int(wave),)
        perts.append(
            Perturbation(
                int(p.get("i", 0)),
                int(p.get("j", 0)),
                float(p["amplitude"]),
                tuple(int(k) for k in wave),
                float(p.get("phase", 0.0)),
                str(p.get("profile", "cos")),
                float(p.get("sharpness", 1.25)),
            )
        )
    return perts


def _metric_from_config(cfg, chart, seed):
    import numpy as np

    from .models import TorusMetricRecipe, random_metric_recipe

    kind = cfg.get("kind", "explicit")
    if kind == "random":
        rng = np.random.default_rng(seed)
        recipe = random_metric_recipe(
            rng,
            chart.n,
            scale=float(cfg.get("scale", 0.15)),
            peaked=bool(cfg.get("peaked", True)),
            kahler=bool(cfg.get("kahler", False)),
            axes=chart.active_axes,
        )
        return recipe.build(chart)
    base = cfg.get("base")
    if base is None:
        base = np.eye(chart.n)
    else:
        entries = base if isinstance(base, tuple) else (base,)
        base = np.array([complex(e) for e in entries]).reshape(chart.n, chart.n)
    recipe = TorusMetricRecipe(
        base, _perturbations_from_config(cfg), kahler=bool(cfg.get("kahler", False))
    )
    return recipe.build(chart)


def _scalar_from_config(cfg, chart):
    from .models import ScalarRecipe

    return ScalarRecipe(_perturbations_from_config(cfg)).build(chart)


def _scenario_from_config(cfg, seed):
    from .flow import StepControl, scenario_from_metric

    chart = _chart_from_config(cfg["chart"])
    g0 = _metric_from_config(cfg.get("recipe", {}), chart, seed)
    ctrl_cfg = cfg.get("control", {})
    control = StepControl(
        dt_init=float(ctrl_cfg.get("dt_init", 1e-3)),
        safety=float(ctrl_cfg.get("safety", 0.8)),
        eps_pd=float(ctrl_cfg.get("eps_pd", 1e-8)),
    )
    mon = cfg.get("monitors", {})
    scenario = scenario_from_metric(
        g0,
        float(cfg.get("T0", 100.0)),
        control=control,
        convergence_tol=float(mon.get("tolerance", 1e-6)),
        convergence_patience=int(mon.get("patience", 50)),
    )
    return scenario, cfg


# -- subcommands -------------------------------------------------------------------


def _cmd_verify_identities(args):
    import numpy as np

    from . import models as M
    from . import tensors as T
    from .io import write_manifest, write_reports
    from .tensors import IdentityReport

    chart = _preset_chart(args.chart, args.resolution)
    write_manifest(
        args.out, "verify-identities", __version__, seed=args.seed,
        extra={"chart": args.chart, "resolution": args.resolution},
    )
    rng = np.random.default_rng(args.seed)
    r_g0, r_gh, r_phi = M.random_verification_triple(rng, chart.n, axes=chart.active_axes)
    g0 = r_g0.build(chart)
    ghat = r_gh.build(chart)
    phi = r_phi.build(chart)

    tol = args.tolerance
    rep = T.verify_trace_evolution(g0, ghat, phi, t=args.t)
    reports = rep.as_identity_reports(tol, 1e-8)
    grid = reports[0].grid
    reports.append(
        IdentityReport("bianchi_vanishing", T.verify_bianchi_vanishing(ghat), grid, 1e-7)
    )
    reports.append(
        IdentityReport("schwarz_volume_ratio", T.verify_schwarz_identity(g0, ghat), grid, 1e-7)
    )
    write_reports(os.path.join(args.out, "identities.txt"), reports)
    failed = [r.name for r in reports if not r.passed]
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.residual:.3e}")
    if failed:
        print(f"failed: {', '.join(failed)}", file=sys.stderr)
        return 3
    return 0


def _cmd_run_flow(args):
    from .flow import read_checkpoint, ricci_sup_norm, run, write_checkpoint
    from .io import load_config, write_manifest

    cfg = load_config(args.scenario)["scenario"]
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    write_manifest(args.out, "run-flow", __version__, seed=seed,
                   scenario_path=args.scenario)
    scenario, cfg = _scenario_from_config(cfg, seed)
    state = None
    if args.resume:
        state = read_checkpoint(args.resume, scenario)
    t_end = float(cfg.get("t_end", scenario.T0))

    ckpt_path = os.path.join(args.out, "checkpoint.snap")
    count = [0]

    def callback(st, record):
        count[0] += 1
        if args.checkpoint_every and count[0] % args.checkpoint_every == 0:
            write_checkpoint(ckpt_path, st, record.rows[-1][1])

    record, state = run(scenario, t_end, state=state, callback=callback)
    record.to_csv(os.path.join(args.out, "trajectory.csv"))
    write_checkpoint(ckpt_path, state, record.rows[-1][1])
    ric = ricci_sup_norm(state.omega)
    print(f"t_end = {state.t:.6g}  steps = {len(record.rows) - 1}  "
          f"ricci_sup = {ric:.3e}")
    if "converged_at" in record.meta:
        print(f"converged_at = {record.meta['converged_at']:.6g}")
    return 0


def _cmd_run_normalized(args):
    from .geometry import HermitianMatrixField
    from .flow import run_normalized
    from .io import load_config, write_manifest

    cfg = load_config(args.scenario)["scenario"]
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    write_manifest(args.out, "run-normalized", __version__, seed=seed,
                   scenario_path=args.scenario)
    scenario, cfg = _scenario_from_config(cfg, seed)
    t_end = float(cfg.get("t_end", 2.0))
    target = HermitianMatrixField(scenario.chart, scenario.g0.values)
    record, state, _ = run_normalized(scenario, t_end, target_form=target)
    record.to_csv(os.path.join(args.out, "trajectory.csv"))
    print(f"t_end = {state.t:.6g}  steps = {len(record.rows) - 1}  "
          f"note = {record.meta['target_note']}")
    return 0


def _cmd_hopf_explicit(args):
    import numpy as np

    from .geometry import HopfSampleSet
    from .io import write_csv, write_manifest
    from .models import hopf_metric_and_ricci

    write_manifest(args.out, "hopf-explicit", __version__, seed=args.seed,
                   extra={"n": args.n, "t": args.t, "points": args.points})
    sample = HopfSampleSet.random(args.n, args.alpha, args.points, args.seed)
    metric, _ = hopf_metric_and_ricci(sample, args.t)
    r2 = np.sum(np.abs(sample.points) ** 2, axis=-1)
    eigs = np.linalg.eigvalsh(metric * r2[:, None, None])
    rows = [
        tuple([r2[i]] + [eigs[i, j] for j in range(args.n)])
        for i in range(len(r2))
    ]
    cols = ["r2"] + [f"eig_scaled_{j}" for j in range(args.n)]
    write_csv(os.path.join(args.out, "eigenvalues.csv"), cols, rows)
    lo = eigs.min(axis=0)
    hi = eigs.max(axis=0)
    print("eigenvalues of r^2 * omega(t):")
    for j in range(args.n):
        print(f"  lambda_{j}: [{lo[j]:.12g}, {hi[j]:.12g}]")
    print(f"expected: 1 - n t = {1 - args.n * args.t:.12g} "
          f"(multiplicity {args.n - 1}) and 1")
    return 0


def _cmd_hopf_verify(args):
    from .geometry import HopfSampleSet
    from .io import write_manifest, write_reports
    from .models import (
        ReBilinear,
        verify_deck_invariance,
        verify_hopf_flow,
        verify_hopf_trace_chain,
    )
    from .tensors import IdentityReport

    write_manifest(args.out, "hopf-verify", __version__, seed=args.seed,
                   extra={"n": args.n, "points": args.points})
    sample = HopfSampleSet.random(args.n, args.alpha, args.points, args.seed)
    times = args.times or [0.0, 0.1, 0.2, 0.3 * (2.0 / args.n)]
    flow = verify_hopf_flow(sample, times)
    grid = f"{args.points}pts"
    reports = [
        IdentityReport("hopf_flow_closed_form", flow["closed_form_residual"], grid, 1e-10),
        IdentityReport("hopf_flow_fd_oracle", flow["fd_oracle_residual"], grid, 1e-6),
        IdentityReport("hopf_det_formula", flow["det_identity_residual"], grid, 1e-12),
        IdentityReport("hopf_deck_invariance", verify_deck_invariance(sample, times[-1]), grid, 1e-12),
    ]
    chain = verify_hopf_trace_chain(sample, times[-1], ReBilinear(0.01))
    reports.append(
        IdentityReport("hopf_trace_chain_equalities", chain.max_equality_residual(), grid, 1e-9)
    )
    reports.append(
        IdentityReport("hopf_trace_chain_inequality", chain.inequality_violation, grid, 1e-12)
    )
    write_reports(os.path.join(args.out, "hopf.txt"), reports)
    failed = [r.name for r in reports if not r.passed]
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.residual:.3e}")
    return 3 if failed else 0


def _cmd_solve_ma(args):
    from .elliptic import EllipticProblem, certify_estimates, solve_elliptic
    from .io import load_config, write_manifest, write_snapshot

    cfg = load_config(args.scenario)["elliptic"]
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    write_manifest(args.out, "solve-ma", __version__, seed=seed,
                   scenario_path=args.scenario)
    chart = _chart_from_config(cfg["chart"])
    omega = _metric_from_config(cfg.get("recipe", {}), chart, seed)
    F = _scalar_from_config(cfg.get("rhs", {}), chart)
    problem = EllipticProblem(omega, F, args.normalization or cfg.get("normalization", "mean"))
    method = args.method or cfg.get("method", "newton-continuation")
    solution = solve_elliptic(problem, method=method, tol=args.tolerance)
    write_snapshot(os.path.join(args.out, "phi.snap"), solution.phi)
    print(f"method = {solution.method}  residual = {solution.residual:.3e}  "
          f"b = {solution.b:.12g}")
    if args.a_grid:
        report = certify_estimates(solution, tuple(args.a_grid))
        print(f"oscillation = {report.oscillation:.6g}")
        for A, c1, c2 in zip(report.A_grid, report.C_coarse, report.C_fine):
            print(f"C({A:g}) = {c1:.6g}  refined = {c2:.6g}")
        print(f"stable_A = {report.stable_A}")
    return 0


def _cmd_max_time(args):
    import json
    import math

    from .io import load_config, write_manifest
    from .surfaces import (
        Divisor,
        SurfaceClassData,
        SurfaceFlags,
        classify,
        maximal_time,
    )

    cfg = load_config(args.data)["surface"]
    write_manifest(args.out, "max-time", __version__, scenario_path=args.data)
    flags_cfg = cfg.get("flags")
    flags = None
    if flags_cfg:
        b2 = flags_cfg.get("class_vii_b2")
        flags = SurfaceFlags(
            bool(flags_cfg.get("minimal", False)),
            float(flags_cfg.get("kodaira", -math.inf)),
            None if b2 in (None, "none") else int(b2),
            bool(flags_cfg.get("kahler", False)),
        )
    raw_div = cfg.get("divisor", [])
    if isinstance(raw_div, dict):
        raw_div = [raw_div]
    divisors = tuple(
        Divisor(str(d["name"]), int(d["d_self"]), int(d["d_dot_K"]),
                float(d["omega0_vol"]))
        for d in raw_div
    )
    data = SurfaceClassData(
        str(cfg.get("name", "surface")),
        float(cfg["vol0"]),
        float(cfg["pairing"]),
        float(cfg["c1sq"]),
        divisors,
        flags,
    )
    result = maximal_time(data)
    report = classify(data, result)
    record = {
        "name": data.name,
        "T": "inf" if not result.finite else result.T,
        "case": result.case,
        "binding": result.binding,
        "volume_poly": list(result.volume_poly),
    }
    with open(os.path.join(args.out, "maxtime.json"), "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"T = {'inf' if not result.finite else format(result.T, '.12g')}  "
          f"case = ({result.case})  binding = {result.binding}")
    for line in report.narrative:
        print(f"  {line}")
    return 0


def _cmd_plot(args):
    from .plotsvg import plot_csv

    out = args.out or (os.path.splitext(args.csv)[0] + ".svg")
    plot_csv(args.csv, [c.strip() for c in args.columns.split(",")], out)
    print(out)
    return 0


# -- parser ------------------------------------------------------------------------


def _build_parser():
    parser = _Parser(prog="crflab", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-identities", help="certify tensor identities")
    p.add_argument("--chart", default="torus2")
    p.add_argument("--resolution", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t", type=float, default=0.1)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--out", default="out-verify")
    p.set_defaults(func=_cmd_verify_identities)

    p = sub.add_parser("run-flow", help="integrate the metric flow")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", default="out-flow")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--checkpoint-every", type=int, default=0)
    p.add_argument("--resume", default=None)
    p.set_defaults(func=_cmd_run_flow)

    p = sub.add_parser("run-normalized", help="integrate the normalized flow")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", default="out-normalized")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_run_normalized)

    p = sub.add_parser("hopf-explicit", help="tabulate the explicit solution")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--t", type=float, default=0.25)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out-hopf")
    p.set_defaults(func=_cmd_hopf_explicit)

    p = sub.add_parser("hopf-verify", help="verify the explicit-solution identities")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--times", type=float, nargs="*", default=None)
    p.add_argument("--out", default="out-hopf-verify")
    p.set_defaults(func=_cmd_hopf_verify)

    p = sub.add_parser("solve-ma", help="solve the elliptic equation")
    p.add_argument("--scenario", required=True)
    p.add_argument("--method", default=None)
    p.add_argument("--normalization", default=None)
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--a-grid", type=float, nargs="*", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="out-ma")
    p.set_defaults(func=_cmd_solve_ma)

    p = sub.add_parser("max-time", help="maximal time from intersection data")
    p.add_argument("--data", required=True)
    p.add_argument("--out", default="out-maxtime")
    p.set_defaults(func=_cmd_max_time)

    p = sub.add_parser("plot", help="SVG line plot of trajectory columns")
    p.add_argument("--csv", required=True)
    p.add_argument("--columns", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None):
    _apply_thread_cap()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 64
    from .errors import (
        CrflabError,
        NonConvergence,
        PositivityLost,
        StepUnderflow,
    )

    try:
        return args.func(args)
    except (NonConvergence, StepUnderflow) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    except PositivityLost as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        if getattr(err, "last_state", None) is not None:
            print(f"last good state at t = {err.last_state.t:.6g}", file=sys.stderr)
        return 3
    except (CrflabError, ValueError, KeyError, OSError) as err:
        print(f"invalid input: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
