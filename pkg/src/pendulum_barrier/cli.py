"""Command-line front end: pipeline orchestration and file export.

Subcommands: endpoints, barrier, stopping-points, query, oracle, plot.
Exit codes: 0 success, 2 configuration error, 3 verification failure,
4 oracle disagreement.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .assembly import (
    OracleDisagreement,
    StitchGap,
    TAG_INTERIOR,
    TAG_NAMES,
    WindowExceeded,
    assemble,
    membership,
    membership_oracle,
)
from .config import ConfigError, RunConfig, load_config
from .integrator import integrate_all_arcs
from .intersection import find_stopping_points, truncate_at_stopping_points
from .model import MODE_NAMES
from .svgplot import render_barrier_svg
from .tangency import (
    NONSMOOTH_RESIDUAL_TOL,
    SMOOTH_RESIDUAL_TOL,
    SpuriousRootFound,
    SymmetryValidationFailed,
    all_endpoints,
    reject_spurious_roots,
    verify_tangentiality,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFICATION = 3
EXIT_ORACLE = 4


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _build_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {
        "M": args.M, "m": args.m, "l": args.l, "g": args.g,
        "tol_abs": args.tol_abs, "tol_rel": args.tol_rel,
        "out_dir": args.out, "seed": args.seed,
        "k_min": args.k_min, "k_max": args.k_max,
        "grid_n": args.grid_n, "oracle_grid_n": args.oracle_grid_n,
    }
    cfg = dataclasses.replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    return cfg.validate()


def _out_dir(cfg: RunConfig) -> Path:
    d = Path(cfg.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _compute_endpoints(cfg: RunConfig):
    p = cfg.params()
    eps = all_endpoints(p, cfg.k_range())
    rows = []
    worst = 0.0
    for tp in eps:
        res = verify_tangentiality(p, tp)
        ok = res <= SMOOTH_RESIDUAL_TOL if tp.kind == "smooth" else res >= NONSMOOTH_RESIDUAL_TOL
        if not ok:
            raise SymmetryValidationFailed(f"{tp.label}: tangentiality residual {res:.3e} out of tolerance")
        worst = max(worst, abs(res) if tp.kind == "smooth" else max(0.0, -res))
        rows.append((tp, res))
    return p, eps, rows, worst


def _write_endpoints_csv(path: Path, rows):
    lines = ["k,kind,theta1,theta2,lambda1,lambda2,control_lo,control_hi,residual"]
    for tp, res in rows:
        lines.append(
            ",".join(
                [
                    str(tp.period_index),
                    tp.kind,
                    _fmt(tp.state[0]),
                    _fmt(tp.state[1]),
                    _fmt(tp.final_adjoint[0]),
                    _fmt(tp.final_adjoint[1]),
                    _fmt(tp.final_control.lo),
                    _fmt(tp.final_control.hi),
                    _fmt(res),
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_pipeline(cfg: RunConfig):
    """endpoints -> arcs -> stopping points -> truncation -> set assembly."""
    p, eps, rows, _ = _compute_endpoints(cfg)
    arcs = integrate_all_arcs(p, eps, cfg.arc_options())
    sps = find_stopping_points(arcs)
    truncated = truncate_at_stopping_points(arcs, sps)
    model = assemble(
        p,
        truncated,
        eps,
        grid_n=cfg.grid_n,
        theta2_max=None if cfg.theta2_max == 0.0 else cfg.theta2_max,
    )
    return p, eps, rows, arcs, sps, truncated, model


def _write_arc_csvs(out: Path, arcs):
    arc_dir = out / "arcs"
    arc_dir.mkdir(exist_ok=True)
    index = ["arc_id,source_kind,k,termination,n_samples,file"]
    for arc in arcs:
        name = arc.arc_id.replace("@", "_k")
        fname = f"arc_{name}.csv"
        lines = ["t,theta1,theta2,lambda1,lambda2,u,mu,H,mode"]
        for s in arc.samples():
            lines.append(
                ",".join(
                    [
                        _fmt(s.t),
                        _fmt(s.state[0]),
                        _fmt(s.state[1]),
                        _fmt(s.adjoint[0]),
                        _fmt(s.adjoint[1]),
                        _fmt(s.control),
                        _fmt(s.multiplier),
                        _fmt(s.hamiltonian),
                        MODE_NAMES[s.mode],
                    ]
                )
            )
        (arc_dir / fname).write_text("\n".join(lines) + "\n", encoding="utf-8")
        index.append(
            f"{arc.arc_id},{arc.source.kind},{arc.source.period_index},"
            f"{arc.termination},{len(arc)},arcs/{fname}"
        )
    (out / "arcs_index.csv").write_text("\n".join(index) + "\n", encoding="utf-8")


def _write_stopping_csv(path: Path, sps):
    lines = ["theta1,theta2,arc_a,arc_b,t_a,t_b,transversal,normalized_det"]
    for sp in sps:
        lines.append(
            ",".join(
                [
                    _fmt(sp.location[0]),
                    _fmt(sp.location[1]),
                    sp.arc_a,
                    sp.arc_b,
                    _fmt(sp.t_a),
                    _fmt(sp.t_b),
                    str(int(sp.transversal)),
                    _fmt(sp.det),
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _model_json(cfg: RunConfig, model) -> str:
    doc = {
        "schema": "admissible-set-model",
        "schema_version": 1,
        "params": {"M": model.params.M, "m": model.params.m, "l": model.params.l, "g": model.params.g},
        "period": model.period,
        "theta2_max": model.theta2_max,
        "grid_n": int(model.cell_comp.shape[0]),
        "curves": [
            {
                "id": c.curve_id,
                "kind": c.kind,
                "source": c.source,
                "points": [[float(a), float(b)] for a, b in c.points],
            }
            for c in model.boundary_curves
        ],
        "chains": model.chains,
        "components": [
            {
                "id": c.comp_id,
                "tag": TAG_NAMES[c.tag],
                "bounded": c.bounded,
                "n_cells": c.n_cells,
                "seed": [c.seed[0], c.seed[1]],
            }
            for c in model.components
        ],
        "diagnostics": {
            "stitching": model.diagnostics.get("stitching", []),
            "vote_conflicts": {str(k): v for k, v in model.diagnostics.get("vote_conflicts", {}).items()},
        },
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def cmd_endpoints(args) -> int:
    cfg = _build_config(args)
    out = _out_dir(cfg)
    try:
        p, eps, rows, worst = _compute_endpoints(cfg)
        scan_log = reject_spurious_roots(p)
    except (SymmetryValidationFailed, SpuriousRootFound) as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION
    _write_endpoints_csv(out / "endpoints.csv", rows)
    if args.proof_log:
        (out / "tangency_scan.txt").write_text(scan_log + "\n", encoding="utf-8")
    print(f"{len(rows)} end points written to {out / 'endpoints.csv'} (worst residual {worst:.3e})")
    return EXIT_OK


def cmd_barrier(args) -> int:
    cfg = _build_config(args)
    out = _out_dir(cfg)
    try:
        p, eps, rows, arcs, sps, truncated, model = run_pipeline(cfg)
    except (SymmetryValidationFailed, SpuriousRootFound, StitchGap) as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION
    _write_endpoints_csv(out / "endpoints.csv", rows)
    _write_arc_csvs(out, truncated)
    _write_stopping_csv(out / "stopping_points.csv", sps)
    (out / "model.json").write_text(_model_json(cfg, model) + "\n", encoding="utf-8")
    svg = render_barrier_svg(model, truncated, [sp for sp in sps if sp.transversal],
                             theta1_window=(cfg.theta1_win_lo, cfg.theta1_win_hi))
    (out / "barrier.svg").write_text(svg, encoding="utf-8")
    n_adm = sum(1 for c in model.components if c.tag == TAG_INTERIOR)
    print(
        f"pipeline complete: {len(truncated)} arcs, "
        f"{sum(1 for sp in sps if sp.transversal)} transversal stopping points, "
        f"{len(model.components)} components ({n_adm} admissible); outputs in {out}"
    )
    return EXIT_OK


def cmd_stopping_points(args) -> int:
    cfg = _build_config(args)
    out = _out_dir(cfg)
    try:
        p, eps, rows, _ = _compute_endpoints(cfg)
    except (SymmetryValidationFailed, SpuriousRootFound) as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION
    arcs = integrate_all_arcs(p, eps, cfg.arc_options())
    sps = find_stopping_points(arcs)
    _write_stopping_csv(out / "stopping_points.csv", sps)
    print(f"{sum(1 for sp in sps if sp.transversal)} transversal stopping points -> {out / 'stopping_points.csv'}")
    return EXIT_OK


def cmd_query(args) -> int:
    cfg = _build_config(args)
    try:
        *_, model = run_pipeline(cfg)
        verdict = membership(model, (args.theta1, args.theta2))
    except WindowExceeded as exc:
        print(f"window exceeded: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SymmetryValidationFailed, SpuriousRootFound, StitchGap) as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION
    print(f"{verdict.tag} distance_estimate={_fmt(verdict.distance_estimate)}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _build_config(args)
    out = _out_dir(cfg)
    try:
        *_, model = run_pipeline(cfg)
    except (SymmetryValidationFailed, SpuriousRootFound, StitchGap) as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION
    try:
        report = membership_oracle(
            model,
            grid_shape=(cfg.oracle_grid_n, cfg.oracle_grid_n),
            T_max=cfg.oracle_t_max,
        )
    except OracleDisagreement as exc:
        print(f"oracle disagreement: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    lines = ["theta1,theta2,oracle_admissible,computed,boundary_distance"]
    n1, n2 = report.oracle_admissible.shape
    for i in range(n1):
        for j in range(n2):
            lines.append(
                ",".join(
                    [
                        _fmt(report.grid_theta1[i]),
                        _fmt(report.grid_theta2[j]),
                        str(int(report.oracle_admissible[i, j])),
                        TAG_NAMES[int(report.computed_tag[i, j])],
                        _fmt(report.boundary_distance[i, j]),
                    ]
                )
            )
    (out / "oracle.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    n_adm = int(report.oracle_admissible.sum())
    print(f"oracle grid {n1}x{n2}: {n_adm} plausibly-admissible points, no disagreements; -> {out / 'oracle.csv'}")
    return EXIT_OK


def cmd_plot(args) -> int:
    cfg = _build_config(args)
    out = _out_dir(cfg)
    try:
        p, eps, rows, arcs, sps, truncated, model = run_pipeline(cfg)
    except (SymmetryValidationFailed, SpuriousRootFound, StitchGap) as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION
    svg = render_barrier_svg(model, truncated, [sp for sp in sps if sp.transversal],
                             theta1_window=(cfg.theta1_win_lo, cfg.theta1_win_hi))
    (out / "barrier.svg").write_text(svg, encoding="utf-8")
    print(f"figure written to {out / 'barrier.svg'}")
    return EXIT_OK


def _add_common(sp):
    sp.add_argument("--config", help="path to a key = value configuration file")
    sp.add_argument("--M", type=float, help="cart mass (kg)")
    sp.add_argument("--m", type=float, help="pendulum mass (kg)")
    sp.add_argument("--l", type=float, help="cable length (m)")
    sp.add_argument("--g", type=float, help="gravity (m/s^2)")
    sp.add_argument("--tol-abs", dest="tol_abs", type=float, help="integrator absolute tolerance")
    sp.add_argument("--tol-rel", dest="tol_rel", type=float, help="integrator relative tolerance")
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--seed", type=int, help="random seed for sampled suites")
    sp.add_argument("--k-min", dest="k_min", type=int, help="first period index")
    sp.add_argument("--k-max", dest="k_max", type=int, help="last period index")
    sp.add_argument("--grid-n", dest="grid_n", type=int, help="period-cell grid resolution")
    sp.add_argument("--oracle-grid-n", dest="oracle_grid_n", type=int, help="oracle grid resolution")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pendulum-barrier",
        description="Admissible-set boundary for the cart pendulum with a non-rigid cable",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("endpoints", help="tangency end points, adjoints, verification residuals")
    _add_common(sp)
    sp.add_argument("--proof-log", action="store_true", help="also write the tangency root-scan log")
    sp.set_defaults(fn=cmd_endpoints)

    sp = sub.add_parser("barrier", help="full pipeline: arcs, stopping points, set model, figure")
    _add_common(sp)
    sp.set_defaults(fn=cmd_barrier)

    sp = sub.add_parser("stopping-points", help="arc intersections only")
    _add_common(sp)
    sp.set_defaults(fn=cmd_stopping_points)

    sp = sub.add_parser("query", help="membership verdict for one state")
    _add_common(sp)
    sp.add_argument("theta1", type=float)
    sp.add_argument("theta2", type=float)
    sp.set_defaults(fn=cmd_query)

    sp = sub.add_parser("oracle", help="sampled-policy membership cross-check")
    _add_common(sp)
    sp.set_defaults(fn=cmd_oracle)

    sp = sub.add_parser("plot", help="emit the SVG figure only")
    _add_common(sp)
    sp.set_defaults(fn=cmd_plot)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
