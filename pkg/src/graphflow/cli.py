"""Command line entry point and run orchestration.

    graphflow run <config>               full 2D flow with monitors and verdicts
    graphflow check-hypotheses <config>  curvature assumptions only
    graphflow oracle <config>            1D reduced flow for equivariant data
    graphflow --emit-default-config

GRAPHFLOW_WORKERS sets the BLAS/OpenMP thread count.  It has to be applied
before numpy is imported, which is why the heavy imports live inside the
functions below.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import __version__

WORKERS_ENV = "GRAPHFLOW_WORKERS"
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")

EXIT_OK = 0
EXIT_VERDICT = 1      # a verdict failed or the run ended in a suspected singularity
EXIT_ERROR = 2        # configuration or runtime error

log = logging.getLogger("graphflow")


def apply_workers(environ=os.environ):
    n = environ.get(WORKERS_ENV)
    if n is None:
        return None
    if not n.isdigit() or int(n) < 1:
        raise SystemExit(f"{WORKERS_ENV} must be a positive integer, got {n!r}")
    for var in _THREAD_VARS:
        environ[var] = n
    return int(n)


def _grid_boundary(cfg):
    if cfg.boundary != "auto":
        return cfg.boundary
    return "atlas" if cfg.domain_kind == "sphere" else "periodic"


def build_problem(cfg):
    """(grid, target manifold, initial map) for a validated config."""
    from .grid import build_grid
    from .maps import make_initial_map

    M, N = cfg.domain(), cfg.target()
    grid = build_grid(M, cfg.resolution, _grid_boundary(cfg), cfg.domain_period)
    f0 = make_initial_map(grid, N, cfg.map_family, cfg.map_parameter,
                          constant_point=cfg.map_point or None, expression=cfg.map_expression,
                          seed=cfg.seed)
    return grid, N, f0


def controls_from_config(cfg):
    from .flow import Controls
    from .monitors import Tolerances

    tol = Tolerances(tol_eps=cfg.tol_eps, tol_logdet=cfg.tol_logdet, tol_disp=cfg.tol_disp,
                     diam_tol=cfg.diam_tol, H2_ceiling=cfg.h2_ceiling)
    return Controls(cfl_safety=cfg.cfl_safety, t_max=cfg.t_max, diam_tol=cfg.diam_tol,
                    retry_max=cfg.retry_max, monitor_stride=cfg.monitor_stride,
                    snapshot_stride=cfg.snapshot_stride, dt_request=cfg.dt_request,
                    max_steps=cfg.max_steps, gauge_check=cfg.gauge_check, tolerances=tol,
                    particle_stride=cfg.particle_stride)


def hypothesis_report(cfg):
    from .manifolds import check_hypotheses

    hc = check_hypotheses(cfg.domain(), cfg.target(), cfg.sigma, cfg.mu)
    return {"holds": hc.holds, "margin": hc.margin, "slacks": list(hc.slacks),
            "sigma": hc.sigma, "mu": hc.mu}


def _dump_diagnostics(out, exc, extra=None):
    from .output import write_json

    data = {"error": type(exc).__name__, "message": str(exc)}
    data.update(getattr(exc, "diagnostics", None) or {})
    data.update(extra or {})
    write_json(os.path.join(out, "diagnostics.json"), data)


def orchestrate(cfg, quiet=False) -> int:
    """Run the full flow for ``cfg`` and write every output file.

    Returns 0 iff all enabled verdicts pass.
    """
    from .errors import GraphFlowError
    from .flow import run
    from .output import emit_plotdata, write_json, write_snapshot, write_timeseries, write_verdicts

    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    try:
        hyp = hypothesis_report(cfg)
        if not hyp["holds"]:
            log.warning("curvature hypotheses fail (margin %.3g); the run is exploratory", hyp["margin"])
        if cfg.exploratory:
            log.warning("map parameter %g >= 1: outside the length-decreasing regime", cfg.map_parameter)
        grid, N, f0 = build_problem(cfg)
        controls = controls_from_config(cfg)
        snap_dir = os.path.join(out, "snapshots")

        def on_step(state):
            if cfg.snapshot_stride and state.step_index % cfg.snapshot_stride == 0:
                write_snapshot(snap_dir, state.f, state.t, state.step_index)

        def on_sample(state, s):
            if not quiet:
                log.info("t=%.5f eps_min=%.5f lambda_max=%.5f max_H2=%.4g diam=%.4g",
                         s.t, s.eps_min, s.lambda_max, s.max_H2, s.image_diameter)

        if cfg.snapshot_stride:
            write_snapshot(snap_dir, f0, 0.0, 0)
        result = run(f0, controls, callback=on_sample, step_callback=on_step)
    except GraphFlowError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        _dump_diagnostics(out, exc)
        return EXIT_ERROR
    except (ValueError, FloatingPointError, OSError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        _dump_diagnostics(out, exc)
        return EXIT_ERROR

    report = result.report
    write_timeseries(os.path.join(out, "timeseries.csv"), report.samples)
    write_verdicts(os.path.join(out, "verdicts.csv"), report.verdicts)
    emit_plotdata(report, os.path.join(out, "plot"))
    state = result.state
    summary = {
        "status": result.status,
        "t_end": state.t,
        "steps": state.step_index,
        "resolution": cfg.resolution,
        "h": grid.h,
        "kappa": report.kappa_used,
        "P_enabled": report.p_enabled,
        "exploratory": cfg.exploratory,
        "hypotheses": hyp,
        "logdet_mismatch": report.logdet_mismatch,
        "max_gauge_residual": result.max_gauge_residual if cfg.gauge_check else None,
        "null_checks": len(report.null_checks),
        "verdicts": {k: {"passed": v.passed, "enabled": v.enabled,
                         "first_violation": v.first_violation, "detail": v.detail}
                     for k, v in report.verdicts.items()},
        "all_passed": report.all_passed,
    }
    write_json(os.path.join(out, "summary.json"), summary)
    if result.status == "singularity":
        write_json(os.path.join(out, "diagnostics.json"), result.diagnostics)
        log.error("singularity suspected: %s", result.diagnostics.get("message"))
        return EXIT_VERDICT
    if not quiet:
        for v in report.verdicts.values():
            status = "disabled" if not v.enabled else ("pass" if v.passed else "FAIL")
            log.info("%-20s %-8s %s", v.name, status, v.detail)
    return EXIT_OK if report.all_passed else EXIT_VERDICT


# ---------------------------------------------------------------------------
# reduced oracle


def oracle_profile(cfg):
    """The 1D profile matching the config's initial map, or ValueError."""
    import numpy as np

    from .maps import expression_profile
    from .oracle import Profile, fold_profile, stereo_profile

    M, N = cfg.domain(), cfg.target()
    n = cfg.oracle_nodes
    fam = cfg.map_family
    if fam == "dilation":
        return fold_profile(M, N, cfg.map_parameter, n)
    if fam == "stereo_scale":
        return stereo_profile(M, N, cfg.map_parameter, n)
    if fam == "identity":
        return Profile.from_function(M, N, lambda s: s * N.radius / M.radius, n)
    if fam == "constant" and not any(cfg.map_point):
        return Profile.from_function(M, N, np.zeros_like, n)
    if fam == "custom":
        fn = expression_profile(cfg.map_expression)
        return Profile.from_function(M, N, lambda s: fn(s / M.radius), n)
    raise ValueError(f"map family {fam!r} has no rotationally symmetric reduction")


def run_oracle(cfg) -> int:
    from .errors import GraphFlowError
    from .oracle import ReducedControls, run_reduced
    from .output import emit_plotdata, write_json, write_timeseries
    from .monitors import MonitorReport

    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    try:
        p = oracle_profile(cfg)
        res = run_reduced(p, ReducedControls(cfl_safety=cfg.cfl_safety, t_max=cfg.t_max,
                                             diam_tol=cfg.diam_tol, sample_dt=cfg.oracle_sample_dt))
    except (GraphFlowError, ValueError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        _dump_diagnostics(out, exc)
        return EXIT_ERROR
    write_timeseries(os.path.join(out, "oracle_timeseries.csv"), res.samples, source="reduced")
    emit_plotdata(MonitorReport(samples=res.samples), os.path.join(out, "plot"), prefix="oracle_")
    last = res.samples[-1]
    write_json(os.path.join(out, "oracle_summary.json"),
               {"status": res.status, "steps": res.steps, "t_end": last.t, "nodes": p.n_nodes,
                "final_diameter": last.image_diameter})
    log.info("reduced run %s at t=%.5f (diameter %.3g)", res.status, last.t, last.image_diameter)
    return EXIT_OK if res.status != "singularity" else EXIT_VERDICT


# ---------------------------------------------------------------------------


def _parser():
    p = argparse.ArgumentParser(prog="graphflow",
                                description="Mean curvature flow of graphs of length-decreasing maps.")
    p.add_argument("--version", action="version", version=f"graphflow {__version__}")
    p.add_argument("--emit-default-config", action="store_true",
                   help="print a config file with every key at its default and exit")
    p.add_argument("-q", "--quiet", action="store_true")
    sub = p.add_subparsers(dest="command")
    for name, text in (("run", "integrate the flow and evaluate the verdicts"),
                       ("check-hypotheses", "check the curvature assumptions"),
                       ("oracle", "run the 1D reduced flow")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("config")
        sp.add_argument("-o", "--output-dir", help="override output_dir")
    return p


def main(argv=None) -> int:
    apply_workers()
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    from .config import default_config_text, load_config
    from .errors import ConfigurationError

    if args.emit_default_config:
        sys.stdout.write(default_config_text())
        return EXIT_OK
    if args.command is None:
        _parser().print_usage(sys.stderr)
        return EXIT_ERROR
    try:
        cfg = load_config(args.config)
    except ConfigurationError as exc:
        for key, msg in exc.violations:
            print(f"config error: {key}: {msg}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.output_dir:
        cfg.output_dir = args.output_dir
    if args.command == "check-hypotheses":
        hyp = hypothesis_report(cfg)
        print(f"holds={str(hyp['holds']).lower()} margin={hyp['margin']:.6g} "
              f"sigma={hyp['sigma']:g} mu={hyp['mu']:g}")
        return EXIT_OK if hyp["holds"] else EXIT_VERDICT
    if args.command == "oracle":
        return run_oracle(cfg)
    return orchestrate(cfg, quiet=args.quiet)


if __name__ == "__main__":
    sys.exit(main())
