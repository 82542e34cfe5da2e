"""Batch experiment runner for iterated minimax and viscosity references.

Each subcommand reads a JSON run config, computes, and writes CSV tables,
manifest.json, a README describing the columns and a plot script into the
output directory.
"""
import argparse
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from ..contact.flow import delta_H, max_step
from ..contact.hamiltonian import HamiltonianSpec, build_hamiltonian
from ..core.config import settings
from ..core.exceptions import ConfigurationError, HJSolverError
from ..core.logging_config import bind_run_context, get_logger, log_level_for, setup_logging
from ..core.models import GridSpec, TimeInterval
from ..core.retry import safe_call
from ..generating.family import FamilySpec, gfqi_check
from ..generating.function import GenFuncQuery, phi_s_derivative_check, phi_time_derivative_check
from ..nonsmooth.grid_function import GridFunction
from ..selector import diagnostics
from ..selector.minimax import minimax_operator
from ..solvers.iterated import convergence_study, iterated_minimax
from ..solvers.reference import (
    ReferenceSolution,
    hopf_lax_discount,
    lax_friedrichs_solve,
    lf_monotone_check,
    lf_refinement_study,
    lf_time_step,
)
from ..solvers.wavefront import FRONT_COLUMNS, locate_first_fold, propagate_front, section_check
from .experiment_config import ExperimentConfig, load_config
from .export import PlotSpec, write_frame, write_json, write_manifest, write_plot_script, write_run_readme
from .initial_data import build_initial

logger = get_logger(__name__)

SUBCOMMANDS = ("solve-minimax", "solve-viscosity", "wavefront", "compare",
               "convergence-study", "self-check")


@dataclass
class RunContext:
    cfg: ExperimentConfig
    out: Path
    seed: int
    H: HamiltonianSpec
    v: GridFunction

    @property
    def grid(self) -> GridSpec:
        return self.cfg.domain.grid

    @property
    def K(self) -> tuple[float, float]:
        return self.cfg.domain.K


@dataclass
class RunArtifacts:
    """Files written by a subcommand: name -> CSV columns, plus summary and plots."""

    files: dict[str, list[str]] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    plots: list[PlotSpec] = field(default_factory=list)
    passed: bool = True

    def add(self, ctx: RunContext, name: str, frame: pd.DataFrame) -> None:
        write_frame(frame, ctx.out / name)
        self.files[name] = list(frame.columns)


def _reference(ctx: RunContext, store_every: int = 1) -> ReferenceSolution:
    ref = ctx.cfg.reference
    return lax_friedrichs_solve(ctx.H, ctx.v, ctx.cfg.time.T, dx=ref.dx or ctx.grid.dx, cfl=ref.cfl,
                                domain=(ctx.grid.lo, ctx.grid.hi), store_every=store_every)


def _hopf_lax_applies(H: HamiltonianSpec) -> bool:
    return H.profile is not None and H.z_coefficient == 1.0 and H.k == 1


def _hopf_lax(ctx: RunContext, t: float, x: np.ndarray) -> np.ndarray | None:
    """Hopf-Lax with discount for H = z + h(y); None when h is not convex on the momenta reached."""
    if not _hopf_lax_applies(ctx.H):
        return None
    profile = ctx.H.profile
    return safe_call(hopf_lax_discount, profile.scalar, profile.scalar_derivative, ctx.v, t, x,
                     error_message="hopf_lax_skipped")


def _window_mask(x: np.ndarray, K: tuple[float, float]) -> np.ndarray:
    return (x >= K[0] - 1e-12) & (x <= K[1] + 1e-12)


def _short_step(ctx: RunContext) -> float:
    """The configured self-check step, capped by T and half the generating-function limit."""
    limit = max_step(ctx.H)
    step = min(ctx.cfg.time.T, ctx.cfg.self_check.step)
    return step if not math.isfinite(limit) else min(step, 0.5 * limit)


# subcommands

def run_solve_minimax(ctx: RunContext) -> RunArtifacts:
    art = RunArtifacts()
    trace = iterated_minimax(ctx.H, ctx.v, ctx.cfg.time.finest, ctx.cfg.selector, ctx.grid,
                             sample_times=ctx.cfg.time.sample_times)
    art.add(ctx, "minimax_trace.csv", trace.to_frame())
    art.add(ctx, "minimax_certificates.csv", pd.DataFrame({"t": trace.times, "lip": trace.certificates}))
    trace.final.to_csv(ctx.out / "minimax_final.csv")
    art.files["minimax_final.csv"] = ["x", "value"]
    art.plots += [("minimax_trace.csv", "x", "u", "t"), ("minimax_certificates.csv", "t", "lip", None)]
    art.summary = {
        "steps": trace.partition.n_steps,
        "norm": trace.partition.norm,
        "final_lip": trace.certificates[-1],
        "final_sup_K": trace.final.sup_norm(ctx.K),
    }
    return art


def run_solve_viscosity(ctx: RunContext) -> RunArtifacts:
    art = RunArtifacts()
    ref_cfg = ctx.cfg.reference
    dx = ref_cfg.dx or ctx.grid.dx
    _, steps = lf_time_step(ctx.H, dx, ctx.cfg.time.T, ref_cfg.cfl)
    solution = _reference(ctx, store_every=max(1, steps // ref_cfg.time_levels))
    art.add(ctx, "viscosity.csv", solution.to_frame())
    art.plots.append(("viscosity.csv", "x", "u", "t"))

    study = lf_refinement_study(ctx.H, ctx.v, ctx.cfg.time.T, 4 * dx, levels=3, cfl=ref_cfg.cfl,
                                domain=(ctx.grid.lo, ctx.grid.hi))
    art.add(ctx, "refinement.csv", study)

    x = solution.grid.nodes()
    hopf = _hopf_lax(ctx, ctx.cfg.time.T, x)
    if hopf is not None:
        art.add(ctx, "hopf_lax.csv", pd.DataFrame({"x": x, "hopf_lax": hopf, "reference": solution.final.values}))
        art.plots.append(("hopf_lax.csv", "x", "hopf_lax", None))
        mask = _window_mask(x, ctx.K)
        art.summary["reference_vs_hopf_lax"] = float(np.abs(hopf - solution.final.values)[mask].max())
    art.summary.update({
        "dt": solution.dt,
        "dx": solution.grid.dx,
        "monotone": lf_monotone_check(ctx.H, solution.grid.dx, solution.dt),
        "refinement_constant": float(study["constant"].max()) if len(study) else None,
    })
    return art


def run_wavefront(ctx: RunContext) -> RunArtifacts:
    art = RunArtifacts()
    wf = ctx.cfg.wavefront
    T = ctx.cfg.time.T
    t_samples = wf.t_samples or [T * i / 4 for i in range(1, 5)]
    x0 = np.linspace(ctx.grid.lo - wf.seed_pad, ctx.grid.hi + wf.seed_pad, wf.seeds)
    front = propagate_front(ctx.H, ctx.v, t_samples, x0)
    front.to_csv(ctx.out / "front.csv")
    art.files["front.csv"] = list(FRONT_COLUMNS)
    art.plots.append(("front.csv", "x", "z", "t"))

    fold = locate_first_fold(ctx.H, ctx.v, x0, T, tol=wf.fold_tol)
    rows = []
    for sample in front.samples:
        if sample.t <= 0 or sample.t >= max_step(ctx.H):
            continue
        u = minimax_operator(ctx.H, TimeInterval(s=0.0, t=sample.t), ctx.v, ctx.grid, ctx.cfg.selector)
        report = section_check(sample, u)
        rows.append({"t": sample.t, "fraction": report.fraction, "eligible": report.eligible,
                     "on_front": report.on_front, "passed": int(report.passed)})
    sections = pd.DataFrame(rows, columns=["t", "fraction", "eligible", "on_front", "passed"])
    art.add(ctx, "sections.csv", sections)
    art.passed = bool(sections["passed"].all()) if len(sections) else True
    art.summary = {
        "first_fold": list(fold) if fold else None,
        "sections_passed": art.passed,
    }
    return art


def run_compare(ctx: RunContext) -> RunArtifacts:
    art = RunArtifacts()
    trace = iterated_minimax(ctx.H, ctx.v, ctx.cfg.time.finest, ctx.cfg.selector, ctx.grid,
                             sample_times=ctx.cfg.time.sample_times)
    reference = _reference(ctx)
    x = ctx.grid.nodes()
    mask = _window_mask(x, ctx.K)

    long_rows, table = [], []
    for t in trace.all_times():
        u = trace.at(t)(x)
        r = reference.at(t)(x)
        row = {"t": t, "minimax_vs_reference": float(np.abs(u - r)[mask].max())}
        hopf = _hopf_lax(ctx, t, x)
        frame = pd.DataFrame({"t": t, "x": x, "minimax": u, "reference": r, "abs_error": np.abs(u - r)})
        if hopf is not None:
            frame.insert(4, "hopf_lax", hopf)
            row["minimax_vs_hopf_lax"] = float(np.abs(u - hopf)[mask].max())
            row["reference_vs_hopf_lax"] = float(np.abs(r - hopf)[mask].max())
        long_rows.append(frame)
        table.append(row)

    art.add(ctx, "compare.csv", pd.concat(long_rows, ignore_index=True))
    errors = pd.DataFrame(table)
    art.add(ctx, "error_table.csv", errors)
    art.plots += [("compare.csv", "x", "abs_error", "t"), ("error_table.csv", "t", "minimax_vs_reference", None)]

    threshold = ctx.cfg.reference.threshold
    worst = float(errors["minimax_vs_reference"].max())
    art.passed = worst <= threshold
    verdict = {"threshold": threshold, "max_error": worst, "passed": art.passed,
               "steps": trace.partition.n_steps}
    write_json(verdict, ctx.out / "verdict.json")
    art.summary = verdict
    return art


def run_convergence_study(ctx: RunContext) -> RunArtifacts:
    art = RunArtifacts()
    partitions = ctx.cfg.time.partitions()
    reference = _reference(ctx)
    table = convergence_study(ctx.H, ctx.v, partitions, reference, ctx.K, ctx.cfg.selector, ctx.grid,
                              threshold=ctx.cfg.reference.threshold)
    table.to_csv(ctx.out / "convergence.csv")
    art.files["convergence.csv"] = list(table.frame.columns)
    art.plots.append(("convergence.csv", "norm", "sup_error", None))

    verdict = dict(table.verdict)
    write_json(verdict, ctx.out / "verdict.json")
    art.passed = bool(verdict["passed"])
    art.summary = verdict
    return art


def _check_row(check: str, case: int, observed: float, allowed: float, passed: bool) -> dict:
    return {"check": check, "case": case, "observed": float(observed), "allowed": float(allowed),
            "passed": int(bool(passed))}


def run_self_check(ctx: RunContext) -> RunArtifacts:
    """Diagnostics of the generating function, the family and the selector on the configured problem."""
    art = RunArtifacts()
    sc = ctx.cfg.self_check
    H, v, K, sel = ctx.H, ctx.v, ctx.K, ctx.cfg.selector
    rng = np.random.default_rng(ctx.seed)
    step = _short_step(ctx)
    iv = TimeInterval(s=0.0, t=step)
    check_grid = GridSpec(lo=K[0], hi=K[1], n=max(sc.points, 3))
    xs = check_grid.nodes()
    rows = []

    for i in range(sc.queries):
        s = float(rng.uniform(0.0, 0.5 * step))
        q = GenFuncQuery(x=rng.uniform(*K, size=H.k), Y=rng.uniform(-1.0, 1.0, size=H.k),
                         z=float(rng.uniform(-1.0, 1.0)), iv=TimeInterval(s=s, t=s + 0.5 * step))
        ft = phi_time_derivative_check(H, q)
        fs = phi_s_derivative_check(H, q)
        rows.append(_check_row("phi_time_derivative", i, ft.discrepancy, 1e-4, ft.discrepancy <= 1e-4))
        rows.append(_check_row("phi_s_derivative", i, fs.discrepancy, 1e-4, fs.discrepancy <= 1e-4))

    gfqi = gfqi_check(FamilySpec.single_step(H, iv, v), K, seed=ctx.seed)
    rows.append(_check_row("gfqi", 0, gfqi.growth, 1.5, gfqi.passed))

    for i in range(sc.pairs):
        center, width = rng.uniform(*K), rng.uniform(0.2, 1.0)
        bump = rng.uniform(0.05, 0.5) * np.exp(-0.5 * ((v.nodes() - center) / width) ** 2)
        w = v.with_values(v.values + bump)
        report = diagnostics.monotonicity_check(H, iv, v, w, sel, check_grid)
        rows.append(_check_row("monotonicity", i, report.worst_excess, 0.0, report.passed))

    lip = diagnostics.lipschitz_check(H, iv, v, sel, check_grid)
    rows.append(_check_row("lipschitz", 0, lip.observed, lip.bound, lip.passed))
    tl = diagnostics.time_lipschitz_check(H, 0.0, step, 0.5 * step, v, sel, check_grid)
    rows.append(_check_row("time_lipschitz", 0, tl.difference, tl.allowed, tl.passed))
    v1 = v.with_values(v.values + 0.05 * np.sin(v.nodes()))
    st = diagnostics.stability_check(H, iv, v, v1, K, sel, n=check_grid.n)
    rows.append(_check_row("stability", 0, st.difference, st.allowed, st.passed))
    wc = diagnostics.window_consistency_check(H, iv, v, xs, sel)
    rows.append(_check_row("window_consistency", 0, wc.difference, wc.allowed, wc.passed))

    for i, x in enumerate(xs):
        pi = diagnostics.partition_independence_check(H, iv, v, float(x), [1, 2, 3], sel)
        rows.append(_check_row("partition_independence", i, pi.spread, pi.tol, pi.passed))
        gi = diagnostics.gradient_inclusion_check(H, iv, v, float(x), sel)
        outside = math.inf if gi.hull is None else max(0.0, gi.hull[0] - gi.derivative, gi.derivative - gi.hull[1])
        rows.append(_check_row("gradient_inclusion", i, outside, gi.tol, gi.passed))

    frame = pd.DataFrame(rows, columns=["check", "case", "observed", "allowed", "passed"])
    art.add(ctx, "self_check.csv", frame)
    by_check = frame.groupby("check", sort=True)["passed"].agg(["sum", "count"])
    art.summary = {name: {"passed": int(r["sum"]), "cases": int(r["count"])} for name, r in by_check.iterrows()}
    art.summary["step"] = step
    art.summary["delta_H"] = None if not math.isfinite(delta_H(H)) else delta_H(H)
    art.passed = bool(frame["passed"].all())
    return art


RUNNERS = {
    "solve-minimax": run_solve_minimax,
    "solve-viscosity": run_solve_viscosity,
    "wavefront": run_wavefront,
    "compare": run_compare,
    "convergence-study": run_convergence_study,
    "self-check": run_self_check,
}


def execute(subcommand: str, cfg: ExperimentConfig, output_dir: Path, seed: int = 0) -> RunArtifacts:
    """Build the problem, run one subcommand and write manifest, README and plot script."""
    H = build_hamiltonian(cfg.hamiltonian.key, **cfg.hamiltonian.params)
    v = build_initial(cfg.initial.key, cfg.domain.grid, **cfg.initial.params)
    output_dir.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(cfg=cfg, out=output_dir, seed=seed, H=H, v=v)

    logger.info("run_started", subcommand=subcommand, hamiltonian=H.name, output=str(output_dir))
    art = RUNNERS[subcommand](ctx)

    config = cfg.model_dump(mode="json")
    config["selector"].pop("threads", None)
    config["output_dir"] = None
    write_manifest(output_dir, subcommand, config, art.files, art.summary)
    write_run_readme(output_dir, subcommand, cfg.name, art.files)
    write_plot_script(output_dir, cfg.plot, art.plots, art.files)
    logger.info("run_finished", subcommand=subcommand, passed=art.passed, files=len(art.files))
    return art


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hjminimax",
        description="Iterated minimax and viscosity solutions of contact Hamilton-Jacobi equations",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Subcommands:
  solve-minimax      iterated minimax on the finest configured partition
  solve-viscosity    Lax-Friedrichs reference (and Hopf-Lax for H = z + h(y), h convex)
  wavefront          characteristic fan, first fold time and section checks
  compare            iterated minimax against the references on the window K
  convergence-study  error table over all configured partition norms
  self-check         generating-function, family and selector property checks

Exit codes: 0 success, 2 invalid input, 3 numerical failure.

Typical usage:
  python -m hjminimax.jobs.run_experiment compare --config configs/discount_convex.json
  python -m hjminimax.jobs.run_experiment convergence-study --config configs/discount_nonconvex.json --threads 4
  python -m hjminimax.jobs.run_experiment self-check --config configs/transport.json --seed 7 -v
        """
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS, help="What to compute")
    parser.add_argument("--config", required=True, type=Path, help="JSON run config")
    parser.add_argument("--output", type=Path, default=None,
                        help="Output directory (default: output_dir from the config)")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads for node sweeps")
    parser.add_argument("--seed", type=int, default=0, help="Seed for randomized checks (default: 0)")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    return parser


def main(argv: list[str] | None = None) -> int:
    """Entry point of the experiment runner."""
    try:
        from dotenv import load_dotenv
        load_dotenv()
    except ImportError:
        pass

    args = build_parser().parse_args(argv)
    setup_logging(
        log_level=log_level_for(args.verbose) if args.verbose else settings.HJ_LOG_LEVEL,
        json_logs=settings.HJ_LOG_JSON,
        log_file=Path(settings.HJ_LOG_FILE) if settings.HJ_LOG_FILE else None
    )
    bind_run_context(subcommand=args.subcommand, config=str(args.config), seed=args.seed)

    try:
        cfg = load_config(args.config)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigurationError("threads", "must be at least 1")
            cfg = cfg.model_copy(update={"selector": cfg.selector.model_copy(update={"threads": args.threads})})
        output_dir = args.output or Path(cfg.output_dir)

        print("=" * 60)
        print(f"hjminimax {args.subcommand}: {cfg.name}")
        print("=" * 60)

        art = execute(args.subcommand, cfg, output_dir, args.seed)

        print("\nSummary")
        print("-" * 30)
        for key, value in art.summary.items():
            print(f"{key}: {value}")
        print(f"\nOutputs written to {output_dir}")
        print("PASSED" if art.passed else "CHECKS FAILED (see manifest.json)")
        return 0

    except HJSolverError as e:
        code = e.exit_code if e.exit_code in (2, 3) else 2
        logger.error("run_failed", error=type(e).__name__, message=e.message, **e.details)
        print(f"ERROR: {e.message}", file=sys.stderr)
        for key, value in e.details.items():
            print(f"  {key}: {value}", file=sys.stderr)
        return code

    except KeyboardInterrupt:
        print("\nRun interrupted by user", file=sys.stderr)
        return 1


if __name__ == "__main__":
    exit(main())
