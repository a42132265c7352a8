"""Command-line interface.

Subcommands:

* ``run``          — march the configured model, writing delimited output,
                     figures, and a manifest into ``--out``.
* ``check``        — evaluate the structural hypotheses and print the report.
* ``verify``       — sample the reduction estimates on a battery of systems.
* ``convergence``  — step-refinement and modal-decay study (decoupled configs).
* ``constants``    — print every derived constant for a configuration.

Exit codes: 0 success; 1 a hypothesis or verification check failed;
2 bad usage or configuration; 3 the run gate stopped on failed
hypotheses (use ``--force`` to march anyway); 4 a solver diverged.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, plots, reports
from .chx.config import (
    ConfigError,
    ModelConfig,
    Tolerances,
    default_config,
    dispersion_config,
    parse_config,
)
from .chx.hypotheses import HypothesisReport, check_hypotheses, evolution_constants
from .chx.model import build_model
from .chx.study import convergence_study, thread_count
from .evolution import DivergenceError, StepError, run as run_evolution
from .families import linear_block_instance, linear_tanh_instance, scalar_instance
from .monotone import PairSampler
from .reduction import (
    CoupledSystem,
    EliminationError,
    check_semimonotone,
    verify_reduction_estimates,
)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_GATED = 3
EXIT_SOLVER = 4

_SOLVER_ERRORS = (StepError, DivergenceError, EliminationError)


def _load_config(args, fallback: ModelConfig) -> tuple[ModelConfig, Tolerances]:
    if args.config is None:
        config, tolerances = fallback, Tolerances()
    else:
        config, tolerances = parse_config(args.config)
    updates = {}
    if getattr(args, "inner_tol", None) is not None:
        updates["inner_tol"] = args.inner_tol
    if getattr(args, "step_tol", None) is not None:
        updates["step_tol"] = args.step_tol
    if updates:
        tolerances = dataclasses.replace(tolerances, **updates)
    return config, tolerances


def _print_hypothesis_report(report: HypothesisReport, out=None) -> None:
    out = out or sys.stdout
    fmt = reports.format_float
    print(f"embedding constant    {fmt(report.poincare)}", file=out)
    print(f"alpha_x               {fmt(report.alpha_x)}", file=out)
    print(f"beta_x                {fmt(report.beta_x)}", file=out)
    print(f"alpha_y               {fmt(report.alpha_y)}", file=out)
    print(f"beta_y                {fmt(report.beta_y)}", file=out)
    print(f"coupling_strength     {fmt(report.coupling_strength)}", file=out)
    print(f"young_weight          {fmt(report.young_weight)}", file=out)
    print(f"ellipticity_margin    {fmt(report.ellipticity_margin)}", file=out)
    print(f"coupling_margin       {fmt(report.coupling_margin)}", file=out)
    print(f"coercivity            {fmt(report.coercivity)}", file=out)
    print(f"degenerate_flag       {fmt(report.degenerate_flag)}", file=out)
    print(f"growth_exponent       {fmt(report.growth_exponent)}", file=out)
    for name, ok in report.conditions.items():
        print(f"{name:<21} {'pass' if ok else 'FAIL'}", file=out)
    print(f"overall               {'pass' if report.passed else 'FAIL'}", file=out)


def _hypothesis_payload(report: HypothesisReport) -> dict:
    return {
        "poincare": report.poincare,
        "alpha_x": report.alpha_x,
        "beta_x": report.beta_x,
        "alpha_y": report.alpha_y,
        "beta_y": report.beta_y,
        "coupling_strength": report.coupling_strength,
        "young_weight": report.young_weight,
        "ellipticity_margin": report.ellipticity_margin,
        "coupling_margin": report.coupling_margin,
        "coercivity": report.coercivity,
        "degenerate_flag": report.degenerate_flag,
        "growth_exponent": report.growth_exponent,
        "conditions": report.conditions,
        "passed": report.passed,
    }


def cmd_run(args) -> int:
    config, tolerances = _load_config(args, default_config())
    report = check_hypotheses(config)
    if not report.passed and not args.force:
        _print_hypothesis_report(report)
        print(
            "structural hypotheses failed; rerun with --force to march anyway",
            file=sys.stderr,
        )
        return EXIT_GATED

    try:
        model = build_model(config)
        problem = model.evolution_problem(inner_tol=tolerances.inner_tol)
        trajectory = run_evolution(problem, tol=tolerances.step_tol)
        strains, _ = model.solve_strain_batch(
            trajectory.states, tol=tolerances.inner_tol
        )
    except _SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    nodal = model.nodal_values(trajectory.states)
    mass = model.mass_mean(trajectory.states)
    potential = model.potential_value(trajectory.states)
    step_residuals = np.concatenate([[0.0], trajectory.residuals])
    iterations = np.concatenate([[0], trajectory.iterations])

    reports.write_states_csv(
        out / "states.csv", trajectory.times, model.bundle.nodes, nodal
    )
    reports.write_strain_csv(
        out / "strain.csv", trajectory.times, model.bundle.midpoints, strains
    )
    reports.write_diagnostics_csv(
        out / "diagnostics.csv",
        trajectory.times,
        mass,
        potential,
        step_residuals,
        iterations,
    )
    plots.save_field_figure(
        out / "field.png",
        trajectory.times,
        model.bundle.nodes,
        nodal,
        model.bundle.midpoints,
        strains,
    )
    plots.save_diagnostics_figure(
        out / "diagnostics.png", trajectory.times, mass, potential, step_residuals
    )
    manifest = {
        "command": "run",
        "version": __version__,
        "config": dataclasses.asdict(config),
        "tolerances": dataclasses.asdict(tolerances),
        "forced": bool(args.force),
        "hypotheses": _hypothesis_payload(report),
        "evolution": {
            "method": trajectory.method,
            "mono_alpha": model.evo.mono_alpha,
            "mono_lipschitz": model.evo.mono_lipschitz,
            "max_step_residual": float(trajectory.residuals.max()),
            "total_step_iterations": int(trajectory.iterations.sum()),
        },
        "outputs": [
            "states.csv",
            "strain.csv",
            "diagnostics.csv",
            "field.png",
            "diagnostics.png",
        ],
    }
    reports.write_manifest(out / "manifest.json", manifest)
    print(f"wrote {out / 'manifest.json'} and {len(manifest['outputs'])} outputs")
    return EXIT_OK


def cmd_check(args) -> int:
    config, _ = _load_config(args, default_config())
    report = check_hypotheses(config)
    _print_hypothesis_report(report)
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_constants(args) -> int:
    config, tolerances = _load_config(args, default_config())
    report = check_hypotheses(config)
    fmt = reports.format_float
    print(f"poincare = {fmt(report.poincare)}")
    for field in dataclasses.fields(report.family):
        print(f"{field.name} = {fmt(getattr(report.family, field.name))}")
    for name in (
        "alpha_x",
        "beta_x",
        "alpha_y",
        "beta_y",
        "coupling_strength",
        "young_weight",
        "ellipticity_margin",
        "coupling_margin",
        "coercivity",
        "degenerate_flag",
        "growth_exponent",
    ):
        print(f"{name} = {fmt(getattr(report, name))}")
    evo = evolution_constants(config, report.family, report.poincare)
    print(f"mono_alpha = {fmt(evo.mono_alpha)}")
    print(f"mono_lipschitz = {fmt(evo.mono_lipschitz)}")
    print(f"second_slot_lip = {fmt(evo.second_slot_lip)}")
    print(f"inner_tol = {fmt(tolerances.inner_tol)}")
    print(f"step_tol = {fmt(tolerances.step_tol)}")
    return EXIT_OK


def _overstated(system: CoupledSystem, factor: float) -> CoupledSystem:
    constants = dataclasses.replace(
        system.constants, alpha_x=factor * system.constants.alpha_x
    )
    return dataclasses.replace(system, constants=constants)


def _verify_battery(seed: int) -> list[tuple[str, CoupledSystem]]:
    entries: list[tuple[str, CoupledSystem]] = [
        ("scalar closed form", scalar_instance())
    ]
    for offset, (dim_x, dim_y) in enumerate(((4, 4), (6, 3), (8, 5))):
        entries.append(
            (
                f"linear block {dim_x}x{dim_y}",
                linear_block_instance(dim_x=dim_x, dim_y=dim_y, seed=seed + offset).system,
            )
        )
    entries.append(
        ("tanh perturbation dim 4", linear_tanh_instance(dim=4, seed=seed + 7).system)
    )
    entries.append(
        (
            "coupled field model n=16",
            build_model(dataclasses.replace(default_config(), n_cells=16)).coupled_system,
        )
    )
    return entries


def cmd_verify(args) -> int:
    if args.samples < 1:
        print("error: --samples must be a positive integer", file=sys.stderr)
        return EXIT_USAGE
    inner_tol = args.inner_tol if args.inner_tol is not None else 1e-12
    if not (inner_tol > 0.0):
        print("error: --inner-tol must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        entries = _verify_battery(args.seed)
        if args.overstate_alpha_x != 1.0:
            entries = [
                (name, _overstated(system, args.overstate_alpha_x))
                for name, system in entries
            ]
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    def check_one(item):
        index, (name, system) = item
        est_sampler = PairSampler(
            system.space_x, seed=args.seed + 100 + index, min_separation=1e-6
        )
        estimates = verify_reduction_estimates(
            system, est_sampler, n=args.samples, inner_tol=inner_tol
        )
        semi_sampler = PairSampler(
            system.space_x, seed=args.seed + 200 + index, min_separation=1e-6
        )
        semimono = check_semimonotone(
            system, semi_sampler, n=args.samples, inner_tol=inner_tol
        )
        return name, estimates, semimono

    threads = thread_count()
    try:
        items = list(enumerate(entries))
        if threads > 1:
            with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
                results = list(pool.map(check_one, items))
        else:
            results = [check_one(item) for item in items]
    except _SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    fmt = reports.format_float
    all_passed = True
    for name, estimates, semimono in results:
        ok = estimates.passed and semimono.passed
        all_passed &= ok
        print(
            f"{'pass' if ok else 'FAIL'}  {name}: n={estimates.n} "
            f"lip_excess={fmt(estimates.lip_excess)} "
            f"mono_deficit={fmt(estimates.mono_deficit)} "
            f"semimono_excess={fmt(semimono.excess)}"
        )
    print(f"verification {'passed' if all_passed else 'FAILED'}")
    return EXIT_OK if all_passed else EXIT_FAILED


def cmd_convergence(args) -> int:
    config, tolerances = _load_config(args, dispersion_config())
    try:
        report = convergence_study(
            config,
            step_tol=tolerances.step_tol,
            inner_tol=tolerances.inner_tol,
            threads=thread_count(),
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports.write_convergence_csv(out / "convergence.csv", report)
    plots.save_convergence_figure(out / "convergence.png", report)
    manifest = {
        "command": "convergence",
        "version": __version__,
        "config": dataclasses.asdict(config),
        "tolerances": dataclasses.asdict(tolerances),
        "step_counts": list(report.step_counts),
        "reference_steps": report.reference_steps,
        "dts": report.dts,
        "errors": report.errors,
        "order": report.order,
        "decay_rates": report.decay_rates,
        "target_rate": report.target_rate,
        "rate_error": report.rate_error,
        "passed": report.passed,
        "outputs": ["convergence.csv", "convergence.png"],
    }
    reports.write_manifest(out / "manifest.json", manifest)
    fmt = reports.format_float
    print(f"order = {fmt(report.order)}")
    print(f"decay_rate = {fmt(report.decay_rates[-1])}")
    print(f"target_rate = {fmt(report.target_rate)}")
    print(f"convergence {'passed' if report.passed else 'FAILED'}")
    return EXIT_OK if report.passed else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semired",
        description="Monotone reduction toolkit and coupled phase/strain model.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument(
            "--config",
            type=Path,
            default=None,
            help="INI model description (defaults to the built-in configuration)",
        )

    p_run = sub.add_parser("run", help="march the model and write outputs")
    add_config(p_run)
    p_run.add_argument("--out", type=Path, default=Path("semired-out"))
    p_run.add_argument(
        "--force",
        action="store_true",
        help="march even when the structural hypotheses fail",
    )
    p_run.add_argument("--inner-tol", type=float, default=None)
    p_run.add_argument("--step-tol", type=float, default=None)
    p_run.set_defaults(func=cmd_run)

    p_check = sub.add_parser("check", help="evaluate the structural hypotheses")
    add_config(p_check)
    p_check.set_defaults(func=cmd_check)

    p_verify = sub.add_parser(
        "verify", help="sample the reduction estimates on a battery of systems"
    )
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--samples", type=int, default=200)
    p_verify.add_argument("--inner-tol", type=float, default=None)
    p_verify.add_argument(
        "--overstate-alpha-x",
        type=float,
        default=1.0,
        metavar="FACTOR",
        help="scale the claimed outer monotonicity (diagnostic; !=1 should fail)",
    )
    p_verify.set_defaults(func=cmd_verify)

    p_conv = sub.add_parser(
        "convergence", help="step-refinement study on a decoupled configuration"
    )
    add_config(p_conv)
    p_conv.add_argument("--out", type=Path, default=Path("semired-out"))
    p_conv.add_argument("--inner-tol", type=float, default=None)
    p_conv.add_argument("--step-tol", type=float, default=None)
    p_conv.set_defaults(func=cmd_convergence)

    p_const = sub.add_parser("constants", help="print derived constants")
    add_config(p_const)
    p_const.set_defaults(func=cmd_constants)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return int(code) if isinstance(code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
