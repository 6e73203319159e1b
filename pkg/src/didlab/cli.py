"""Command-line entry point: ``didlab run | oracle | demo-figure1 | generate``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from didlab.dgp import OutcomeProcess, Scenario, ScenarioSpec, generate
from didlab.harness import AnalysisMethod, ConfigError, ExperimentConfig, figure1_demo, run_experiment
from didlab.oracle import expected_means_scenario6, true_att

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _cells(scenario: str, process: str | None) -> list:
    scen = Scenario(scenario.lower())
    if not scen.time_varying:
        return [(scen, None)]
    if process is None:
        return [(scen, OutcomeProcess.CONSTANT), (scen, OutcomeProcess.TIME_VARYING)]
    return [(scen, OutcomeProcess(process))]


def _cmd_run(args) -> int:
    if args.config:
        config = ExperimentConfig.from_json(args.config)
        overrides = {
            "out_csv": args.out,
            "out_json": args.json,
            "parallelism": args.workers,
        }
        for key, value in overrides.items():
            if value is not None:
                setattr(config, key, value)
    else:
        if not args.scenario:
            raise ConfigError("run needs --config or --scenario")
        methods = list(AnalysisMethod) if not args.method or args.method == ["all"] else args.method
        kwargs = dict(
            scenarios=_cells(args.scenario, args.process),
            methods=methods,
            reps=args.reps,
            master_seed=args.seed,
            parallelism=args.workers or 1,
            out_csv=args.out,
            out_json=args.json,
        )
        if args.n_units is not None:
            kwargs["n_units"] = args.n_units
        if args.distance is not None:
            kwargs["matching_distance"] = args.distance
        if args.no_replacement:
            kwargs["matching_replacement"] = False
        config = ExperimentConfig(**kwargs)
    table = run_experiment(config)
    if not config.out_csv:
        sys.stdout.write(table.to_csv())
    if table.all_failed:
        print("every cell failed", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_oracle(args) -> int:
    for scen, proc in _cells(args.scenario, args.process):
        label = scen.value + ("" if proc is None else proc.value)
        if scen is Scenario.S6:
            table = expected_means_scenario6(proc)
            print(f"# {label}: counterfactual group-time means")
            sys.stdout.write(table.to_csv())
            if args.out:
                out = Path(args.out)
                if args.process is None:
                    out = out.with_name(f"{out.stem}_{label}{out.suffix}")
                table.to_csv(out)
        print(f"# {label}: true ATT = {true_att(scen, proc)!r}")
    return EXIT_OK


def _cmd_demo(args) -> int:
    demo = figure1_demo(noise_sd=args.noise_sd, seed=args.seed, n_units=args.n_units, covariate_sd=args.covariate_sd)
    demo.to_csv(args.out)
    print("series,group,period,mean")
    for (name, a, t), v in sorted(demo.group_means().items()):
        print(f"{name},{a},{t},{v:.6f}")
    return EXIT_OK


def _cmd_generate(args) -> int:
    spec = ScenarioSpec.protocol_default(
        args.scenario.lower(),
        args.process if Scenario(args.scenario.lower()).time_varying else None,
        master_seed=args.seed,
        replicate_index=args.rep,
        **({"n_units": args.n_units} if args.n_units else {}),
    )
    data = generate(spec)
    data.to_csv(args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="didlab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo experiment")
    run.add_argument("--config", help="experiment config JSON")
    run.add_argument("--scenario")
    run.add_argument("--process", choices=["a", "b"])
    run.add_argument("--method", action="append", choices=[m.value for m in AnalysisMethod] + ["all"])
    run.add_argument("--reps", type=int, default=400)
    run.add_argument("--seed", type=int, default=20200)
    run.add_argument("--n-units", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--distance", choices=["euclidean", "propensity"])
    run.add_argument("--no-replacement", action="store_true", help="greedy matching without replacement")
    run.add_argument("--out", help="result CSV path (default: stdout)")
    run.add_argument("--json", help="result JSON path")
    run.set_defaults(func=_cmd_run)

    orc = sub.add_parser("oracle", help="print closed-form means and true ATTs")
    orc.add_argument("--scenario", default="s6")
    orc.add_argument("--process", choices=["a", "b"])
    orc.add_argument("--out")
    orc.set_defaults(func=_cmd_oracle)

    demo = sub.add_parser("demo-figure1", help="toy-example residuals as CSV")
    demo.add_argument("--out", required=True)
    demo.add_argument("--noise-sd", type=float, default=1.0)
    demo.add_argument("--covariate-sd", type=float, default=0.2)
    demo.add_argument("--n-units", type=int, default=800)
    demo.add_argument("--seed", type=int, default=0)
    demo.set_defaults(func=_cmd_demo)

    gen = sub.add_parser("generate", help="write one simulated panel as CSV")
    gen.add_argument("--scenario", required=True)
    gen.add_argument("--process", choices=["a", "b"], default="a")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--rep", type=int, default=0)
    gen.add_argument("--n-units", type=int)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=_cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
