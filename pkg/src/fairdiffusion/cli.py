"""Command-line front end.

Exit codes: 0 ok, 1 property violation, 2 validation error, 3 no
participants, 4 instance too large for exhaustive checking.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from .experiment import ConfigError, ExperimentConfig, run_experiment, to_csv
from .graph import ActionProfile, NotAParticipant, ProfileError, Report, build_effective_graph
from .instances import (
    FIXTURE_COMMENT,
    GeneratorSpec,
    InstanceError,
    ValuationSpec,
    fixture_network,
    format_rational,
    generate_network,
    load_instance,
    network_to_dict,
    parse_rational,
    save_instance,
)
from .mechanisms import NoParticipants, Outcome, run_mechanism
from .verifier import (
    STUBS,
    PropertyReport,
    SizeGuardError,
    check_ic,
    check_ir,
    check_revenue_chain,
    instance_seeds,
    structures_match,
)

EXIT_OK, EXIT_VIOLATION, EXIT_INVALID, EXIT_EMPTY, EXIT_TOO_LARGE = range(5)
SUITES = ("ir", "ic", "revenue", "oracle")

log = logging.getLogger("fairdiffusion")


def _node(text: str, known) -> object:
    """Map a command-line id back to the network's id type."""
    if text in known:
        return text
    try:
        as_int = int(text)
    except ValueError:
        return text
    return as_int if as_int in known else text


def _apply_overrides(network, reports: Sequence[str], absent: Sequence[str]) -> ActionProfile:
    profile = ActionProfile.truthful(network)
    known = set(network.valuation)
    for spec in reports:
        who, _, rest = spec.partition("=")
        buyer = _node(who, known)
        if buyer not in known:
            raise ProfileError(f"--report: unknown buyer {who!r}")
        value, sep, nbrs = rest.partition(":")
        valuation = parse_rational(value, f"--report {who}")
        neighbors = (
            frozenset(_node(n, network.neighbors) for n in nbrs.split(",") if n)
            if sep
            else network.neighbors_of(buyer)
        )
        profile = profile.replace(buyer, Report(valuation, neighbors))
    for who in absent:
        profile = profile.replace(_node(who, known), None)
    return profile


def _outcome_table(outcome: Outcome, profile: ActionProfile) -> str:
    lines = [
        f"mechanism: {outcome.mechanism}",
        f"winner: {outcome.winner}",
        f"seller revenue: {format_rational(outcome.seller_revenue)}",
        f"social welfare: {format_rational(outcome.social_welfare)}",
        "buyer  bid    won  (paid, received, redistributed)  payment  utility",
    ]
    for buyer in sorted(outcome.payment, key=lambda n: (type(n).__name__, n)):
        report = profile.reports.get(buyer)
        bid = "-" if report is None else format_rational(report.valuation)
        vec = ", ".join(format_rational(x) for x in outcome.breakdown(buyer))
        lines.append(
            f"{str(buyer):<6} {bid:<6} {outcome.allocation[buyer]:<4} ({vec})".ljust(50)
            + f" {format_rational(outcome.payment[buyer]):<8} {format_rational(outcome.utility[buyer])}"
        )
    return "\n".join(lines)


def outcome_to_dict(outcome: Outcome) -> dict:
    def rat(mapping):
        return {str(k): format_rational(v) for k, v in mapping.items()}

    return {
        "mechanism": outcome.mechanism,
        "winner": outcome.winner,
        "highest_bidder": outcome.highest_bidder,
        "strong_sequence": list(outcome.strong_sequence),
        "allocation": {str(k): v for k, v in outcome.allocation.items()},
        "payment": rat(outcome.payment),
        "paid": rat(outcome.paid),
        "received": rat(outcome.received),
        "reward": rat(outcome.reward),
        "utility": rat(outcome.utility),
        "seller_revenue": format_rational(outcome.seller_revenue),
        "social_welfare": format_rational(outcome.social_welfare),
    }


def cmd_run(args) -> int:
    network = load_instance(args.file)
    profile = _apply_overrides(network, args.report, args.absent)
    outcome = run_mechanism(args.mechanism, network, profile)
    print(_outcome_table(outcome, profile))
    if args.dump:
        Path(args.dump).write_text(json.dumps(outcome_to_dict(outcome), indent=2) + "\n")
    return EXIT_OK


def _generator_args(args) -> tuple[GeneratorSpec, ValuationSpec]:
    gen = GeneratorSpec(args.generator, args.n, p=args.p, k=args.k, beta=args.beta)
    vals = ValuationSpec(args.valuations, args.lo, args.hi, args.scale)
    return gen, vals


def cmd_gen(args) -> int:
    if args.count < 1:
        raise ConfigError("count must be at least 1")
    gen, vals = _generator_args(args)
    seeds = instance_seeds(args.seed, args.count)
    if args.out_dir is None:
        if args.count != 1:
            raise ConfigError("--count > 1 needs --out-dir")
        json.dump(network_to_dict(generate_network(gen, vals, seeds[0])), sys.stdout, indent=2)
        print()
        return EXIT_OK
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for idx, seed in enumerate(seeds):
        save_instance(
            generate_network(gen, vals, seed),
            out / f"{gen.kind}_{idx:04d}.json",
            comment=f"generator={gen.kind} n={gen.n} seed={seed}",
        )
    return EXIT_OK


def cmd_experiment(args) -> int:
    config = ExperimentConfig.load(args.config)
    text = to_csv(run_experiment(config, workers=args.workers), config.metrics)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _suite_reports(network, suites, mechanisms, seed, stub) -> list[PropertyReport]:
    reports = []
    mechs = [STUBS[stub]] if stub else mechanisms
    for suite in suites:
        if suite == "ir":
            reports += [check_ir(network, m, neighbor_sweep=True, seed=seed) for m in mechs]
        elif suite == "ic":
            reports += [check_ic(network, m, seed=seed) for m in mechs]
        elif suite == "revenue":
            reports.append(check_revenue_chain(network, seed=seed))
        elif suite == "oracle":
            rep = PropertyReport("oracle", seed, instances_checked=1)
            graph = build_effective_graph(network, ActionProfile.truthful(network))
            for target in graph.participants:
                rep.checks += 1
                problems = structures_match(graph, target)
                if problems:
                    rep.violations.append((seed, (target, problems)))
            reports.append(rep)
    return reports


def cmd_verify(args) -> int:
    suites = SUITES if args.suite == "all" else (args.suite,)
    mechanisms = [m for m in args.mechanism.split(",") if m]
    base_seed = None
    if args.config:
        config = ExperimentConfig.load(args.config)
        instances = config.networks()
        base_seed = config.seed
    elif args.file:
        instances = [(None, load_instance(args.file))]
    else:
        raise ConfigError("give an instance file or --config")

    totals: dict[str, PropertyReport] = {}
    for seed, network in instances:
        for rep in _suite_reports(network, suites, mechanisms, seed, args.stub):
            totals.setdefault(rep.name, PropertyReport(rep.name, base_seed)).merge(rep)
    failed = False
    for rep in totals.values():
        print(rep.summary())
        for seed, detail in rep.violations[: args.show]:
            print(f"  seed={seed} {detail}")
        failed |= not rep.holds
    return EXIT_VIOLATION if failed else EXIT_OK


def cmd_fixture(args) -> int:
    if args.out:
        save_instance(fixture_network(), args.out, comment=FIXTURE_COMMENT)
    else:
        json.dump(network_to_dict(fixture_network(), FIXTURE_COMMENT), sys.stdout, indent=2)
        print()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairdiffusion", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one auction on an instance file")
    run.add_argument("file")
    run.add_argument("--mechanism", choices=["fdm", "idm", "vcg"], default="fdm")
    run.add_argument("--dump", help="write the outcome as JSON")
    run.add_argument(
        "--report",
        action="append",
        default=[],
        metavar="ID=VALUE[:N1,N2]",
        help="override a buyer's report (valuation and optionally invited neighbours)",
    )
    run.add_argument("--absent", action="append", default=[], metavar="ID")
    run.set_defaults(func=cmd_run)

    gen = sub.add_parser("gen", help="generate random instance files")
    gen.add_argument("--generator", default="erdos_renyi", choices=["erdos_renyi", "watts_strogatz", "random_tree", "star"])
    gen.add_argument("--n", type=int, default=10)
    gen.add_argument("--p", type=float, default=0.3)
    gen.add_argument("--k", type=int, default=4)
    gen.add_argument("--beta", type=float, default=0.2)
    gen.add_argument("--valuations", default="uniform_int", choices=["uniform_int", "exponential"])
    gen.add_argument("--lo", type=int, default=0)
    gen.add_argument("--hi", type=int, default=20)
    gen.add_argument("--scale", type=float, default=5.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--count", type=int, default=1)
    gen.add_argument("--out-dir")
    gen.set_defaults(func=cmd_gen)

    exp = sub.add_parser("experiment", help="batch metrics to CSV")
    exp.add_argument("--config", required=True)
    exp.add_argument("--out")
    exp.add_argument("--workers", type=int, default=1)
    exp.set_defaults(func=cmd_experiment)

    ver = sub.add_parser("verify", help="check IR, IC, revenue and oracle properties")
    ver.add_argument("file", nargs="?")
    ver.add_argument("--config")
    ver.add_argument("--suite", choices=[*SUITES, "all"], default="all")
    ver.add_argument("--mechanism", default="fdm,idm")
    ver.add_argument("--stub", choices=sorted(STUBS), help="run a deliberately broken mechanism")
    ver.add_argument("--show", type=int, default=5, help="violations printed per property")
    ver.set_defaults(func=cmd_verify)

    fix = sub.add_parser("fixture", help="emit the worked-example network")
    fix.add_argument("--out")
    fix.set_defaults(func=cmd_fixture)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("FAIRDIFFUSION_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InstanceError, ProfileError, ConfigError, NotAParticipant, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NoParticipants as exc:
        print(f"no participants: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except SizeGuardError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_TOO_LARGE


if __name__ == "__main__":
    sys.exit(main())
