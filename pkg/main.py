#!/usr/bin/env python3
"""
Mediator Market Engine
Main entry point for the application

Computes symmetric Nash equilibria of a sponsored-search position auction
with and without a mediator who resells a won slot in a sub-auction, and
reports what changes for the auctioneer, the advertisers and the mediator.

Exit status: 0 success, 1 input error, 2 invariant violated.
"""

import argparse
import sys
from dataclasses import replace
from typing import List, Optional

from src.config_manager import TOLERANCE_ENV, ConfigManager
from src.errors import ErrorCode, InvariantError, MarketError, ValidationError
from src.logger import Logger
from src.market_analysis import (
    compare,
    efficiency,
    fitness_sweep,
    run_baseline,
    run_with_mediator,
    verify_campaign,
)
from src.scenario_io import (
    REPORT_FORMATS,
    generate_scenarios,
    load_scenario,
    serialize_scenario,
    write_outcome,
    write_report,
    write_sweep,
)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_INVARIANT = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Mediator Market Engine",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=f"""
Examples:
  python main.py run --scenario scenarios/worked_example.json
  python main.py compare --scenario scenarios/worked_example.json --format structured
  python main.py sweep --scenario scenarios/worked_example.json --f-min 0.1 --f-max 0.9 --steps 9
  python main.py verify --seed 42 --count 1000
  python main.py gen --seed 7 --count 5 > campaign.jsonl

The default tolerance can be overridden with {TOLERANCE_ENV};
--tolerance overrides both the environment and the config file.
        """
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        '--config',
        default='config.json',
        help='Path to configuration file (default: config.json)'
    )
    common.add_argument(
        '--log-level',
        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'],
        default=None,
        help='Set logging level (default: from config)'
    )
    common.add_argument(
        '--tolerance',
        type=float,
        default=None,
        help='Absolute/relative comparison tolerance (default: 1e-9)'
    )
    common.add_argument(
        '--format',
        choices=REPORT_FORMATS,
        default=None,
        help='Report format (default: from config)'
    )

    commands = parser.add_subparsers(dest='command', required=True, metavar='command')

    run = commands.add_parser('run', parents=[common], help='Solve one scenario')
    run.add_argument('--scenario', required=True, help='Scenario document (JSON)')

    cmp = commands.add_parser('compare', parents=[common], help='Compare with and without the mediator')
    cmp.add_argument('--scenario', required=True, help='Scenario document (JSON)')

    sweep = commands.add_parser('sweep', parents=[common], help='Sweep the mediator fitness')
    sweep.add_argument('--scenario', required=True, help='Scenario document (JSON)')
    sweep.add_argument('--f-min', type=float, required=True, help='Smallest fitness')
    sweep.add_argument('--f-max', type=float, required=True, help='Largest fitness (f * gamma_1 < 1)')
    sweep.add_argument('--steps', type=int, default=10, help='Number of evenly spaced values (default: 10)')

    verify = commands.add_parser('verify', parents=[common], help='Verify equilibria and invariants')
    verify.add_argument('--scenario', default=None, help='Verify one scenario document instead of a campaign')
    verify.add_argument('--seed', type=int, default=None, help='Campaign seed (default: from config)')
    verify.add_argument('--count', type=int, default=None, help='Campaign size (default: from config)')
    verify.add_argument('--extreme', action='store_true', help='Generate L = K scenarios with s-values equal to p-values')
    verify.add_argument('--inject-fault', action='store_true',
                        help='Debug: zero the top price-score before checking (must fail)')

    gen = commands.add_parser('gen', parents=[common], help='Print random scenarios, one per line')
    gen.add_argument('--seed', type=int, default=None, help='Generator seed (default: from config)')
    gen.add_argument('--count', type=int, default=None, help='Number of scenarios (default: from config)')
    gen.add_argument('--extreme', action='store_true', help='Generate L = K scenarios with s-values equal to p-values')

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the mediator market engine"""
    args = build_parser().parse_args(argv)

    try:
        config_manager = ConfigManager(args.config)
        config_manager.load_config()

        logger = Logger(
            log_directory=config_manager.get_log_directory(),
            log_level=args.log_level or config_manager.get_log_level()
        )
        tolerance = config_manager.get_tolerance(args.tolerance)
        output_format = args.format or config_manager.get_report_format()

        logger.debug(f"Command: {args.command}")
        logger.debug(f"Config file: {args.config}")
        logger.debug(f"Tolerance: {tolerance}")

        if args.command == 'run':
            return cmd_run(args.scenario, output_format, logger)
        if args.command == 'compare':
            return cmd_compare(args.scenario, output_format, tolerance, logger)
        if args.command == 'sweep':
            return cmd_sweep(args.scenario, args.f_min, args.f_max, args.steps, output_format, tolerance, logger)
        if args.command == 'verify':
            return cmd_verify(args, config_manager, tolerance, logger)
        return cmd_gen(args, config_manager)

    except KeyboardInterrupt:
        print("\nInterrupted", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except InvariantError as e:
        print(f"Invariant violated: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except (MarketError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR


def _load(path: str, logger: Logger):
    scenario = load_scenario(path).scenario
    fitness = scenario.mediator.fitness if scenario.mediator else None
    logger.log_scenario_loaded(path, scenario.ctr.num_slots, len(scenario.advertisers), fitness)
    return scenario


def cmd_run(scenario_path: str, output_format: str, logger: Logger) -> int:
    """Solve one scenario: with the mediator if it has one, else the baseline"""
    scenario = _load(scenario_path, logger)
    if scenario.mediator is not None:
        outcome = run_with_mediator(scenario)
        if outcome.mediator_lost:
            logger.warning(f"Mediator {scenario.mediator.agent_id} won no primary slot")
    else:
        outcome = run_baseline(scenario)
    logger.log_outcome("run", outcome.revenue, efficiency(outcome), outcome.mediator_slot)

    sys.stdout.write(write_outcome(outcome, output_format))
    return EXIT_OK


def cmd_compare(scenario_path: str, output_format: str, tolerance: float, logger: Logger) -> int:
    """Compare the market with and without the mediator; exit 2 on a broken invariant"""
    scenario = _load(scenario_path, logger)
    if scenario.mediator is None:
        raise ValidationError("mediator required for compare", ErrorCode.MEDIATOR_REQUIRED)

    report = compare(scenario, tolerance)
    logger.log_outcome("with_mediator", report.with_mediator.revenue, report.efficiency,
                       report.with_mediator.mediator_slot)
    logger.log_outcome("baseline", report.baseline.revenue, report.baseline_efficiency)

    sys.stdout.write(write_report(report, output_format))

    violations = report.violations()
    for problem in violations:
        logger.log_invariant_check("compare", False, problem)
    return EXIT_INVARIANT if violations else EXIT_OK


def cmd_sweep(scenario_path: str, f_min: float, f_max: float, steps: int, output_format: str,
              tolerance: float, logger: Logger) -> int:
    """Tabulate the comparison over a range of mediator fitness values"""
    scenario = _load(scenario_path, logger)
    rows = fitness_sweep(scenario, f_min, f_max, steps, tolerance)
    win_win = sum(1 for row in rows if row.win_win)
    logger.info(f"Sweep: {len(rows)} rows, {win_win} win-win")

    sys.stdout.write(write_sweep(rows, output_format))
    return EXIT_OK


def cmd_verify(args: argparse.Namespace, config_manager: ConfigManager, tolerance: float,
               logger: Logger) -> int:
    """
    Verify one scenario or a seeded campaign.

    Prints "passed/total pass"; on failure also prints the first failing
    scenario as a replayable document and exits 2.
    """
    if args.scenario:
        scenarios = [_load(args.scenario, logger)]
        provenance = [None]
    else:
        seed = args.seed if args.seed is not None else config_manager.get_campaign_seed()
        count = args.count if args.count is not None else config_manager.get_campaign_count()
        if count < 1:
            raise ValidationError(f"campaign needs --count >= 1, got {count}", ErrorCode.GENERATOR_PARAMS)
        params = config_manager.get_generator_params()
        if args.extreme:
            params = replace(params, extreme=True)
        scenarios = list(generate_scenarios(seed, count, params))
        provenance = [{"seed": seed, "index": i} for i in range(count)]
        logger.info(f"Verifying campaign: seed {seed}, {count} scenarios")

    total, failing = verify_campaign(scenarios, tolerance, corrupt_prices=args.inject_fault)
    logger.log_campaign_progress(total, total, len(failing))
    print(f"{total - len(failing)}/{total} pass")

    if not failing:
        return EXIT_OK

    first = failing[0]
    index = next(i for i, s in enumerate(scenarios) if s is first.scenario)
    for problem in first.failures:
        logger.log_invariant_check("verify", False, problem)
    if first.witness is not None:
        print(f"witness: position {first.witness[0]} prefers slot {first.witness[1]}")
    print("counterexample:")
    sys.stdout.write(serialize_scenario(first.scenario, provenance[index]))
    return EXIT_INVARIANT


def cmd_gen(args: argparse.Namespace, config_manager: ConfigManager) -> int:
    """Print seeded random scenarios, one compact document per line"""
    seed = args.seed if args.seed is not None else config_manager.get_campaign_seed()
    count = args.count if args.count is not None else config_manager.get_campaign_count()
    params = config_manager.get_generator_params()
    if args.extreme:
        params = replace(params, extreme=True)

    for index, scenario in enumerate(generate_scenarios(seed, count, params)):
        sys.stdout.write(serialize_scenario(scenario, {"seed": seed, "index": index}, compact=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
