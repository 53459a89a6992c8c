#!/usr/bin/env python3
"""
Main Entry Point for the Boussinesq Solver
Parses the command line, loads the configuration and dispatches to the
run, verify, equilibrium, stability and poincare commands
"""

import argparse
import json
import logging
import sys
from pathlib import Path

# Add current directory to path
sys.path.insert(0, str(Path(__file__).parent))

from core_types import ObrbError, ParamsError, SpecError, build_grid
from elliptic import poincare_constant
from simconfig import ConfigError, RunConfig, config_from_blocks, load_config
from simulation import EXIT_ASSERTION, EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, CheckpointError, Simulation
from suites import SuiteRegistry

logger = logging.getLogger(__name__)

USAGE_ERRORS = (ConfigError, SpecError, ParamsError, CheckpointError)


def load_run_config(path=None) -> RunConfig:
    """
    Run file when given, otherwise config.py, otherwise config_example.py

    Raises:
        ConfigError: If the chosen configuration is invalid
    """
    if path is not None:
        return load_config(path)
    try:
        import config
    except ImportError:
        logger.info("config.py not found, using config_example.py")
        import config_example as config
    return config_from_blocks(config.blocks(), source=config.__file__)


def cmd_run(args) -> int:
    config = load_run_config(args.config)
    sim = Simulation(config, args.out)
    return sim.run()


def cmd_verify(args) -> int:
    registry = SuiteRegistry()
    if args.list:
        for name, description in registry.list_suites().items():
            print(f"{name:<16} {description}")
        return EXIT_OK

    config = load_run_config(args.config)
    options = json.loads(args.options) if args.options else {}
    output_dir = Path(args.out) if args.out else None
    suite = registry.create(args.suite, config, options, output_dir)
    if args.info:
        print(json.dumps(suite.get_info(), indent=2, default=list))
        return EXIT_OK

    report = suite.run()
    path = report.save(suite.output_dir / f"verify_{args.suite}.json")
    logger.info(f"Report written to {path}")
    if report.counterexample:
        logger.info(f"First counterexample: {report.counterexample}")
    return EXIT_OK if report.passed else EXIT_ASSERTION


def cmd_equilibrium(args) -> int:
    config = load_run_config(args.config)
    sim = Simulation(config, args.out)
    eq, path = sim.write_equilibrium(tol_steady=args.tol_steady, max_T=args.max_t)
    print(json.dumps({'path': str(path), 'residual': eq.residual, 'mean_theta': eq.thetas.mean()}, indent=2))
    return EXIT_OK


def cmd_stability(args) -> int:
    config = load_run_config(args.config)
    sim = Simulation(config, args.out)
    result = sim.stability(tol_steady=args.tol_steady, max_T=args.max_t)
    path = sim.output_dir / 'stability.json'
    with open(path, 'w') as f:
        json.dump(result, f, indent=2, default=float)
    print(json.dumps(result, indent=2, default=float))
    return EXIT_OK


def cmd_poincare(args) -> int:
    grid = build_grid(args.nx, args.ny, args.lx, args.ly)
    cp = poincare_constant(grid)
    print(f"{grid.describe()}: C_p = {cp:.12g}, lambda_1 = {cp * cp:.12g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='obrb',
        description="Boussinesq flow with a non-local temperature boundary condition")
    parser.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help="Logging verbosity (default: %(default)s)")
    commands = parser.add_subparsers(dest='command', required=True)

    run = commands.add_parser('run', help="Integrate to t_end and write diagnostics")
    run.add_argument('--config', help="Run file (default: config.py or config_example.py)")
    run.add_argument('--out', help="Output directory (default: [run] out_dir)")
    run.set_defaults(handler=cmd_run)

    verify = commands.add_parser('verify', help="Run a verification suite")
    verify.add_argument('--suite', choices=SuiteRegistry().names())
    verify.add_argument('--list', action='store_true', help="List the available suites and exit")
    verify.add_argument('--info', action='store_true',
                        help="Print the suite's version and effective options without running it")
    verify.add_argument('--config', help="Base run file for the suite members")
    verify.add_argument('--out', help="Directory for the report, member outputs and counterexamples "
                                      "(default: [run] out_dir/verify_<suite>)")
    verify.add_argument('--options', help="JSON object overriding the suite defaults")
    verify.set_defaults(handler=cmd_verify)

    for name, handler, text in (('equilibrium', cmd_equilibrium, "Compute and write the equilibrium"),
                                ('stability', cmd_stability, "Evaluate the stability conditions")):
        sub = commands.add_parser(name, help=text)
        sub.add_argument('--config', help="Run file")
        sub.add_argument('--out', help="Output directory")
        sub.add_argument('--tol-steady', type=float, default=1e-8,
                         help="Change rate at which pseudo-time marching stops (default: %(default)s)")
        sub.add_argument('--max-t', type=float, default=200.0,
                         help="Pseudo-time limit (default: %(default)s)")
        sub.set_defaults(handler=handler)

    poincare = commands.add_parser('poincare', help="Discrete Poincare constant of a grid")
    poincare.add_argument('--nx', type=int, required=True)
    poincare.add_argument('--ny', type=int, required=True)
    poincare.add_argument('--lx', type=float, default=1.0)
    poincare.add_argument('--ly', type=float, default=1.0)
    poincare.set_defaults(handler=cmd_poincare)
    return parser


def main(argv=None) -> int:
    """Main entry point"""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == 'verify' and not args.list and args.suite is None:
        parser.error("verify needs --suite NAME (or --list)")

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    try:
        return args.handler(args)
    except USAGE_ERRORS as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except json.JSONDecodeError as e:
        logger.error(f"Invalid --options: {e}")
        return EXIT_CONFIG
    except ObrbError as e:
        logger.error(f"Solver failure: {e}")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
