"""
Argument parser and subcommand handlers of the stabcred.py CLI application
"""

import argparse
import logging
import multiprocessing
import sys
from decimal import Decimal
from typing import Dict, List, Optional

from colorama import init, Fore

from stabcred import _utils, reports, risk, scenario, simulation, stableswap, underwriting
from stabcred.constants import Direction, Status, Consequence, Likelihood
from stabcred.exceptions import ScenarioError, StabcredError

init()  # init terminal colors
lg = logging.getLogger(__name__)

EXAMPLES = """
  basic usage
  -----------

    # quote a 400,000 stablecoin sale into the core pool
    stabcred swap-quote --scenario scenarios/baseline.json --amount 400000 --direction stable-in

    # size the credit lines of a scenario and check them against the external rate curves
    stabcred underwrite --scenario scenarios/baseline.json

    # endogenous yield and B2S sizing
    stabcred yield --scenario scenarios/baseline.json
    stabcred absorb --scenario scenarios/baseline.json --target-rate 0.10

    # simulate and write report.json + events.jsonl
    stabcred simulate --scenario scenarios/baseline.json --seed 7 --out out/

    # 1,000 Monte Carlo paths on 4 processes
    stabcred monte-carlo --scenario scenarios/baseline.json --paths 1000 --processes 4

    # the built-in risk register
    stabcred risk-matrix
"""


def non_negative_decimal(x: str) -> Decimal:
    """argparse type for token amounts and rates"""
    try:
        res = _utils.to_decimal(x)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))
    if not res.is_finite():
        raise argparse.ArgumentTypeError(f"must be a finite number, got '{x}'")
    if res < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got '{x}'")
    return res


def non_negative_int(x: str) -> int:
    try:
        res = int(x)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: '{x}'")
    if res < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got '{x}'")
    return res


def positive_int(x: str) -> int:
    res = non_negative_int(x)
    if res == 0:
        raise argparse.ArgumentTypeError("must be >= 1, got '0'")
    return res


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stabcred", description="stablecoin credit risk engine")
    parser.set_defaults(fun=None, parser=parser)
    parser.add_argument("--examples", action="store_true", help="show usage examples")
    subparsers = parser.add_subparsers()

    # options shared by all subcommands
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", type=str, choices=("table", "json"), default="table", help="output format (defaults to table)")
    common.add_argument("--quiet", action="store_true", help="no progress bars and no status line")
    common.add_argument("--log-level", type=str, help="python-logging log level: DEBUG (10), INFO (20), WARNING (30), ERROR (40), CRITICAL (50)", default="WARNING")
    common.add_argument("--log-file", type=str, help="optional path to redirect logging to")
    common.add_argument("--processes", type=positive_int, default=max(multiprocessing.cpu_count() - 1, 1), help="worker processes for monte-carlo. Defaults to `number-of-cpu-cores - 1`.")

    with_scenario = argparse.ArgumentParser(add_help=False, parents=[common])
    with_scenario.add_argument("--scenario", type=str, required=True, help="path to a scenario JSON file")

    # swap-quote
    p = subparsers.add_parser("swap-quote", parents=[with_scenario], help="quote a fee-less swap against the core pool")
    p.set_defaults(fun=handle_swap_quote)
    p.add_argument("--amount", type=non_negative_decimal, required=True, help="amount of tokens to swap in")
    p.add_argument("--direction", type=str, choices=("stable-in", "counter-in"), default="stable-in", help="which side of the pool the amount enters (defaults to stable-in)")

    # underwrite
    p = subparsers.add_parser("underwrite", parents=[with_scenario], help="size the credit lines of a scenario and check them")
    p.set_defaults(fun=handle_underwrite)

    # yield
    p = subparsers.add_parser("yield", parents=[with_scenario], help="endogenous yield of the core pool")
    p.set_defaults(fun=handle_yield)

    # absorb
    p = subparsers.add_parser("absorb", parents=[with_scenario], help="liquidity the core pool can absorb and the implied B2S credit size")
    p.set_defaults(fun=handle_absorb)
    p.add_argument("--target-rate", type=non_negative_decimal, help="controller rate the pool may be pushed to (defaults to the scenario's perps target or 0.10)")

    # simulate
    p = subparsers.add_parser("simulate", parents=[with_scenario], help="simulate all facilitators of a scenario")
    p.set_defaults(fun=handle_simulate)
    p.add_argument("--seed", type=non_negative_int, help="master seed (defaults to the scenario's rng seed)")
    p.add_argument("--out", type=str, help="directory to write report.json and events.jsonl to")

    # monte-carlo
    p = subparsers.add_parser("monte-carlo", parents=[with_scenario], help="run independent simulation paths and summarize their peaks")
    p.set_defaults(fun=handle_monte_carlo)
    p.add_argument("--seed", type=non_negative_int, help="master seed (defaults to the scenario's rng seed)")
    p.add_argument("--paths", type=non_negative_int, default=1000, help="number of paths (defaults to 1000)")
    p.add_argument("--out", type=str, help="directory to write monte_carlo.json to")

    # risk-matrix
    p = subparsers.add_parser("risk-matrix", parents=[common], help="show the risk quantifying matrix and the risk register")
    p.set_defaults(fun=handle_risk_matrix)
    p.add_argument("--scenario", type=str, help="optional scenario whose risks extend the built-in register")

    return parser


def run_cli(argv: Optional[List[str]] = None) -> int:
    """
    Run the CLI

    :return: exit code. 0 on success, 1 on engine errors, 2 on usage and scenario errors.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else int(Status.OK)

    if args.examples:
        print(EXAMPLES)
        return int(Status.OK)

    if args.fun is None:
        parser.print_help(sys.stderr)
        return int(Status.USAGE)

    init_logging(args.log_level, args.log_file)
    color = sys.stdout.isatty()

    try:
        rsp = args.fun(args)
    except ScenarioError as e:
        lg.debug("scenario error", exc_info=True)
        print(format_status(Status.USAGE, str(e)), file=sys.stderr)
        return int(Status.USAGE)
    except StabcredError as e:
        lg.debug("engine error", exc_info=True)
        print(format_status(Status.FAIL, f"{type(e).__name__}: {e}"), file=sys.stderr)
        return int(Status.FAIL)

    print(format_response(rsp, args.format, color))
    if not args.quiet:
        print(format_status(rsp["status"], rsp.get("msg")), file=sys.stderr)
    return int(rsp["status"])


def init_logging(log_level: str, log_file: Optional[str] = None) -> None:
    if log_level.isdigit():
        log_level = int(log_level)
    else:
        log_level = log_level.upper()

    if log_file is not None:
        logging.basicConfig(level=log_level, filename=log_file, force=True)
    else:
        logging.basicConfig(level=log_level, force=True)


# handlers -------------------------------------------------------------------------------------------------

def handle_swap_quote(args) -> Dict:
    config = scenario.load_scenario(args.scenario)
    quote = stableswap.swap(config.pool.to_pool_state(), args.amount, Direction.from_str(args.direction))
    return {"status": Status.OK, "msg": "swap quoted", "payload": quote.to_dict()}


def handle_underwrite(args) -> Dict:
    config = scenario.load_scenario(args.scenario)
    results = underwriting.underwrite(config)
    satisfied = all(r.verdict.satisfied for r in results if r.verdict is not None)
    msg = "all credit lines are affordable" if satisfied else "a credit line exceeds what its market supports"
    return {
        "status": Status.OK,
        "msg": msg,
        "payload": {"credit_lines": [r.to_dict() for r in results], "caveats": list(underwriting.CAVEATS)},
    }


def handle_yield(args) -> Dict:
    config = scenario.load_scenario(args.scenario)
    return {"status": Status.OK, "msg": "endogenous yield", "payload": {"markets": underwriting.scenario_yield(config)}}


def handle_absorb(args) -> Dict:
    config = scenario.load_scenario(args.scenario)
    if args.target_rate is not None:
        target = args.target_rate
    elif config.perps is not None:
        target = config.perps.absorb_target_rate
    else:
        target = Decimal("0.10")

    counter = config.pool.counter
    payload = {
        "target_rate": target,
        "gain": config.controller.gain,
        "counterassets": counter,
        "absorbable": underwriting.absorbable_liquidity(target, config.controller, counter),
    }

    if config.perps is not None:
        resolved, _ = underwriting.resolve_credit_lines(config)
        drawdown = resolved.perps.worst_case_drawdown
        payload["worst_case_drawdown"] = drawdown
        payload["b2s_credit_size"] = _utils.quantize(underwriting.b2s_credit_size(payload["absorbable"], drawdown))

    return {"status": Status.OK, "msg": "absorbable liquidity", "payload": payload}


def handle_simulate(args) -> Dict:
    config = scenario.load_scenario(args.scenario)
    report = simulation.run_simulation(config, seed=args.seed)

    if args.out is not None:
        files = reports.write_artifacts(report, args.out)
        return {
            "status": Status.OK,
            "msg": f"wrote {', '.join(str(f) for f in files)}",
            "payload": {"provenance": report.provenance, "summary": report.summary},
        }
    return {
        "status": Status.OK,
        "msg": "simulation finished",
        "payload": report.to_dict(),
        "table": lambda color: reports.render_simulation(report, color),
    }


def handle_monte_carlo(args) -> Dict:
    config = scenario.load_scenario(args.scenario)
    summary = simulation.monte_carlo(
        config, paths=args.paths, seed=args.seed, processes=args.processes, progress=not args.quiet
    )
    payload = _utils.jsonable(summary)
    msg = f"{summary.paths} paths"
    if args.out is not None:
        msg = f"wrote {reports.write_summary(payload, args.out)}"
    return {"status": Status.OK, "msg": msg, "payload": payload}


def handle_risk_matrix(args) -> Dict:
    register = risk.default_register()
    if args.scenario is not None:
        register += list(scenario.load_scenario(args.scenario).risks)

    matrix = [
        {"likelihood": li.label, "consequence": c.label, **risk.score(li, c).to_dict()}
        for li in Likelihood for c in Consequence
    ]
    return {
        "status": Status.OK,
        "msg": f"{len(register)} risks",
        "payload": {"matrix": matrix, "register": risk.register_rows(register)},
        "table": lambda color: risk.render_matrix(color) + "\n\n" + risk.render_register(register, color),
    }


# formatting -----------------------------------------------------------------------------------------------

def format_response(rsp: Dict, fmt: str = "table", color: bool = True) -> str:
    payload = _utils.jsonable(rsp.get("payload"))
    if fmt == "json":
        return _utils.canonical_json(payload, indent=2)
    if "table" in rsp:
        return rsp["table"](color)
    return reports.render_table(payload, color=color)


def format_status(x: int, msg: Optional[str] = None) -> str:
    res = color_status(x)
    if msg:
        res = res + f" {Fore.YELLOW}[{msg}]{Fore.RESET}"
    return res


def color_status(x: int) -> str:
    x = Status(x)
    pad = 5
    if x == Status.OK:
        return f"{Fore.GREEN}{x.name.rjust(pad, ' ')}{Fore.RESET}"
    else:
        return f"{Fore.RED}{x.name.rjust(pad, ' ')}{Fore.RESET}"


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))
