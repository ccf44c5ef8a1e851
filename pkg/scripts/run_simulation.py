"""
Run, validate, replay and inspect travel-rule simulations
File: scripts/run_simulation.py

Exit codes: 0 ok, 1 scenario error, 2 invariant breach or replay mismatch,
130 interrupted.
"""
import sys
import argparse
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from simulation.event_log import EventLog
from simulation.harness import RunResult, run_scenario
from simulation.reports import REPORT_FORMATS, dump_ledger, dump_routes, emit_report
from simulation.scenario import Scenario, load_scenario
from simulation.scenario_generator import generate_scenario
from utils.errors import SchemaError
from utils.file_utils import load_json, save_bytes, save_json
from utils.logging_utils import configure_logging

EXIT_OK = 0
EXIT_SCHEMA = 1
EXIT_BREACH = 2
EXIT_INTERRUPTED = 130


def _banner(title: str):
    print("=" * 70)
    print(title)
    print("=" * 70)


def _scenario(args) -> Scenario:
    scenario = load_scenario(args.scenario)
    if getattr(args, 'seed', None) is not None:
        scenario = scenario.with_seed(args.seed)
    return scenario


def _report_breaches(result: RunResult) -> int:
    if result.ok:
        return EXIT_OK
    print(f"\n[!] {len(result.breaches)} invariant breach(es):", file=sys.stderr)
    for breach in result.breaches:
        print(f"    {breach}", file=sys.stderr)
    return EXIT_BREACH


def cmd_run(args) -> int:
    scenario = _scenario(args)
    result = run_scenario(scenario)
    report = emit_report(result.log, result.metrics, args.report, result.audits, result.reconciliations)

    if args.out:
        _banner(f"Travel-rule simulation: {args.scenario} (seed {scenario.seed})")
        save_bytes(args.out, report)
        print(f"✓ Report written to {args.out}")
    elif args.report == "text":
        sys.stdout.write(report.decode('utf-8'))
    else:
        sys.stdout.write(report.hex() + "\n")

    if args.log:
        save_json(args.log, result.log.to_json(), pretty=True)
        print(f"✓ Event log written to {args.log}")
    return _report_breaches(result)


def cmd_validate(args) -> int:
    scenario = load_scenario(args.scenario)
    print(f"✓ {args.scenario}: {len(scenario.vasps)} VASPs, {len(scenario.networks)} networks, "
          f"{len(scenario.customers)} customers, {len(scenario.script)} script actions")
    return EXIT_OK


def cmd_replay(args) -> int:
    """Recompute a saved log's digest chain, and optionally rerun its scenario"""
    try:
        log, claimed = EventLog.from_json(load_json(args.log))
    except (FileNotFoundError, ValueError, KeyError, TypeError) as e:
        print(f"[!] Cannot read event log: {e}", file=sys.stderr)
        return EXIT_SCHEMA

    if log.hex_digest != claimed:
        print(f"[!] Digest chain mismatch: file claims {claimed}, events give {log.hex_digest}", file=sys.stderr)
        return EXIT_BREACH
    print(f"✓ Digest chain intact ({len(log)} events, {log.hex_digest})")

    if args.scenario:
        rerun = run_scenario(_scenario(args))
        if rerun.log.hex_digest != claimed:
            print(f"[!] Replay diverged: rerun gives {rerun.log.hex_digest}", file=sys.stderr)
            return EXIT_BREACH
        print("✓ Rerun reproduces the log")
    return EXIT_OK


def cmd_dump_routes(args) -> int:
    result = run_scenario(_scenario(args))
    for line in dump_routes(result.nodes):
        print(line)
    return _report_breaches(result)


def cmd_dump_ledger(args) -> int:
    result = run_scenario(_scenario(args))
    for line in dump_ledger(result.ledger):
        print(line)
    return _report_breaches(result)


def cmd_generate(args) -> int:
    scenario = generate_scenario(
        args.seed,
        networks=args.networks,
        vasps_per_network=args.vasps_per_network,
        customers=args.customers,
        transfers=args.transfers,
    )
    save_json(args.out, scenario.to_dict(), pretty=True)
    print(f"✓ Scenario written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Travel-rule PKI simulation')
    parser.add_argument('--log-level', default='WARNING', help='Diagnostic log level (stderr)')
    parser.add_argument('--json-logs', action='store_true', help='Render diagnostics as JSON lines')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='Run a scenario and print its report')
    run.add_argument('--scenario', required=True, help='Scenario JSON file')
    run.add_argument('--seed', type=int, help='Override the scenario seed')
    run.add_argument('--report', choices=REPORT_FORMATS, default='text', help='Report format')
    run.add_argument('--out', help='Write the report here instead of stdout')
    run.add_argument('--log', help='Also save the event log as JSON')
    run.set_defaults(handler=cmd_run)

    validate = sub.add_parser('validate', help='Check a scenario without running it')
    validate.add_argument('--scenario', required=True, help='Scenario JSON file')
    validate.set_defaults(handler=cmd_validate)

    replay = sub.add_parser('replay', help='Verify a saved event log')
    replay.add_argument('--log', required=True, help='Event log JSON written by run --log')
    replay.add_argument('--scenario', help='Rerun this scenario and compare digests')
    replay.add_argument('--seed', type=int, help='Override the scenario seed for the rerun')
    replay.set_defaults(handler=cmd_replay)

    for name, handler, text in (
        ('dump-routes', cmd_dump_routes, 'Run a scenario and print gateway route tables'),
        ('dump-ledger', cmd_dump_ledger, 'Run a scenario and print the ledger'),
    ):
        dump = sub.add_parser(name, help=text)
        dump.add_argument('--scenario', required=True, help='Scenario JSON file')
        dump.add_argument('--seed', type=int, help='Override the scenario seed')
        dump.set_defaults(handler=handler)

    generate = sub.add_parser('generate', help='Write a generated scenario')
    generate.add_argument('--seed', type=int, default=1, help='Generator seed')
    generate.add_argument('--out', required=True, help='Output scenario path')
    generate.add_argument('--networks', type=int, default=2)
    generate.add_argument('--vasps-per-network', type=int, default=3)
    generate.add_argument('--customers', type=int, default=60)
    generate.add_argument('--transfers', type=int, default=200)
    generate.set_defaults(handler=cmd_generate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level, json_output=args.json_logs)

    try:
        return args.handler(args)

    except SchemaError as e:
        print(f"\n[!] Scenario error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except KeyboardInterrupt:
        print("\n\n[!] Simulation interrupted by user")
        return EXIT_INTERRUPTED


if __name__ == '__main__':
    sys.exit(main())
