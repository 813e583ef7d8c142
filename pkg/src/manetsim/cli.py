"""Command-line front end: single runs, A/B comparisons, size sweeps.

Exit codes: 0 success, 2 configuration/usage error, 3 run-time
invariant violation.  All CSV output is deterministic: runs are
aggregated in sorted (size, protocol, seed) order and floats print
with 6 significant digits, so repeated invocations are byte-identical.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .engine import Simulation
from .metrics import (
    REFERENCE_RESULTS,
    AccountingError,
    ComparisonError,
    compare_many,
)
from .scenario import ConfigError, FlowSpec, parse_config
from .simcore import SimulationError

REPORT_HEADER = ("seed,protocol,node_count,adversary_fraction,pdr_percent,"
                 "mean_delay_s,throughput_bps,sent,delivered,drops_adversary,"
                 "drops_no_route,drops_other,detected_adversaries,"
                 "false_positives")

TRUST_HEADER = ("observer,neighbor,rreq_success,rreq_failure,rrep_success,"
                "rrep_failure,data_success,data_failure,trust_level,verdict")


def _fmt(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def report_row(report) -> str:
    drops_other = (report.drops["buffer_overflow"] + report.drops["radio_loss"]
                   + report.drops["hop_limit"])
    fields = [
        report.seed, report.protocol, report.node_count,
        _fmt(report.adversary_fraction), _fmt(report.pdr),
        _fmt(report.mean_delay), _fmt(report.throughput_bps),
        report.sent, report.delivered, report.drops["adversary"],
        report.drops["no_route"], drops_other,
        report.detection.true_positives, report.detection.false_positives,
    ]
    return ",".join(str(f) for f in fields)


def write_report_csv(path: Path, reports) -> None:
    lines = [REPORT_HEADER] + [report_row(r) for r in reports]
    path.write_text("\n".join(lines) + "\n")


def write_trust_csv(path: Path, simulation) -> None:
    from .trust import classify, trust_level
    lines = [TRUST_HEADER]
    for node in simulation.nodes:
        trust = getattr(node, "trust", None)
        if trust is None:
            continue
        for neighbor in sorted(trust.ledger):
            record = trust.ledger[neighbor]
            verdict = classify(record, trust.params)
            lines.append(",".join(str(v) for v in (
                node.node_id, neighbor,
                record.rreq.success, record.rreq.failure,
                record.rrep.success, record.rrep.failure,
                record.data.success, record.data.failure,
                _fmt(trust_level(record, trust.params)),
                verdict.verdict.value)))
    path.write_text("\n".join(lines) + "\n")


def _summary_rows(reports):
    """Mean and stddev rows over seeds, same column layout as reports."""
    import math

    def column(getter):
        values = [getter(r) for r in reports]
        values = [v for v in values if v is not None]
        if not values:
            return None, None
        mean = sum(values) / len(values)
        var = sum((v - mean) ** 2 for v in values) / len(values)
        return mean, math.sqrt(var)

    metrics = [
        ("pdr_percent", lambda r: r.pdr),
        ("mean_delay_s", lambda r: r.mean_delay),
        ("throughput_bps", lambda r: r.throughput_bps),
        ("sent", lambda r: float(r.sent)),
        ("delivered", lambda r: float(r.delivered)),
        ("detected_adversaries", lambda r: float(r.detection.true_positives)),
        ("false_positives", lambda r: float(r.detection.false_positives)),
    ]
    lines = ["protocol,node_count,metric,mean,stddev"]
    proto = reports[0].protocol
    size = reports[0].node_count
    for name, getter in metrics:
        mean, std = column(getter)
        lines.append(f"{proto},{size},{name},{_fmt(mean)},{_fmt(std)}")
    return lines


def run_one(config, seed, protocol=None, *, collect_trace=False):
    cfg = replace(config, seed=seed)
    if protocol is not None:
        cfg = replace(cfg, protocol=protocol)
    sim = Simulation(cfg, collect_trace=collect_trace)
    report = sim.run()
    return sim, report


def _write_trace(path: Path, sim) -> None:
    path.write_text("\n".join(sim.trace) + "\n")


def cmd_run(config, args, out: Path) -> int:
    reports = []
    for seed in args.seeds:
        sim, report = run_one(config, seed, args.protocol,
                              collect_trace=args.trace)
        reports.append(report)
        write_report_csv(out / f"report_seed{seed}.csv", [report])
        if report.protocol == "tbraodv":
            write_trust_csv(out / f"trust_seed{seed}.csv", sim)
        if args.trace:
            _write_trace(out / f"trace_{report.protocol}_seed{seed}.txt", sim)
    summary = _summary_rows(reports)
    (out / "summary.csv").write_text("\n".join(summary) + "\n")
    for report in reports:
        print(f"seed {report.seed}: pdr={_fmt(report.pdr)}% "
              f"delay={_fmt(report.mean_delay)}s "
              f"throughput={_fmt(report.throughput_bps)}bps")
    return 0


COMPARISON_HEADER = ("seed,node_count,adversary_fraction,pdr_aodv,pdr_tbraodv,"
                     "delta_pdr,delay_aodv,delay_tbraodv,delta_delay,"
                     "throughput_aodv,throughput_tbraodv,delta_throughput")


def _comparison_lines(table, node_count, adversary_fraction):
    lines = [COMPARISON_HEADER]
    for row in table.rows + [table.aggregate]:
        lines.append(",".join(str(v) for v in (
            row.seed, node_count, _fmt(adversary_fraction),
            _fmt(row.pdr_a), _fmt(row.pdr_b), _fmt(row.delta_pdr),
            _fmt(row.delay_a), _fmt(row.delay_b), _fmt(row.delta_delay),
            _fmt(row.throughput_a), _fmt(row.throughput_b),
            _fmt(row.delta_throughput))))
    return lines


def run_comparison(config, seeds, *, collect_trace=False, out=None,
                   label=""):
    reports = {}
    for protocol in ("aodv", "tbraodv"):
        reports[protocol] = []
        for seed in seeds:
            sim, report = run_one(config, seed, protocol,
                                  collect_trace=collect_trace)
            reports[protocol].append(report)
            if out is not None and collect_trace:
                _write_trace(out / f"trace_{label}{protocol}_seed{seed}.txt",
                             sim)
    return compare_many(reports["aodv"], reports["tbraodv"])


def cmd_compare(config, args, out: Path) -> int:
    table = run_comparison(config, args.seeds, collect_trace=args.trace,
                           out=out)
    fraction = config.adversary.fraction if config.adversary.mode == "fraction" else 0.0
    lines = _comparison_lines(table, config.node_count, fraction)
    (out / "comparison.csv").write_text("\n".join(lines) + "\n")
    agg = table.aggregate
    print(f"aodv     mean pdr {_fmt(agg.pdr_a)}%  delay {_fmt(agg.delay_a)}s")
    print(f"tbraodv  mean pdr {_fmt(agg.pdr_b)}%  delay {_fmt(agg.delay_b)}s")
    print(f"delta    pdr {_fmt(agg.delta_pdr)}pp  delay {_fmt(agg.delta_delay)}s")
    reference = REFERENCE_RESULTS.get(config.node_count)
    if reference:
        ref_a, ref_b = reference["aodv"], reference["tbraodv"]
        print(f"reference@{config.node_count}: aodv pdr {ref_a[0]}% "
              f"delay {ref_a[1]}s | tbraodv pdr {ref_b[0]}% delay {ref_b[1]}s")
    return 0


def scale_flows(config, new_size: int):
    """Rescale flow endpoints proportionally onto a new node count."""
    base = config.node_count
    flows = []
    used = set()
    for flow in config.flows:
        src = min(new_size - 1, round(flow.src * new_size / base))
        dst = min(new_size - 1, round(flow.dst * new_size / base))
        while dst == src or (src, dst) in used:
            dst = (dst + 1) % new_size
            if dst == src:
                dst = (dst + 1) % new_size
        used.add((src, dst))
        flows.append(FlowSpec(src=src, dst=dst, rate=flow.rate,
                              packet_size=flow.packet_size, start=flow.start,
                              stop=flow.stop))
    return replace(config, node_count=new_size, flows=tuple(flows))


SWEEP_HEADER = "node_count,protocol,pdr_percent,mean_delay_s,throughput_bps"


def cmd_sweep(config, args, out: Path) -> int:
    sizes = args.sizes or [25, 50, 100]
    lines = [SWEEP_HEADER]
    for size in sorted(sizes):
        sized = scale_flows(config, size)
        table = run_comparison(sized, args.seeds)
        for protocol, pdr, delay, throughput in (
                ("aodv", table.aggregate.pdr_a, table.aggregate.delay_a,
                 table.aggregate.throughput_a),
                ("tbraodv", table.aggregate.pdr_b, table.aggregate.delay_b,
                 table.aggregate.throughput_b)):
            lines.append(f"{size},{protocol},{_fmt(pdr)},{_fmt(delay)},"
                         f"{_fmt(throughput)}")
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def _parse_int_list(text: str):
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="manetsim",
        description="Deterministic AODV / TBRAODV comparison simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "simulate one protocol"),
                            ("compare", "A/B both protocols, same seeds"),
                            ("sweep", "compare across node counts")):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--scenario", required=True, help="scenario file")
        cmd.add_argument("--protocol", choices=("aodv", "tbraodv"),
                         help="override the scenario protocol (run only)")
        cmd.add_argument("--seeds", type=_parse_int_list, default=[1],
                         help="comma-separated seed list, e.g. 1,2,3")
        cmd.add_argument("--sizes", type=_parse_int_list, default=None,
                         help="comma-separated node counts (sweep only)")
        cmd.add_argument("--out", default="out", help="output directory")
        cmd.add_argument("--trace", action="store_true",
                         help="dump one event-trace file per run")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if not args.seeds:
        print("error: --seeds must not be empty", file=sys.stderr)
        return 2
    if args.command == "sweep" and args.sizes is not None and not args.sizes:
        print("error: --sizes must not be empty", file=sys.stderr)
        return 2
    try:
        config = parse_config(Path(args.scenario).read_text())
    except OSError as exc:
        print(f"error: cannot read scenario: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "run":
            return cmd_run(config, args, out)
        if args.command == "compare":
            return cmd_compare(config, args, out)
        return cmd_sweep(config, args, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (AccountingError, ComparisonError, SimulationError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
