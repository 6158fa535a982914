"""Operator CLI and the response-time vs path-length benchmark.

Usage::

    osdf <command ...>          run one command on a fresh session
    osdf batch <script>         run a file of commands, one per line
    osdf repl                   read commands from stdin

Commands::

    topo load <file> | topo linear <n> | topo three-region
    policy add "<line>" | policy list | policy remove <id>
    profile add "<line>"
    mode <osdf|reactive>
    inject --src <host> --dst <host> --app <profile> [--dport <p>]
    stats
    trace dump <file>
    bench --mode <osdf|reactive|both> [--min-len 2] --max-len <n> --trials <t> [--out <csv>]
"""
from __future__ import annotations

import argparse
import csv
import io
import shlex
import statistics
import sys
import time
from dataclasses import dataclass
from pathlib import Path as FilePath
from typing import Optional, TextIO

from .controller import Controller, ControllerMode, format_outcome
from .dataplane import CostConfig, PacketIn, RuleInstalled, SimNetwork, Trace, format_events
from .policy import NetworkFunction, Policy, PolicyError, PolicyStore, format_policy, parse_policy
from .selector import ICMP, TCP, Packet, ProfileRegistry, SelectorError, parse_profile
from .topo import Host, Topology, TopologyError, gen_linear, gen_three_region, parse_topology

CSV_HEADER = ["n", "mode", "response_time_us", "packet_in_count", "trials"]
DEFAULT_PORT = 9000


class CliError(Exception):
    pass


def _num(x) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def packet_for(profiles: ProfileRegistry, topology: Topology, src: Host, dst: Host,
               app: str, dport: Optional[int] = None) -> Packet:
    """A packet from ``src`` to ``dst`` that classifies as profile ``app``.

    Cross-region packets are addressed to the gateway MAC, as a host would.
    """
    profile = profiles.get(app)
    proto = profile.ip_proto if profile.ip_proto is not None else TCP
    if proto == ICMP:
        ports = (None, None)
    else:
        if dport is None:
            dport = profile.ports[0][0] if profile.ports else DEFAULT_PORT
        ports = (49152, dport)
    same = topology.region_of_ip(src.ip) == topology.region_of_ip(dst.ip)
    pkt = Packet(src.mac, dst.mac if same else topology.gateway_mac, src.ip, dst.ip,
                 proto, *ports)
    got = profiles.classify(pkt)
    if got != app:
        raise CliError(f"packet built for {app!r} classifies as {got!r}")
    return pkt


# -- benchmark --------------------------------------------------------------

@dataclass(frozen=True)
class BenchRow:
    n: int
    mode: ControllerMode
    response_time_us: float
    packet_in_count: int
    trials: int
    wall_time_us: Optional[float] = None


def run_trial(mode: ControllerMode, n: int, costs: CostConfig) -> tuple[Trace, float]:
    """One fresh linear(n) network, one h1->h2 flow. Returns the trace and
    the host wall-clock time of the injection in microseconds."""
    topo = gen_linear(n)
    ctrl = Controller(topo, mode=mode)
    if mode is ControllerMode.OSDF:
        ctrl.add_policy(None, Policy(NetworkFunction.INTRA_SITE_ROUTE, "any",
                                     regions=frozenset({"R"})))
    net = ctrl.attach(SimNetwork(topo, costs))
    h1, h2 = topo.hosts["h1"], topo.hosts["h2"]
    pkt = packet_for(ctrl.profiles, topo, h1, h2, "any")
    start = time.perf_counter()
    trace = net.inject_packet(h1, pkt)
    wall = (time.perf_counter() - start) * 1e6
    if not trace.delivered:
        raise RuntimeError(f"benchmark flow not delivered: {trace.outcome}")
    return trace, wall


def bench_response_time(mode: ControllerMode, n_min: int, n_max: int, trials: int,
                        costs: CostConfig = CostConfig(),
                        wall_clock: bool = False) -> list[BenchRow]:
    if not 1 <= n_min <= n_max:
        raise ValueError(f"invalid path length range [{n_min}, {n_max}]")
    if trials < 1:
        raise ValueError("need at least one trial")
    mode = ControllerMode(mode)
    rows = []
    for n in range(n_min, n_max + 1):
        results = [run_trial(mode, n, costs) for _ in range(trials)]
        counts = {tr.packet_in_count for tr, _ in results}
        assert len(counts) == 1, f"PACKET_IN count varied across trials: {counts}"
        rows.append(BenchRow(
            n, mode,
            statistics.fmean(tr.response_time_us for tr, _ in results),
            counts.pop(), trials,
            statistics.fmean(w for _, w in results) if wall_clock else None,
        ))
    return rows


def write_bench_csv(rows: list[BenchRow], out: TextIO, wall_clock: bool = False) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER + (["wall_time_us"] if wall_clock else []))
    for r in rows:
        line = [r.n, r.mode.value, _num(r.response_time_us), r.packet_in_count, r.trials]
        if wall_clock:
            line.append(f"{r.wall_time_us:.1f}")
        w.writerow(line)


# -- session ----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"{self.prog}: {message}\n{self.format_usage().strip()}")


def _inject_parser():
    p = _Parser(prog="inject", add_help=False)
    p.add_argument("--src", required=True)
    p.add_argument("--dst", required=True)
    p.add_argument("--app", required=True)
    p.add_argument("--dport", type=int)
    return p


def _bench_parser():
    p = _Parser(prog="bench", add_help=False)
    p.add_argument("--mode", required=True, choices=["osdf", "reactive", "both"])
    p.add_argument("--min-len", type=int, default=2)
    p.add_argument("--max-len", type=int, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--wall-clock", action="store_true")
    return p


class Session:
    """State shared by the commands of one REPL or batch run."""

    def __init__(self, out: TextIO = sys.stdout, costs: CostConfig = CostConfig()):
        self.out = out
        self.costs = costs
        self.profiles = ProfileRegistry()
        self.mode = ControllerMode.OSDF
        self.topology: Optional[Topology] = None
        self.store = PolicyStore(self.profiles)
        self.controller: Optional[Controller] = None
        self.net: Optional[SimNetwork] = None
        self.last_trace: Optional[Trace] = None
        self.injected = 0
        self.delivered = 0

    def say(self, msg: str) -> None:
        print(msg, file=self.out)

    def _reset_network(self) -> None:
        self.controller = Controller(self.topology, self.store, self.mode)
        self.net = self.controller.attach(SimNetwork(self.topology, self.costs))
        self.last_trace = None
        self.injected = self.delivered = 0

    def set_topology(self, topology: Topology) -> None:
        self.topology = topology
        self.store = PolicyStore(self.profiles)
        self._reset_network()

    def _need_topology(self) -> None:
        if self.topology is None:
            raise CliError("no topology loaded (use 'topo ...' first)")

    def execute(self, line: str) -> None:
        try:
            argv = shlex.split(line, comments=True)
        except ValueError as e:
            raise CliError(str(e)) from None
        if argv:
            self.run(argv)

    def run(self, argv: list[str]) -> None:
        cmd, args = argv[0], argv[1:]
        handler = getattr(self, f"cmd_{cmd.replace('-', '_')}", None)
        if handler is None:
            raise CliError(f"unknown command {cmd!r}")
        try:
            handler(args)
        except (TopologyError, PolicyError, SelectorError) as e:
            raise CliError(str(e)) from None

    def cmd_topo(self, args):
        match args:
            case ["load", path]:
                try:
                    text = FilePath(path).read_text()
                except OSError as e:
                    raise CliError(str(e)) from None
                self.set_topology(parse_topology(text))
            case ["linear", n] if n.isdigit():
                self.set_topology(gen_linear(int(n)))
            case ["three-region"]:
                self.set_topology(gen_three_region())
            case _:
                raise CliError("usage: topo load <file> | topo linear <n> | topo three-region")
        t = self.topology
        self.say(f"topology: {len(t.devices)} devices, {len(t.links)} links, "
                 f"{len(t.hosts)} hosts, regions {','.join(sorted(t.regions))}")

    def cmd_policy(self, args):
        match args:
            case ["add", line]:
                self._need_topology()
                pid = self.controller.add_policy(self.net, parse_policy(line))
                self.say(f"policy {pid} added")
            case ["list"]:
                for p in self.store:
                    self.say(f"{p.id}: {format_policy(p)}")
            case ["remove", pid] if pid.isdigit():
                self._need_topology()
                _, removed = self.controller.remove_policy(self.net, int(pid))
                self.say(f"policy {pid} removed, {removed} rules purged")
            case _:
                raise CliError('usage: policy add "<line>" | policy list | policy remove <id>')

    def cmd_profile(self, args):
        match args:
            case ["add", line]:
                profile = parse_profile(line)
                self.profiles.register(profile)
                self.say(f"profile {profile.name} added")
            case _:
                raise CliError('usage: profile add "<line>"')

    def cmd_mode(self, args):
        match args:
            case [("osdf" | "reactive") as m]:
                self.mode = ControllerMode(m)
                if self.topology is not None:
                    self._reset_network()
                self.say(f"mode {m}")
            case _:
                raise CliError("usage: mode <osdf|reactive>")

    def cmd_inject(self, args):
        self._need_topology()
        ns = _inject_parser().parse_args(args)
        hosts = self.topology.hosts
        for name in (ns.src, ns.dst):
            if name not in hosts:
                raise CliError(f"unknown host {name!r}")
        src, dst = hosts[ns.src], hosts[ns.dst]
        pkt = packet_for(self.profiles, self.topology, src, dst, ns.app, ns.dport)
        n_outcomes = len(self.controller.outcomes)
        trace = self.net.inject_packet(src, pkt)
        self.last_trace = trace
        self.injected += 1
        self.delivered += trace.delivered
        for outcome in self.controller.outcomes[n_outcomes:]:
            self.say(format_outcome(outcome, trace.packet_in_count, trace.response_time_us))
        self.say(str(trace.outcome))

    def cmd_stats(self, args):
        if args:
            raise CliError("usage: stats")
        self._need_topology()
        log = self.net.log
        self.say(f"packets injected: {self.injected}, delivered: {self.delivered}")
        self.say(f"PACKET_IN total: {sum(isinstance(e, PacketIn) for _, e in log)}")
        self.say(f"rules installed total: "
                 f"{sum(isinstance(e, RuleInstalled) for _, e in log)}, "
                 f"in tables: {self.net.rule_count()}")
        self.say(f"virtual clock: {_num(self.net.clock)} us")
        if self.last_trace is not None:
            tr = self.last_trace
            self.say(f"last packet: {tr.outcome}, PACKET_IN {tr.packet_in_count}, "
                     f"rules {tr.rules_installed}, response {_num(tr.response_time_us)} us")

    def cmd_trace(self, args):
        match args:
            case ["dump", path]:
                self._need_topology()
                FilePath(path).write_text(format_events(self.net.log))
                self.say(f"{len(self.net.log)} events written to {path}")
            case _:
                raise CliError("usage: trace dump <file>")

    def cmd_bench(self, args):
        ns = _bench_parser().parse_args(args)
        modes = (["osdf", "reactive"] if ns.mode == "both" else [ns.mode])
        try:
            rows = [r for m in modes
                    for r in bench_response_time(ControllerMode(m), ns.min_len, ns.max_len,
                                                 ns.trials, self.costs, ns.wall_clock)]
        except ValueError as e:
            raise CliError(str(e)) from None
        if ns.out:
            with open(ns.out, "w", newline="") as f:
                write_bench_csv(rows, f, ns.wall_clock)
            self.say(f"{len(rows)} rows written to {ns.out}")
        else:
            buf = io.StringIO()
            write_bench_csv(rows, buf, ns.wall_clock)
            self.out.write(buf.getvalue())

    def cmd_help(self, args):
        self.say(__doc__.strip())


def _run_lines(session: Session, lines, stop_on_error: bool) -> int:
    status = 0
    for lineno, line in enumerate(lines, start=1):
        try:
            session.execute(line)
        except CliError as e:
            print(f"error (line {lineno}): {e}", file=sys.stderr)
            status = 1
            if stop_on_error:
                break
    return status


def run_cli(argv: Optional[list[str]] = None, out: TextIO = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    session = Session(out or sys.stdout)
    if not argv or argv[0] in ("-h", "--help"):
        session.cmd_help([])
        return 0 if argv else 2
    if argv[0] == "batch":
        if len(argv) != 2:
            print("usage: osdf batch <script>", file=sys.stderr)
            return 2
        try:
            lines = FilePath(argv[1]).read_text().splitlines()
        except OSError as e:
            print(f"error: {e}", file=sys.stderr)
            return 1
        return _run_lines(session, lines, stop_on_error=True)
    if argv[0] == "repl":
        status = 0
        prompt = sys.stdin.isatty()
        if prompt:
            print("osdf> ", end="", flush=True)
        for line in sys.stdin:
            if line.strip() in ("quit", "exit"):
                break
            status |= _run_lines(session, [line], stop_on_error=False)
            if prompt:
                print("osdf> ", end="", flush=True)
        return status
    try:
        session.run(argv)
    except CliError as e:
        print(f"error: {e}\n\n{__doc__.strip()}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run_cli())
