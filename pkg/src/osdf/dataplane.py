"""Simulated switches: priority-ordered flow tables, table-miss PACKET_IN,
packet forwarding, and a virtual clock driven by a fixed cost model."""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

from .selector import MatchFields, Packet
from .topo import DeviceId, Host, Topology, normalize_mac

NO_POLICY = None
DROP_PRIORITY = 1


class DataplaneError(Exception):
    pass


@dataclass(frozen=True)
class Output:
    port: int

    def __str__(self):
        return f"output:{self.port}"


@dataclass(frozen=True)
class SetDstMac:
    mac: str

    def __post_init__(self):
        object.__setattr__(self, "mac", normalize_mac(self.mac))

    def __str__(self):
        return f"set_dst_mac:{self.mac}"


@dataclass(frozen=True)
class Drop:
    def __str__(self):
        return "drop"


Action = Union[Output, SetDstMac, Drop]


@dataclass(frozen=True)
class Cookie:
    policy: Optional[int]
    flow: int

    def __str__(self):
        return f"{'none' if self.policy is NO_POLICY else self.policy}/{self.flow}"


@dataclass(frozen=True)
class FlowRule:
    device: DeviceId
    priority: int
    match: MatchFields
    actions: tuple[Action, ...]
    cookie: Cookie

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))
        if self.priority < 1:
            raise DataplaneError("rule priority must be at least 1")
        acts = self.actions
        if acts == (Drop(),):
            return
        if (not acts or not isinstance(acts[-1], Output)
                or not all(isinstance(a, SetDstMac) for a in acts[:-1])):
            raise DataplaneError(
                "actions must be [drop] or rewrites followed by exactly one output")


class FlowTable:
    """Rules kept in (priority desc, install sequence asc) order."""

    def __init__(self):
        self._keys: list[tuple[int, int]] = []
        self._rules: list[FlowRule] = []

    def insert(self, rule: FlowRule, seq: int) -> None:
        key = (-rule.priority, seq)
        i = bisect.bisect(self._keys, key)
        self._keys.insert(i, key)
        self._rules.insert(i, rule)

    def lookup(self, pkt: Packet) -> Optional[FlowRule]:
        for rule in self._rules:
            if rule.match.matches(pkt):
                return rule
        return None

    def remove_if(self, pred: Callable[[FlowRule, int], bool]) -> int:
        keep = [(k, r) for k, r in zip(self._keys, self._rules) if not pred(r, k[1])]
        removed = len(self._rules) - len(keep)
        self._keys = [k for k, _ in keep]
        self._rules = [r for _, r in keep]
        return removed

    def entries(self) -> list[tuple[int, FlowRule]]:
        """``(install sequence, rule)`` pairs in table order."""
        return [(k[1], r) for k, r in zip(self._keys, self._rules)]

    def __len__(self):
        return len(self._rules)

    def __iter__(self):
        return iter(self._rules)


def lookup(table: FlowTable, pkt: Packet) -> Optional[FlowRule]:
    return table.lookup(pkt)


@dataclass(frozen=True)
class CostConfig:
    """Virtual microseconds charged per control-plane operation."""

    ctrl_rtt_us: int = 500
    rule_install_us: int = 50
    policy_parse_us: int = 100

    def __post_init__(self):
        for name in ("ctrl_rtt_us", "rule_install_us", "policy_parse_us"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


# -- trace events -----------------------------------------------------------

@dataclass(frozen=True)
class PacketIn:
    device: DeviceId

    def __str__(self):
        return f"PACKET_IN {self.device}"


@dataclass(frozen=True)
class RuleInstalled:
    rule: FlowRule

    def __str__(self):
        r = self.rule
        return (f"INSTALL {r.device} prio={r.priority} cookie={r.cookie} match={r.match} "
                f"actions=[{','.join(str(a) for a in r.actions)}]")


@dataclass(frozen=True)
class Delivered:
    host: str

    def __str__(self):
        return f"DELIVERED {self.host}"


@dataclass(frozen=True)
class Dropped:
    device: DeviceId
    reason: str

    def __str__(self):
        return f"DROPPED {self.device} {self.reason}"


Event = Union[PacketIn, RuleInstalled, Delivered, Dropped]


def _fmt_time(t) -> str:
    return str(int(t)) if float(t).is_integer() else repr(float(t))


def format_events(events) -> str:
    return "".join(f"{_fmt_time(t)} {ev}\n" for t, ev in events)


@dataclass
class Trace:
    events: list[tuple[float, Event]] = field(default_factory=list)

    @property
    def packet_in_count(self) -> int:
        return sum(isinstance(e, PacketIn) for _, e in self.events)

    @property
    def rules_installed(self) -> int:
        return sum(isinstance(e, RuleInstalled) for _, e in self.events)

    @property
    def response_time_us(self) -> float:
        """From the first PACKET_IN to the last rule installed (0 without a miss)."""
        first = next((t for t, e in self.events if isinstance(e, PacketIn)), None)
        if first is None:
            return 0
        last = max((t for t, e in self.events if isinstance(e, RuleInstalled)), default=first)
        return last - first

    @property
    def outcome(self) -> Optional[Event]:
        if self.events and isinstance(self.events[-1][1], (Delivered, Dropped)):
            return self.events[-1][1]
        return None

    @property
    def delivered(self) -> bool:
        return isinstance(self.outcome, Delivered)

    def dump(self) -> str:
        return format_events(self.events)


# The controller callback gets (net, device, in_port, packet) and returns None
# once it has installed rules, or a refusal reason.
PacketInHandler = Callable[["SimNetwork", DeviceId, int, Packet], Optional[str]]


class SimNetwork:
    """Switches of one topology plus the virtual clock.

    Not thread-safe; run independent instances for parallel trials.
    """

    def __init__(self, topology: Topology, costs: CostConfig = CostConfig(),
                 controller: Optional[PacketInHandler] = None):
        self.topology = topology
        self.costs = costs
        self.controller = controller
        self.tables = {d: FlowTable() for d in topology.devices}
        self.clock = 0
        self.log: list[tuple[float, Event]] = []
        self._seq = 0
        self._trace: Optional[Trace] = None

    def _emit(self, event: Event) -> None:
        entry = (self.clock, event)
        self.log.append(entry)
        if self._trace is not None:
            self._trace.events.append(entry)

    def charge(self, us: float) -> None:
        if us < 0:
            raise ValueError("time only moves forward")
        self.clock += us

    def install_rule(self, rule: FlowRule) -> int:
        dev = self.topology.devices.get(rule.device)
        if dev is None:
            raise DataplaneError(f"unknown device {rule.device!r}")
        for a in rule.actions:
            if isinstance(a, Output) and not 1 <= a.port <= dev.port_count:
                raise DataplaneError(f"{rule.device} has no port {a.port}")
        self._seq += 1
        self.tables[rule.device].insert(rule, self._seq)
        self.charge(self.costs.rule_install_us)
        self._emit(RuleInstalled(rule))
        return self._seq

    def remove_by_cookie(self, policy_id: Optional[int]) -> int:
        return sum(t.remove_if(lambda r, _: r.cookie.policy == policy_id)
                   for t in self.tables.values())

    def remove_rule(self, device: DeviceId, seq: int) -> bool:
        return self.tables[device].remove_if(lambda _, s: s == seq) == 1

    def rule_count(self) -> int:
        return sum(len(t) for t in self.tables.values())

    def inject_packet(self, src_host: Union[str, Host], pkt: Packet) -> Trace:
        """Send ``pkt`` from ``src_host`` and follow it until delivery or drop."""
        host = src_host if isinstance(src_host, Host) else self.topology.hosts[src_host]
        if pkt.src_ip != host.ip:
            raise DataplaneError(f"packet source {pkt.src_ip} is not {host.name}'s address")
        trace = self._trace = Trace()
        try:
            self._forward(host, pkt)
        finally:
            self._trace = None
        return trace

    def _forward(self, host: Host, pkt: Packet) -> None:
        device, in_port = host.attach
        max_hops = 4 * len(self.topology.devices)
        hops = 0
        while True:
            hops += 1
            if hops > max_hops:
                self._emit(Dropped(device, "loop"))
                return
            rule = self.tables[device].lookup(pkt)
            if rule is None:
                self._emit(PacketIn(device))
                self.charge(self.costs.ctrl_rtt_us)
                refusal = (self.controller(self, device, in_port, pkt)
                           if self.controller else "no-controller")
                if refusal is not None:
                    self._emit(Dropped(device, refusal))
                    return
                rule = self.tables[device].lookup(pkt)
                if rule is None:
                    self._emit(Dropped(device, "table-miss"))
                    return
            out = None
            for action in rule.actions:
                if isinstance(action, Drop):
                    self._emit(Dropped(device, "drop-rule"))
                    return
                if isinstance(action, SetDstMac):
                    pkt = replace(pkt, dst_mac=action.mac)
                else:
                    out = action.port
            dst = self.topology.host_at(device, out)
            if dst is not None:
                if dst.mac == pkt.dst_mac:
                    self._emit(Delivered(dst.name))
                else:
                    self._emit(Dropped(device, "mac-mismatch"))
                return
            peer = self.topology.peer(device, out)
            if peer is None:
                self._emit(Dropped(device, "dead-port"))
                return
            device, in_port = peer


def inject_packet(net: SimNetwork, src_host, pkt: Packet) -> Trace:
    return net.inject_packet(src_host, pkt)
