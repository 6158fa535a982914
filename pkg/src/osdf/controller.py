"""Packet processors for Intra-Site-Route and Inter-Site-Route, the rule
compiler, and the per-switch reactive forwarding baseline.

In OSDF mode the first PACKET_IN of a flow installs every rule the flow needs
along its whole path, in both directions when the policy is bidirectional.
The baseline installs one rule at the reporting switch per PACKET_IN.
"""
from __future__ import annotations

import enum
import itertools
import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional

from .dataplane import (
    DROP_PRIORITY, NO_POLICY, Cookie, Drop, FlowRule, Output, SetDstMac, SimNetwork,
)
from .pathsel import AlgorithmRegistry, Path, PathError, select_path, shortest_path
from .policy import DEFAULT_PRIORITY, NetworkFunction, Policy, PolicyStore
from .selector import MatchFields, Packet, ProfileRegistry, build_selectors
from .topo import DeviceId, Topology

log = logging.getLogger(__name__)


class ControllerMode(enum.Enum):
    OSDF = "osdf"
    REACTIVE = "reactive"


class CompileError(Exception):
    pass


@dataclass(frozen=True)
class FlowContext:
    packet: Packet
    profile: str
    src_region: str
    dst_region: str
    flow_id: int
    policy: Optional[Policy] = None
    path: Optional[Path] = None
    src_mac: Optional[str] = None   # MAC of the sending host
    dst_mac: Optional[str] = None   # MAC of the receiving host
    forward: Optional[MatchFields] = None
    reverse: Optional[MatchFields] = None


@dataclass(frozen=True)
class SetupOutcome:
    flow_id: int
    device: DeviceId
    policy_id: Optional[int] = None
    path: tuple[DeviceId, ...] = ()
    rules: int = 0
    refused: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.refused is None


def regions_of_flow(t: Topology, pkt: Packet) -> Optional[tuple[str, str]]:
    src, dst = t.region_of_ip(pkt.src_ip), t.region_of_ip(pkt.dst_ip)
    if src is None or dst is None:
        return None
    return src, dst


def function_for(src_region: str, dst_region: str) -> NetworkFunction:
    if src_region == dst_region:
        return NetworkFunction.INTRA_SITE_ROUTE
    return NetworkFunction.INTER_SITE_ROUTE


def _direction_rules(path: Path, match: MatchFields, rewrite_mac: Optional[str],
                     priority: int, cookie: Cookie) -> list[FlowRule]:
    rules = []
    for i, hop in enumerate(path.hops):
        actions = [Output(hop.out_port)]
        if rewrite_mac is not None and i == len(path.hops) - 1:
            actions.insert(0, SetDstMac(rewrite_mac))
        rules.append(FlowRule(hop.device, priority, match, tuple(actions), cookie))
    # egress switch first so no switch forwards into an unprogrammed one
    rules.reverse()
    return rules


def compile_rules(ctx: FlowContext) -> list[FlowRule]:
    """Flow rules for ``ctx`` in installation order."""
    p, path = ctx.policy, ctx.path
    if p is None or path is None:
        raise CompileError("flow has no policy or path")
    if path.loops:
        raise CompileError(f"refusing looping path {path.devices}")
    inter = ctx.src_region != ctx.dst_region
    cookie = Cookie(p.id, ctx.flow_id)
    rules = _direction_rules(path, ctx.forward, ctx.dst_mac if inter else None,
                             p.priority, cookie)
    if p.bidirectional:
        rules += _direction_rules(path.reversed(), ctx.reverse,
                                  ctx.src_mac if inter else None, p.priority, cookie)
    return rules


class Controller:
    """Controller state for one SimNetwork: policy store, rule ledger, flow ids."""

    def __init__(self, topology: Topology, store: Optional[PolicyStore] = None,
                 mode: ControllerMode = ControllerMode.OSDF,
                 algorithms: Optional[AlgorithmRegistry] = None):
        self.topology = topology
        self.store = store if store is not None else PolicyStore()
        self.mode = ControllerMode(mode)
        self.algorithms = algorithms or AlgorithmRegistry()
        # policy id (NO_POLICY for drop/baseline rules) -> {(device, install seq)}
        self.ledger: dict[Optional[int], set[tuple[DeviceId, int]]] = defaultdict(set)
        self._drop_rules: set[tuple[DeviceId, int]] = set()
        self._flow_ids = itertools.count(1)
        self.outcomes: list[SetupOutcome] = []

    @property
    def profiles(self) -> ProfileRegistry:
        return self.store.profiles

    def attach(self, net: SimNetwork) -> SimNetwork:
        net.controller = self.on_packet_in
        return net

    def on_packet_in(self, net: SimNetwork, device: DeviceId, in_port: int,
                     pkt: Packet) -> Optional[str]:
        if self.mode is ControllerMode.OSDF:
            outcome = self.handle_packet_in_osdf(net, device, pkt)
        else:
            outcome = self.handle_packet_in_reactive(net, device, pkt)
        self.outcomes.append(outcome)
        log.debug("flow %s at %s: %s", outcome.flow_id, device, outcome)
        return outcome.refused

    def _install(self, net: SimNetwork, rule: FlowRule) -> int:
        seq = net.install_rule(rule)
        self.ledger[rule.cookie.policy].add((rule.device, seq))
        return seq

    def _refuse(self, net: SimNetwork, device: DeviceId, flow_id: int, reason: str,
                match: Optional[MatchFields] = None) -> SetupOutcome:
        if match is not None:
            seq = self._install(net, FlowRule(device, DROP_PRIORITY, match, (Drop(),),
                                              Cookie(NO_POLICY, flow_id)))
            self._drop_rules.add((device, seq))
        return SetupOutcome(flow_id, device, rules=int(match is not None), refused=reason)

    def handle_packet_in_osdf(self, net: SimNetwork, device: DeviceId,
                              pkt: Packet) -> SetupOutcome:
        flow_id = next(self._flow_ids)
        t = self.topology
        profile_name = self.profiles.classify(pkt)
        forward, reverse = build_selectors(self.profiles.get(profile_name), pkt)
        regions = regions_of_flow(t, pkt)
        if regions is None:
            return self._refuse(net, device, flow_id, "no-region", forward)
        src_region, dst_region = regions
        matched = self.store.match(function_for(src_region, dst_region),
                                   src_region, dst_region, profile_name)
        if not matched:
            return self._refuse(net, device, flow_id, "no-policy", forward)
        policy = matched[0]
        net.charge(net.costs.policy_parse_us)

        src_host, dst_host = t.host_by_ip(pkt.src_ip), t.host_by_ip(pkt.dst_ip)
        if src_host is None or dst_host is None:
            return self._refuse(net, device, flow_id, "no-host")
        try:
            path = select_path(self.algorithms, t, policy,
                               src_host.attach[0], dst_host.attach[0],
                               src_port=src_host.attach[1], dst_port=dst_host.attach[1])
        except PathError:
            return self._refuse(net, device, flow_id, "no-path")
        ctx = FlowContext(pkt, profile_name, src_region, dst_region, flow_id, policy, path,
                          src_host.mac, dst_host.mac, forward, reverse)
        try:
            rules = compile_rules(ctx)
        except CompileError:
            return self._refuse(net, device, flow_id, "looping-path")
        for rule in rules:
            self._install(net, rule)
        return SetupOutcome(flow_id, device, policy.id, tuple(path.devices), len(rules))

    def handle_packet_in_reactive(self, net: SimNetwork, device: DeviceId,
                                  pkt: Packet) -> SetupOutcome:
        flow_id = next(self._flow_ids)
        t = self.topology
        dst_host = t.host_by_ip(pkt.dst_ip)
        if dst_host is None:
            return self._refuse(net, device, flow_id, "unknown-destination")
        try:
            path = shortest_path(t, device, dst_host.attach[0], dst_port=dst_host.attach[1])
        except PathError:
            return self._refuse(net, device, flow_id, "no-path")
        forward, _ = build_selectors(self.profiles.get(self.profiles.classify(pkt)), pkt)
        hop = path.hops[0]
        actions = [Output(hop.out_port)]
        if len(path) == 1 and pkt.dst_mac != dst_host.mac:
            actions.insert(0, SetDstMac(dst_host.mac))
        self._install(net, FlowRule(device, DEFAULT_PRIORITY, forward, tuple(actions),
                                    Cookie(NO_POLICY, flow_id)))
        return SetupOutcome(flow_id, device, None, tuple(path.devices), 1)

    def purge_policy_rules(self, net: SimNetwork, policy_id: int) -> int:
        removed = net.remove_by_cookie(policy_id)
        self.ledger.pop(policy_id, None)
        return removed

    def add_policy(self, net: Optional[SimNetwork], policy: Policy) -> int:
        """Store ``policy`` and lift earlier no-policy drop rules so that
        refused flows get another chance."""
        pid = self.store.add(policy, self.topology)
        if net is not None:
            for device, seq in self._drop_rules:
                net.remove_rule(device, seq)
                self.ledger[NO_POLICY].discard((device, seq))
            self._drop_rules.clear()
        return pid

    def remove_policy(self, net: Optional[SimNetwork], policy_id: int) -> tuple[Policy, int]:
        policy = self.store.remove(policy_id)
        removed = self.purge_policy_rules(net, policy_id) if net is not None else 0
        return policy, removed


def format_outcome(outcome: SetupOutcome, packet_ins: int, t_us) -> str:
    pol = "none" if outcome.policy_id is None else outcome.policy_id
    t = int(t_us) if float(t_us).is_integer() else t_us
    line = (f"flow={outcome.flow_id} policy={pol} path=[{','.join(outcome.path)}] "
            f"rules={outcome.rules} packet_ins={packet_ins} t_us={t}")
    if outcome.refused:
        line += f" refused={outcome.refused}"
    return line
