"""Policy-driven SDN programming over a simulated multi-region network."""
from .controller import Controller, ControllerMode, compile_rules, regions_of_flow
from .dataplane import CostConfig, FlowRule, SimNetwork, Trace
from .pathsel import AlgorithmRegistry, path_via, select_path, shortest_path
from .policy import NetworkFunction, Policy, PolicyStore, format_policy, parse_policy
from .selector import MatchFields, Packet, ProfileRegistry, TrafficProfile, build_selectors
from .topo import Topology, format_topology, gen_linear, gen_three_region, parse_topology

__all__ = [
    "AlgorithmRegistry", "Controller", "ControllerMode", "CostConfig", "FlowRule",
    "MatchFields", "NetworkFunction", "Packet", "Policy", "PolicyStore", "ProfileRegistry",
    "SimNetwork", "Topology", "Trace", "TrafficProfile", "build_selectors", "compile_rules",
    "format_policy", "format_topology", "gen_linear", "gen_three_region", "parse_policy",
    "parse_topology", "path_via", "regions_of_flow", "select_path", "shortest_path",
]
