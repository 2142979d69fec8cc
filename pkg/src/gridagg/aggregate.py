"""Copperplate network aggregation under a partition mapping.

Each cluster collapses into one bus placed at the unweighted centroid of
its members.  Generators and loads are reattached to the cluster bus,
branches inside a cluster are dropped, and parallel branches between a
cluster pair merge into a single equivalent branch (capacities summed,
reactances combined in parallel, lengths and cost rates capacity
weighted).

In VA mode the per-level structure survives: a merged branch between
clusters of different voltage levels is emitted as a transformer.  In VU
mode the output is a uniform single-level network; every merged branch
becomes a line and transformers disappear, either absorbed inside
clusters or relabelled.
"""

import csv
from dataclasses import dataclass

from .model import (Bus, Generator, Line, Load, Network, Transformer,
                    per_unit_reactance)
from .partition import VA, PartitionMapping


@dataclass(frozen=True)
class AggregationReport:
    cluster_count: int
    line_count: int
    transformer_count: int
    dropped_intra_count: int
    dropped_candidate_count: int
    candidate_carryover_count: int


def merge_parallel(branches):
    """Merge parallel branches of one kind between a single cluster pair.

    s_nom is summed, reactances combine as 1/x = sum(1/x_i), lengths and
    cost rates are capacity-weighted averages, and the result is
    expandable if any member is.  A single branch merges to itself.
    """
    if not branches:
        raise ValueError("cannot merge an empty branch list")
    if len(branches) == 1:
        return branches[0]
    kinds = {type(b) for b in branches}
    if len(kinds) != 1:
        raise ValueError("merge_parallel requires branches of one kind")

    s = sum(b.s_nom for b in branches)
    x = 1.0 / sum(1.0 / b.x for b in branches)
    expandable = any(b.expandable for b in branches)
    first = branches[0]
    if isinstance(first, Transformer):
        cost = sum(b.s_nom * b.cost_per_mva for b in branches) / s
        return Transformer(first.id, first.bus_hv, first.bus_lv, s, x, cost, expandable)
    length = sum(b.s_nom * b.length_km for b in branches) / s
    cost = sum(b.s_nom * b.cost_per_mva_km for b in branches) / s
    return Line(first.id, first.bus_from, first.bus_to, first.voltage_kv,
                s, x, length, cost, expandable)


def _dominant_voltage(network: Network) -> float:
    """Network-wide dominant voltage level, weighted by incident branch capacity."""
    weight = {level: 0.0 for level in network.voltage_levels}
    voltage = {b.id: b.voltage_kv for b in network.buses}
    for br in network.branches:
        for end in network.branch_endpoints(br):
            weight[voltage[end]] += br.s_nom
    # ties (including the no-branch case) go to the higher level
    return max(sorted(weight), key=lambda v: (weight[v], v))


def _merge_uniform(members, network: Network, uniform_kv: float):
    """VU merge across possibly different voltage bases.

    Reactances are paralleled in per unit (each member on its own voltage
    base) and the result is expressed in ohm at the uniform level.
    Transformers contribute zero length; the cost rate averages over line
    members only, since transformer costs carry no per-km rate.
    """
    s = sum(b.s_nom for b in members)
    inv_x_pu = sum(1.0 / per_unit_reactance(b.x, network.branch_voltage_kv(b), network.s_base)
                   for b in members)
    x_ohm = (1.0 / inv_x_pu) * uniform_kv**2 / network.s_base
    length = sum(b.s_nom * getattr(b, "length_km", 0.0) for b in members) / s
    line_members = [b for b in members if isinstance(b, Line)]
    if line_members:
        s_lines = sum(b.s_nom for b in line_members)
        cost = sum(b.s_nom * b.cost_per_mva_km for b in line_members) / s_lines
    else:
        cost = 0.0
    expandable = any(b.expandable for b in members)
    return s, x_ohm, length, cost, expandable


def aggregate_network(network: Network, mapping: PartitionMapping):
    """Aggregate a network under a partition mapping.

    Returns the aggregated :class:`Network` and an
    :class:`AggregationReport` with the resulting element counts.
    """
    bus_ids = {b.id for b in network.buses}
    mapped = set(mapping.assignment)
    if mapped != bus_ids:
        missing = sorted(bus_ids - mapped)[:5]
        extra = sorted(mapped - bus_ids)[:5]
        raise ValueError(f"mapping does not cover the network (missing {missing}, extra {extra})")

    clusters = mapping.clusters
    cluster_ids = sorted(clusters)
    assign = mapping.assignment
    va = mapping.mode == VA
    uniform_kv = None if va else _dominant_voltage(network)

    def cluster_kv(cl):
        return mapping.cluster_voltage[cl] if va else uniform_kv

    buses = []
    for cl in cluster_ids:
        members = [network.bus(b) for b in clusters[cl]]
        buses.append(Bus(cl,
                         cluster_kv(cl),
                         sum(b.lat for b in members) / len(members),
                         sum(b.lon for b in members) / len(members)))

    # group branches by unordered cluster pair, drop intra-cluster ones
    groups = {}
    dropped = dropped_candidates = 0
    for br in network.branches:
        a, b = (assign[e] for e in network.branch_endpoints(br))
        if a == b:
            dropped += 1
            dropped_candidates += int(br.expandable)
            continue
        groups.setdefault((min(a, b), max(a, b)), []).append(br)

    lines, transformers = [], []
    for (ca, cb), members in sorted(groups.items()):
        name = f"{ca}--{cb}"
        if va:
            kv_a, kv_b = cluster_kv(ca), cluster_kv(cb)
            if kv_a == kv_b:
                # same-level pairs are connected only by lines under a valid VA mapping
                merged = merge_parallel(members)
                lines.append(Line(name, ca, cb, kv_a, merged.s_nom, merged.x,
                                  merged.length_km, merged.cost_per_mva_km,
                                  merged.expandable))
            else:
                merged = merge_parallel(members)
                hv, lv = (ca, cb) if kv_a > kv_b else (cb, ca)
                transformers.append(Transformer(name, hv, lv, merged.s_nom,
                                                merged.x, merged.cost_per_mva,
                                                merged.expandable))
        else:
            s, x_ohm, length, cost, expandable = _merge_uniform(members, network, uniform_kv)
            lines.append(Line(name, ca, cb, uniform_kv, s, x_ohm, length, cost, expandable))

    # generators: sum p_nom per (cluster, marginal cost), capacity-weighted profiles
    gen_groups = {}
    for g in network.generators:
        gen_groups.setdefault((assign[g.bus], g.marginal_cost), []).append(g)
    generators = []
    for cl in cluster_ids:
        costs = sorted(mc for (c, mc) in gen_groups if c == cl)
        for rank, mc in enumerate(costs):
            members = gen_groups[(cl, mc)]
            p_nom = sum(g.p_nom for g in members)
            if all(not g.profile for g in members):
                profile = ()
            else:
                n_t = len(network.snapshots)
                acc = [0.0] * n_t
                for g in members:
                    prof = g.profile if g.profile else (1.0,) * n_t
                    w = g.p_nom if p_nom > 0 else 1.0
                    for t in range(n_t):
                        acc[t] += w * prof[t]
                denom = p_nom if p_nom > 0 else len(members)
                profile = tuple(v / denom for v in acc)
            generators.append(Generator(f"{cl}_g{rank}", cl, p_nom, mc, profile))

    # loads: one summed load per cluster that has any
    load_groups = {}
    for ld in network.loads:
        load_groups.setdefault(assign[ld.bus], []).append(ld)
    loads = []
    for cl in cluster_ids:
        if cl not in load_groups:
            continue
        members = load_groups[cl]
        profile = tuple(sum(vals) for vals in zip(*(ld.profile for ld in members)))
        loads.append(Load(f"{cl}_load", cl, profile))

    voltage_levels = frozenset(b.voltage_kv for b in buses)
    agg = Network(tuple(buses), tuple(lines), tuple(transformers),
                  tuple(generators), tuple(loads), network.snapshots,
                  network.s_base, voltage_levels)
    carryover = sum(1 for br in agg.branches if br.expandable)
    report = AggregationReport(len(cluster_ids), len(lines), len(transformers),
                               dropped, dropped_candidates, carryover)
    return agg, report


def save_report(report: AggregationReport, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["cluster_count", "line_count", "transformer_count",
                    "dropped_intra_count", "dropped_candidate_count",
                    "candidate_carryover_count"])
        w.writerow([report.cluster_count, report.line_count, report.transformer_count,
                    report.dropped_intra_count, report.dropped_candidate_count,
                    report.candidate_carryover_count])
