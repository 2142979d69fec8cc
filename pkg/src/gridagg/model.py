"""Core network data model: buses, branches, devices, snapshots.

A :class:`Network` is the single source of truth handed between all
stages (ingest, temporal clustering, partitioning, aggregation, dispatch
and expansion planning).  Networks are treated as immutable after
construction; every transformation returns a new instance.
"""

from dataclasses import dataclass, field, replace
from typing import Optional

import networkx as nx
import numpy as np

DEFAULT_S_BASE_MVA = 100.0


@dataclass(frozen=True)
class Bus:
    id: str
    voltage_kv: float
    lat: float
    lon: float


@dataclass(frozen=True)
class Line:
    id: str
    bus_from: str
    bus_to: str
    voltage_kv: float
    s_nom: float            # MVA
    x: float                # ohm
    length_km: float
    cost_per_mva_km: float  # EUR/(MVA km)
    expandable: bool = False


@dataclass(frozen=True)
class Transformer:
    """Two-winding transformer between voltage levels.

    Reactance is given in ohm referred to the high-voltage winding; any
    winding-side conversion happens upstream of the model.
    """

    id: str
    bus_hv: str
    bus_lv: str
    s_nom: float        # MVA
    x: float            # ohm, HV side
    cost_per_mva: float  # EUR/MVA
    expandable: bool = False


@dataclass(frozen=True)
class Generator:
    id: str
    bus: str
    p_nom: float          # MW
    marginal_cost: float  # EUR/MWh
    profile: tuple = ()   # per-snapshot capacity factor; empty = constant 1


@dataclass(frozen=True)
class Load:
    id: str
    bus: str
    profile: tuple = ()  # per-snapshot demand in MW


@dataclass(frozen=True)
class SnapshotSet:
    labels: tuple
    weights: tuple  # hours represented by each snapshot

    def __len__(self):
        return len(self.labels)

    @property
    def horizon_hours(self) -> float:
        return float(sum(self.weights))


@dataclass(frozen=True)
class Violation:
    element: str
    rule: str
    message: str


@dataclass(frozen=True)
class Network:
    buses: tuple
    lines: tuple
    transformers: tuple
    generators: tuple
    loads: tuple
    snapshots: SnapshotSet
    s_base: float = DEFAULT_S_BASE_MVA
    voltage_levels: frozenset = field(default=None)

    def __post_init__(self):
        if self.voltage_levels is None:
            levels = frozenset(b.voltage_kv for b in self.buses)
            object.__setattr__(self, "voltage_levels", levels)

    # -- lookups -----------------------------------------------------------

    def bus(self, bus_id: str) -> Bus:
        return self._bus_index()[bus_id]

    def _bus_index(self):
        idx = getattr(self, "_bus_idx", None)
        if idx is None:
            idx = {b.id: b for b in self.buses}
            object.__setattr__(self, "_bus_idx", idx)
        return idx

    @property
    def branches(self) -> tuple:
        """Lines and transformers in declaration order."""
        return self.lines + self.transformers

    def branch_endpoints(self, branch) -> tuple:
        if isinstance(branch, Transformer):
            return branch.bus_hv, branch.bus_lv
        return branch.bus_from, branch.bus_to

    def branch_voltage_kv(self, branch) -> float:
        """Voltage level used for per-unit conversion (HV side for transformers)."""
        if isinstance(branch, Transformer):
            return self.bus(branch.bus_hv).voltage_kv
        return branch.voltage_kv

    def with_(self, **changes) -> "Network":
        """Copy with selected fields replaced."""
        return replace(self, **changes)


def per_unit_reactance(x_ohm: float, voltage_kv: float, s_base: float) -> float:
    """Convert a reactance in ohm to per unit on ``s_base``.

    x_pu = x_ohm * s_base / voltage_kv**2
    """
    if voltage_kv <= 0 or s_base <= 0:
        raise ValueError(
            f"voltage_kv and s_base must be positive, got {voltage_kv}, {s_base}"
        )
    return x_ohm * s_base / voltage_kv**2


def branch_x_pu(network: Network, branch) -> float:
    """Per-unit reactance of a line or transformer on the network base."""
    return per_unit_reactance(branch.x, network.branch_voltage_kv(branch), network.s_base)


def validate(network: Network) -> list:
    """Check all element invariants and cross references.

    Returns a list of :class:`Violation`; an empty list means the network
    is well formed.  Violations are data, not exceptions.
    """
    out = []
    bus_ids = {}
    n_snap = len(network.snapshots)

    for b in network.buses:
        if b.id in bus_ids:
            out.append(Violation(b.id, "duplicate-bus-id", f"bus id {b.id!r} not unique"))
        bus_ids[b.id] = b
        if b.voltage_kv <= 0:
            out.append(Violation(b.id, "bus-voltage-positive", f"voltage {b.voltage_kv} kV"))
        elif b.voltage_kv not in network.voltage_levels:
            out.append(Violation(
                b.id, "bus-voltage-level",
                f"voltage {b.voltage_kv} kV not in declared levels {sorted(network.voltage_levels)}"))
        if not -90.0 <= b.lat <= 90.0:
            out.append(Violation(b.id, "bus-lat-range", f"lat {b.lat}"))
        if not -180.0 <= b.lon <= 180.0:
            out.append(Violation(b.id, "bus-lon-range", f"lon {b.lon}"))

    seen = set()
    for ln in network.lines:
        if ln.id in seen:
            out.append(Violation(ln.id, "duplicate-line-id", f"line id {ln.id!r} not unique"))
        seen.add(ln.id)
        if ln.bus_from == ln.bus_to:
            out.append(Violation(ln.id, "line-self-loop", f"both endpoints are {ln.bus_from!r}"))
        for end in (ln.bus_from, ln.bus_to):
            if end not in bus_ids:
                out.append(Violation(ln.id, "line-endpoint-missing", f"bus {end!r} not found"))
            elif bus_ids[end].voltage_kv != ln.voltage_kv:
                out.append(Violation(
                    ln.id, "line-voltage-mismatch",
                    f"bus {end!r} at {bus_ids[end].voltage_kv} kV, line at {ln.voltage_kv} kV"))
        if ln.s_nom <= 0:
            out.append(Violation(ln.id, "line-s-nom-positive", f"s_nom {ln.s_nom}"))
        if ln.x <= 0:
            out.append(Violation(ln.id, "line-x-positive", f"x {ln.x}"))
        if ln.length_km < 0:
            out.append(Violation(ln.id, "line-length-nonneg", f"length {ln.length_km}"))

    seen = set()
    for tr in network.transformers:
        if tr.id in seen:
            out.append(Violation(tr.id, "duplicate-transformer-id", f"id {tr.id!r} not unique"))
        seen.add(tr.id)
        if tr.bus_hv == tr.bus_lv:
            out.append(Violation(tr.id, "transformer-self-loop", f"both endpoints are {tr.bus_hv!r}"))
        missing = False
        for end in (tr.bus_hv, tr.bus_lv):
            if end not in bus_ids:
                out.append(Violation(tr.id, "transformer-endpoint-missing", f"bus {end!r} not found"))
                missing = True
        if not missing and bus_ids[tr.bus_hv].voltage_kv <= bus_ids[tr.bus_lv].voltage_kv:
            out.append(Violation(
                tr.id, "transformer-hv-not-above-lv",
                f"hv {bus_ids[tr.bus_hv].voltage_kv} kV <= lv {bus_ids[tr.bus_lv].voltage_kv} kV"))
        if tr.s_nom <= 0:
            out.append(Violation(tr.id, "transformer-s-nom-positive", f"s_nom {tr.s_nom}"))
        if tr.x <= 0:
            out.append(Violation(tr.id, "transformer-x-positive", f"x {tr.x}"))

    seen = set()
    for g in network.generators:
        if g.id in seen:
            out.append(Violation(g.id, "duplicate-generator-id", f"id {g.id!r} not unique"))
        seen.add(g.id)
        if g.bus not in bus_ids:
            out.append(Violation(g.id, "generator-bus-missing", f"bus {g.bus!r} not found"))
        if g.p_nom < 0:
            out.append(Violation(g.id, "generator-p-nom-nonneg", f"p_nom {g.p_nom}"))
        if g.profile:
            if len(g.profile) != n_snap:
                out.append(Violation(
                    g.id, "generator-profile-length",
                    f"profile has {len(g.profile)} entries, {n_snap} snapshots"))
            elif not all(0.0 <= v <= 1.0 for v in g.profile):
                out.append(Violation(g.id, "generator-profile-range", "capacity factors outside [0, 1]"))

    seen = set()
    for ld in network.loads:
        if ld.id in seen:
            out.append(Violation(ld.id, "duplicate-load-id", f"id {ld.id!r} not unique"))
        seen.add(ld.id)
        if ld.bus not in bus_ids:
            out.append(Violation(ld.id, "load-bus-missing", f"bus {ld.bus!r} not found"))
        if len(ld.profile) != n_snap:
            out.append(Violation(
                ld.id, "load-profile-length",
                f"profile has {len(ld.profile)} entries, {n_snap} snapshots"))
        elif any(v < 0 for v in ld.profile):
            out.append(Violation(ld.id, "load-profile-nonneg", "negative demand"))

    if len(set(network.snapshots.labels)) != n_snap:
        out.append(Violation("snapshots", "snapshot-labels-unique", "duplicate snapshot labels"))
    if any(w < 0 for w in network.snapshots.weights):
        out.append(Violation("snapshots", "snapshot-weights-nonneg", "negative snapshot weight"))

    if network.buses and not out:
        graph = adjacency(network)
        n_comp = nx.number_connected_components(graph)
        if n_comp > 1:
            out.append(Violation(
                "network", "network-connected",
                f"{n_comp} connected components (islands not allowed)"))

    out.sort(key=lambda v: (v.element, v.rule))
    return out


def adjacency(network: Network) -> nx.MultiGraph:
    """Undirected multigraph over buses with one edge per line and transformer.

    Edge keys are branch ids; each edge carries a ``kind`` attribute
    ("line" or "transformer").
    """
    g = nx.MultiGraph()
    g.add_nodes_from(b.id for b in network.buses)
    for ln in network.lines:
        g.add_edge(ln.bus_from, ln.bus_to, key=ln.id, kind="line")
    for tr in network.transformers:
        g.add_edge(tr.bus_hv, tr.bus_lv, key=tr.id, kind="transformer")
    return g


def total_generation_capacity(network: Network) -> float:
    return float(sum(g.p_nom for g in network.generators))


def total_load_energy(network: Network) -> float:
    """Sum over loads and snapshots of weight * demand (MWh)."""
    w = np.asarray(network.snapshots.weights, dtype=float)
    total = 0.0
    for ld in network.loads:
        total += float(np.dot(w, np.asarray(ld.profile, dtype=float)))
    return total


def generator_profile(network: Network, gen: Generator) -> np.ndarray:
    """Capacity-factor series of a generator (constant 1 when unspecified)."""
    if gen.profile:
        return np.asarray(gen.profile, dtype=float)
    return np.ones(len(network.snapshots))


def largest_component(network: Network) -> Network:
    """Restrict the network to its largest connected component."""
    graph = adjacency(network)
    if graph.number_of_nodes() == 0 or nx.is_connected(graph):
        return network
    keep = sorted(nx.connected_components(graph), key=lambda c: (-len(c), min(c)))[0]
    buses = tuple(b for b in network.buses if b.id in keep)
    lines = tuple(l for l in network.lines if l.bus_from in keep and l.bus_to in keep)
    trafos = tuple(t for t in network.transformers if t.bus_hv in keep and t.bus_lv in keep)
    gens = tuple(g for g in network.generators if g.bus in keep)
    loads = tuple(l for l in network.loads if l.bus in keep)
    return Network(buses, lines, trafos, gens, loads, network.snapshots,
                   network.s_base, network.voltage_levels)
