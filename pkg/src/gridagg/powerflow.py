"""Lossless DC dispatch and congestion-based candidate screening.

Builds the operational dispatch LP (generator dispatch, bus angles and
branch flows per snapshot), solves it with the bundled simplex, derives
per-branch loadings and flags investment candidates whose loading
exceeds 70 % in every snapshot or 90 % at least once.  Transformers are
treated exactly like lines.
"""

import csv
import math
from dataclasses import dataclass, replace
from typing import Optional

import networkx as nx
import numpy as np

from . import lp
from .model import Network, adjacency, branch_x_pu, generator_profile

SHED_PENALTY_EUR_MWH = 10_000.0
ALL_THRESHOLD = 0.70
ANY_THRESHOLD = 0.90


@dataclass
class DispatchResult:
    objective: float                 # EUR over the weighted horizon
    dispatch: dict                   # generator id -> np.ndarray (MW per snapshot)
    flow: dict                       # branch id -> np.ndarray (MW, from->to positive)
    angle: dict                      # bus id -> np.ndarray (rad)
    shed: dict                       # bus id -> np.ndarray (MW unserved)

    @property
    def total_shed_mw(self) -> float:
        return float(sum(s.sum() for s in self.shed.values()))


@dataclass
class CandidateSet:
    flags: dict                       # branch id -> bool
    max_loading: dict = None          # branch id -> float (screen output only)
    frac_above_all: dict = None       # fraction of snapshots above the all-threshold

    def __contains__(self, branch_id):
        return self.flags.get(branch_id, False)

    @property
    def candidate_ids(self) -> list:
        return sorted(b for b, f in self.flags.items() if f)


def _slack_bus(network: Network) -> str:
    graph = adjacency(network)
    if network.buses and not nx.is_connected(graph):
        raise ValueError("dispatch requires a connected network")
    return min(b.id for b in network.buses)


def build_dispatch_lp(network: Network, shed_penalty: float = SHED_PENALTY_EUR_MWH) -> lp.LinearProgram:
    """Operational DC dispatch LP over all snapshots.

    Per snapshot: dispatch g in [0, p_nom * cf_t], angles with the slack
    bus fixed at 0, flows tied to angle differences through the branch
    reactance, nodal balance with a shedding variable at penalty cost,
    and |flow| <= s_nom via variable bounds.  The objective is the
    snapshot-weighted sum of marginal and penalty costs.
    """
    slack = _slack_bus(network)
    prog = lp.LinearProgram(name="dispatch")
    weights = network.snapshots.weights
    n_t = len(network.snapshots)

    profiles = {g.id: generator_profile(network, g) for g in network.generators}
    x_pu = {br.id: branch_x_pu(network, br) for br in network.branches}

    for t in range(n_t):
        w = weights[t]
        for g in network.generators:
            prog.add_variable(f"g:{g.id}:{t}", 0.0, g.p_nom * profiles[g.id][t],
                              cost=w * g.marginal_cost)
        for b in network.buses:
            if b.id == slack:
                prog.add_variable(f"th:{b.id}:{t}", 0.0, 0.0)
            else:
                prog.add_variable(f"th:{b.id}:{t}", -math.inf, math.inf)
        for br in network.branches:
            prog.add_variable(f"f:{br.id}:{t}", -br.s_nom, br.s_nom)
        for b in network.buses:
            prog.add_variable(f"sh:{b.id}:{t}", 0.0, math.inf, cost=w * shed_penalty)

    for t in range(n_t):
        for br in network.branches:
            u, v = network.branch_endpoints(br)
            k = network.s_base / x_pu[br.id]
            prog.add_constraint(f"flow:{br.id}:{t}",
                                {f"f:{br.id}:{t}": 1.0,
                                 f"th:{u}:{t}": -k,
                                 f"th:{v}:{t}": k},
                                "=", 0.0)
        load_at = {b.id: 0.0 for b in network.buses}
        for ld in network.loads:
            load_at[ld.bus] += ld.profile[t]
        for b in network.buses:
            coeffs = {f"sh:{b.id}:{t}": 1.0}
            for g in network.generators:
                if g.bus == b.id:
                    coeffs[f"g:{g.id}:{t}"] = 1.0
            for br in network.branches:
                u, v = network.branch_endpoints(br)
                if v == b.id:
                    coeffs[f"f:{br.id}:{t}"] = coeffs.get(f"f:{br.id}:{t}", 0.0) + 1.0
                if u == b.id:
                    coeffs[f"f:{br.id}:{t}"] = coeffs.get(f"f:{br.id}:{t}", 0.0) - 1.0
            prog.add_constraint(f"bal:{b.id}:{t}", coeffs, "=", load_at[b.id])
    return prog


def extract_dispatch(network: Network, solution: lp.LpSolution) -> DispatchResult:
    n_t = len(network.snapshots)

    def series(prefix, ident):
        return np.array([solution.values[f"{prefix}:{ident}:{t}"] for t in range(n_t)])

    return DispatchResult(
        objective=solution.objective,
        dispatch={g.id: series("g", g.id) for g in network.generators},
        flow={br.id: series("f", br.id) for br in network.branches},
        angle={b.id: series("th", b.id) for b in network.buses},
        shed={b.id: series("sh", b.id) for b in network.buses},
    )


def solve_dispatch(network: Network, shed_penalty: float = SHED_PENALTY_EUR_MWH) -> DispatchResult:
    prog = build_dispatch_lp(network, shed_penalty)
    solution = lp.solve(prog)
    if solution.status != lp.OPTIMAL:
        raise lp.SolverError(f"dispatch LP ended with status {solution.status}")
    return extract_dispatch(network, solution)


def loading(dispatch: DispatchResult, network: Network) -> dict:
    """Per-branch per-snapshot loading |flow| / s_nom."""
    s_nom = {br.id: br.s_nom for br in network.branches}
    return {bid: np.abs(flow) / s_nom[bid] for bid, flow in dispatch.flow.items()}


def screen_candidates(loadings: dict, all_threshold: float = ALL_THRESHOLD,
                      any_threshold: float = ANY_THRESHOLD) -> CandidateSet:
    """Flag branches loaded above ``all_threshold`` in every snapshot or
    above ``any_threshold`` at least once (strict comparisons)."""
    for th in (all_threshold, any_threshold):
        if not 0.0 < th <= 1.0:
            raise ValueError(f"threshold {th} outside (0, 1]")
    flags, max_loading, frac = {}, {}, {}
    for bid in sorted(loadings):
        series = np.asarray(loadings[bid], dtype=float)
        flags[bid] = bool(series.min() > all_threshold or series.max() > any_threshold)
        max_loading[bid] = float(series.max())
        frac[bid] = float((series > all_threshold).mean())
    return CandidateSet(flags, max_loading, frac)


def apply_candidates(network: Network, candidates: CandidateSet) -> Network:
    """Mark candidate branches expandable (and all others not)."""
    lines = tuple(replace(ln, expandable=candidates.flags.get(ln.id, False))
                  for ln in network.lines)
    trafos = tuple(replace(tr, expandable=candidates.flags.get(tr.id, False))
                   for tr in network.transformers)
    return network.with_(lines=lines, transformers=trafos)


def candidates_from_flags(network: Network) -> CandidateSet:
    """Candidate set read back from the branches' expandable flags."""
    return CandidateSet({br.id: br.expandable for br in network.branches})


def save_candidates(candidates: CandidateSet, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["branch_id", "is_candidate", "max_loading", "frac_above_70"])
        for bid in sorted(candidates.flags):
            ml = candidates.max_loading.get(bid, "") if candidates.max_loading else ""
            fr = candidates.frac_above_all.get(bid, "") if candidates.frac_above_all else ""
            w.writerow([bid, str(candidates.flags[bid]).lower(),
                        format(ml, ".6g") if ml != "" else "",
                        format(fr, ".6g") if fr != "" else ""])


def load_candidates(path) -> CandidateSet:
    flags, max_loading, frac = {}, {}, {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            flags[row["branch_id"]] = row["is_candidate"] == "true"
            if row.get("max_loading"):
                max_loading[row["branch_id"]] = float(row["max_loading"])
            if row.get("frac_above_70"):
                frac[row["branch_id"]] = float(row["frac_above_70"])
    return CandidateSet(flags, max_loading or None, frac or None)
