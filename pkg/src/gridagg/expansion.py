"""Continuous transmission expansion planning over candidate branches.

Extends the dispatch LP with a nonnegative capacity addition per
candidate branch, relaxes the flow limits to s_nom + delta, and adds the
annualized reinforcement cost to the objective.  Reactances stay fixed
at their original values, the standard linearization for a single
continuous solve.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import lp
from .model import Line, Network, Transformer
from .powerflow import (SHED_PENALTY_EUR_MWH, CandidateSet, DispatchResult,
                        build_dispatch_lp, extract_dispatch)

# Reinforcement cost defaults: per-km line costs for double-circuit
# 220/380 kV classes averaged over published unit-cost figures, expressed
# per MVA of transfer capacity; transformer cost per MVA likewise.
DEFAULT_LINE_COST_EUR_PER_MVA_KM = {
    220.0: (0.44e6 + 0.53e6) / 2.0 / 983.1,
    380.0: (1.26e6 / 3396.2 + 0.70e6 / 1698.1 + 0.67e6 / 3574.9) / 3.0,
}
DEFAULT_TRANSFORMER_COST_EUR_PER_MVA = (4.6e6 + 8.5e6) / 2.0 / 600.0
DEFAULT_ANNUITY_RATE = 0.07
DEFAULT_LIFETIME_YEARS = 40


@dataclass(frozen=True)
class CostTable:
    """Reinforcement cost rates and annuity parameters."""

    line_eur_per_mva_km: dict = field(
        default_factory=lambda: dict(DEFAULT_LINE_COST_EUR_PER_MVA_KM))
    transformer_eur_per_mva: float = DEFAULT_TRANSFORMER_COST_EUR_PER_MVA
    annuity_rate: float = DEFAULT_ANNUITY_RATE
    lifetime_years: float = DEFAULT_LIFETIME_YEARS

    def line_rate(self, voltage_kv: float) -> float:
        if voltage_kv in self.line_eur_per_mva_km:
            return self.line_eur_per_mva_km[voltage_kv]
        # nearest declared level
        nearest = min(self.line_eur_per_mva_km, key=lambda v: abs(v - voltage_kv))
        return self.line_eur_per_mva_km[nearest]

    @property
    def annuity(self) -> float:
        return annuity_factor(self.annuity_rate, self.lifetime_years)


@dataclass
class ExpansionResult:
    delta_s: dict                 # branch id -> MVA added
    branch_cost_eur: dict         # branch id -> annualized cost of its addition
    line_cost_eur: float          # annualized, per year
    transformer_cost_eur: float
    operational_cost_eur: float
    dispatch: DispatchResult
    lp_rows: int = 0
    lp_columns: int = 0
    lp_nonzeros: int = 0
    solve_seconds: float = 0.0

    @property
    def total_cost_eur(self) -> float:
        return self.line_cost_eur + self.transformer_cost_eur + self.operational_cost_eur


def annuity_factor(r: float, n: float) -> float:
    """Equal-payment factor r / (1 - (1+r)^-n); 1/n for r = 0."""
    if r < 0:
        raise ValueError(f"annuity rate must be nonnegative, got {r}")
    if n < 1:
        raise ValueError(f"lifetime must be at least one year, got {n}")
    if r == 0:
        return 1.0 / n
    return r / (1.0 - (1.0 + r) ** (-n))


def unit_cost(branch, costs: CostTable) -> float:
    """Overnight reinforcement cost per MVA added (EUR/MVA).

    Uses the branch's own cost rate; lines scale with their length.
    """
    if isinstance(branch, Transformer):
        return branch.cost_per_mva
    return branch.cost_per_mva_km * branch.length_km


def build_tep_lp(network: Network, candidates: CandidateSet, costs: CostTable,
                 shed_penalty: float = SHED_PENALTY_EUR_MWH) -> lp.LinearProgram:
    """Dispatch LP plus capacity-addition variables for candidate branches.

    Candidate flows lose their hard bounds and get
    |f| <= s_nom + delta constraints per snapshot instead; delta carries
    the annualized unit cost in the objective.
    """
    prog = build_dispatch_lp(network, shed_penalty)
    annuity = costs.annuity
    n_t = len(network.snapshots)
    by_id = {br.id: br for br in network.branches}
    for bid in candidates.candidate_ids:
        br = by_id.get(bid)
        if br is None:
            raise ValueError(f"candidate branch {bid!r} not in network")
        prog.add_variable(f"ds:{bid}", 0.0, math.inf,
                          cost=annuity * unit_cost(br, costs))
        for t in range(n_t):
            fvar = f"f:{bid}:{t}"
            idx = prog.variable_index(fvar)
            prog.lower[idx], prog.upper[idx] = -math.inf, math.inf
            prog.add_constraint(f"cap+:{bid}:{t}",
                                {fvar: 1.0, f"ds:{bid}": -1.0}, "<=", br.s_nom)
            prog.add_constraint(f"cap-:{bid}:{t}",
                                {fvar: -1.0, f"ds:{bid}": -1.0}, "<=", br.s_nom)
    return prog


def solve_tep(network: Network, candidates: CandidateSet, costs: CostTable,
              shed_penalty: float = SHED_PENALTY_EUR_MWH,
              mps_path=None) -> ExpansionResult:
    """Build and solve the expansion LP, returning per-branch additions."""
    import time

    prog = build_tep_lp(network, candidates, costs, shed_penalty)
    if mps_path is not None:
        lp.write_mps(prog, mps_path)
    t0 = time.perf_counter()
    solution = lp.solve(prog)
    elapsed = time.perf_counter() - t0
    if solution.status != lp.OPTIMAL:
        raise lp.SolverError(f"expansion LP ended with status {solution.status}")

    dispatch = extract_dispatch(network, solution)
    annuity = costs.annuity
    delta = {br.id: 0.0 for br in network.branches}
    branch_cost = {br.id: 0.0 for br in network.branches}
    line_cost = trafo_cost = 0.0
    by_id = {br.id: br for br in network.branches}
    for bid in candidates.candidate_ids:
        ds = solution.values[f"ds:{bid}"]
        ds = ds if ds > 1e-9 else 0.0
        delta[bid] = ds
        cost = annuity * unit_cost(by_id[bid], costs) * ds
        branch_cost[bid] = cost
        if isinstance(by_id[bid], Transformer):
            trafo_cost += cost
        else:
            line_cost += cost
    operational = solution.objective - line_cost - trafo_cost
    return ExpansionResult(delta, branch_cost, line_cost, trafo_cost, operational,
                           dispatch, lp_rows=prog.n_constraints,
                           lp_columns=prog.n_variables,
                           lp_nonzeros=prog.nonzeros(), solve_seconds=elapsed)


def capacity_length(result: ExpansionResult, network: Network) -> float:
    """Line expansion metric: sum of delta_s * length over lines, in GVA km."""
    total = 0.0
    for ln in network.lines:
        total += result.delta_s.get(ln.id, 0.0) * ln.length_km
    return total / 1000.0


def transformer_capacity(result: ExpansionResult, network: Network) -> float:
    """Total transformer capacity added, in GVA."""
    return sum(result.delta_s.get(tr.id, 0.0) for tr in network.transformers) / 1000.0


def save_expansion(result: ExpansionResult, network: Network, path) -> None:
    """Write expansion_result.csv: branch_id,kind,delta_s_mva,annualized_cost_eur."""
    kind = {br.id: "transformer" if isinstance(br, Transformer) else "line"
            for br in network.branches}
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["branch_id", "kind", "delta_s_mva", "annualized_cost_eur"])
        for bid in sorted(result.delta_s):
            w.writerow([bid, kind[bid], format(result.delta_s[bid], ".6g"),
                        format(result.branch_cost_eur[bid], ".6g")])
