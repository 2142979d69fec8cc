"""Sparse linear programs with a bounded-variable primal simplex solver.

The representation is deliberately small: named variables with lower and
upper bounds (either may be infinite), a sparse minimizing objective and
sparse constraint rows with <=, = or >= relations.  The solver is a
revised simplex with bounds handled implicitly, a composite phase 1 that
drives bound violations of the initial slack basis to zero, a dense
basis inverse with eta updates and periodic refactorization, and Bland's
rule as an anti-cycling fallback.  Pivot selection is deterministic, so
identical inputs produce identical pivot sequences.

Instances beyond desk scale should be exported with :func:`write_mps`
and handed to an external solver.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"

_AT_LOWER, _AT_UPPER, _FREE, _BASIC = 0, 1, 2, 3


class SolverError(Exception):
    pass


@dataclass
class LinearProgram:
    """Minimization LP with bounded variables and sparse rows."""

    name: str = "lp"
    var_names: list = field(default_factory=list)
    lower: list = field(default_factory=list)
    upper: list = field(default_factory=list)
    cost: list = field(default_factory=list)
    rows: list = field(default_factory=list)  # (name, {var index: coef}, relation, rhs)
    _var_index: dict = field(default_factory=dict)

    def add_variable(self, name: str, lower: float = 0.0,
                     upper: float = math.inf, cost: float = 0.0) -> int:
        if name in self._var_index:
            raise ValueError(f"duplicate variable {name!r}")
        if lower > upper:
            raise ValueError(f"variable {name!r}: lower bound {lower} > upper bound {upper}")
        if lower == math.inf or upper == -math.inf:
            raise ValueError(f"variable {name!r}: bounds force an infinite value")
        idx = len(self.var_names)
        self._var_index[name] = idx
        self.var_names.append(name)
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        self.cost.append(float(cost))
        return idx

    def add_cost(self, name: str, cost: float) -> None:
        self.cost[self._var_index[name]] += float(cost)

    def add_constraint(self, name: str, coeffs: dict, relation: str, rhs: float) -> None:
        if relation not in ("<=", "=", ">="):
            raise ValueError(f"unknown relation {relation!r}")
        row = {}
        for var, coef in coeffs.items():
            idx = self._var_index.get(var)
            if idx is None:
                raise ValueError(f"constraint {name!r} references unknown variable {var!r}")
            if coef != 0.0:
                row[idx] = row.get(idx, 0.0) + float(coef)
        self.rows.append((name, row, relation, float(rhs)))

    def variable_index(self, name: str) -> int:
        return self._var_index[name]

    @property
    def n_variables(self) -> int:
        return len(self.var_names)

    @property
    def n_constraints(self) -> int:
        return len(self.rows)

    def nonzeros(self) -> int:
        return sum(len(row) for _, row, _, _ in self.rows)


@dataclass
class LpSolution:
    status: str
    objective: float
    values: dict
    duals: dict
    iterations: int = 0

    def value(self, name: str) -> float:
        return self.values[name]


def _augmented(lp: LinearProgram):
    """Columns of the equality form A x + I s = b, slack bounds encoding relations."""
    n, m = lp.n_variables, lp.n_constraints
    data, rix, cix = [], [], []
    for i, (_, row, _, _) in enumerate(lp.rows):
        for j, coef in row.items():
            data.append(coef)
            rix.append(i)
            cix.append(j)
    for i in range(m):
        data.append(1.0)
        rix.append(i)
        cix.append(n + i)
    a = sparse.csc_matrix((data, (rix, cix)), shape=(m, n + m))
    lo = np.array(lp.lower + [0.0] * m)
    hi = np.array(lp.upper + [0.0] * m)
    for i, (_, _, rel, _) in enumerate(lp.rows):
        if rel == "<=":
            lo[n + i], hi[n + i] = 0.0, math.inf
        elif rel == ">=":
            lo[n + i], hi[n + i] = -math.inf, 0.0
        # "=" keeps the fixed [0, 0] slack
    c = np.array(lp.cost + [0.0] * m)
    b = np.array([rhs for _, _, _, rhs in lp.rows])
    return a, b, c, lo, hi


def solve(lp: LinearProgram, tolerance: float = 1e-7,
          max_iterations: int = None) -> LpSolution:
    """Solve a bounded-variable LP to optimality.

    Returns an :class:`LpSolution` whose status is one of "optimal",
    "infeasible", "unbounded" or "iteration-limit" (best iterate kept).
    """
    n, m = lp.n_variables, lp.n_constraints
    if m == 0:
        # pure bound minimization
        values, obj = {}, 0.0
        for j, name in enumerate(lp.var_names):
            c = lp.cost[j]
            v = lp.lower[j] if c >= 0 else lp.upper[j]
            if c > 0 and not math.isfinite(lp.lower[j]):
                return LpSolution(UNBOUNDED, -math.inf, {}, {})
            if c < 0 and not math.isfinite(lp.upper[j]):
                return LpSolution(UNBOUNDED, -math.inf, {}, {})
            if not math.isfinite(v):
                v = 0.0
            values[name] = v
            obj += c * v
        return LpSolution(OPTIMAL, obj, values, {})

    if max_iterations is None:
        max_iterations = max(5000, 100 * (n + m))

    a, b, c, lo, hi = _augmented(lp)
    total = n + m
    a_dense_cols = a  # CSC, column slicing is cheap

    status = np.empty(total, dtype=np.int8)
    value = np.zeros(total)
    for j in range(total):
        if math.isfinite(lo[j]):
            status[j], value[j] = _AT_LOWER, lo[j]
        elif math.isfinite(hi[j]):
            status[j], value[j] = _AT_UPPER, hi[j]
        else:
            status[j], value[j] = _FREE, 0.0

    basis = list(range(n, total))
    for j in basis:
        status[j] = _BASIC
    b_inv = np.eye(m)
    pivots_since_refactor = 0
    degenerate_run = 0
    bland = False
    retried_pivot = None
    feas_tol = tolerance

    def refactor():
        nonlocal b_inv, pivots_since_refactor
        b_mat = a_dense_cols[:, basis].toarray()
        b_inv = np.linalg.inv(b_mat)
        pivots_since_refactor = 0

    def basic_values():
        nb = np.flatnonzero((status != _BASIC) & (value != 0.0))
        rhs = b.copy()
        if nb.size:
            rhs = rhs - a_dense_cols[:, nb].dot(value[nb])
        return b_inv.dot(rhs)

    iteration = 0
    while True:
        if iteration >= max_iterations:
            x_b = basic_values()
            for pos, j in enumerate(basis):
                value[j] = x_b[pos]
            return _extract(lp, value, {}, ITERATION_LIMIT, iteration)
        iteration += 1

        x_b = basic_values()
        lo_b = lo[basis]
        hi_b = hi[basis]
        below = x_b < lo_b - feas_tol
        above = x_b > hi_b + feas_tol
        phase_one = bool(below.any() or above.any())

        if phase_one:
            d = np.where(below, -1.0, np.where(above, 1.0, 0.0))
            y = d.dot(b_inv)
            reduced = -(a_dense_cols.T.dot(y))
        else:
            cb = c[basis]
            y = cb.dot(b_inv)
            reduced = c - a_dense_cols.T.dot(y)

        # eligibility: improving direction exists and the variable can move
        movable = hi > lo
        at_lower = (status == _AT_LOWER) & movable
        at_upper = (status == _AT_UPPER) & movable
        free = status == _FREE
        viol = np.full(total, -math.inf)
        viol[at_lower] = -reduced[at_lower]
        viol[at_upper] = reduced[at_upper]
        viol[free] = np.abs(reduced[free])

        if bland:
            eligible = np.flatnonzero(viol > tolerance)
            if eligible.size == 0:
                entering = -1
            else:
                entering = int(eligible[0])
        else:
            entering = int(np.argmax(viol))
            if viol[entering] <= tolerance:
                entering = -1

        if entering < 0:
            if phase_one:
                return _extract(lp, _settle(value, basis, x_b), {},
                                INFEASIBLE, iteration)
            duals = {lp.rows[i][0]: float(y[i]) for i in range(m)}
            return _extract(lp, _settle(value, basis, x_b), duals, OPTIMAL, iteration)

        if status[entering] == _AT_UPPER:
            sigma = -1.0
        elif status[entering] == _AT_LOWER:
            sigma = 1.0
        else:
            sigma = 1.0 if reduced[entering] < 0 else -1.0

        col = a_dense_cols[:, entering].toarray().ravel()
        w = b_inv.dot(col)

        # ratio test: x_B moves at rate -sigma * w per unit step
        t_best = math.inf
        leave_pos = -1
        leave_to_upper = False
        delta = -sigma * w
        for pos in range(m):
            dlt = delta[pos]
            if abs(dlt) < 1e-11:
                continue
            xv, lv, uv = x_b[pos], lo_b[pos], hi_b[pos]
            if phase_one and xv < lv - feas_tol:
                if dlt > 0:  # rising toward its violated lower bound
                    t = (lv - xv) / dlt
                    to_upper = False
                else:
                    continue
            elif phase_one and xv > uv + feas_tol:
                if dlt < 0:  # falling toward its violated upper bound
                    t = (uv - xv) / dlt
                    to_upper = True
                else:
                    continue
            elif dlt > 0:
                if not math.isfinite(uv):
                    continue
                t = (uv - xv) / dlt
                to_upper = True
            else:
                if not math.isfinite(lv):
                    continue
                t = (lv - xv) / dlt
                to_upper = False
            t = max(t, 0.0)
            if t < t_best - 1e-10 or (t <= t_best + 1e-10 and leave_pos >= 0
                                      and bland and basis[pos] < basis[leave_pos]):
                t_best, leave_pos, leave_to_upper = t, pos, to_upper

        t_own = (hi[entering] - lo[entering]
                 if math.isfinite(hi[entering]) and math.isfinite(lo[entering])
                 else math.inf)
        if math.isfinite(t_own) and t_own < t_best - 1e-10:
            t_best = t_own
            leave_pos = -2  # bound flip

        if leave_pos == -1 and not math.isfinite(t_best):
            if phase_one:
                raise SolverError("phase-1 step unbounded; inconsistent state")
            return _extract(lp, _settle(value, basis, x_b), {}, UNBOUNDED, iteration)

        if t_best <= 1e-12:
            degenerate_run += 1
            if degenerate_run > 50:
                bland = True
        else:
            degenerate_run = 0

        if leave_pos == -2:
            # entering variable swings to its opposite bound, basis unchanged
            if status[entering] == _AT_LOWER:
                status[entering], value[entering] = _AT_UPPER, hi[entering]
            else:
                status[entering], value[entering] = _AT_LOWER, lo[entering]
            continue

        pivot = w[leave_pos]
        if abs(pivot) < 1e-11:
            # ratio test filters these out; reachable only through drift
            if retried_pivot == (iteration - 1, entering):
                raise SolverError("persistent near-singular pivot")
            retried_pivot = (iteration, entering)
            refactor()
            continue

        leaving = basis[leave_pos]
        if leave_to_upper:
            status[leaving], value[leaving] = _AT_UPPER, hi[leaving]
        else:
            status[leaving], value[leaving] = _AT_LOWER, lo[leaving]
        basis[leave_pos] = entering
        status[entering] = _BASIC
        value[entering] = 0.0  # recomputed from the basis each iteration

        b_inv[leave_pos, :] /= pivot
        mask = np.arange(m) != leave_pos
        b_inv[mask, :] -= np.outer(w[mask], b_inv[leave_pos, :])
        pivots_since_refactor += 1
        if pivots_since_refactor >= 128:
            refactor()


def _settle(value, basis, x_b):
    out = value.copy()
    for pos, j in enumerate(basis):
        out[j] = x_b[pos]
    return out


def _extract(lp, value, duals, status, iterations):
    values = {name: float(value[j]) for j, name in enumerate(lp.var_names)}
    objective = float(sum(lp.cost[j] * value[j] for j in range(lp.n_variables)))
    return LpSolution(status, objective, values, duals, iterations)


def dual_objective(lp: LinearProgram, solution: LpSolution,
                   tolerance: float = 1e-6) -> float:
    """Dual objective implied by a solution's constraint duals.

    Computed as y.b plus the bound terms of the reduced costs; returns
    -inf when a reduced cost pairs with an infinite bound (dual
    infeasibility beyond the tolerance).
    """
    a, b, c, lo, hi = _augmented(lp)
    y = np.array([solution.duals.get(name, 0.0) for name, _, _, _ in lp.rows])
    d = c - a.T.dot(y)
    total = y.dot(b)
    for j in range(len(d)):
        dj = d[j]
        if dj > tolerance:
            if not math.isfinite(lo[j]):
                return -math.inf
            total += dj * lo[j]
        elif dj < -tolerance:
            if not math.isfinite(hi[j]):
                return -math.inf
            total += dj * hi[j]
    return float(total)


def _mps_number(v: float) -> str:
    for fmt in (".10g", ".8g", ".6g"):
        s = format(v, fmt)
        if len(s) <= 12:
            return s
    return format(v, ".5g")


def write_mps(lp: LinearProgram, path) -> None:
    """Write the program in fixed-format MPS.

    Names longer than eight characters are replaced by generated ones
    (X0000001.., R0000001..) to stay within the fixed-format field
    width; the original names are recorded in leading comment lines.
    """
    def short(names, prefix):
        out, mangled = {}, False
        for i, name in enumerate(names):
            if len(name) <= 8 and " " not in name:
                out[name] = name
            else:
                out[name] = f"{prefix}{i + 1:07d}"
                mangled = True
        return out, mangled

    vmap, vm = short(lp.var_names, "X")
    rmap, rm = short([r[0] for r in lp.rows], "R")

    lines = []
    if vm or rm:
        lines.append("* generated names (original -> mps):")
        for name in lp.var_names:
            if vmap[name] != name:
                lines.append(f"*   {name} -> {vmap[name]}")
        for name, _, _, _ in lp.rows:
            if rmap[name] != name:
                lines.append(f"*   {name} -> {rmap[name]}")
    lines.append(f"NAME          {lp.name.upper()[:8]}")
    lines.append("ROWS")
    lines.append(" N  COST")
    rel_tag = {"<=": "L", ">=": "G", "=": "E"}
    for name, _, rel, _ in lp.rows:
        lines.append(f" {rel_tag[rel]}  {rmap[name]}")

    lines.append("COLUMNS")
    entries_by_var = {j: [] for j in range(lp.n_variables)}
    for name, row, _, _ in lp.rows:
        for j, coef in row.items():
            entries_by_var[j].append((rmap[name], coef))
    for j, vname in enumerate(lp.var_names):
        entries = []
        if lp.cost[j] != 0.0:
            entries.append(("COST", lp.cost[j]))
        entries.extend(entries_by_var[j])
        for rname, coef in entries:
            lines.append(f"    {vmap[vname]:<8}  {rname:<8}  {_mps_number(coef):<12}")

    lines.append("RHS")
    for name, _, _, rhs in lp.rows:
        if rhs != 0.0:
            lines.append(f"    RHS       {rmap[name]:<8}  {_mps_number(rhs):<12}")

    lines.append("BOUNDS")
    for j, vname in enumerate(lp.var_names):
        lo, hi = lp.lower[j], lp.upper[j]
        name = vmap[vname]
        if lo == hi:
            lines.append(f" FX BND       {name:<8}  {_mps_number(lo):<12}")
            continue
        if not math.isfinite(lo) and not math.isfinite(hi):
            lines.append(f" FR BND       {name:<8}")
            continue
        if math.isfinite(lo):
            if lo != 0.0:
                lines.append(f" LO BND       {name:<8}  {_mps_number(lo):<12}")
        else:
            lines.append(f" MI BND       {name:<8}")
        if math.isfinite(hi):
            lines.append(f" UP BND       {name:<8}  {_mps_number(hi):<12}")

    lines.append("ENDATA")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
