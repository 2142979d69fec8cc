"""Geographical network partitioning.

Builds pairwise great-circle distance matrices over buses, optionally
masks entries between different voltage levels, and computes k-medoids
(PAM) partitions either across the whole network (voltage-unaware, VU)
or independently per voltage level (voltage-aware, VA).  VA partitions
guarantee by construction that every cluster contains buses of a single
voltage level, which preserves transformers during aggregation.

All tie-breaking uses the lowest bus id in ``node_order``, so results
are deterministic.
"""

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import Network

EARTH_RADIUS_KM = 6371.0088

VU = "VU"
VA = "VA"


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in km between two coordinate pairs."""
    for lat in (lat1, lat2):
        if not -90.0 <= lat <= 90.0:
            raise ValueError(f"latitude {lat} outside [-90, 90]")
    for lon in (lon1, lon2):
        if not -180.0 <= lon <= 180.0:
            raise ValueError(f"longitude {lon} outside [-180, 180]")
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(a)))


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric pairwise node distances with zero diagonal.

    ``sentinel`` is the value assigned to masked (cross-voltage) entries;
    ``None`` when the matrix is unmasked.
    """

    node_order: tuple
    d: np.ndarray
    sentinel: Optional[float] = None

    def index_of(self, node_id: str) -> int:
        return self.node_order.index(node_id)

    def submatrix(self, node_ids) -> "DistanceMatrix":
        idx = [self.node_order.index(n) for n in node_ids]
        return DistanceMatrix(tuple(node_ids), self.d[np.ix_(idx, idx)], self.sentinel)


@dataclass(frozen=True)
class PartitionMapping:
    """Assignment of buses to clusters.

    ``cluster_voltage`` maps cluster id to its voltage level in VA mode
    and is empty in VU mode.  Cluster ids equal the medoid bus id.
    """

    mode: str
    assignment: dict           # bus id -> cluster id
    medoids: dict              # cluster id -> medoid bus id
    cluster_voltage: dict      # cluster id -> kV (VA only)

    @property
    def clusters(self) -> dict:
        """Cluster id -> sorted list of member bus ids."""
        out = {}
        for bus, cl in self.assignment.items():
            out.setdefault(cl, []).append(bus)
        return {cl: sorted(members) for cl, members in sorted(out.items())}

    @property
    def k(self) -> int:
        return len(self.medoids)


def build_distance_matrix(network: Network) -> DistanceMatrix:
    """All-pairs haversine distances over buses, ordered by sorted bus id."""
    buses = sorted(network.buses, key=lambda b: b.id)
    order = tuple(b.id for b in buses)
    lat = np.radians(np.array([b.lat for b in buses]))
    lon = np.radians(np.array([b.lon for b in buses]))
    dp = lat[:, None] - lat[None, :]
    dl = lon[:, None] - lon[None, :]
    a = np.sin(dp / 2.0) ** 2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dl / 2.0) ** 2
    d = 2.0 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(a)))
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(order, d)


def mask_voltage_aware(dm: DistanceMatrix, network: Network) -> DistanceMatrix:
    """Assign a large sentinel distance to entries between voltage levels.

    The sentinel is finite (10x the largest same-level distance) so that
    accidental cost sums stay well defined.  Masking an already masked
    matrix reuses its sentinel, making the operation idempotent.  On a
    single-level network the matrix is returned unchanged.
    """
    voltage = {b.id: b.voltage_kv for b in network.buses}
    levels = np.array([voltage[n] for n in dm.node_order])
    cross = levels[:, None] != levels[None, :]
    if not cross.any():
        return dm
    if dm.sentinel is not None:
        sentinel = dm.sentinel
    else:
        same_max = float(dm.d[~cross].max())
        sentinel = 10.0 * (same_max if same_max > 0 else 1.0)
    d = dm.d.copy()
    d[cross] = sentinel
    return DistanceMatrix(dm.node_order, d, sentinel)


def allocate_clusters_per_level(network: Network, k: int) -> dict:
    """Split a cluster budget k across voltage levels.

    Proportional to level size with largest-remainder correction, then
    adjusted so every level gets at least 1 and at most its bus count.
    """
    sizes = {}
    for b in network.buses:
        sizes[b.voltage_kv] = sizes.get(b.voltage_kv, 0) + 1
    levels = sorted(sizes)
    n = sum(sizes.values())
    if k < len(levels):
        raise ValueError(f"k={k} below number of voltage levels ({len(levels)})")
    if k > n:
        raise ValueError(f"k={k} exceeds number of buses ({n})")

    quota = {v: k * sizes[v] / n for v in levels}
    alloc = {v: int(math.floor(quota[v])) for v in levels}
    # distribute leftover seats by largest fractional part, ties to larger level size then lower kV
    leftovers = sorted(levels, key=lambda v: (-(quota[v] - alloc[v]), -sizes[v], v))
    for v in leftovers[: k - sum(alloc.values())]:
        alloc[v] += 1

    # enforce 1 <= k_v <= |N_v|
    for v in levels:
        alloc[v] = min(alloc[v], sizes[v])
    while sum(alloc.values()) < k:
        room = [v for v in levels if alloc[v] < sizes[v]]
        v = max(room, key=lambda v: (sizes[v] - alloc[v], -v))
        alloc[v] += 1
    for v in levels:
        if alloc[v] == 0:
            donor = max(levels, key=lambda w: (alloc[w], -w))
            if alloc[donor] <= 1:
                raise ValueError(f"cannot give every level a cluster with k={k}")
            alloc[donor] -= 1
            alloc[v] = 1
    return alloc


def _pam_build(d: np.ndarray, k: int) -> list:
    """Greedy BUILD initialization: add the medoid with the largest cost drop."""
    n = d.shape[0]
    first = int(np.argmin(d.sum(axis=1)))
    medoids = [first]
    nearest = d[:, first].copy()
    while len(medoids) < k:
        best_gain, best_j = -np.inf, -1
        for j in range(n):  # ascending j, so ties keep the lowest index
            if j in medoids:
                continue
            gain = np.maximum(nearest - d[:, j], 0.0).sum()
            if gain > best_gain + 1e-15:
                best_gain, best_j = gain, j
        medoids.append(best_j)
        nearest = np.minimum(nearest, d[:, best_j])
    return sorted(medoids)


def _pam_assign(d: np.ndarray, medoids: list) -> np.ndarray:
    """Nearest-medoid assignment; ties go to the medoid with the lower index."""
    cols = d[:, medoids]
    return np.argmin(cols, axis=1)  # argmin takes the first (lowest) on ties


def _pam_cost(d: np.ndarray, medoids: list) -> float:
    return float(d[:, medoids].min(axis=1).sum())


def kmedoids(dm: DistanceMatrix, k: int, seed: int = 0):
    """Partition nodes into k clusters with PAM (BUILD + SWAP).

    BUILD is a deterministic greedy initialization, SWAP performs steepest
    single-swap descent until no swap improves the total within-cluster
    distance.  ``seed`` is accepted for interface uniformity; all
    tie-breaking is by lowest node index, so the result does not depend
    on it.

    Returns (medoid_indices, assignment, cost): medoid indices sorted
    ascending, assignment mapping each node position to a medoid position.
    """
    n = len(dm.node_order)
    if k > n:
        raise ValueError(f"k={k} exceeds number of nodes ({n})")
    if k <= 0:
        raise ValueError("k must be positive")
    d = dm.d
    if k == n:
        medoids = list(range(n))
        return medoids, np.arange(n), 0.0

    medoids = _pam_build(d, k)
    cost = _pam_cost(d, medoids)
    improved = True
    while improved:
        improved = False
        best = (cost, None, None)
        medoid_set = set(medoids)
        for mi, m in enumerate(medoids):
            for h in range(n):
                if h in medoid_set:
                    continue
                trial = medoids[:mi] + [h] + medoids[mi + 1:]
                c = _pam_cost(d, trial)
                if c < best[0] - 1e-12:
                    best = (c, mi, h)
        if best[1] is not None:
            cost_new, mi, h = best
            assert cost_new <= cost + 1e-12  # monotone descent
            medoids[mi] = h
            medoids.sort()
            cost = cost_new
            improved = True
    return medoids, _pam_assign(d, medoids), cost


def partition_vu(network: Network, k: int, seed: int = 0) -> PartitionMapping:
    """Voltage-unaware partition: PAM on the unmasked distance matrix."""
    dm = build_distance_matrix(network)
    medoid_idx, assign, _ = kmedoids(dm, k, seed)
    medoid_ids = [dm.node_order[m] for m in medoid_idx]
    assignment = {dm.node_order[i]: medoid_ids[assign[i]] for i in range(len(dm.node_order))}
    medoids = {c: c for c in medoid_ids}
    return PartitionMapping(VU, assignment, medoids, {})


def partition_va(network: Network, k: int, seed: int = 0) -> PartitionMapping:
    """Voltage-aware partition: independent per-level PAM runs.

    Equivalent to clustering on the masked matrix, but with an explicit
    per-level cluster allocation so the number of clusters per voltage
    level is guaranteed.
    """
    alloc = allocate_clusters_per_level(network, k)
    dm = build_distance_matrix(network)
    voltage = {b.id: b.voltage_kv for b in network.buses}
    assignment, medoids, cluster_voltage = {}, {}, {}
    for level in sorted(alloc):
        nodes = tuple(n for n in dm.node_order if voltage[n] == level)
        sub = dm.submatrix(nodes)
        medoid_idx, assign, _ = kmedoids(sub, alloc[level], seed)
        medoid_ids = [nodes[m] for m in medoid_idx]
        for i, node in enumerate(nodes):
            assignment[node] = medoid_ids[assign[i]]
        for c in medoid_ids:
            medoids[c] = c
            cluster_voltage[c] = level
    return PartitionMapping(VA, assignment, medoids, cluster_voltage)


def save_mapping(mapping: PartitionMapping, path) -> None:
    """Write a mapping as CSV: bus_id,cluster_id,cluster_voltage_kv."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["bus_id", "cluster_id", "cluster_voltage_kv"])
        for bus in sorted(mapping.assignment):
            cl = mapping.assignment[bus]
            kv = mapping.cluster_voltage.get(cl, "")
            w.writerow([bus, cl, format(kv, ".6g") if kv != "" else ""])


def load_mapping(path) -> PartitionMapping:
    assignment, cluster_voltage = {}, {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            assignment[row["bus_id"]] = row["cluster_id"]
            if row.get("cluster_voltage_kv"):
                cluster_voltage[row["cluster_id"]] = float(row["cluster_voltage_kv"])
    medoids = {c: c for c in sorted(set(assignment.values()))}
    mode = VA if cluster_voltage else VU
    return PartitionMapping(mode, assignment, medoids, cluster_voltage)


def save_distance_matrix(dm: DistanceMatrix, path) -> None:
    """Debug export of the full matrix (O(n^2) file size)."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["bus_id"] + list(dm.node_order))
        for i, node in enumerate(dm.node_order):
            w.writerow([node] + [format(v, ".6g") for v in dm.d[i]])
