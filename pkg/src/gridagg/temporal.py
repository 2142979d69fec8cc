"""Temporal aggregation of hourly series into representative periods.

Periods (e.g. days) are clustered with k-means over min-max normalized
load and capacity-factor profiles; each cluster is represented by its
medoid period, weighted by the hours its cluster covers.  Using medoids
keeps the representative profiles equal to actually observed periods.
"""

from dataclasses import dataclass

import numpy as np

from .model import Generator, Load, Network, SnapshotSet, generator_profile

MAX_ITERATIONS = 300
CONVERGENCE_TOL = 1e-6


@dataclass(frozen=True)
class PeriodClustering:
    period_len: int
    k: int
    representatives: tuple   # period indices, ascending
    assignment: tuple        # period index -> position in representatives
    weights: tuple           # hours represented by each representative

    @property
    def horizon_hours(self) -> float:
        return float(sum(self.weights))


def build_feature_matrix(network: Network, period_len: int) -> np.ndarray:
    """Stack normalized profiles into one row per period.

    Row p concatenates every load profile and every generator
    capacity-factor profile over period p, each series min-max
    normalized over the full horizon (constant series map to zero).
    """
    n_t = len(network.snapshots)
    if period_len <= 0 or n_t % period_len != 0:
        raise ValueError(f"horizon of {n_t} snapshots not divisible by period_len {period_len}")
    n_periods = n_t // period_len

    series = []
    for ld in sorted(network.loads, key=lambda l: l.id):
        series.append(np.asarray(ld.profile, dtype=float))
    for g in sorted(network.generators, key=lambda g: g.id):
        series.append(generator_profile(network, g))

    cols = []
    for s in series:
        span = s.max() - s.min()
        norm = (s - s.min()) / span if span > 0 else np.zeros_like(s)
        cols.append(norm.reshape(n_periods, period_len))
    if not cols:
        return np.zeros((n_periods, 0))
    return np.hstack(cols)


def _kmeans(features: np.ndarray, k: int, rng: np.random.Generator):
    """Lloyd iterations with k-means++ seeding on period rows.

    Empty clusters are reseeded to the point farthest from its assigned
    centroid.  Returns (assignment, centroids).
    """
    n = features.shape[0]
    # k-means++ over distinct rows
    centroids = np.empty((k, features.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = features[first]
    chosen = {first}
    d2 = ((features - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total > 0:
            probs = d2 / total
            idx = int(rng.choice(n, p=probs))
        else:
            idx = min(j for j in range(n) if j not in chosen) if len(chosen) < n else first
        chosen.add(idx)
        centroids[i] = features[idx]
        d2 = np.minimum(d2, ((features - centroids[i]) ** 2).sum(axis=1))

    assignment = np.zeros(n, dtype=int)
    for _ in range(MAX_ITERATIONS):
        dist = ((features[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assignment = dist.argmin(axis=1)
        moved = 0.0
        for c in range(k):
            members = features[assignment == c]
            if len(members) == 0:
                nearest = dist.min(axis=1)
                far = int(nearest.argmax())
                new = features[far]
            else:
                new = members.mean(axis=0)
            moved = max(moved, float(np.linalg.norm(new - centroids[c])))
            centroids[c] = new
        if moved <= CONVERGENCE_TOL:
            break

    dist = ((features[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    assignment = dist.argmin(axis=1)
    # last-resort repair: a duplicate-row pathology can leave clusters empty
    for c in range(k):
        if not (assignment == c).any():
            sizes = np.bincount(assignment, minlength=k)
            donors = np.flatnonzero(sizes > 1)
            pool = np.flatnonzero(np.isin(assignment, donors))
            victim = int(pool[dist[pool, assignment[pool]].argmax()])
            assignment[victim] = c
            centroids[c] = features[victim]
    return assignment, centroids


def cluster_periods(features: np.ndarray, k: int, seed: int = 0,
                    period_len: int = None, snapshot_weights=None) -> PeriodClustering:
    """Cluster period rows into k groups represented by their medoids.

    ``snapshot_weights`` (hours per original snapshot) determines the
    weight of each representative; with unit weights this is cluster
    size times period length.
    """
    n_periods = features.shape[0]
    if k > n_periods:
        raise ValueError(f"k={k} exceeds number of periods ({n_periods})")
    if k <= 0:
        raise ValueError("k must be positive")
    if period_len is None:
        period_len = 1
    if snapshot_weights is None:
        snapshot_weights = np.ones(n_periods * period_len)
    snapshot_weights = np.asarray(snapshot_weights, dtype=float)

    rng = np.random.default_rng(seed)
    if k == n_periods:
        assignment = np.arange(n_periods)
        centroids = features.copy()
    else:
        assignment, centroids = _kmeans(features, k, rng)

    period_hours = snapshot_weights.reshape(n_periods, period_len).sum(axis=1)
    reps, weights = [], []
    for c in range(k):
        members = np.flatnonzero(assignment == c)
        d = ((features[members] - centroids[c]) ** 2).sum(axis=1)
        reps.append(int(members[d.argmin()]))
        weights.append(float(period_hours[members].sum()))

    order = np.argsort(reps)
    reps_sorted = tuple(int(reps[i]) for i in order)
    weights_sorted = tuple(weights[i] for i in order)
    position = {c: pos for pos, c in enumerate(order)}
    assign_sorted = tuple(position[int(assignment[p])] for p in range(n_periods))
    return PeriodClustering(period_len, k, reps_sorted, assign_sorted, weights_sorted)


def apply_clustering(network: Network, clustering: PeriodClustering) -> Network:
    """Reduce the network's snapshots to the representative periods.

    Each snapshot of representative r carries weight (hours of r's
    cluster) / period_len, so the total weighted horizon is preserved
    exactly.
    """
    n_t = len(network.snapshots)
    period_len = clustering.period_len
    if len(clustering.assignment) * period_len != n_t:
        raise ValueError("clustering was built for a different horizon")

    labels, weights, keep = [], [], []
    for pos, p in enumerate(clustering.representatives):
        start = p * period_len
        for s in range(period_len):
            keep.append(start + s)
            labels.append(network.snapshots.labels[start + s])
            weights.append(clustering.weights[pos] / period_len)
    snaps = SnapshotSet(tuple(labels), tuple(weights))

    def slice_profile(profile):
        return tuple(profile[i] for i in keep)

    gens = tuple(
        Generator(g.id, g.bus, g.p_nom, g.marginal_cost,
                  slice_profile(g.profile) if g.profile else ())
        for g in network.generators)
    loads = tuple(Load(l.id, l.bus, slice_profile(l.profile)) for l in network.loads)
    return network.with_(generators=gens, loads=loads, snapshots=snaps)


def cluster_network(network: Network, period_len: int, k: int, seed: int = 0):
    """Features, clustering and application in one call.

    Returns (clustered network, clustering).
    """
    features = build_feature_matrix(network, period_len)
    clustering = cluster_periods(features, k, seed, period_len,
                                 np.asarray(network.snapshots.weights, dtype=float))
    return apply_clustering(network, clustering), clustering
