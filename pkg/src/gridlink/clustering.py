"""Two-stage day classification: k-means over stacked daily features,
then clustering of daily-profile curves in B-spline coefficient space
within each cluster.

Everything is deterministic in the seed: seeding uses a greedy
distance-weighted (k-means++ style) start, Lloyd iterations stop on an
assignment fixpoint or when the relative inertia change drops below tol,
and ties always break toward the lower index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .griddata import DDPCurve


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    """(n, k) squared Euclidean distances."""
    d2 = (
        np.sum(x * x, axis=1)[:, None]
        - 2.0 * (x @ c.T)
        + np.sum(c * c, axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _row_space_embedding(x: np.ndarray) -> np.ndarray:
    """Isometric (n, n) embedding of n points in very high dimension.

    For n points in d >> n dimensions all pairwise Euclidean geometry
    lives in the row space; the Gram eigendecomposition gives coordinates
    with identical distances, so clustering results are unchanged while
    per-iteration cost drops from O(n d) to O(n^2).
    """
    n, d = x.shape
    if d <= 4 * n:
        return x
    gram = x @ x.T
    eigvals, eigvecs = np.linalg.eigh(gram)
    return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


def _seed_centroids(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy k-means++: distance-weighted candidates, keep the one that
    minimizes the total potential."""
    n = len(x)
    centroids = np.empty((k, x.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = x[first]
    closest = _sq_dists(x, centroids[:1])[:, 0]
    n_candidates = 2 + int(math.log(k)) if k > 1 else 1
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            candidates = rng.integers(n, size=n_candidates)
        else:
            candidates = rng.choice(n, size=n_candidates, p=closest / total)
        best_pot, best_idx, best_d = np.inf, None, None
        for cand in np.asarray(candidates).ravel():
            d = np.minimum(closest, _sq_dists(x, x[None, int(cand)])[:, 0])
            pot = d.sum()
            if pot < best_pot:
                best_pot, best_idx, best_d = pot, int(cand), d
        centroids[j] = x[best_idx]
        closest = best_d
    return centroids


@dataclass
class KMeansResult:
    k: int
    centroids: np.ndarray
    labels: np.ndarray
    ids: list[str] | None
    inertia: float
    iterations: int
    seed: int
    inertia_history: list[float] = field(default_factory=list)

    @property
    def assignment(self) -> dict:
        keys = self.ids if self.ids is not None else range(len(self.labels))
        return {key: int(lbl) for key, lbl in zip(keys, self.labels)}


def kmeans(
    vectors,
    k: int,
    seed: int,
    max_iter: int = 300,
    tol: float = 1e-6,
    ids: list[str] | None = None,
    init_centroids: np.ndarray | None = None,
) -> KMeansResult:
    """Lloyd's algorithm with greedy k-means++ seeding.

    Accepts an (n, d) array or a list of DailyFeatureVector. Empty
    clusters are re-seeded from the point farthest from its assigned
    centroid. The result's labels are always a nearest-centroid fixpoint.
    """
    if ids is None and len(vectors) > 0 and hasattr(vectors[0], "day_id"):
        ids = [v.day_id for v in vectors]
        vectors = [v.values for v in vectors]
    x = np.asarray(vectors, dtype=float)
    n = len(x)
    if not (1 <= k <= n):
        raise ValueError(f"k must be in [1, {n}], got {k}")

    rng = np.random.default_rng(seed)
    c = (
        np.array(init_centroids, dtype=float)
        if init_centroids is not None
        else _seed_centroids(x, k, rng)
    )

    x_sq = np.sum(x * x, axis=1)
    history: list[float] = []
    prev_labels = None
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        d2 = np.maximum(
            x_sq[:, None] - 2.0 * (x @ c.T) + np.sum(c * c, axis=1)[None, :], 0.0
        )
        labels = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(n), labels].sum())
        history.append(inertia)
        if prev_labels is not None and np.array_equal(labels, prev_labels):
            break
        if len(history) >= 2 and history[-2] > 0:
            if (history[-2] - history[-1]) / history[-2] < tol:
                break
        # update step: indicator matmul avoids copying member rows
        assigned_d2 = d2[np.arange(n), labels].copy()
        indicator = np.zeros((k, n))
        indicator[labels, np.arange(n)] = 1.0
        counts = indicator.sum(axis=1)
        sums = indicator @ x
        new_c = np.where(counts[:, None] > 0, sums / np.maximum(counts, 1)[:, None], 0.0)
        empties = [j for j in range(k) if counts[j] == 0]
        for j in empties:
            far = int(np.argmax(assigned_d2))
            new_c[j] = x[far]
            assigned_d2[far] = -1.0
        c = new_c
        prev_labels = labels
    else:
        # max_iter updates exhausted: restore the nearest-centroid invariant
        d2 = _sq_dists(x, c)
        labels = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(n), labels].sum())
        history.append(inertia)

    return KMeansResult(
        k=k,
        centroids=c,
        labels=labels,
        ids=ids,
        inertia=history[-1],
        iterations=iterations,
        seed=seed,
        inertia_history=history,
    )


def silhouette_score(x: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette over all points; singleton clusters score 0."""
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels)
    d = np.sqrt(_sq_dists(x, x))
    uniq = np.unique(labels)
    scores = np.zeros(len(x))
    for i in range(len(x)):
        own = labels[i]
        same = (labels == own) & (np.arange(len(x)) != i)
        if not same.any():
            scores[i] = 0.0
            continue
        a = d[i, same].mean()
        b = min(d[i, labels == other].mean() for other in uniq if other != own)
        m = max(a, b)
        scores[i] = 0.0 if m == 0.0 else (b - a) / m
    return float(scores.mean())


@dataclass
class ChooseKResult:
    k: int
    scores: dict[int, float]
    degenerate: bool = False


def choose_k(vectors, k_range, seed: int) -> ChooseKResult:
    """Silhouette-maximizing k over the range, ties toward smaller k.

    All-identical inputs make the silhouette undefined; that degenerate
    case reports itself and falls back to the range's lower bound.
    """
    if len(vectors) > 0 and hasattr(vectors[0], "day_id"):
        vectors = [v.values for v in vectors]
    x = np.asarray(vectors, dtype=float)
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ValueError("empty k range")
    n = len(x)
    for k in ks:
        if not (2 <= k <= n - 1):
            raise ValueError(f"k={k} outside [2, {n - 1}]")
    if np.all(x == x[0]):
        return ChooseKResult(k=ks[0], scores={}, degenerate=True)
    embedded = _row_space_embedding(x)
    scores = {}
    best_k, best_score = None, -np.inf
    for k in ks:
        result = kmeans(embedded, k, seed=seed)
        score = silhouette_score(embedded, result.labels)
        scores[k] = score
        if score > best_score:
            best_k, best_score = k, score
    return ChooseKResult(k=best_k, scores=scores)


# ---------------------------------------------------------------------------
# B-spline basis and functional clustering
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BSplineBasis:
    """Clamped B-spline basis with uniform interior knots."""

    n_basis: int = 12
    degree: int = 3
    domain: tuple[float, float] = (0.0, 95.0)

    def __post_init__(self):
        if self.n_basis < self.degree + 1:
            raise ValueError("n_basis must be at least degree + 1")

    @property
    def knots(self) -> np.ndarray:
        lo, hi = self.domain
        n_interior = self.n_basis - self.degree - 1
        interior = np.linspace(lo, hi, n_interior + 2)[1:-1]
        return np.concatenate(
            [np.full(self.degree + 1, lo), interior, np.full(self.degree + 1, hi)]
        )

    def design_matrix(self, x: np.ndarray) -> np.ndarray:
        """(len(x), n_basis) Cox-de Boor evaluation."""
        t = self.knots
        k = self.degree
        x = np.asarray(x, dtype=float)
        n_knots = len(t)
        b = np.zeros((len(x), n_knots - 1))
        for i in range(n_knots - 1):
            b[:, i] = (t[i] <= x) & (x < t[i + 1])
        # close the right end: the domain endpoint belongs to the last
        # positive-length interval
        last = np.max(np.nonzero(np.diff(t) > 0)[0])
        b[x == t[-1], last] = 1.0
        for d in range(1, k + 1):
            nb = np.zeros((len(x), n_knots - 1 - d))
            for i in range(n_knots - 1 - d):
                left_den = t[i + d] - t[i]
                right_den = t[i + d + 1] - t[i + 1]
                term = np.zeros(len(x))
                if left_den > 0:
                    term = (x - t[i]) / left_den * b[:, i]
                if right_den > 0:
                    term = term + (t[i + d + 1] - x) / right_den * b[:, i + 1]
                nb[:, i] = term
            b = nb
        return b[:, : self.n_basis]


def project_curves(curves: list[DDPCurve], basis: BSplineBasis) -> np.ndarray:
    """(n_curves, n_basis) least-squares coefficients."""
    b = basis.design_matrix(np.arange(96, dtype=float))
    y = np.stack([c.values for c in curves], axis=1)
    coeffs, *_ = np.linalg.lstsq(b, y, rcond=None)
    return coeffs.T


@dataclass
class FunctionalClusterResult:
    parent_cluster_id: int | None
    n_groups: int
    assignment: dict[str, int]
    basis: BSplineBasis
    coefficients: dict[str, np.ndarray]
    kmeans: KMeansResult


def functional_cluster(
    curves: list[DDPCurve],
    n_groups: int,
    seed: int,
    basis: BSplineBasis | None = None,
    parent_cluster_id: int | None = None,
) -> FunctionalClusterResult:
    """Group curves by shape: project onto the basis, k-means the
    coefficient vectors."""
    basis = basis or BSplineBasis()
    if not (1 <= n_groups <= len(curves)):
        raise ValueError(
            f"n_groups must be in [1, {len(curves)}], got {n_groups}"
        )
    coeffs = project_curves(curves, basis)
    ids = [c.day_id for c in curves]
    result = kmeans(coeffs, n_groups, seed=seed, ids=ids)
    return FunctionalClusterResult(
        parent_cluster_id=parent_cluster_id,
        n_groups=n_groups,
        assignment=result.assignment,
        basis=basis,
        coefficients={d: coeffs[i] for i, d in enumerate(ids)},
        kmeans=result,
    )


def choose_g(
    curves: list[DDPCurve],
    g_max: int,
    seed: int,
    basis: BSplineBasis | None = None,
    threshold: float = 0.5,
) -> tuple[int, dict[int, float]]:
    """Subgroup count selection over 1..g_max.

    A split only happens when its silhouette shows strong structure
    (best score >= threshold); otherwise the cluster stays whole. The
    score table is returned for reporting.
    """
    basis = basis or BSplineBasis()
    n = len(curves)
    scores: dict[int, float] = {}
    if n < 4 or g_max < 2:
        return 1, scores
    coeffs = project_curves(curves, basis)
    if np.allclose(coeffs, coeffs[0]):
        return 1, scores
    best_g, best_score = 1, -np.inf
    for g in range(2, min(g_max, n - 1) + 1):
        result = kmeans(coeffs, g, seed=seed)
        score = silhouette_score(coeffs, result.labels)
        scores[g] = score
        if score > best_score:
            best_g, best_score = g, score
    if best_score >= threshold:
        return best_g, scores
    return 1, scores


@dataclass
class DayClassification:
    """Final partition: day -> (kmeans cluster, functional subgroup)."""

    kmeans_result: KMeansResult
    choose_k_result: ChooseKResult | None
    subgroup_assignment: dict[str, int]
    g_choices: dict[int, int]
    g_scores: dict[int, dict[int, float]]
    functional_results: dict[int, FunctionalClusterResult]

    @property
    def final_groups(self) -> dict[str, str]:
        out = {}
        for day, cluster in self.kmeans_result.assignment.items():
            out[day] = f"{cluster}.{self.subgroup_assignment[day]}"
        return out


def classify_days(
    daily_vectors,
    curves: list[DDPCurve],
    seed: int,
    k_range=range(2, 7),
    g_max: int = 4,
    k: int | None = None,
    basis: BSplineBasis | None = None,
    g_threshold: float = 0.5,
) -> DayClassification:
    """Run the two clustering stages over one corpus of days."""
    basis = basis or BSplineBasis()
    curve_by_day = {c.day_id: c for c in curves}
    ids = [v.day_id for v in daily_vectors]
    missing = [d for d in ids if d not in curve_by_day]
    if missing:
        raise ValueError(f"missing DDP curves for days: {missing}")

    x = np.asarray([v.values for v in daily_vectors], dtype=float)
    embedded = _row_space_embedding(x)
    chosen = None
    if k is None:
        chosen = choose_k(embedded, k_range, seed=seed)
        k = chosen.k
    km = kmeans(embedded, k, seed=seed, ids=ids)
    if embedded is not x:
        # report centroids in the original feature space
        indicator = np.zeros((k, len(ids)))
        indicator[km.labels, np.arange(len(ids))] = 1.0
        counts = np.maximum(indicator.sum(axis=1), 1.0)
        km.centroids = (indicator @ x) / counts[:, None]

    subgroup: dict[str, int] = {}
    g_choices: dict[int, int] = {}
    g_scores: dict[int, dict[int, float]] = {}
    functional_results: dict[int, FunctionalClusterResult] = {}
    for cluster in range(k):
        cluster_days = [d for d in ids if km.assignment[d] == cluster]
        if not cluster_days:
            g_choices[cluster] = 0
            continue
        cluster_curves = [curve_by_day[d] for d in cluster_days]
        g, scores = choose_g(
            cluster_curves, g_max, seed=seed, basis=basis, threshold=g_threshold
        )
        g_choices[cluster] = g
        g_scores[cluster] = scores
        fc = functional_cluster(
            cluster_curves, g, seed=seed, basis=basis, parent_cluster_id=cluster
        )
        functional_results[cluster] = fc
        subgroup.update(fc.assignment)

    return DayClassification(
        kmeans_result=km,
        choose_k_result=chosen,
        subgroup_assignment=subgroup,
        g_choices=g_choices,
        g_scores=g_scores,
        functional_results=functional_results,
    )
