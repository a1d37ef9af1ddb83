"""Distance acquisition, donor clustering and cluster visit costs."""

import math
from typing import Dict, List, Mapping, Optional, Protocol, Sequence, Tuple

import numpy as np

from config.settings import (
    CIRCUITY_FACTOR,
    EARTH_RADIUS_KM,
    KMEDOIDS_MAX_ITER,
    SYMMETRY_TOL,
    WAREHOUSE_ID,
)
from core.exceptions import ContractError, DomainError, ReferentialError
from models.schemas import Cluster, Donor
from utils.logger import get_logger

MODULE = "geo"
logger = get_logger(MODULE)

LatLon = Tuple[float, float]


def _check_latlon(p: LatLon) -> None:
    lat, lon = p
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        raise DomainError(MODULE, f"coordinate out of range: ({lat}, {lon})")


def haversine_km(a: LatLon, b: LatLon, circuity: float = CIRCUITY_FACTOR) -> float:
    """Great-circle distance scaled by a road circuity factor."""
    _check_latlon(a)
    _check_latlon(b)
    lat1, lon1, lat2, lon2 = map(math.radians, (a[0], a[1], b[0], b[1]))
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h))) * circuity


def haversine_matrix(points: Sequence[LatLon], circuity: float = CIRCUITY_FACTOR) -> np.ndarray:
    """Pairwise haversine distances (km) times circuity."""
    for p in points:
        _check_latlon(p)
    arr = np.radians(np.asarray(points, dtype=float).reshape(-1, 2))
    lat, lon = arr[:, 0][:, None], arr[:, 1][:, None]
    h = np.sin((lat - lat.T) / 2) ** 2 + np.cos(lat) * np.cos(lat.T) * np.sin((lon - lon.T) / 2) ** 2
    km = 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0))) * circuity
    np.fill_diagonal(km, 0.0)
    return km


class DistanceMatrix:
    """Symmetric pairwise driving distances in km over donors plus the warehouse.

    Asymmetric input is averaged with its transpose. Read-only after construction.
    """

    def __init__(self, ids: Sequence[str], km: np.ndarray, warehouse_id: str = WAREHOUSE_ID):
        ids = list(ids)
        km = np.array(km, dtype=float)
        if km.shape != (len(ids), len(ids)):
            raise ContractError(MODULE, f"matrix shape {km.shape} does not match {len(ids)} ids")
        if len(set(ids)) != len(ids):
            raise ContractError(MODULE, "duplicate ids in distance matrix")
        if warehouse_id not in ids:
            raise ReferentialError(MODULE, f"warehouse id '{warehouse_id}' missing from distance matrix",
                                   missing_id=warehouse_id)
        if np.any(~np.isfinite(km)) or np.any(km < 0):
            raise DomainError(MODULE, "distances must be finite and non-negative")
        if np.any(np.abs(np.diag(km)) > SYMMETRY_TOL):
            raise DomainError(MODULE, "distance matrix diagonal must be zero")
        km = 0.5 * (km + km.T)
        np.fill_diagonal(km, 0.0)
        km.setflags(write=False)
        self._ids = tuple(ids)
        self._index = {k: i for i, k in enumerate(ids)}
        self.km = km
        self.warehouse_id = warehouse_id
        self.warehouse_index = self._index[warehouse_id]

    @property
    def ids(self) -> Tuple[str, ...]:
        return self._ids

    @property
    def n(self) -> int:
        return len(self._ids)

    @property
    def donor_ids(self) -> List[str]:
        return [i for i in self._ids if i != self.warehouse_id]

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._index

    def index(self, node_id: str) -> int:
        try:
            return self._index[node_id]
        except KeyError:
            raise ReferentialError(MODULE, f"unknown id '{node_id}' in distance matrix", missing_id=node_id) from None

    def indices(self, node_ids: Sequence[str]) -> np.ndarray:
        return np.array([self.index(i) for i in node_ids], dtype=int)

    def distance(self, a: str, b: str) -> float:
        return float(self.km[self.index(a), self.index(b)])

    def from_warehouse(self, node_id: str) -> float:
        return float(self.km[self.warehouse_index, self.index(node_id)])

    def pairs(self):
        """All ordered pairs (from, to, km), row-major."""
        for i, a in enumerate(self._ids):
            for j, b in enumerate(self._ids):
                yield a, b, float(self.km[i, j])


class RouteProvider(Protocol):
    def distance_km(self, a: str, b: str) -> Optional[float]:
        """Distance from a to b, or None when unknown."""


class CachedMatrixProvider:
    """Distances read from a `from_id,to_id,km` file. A missing direction falls back to its reverse."""

    def __init__(self, pairs: Mapping[Tuple[str, str], float]):
        self._pairs = dict(pairs)

    def distance_km(self, a: str, b: str) -> Optional[float]:
        if (a, b) in self._pairs:
            return self._pairs[(a, b)]
        return self._pairs.get((b, a))


class HaversineProvider:
    """Great-circle distance times circuity, for nodes with coordinates."""

    def __init__(self, coordinates: Mapping[str, LatLon], circuity: float = CIRCUITY_FACTOR):
        self._coords = dict(coordinates)
        self.circuity = circuity

    def distance_km(self, a: str, b: str) -> Optional[float]:
        if a not in self._coords or b not in self._coords:
            return None
        return haversine_km(self._coords[a], self._coords[b], self.circuity)


def build_distance_matrix(
    node_ids: Sequence[str],
    primary: Optional[RouteProvider],
    fallback: Optional[RouteProvider] = None,
    warehouse_id: str = WAREHOUSE_ID,
) -> DistanceMatrix:
    """Assemble a matrix over the warehouse and the given nodes. Missing pairs are an error without a fallback."""
    ids = [warehouse_id] + [i for i in node_ids if i != warehouse_id]
    n = len(ids)
    km = np.zeros((n, n))
    filled = 0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            value = primary.distance_km(ids[i], ids[j]) if primary is not None else None
            if value is None and fallback is not None:
                value = fallback.distance_km(ids[i], ids[j])
                filled += value is not None
            if value is None:
                raise ReferentialError(MODULE, f"no distance between '{ids[i]}' and '{ids[j]}'", missing_id=ids[j])
            km[i, j] = value
    if filled:
        logger.info("Filled %d missing pairs with the fallback provider", filled)
    return DistanceMatrix(ids, km, warehouse_id=warehouse_id)


def haversine_distance_matrix(
    node_ids: Sequence[str],
    coordinates: Mapping[str, LatLon],
    circuity: float = CIRCUITY_FACTOR,
    warehouse_id: str = WAREHOUSE_ID,
) -> DistanceMatrix:
    """Vectorized haversine matrix over the warehouse and the given nodes, all of which need coordinates."""
    ids = [warehouse_id] + [i for i in node_ids if i != warehouse_id]
    missing = next((i for i in ids if i not in coordinates), None)
    if missing is not None:
        raise ReferentialError(MODULE, f"no coordinates for '{missing}'", missing_id=missing)
    km = haversine_matrix([coordinates[i] for i in ids], circuity)
    return DistanceMatrix(ids, km, warehouse_id=warehouse_id)


def attach_warehouse_distances(donors: Sequence[Donor], matrix: DistanceMatrix) -> List[Donor]:
    """Donors with `distance_from_warehouse` taken from the matrix."""
    return [d.model_copy(update={"distance_from_warehouse": matrix.from_warehouse(d.id)}) for d in donors]


# --- clustering --------------------------------------------------------------


class ClusteringResult:
    """Labels per point (clusters numbered by first member), plus the objective after each iteration."""

    def __init__(self, labels: np.ndarray, history: List[float]):
        self.labels = labels
        self.history = history

    @property
    def objective(self) -> float:
        return self.history[-1] if self.history else 0.0


def _canonical_labels(labels: np.ndarray) -> np.ndarray:
    """Renumber clusters in order of their lowest member index."""
    order: Dict[int, int] = {}
    for lab in labels:
        if int(lab) not in order:
            order[int(lab)] = len(order)
    return np.array([order[int(lab)] for lab in labels], dtype=int)


def _assign(D: np.ndarray, medoids: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nearest-medoid labels, nearest and second-nearest distances. Medoids own themselves."""
    k = medoids.size
    to_medoids = D[:, medoids]
    labels = np.argmin(to_medoids, axis=1)
    labels[medoids] = np.arange(k)
    nearest = to_medoids[np.arange(D.shape[0]), labels]
    if k > 1:
        masked = to_medoids.copy()
        masked[np.arange(D.shape[0]), labels] = np.inf
        second = masked.min(axis=1)
    else:
        second = np.full(D.shape[0], np.inf)
    return labels, nearest, second


def _best_swap(D: np.ndarray, medoids: np.ndarray, labels: np.ndarray, nearest: np.ndarray,
               second: np.ndarray) -> Tuple[float, int, int]:
    """Objective of the best single medoid/non-medoid swap as (objective, medoid slot, candidate)."""
    n, k = D.shape[0], medoids.size
    candidates = np.setdiff1d(np.arange(n), medoids)
    if candidates.size == 0:
        return float(nearest.sum()), -1, -1
    to_cand = D[:, candidates]
    keep = np.minimum(to_cand, nearest[:, None])
    gain = np.minimum(to_cand, second[:, None]) - keep
    owner = np.zeros((k, n))
    owner[labels, np.arange(n)] = 1.0
    totals = keep.sum(axis=0)[None, :] + owner @ gain
    slot, col = np.unravel_index(int(np.argmin(totals)), totals.shape)
    return float(totals[slot, col]), int(slot), int(candidates[col])


def kmedoids(D: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = KMEDOIDS_MAX_ITER) -> ClusteringResult:
    """k-medoids on a precomputed distance matrix.

    Alternating assignment / medoid update from random medoids, then single
    swaps while any swap lowers the total distance to the medoids.
    """
    n = D.shape[0]
    medoids = np.sort(rng.choice(n, size=k, replace=False))
    history: List[float] = []

    def record(objective: float) -> None:
        if history and objective > history[-1] + 1e-9 * max(1.0, history[-1]):
            raise AssertionError(f"k-medoids objective increased: {history[-1]} -> {objective}")
        history.append(objective)

    labels, nearest, second = _assign(D, medoids)
    for _ in range(max_iter):
        for j in range(k):
            if not np.any(labels == j):
                # reseed an empty cluster with the point farthest from its medoid
                medoids[j] = int(np.argmax(nearest))
                labels, nearest, second = _assign(D, medoids)
        record(float(nearest.sum()))

        changed = False
        for j in range(k):
            members = np.flatnonzero(labels == j)
            within = D[np.ix_(members, members)].sum(axis=1)
            current = within[np.flatnonzero(members == medoids[j])[0]]
            best = int(np.argmin(within))
            if within[best] < current - 1e-12 * max(1.0, current):
                medoids[j] = members[best]
                changed = True
        if changed:
            labels, nearest, second = _assign(D, medoids)
            continue

        objective, slot, candidate = _best_swap(D, medoids, labels, nearest, second)
        if slot < 0 or objective >= history[-1] - 1e-9 * max(1.0, history[-1]):
            break
        medoids[slot] = candidate
        labels, nearest, second = _assign(D, medoids)
    else:
        logger.warning("k-medoids stopped at the iteration cap (%d)", max_iter)
    return ClusteringResult(_canonical_labels(labels), history)


def _project(coords: np.ndarray) -> np.ndarray:
    """Local equirectangular projection to km."""
    lat0 = math.radians(float(np.mean(coords[:, 0])))
    rad = np.radians(coords)
    return np.column_stack([EARTH_RADIUS_KM * math.cos(lat0) * rad[:, 1], EARTH_RADIUS_KM * rad[:, 0]])


def kmeans_coordinates(coords: np.ndarray, k: int, rng: np.random.Generator,
                       max_iter: int = KMEDOIDS_MAX_ITER) -> ClusteringResult:
    """Lloyd iterations on projected lat/lon."""
    xy = _project(np.asarray(coords, dtype=float))
    n = xy.shape[0]
    centers = xy[np.sort(rng.choice(n, size=k, replace=False))].copy()
    labels = np.full(n, -1)
    history: List[float] = []
    for _ in range(max_iter):
        sq = ((xy[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(sq, axis=1)
        for j in range(k):
            if np.any(new_labels == j):
                continue
            # move the farthest point among clusters that can spare one
            sizes = np.bincount(new_labels, minlength=k)
            spread = sq[np.arange(n), new_labels]
            spread[sizes[new_labels] < 2] = -np.inf
            far = int(np.argmax(spread))
            new_labels[far] = j
            centers[j] = xy[far]
            sq[:, j] = ((xy - centers[j]) ** 2).sum(axis=1)
        for j in range(k):
            centers[j] = xy[new_labels == j].mean(axis=0)
        history.append(float(((xy - centers[new_labels]) ** 2).sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return ClusteringResult(_canonical_labels(labels), history)


def cluster_donors(
    matrix: DistanceMatrix,
    k: int,
    rng: np.random.Generator,
    donor_ids: Optional[Sequence[str]] = None,
    method: str = "kmedoids",
    coordinates: Optional[Mapping[str, LatLon]] = None,
) -> List[Cluster]:
    """Partition donors into exactly k non-empty clusters. Costs are left unset."""
    ids = list(donor_ids) if donor_ids is not None else matrix.donor_ids
    n = len(ids)
    if not 1 <= k <= n:
        raise DomainError(MODULE, f"cluster count must lie in [1, {n}], got {k}")
    if method == "kmeans":
        if coordinates is None or any(i not in coordinates for i in ids):
            raise DomainError(MODULE, "k-means clustering needs coordinates for every donor")
        result = kmeans_coordinates(np.array([coordinates[i] for i in ids]), k, rng)
    elif method == "kmedoids":
        idx = matrix.indices(ids)
        result = kmedoids(matrix.km[np.ix_(idx, idx)], k, rng)
    else:
        raise DomainError(MODULE, f"unknown clustering method '{method}'")
    clusters = [Cluster(member_ids=tuple(ids[i] for i in np.flatnonzero(result.labels == j))) for j in range(k)]
    logger.info("Clustered %d donors into %d clusters (%s, %d iterations, objective %.3f)",
                n, k, method, len(result.history), result.objective)
    return clusters


def cluster_cost(c: Cluster, matrix: DistanceMatrix) -> float:
    """Round trip at the members' mean warehouse distance plus the cheapest member-to-all sum."""
    idx = matrix.indices(c.member_ids) if all(m in matrix for m in c.member_ids) else None
    if idx is None:
        missing = next(m for m in c.member_ids if m not in matrix)
        raise ContractError(MODULE, f"cluster member '{missing}' not in distance matrix")
    to_warehouse = matrix.km[matrix.warehouse_index, idx]
    tour = matrix.km[np.ix_(idx, idx)].sum(axis=0).min()
    return float(2.0 / len(idx) * to_warehouse.sum() + tour)


def with_costs(clusters: Sequence[Cluster], matrix: DistanceMatrix) -> List[Cluster]:
    """Copies of the clusters with their visit costs filled in."""
    return [c.model_copy(update={"cost": cluster_cost(c, matrix)}) for c in clusters]
