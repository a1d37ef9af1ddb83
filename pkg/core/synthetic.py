"""Synthetic donor sets around a warehouse, for runs without real donor data."""

import math
from typing import List, Tuple

import numpy as np

from config.settings import EARTH_RADIUS_KM, WAREHOUSE_ID
from core.exceptions import ConfigurationError
from core.geo import DistanceMatrix, attach_warehouse_distances, haversine_distance_matrix
from core.rng import Stream, substream
from models.schemas import Donor, DonorCategory, SyntheticProfile
from utils.logger import get_logger

MODULE = "cli"
logger = get_logger(MODULE)

# generation order, so a profile's donor ids do not depend on its JSON key order
CATEGORY_ORDER = (DonorCategory.GROCER, DonorCategory.MANUFACTURER, DonorCategory.FARM, DonorCategory.INDIVIDUAL)


def _offset(lat: float, lon: float, radius_km: np.ndarray, bearing: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Destination points at great-circle distance `radius_km` and `bearing` (radians) from (lat, lon)."""
    phi1, lam1 = math.radians(lat), math.radians(lon)
    delta = radius_km / EARTH_RADIUS_KM
    phi2 = np.arcsin(math.sin(phi1) * np.cos(delta) + math.cos(phi1) * np.sin(delta) * np.cos(bearing))
    lam2 = lam1 + np.arctan2(np.sin(bearing) * np.sin(delta) * math.cos(phi1),
                             np.cos(delta) - math.sin(phi1) * np.sin(phi2))
    lon2 = (np.degrees(lam2) + 540.0) % 360.0 - 180.0
    return np.degrees(phi2), lon2


def generate_donors(profile: SyntheticProfile, seed: int) -> List[Donor]:
    """Donors placed uniformly by area in each category's ring around the warehouse.

    Square footage is log-uniform and present for `sqft_fraction` of a category.
    """
    if profile.total <= 0:
        raise ConfigurationError(MODULE, "synthetic profile has no donors")
    rng = substream(seed, Stream.SYNTHETIC)
    donors: List[Donor] = []
    width = len(str(profile.total))
    for category in CATEGORY_ORDER:
        spec = profile.categories.get(category)
        if spec is None or spec.count == 0:
            continue
        n = spec.count
        r2 = rng.uniform(spec.radius_min_km ** 2, spec.radius_max_km ** 2, size=n)
        bearing = rng.uniform(0.0, 2.0 * math.pi, size=n)
        lat, lon = _offset(profile.warehouse_lat, profile.warehouse_lon, np.sqrt(r2), bearing)
        has_sqft = rng.random(n) < spec.sqft_fraction
        sqft = np.exp(rng.uniform(math.log(spec.sqft_min), math.log(spec.sqft_max), size=n))
        for i in range(n):
            number = len(donors) + 1
            donors.append(Donor(
                id=f"D{number:0{width}d}",
                name=f"{category.value} {i + 1}",
                category=category,
                square_footage=round(float(sqft[i]), 1) if has_sqft[i] else None,
                latitude=round(float(lat[i]), 6),
                longitude=round(float(lon[i]), 6),
            ))
    return donors


def generate_synthetic(profile: SyntheticProfile, seed: int) -> Tuple[List[Donor], DistanceMatrix]:
    """Donor set plus its haversine distance matrix; donors carry their warehouse distance."""
    donors = generate_donors(profile, seed)
    coords = {d.id: (d.latitude, d.longitude) for d in donors}
    coords[WAREHOUSE_ID] = (profile.warehouse_lat, profile.warehouse_lon)
    matrix = haversine_distance_matrix([d.id for d in donors], coords)
    logger.info("Generated %d synthetic donors (seed %d)", len(donors), seed)
    return attach_warehouse_distances(donors, matrix), matrix
