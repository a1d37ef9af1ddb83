"""Shared fixtures: built-in fits, small donor sets and their distance matrices."""

from pathlib import Path

import numpy as np
import pytest

from config.settings import WAREHOUSE_ID, WAREHOUSE_LAT, WAREHOUSE_LON
from core.geo import DistanceMatrix, HaversineProvider, build_distance_matrix
from core.simulator import Scenario
from core.supply import default_category_fits
from core.synthetic import generate_synthetic
from models.schemas import ConstantDemand, Donor, DonorCategory, PotModel, SimConfig
from storage.json_storage import load_profile

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def category_fits():
    return default_category_fits()


@pytest.fixture(scope="session")
def small_donors():
    """Twelve grocers within ~10 km of the warehouse, a few with square footage."""
    rng = np.random.default_rng(7)
    lat = WAREHOUSE_LAT + rng.uniform(-0.08, 0.08, size=12)
    lon = WAREHOUSE_LON + rng.uniform(-0.1, 0.1, size=12)
    return tuple(
        Donor(
            id=f"G{i:02d}",
            name=f"grocer {i}",
            category=DonorCategory.GROCER,
            square_footage=50000.0 + 10000.0 * i if i % 3 == 0 else None,
            latitude=float(lat[i]),
            longitude=float(lon[i]),
        )
        for i in range(12)
    )


@pytest.fixture(scope="session")
def small_matrix(small_donors) -> DistanceMatrix:
    coords = {d.id: (d.latitude, d.longitude) for d in small_donors}
    coords[WAREHOUSE_ID] = (WAREHOUSE_LAT, WAREHOUSE_LON)
    return build_distance_matrix([d.id for d in small_donors], HaversineProvider(coords))


@pytest.fixture(scope="session")
def small_scenario(small_donors, small_matrix, category_fits) -> Scenario:
    return Scenario(small_donors, small_matrix, category_fits.categories, category_fits.scale_model)


@pytest.fixture(scope="session")
def silent_scenario(small_donors, small_matrix, category_fits) -> Scenario:
    """Same donors, but no category ever donates."""
    silent = {c: PotModel(threshold=0.0, rate=0.0, tail=None) for c in DonorCategory}
    return Scenario(small_donors, small_matrix, silent, category_fits.scale_model)


@pytest.fixture
def short_config() -> SimConfig:
    return SimConfig(days=30, epsilon=0.5, seed=11, cluster_count=4, demand=ConstantDemand(amount=800.0))


@pytest.fixture(scope="session")
def synthetic_90(category_fits) -> Scenario:
    donors, matrix = generate_synthetic(load_profile(DATA_DIR / "synthetic_profile_90.json"), seed=1)
    return Scenario(tuple(donors), matrix, category_fits.categories, category_fits.scale_model)


@pytest.fixture(scope="session")
def synthetic_156(category_fits) -> Scenario:
    donors, matrix = generate_synthetic(load_profile(DATA_DIR / "synthetic_profile_156.json"), seed=1)
    return Scenario(tuple(donors), matrix, category_fits.categories, category_fits.scale_model)
