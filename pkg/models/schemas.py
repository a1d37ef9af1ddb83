"""Pydantic schemas for the food rescue simulator."""

import math
from enum import Enum
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config.settings import (
    CONFIG_SCHEMA_VERSION,
    DEFAULT_DAYS,
    DEFAULT_EPSILON,
    DEFAULT_OVERAGE,
    DEFAULT_SEED,
    DEMAND_CURRENT_DONATED,
    FITS_SCHEMA_VERSION,
    SOLVER_NODE_BUDGET,
)


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


# --- evt ---------------------------------------------------------------------


class GpdParams(_Frozen):
    """Generalized Pareto parameters, lbs."""
    location: float = 0.0
    scale: float = Field(gt=0)
    shape: float


class PotModel(_Frozen):
    """Peaks-over-threshold model: event rate plus a GPD tail for exceedances.

    `tail` is None when the fitted data had no exceedances (rate 0).
    """
    threshold: float = 0.0
    rate: float = Field(ge=0, le=1)
    tail: Optional[GpdParams] = None

    @model_validator(mode="after")
    def _tail_present_when_events(self) -> "PotModel":
        if self.rate > 0 and self.tail is None:
            raise ValueError("a positive rate needs a tail distribution")
        return self


# --- supply ------------------------------------------------------------------


class DonorCategory(str, Enum):
    GROCER = "grocer"
    MANUFACTURER = "manufacturer"
    FARM = "farm"
    INDIVIDUAL = "individual"


class Donor(_Frozen):
    """A supply source. Distance is km to the warehouse, filled from the distance matrix when absent."""
    id: str = Field(min_length=1)
    name: str = ""
    category: DonorCategory
    square_footage: Optional[float] = Field(default=None, gt=0)
    latitude: Optional[float] = Field(default=None, ge=-90, le=90)
    longitude: Optional[float] = Field(default=None, ge=-180, le=180)
    distance_from_warehouse: Optional[float] = Field(default=None, ge=0)

    @property
    def has_coordinates(self) -> bool:
        return self.latitude is not None and self.longitude is not None


class ScaleModel(_Frozen):
    """log10(mean supply) = slope * log10(square footage) + intercept."""
    slope: float
    intercept: float
    r_squared: Optional[float] = None
    adjusted_r_squared: Optional[float] = None
    n_points: Optional[int] = None

    @field_validator("slope", "intercept")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v


class SupplyState(BaseModel):
    """Per-donor fresh supply for the day and leftover carried from yesterday, lbs."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    fresh: np.ndarray
    leftover: np.ndarray

    @model_validator(mode="after")
    def _check(self) -> "SupplyState":
        if self.fresh.shape != self.leftover.shape:
            raise ValueError("fresh and leftover must have equal length")
        if np.any(self.fresh < 0) or np.any(self.leftover < 0):
            raise ValueError("supply entries must be non-negative")
        return self

    @classmethod
    def empty(cls, n: int) -> "SupplyState":
        return cls(fresh=np.zeros(n), leftover=np.zeros(n))


class CategoryFits(_Frozen):
    """Fits file content: one POT model per category plus the square-footage scale model."""
    schema_version: int = FITS_SCHEMA_VERSION
    categories: Dict[DonorCategory, PotModel]
    overall: Optional[PotModel] = None
    scale_model: ScaleModel


# --- demand ------------------------------------------------------------------


class ConstantDemand(_Frozen):
    kind: Literal["constant"] = "constant"
    amount: float = Field(ge=0)


class GaussianDemand(_Frozen):
    """Normal daily demand, negative draws clamp to 0."""
    kind: Literal["gaussian"] = "gaussian"
    mean: float
    sd: float = Field(ge=0)


DemandSpec = Annotated[Union[ConstantDemand, GaussianDemand], Field(discriminator="kind")]


class Warehouse(_Frozen):
    stock: float = Field(default=0.0, ge=0)
    enabled: bool = True


# --- geo ---------------------------------------------------------------------


class Cluster(_Frozen):
    """Donors always visited together. `cost` is the visit cost in km, None until computed."""
    member_ids: Tuple[str, ...] = Field(min_length=1)
    cost: Optional[float] = Field(default=None, ge=0)


# --- solver ------------------------------------------------------------------


class PickupProblem(_Frozen):
    """One day's selection problem: per-unit costs (km), supplies (lbs) and demand (lbs)."""
    costs: Tuple[float, ...]
    supplies: Tuple[float, ...]
    demand: float = Field(ge=0)

    @model_validator(mode="after")
    def _check(self) -> "PickupProblem":
        if len(self.costs) != len(self.supplies):
            raise ValueError("costs and supplies must have equal length")
        for v in self.costs + self.supplies + (self.demand,):
            if not math.isfinite(v) or v < 0:
                raise ValueError("costs, supplies and demand must be finite and non-negative")
        return self

    @property
    def size(self) -> int:
        return len(self.costs)


class Schedule(_Frozen):
    """Selection vector with its totals. `optimal` is False when the node budget ran out."""
    selected: Tuple[bool, ...]
    total_cost: float
    total_supply: float
    feasible: bool
    optimal: bool = True
    nodes: int = 0

    @property
    def selected_indices(self) -> Tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.selected) if s)


# --- sim ---------------------------------------------------------------------


class SimConfig(_Frozen):
    """Full experiment parameterization."""
    days: int = Field(default=DEFAULT_DAYS, ge=1)
    epsilon: float = Field(default=DEFAULT_EPSILON, ge=0, le=1)
    demand: DemandSpec = ConstantDemand(amount=DEMAND_CURRENT_DONATED)
    seed: int = Field(default=DEFAULT_SEED, ge=0, lt=2**64)
    warehouse_enabled: bool = True
    overage_factor: float = Field(default=DEFAULT_OVERAGE, ge=0)
    max_donor_distance_km: Optional[float] = Field(default=None, gt=0)
    cluster_count: Optional[int] = Field(default=None, ge=1)
    donor_fraction: Optional[float] = Field(default=None, gt=0, le=1)
    clustering_method: Literal["kmedoids", "kmeans"] = "kmedoids"
    node_budget: int = Field(default=SOLVER_NODE_BUDGET, ge=1)


class SimConfigFile(_Frozen):
    """On-disk config: versioned wrapper around SimConfig. Unknown keys are rejected."""
    schema_version: Literal[1] = CONFIG_SCHEMA_VERSION
    simulation: SimConfig


class DayRecord(_Frozen):
    day: int
    total_demand: float
    net_demand: float
    recovered: float
    cost: float
    excess: float
    warehouse_stock: float
    underrun: bool
    optimality_proven: bool = True

    @model_validator(mode="after")
    def _underrun_matches_excess(self) -> "DayRecord":
        if self.underrun != (self.excess < 0):
            raise ValueError("underrun must hold exactly when excess is negative")
        return self


class SimSummary(_Frozen):
    mean_cost: float
    mean_excess: float
    underrun_days: int
    total_recovered: float
    days: int
    mean_recovered: float = 0.0
    unproven_optimal_days: int = 0
    conservation_checks: int = 0


class SweepRow(_Frozen):
    """One sweep cell, keyed by its varied parameters in grid order."""
    params: Dict[str, float]
    mean_cost: float
    mean_excess: float
    underrun_days: int
    mean_recovered: float


class RunManifest(BaseModel):
    """Reproducibility record written next to every output set."""
    command: str
    tool_version: str
    seed: Optional[int] = None
    config: dict = {}
    input_digests: Dict[str, str] = {}
    outputs: List[str] = []
    started_at: str
    duration_seconds: float


# --- synthetic data ----------------------------------------------------------


class CategoryProfile(_Frozen):
    count: int = Field(ge=0)
    sqft_fraction: float = Field(default=0.0, ge=0, le=1)
    sqft_min: float = Field(default=1000.0, gt=0)
    sqft_max: float = Field(default=100000.0, gt=0)
    radius_min_km: float = Field(default=0.5, ge=0)
    radius_max_km: float = Field(default=30.0, gt=0)

    @model_validator(mode="after")
    def _ranges(self) -> "CategoryProfile":
        if self.sqft_max < self.sqft_min or self.radius_max_km < self.radius_min_km:
            raise ValueError("range maximum below minimum")
        return self


class SyntheticProfile(_Frozen):
    """Donor-set generator profile: category mix, square footage and distance ranges."""
    warehouse_lat: float = Field(ge=-90, le=90)
    warehouse_lon: float = Field(ge=-180, le=180)
    categories: Dict[DonorCategory, CategoryProfile]

    @property
    def total(self) -> int:
        return sum(c.count for c in self.categories.values())
