"""Models package."""

from .schemas import (
    CategoryFits,
    CategoryProfile,
    Cluster,
    ConstantDemand,
    DayRecord,
    DemandSpec,
    Donor,
    DonorCategory,
    GaussianDemand,
    GpdParams,
    PickupProblem,
    PotModel,
    RunManifest,
    ScaleModel,
    Schedule,
    SimConfig,
    SimConfigFile,
    SimSummary,
    SupplyState,
    SweepRow,
    SyntheticProfile,
    Warehouse,
)

__all__ = [
    "CategoryFits",
    "CategoryProfile",
    "Cluster",
    "ConstantDemand",
    "DayRecord",
    "DemandSpec",
    "Donor",
    "DonorCategory",
    "GaussianDemand",
    "GpdParams",
    "PickupProblem",
    "PotModel",
    "RunManifest",
    "ScaleModel",
    "Schedule",
    "SimConfig",
    "SimConfigFile",
    "SimSummary",
    "SupplyState",
    "SweepRow",
    "SyntheticProfile",
    "Warehouse",
]
