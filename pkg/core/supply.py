"""Per-donor supply models, daily supply generation and leftover accumulation."""

import math
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import linregress

from config.settings import CATEGORY_FITS, OVERALL_FIT, SCALE_INTERCEPT, SCALE_SLOPE
from core.evt import pot_from_uniforms
from core.exceptions import ConfigurationError, ContractError, DomainError, InsufficientDataError
from models.schemas import CategoryFits, Donor, DonorCategory, GpdParams, PotModel, ScaleModel, SupplyState
from utils.logger import get_logger

MODULE = "supply"
logger = get_logger(MODULE)


def predict_scale(square_footage: float, shape: float, model: ScaleModel) -> float:
    """GPD scale for a donor of the given size: x^m * (1 - zeta) * 10^b.

    Chosen so that the GPD mean (location 0) equals 10^(m*log10(x) + b).
    """
    if not square_footage > 0 or not math.isfinite(square_footage):
        raise DomainError(MODULE, f"square footage must be positive, got {square_footage}")
    if shape >= 1:
        raise DomainError(MODULE, f"scale prediction needs shape < 1, got {shape}")
    return square_footage ** model.slope * (1.0 - shape) * 10.0 ** model.intercept


def fit_scale_model(points: Iterable[Tuple[float, float]]) -> ScaleModel:
    """Least squares of log10(mean daily supply) on log10(square footage)."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise InsufficientDataError(MODULE, f"scale fit needs at least 3 points, got {len(pts)}")
    if np.any(pts <= 0) or np.any(~np.isfinite(pts)):
        raise InsufficientDataError(MODULE, "scale fit needs positive, finite square footage and mean supply")
    lx, ly = np.log10(pts[:, 0]), np.log10(pts[:, 1])
    if np.ptp(lx) == 0.0:
        raise InsufficientDataError(MODULE, "scale fit needs at least two distinct square footages")
    fit = linregress(lx, ly)
    n = pts.shape[0]
    r2 = float(fit.rvalue ** 2)
    adjusted = 1.0 - (1.0 - r2) * (n - 1) / (n - 2) if n > 2 else None
    logger.info("Scale model: slope=%.4f intercept=%.4f R2=%.3f (n=%d)", fit.slope, fit.intercept, r2, n)
    return ScaleModel(slope=float(fit.slope), intercept=float(fit.intercept),
                      r_squared=r2, adjusted_r_squared=adjusted, n_points=n)


def donor_pot_model(d: Donor, category_fits: Dict[DonorCategory, PotModel], scale_model: ScaleModel) -> PotModel:
    """Category rate and shape; scale predicted from square footage when the donor has one."""
    fit = category_fits.get(d.category)
    if fit is None:
        raise ConfigurationError(MODULE, f"no supply fit for category '{d.category.value}' (donor {d.id})")
    if fit.tail is None:
        return PotModel(threshold=0.0, rate=fit.rate, tail=None)
    shape = fit.tail.shape
    scale = fit.tail.scale
    if d.square_footage is not None:
        if shape >= 1:
            raise ConfigurationError(
                MODULE, f"category '{d.category.value}' has shape {shape} >= 1; cannot predict scale for donor {d.id}")
        scale = predict_scale(d.square_footage, shape, scale_model)
    return PotModel(threshold=0.0, rate=fit.rate, tail=GpdParams(location=0.0, scale=scale, shape=shape))


class SupplyModelTable:
    """Column view of per-donor POT models for vectorized daily draws."""

    def __init__(self, models: Sequence[PotModel]):
        self.size = len(models)
        self.rate = np.array([m.rate if m.tail is not None else 0.0 for m in models])
        self.threshold = np.array([m.threshold for m in models])
        self.location = np.array([m.tail.location if m.tail else 0.0 for m in models])
        self.scale = np.array([m.tail.scale if m.tail else 1.0 for m in models])
        self.shape = np.array([m.tail.shape if m.tail else 0.0 for m in models])

    def draw(self, uniforms: np.ndarray) -> np.ndarray:
        """One value per donor from an (n, 2) block of U[0,1) draws."""
        u1 = uniforms[:, 0]
        u2 = 1.0 - uniforms[:, 1]
        return pot_from_uniforms(self.rate, self.threshold, self.location, self.scale, self.shape, u1, u2)


def generate_daily_supply(
    models,
    state: SupplyState,
    epsilon: float,
    rng: np.random.Generator,
    stream_ids: Optional[Sequence[int]] = None,
) -> SupplyState:
    """fresh_i = new draw_i + epsilon * leftover_i. Leftover passes through unchanged.

    `stream_ids` maps each donor to a row of the day's uniform block so a donor's
    draws do not depend on which other donors take part.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise DomainError(MODULE, f"epsilon must lie in [0, 1], got {epsilon}")
    table = models if isinstance(models, SupplyModelTable) else SupplyModelTable(models)
    if state.leftover.shape[0] != table.size:
        raise ContractError(MODULE, f"state has {state.leftover.shape[0]} donors, models have {table.size}")
    if stream_ids is None:
        uniforms = rng.random((table.size, 2))
    else:
        ids = np.asarray(stream_ids, dtype=int)
        uniforms = rng.random((int(ids.max()) + 1 if ids.size else 0, 2))[ids]
    fresh = table.draw(uniforms) + epsilon * state.leftover
    return SupplyState(fresh=fresh, leftover=state.leftover)


def retain_unpicked(fresh: Sequence[float], selection: Sequence[bool]) -> np.ndarray:
    """Leftover after pickups: fresh where not selected, 0 where selected."""
    fresh = np.asarray(fresh, dtype=float)
    sel = np.asarray(selection, dtype=bool)
    if fresh.shape != sel.shape:
        raise ContractError(MODULE, f"fresh has {fresh.shape[0]} donors, selection has {sel.shape[0]}")
    return np.where(sel, 0.0, fresh)


def default_category_fits() -> CategoryFits:
    """Built-in category table and square-footage scale model."""
    def pot(row: dict) -> PotModel:
        return PotModel(threshold=row["threshold"], rate=row["rate"],
                        tail=GpdParams(location=row["location"], scale=row["scale"], shape=row["shape"]))

    return CategoryFits(
        categories={DonorCategory(name): pot(row) for name, row in CATEGORY_FITS.items()},
        overall=pot(OVERALL_FIT),
        scale_model=ScaleModel(slope=SCALE_SLOPE, intercept=SCALE_INTERCEPT),
    )
