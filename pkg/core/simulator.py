"""Multiday Monte Carlo food redistribution simulation and parameter sweeps."""

import math
from multiprocessing import Pool
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from core.demand import begin_day, daily_demand, end_day
from core.exceptions import ConfigurationError, DomainError, InvariantError, ReferentialError
from core.geo import DistanceMatrix, cluster_donors, with_costs
from core.rng import Stream, substream
from core.solver import solve_daily, verify_schedule
from core.supply import SupplyModelTable, donor_pot_model, generate_daily_supply, retain_unpicked
from config.settings import MEMBERS_PER_CLUSTER
from models.schemas import (
    Cluster,
    ConstantDemand,
    DayRecord,
    Donor,
    DonorCategory,
    PickupProblem,
    PotModel,
    ScaleModel,
    SimConfig,
    SimSummary,
    SupplyState,
    SweepRow,
    Warehouse,
)
from utils.logger import get_logger

MODULE = "sim"
logger = get_logger(MODULE)

# demand used to measure saturation: above any recoverable daily supply
SATURATION_DEMAND = 1e12

ProblemHook = Callable[[int, PickupProblem], None]


class Scenario(NamedTuple):
    """Shared, read-only simulation inputs."""
    donors: Tuple[Donor, ...]
    matrix: DistanceMatrix
    category_fits: Dict[DonorCategory, PotModel]
    scale_model: ScaleModel


class PreparedRun(NamedTuple):
    donors: List[Donor]
    stream_ids: np.ndarray
    clusters: List[Cluster]
    membership: np.ndarray
    models: SupplyModelTable


def configure(cfg: SimConfig, **changes) -> SimConfig:
    """Copy of `cfg` with changes applied and validated."""
    data = cfg.model_dump()
    data.update(changes)
    return SimConfig.model_validate(data)


def _warehouse_distance(d: Donor, matrix: DistanceMatrix) -> float:
    if d.id in matrix:
        return matrix.from_warehouse(d.id)
    if d.distance_from_warehouse is not None:
        return d.distance_from_warehouse
    raise ReferentialError(MODULE, f"donor '{d.id}' has no warehouse distance", missing_id=d.id)


def select_donors(cfg: SimConfig, donors: Sequence[Donor], matrix: DistanceMatrix) -> Tuple[List[Donor], np.ndarray]:
    """Apply the distance filter, then nested participation subsampling.

    Returns the participating donors in file order with their file positions.
    Subsamples for one seed are nested: a larger fraction contains every smaller one.
    """
    positions = list(range(len(donors)))
    if cfg.max_donor_distance_km is not None:
        positions = [i for i in positions if _warehouse_distance(donors[i], matrix) <= cfg.max_donor_distance_km]
    if cfg.donor_fraction is not None and cfg.donor_fraction < 1.0:
        order = substream(cfg.seed, Stream.PARTICIPATION).permutation(len(positions))
        take = max(1, math.ceil(cfg.donor_fraction * len(positions))) if positions else 0
        positions = sorted(positions[i] for i in order[:take])
    if not positions:
        raise ConfigurationError(MODULE, "no donors left after distance filter and participation sampling")
    return [donors[i] for i in positions], np.array(positions, dtype=int)


def prepare(cfg: SimConfig, donors: Sequence[Donor], matrix: DistanceMatrix,
            category_fits: Dict[DonorCategory, PotModel], scale_model: ScaleModel) -> PreparedRun:
    """Filter and sample donors, cluster them, and build their supply models."""
    if not donors:
        raise ConfigurationError(MODULE, "donor set is empty")
    chosen, stream_ids = select_donors(cfg, donors, matrix)
    models = SupplyModelTable([donor_pot_model(d, category_fits, scale_model) for d in chosen])

    n = len(chosen)
    k = cfg.cluster_count or math.ceil(n / MEMBERS_PER_CLUSTER)
    if k > n:
        logger.warning("Cluster count %d exceeds %d participating donors; using %d", k, n, n)
        k = n
    coordinates = {d.id: (d.latitude, d.longitude) for d in chosen if d.has_coordinates}
    clusters = cluster_donors(
        matrix, k, substream(cfg.seed, Stream.CLUSTER),
        donor_ids=[d.id for d in chosen], method=cfg.clustering_method, coordinates=coordinates,
    )
    clusters = with_costs(clusters, matrix)
    position = {d.id: i for i, d in enumerate(chosen)}
    membership = np.zeros(n, dtype=int)
    for j, c in enumerate(clusters):
        for member in c.member_ids:
            membership[position[member]] = j
    return PreparedRun(chosen, stream_ids, clusters, membership, models)


class ConservationLedger:
    """Checks daily warehouse accounting and supply bounds; counts the checks made."""

    def __init__(self, epsilon: float, enabled: bool):
        self.epsilon = epsilon
        self.enabled = enabled
        self.checks = 0

    def check(self, day: int, prev_stock: float, carry: float, recovered: float, net: float,
              stock: float, available: float) -> None:
        excess = recovered - net
        expected = self.epsilon * prev_stock - carry + max(0.0, excess) if self.enabled else 0.0
        tol = 1e-9 * max(1.0, abs(expected), prev_stock)
        if stock < 0:
            raise InvariantError(MODULE, f"day {day}: negative warehouse stock {stock}")
        if abs(stock - expected) > tol:
            raise InvariantError(MODULE, f"day {day}: warehouse stock {stock} != expected {expected}")
        if recovered > available + 1e-9 * max(1.0, available):
            raise InvariantError(MODULE, f"day {day}: recovered {recovered} exceeds available supply {available}")
        if carry < 0 or carry > self.epsilon * prev_stock + tol:
            raise InvariantError(MODULE, f"day {day}: carry {carry} outside [0, decayed stock]")
        self.checks += 1


def summarize(records: Sequence[DayRecord], conservation_checks: int = 0) -> SimSummary:
    """Means and counts over the day records. Zero days gives an all-zero summary."""
    days = len(records)
    if days == 0:
        return SimSummary(mean_cost=0.0, mean_excess=0.0, underrun_days=0, total_recovered=0.0, days=0,
                          conservation_checks=conservation_checks)
    total_recovered = math.fsum(r.recovered for r in records)
    return SimSummary(
        mean_cost=math.fsum(r.cost for r in records) / days,
        mean_excess=math.fsum(r.excess for r in records) / days,
        underrun_days=sum(r.underrun for r in records),
        total_recovered=total_recovered,
        days=days,
        mean_recovered=total_recovered / days,
        unproven_optimal_days=sum(not r.optimality_proven for r in records),
        conservation_checks=conservation_checks,
    )


def run_prepared(cfg: SimConfig, run: PreparedRun,
                 on_problem: Optional[ProblemHook] = None) -> Tuple[List[DayRecord], SimSummary]:
    """Day loop over an already clustered donor set. `on_problem` sees each day's pickup problem."""
    n = len(run.donors)
    costs = tuple(float(c.cost) for c in run.clusters)
    k = len(costs)
    warehouse = Warehouse(stock=0.0, enabled=cfg.warehouse_enabled)
    leftover = np.zeros(n)
    ledger = ConservationLedger(cfg.epsilon, cfg.warehouse_enabled)
    records: List[DayRecord] = []

    for t in range(cfg.days):
        state = generate_daily_supply(run.models, SupplyState(fresh=np.zeros(n), leftover=leftover), cfg.epsilon,
                                      substream(cfg.seed, Stream.SUPPLY, t), stream_ids=run.stream_ids)
        cluster_supply = np.bincount(run.membership, weights=state.fresh, minlength=k)

        total_demand = daily_demand(cfg.demand, substream(cfg.seed, Stream.DEMAND, t))
        opening = begin_day(warehouse, cfg.epsilon, total_demand)
        target = opening.net_demand * (1.0 + cfg.overage_factor)

        problem = PickupProblem(costs=costs, supplies=tuple(float(s) for s in cluster_supply), demand=target)
        if on_problem is not None:
            on_problem(t + 1, problem)
        schedule = solve_daily(problem, node_budget=cfg.node_budget)
        verify_schedule(problem, schedule)
        picked = np.asarray(schedule.selected, dtype=bool)[run.membership]
        recovered = schedule.total_supply
        leftover = retain_unpicked(state.fresh, picked)
        closing = end_day(opening.warehouse, recovered, opening.net_demand)

        ledger.check(t + 1, warehouse.stock, opening.carry_consumed, recovered, opening.net_demand,
                     closing.stock, float(state.fresh.sum()))
        excess = recovered - opening.net_demand
        records.append(DayRecord(
            day=t + 1,
            total_demand=total_demand,
            net_demand=opening.net_demand,
            recovered=recovered,
            cost=schedule.total_cost,
            excess=excess,
            warehouse_stock=closing.stock,
            underrun=excess < 0,
            optimality_proven=schedule.optimal,
        ))
        if not schedule.optimal:
            logger.warning("Day %d: optimality not proven within %d nodes", t + 1, cfg.node_budget)
        logger.debug("Day %d: demand=%.1f net=%.1f recovered=%.1f cost=%.2f stock=%.1f",
                     t + 1, total_demand, opening.net_demand, recovered, schedule.total_cost, closing.stock)
        warehouse = closing

    summary = summarize(records, ledger.checks)
    logger.info("Simulated %d days over %d donors in %d clusters: mean cost %.2f km, mean excess %.2f lbs, "
                "%d underrun days", cfg.days, n, k, summary.mean_cost, summary.mean_excess, summary.underrun_days)
    return records, summary


def run_simulation(cfg: SimConfig, donors: Sequence[Donor], matrix: DistanceMatrix,
                   category_fits: Dict[DonorCategory, PotModel],
                   scale_model: ScaleModel,
                   on_problem: Optional[ProblemHook] = None) -> Tuple[List[DayRecord], SimSummary]:
    """One full simulation. Deterministic given the config and inputs."""
    return run_prepared(cfg, prepare(cfg, donors, matrix, category_fits, scale_model), on_problem)


def all_clusters_cost(cfg: SimConfig, scenario: Scenario) -> float:
    """Cost of visiting every cluster once, the ceiling on any day's cost."""
    run = prepare(cfg, scenario.donors, scenario.matrix, scenario.category_fits, scenario.scale_model)
    return math.fsum(c.cost for c in run.clusters)


# --- sweeps ------------------------------------------------------------------


def _run_cell(cfg: SimConfig, scenario: Scenario) -> SimSummary:
    _, summary = run_simulation(cfg, scenario.donors, scenario.matrix, scenario.category_fits, scenario.scale_model)
    return summary


def _run_cells(configs: List[SimConfig], scenario: Scenario, workers: int) -> List[SimSummary]:
    if workers > 1 and len(configs) > 1:
        with Pool(min(workers, len(configs))) as pool:
            return pool.starmap(_run_cell, [(c, scenario) for c in configs])
    return [_run_cell(c, scenario) for c in configs]


def _row(params: Dict[str, float], s: SimSummary) -> SweepRow:
    return SweepRow(params=params, mean_cost=s.mean_cost, mean_excess=s.mean_excess,
                    underrun_days=s.underrun_days, mean_recovered=s.mean_recovered)


def _check_grid(name: str, grid: Sequence[float]) -> List[float]:
    values = [float(v) for v in grid]
    if not values:
        raise DomainError(MODULE, f"{name} grid is empty")
    return values


def sweep_epsilon(cfg: SimConfig, grid: Sequence[float], scenario: Scenario, workers: int = 1) -> List[SweepRow]:
    """One simulation per epsilon, same seed everywhere."""
    grid = _check_grid("epsilon", grid)
    if any(not 0.0 <= e <= 1.0 for e in grid):
        raise DomainError(MODULE, "epsilon grid values must lie in [0, 1]")
    configs = [configure(cfg, epsilon=e) for e in grid]
    summaries = _run_cells(configs, scenario, workers)
    for e, s in zip(grid, summaries):
        logger.info("epsilon=%.3f: %d underrun days", e, s.underrun_days)
    return [_row({"epsilon": e}, s) for e, s in zip(grid, summaries)]


def sweep_demand(cfg: SimConfig, demand_grid: Sequence[float], scenario: Scenario,
                 workers: int = 1) -> List[SweepRow]:
    """One simulation per constant daily demand. Mean recovered gives the cost-versus-recovery curve."""
    grid = _check_grid("demand", demand_grid)
    if any(d < 0 or not math.isfinite(d) for d in grid):
        raise DomainError(MODULE, "demand grid values must be finite and >= 0")
    configs = [configure(cfg, demand=ConstantDemand(amount=d).model_dump()) for d in grid]
    summaries = _run_cells(configs, scenario, workers)
    return [_row({"demand": d}, s) for d, s in zip(grid, summaries)]


def sweep_participation(cfg: SimConfig, fractions: Sequence[float], demand_grid: Sequence[float],
                        scenario: Scenario, workers: int = 1) -> List[SweepRow]:
    """Mean cost for each (participating fraction, demand) cell over nested random donor subsamples."""
    fractions = _check_grid("fraction", fractions)
    demands = _check_grid("demand", demand_grid)
    if any(not 0.0 < f <= 1.0 for f in fractions):
        raise DomainError(MODULE, "fractions must lie in (0, 1]")
    if fractions != sorted(fractions):
        raise DomainError(MODULE, "fractions must be sorted ascending")
    cells = [(f, d) for f in fractions for d in demands]
    configs = [configure(cfg, donor_fraction=f, demand=ConstantDemand(amount=d).model_dump()) for f, d in cells]
    summaries = _run_cells(configs, scenario, workers)
    return [_row({"fraction": f, "demand": d}, s) for (f, d), s in zip(cells, summaries)]


def cost_matrix(rows: Sequence[SweepRow]) -> Tuple[List[float], List[float], np.ndarray]:
    """Participation rows as (fractions, demands, mean_cost[fraction, demand])."""
    fractions = sorted({r.params["fraction"] for r in rows})
    demands = sorted({r.params["demand"] for r in rows})
    out = np.full((len(fractions), len(demands)), np.nan)
    for r in rows:
        out[fractions.index(r.params["fraction"]), demands.index(r.params["demand"])] = r.mean_cost
    return fractions, demands, out


def saturation_supply(cfg: SimConfig, scenario: Scenario) -> float:
    """Mean daily recovered supply when demand exceeds anything recoverable (every cluster visited daily)."""
    summary = _run_cell(configure(cfg, demand=ConstantDemand(amount=SATURATION_DEMAND).model_dump()), scenario)
    return summary.mean_recovered


def median_summary(cfg: SimConfig, scenario: Scenario, seeds: Sequence[int],
                   field: str = "underrun_days") -> float:
    """Median of one summary field over several seeds, for noise-controlled comparisons."""
    values = [getattr(_run_cell(configure(cfg, seed=s), scenario), field) for s in seeds]
    return float(np.median(values))
