"""Exact daily minimum-cost pickup selection.

Choose units (clusters) minimizing total cost subject to recovered supply >= demand.
Among equal-cost selections the one with fewer units wins, then the one whose
ascending index tuple is lexicographically smallest.
"""

import math
from bisect import bisect_left
from itertools import accumulate
from typing import Optional, Sequence, Tuple

import numpy as np

from config.settings import BRUTE_FORCE_MAX_UNITS, DEMAND_SLACK_LBS, SOLVER_NODE_BUDGET
from core.exceptions import InvariantError, SizeError
from models.schemas import PickupProblem, Schedule
from utils.logger import get_logger
from utils.lp_templates import format_lp

MODULE = "solver"
logger = get_logger(MODULE)

Key = Tuple[float, int, Tuple[int, ...]]


def _key(indices: Sequence[int], costs: Sequence[float]) -> Key:
    chosen = tuple(sorted(indices))
    return math.fsum(costs[i] for i in chosen), len(chosen), chosen


def _schedule(p: PickupProblem, indices: Sequence[int], optimal: bool = True, nodes: int = 0) -> Schedule:
    chosen = set(indices)
    selected = tuple(i in chosen for i in range(p.size))
    total_supply = math.fsum(p.supplies[i] for i in sorted(chosen))
    return Schedule(
        selected=selected,
        total_cost=math.fsum(p.costs[i] for i in sorted(chosen)),
        total_supply=total_supply,
        feasible=total_supply >= p.demand - DEMAND_SLACK_LBS,
        optimal=optimal,
        nodes=nodes,
    )


def _covers(p: PickupProblem, indices: Sequence[int], need: float) -> bool:
    return math.fsum(p.supplies[i] for i in sorted(indices)) >= need


def _infeasible(p: PickupProblem) -> bool:
    return math.fsum(p.supplies) < p.demand - DEMAND_SLACK_LBS


def solve_daily(p: PickupProblem, node_budget: int = SOLVER_NODE_BUDGET) -> Schedule:
    """Branch and bound over binary selections.

    Units are ordered by cost/supply ratio; each node is bounded by the fractional
    relaxation of the remaining units. When total supply cannot meet demand every
    unit is selected and the schedule is marked infeasible. If the node budget runs
    out the best selection found is returned with `optimal=False`.
    """
    need = p.demand - DEMAND_SLACK_LBS
    if need <= 0:
        return _schedule(p, ())
    if _infeasible(p):
        logger.debug("Supply %.3f below demand %.3f; visiting every unit", math.fsum(p.supplies), p.demand)
        return _schedule(p, range(p.size))

    order = sorted((i for i in range(p.size) if p.supplies[i] > 0),
                   key=lambda i: (p.costs[i] / p.supplies[i], i))
    costs = [p.costs[i] for i in order]
    supplies = [p.supplies[i] for i in order]
    cum_supply = [0.0] + list(accumulate(supplies))
    cum_cost = [0.0] + list(accumulate(costs))
    m = len(order)

    def bound(level: int, remaining: float) -> Optional[float]:
        """Cheapest fractional cover of `remaining` using units level..m-1; None if impossible."""
        target = cum_supply[level] + remaining - 1e-9 * max(1.0, remaining)
        t = bisect_left(cum_supply, target, lo=level + 1) - 1
        if t >= m:
            return None
        covered = cum_supply[t] - cum_supply[level]
        return cum_cost[t] - cum_cost[level] + costs[t] * max(0.0, remaining - covered) / supplies[t]

    # greedy ratio prefix as the first incumbent
    greedy_len = min(m, bisect_left(cum_supply, need))
    while greedy_len < m and not _covers(p, order[:greedy_len], need):
        greedy_len += 1
    best: Key = _key(order[:greedy_len], p.costs)

    nodes = 0
    proven = True
    stack = [(0, 0.0, 0.0, ())]
    while stack:
        level, cost, supply, chosen = stack.pop()
        nodes += 1
        if nodes > node_budget:
            proven = False
            break
        if supply >= need and _covers(p, [order[j] for j in chosen], need):
            key = _key([order[j] for j in chosen], p.costs)
            if key < best:
                best = key
            continue
        if level == m:
            continue
        lower = bound(level, need - supply)
        if lower is None or cost + lower > best[0] + 1e-9 * max(1.0, best[0]):
            continue
        stack.append((level + 1, cost, supply, chosen))
        stack.append((level + 1, cost + costs[level], supply + supplies[level], chosen + (level,)))

    if not proven:
        logger.warning("Node budget %d exhausted; returning best selection found (cost %.3f)", node_budget, best[0])
    logger.debug("Solved %d units in %d nodes: cost %.3f, %d selected", p.size, nodes, best[0], best[1])
    return _schedule(p, best[2], optimal=proven, nodes=nodes)


def brute_force_solve(p: PickupProblem) -> Schedule:
    """Exhaustive enumeration of all 2^N selections with the same tie-breaking as `solve_daily`."""
    n = p.size
    if n > BRUTE_FORCE_MAX_UNITS:
        raise SizeError(MODULE, f"brute force limited to {BRUTE_FORCE_MAX_UNITS} units, got {n}")
    need = p.demand - DEMAND_SLACK_LBS
    if _infeasible(p):
        return _schedule(p, range(n))

    masks = np.arange(2 ** n, dtype=np.int64)
    approx_cost = np.zeros(masks.size)
    approx_supply = np.zeros(masks.size)
    for j in range(n):
        bit = ((masks >> j) & 1).astype(bool)
        approx_cost[bit] += p.costs[j]
        approx_supply[bit] += p.supplies[j]

    def members(mask: int) -> Tuple[int, ...]:
        return tuple(j for j in range(n) if (mask >> j) & 1)

    def exact_feasible(idx: Tuple[int, ...]) -> bool:
        return math.fsum(p.supplies[j] for j in idx) >= need

    scale = max(1.0, math.fsum(p.supplies), math.fsum(p.costs))
    near = np.flatnonzero(approx_supply >= need - 1e-9 * scale)
    near = near[np.argsort(approx_cost[near], kind="stable")]
    first_cost = None
    for pos in near:
        idx = members(int(masks[pos]))
        if exact_feasible(idx):
            first_cost = math.fsum(p.costs[j] for j in idx)
            break
    window = near[approx_cost[near] <= first_cost + 1e-9 * scale]
    best = min(_key(idx, p.costs) for idx in (members(int(masks[pos])) for pos in window) if exact_feasible(idx))
    return _schedule(p, best[2])


def to_lp_text(p: PickupProblem) -> str:
    """The problem as an lp_solve program, for cross-checking with external solvers."""
    return format_lp(p.costs, p.supplies, p.demand)


def verify_schedule(p: PickupProblem, s: Schedule) -> None:
    """Recompute a schedule's totals and feasibility from its selection; raise on any mismatch."""
    if len(s.selected) != p.size:
        raise InvariantError(MODULE, f"selection covers {len(s.selected)} units, problem has {p.size}")
    chosen = s.selected_indices
    cost = math.fsum(p.costs[i] for i in chosen)
    supply = math.fsum(p.supplies[i] for i in chosen)
    if s.total_cost != cost or s.total_supply != supply:
        raise InvariantError(MODULE, f"schedule totals ({s.total_cost}, {s.total_supply}) "
                                     f"differ from its selection ({cost}, {supply})")
    if s.feasible != (supply >= p.demand - DEMAND_SLACK_LBS):
        raise InvariantError(MODULE, f"schedule feasibility flag {s.feasible} contradicts supply {supply}")
