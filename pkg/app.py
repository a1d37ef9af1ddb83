"""
Food rescue simulator - command-line front end.

Subcommands: fit, cluster, simulate, sweep, gen-synthetic.
"""

import argparse
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from config.settings import (
    DEFAULT_SEED,
    EXIT_DATA,
    EXIT_INTERNAL,
    EXIT_OK,
    EXIT_VALIDATION,
    MEMBERS_PER_CLUSTER,
    VERSION,
    WAREHOUSE_ID,
    WAREHOUSE_LAT,
    WAREHOUSE_LON,
)
from core.evt import fit_pot, gpd_standard_errors, qq_pairs
from core.exceptions import (
    ConfigurationError,
    ContractError,
    DegenerateDataError,
    DomainError,
    FoodRescueError,
    InsufficientDataError,
    NonConvergenceError,
    ParseError,
    ReferentialError,
    SizeError,
)
from core.geo import (
    CachedMatrixProvider,
    DistanceMatrix,
    HaversineProvider,
    build_distance_matrix,
    cluster_donors,
    haversine_distance_matrix,
    with_costs,
)
from core.rng import Stream, substream
from core.simulator import Scenario, configure, run_simulation, sweep_demand, sweep_epsilon, sweep_participation
from core.solver import to_lp_text
from core.supply import default_category_fits, fit_scale_model
from core.synthetic import generate_synthetic
from models.schemas import CategoryFits, CategoryProfile, Donor, DonorCategory, RunManifest, SimConfig
from storage.csv_storage import (
    load_daily_values,
    load_distance_pairs,
    load_donors,
    save_clusters,
    save_day_records,
    save_distance_matrix,
    save_donors,
    save_qq_pairs,
    save_sweep,
)
from storage.json_storage import load_config, load_fits, load_profile, save_fits, save_manifest, save_summary
from utils.digests import file_digest
from utils.logger import configure_logging, get_logger

MODULE = "cli"
logger = get_logger(MODULE)

DATA_DIR = Path(__file__).resolve().parent / "data"
DEFAULT_PROFILE = DATA_DIR / "synthetic_profile_90.json"

VALIDATION_ERRORS = (DomainError, ConfigurationError, ContractError, SizeError)
DATA_ERRORS = (ParseError, InsufficientDataError, DegenerateDataError, NonConvergenceError, ReferentialError)


# --- input helpers -----------------------------------------------------------


def _parse_grid(text: Optional[str], name: str) -> List[float]:
    if text is None:
        raise DomainError(MODULE, f"--{name} is required")
    values = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            values.append(float(item))
        except ValueError:
            raise DomainError(MODULE, f"--{name}: not a number: {item!r}") from None
    return values


def _load_sim_config(args) -> SimConfig:
    cfg = load_config(args.config) if args.config else SimConfig()
    if args.seed is not None:
        cfg = configure(cfg, seed=args.seed)
    return cfg


def _parse_warehouse(text: Optional[str]) -> Tuple[float, float]:
    if text is None:
        return WAREHOUSE_LAT, WAREHOUSE_LON
    values = _parse_grid(text, "warehouse")
    if len(values) != 2:
        raise DomainError(MODULE, f"--warehouse expects LAT,LON, got {text!r}")
    return values[0], values[1]


def _check_recorded_distances(donors: Sequence[Donor], matrix: DistanceMatrix) -> None:
    """Warn when a donor's recorded dist_km disagrees with the matrix in use."""
    off = [d.id for d in donors if d.distance_from_warehouse is not None
           and not math.isclose(d.distance_from_warehouse, matrix.from_warehouse(d.id), rel_tol=1e-6, abs_tol=1e-6)]
    if off:
        logger.warning("%d donors have dist_km that disagrees with the distance matrix (first: '%s'); "
                       "check --warehouse or --distances", len(off), off[0])


def _load_matrix(args, donors: Sequence[Donor]) -> DistanceMatrix:
    """Matrix from the distances file, or haversine from donor coordinates when no file is given."""
    coords = {d.id: (d.latitude, d.longitude) for d in donors if d.has_coordinates}
    coords[WAREHOUSE_ID] = _parse_warehouse(args.warehouse)
    ids = [d.id for d in donors]
    if args.distances:
        primary = CachedMatrixProvider(load_distance_pairs(args.distances))
        fallback = HaversineProvider(coords) if args.fill_missing else None
        matrix = build_distance_matrix(ids, primary, fallback)
    else:
        missing = [d.id for d in donors if not d.has_coordinates]
        if missing:
            raise ConfigurationError(MODULE, f"no --distances file and donor '{missing[0]}' has no coordinates")
        matrix = haversine_distance_matrix(ids, coords)
    _check_recorded_distances(donors, matrix)
    return matrix


def _load_fits(args) -> CategoryFits:
    return load_fits(args.fits) if args.fits else default_category_fits()


def _load_scenario(args) -> Scenario:
    donors = load_donors(args.donors)
    matrix = _load_matrix(args, donors)
    fits = _load_fits(args)
    logger.info("Loaded %d donors, %d-node distance matrix", len(donors), matrix.n)
    return Scenario(tuple(donors), matrix, fits.categories, fits.scale_model)


def _digests(*paths: Optional[str]) -> Dict[str, str]:
    return {str(p): file_digest(p) for p in paths if p}


def _write_manifest(args, out_dir: Path, outputs: List[str], inputs: Dict[str, str],
                    seed: Optional[int] = None, config: Optional[dict] = None) -> None:
    manifest = RunManifest(
        command=args.command,
        tool_version=VERSION,
        seed=seed,
        config=config or {},
        input_digests=inputs,
        outputs=[Path(p).name for p in outputs],
        started_at=args.started_at,
        duration_seconds=round(time.perf_counter() - args.started_clock, 6),
    )
    save_manifest(out_dir / "manifest.json", manifest)


# --- commands ----------------------------------------------------------------


def cmd_fit(args) -> None:
    """Fit a POT model to daily values and write it into a fits file, plus QQ pairs."""
    out_dir = Path(args.out_dir)
    rows = load_daily_values(args.values)
    donors = load_donors(args.donors) if args.donors else []
    by_id = {d.id: d for d in donors}
    if donors:
        unknown = sorted(set(rows["donor_id"]) - set(by_id))
        if unknown:
            raise ReferentialError(MODULE, f"donor '{unknown[0]}' in {args.values} is not in {args.donors}",
                                   missing_id=unknown[0])
        if args.category != "overall":
            rows = rows[rows["donor_id"].map(lambda i: by_id[i].category.value == args.category)]
    values = rows["lbs"].to_numpy(dtype=float)
    if values.size == 0:
        raise InsufficientDataError(MODULE, f"no daily values for category '{args.category}'")

    pot = fit_pot(values, args.threshold)
    fits = _load_fits(args)
    if args.category == "overall":
        fits = fits.model_copy(update={"overall": pot})
    else:
        categories = dict(fits.categories)
        categories[DonorCategory(args.category)] = pot
        fits = fits.model_copy(update={"categories": categories})

    outputs = []
    if pot.tail is not None:
        excesses = values[values > args.threshold] - args.threshold
        se_scale, se_shape = gpd_standard_errors(pot.tail, excesses)
        logger.info("%s: scale %.3f (%.3f), shape %.3f (%.3f)",
                    args.category, pot.tail.scale, se_scale, pot.tail.shape, se_shape)
        outputs.append(save_qq_pairs(out_dir / f"qq_{args.category}.csv", qq_pairs(pot.tail, excesses)))

    sized = [d for d in donors if d.square_footage is not None]
    if sized:
        above = rows[rows["lbs"] > args.threshold]
        means = above.groupby("donor_id")["lbs"].mean()
        points = [(d.square_footage, float(means[d.id])) for d in sized if d.id in means.index]
        if len(points) >= 3:
            fits = fits.model_copy(update={"scale_model": fit_scale_model(points)})
        else:
            logger.warning("Only %d sized donors with supply; keeping the existing scale model", len(points))

    outputs.insert(0, save_fits(out_dir / "fits.json", CategoryFits.model_validate(fits.model_dump())))
    _write_manifest(args, out_dir, outputs, _digests(args.values, args.donors, args.fits))


def cmd_cluster(args) -> None:
    """Partition donors and write per-cluster visit costs."""
    out_dir = Path(args.out_dir)
    donors = load_donors(args.donors)
    matrix = _load_matrix(args, donors)
    seed = DEFAULT_SEED if args.seed is None else args.seed
    k = args.k or math.ceil(len(donors) / MEMBERS_PER_CLUSTER)
    coords = {d.id: (d.latitude, d.longitude) for d in donors if d.has_coordinates}
    clusters = cluster_donors(matrix, k, substream(seed, Stream.CLUSTER), donor_ids=[d.id for d in donors],
                              method=args.method, coordinates=coords)
    clusters = with_costs(clusters, matrix)
    outputs = [save_clusters(out_dir / "clusters.csv", clusters)]
    logger.info("Wrote %d clusters, total visit cost %.3f km", len(clusters), math.fsum(c.cost for c in clusters))
    _write_manifest(args, out_dir, outputs, _digests(args.donors, args.distances), seed=seed,
                    config={"k": k, "method": args.method})


def cmd_simulate(args) -> None:
    """Run one simulation: daily CSV, summary and manifest."""
    out_dir = Path(args.out_dir)
    cfg = _load_sim_config(args)
    if args.emit_lp is not None and not 1 <= args.emit_lp <= cfg.days:
        raise DomainError(MODULE, f"--emit-lp day must lie in [1, {cfg.days}], got {args.emit_lp}")
    scenario = _load_scenario(args)
    programs: Dict[int, str] = {}

    def keep_program(day, problem) -> None:
        if day == args.emit_lp:
            programs[day] = to_lp_text(problem)

    records, summary = run_simulation(cfg, scenario.donors, scenario.matrix, scenario.category_fits,
                                      scenario.scale_model, on_problem=keep_program)
    outputs = [
        save_day_records(out_dir / "daily.csv", records),
        save_summary(out_dir / "summary.json", summary, cfg),
    ]
    for day, text in programs.items():
        lp_path = out_dir / f"day_{day}.lp"
        lp_path.write_text(text, encoding="utf-8")
        outputs.append(str(lp_path))
    _write_manifest(args, out_dir, outputs, _digests(args.config, args.donors, args.distances, args.fits),
                    seed=cfg.seed, config=cfg.model_dump(mode="json"))


def cmd_sweep(args) -> None:
    """One simulation per grid cell, written as a long CSV."""
    out_dir = Path(args.out_dir)
    cfg = _load_sim_config(args)
    grid = _parse_grid(args.grid, "grid")
    scenario = _load_scenario(args)
    if args.kind == "epsilon":
        rows = sweep_epsilon(cfg, grid, scenario, workers=args.workers)
    elif args.kind == "demand":
        rows = sweep_demand(cfg, grid, scenario, workers=args.workers)
    else:
        demands = _parse_grid(args.demand_grid, "demand-grid")
        rows = sweep_participation(cfg, grid, demands, scenario, workers=args.workers)
    outputs = [save_sweep(out_dir / f"sweep_{args.kind}.csv", rows)]
    _write_manifest(args, out_dir, outputs, _digests(args.config, args.donors, args.distances, args.fits),
                    seed=cfg.seed, config=cfg.model_dump(mode="json"))


def cmd_gen_synthetic(args) -> None:
    """Write a synthetic donors CSV and its distances CSV."""
    out_dir = Path(args.out_dir)
    profile = load_profile(args.profile)
    if args.count:
        categories = dict(profile.categories)
        for item in args.count:
            name, _, number = item.partition("=")
            try:
                category, count = DonorCategory(name.strip().lower()), int(number)
            except ValueError:
                raise DomainError(MODULE, f"--count expects CATEGORY=N, got {item!r}") from None
            if count < 0:
                raise DomainError(MODULE, f"--count for '{category.value}' must be >= 0, got {count}")
            base = categories.get(category)
            categories[category] = base.model_copy(update={"count": count}) if base else CategoryProfile(count=count)
        profile = profile.model_copy(update={"categories": categories})
    seed = DEFAULT_SEED if args.seed is None else args.seed
    donors, matrix = generate_synthetic(profile, seed)
    outputs = [
        save_donors(out_dir / "donors.csv", donors),
        save_distance_matrix(out_dir / "distances.csv", matrix),
    ]
    _write_manifest(args, out_dir, outputs, _digests(args.profile), seed=seed,
                    config=profile.model_dump(mode="json"))


COMMANDS = {
    "fit": cmd_fit,
    "cluster": cmd_cluster,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "gen-synthetic": cmd_gen_synthetic,
}


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default="out", help="directory for output files")
    common.add_argument("--seed", type=int, default=None, help="random seed (overrides the config file)")
    common.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    common.add_argument("--verbose", action="store_true", help="log per-day detail")

    inputs = argparse.ArgumentParser(add_help=False)
    inputs.add_argument("--donors", required=True, help="donors CSV")
    inputs.add_argument("--distances", help="distances CSV (from_id,to_id,km)")
    inputs.add_argument("--fill-missing", action="store_true",
                        help="fill pairs missing from --distances with haversine distances")
    inputs.add_argument("--warehouse", metavar="LAT,LON",
                        help="warehouse coordinates for haversine distances (default: the built-in location)")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--config", help="simulation config JSON")
    sim.add_argument("--fits", help="category fits JSON (defaults to the built-in table)")

    parser = argparse.ArgumentParser(prog="food-rescue", description="Food rescue and redistribution simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", parents=[common], help="fit a peaks-over-threshold model to daily values")
    fit.add_argument("--values", required=True, help="daily values CSV (donor_id,date,lbs)")
    fit.add_argument("--category", default="overall",
                     choices=["overall"] + [c.value for c in DonorCategory], help="fits entry to write")
    fit.add_argument("--threshold", type=float, default=0.0, help="POT threshold, lbs")
    fit.add_argument("--donors", help="donors CSV: filters values by category and refits the scale model")
    fit.add_argument("--fits", help="existing fits JSON to update")

    cluster = sub.add_parser("cluster", parents=[common, inputs], help="cluster donors and cost the clusters")
    cluster.add_argument("--k", type=int, default=None, help="number of clusters (default: donors / 3)")
    cluster.add_argument("--method", choices=["kmedoids", "kmeans"], default="kmedoids")

    simulate = sub.add_parser("simulate", parents=[common, inputs, sim], help="run one simulation")
    simulate.add_argument("--emit-lp", type=int, metavar="DAY", help="also write that day's pickup problem as day_DAY.lp")

    sweep = sub.add_parser("sweep", parents=[common, inputs, sim], help="run a parameter sweep")
    sweep.add_argument("--kind", choices=["epsilon", "demand", "participation"], required=True)
    sweep.add_argument("--grid", required=True, help="comma-separated values (epsilons, demands or fractions)")
    sweep.add_argument("--demand-grid", help="comma-separated demands for participation sweeps")
    sweep.add_argument("--workers", type=int, default=1, help="parallel worker processes")

    gen = sub.add_parser("gen-synthetic", parents=[common], help="generate a synthetic donor set")
    gen.add_argument("--profile", default=str(DEFAULT_PROFILE), help="synthetic profile JSON")
    gen.add_argument("--count", action="append", metavar="CATEGORY=N", help="override a category count")
    return parser


def exit_code(error: BaseException) -> int:
    if isinstance(error, (ValidationError,) + VALIDATION_ERRORS):
        return EXIT_VALIDATION
    if isinstance(error, DATA_ERRORS):
        return EXIT_DATA
    return EXIT_INTERNAL


def _diagnostic(error: BaseException) -> str:
    if isinstance(error, FoodRescueError):
        return error.diagnostic()
    text = " ".join(str(error).split())
    return f"{MODULE}: {type(error).__name__}: {text}"


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(quiet=args.quiet, verbose=args.verbose)
    args.started_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
    args.started_clock = time.perf_counter()
    try:
        COMMANDS[args.command](args)
    except Exception as e:
        print(_diagnostic(e), file=sys.stderr)
        if exit_code(e) == EXIT_INTERNAL:
            logger.debug("Internal error", exc_info=True)
        return exit_code(e)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
