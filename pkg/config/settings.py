"""Configuration settings for the food rescue simulator."""

VERSION = "1.0.0"
CONFIG_SCHEMA_VERSION = 1
FITS_SCHEMA_VERSION = 1

# Simulation defaults
DEFAULT_DAYS = 365
DEFAULT_EPSILON = 0.5
DEFAULT_SEED = 20130601
DEFAULT_OVERAGE = 0.0
MEMBERS_PER_CLUSTER = 3  # rule of thumb when no cluster count is configured

# Demand reference points, lbs/day
DEMAND_CURRENT_DONATED = 5454.0
DEMAND_LOCAL_SERVICE = 10260.0
DEMAND_DISTRIBUTED_MEAN = 10410.0
DEMAND_DISTRIBUTED_SD = 10041.0
DEMAND_LOW_SECURITY = 48600.0

# Peaks-over-threshold fits per donor category: threshold, rate, location, scale, shape
CATEGORY_FITS = {
    "grocer": {"threshold": 0.0, "rate": 0.302, "location": 0.0, "scale": 293.139, "shape": 0.205},
    "manufacturer": {"threshold": 0.0, "rate": 0.038, "location": 0.0, "scale": 562.549, "shape": 0.107},
    "individual": {"threshold": 0.0, "rate": 0.029, "location": 0.0, "scale": 141.755, "shape": 0.905},
    "farm": {"threshold": 0.0, "rate": 0.023, "location": 0.0, "scale": 918.811, "shape": 0.867},
}
OVERALL_FIT = {"threshold": 0.0, "rate": 0.121, "location": 0.0, "scale": 275.947, "shape": 0.439}

# log10(mean supply) = slope * log10(square footage) + intercept
SCALE_SLOPE = 0.291
SCALE_INTERCEPT = 1.103

# GPD fitting
MIN_GPD_SAMPLES = 30
ZETA_ZERO_TOL = 1e-9
FIT_TOLERANCE = 1e-8
FIT_MAX_ITER = 5000

# Geography
EARTH_RADIUS_KM = 6371.0
CIRCUITY_FACTOR = 1.3
WAREHOUSE_ID = "warehouse"
WAREHOUSE_LAT = 40.1003  # Niwot, Colorado
WAREHOUSE_LON = -105.1705
KMEDOIDS_MAX_ITER = 300
SYMMETRY_TOL = 1e-6

# Solver
SOLVER_NODE_BUDGET = 10_000_000
DEMAND_SLACK_LBS = 1e-6
BRUTE_FORCE_MAX_UNITS = 20

# CLI exit codes
EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4
