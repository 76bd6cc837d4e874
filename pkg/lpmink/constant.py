import math

# Exit codes
EXIT_SUCCESS = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2

# Output
SCHEMA_VERSION = "1.0"
FLOAT_DIGITS = 17  # CSV

# Subcommands
SUBCOMMANDS = (
    "verify-pohozaev",
    "build-counterexample",
    "eigen",
    "second-variation",
    "minimize",
    "oracle",
    "bifurcation",
    "report",
)

# Symmetry modes
MODE_SPECIAL = "special"
MODE_FULL = "full"
MODE_TRIVIAL = "trivial"

# Hemispheres
SOUTH = -1
NORTH = 1

# Grid and chart
RESOLUTION_MIN = 8
RESOLUTION_DEFAULT = {1: 192, 2: 32}  # Node count for n = 1, Gauss-Legendre order for n = 2
ASYMPTOTIC_RADIUS = 1e8  # Chart radius beyond which the stable pullback form is used
EQUATOR_TOL = 1e-14
POLE_FALLBACK_ANGLE = math.radians(10.0)  # Rotated-pole frame inside this cap

# Tolerances
TOL_NORM = 1e-14
TOL_ORTHOGONAL = 1e-12
TOL_CONVEX = -1e-10
TOL_ASYMMETRY = 1e-11
TOL_RANK = 1e-9  # Relative singular-value threshold

# Spectral
L_MAX_SPHERE = 16
L_MAX_VARIATIONAL = 14
MU_MAX_DEFAULT = 6
MU_MAX_LIMIT = 8
MU_EXACT_MAX = 6  # Largest degree handled in exact arithmetic

# Counterexample
R_MIN = 1e-6
R_MAX = 1e6
N_RADIAL_TABLE = 481
POLE_CAP_RADIUS = 0.05
K_NEGATIVE = -1e-6
K_POSITIVE_MAX = 1e-9
CERTIFY_FRACTION = 0.99

# Variational
EPS_CONVEX_DEFAULT = 1e-3
BARRIER_WEIGHT_INIT = 1e-4
BARRIER_DECAY = 0.1
BARRIER_SWITCH = 1e-3
STEP_MIN = 1e-14
ARMIJO_C = 1e-4
ARMIJO_ROUNDOFF = 1e-13

# ODE oracle
ODE_TOL = 1e-12
H0_OFFSET = 1e-4
H0_MAX = 4.0
N_SCAN = 48
N_SCAN_P = 9  # Exponents per oracle scan range
FOURIER_LIFT_L = 96
N_LIFT_SAMPLES = 512

# Misc.
PI = math.acos(-1.0)
INF = 1e10
