"""
Numerical defaults shared across services.

Tolerances are absolute unless noted; relative ones are scaled at the point of use.
"""

# region Tolerances
TOL_ACT = 1e-7  # scaled by 1 + |f(x)|_inf
TOL_MUL = 1e-8
TOL_RANK = 1e-9  # relative to the largest singular value
TOL_PD = 1e-8
TOL_RESIDUAL = 1e-8
TOL_NEWTON = 1e-10
TOL_SIGN = 1e-10  # multipliers below -TOL_SIGN are negative
# endregion

# region Coercivity
D_MAX = 12
ROW_CAP = 20
SAMPLED_RESTARTS = 64
SAMPLED_ITERATIONS = 500
# endregion

# region Discretization
MESH_N = 200
COUNTEREXAMPLE_MESH_N = 1000
DELTA_SWEEP = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
# endregion

# region Perturbation harness
MAGNITUDE_START = 1e-2
MAGNITUDE_LEVELS = 6
MAGNITUDES = tuple(MAGNITUDE_START / 2**i for i in range(MAGNITUDE_LEVELS))
SAMPLES_PER_MAGNITUDE = 32
PLATEAU_SPREAD = 1.25
MIN_CONVERGED_FRACTION = 0.5
RADIUS_SCALE = 0.1
FLIP_MARGIN = 0.25
FLIP_BUDGET = 16
PDAS_CORRECTIONS = 5
NEWTON_MAX_ITER = 40
# endregion

# region Growth probes
GROWTH_SAMPLES = 1000
GROWTH_RADIUS = 1e-2
HAMILTONIAN_SAMPLES = 64
HAMILTONIAN_EPS = 0.1
MAX_RETRACTION_FAILURE = 0.5
# endregion

# region Problem files
PROBLEM_CLASSES = ("nlp", "mayer", "ocp")
COUNTEREXAMPLE_S_VALUES = (1, 2, 4)
# endregion

OUTPUT_DIR_ENV = "SUBREG_KIT_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "subreg-reports"
