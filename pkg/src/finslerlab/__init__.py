"""finslerlab: numerical laboratory for rotational Finsler geodesic flows.

Builds explicit dual Finsler metrics on the cylinder (sphere and torus
models), integrates their Hamiltonian flows, reduces them to annular return
maps, and measures rotation numbers, separated-set entropy, invariant graphs
and elliptic-tube statistics through a deterministic scenario harness.
"""

from .errors import FinslerLabError
from .flow import IntegratorConfig, OrbitTrace, integrate_ensemble, integrate_orbit
from .metrics import (
    ALPHA_GOLDEN,
    CotangentPoint,
    RotationalDualMetric,
    build_katok_family,
    reversibilize,
)
from .profiles import RoundSphereProfile, eval_f0, eval_h, make_cutoffs, make_spliced_profile
from .scenarios import SCENARIO_NAMES, run_scenario
from .sections import SectionSpec, first_return, smooth_divide

__version__ = "0.1.0"

__all__ = [
    "ALPHA_GOLDEN",
    "CotangentPoint",
    "FinslerLabError",
    "IntegratorConfig",
    "OrbitTrace",
    "RotationalDualMetric",
    "RoundSphereProfile",
    "SCENARIO_NAMES",
    "SectionSpec",
    "build_katok_family",
    "eval_f0",
    "eval_h",
    "first_return",
    "integrate_ensemble",
    "integrate_orbit",
    "make_cutoffs",
    "make_spliced_profile",
    "reversibilize",
    "run_scenario",
    "smooth_divide",
    "__version__",
]
