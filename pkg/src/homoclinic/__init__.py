"""Validated numerics for a Shil'nikov homoclinic orbit in the Lorenz-84 model."""

__version__ = "0.1.0"

from .interval import Interval, interval, ivector, imatrix, from_decimal  # noqa: E402
from .verdict import Verdict  # noqa: E402
from .linalg import verify_zero, enclose_spectrum, log_norm, log_min  # noqa: E402
from .model import QuadraticField, LocalChart, lorenz84  # noqa: E402
from .integrator import IntegratorConfig, flow  # noqa: E402
from .manifolds import (  # noqa: E402
    SplitBlock,
    check_isolating_block,
    check_rate_conditions,
    check_cone_conditions,
    manifold_enclosure,
    eval_graph,
)
from .shooting import prove_homoclinic, splitting_h  # noqa: E402
from .driver import ProofConfig, load_config, run_pipeline, recheck_certificate  # noqa: E402

__all__ = [
    "__version__",
    "Interval",
    "interval",
    "ivector",
    "imatrix",
    "from_decimal",
    "Verdict",
    "verify_zero",
    "enclose_spectrum",
    "log_norm",
    "log_min",
    "QuadraticField",
    "LocalChart",
    "lorenz84",
    "IntegratorConfig",
    "flow",
    "SplitBlock",
    "check_isolating_block",
    "check_rate_conditions",
    "check_cone_conditions",
    "manifold_enclosure",
    "eval_graph",
    "prove_homoclinic",
    "splitting_h",
    "ProofConfig",
    "load_config",
    "run_pipeline",
    "recheck_certificate",
]
