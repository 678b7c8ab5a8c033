"""Deterministic correlation-decay estimates for hypergraph partition functions.

The main entry points:

* :func:`corrdecay.model.build_model` / :func:`corrdecay.model.load_model`
* :func:`corrdecay.decay.approx_prob`, :func:`corrdecay.decay.approx_z`
* :func:`corrdecay.bridge.estimate_integral`
* :mod:`corrdecay.oracle` for brute-force ground truth on small instances
"""

__version__ = "0.1.0"

from ._backend import get_kernel
from .bridge import IntegralEstimate, choose_N, estimate_integral, sandwich_bounds
from .decay import (
    ConditionalMarginals,
    DecayEstimate,
    ZEstimate,
    approx_prob,
    approx_z,
    call_count_estimate,
    choose_depth,
    g_m_eval,
)
from .errors import (
    AdmissibilityError,
    BudgetExceededError,
    ModelError,
    ModelFormatError,
    WindowExceededError,
)
from .model import (
    Hypergraph,
    Model,
    admissibility_window,
    build_model,
    check_admissible,
    check_gradient_bound,
    load_model,
    max_admissible_delta,
)
from .oracle import integral_reference, marginal_exact, z_exact
from .potentials import CallablePotential, ExpBilinearPotential, TablePotential

KERNEL = get_kernel().NAME
