"""Nonparametric drift estimation for discretely observed diffusions with
sparse, bounded deep ReLU networks.

Modules:
    sde_sim       Euler-Maruyama simulation, regression sets, path I/O
    drift_models  composition classes, confined drifts, class validators
    relu_net      the sparse network class, projection, gradients
    trainer       projected momentum gradient least-squares fitting
    theory_calc   closed-form rates and architecture selection
    risk_eval     empirical, generalization and stationary risks; sweeps
    config        YAML experiment schema
    cli_harness   experiment runner and the ``driftnet`` command
"""

from ._accel import NUMBA_ENABLED, backend_name

__version__ = "0.1.0"

__all__ = ["NUMBA_ENABLED", "backend_name", "__version__"]
