"""Three-tank hydraulic benchmark workbench.

Nonlinear plant simulation, Jacobian linearization with exact sampling,
integral-action tracking control, exact linearization with decoupling, and
an adaptive process-noise Kalman filter, plus a scenario runner and CLI.
"""

from .akf import AkfConfig, AkfState, adapt_q, akf_step, initial_state, predict, update
from .decoupling import (
    AffineSystem,
    DecouplingLaw,
    decoupling_matrices,
    design_decoupling_law,
    lie_derivative,
    linearizing_feedback,
    outer_loop,
    relative_degree,
    three_tank_affine_system,
)
from .errors import NumericalError
from .linmodel import (
    ContinuousModel,
    DiscreteModel,
    OperatingPoint,
    discretize,
    from_deviation,
    jacobian_at,
    to_deviation,
)
from .metrics import MetricsReport, compute_metrics
from .plant import PlantParams, derivatives, equilibrium_input, flow_between, outflow, step
from .scenario import (
    InputProgram,
    ReferenceProgram,
    ScenarioConfig,
    SimRecord,
    add_measurement_noise,
    generate_reference,
    load_scenario,
    run_scenario,
    write_csv,
)
from .tracking import AugmentedModel, TrackingGain, augment, control, integrator_step, place, place_poles

__version__ = "0.1.0"
