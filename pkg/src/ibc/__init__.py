"""Information based control for stochastic systems with uncertain parameters.

Modules:

``lingauss``  bilinear linear-Gaussian model, exact discretization, Kalman filter
``analytic``  closed-form two-step information based control
``dp``        exact dynamic-programming solution of the two-step example
``example1``  integrator with unknown gain
``bounds``    information-theoretic cost bounds in the scalar channel example
``mc``        sample-based information based control for general plants
``optim``     grid search, golden-section refinement and penalty tuning
``cli``       JSON-configured experiment runner
"""

from .exceptions import (
    BoundaryMinimumWarning,
    ConfigError,
    ConvergenceError,
    DegenerateObservationError,
    DegenerateSamplesError,
    IBCError,
    NoInformationError,
    NoSolutionError,
    PlanningError,
    StructureError,
)

__version__ = "0.1.0"
