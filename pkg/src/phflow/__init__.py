"""Structure-preserving simulation of nonlinear flows on directed networks.

The package discretizes barotropic flow equations (gas pipelines being
the flagship case) with a compatible mixed Galerkin pair on the network,
quadrature-reduced nonlinear terms and an energy-stable implicit Euler
scheme, and certifies the discrete conservation and dissipation
guarantees through its diagnostics.
"""

__version__ = "0.1.0"

from .constitutive import ConstitutiveLaw, IsentropicLaw, IsothermalAlphaLaw
from .errors import (
    BuildError,
    DomainError,
    PhflowError,
    SchemaError,
    StateError,
    StepFailure,
)
from .femspace import Partition, SpacePair, build_space_pair
from .network import Edge, NetworkTopology, topology_from_dict
from .timestepper import (
    BoundaryCondition,
    NewtonSettings,
    Scenario,
    Trajectory,
    simulate,
    solve_steady,
    step,
)

__all__ = [
    "BoundaryCondition",
    "BuildError",
    "ConstitutiveLaw",
    "DomainError",
    "Edge",
    "IsentropicLaw",
    "IsothermalAlphaLaw",
    "NetworkTopology",
    "NewtonSettings",
    "Partition",
    "PhflowError",
    "Scenario",
    "SchemaError",
    "SpacePair",
    "StateError",
    "StepFailure",
    "Trajectory",
    "build_space_pair",
    "simulate",
    "solve_steady",
    "step",
    "topology_from_dict",
]
