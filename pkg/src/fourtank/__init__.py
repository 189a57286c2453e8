"""Quadruple-tank simulation with reconfigurable pole-assignment control under actuator faults."""

from .faults import FaultEvent, FdiConfig, apply_fault, fdi_estimate, true_effectiveness
from .metrics import compare_report, iae, read_trace, write_trace
from .plant import (
    NOMINAL_OPERATING_POINT,
    OperatingPoint,
    PlantParams,
    derivatives,
    equilibrium,
    linearize,
    measure,
)
from .scenario import ScenarioConfig, load_scenario, paper_scenario_path
from .simulation import reconfigure, rk4_step, run
from .synthesis import (
    PoleAssignmentController,
    PoleSet,
    assign_poles,
    augment,
    controllability_rank,
    eigenvalues,
    verify_closed_loop,
)

__version__ = "0.1.0"
