"""Simulation and control of an antagonistic soft hydraulic actuator pair.

The package models the coupled mechanics and hydraulics of two opposing
bellow actuators as a port-Hamiltonian system, implements an energy-shaping
flow-rate controller with an immersion-and-invariance force estimator, and
provides a deterministic simulation engine, scenario files, presets and a
CLI (``antago``) for reproduction and numerical verification of the
closed-loop theory.
"""

from .controller import (
    ControllerGains,
    Setpoint,
    SigmaTerms,
    StabilityReport,
    StepperParams,
    closed_loop_field,
    control_flows,
    desired_energy,
    desired_energy_rate,
    min_jerk_position,
    min_jerk_velocity,
    sigma,
    stepper_target,
    stepper_target_digital,
    stepper_target_empirical,
    validate_gains,
)
from .engine import (
    CHANNELS,
    DiagnosticsSummary,
    ForceModel,
    ScenarioConfig,
    SolverSettings,
    TrajectoryRecord,
    augmented_field,
    diagnostics,
    evaluate_force,
    fit_decay_rate,
    simulate,
    simulate_open_loop,
)
from .errors import DomainError, ScenarioError
from .observer import ForceEstimate, ObserverState, force_estimate, initial_observer, observer_rate
from .plant import (
    ActuatorGeometry,
    FluidParams,
    GeometryTerms,
    PlantParams,
    PlantState,
    generalized_force,
    geometry_terms,
    hamiltonian,
    hamiltonian_gradient,
    open_loop_field,
    pouch_length,
    pouch_volume,
    pressure_potential,
    total_mass,
    volume_curvatures,
    volume_gradients,
    volumes,
)
from .scenario_io import (
    list_presets,
    load_preset,
    load_scenario,
    load_trajectory_csv,
    parse_scenario,
    save_scenario,
    save_trajectory_csv,
    serialize_scenario,
    trajectory_from_csv,
    trajectory_to_csv,
)

__version__ = "0.1.0"

__all__ = [
    "ActuatorGeometry", "CHANNELS", "ControllerGains", "DiagnosticsSummary",
    "DomainError", "FluidParams", "ForceEstimate", "ForceModel",
    "GeometryTerms", "ObserverState", "PlantParams", "PlantState",
    "ScenarioConfig", "ScenarioError", "Setpoint", "SigmaTerms",
    "SolverSettings", "StabilityReport", "StepperParams", "TrajectoryRecord",
    "augmented_field", "closed_loop_field", "control_flows", "desired_energy",
    "desired_energy_rate", "diagnostics", "evaluate_force", "fit_decay_rate",
    "force_estimate", "generalized_force", "geometry_terms", "hamiltonian",
    "hamiltonian_gradient", "initial_observer", "list_presets", "load_preset",
    "load_scenario", "load_trajectory_csv", "min_jerk_position",
    "min_jerk_velocity", "observer_rate", "open_loop_field", "parse_scenario",
    "pouch_length", "pouch_volume", "pressure_potential", "save_scenario",
    "save_trajectory_csv", "serialize_scenario", "sigma", "simulate",
    "simulate_open_loop", "stepper_target", "stepper_target_digital",
    "stepper_target_empirical", "total_mass", "trajectory_from_csv",
    "trajectory_to_csv", "validate_gains", "volume_curvatures",
    "volume_gradients", "volumes",
]
