"""Energy-shaping flow-rate controller for the antagonistic actuator pair.

The controller assigns the closed-loop storage function

    H_d = p^2 / (2*k_m*M) + k_p*(x_star - x)^2 / 2 + sigma^2 / 2

where ``sigma = P1*A1 + P2*A2 - F_hat + k_p*k_m*(x - x_star)`` couples the
pressures to the regulation error. Matching the open-loop dynamics against the
shaped closed loop fixes the interconnection entries and yields the flow
commands in closed form; the estimation error ``zeta`` of the force observer
enters the shaped momentum equation as a vanishing disturbance.

Two conventions are forced by the matching identity itself (and verified to
machine precision by the test suite):

* the momentum row of the shaped dynamics is forced by ``+zeta``, with
  ``zeta = F_hat - alpha*p - F`` (the opposite sign breaks the identity);
* the velocity entering the pressure-rate correction is the shaped one,
  ``p / (k_m*M)``, as required by the pressure rows of the matching equations.

Gain validation builds the 3x3 stability matrix in the error coordinates
``(p, zeta, sigma)``; positive definiteness reduces to ``k_i > 0`` and
``(R - alpha*M) * alpha * k_m > (1 + eps*k_m)^2 / 4`` where ``eps`` bounds the
admissible motion-proportional variation of the external force (``eps = 0``
for a constant force).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .observer import ObserverState, observer_rate
from .plant import (
    DEFAULT_DOMAIN_MARGIN,
    ActuatorGeometry,
    PlantParams,
    PlantState,
    generalized_force,
    geometry_terms,
    total_mass,
)


@dataclass(frozen=True)
class ControllerGains:
    """Constant tuning parameters of the control law and observer."""

    k_p: float    # potential stiffness [N/m]
    k_m: float    # mass scaling [-]
    k_i: float    # pressure-loop gain
    alpha: float  # observer gain [1/s]

    def __post_init__(self) -> None:
        if min(self.k_p, self.k_m, self.k_i, self.alpha) <= 0:
            raise ValueError("all controller gains must be positive")


@dataclass(frozen=True)
class Setpoint:
    """Regulation target for the payload position."""

    x_star: float

    def validate(self, geometry: ActuatorGeometry,
                 margin: float = DEFAULT_DOMAIN_MARGIN) -> None:
        lo, hi = geometry.position_bounds(margin)
        if not lo < self.x_star < hi:
            raise DomainError(
                f"setpoint {self.x_star!r} outside admissible range ({lo:.4e}, {hi:.4e})"
            )


class SigmaTerms(NamedTuple):
    """Pressure-coupling scalar and its partial derivatives."""

    value: float
    d_x: float
    d_P1: float
    d_P2: float


def sigma(state: PlantState, F_hat: float, gains: ControllerGains,
          setpoint: Setpoint, geometry: ActuatorGeometry,
          margin: float = DEFAULT_DOMAIN_MARGIN) -> SigmaTerms:
    """Evaluate sigma = P1*A1 + P2*A2 - F_hat + k_p*k_m*(x - x_star) and its gradient."""
    g = geometry_terms(state.x, geometry, margin)
    kpkm = gains.k_p * gains.k_m
    value = state.P1 * g.A1 + state.P2 * g.A2 - F_hat + kpkm * (state.x - setpoint.x_star)
    d_x = state.P1 * g.dA1 + state.P2 * g.dA2 + kpkm
    return SigmaTerms(value=value, d_x=d_x, d_P1=g.A1, d_P2=g.A2)


def control_flows(state: PlantState, obs: ObserverState, gains: ControllerGains,
                  setpoint: Setpoint, params: PlantParams,
                  margin: float = DEFAULT_DOMAIN_MARGIN) -> tuple[float, float]:
    """Flow-rate commands (U1, U2) of the energy-shaping control law."""
    g = geometry_terms(state.x, params.geometry, margin)
    if g.A1 == 0.0 or g.A2 == 0.0:
        raise DomainError("volume gradient vanished; state outside design domain")
    M = params.m + (g.V1 + g.V2) * params.fluid.rho
    v = state.p / M
    s = sigma(state, obs.F_hat, gains, setpoint, params.geometry, margin)
    shear = (1.0 + gains.k_m * s.d_x) * v / (2.0 * gains.k_m)
    Gamma0 = params.fluid.Gamma0
    U1 = g.A1 * v - (g.V1 / Gamma0) * (shear / g.A1 + gains.k_i * s.value / g.A1)
    U2 = g.A2 * v - (g.V2 / Gamma0) * (shear / g.A2 + gains.k_i * s.value / g.A2)
    return U1, U2


def closed_loop_field(state: PlantState, obs: ObserverState, true_F: float,
                      gains: ControllerGains, setpoint: Setpoint,
                      params: PlantParams,
                      margin: float = DEFAULT_DOMAIN_MARGIN
                      ) -> tuple[float, float, float, float]:
    """Shaped closed-loop state derivative (dx, dp, dP1, dP2).

    Componentwise equal to the open-loop field driven by :func:`control_flows`;
    the matching is the central correctness oracle of the package.
    """
    g = geometry_terms(state.x, params.geometry, margin)
    rho = params.fluid.rho
    M = params.m + (g.V1 + g.V2) * rho
    k_m = gains.k_m
    s = sigma(state, obs.F_hat, gains, setpoint, params.geometry, margin)

    dHd_x = (-state.p**2 * rho * (g.A1 + g.A2) / (2.0 * k_m * M * M)
             - gains.k_p * (setpoint.x_star - state.x)
             + s.value * s.d_x)
    dHd_p = state.p / (k_m * M)
    dHd_P1 = s.value * s.d_P1
    dHd_P2 = s.value * s.d_P2

    S12 = k_m
    S22 = k_m * (params.R - gains.alpha * M)
    S23 = (1.0 + k_m * s.d_x) / (2.0 * s.d_P1)
    S24 = (1.0 + k_m * s.d_x) / (2.0 * s.d_P2)
    S33 = gains.k_i / s.d_P1**2
    S44 = gains.k_i / s.d_P2**2

    zeta = obs.F_hat - gains.alpha * state.p - true_F
    dx = S12 * dHd_p
    dp = -S12 * dHd_x - S22 * dHd_p + S23 * dHd_P1 + S24 * dHd_P2 + zeta
    dP1 = -S23 * dHd_p - S33 * dHd_P1
    dP2 = -S24 * dHd_p - S44 * dHd_P2
    return dx, dp, dP1, dP2


def desired_energy(state: PlantState, obs: ObserverState, true_F: float,
                   gains: ControllerGains, setpoint: Setpoint,
                   params: PlantParams,
                   margin: float = DEFAULT_DOMAIN_MARGIN) -> tuple[float, float]:
    """Shaped energy H_d and Lyapunov candidate Psi = H_d + zeta^2 / 2."""
    M = total_mass(state.x, params, margin)
    s = sigma(state, obs.F_hat, gains, setpoint, params.geometry, margin)
    H_d = (state.p**2 / (2.0 * gains.k_m * M)
           + 0.5 * gains.k_p * (setpoint.x_star - state.x) ** 2
           + 0.5 * s.value**2)
    zeta = obs.F_hat - gains.alpha * state.p - true_F
    return H_d, H_d + 0.5 * zeta**2


def desired_energy_rate(state: PlantState, obs: ObserverState, true_F: float,
                        gains: ControllerGains, setpoint: Setpoint,
                        params: PlantParams, F_rate: float = 0.0,
                        margin: float = DEFAULT_DOMAIN_MARGIN) -> float:
    """Analytic time derivative of Psi along the closed loop.

    ``F_rate`` is the time derivative of the true external force (zero for a
    constant force). Beyond the negative quadratic form in (p, zeta, sigma),
    the exact rate carries ``-sigma * dF_hat/dt`` from the estimator moving
    inside sigma, a term the published stability argument drops; it vanishes
    at the equilibrium and is reported here in full so that numerical
    differentiation of Psi can be checked tightly.
    """
    g = geometry_terms(state.x, params.geometry, margin)
    M = params.m + (g.V1 + g.V2) * params.fluid.rho
    s = sigma(state, obs.F_hat, gains, setpoint, params.geometry, margin)
    zeta = obs.F_hat - gains.alpha * state.p - true_F
    dHd_p = state.p / (gains.k_m * M)
    S22 = gains.k_m * (params.R - gains.alpha * M)
    F_hat_rate = observer_rate(state, obs, params, margin)
    p_rate = generalized_force(state, params, margin) - true_F
    zeta_rate = F_hat_rate - gains.alpha * p_rate - F_rate
    return (-S22 * dHd_p**2
            - 2.0 * gains.k_i * s.value**2
            + dHd_p * zeta
            - s.value * F_hat_rate
            + zeta * zeta_rate)


@dataclass(frozen=True)
class StabilityReport:
    """Outcome of the gain validation for a given evaluation mass."""

    theta_matrix: tuple[tuple[float, float, float], ...]
    positive_definite: bool
    margin: float                   # smallest eigenvalue of the stability matrix
    condition_product: float        # (R - alpha*M) * alpha * k_m
    epsilon: float                  # assumed force-variation bound [N*s/m]
    alpha_limit: float              # damping bound R/M on the observer gain
    rate_bound_ok: bool             # (R - alpha*M) * alpha > epsilon/2
    M_eval: float
    worst_condition_product: float  # minimum of the product over the position range
    notes: tuple[str, ...] = ()

    @property
    def theta(self) -> np.ndarray:
        return np.array(self.theta_matrix)


def _theta_matrix(params: PlantParams, gains: ControllerGains, M: float,
                  epsilon: float) -> np.ndarray:
    off = 1.0 / (2.0 * gains.k_m * M) + epsilon / (2.0 * M)
    return np.array([
        [(params.R - gains.alpha * M) / (gains.k_m * M * M), off, 0.0],
        [off, gains.alpha, 0.0],
        [0.0, 0.0, 2.0 * gains.k_i],
    ])


def validate_gains(params: PlantParams, gains: ControllerGains,
                   M_eval: float | None = None, epsilon: float = 0.0,
                   sweep_points: int = 101) -> StabilityReport:
    """Check the closed-loop stability conditions for a gain set.

    ``M_eval`` is the total mass at which the conditions are evaluated
    (default: domain midpoint); the product ``(R - alpha*M)*alpha*k_m`` is
    additionally swept over the whole admissible position range and its worst
    case reported. A report is always produced; nothing is raised for an
    invalid tuning.
    """
    if M_eval is None:
        lo, hi = params.geometry.position_bounds()
        M_eval = total_mass(0.5 * (lo + hi), params)
    if M_eval <= 0:
        raise ValueError("evaluation mass must be positive")
    if epsilon < 0:
        raise ValueError("force-variation bound epsilon must be nonnegative")

    theta = _theta_matrix(params, gains, M_eval, epsilon)
    product = (params.R - gains.alpha * M_eval) * gains.alpha * gains.k_m
    threshold = 0.25 * (1.0 + epsilon * gains.k_m) ** 2
    pd_minors = (gains.k_i > 0
                 and theta[0, 0] > 0
                 and theta[0, 0] * theta[1, 1] - theta[0, 1] ** 2 > 0)
    eigs = np.linalg.eigvalsh(theta)
    pd_eigs = bool(eigs[0] > 0)
    if pd_minors != pd_eigs:
        raise RuntimeError(
            "internal inconsistency: principal-minor and eigenvalue tests disagree"
        )

    lo, hi = params.geometry.position_bounds()
    worst = math.inf
    for i in range(sweep_points):
        x = lo + (hi - lo) * i / (sweep_points - 1)
        M = total_mass(x, params)
        worst = min(worst, (params.R - gains.alpha * M) * gains.alpha * gains.k_m)

    notes = []
    if pd_eigs and worst <= threshold:
        notes.append(
            "condition product drops below the threshold for the heaviest "
            "in-range fluid mass; validity is position dependent"
        )
    return StabilityReport(
        theta_matrix=tuple(tuple(row) for row in theta.tolist()),
        positive_definite=pd_eigs,
        margin=float(eigs[0]),
        condition_product=product,
        epsilon=epsilon,
        alpha_limit=params.R / M_eval,
        rate_bound_ok=(params.R - gains.alpha * M_eval) * gains.alpha > 0.5 * epsilon,
        M_eval=M_eval,
        worst_condition_product=worst,
        notes=tuple(notes),
    )


# --------------------------------------------------------------------------
# Stepper-motor command mapping (syringe pumps driven by lead screws).

@dataclass(frozen=True)
class StepperParams:
    """Syringe-pump stepper drive parameters."""

    S: float        # syringe cross-section area [m^2]
    delta_t: float  # sampling interval [s]
    T_f: float      # point-to-point trajectory duration [s]
    k_U: float = 0.0  # empirical flow-to-position scale (raw mapping)

    def __post_init__(self) -> None:
        if self.S <= 0 or self.delta_t <= 0:
            raise ValueError("S and delta_t must be positive")
        if self.T_f < self.delta_t:
            raise ValueError("trajectory duration T_f must be at least delta_t")


def min_jerk_position(t: float, T_f: float, x_s0: float, x_s_star: float) -> float:
    """Minimum-jerk quintic profile from x_s0 to x_s_star over duration T_f."""
    if not 0.0 <= t <= T_f:
        raise DomainError(f"time {t!r} outside [0, {T_f!r}]")
    r = t / T_f
    shape = r**3 * (10.0 - 15.0 * r + 6.0 * r * r)
    return x_s0 + (x_s_star - x_s0) * shape


def min_jerk_velocity(t: float, T_f: float, x_s0: float, x_s_star: float) -> float:
    """Velocity of the minimum-jerk profile: 30*(x* - x0)*t^2*(T_f - t)^2 / T_f^5."""
    if not 0.0 <= t <= T_f:
        raise DomainError(f"time {t!r} outside [0, {T_f!r}]")
    return (x_s_star - x_s0) * 30.0 * t * t * (T_f - t) ** 2 / T_f**5


def stepper_target(U: float, stepper: StepperParams, x_s0: float, t: float) -> float:
    """Stepper target position realizing flow U at instant t of the jerk profile.

    Inverts the minimum-jerk velocity against the syringe flow ``U = v * S``:
    ``x_s_star = x_s0 + U * T_f^5 / (30 * t^2 * S * (T_f - t)^2)``.
    """
    if not 0.0 < t < stepper.T_f:
        raise DomainError(f"time {t!r} outside the open interval (0, {stepper.T_f!r})")
    T_f = stepper.T_f
    return x_s0 + U * T_f**5 / (30.0 * t * t * stepper.S * (T_f - t) ** 2)


def stepper_target_digital(U: float, stepper: StepperParams, x_s0: float) -> float:
    """Digital special case t = delta_t with T_f = 2*delta_t: x_s0 + 32*U*delta_t/(30*S)."""
    return x_s0 + 32.0 * U * stepper.delta_t / (30.0 * stepper.S)


def stepper_target_empirical(U: float, stepper: StepperParams, x_s0: float) -> float:
    """Raw empirical mapping x_s0 + U * k_U used on the hardware prototype.

    The scale ``k_U`` folds in unit conversions of a specific drive train; no
    equivalence with the physical mapping is asserted.
    """
    return x_s0 + U * stepper.k_U
