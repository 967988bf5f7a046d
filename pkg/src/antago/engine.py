"""Closed-loop simulation of plant, controller and force observer.

The engine integrates the five-dimensional augmented state
``(x, p, P1, P2, F_hat)``. The pressure rows are integrated in their
analytically substituted closed-loop form, in which the bulk-modulus factor
``Gamma0 / V_i`` cancels exactly::

    dP_i/dt = -(1 + k_m * d(sigma)/dx) / (2 * A_i) * (p / (k_m * M))
              - k_i * sigma / A_i

The raw composition (flow command into the pressure dynamics) carries rate
coefficients of order ``Gamma0 / V ~ 1e15 1/s`` that would force absurd step
sizes; it is retained in :mod:`antago.plant` / :mod:`antago.controller` as a
point-verification oracle only, and the test suite checks both forms agree at
sampled states.

Two integrators are provided: an adaptive third-order embedded pair with
second-order error estimate (``rk23``) and a fixed-step classical fourth-order
scheme (``rk4``). Both are deterministic; identical scenarios produce
bit-identical trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .controller import ControllerGains, Setpoint, control_flows, desired_energy, sigma
from .errors import DomainError, ScenarioError
from .observer import ObserverState
from .plant import (
    DEFAULT_DOMAIN_MARGIN,
    PlantParams,
    PlantState,
    fluid_energy,
    geometry_terms,
    total_mass,
)

FORCE_KINDS = ("constant", "tanh_friction", "spring")


@dataclass(frozen=True)
class ForceModel:
    """External payload force as a function of the state.

    ``constant``: F = value; ``tanh_friction``: F = value * tanh(xdot)
    (Coulomb-like, vanishes at rest); ``spring``: F = value * x.
    """

    kind: str
    value: float

    def __post_init__(self) -> None:
        if self.kind not in FORCE_KINDS:
            raise ValueError(f"unknown force kind {self.kind!r}; expected one of {FORCE_KINDS}")

    def __call__(self, x: float, xdot: float) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "tanh_friction":
            return self.value * math.tanh(xdot)
        return self.value * x

    def rate(self, x: float, xdot: float) -> float:
        """Time derivative of the force along the motion (for rate diagnostics)."""
        if self.kind == "constant":
            return 0.0
        if self.kind == "tanh_friction":
            return self.value * xdot / math.cosh(xdot) ** 2
        return self.value * xdot


def evaluate_force(force: ForceModel, state: PlantState, params: PlantParams) -> float:
    """Evaluate the force model at a plant state (velocity taken as p/M)."""
    return force(state.x, state.p / total_mass(state.x, params))


@dataclass(frozen=True)
class SolverSettings:
    method: str = "rk23"       # "rk23" (adaptive) or "rk4" (fixed step)
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = 1e-2
    fixed_step: float = 1e-5
    sample_dt: float = 5e-3    # output cadence

    def __post_init__(self) -> None:
        if self.method not in ("rk23", "rk4"):
            raise ValueError(f"unknown solver method {self.method!r}")
        if min(self.rel_tol, self.abs_tol, self.max_step, self.fixed_step,
               self.sample_dt) <= 0:
            raise ValueError("solver tolerances and steps must be positive")


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete specification of one closed-loop simulation."""

    params: PlantParams
    gains: ControllerGains
    setpoints: tuple[tuple[float, float], ...]   # (time, x_star), first at t=0
    force: ForceModel
    duration: float
    solver: SolverSettings = field(default_factory=SolverSettings)
    initial: PlantState = field(default_factory=lambda: PlantState(0.0, 0.0, 0.0, 0.0))
    F_hat0: float | None = None   # default alpha*p(0), i.e. unbiased estimate
    name: str = ""

    def validate(self) -> None:
        if self.duration <= 0:
            raise ScenarioError("duration must be positive")
        if not self.setpoints or self.setpoints[0][0] != 0.0:
            raise ScenarioError("setpoint schedule must start at time 0")
        times = [t for t, _ in self.setpoints]
        if sorted(times) != times or len(set(times)) != len(times):
            raise ScenarioError("setpoint times must be strictly increasing")
        for _, x_star in self.setpoints:
            Setpoint(x_star).validate(self.params.geometry)
        lo, hi = self.params.geometry.position_bounds()
        if not lo < self.initial.x < hi:
            raise ScenarioError("initial position outside the admissible range")

    def initial_F_hat(self) -> float:
        if self.F_hat0 is not None:
            return self.F_hat0
        return self.gains.alpha * self.initial.p


# Channel order is the CSV column order; keep in sync with scenario_io.
CHANNELS = ("t", "x", "xdot", "p", "P1", "P2", "U1", "U2", "F_hat", "F_tilde",
            "F_true", "zeta", "sigma", "x_star", "H", "H_d", "Psi")


@dataclass(frozen=True)
class TrajectoryRecord:
    """Sampled closed-loop trajectory with diagnostic channels.

    ``status`` is "ok", "domain-exit" or "step-underflow"; on early termination
    the arrays hold the samples completed before the failure and ``detail``
    describes the offending state.
    """

    data: dict[str, np.ndarray]
    status: str = "ok"
    detail: str = ""

    def __getitem__(self, channel: str) -> np.ndarray:
        return self.data[channel]

    def __len__(self) -> int:
        return len(self.data["t"])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TrajectoryRecord):
            return NotImplemented
        return (self.status == other.status and self.detail == other.detail
                and set(self.data) == set(other.data)
                and all(np.array_equal(self.data[k], other.data[k]) for k in self.data))


class _DomainExit(Exception):
    def __init__(self, t: float, y: tuple, message: str):
        super().__init__(message)
        self.t = t
        self.y = y


class _StepUnderflow(Exception):
    def __init__(self, t: float, y: tuple, message: str):
        super().__init__(message)
        self.t = t
        self.y = y


def _make_rhs(params: PlantParams, gains: ControllerGains, force: ForceModel,
              x_star: float, margin: float):
    """Closed-loop right-hand side for one setpoint segment.

    All parameters are bound to locals; the geometry branch is inlined because
    this is the innermost loop of every simulation.
    """
    geo = params.geometry
    L0 = geo.L0
    K0 = geo.K0
    V0 = geo.V0
    x0 = geo.x0
    x_M = geo.x_M
    rho = params.fluid.rho
    m = params.m
    R = params.R
    k_p, k_m, k_i, alpha = gains.k_p, gains.k_m, gains.k_i, gains.alpha
    kpkm = k_p * k_m
    f = force
    sqrt = math.sqrt

    def rhs(t: float, y: tuple) -> tuple:
        x, p, P1, P2, F_hat = y
        u1 = x_M - x - x0
        u2 = x + x0
        if u1 <= margin or u2 <= margin:
            side = 1 if u1 <= margin else 2
            raise _DomainExit(t, y, f"actuator {side} reached the volume-model boundary")
        s1 = sqrt(6.0 * u1 / L0)
        a1 = 2.0 / 3.0 - u1 / (2.0 * L0)
        s2 = sqrt(6.0 * u2 / L0)
        a2 = 2.0 / 3.0 - u2 / (2.0 * L0)
        V1 = K0 * a1 * s1 + V0
        V2 = K0 * a2 * s2 + V0
        A1 = -K0 * (-s1 / (2.0 * L0) + 3.0 * a1 / (L0 * s1))
        A2 = K0 * (-s2 / (2.0 * L0) + 3.0 * a2 / (L0 * s2))
        dA1 = K0 * (-3.0 / (L0 * L0 * s1) - 9.0 * a1 / (L0 * L0 * s1**3))
        dA2 = K0 * (-3.0 / (L0 * L0 * s2) - 9.0 * a2 / (L0 * L0 * s2**3))

        M = m + rho * (V1 + V2)
        v = p / M
        G = p * p * rho * (A1 + A2) / (2.0 * M * M) + A1 * P1 + A2 * P2 - R * v
        F = f(x, v)
        sig = P1 * A1 + P2 * A2 - F_hat + kpkm * (x - x_star)
        dsig = P1 * dA1 + P2 * dA2 + kpkm
        shear = (1.0 + k_m * dsig) * v / (2.0 * k_m)
        return (
            v,
            G - F,
            -shear / A1 - k_i * sig / A1,
            -shear / A2 - k_i * sig / A2,
            alpha * (G - F_hat + alpha * p),
        )

    return rhs


def augmented_field(state: PlantState, obs: ObserverState, gains: ControllerGains,
                    setpoint: Setpoint, force: ForceModel, params: PlantParams,
                    margin: float = DEFAULT_DOMAIN_MARGIN) -> tuple:
    """Public wrapper around the integrated field, for point verification."""
    rhs = _make_rhs(params, gains, force, setpoint.x_star, margin)
    try:
        return rhs(0.0, (state.x, state.p, state.P1, state.P2, obs.F_hat))
    except _DomainExit as exc:
        raise DomainError(str(exc)) from None


# --------------------------------------------------------------------------
# Integrators (tuple-of-floats state, deterministic).

_MIN_STEP_FRACTION = 1e-14


def _rk23_segment(rhs, y, t_grid, rtol, atol, max_step, h):
    """Bogacki-Shampine 3(2) pair with FSAL, landing exactly on grid times."""
    out = []
    t = t_grid[0]
    k1 = rhs(t, y)
    for tg in t_grid[1:]:
        while t < tg:
            h = min(h, max_step, tg - t)
            if h < _MIN_STEP_FRACTION * max(1.0, abs(t)):
                raise _StepUnderflow(t, y, f"step size underflow at t={t:.6e}")
            k2 = rhs(t + 0.5 * h, tuple(yi + 0.5 * h * k for yi, k in zip(y, k1)))
            k3 = rhs(t + 0.75 * h, tuple(yi + 0.75 * h * k for yi, k in zip(y, k2)))
            yn = tuple(yi + h * (2.0 * a + 3.0 * b + 4.0 * c) / 9.0
                       for yi, a, b, c in zip(y, k1, k2, k3))
            k4 = rhs(t + h, yn)
            errn = 0.0
            for yi, yni, a, b, c, d in zip(y, yn, k1, k2, k3, k4):
                e = h * (-5.0 * a / 72.0 + b / 12.0 + c / 9.0 - d / 8.0)
                sc = atol + rtol * max(abs(yi), abs(yni))
                errn = max(errn, abs(e) / sc)
            if errn <= 1.0:
                t = tg if tg - t - h <= 1e-15 * max(1.0, abs(tg)) else t + h
                y = yn
                k1 = k4
            h *= min(5.0, max(0.2, 0.9 * (errn + 1e-300) ** (-1.0 / 3.0)))
        out.append(y)
    return out, h


def _rk4_segment(rhs, y, t_grid, fixed_step):
    """Classical fixed-step RK4, subdividing each grid interval evenly."""
    out = []
    for ta, tb in zip(t_grid[:-1], t_grid[1:]):
        n = max(1, math.ceil((tb - ta) / fixed_step - 1e-12))
        h = (tb - ta) / n
        t = ta
        for _ in range(n):
            k1 = rhs(t, y)
            k2 = rhs(t + 0.5 * h, tuple(yi + 0.5 * h * k for yi, k in zip(y, k1)))
            k3 = rhs(t + 0.5 * h, tuple(yi + 0.5 * h * k for yi, k in zip(y, k2)))
            k4 = rhs(t + h, tuple(yi + h * k for yi, k in zip(y, k3)))
            y = tuple(yi + h * (a + 2.0 * b + 2.0 * c + d) / 6.0
                      for yi, a, b, c, d in zip(y, k1, k2, k3, k4))
            t += h
        out.append(y)
    return out


def _sample_grid(duration: float, sample_dt: float, events: list[float]) -> list[float]:
    n = max(1, math.ceil(duration / sample_dt - 1e-12))
    times = {round(i * duration / n, 15) for i in range(n + 1)}
    times.update(e for e in events if 0.0 < e < duration)
    return sorted(times)


def _setpoint_at(setpoints, t: float) -> float:
    x_star = setpoints[0][1]
    for ts, xs in setpoints:
        if ts <= t:
            x_star = xs
        else:
            break
    return x_star


def simulate(scenario: ScenarioConfig,
             margin: float = DEFAULT_DOMAIN_MARGIN) -> TrajectoryRecord:
    """Integrate the augmented closed loop and record all diagnostic channels.

    Terminates early (with status "domain-exit" or "step-underflow") if the
    state leaves the admissible region or the adaptive step collapses; the
    samples completed up to that point are returned.
    """
    scenario.validate()
    params, gains, force = scenario.params, scenario.gains, scenario.force
    solver = scenario.solver

    events = [t for t, _ in scenario.setpoints]
    grid = _sample_grid(scenario.duration, solver.sample_dt, events)

    y = (scenario.initial.x, scenario.initial.p, scenario.initial.P1,
         scenario.initial.P2, scenario.initial_F_hat())
    times = [0.0]
    states = [y]
    status, detail = "ok", ""
    h = min(solver.max_step, 1e-6)

    # Split the grid at setpoint changes; the setpoint is piecewise constant.
    boundaries = sorted({0.0, scenario.duration, *(e for e in events if 0.0 < e < scenario.duration)})
    try:
        for seg_a, seg_b in zip(boundaries[:-1], boundaries[1:]):
            seg_grid = [seg_a] + [t for t in grid if seg_a < t <= seg_b]
            rhs = _make_rhs(params, gains, force, _setpoint_at(scenario.setpoints, seg_a), margin)
            if solver.method == "rk23":
                ys, h = _rk23_segment(rhs, y, seg_grid, solver.rel_tol,
                                      solver.abs_tol, solver.max_step, h)
            else:
                ys = _rk4_segment(rhs, y, seg_grid, solver.fixed_step)
            times.extend(seg_grid[1:])
            states.extend(ys)
            y = states[-1]
    except _DomainExit as exc:
        status, detail = "domain-exit", f"{exc} (t={exc.t:.6e}, state={exc.y})"
    except _StepUnderflow as exc:
        status, detail = "step-underflow", f"{exc} (state={exc.y})"

    return _build_record(scenario, times, states, status, detail, margin)


def _build_record(scenario, times, states, status, detail, margin) -> TrajectoryRecord:
    params, gains = scenario.params, scenario.gains
    cols = {name: [] for name in CHANNELS}
    for t, y in zip(times, states):
        x, p, P1, P2, F_hat = y
        state = PlantState(x, p, P1, P2)
        obs = ObserverState(F_hat=F_hat, alpha=gains.alpha)
        x_star = _setpoint_at(scenario.setpoints, t)
        setpoint = Setpoint(x_star)
        g = geometry_terms(x, params.geometry, margin)
        M = params.m + (g.V1 + g.V2) * params.fluid.rho
        v = p / M
        F_true = scenario.force(x, v)
        U1, U2 = control_flows(state, obs, gains, setpoint, params, margin)
        s = sigma(state, F_hat, gains, setpoint, params.geometry, margin)
        H = (p * p / (2.0 * M)
             + fluid_energy(P1, g.V1, params.fluid)
             + fluid_energy(P2, g.V2, params.fluid))
        H_d, Psi = desired_energy(state, obs, F_true, gains, setpoint, params, margin)
        row = (t, x, v, p, P1, P2, U1, U2, F_hat, F_hat - gains.alpha * p,
               F_true, F_hat - gains.alpha * p - F_true, s.value, x_star,
               H, H_d, Psi)
        for name, val in zip(CHANNELS, row):
            cols[name].append(val)
    data = {name: np.asarray(vals, dtype=float) for name, vals in cols.items()}
    return TrajectoryRecord(data=data, status=status, detail=detail)


def simulate_open_loop(params: PlantParams, initial: PlantState, duration: float,
                       solver: SolverSettings, U1: float = 0.0, U2: float = 0.0,
                       F: float = 0.0, R_override: float | None = None,
                       margin: float = DEFAULT_DOMAIN_MARGIN
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integrate the open-loop plant under constant inputs.

    Returns (times, states[n,4], H[n]). Used for passivity and energy
    conservation checks; ``R_override`` allows the lossless case R = 0.
    """
    geo = params.geometry
    L0, K0, V0, x0, x_M = geo.L0, geo.K0, geo.V0, geo.x0, geo.x_M
    rho = params.fluid.rho
    Gamma0 = params.fluid.Gamma0
    m = params.m
    R = params.R if R_override is None else R_override
    sqrt = math.sqrt

    def rhs(t, y):
        x, p, P1, P2 = y
        u1 = x_M - x - x0
        u2 = x + x0
        if u1 <= margin or u2 <= margin:
            side = 1 if u1 <= margin else 2
            raise _DomainExit(t, y, f"actuator {side} reached the volume-model boundary")
        s1 = sqrt(6.0 * u1 / L0)
        a1 = 2.0 / 3.0 - u1 / (2.0 * L0)
        s2 = sqrt(6.0 * u2 / L0)
        a2 = 2.0 / 3.0 - u2 / (2.0 * L0)
        V1 = K0 * a1 * s1 + V0
        V2 = K0 * a2 * s2 + V0
        A1 = -K0 * (-s1 / (2.0 * L0) + 3.0 * a1 / (L0 * s1))
        A2 = K0 * (-s2 / (2.0 * L0) + 3.0 * a2 / (L0 * s2))
        M = m + rho * (V1 + V2)
        v = p / M
        G = p * p * rho * (A1 + A2) / (2.0 * M * M) + A1 * P1 + A2 * P2 - R * v
        return (v, G - F,
                Gamma0 * (U1 - A1 * v) / V1,
                Gamma0 * (U2 - A2 * v) / V2)

    grid = _sample_grid(duration, solver.sample_dt, [])
    y = (initial.x, initial.p, initial.P1, initial.P2)
    if solver.method == "rk23":
        ys, _ = _rk23_segment(rhs, y, grid, solver.rel_tol, solver.abs_tol,
                              solver.max_step, min(solver.max_step, 1e-8))
    else:
        ys = _rk4_segment(rhs, y, grid, solver.fixed_step)
    states = np.array([y] + ys)
    energies = np.array([
        hamiltonian_value(params, *row, margin=margin) for row in states
    ])
    return np.asarray(grid), states, energies


def hamiltonian_value(params: PlantParams, x: float, p: float, P1: float,
                      P2: float, margin: float = DEFAULT_DOMAIN_MARGIN) -> float:
    g = geometry_terms(x, params.geometry, margin)
    M = params.m + (g.V1 + g.V2) * params.fluid.rho
    return (p * p / (2.0 * M)
            + fluid_energy(P1, g.V1, params.fluid)
            + fluid_energy(P2, g.V2, params.fluid))


# --------------------------------------------------------------------------
# Trajectory diagnostics.

@dataclass(frozen=True)
class DiagnosticsSummary:
    samples: int
    status: str
    x_error: float                 # final x - x_star
    sigma_final: float
    force_balance_residual: float  # final P1*A1 + P2*A2 - F_hat
    settle_time: float             # last time |x - x_star| exceeded settle_tol
    settle_tol: float
    max_psi_increment: float
    psi_max: float
    zeta_rate: float               # fitted exponential decay rate of |zeta|
    zeta_rate_rel_err: float       # relative deviation from the observer gain
    crossed_symmetric: bool        # trajectory visited A1 = -A2 (degenerate config)


def fit_decay_rate(t: np.ndarray, values: np.ndarray,
                   floor: float = 1e-9) -> float:
    """Least-squares slope of log|values| over samples above the noise floor.

    Returns the positive decay rate, or nan if fewer than two usable samples.
    """
    v = np.abs(np.asarray(values, dtype=float))
    lim = max(floor, 1e-6 * v[0]) if len(v) and v[0] > 0 else floor
    mask = v > lim
    if mask.sum() < 2:
        return float("nan")
    slope = np.polyfit(np.asarray(t)[mask], np.log(v[mask]), 1)[0]
    return float(-slope)


def diagnostics(record: TrajectoryRecord, gains: ControllerGains,
                params: PlantParams, settle_tol: float = 1e-5,
                margin: float = DEFAULT_DOMAIN_MARGIN) -> DiagnosticsSummary:
    """Aggregate the stability-theory checks over one recorded trajectory."""
    if len(record) == 0:
        raise ValueError("empty trajectory")
    t = record["t"]
    x = record["x"]
    x_star = record["x_star"]

    psi = record["Psi"]
    increments = np.diff(psi)
    max_inc = float(increments.max()) if len(increments) else 0.0

    err = np.abs(x - x_star)
    over = np.nonzero(err > settle_tol)[0]
    settle_time = float(t[over[-1]]) if len(over) else 0.0

    rate = fit_decay_rate(t, record["zeta"])
    rate_err = abs(rate - gains.alpha) / gains.alpha if math.isfinite(rate) else float("nan")

    sum_grad = []
    scale = []
    for xi in x:
        g = geometry_terms(float(xi), params.geometry, margin)
        sum_grad.append(g.A1 + g.A2)
        scale.append(abs(g.A1) + abs(g.A2))
    sum_grad = np.asarray(sum_grad)
    scale = np.asarray(scale)
    crossed = bool(np.any(np.abs(sum_grad) <= 1e-6 * scale)
                   or np.any(np.sign(sum_grad[:-1]) * np.sign(sum_grad[1:]) < 0))

    g_end = geometry_terms(float(x[-1]), params.geometry, margin)
    balance = (record["P1"][-1] * g_end.A1 + record["P2"][-1] * g_end.A2
               - record["F_hat"][-1])

    return DiagnosticsSummary(
        samples=len(record),
        status=record.status,
        x_error=float(x[-1] - x_star[-1]),
        sigma_final=float(record["sigma"][-1]),
        force_balance_residual=float(balance),
        settle_time=settle_time,
        settle_tol=settle_tol,
        max_psi_increment=max_inc,
        psi_max=float(psi.max()),
        zeta_rate=rate,
        zeta_rate_rel_err=rate_err,
        crossed_symmetric=crossed,
    )


def with_solver(scenario: ScenarioConfig, **changes) -> ScenarioConfig:
    """Scenario copy with selected solver settings replaced."""
    return replace(scenario, solver=replace(scenario.solver, **changes))
