"""Control law: sigma, matching, shaped energy, gain conditions, stepper map."""

import math
from dataclasses import replace

import numpy as np
import pytest

from antago.controller import (
    ControllerGains,
    Setpoint,
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
    StepperParams,
)
from antago.engine import ForceModel, augmented_field
from antago.errors import DomainError
from antago.observer import ObserverState, observer_rate
from antago.plant import PlantState, open_loop_field, total_mass
from antago.verify import check_matching


def _random_state(params, rng, p_scale=0.1, P_scale=5e4):
    lo, hi = params.geometry.position_bounds()
    pad = 0.05 * (hi - lo)
    return PlantState(x=float(rng.uniform(lo + pad, hi - pad)),
                      p=float(rng.uniform(-p_scale, p_scale)),
                      P1=float(rng.uniform(-P_scale, P_scale)),
                      P2=float(rng.uniform(-P_scale, P_scale)))


def test_gains_must_be_positive():
    for bad in ({"k_p": 0.0}, {"k_m": -1.0}, {"k_i": 0.0}, {"alpha": -2.0}):
        kwargs = dict(k_p=1.0, k_m=2.0, k_i=10.0, alpha=10.0)
        kwargs.update(bad)
        with pytest.raises(ValueError):
            ControllerGains(**kwargs)


def test_setpoint_validation(params):
    Setpoint(1e-3).validate(params.geometry)
    with pytest.raises(DomainError):
        Setpoint(4e-3).validate(params.geometry)
    with pytest.raises(DomainError):
        Setpoint(-4e-3).validate(params.geometry)


def test_sigma_trivial_zero(params, gains):
    s = sigma(PlantState(1e-3, 0.0, 0.0, 0.0), 0.0, gains,
              Setpoint(1e-3), params.geometry)
    assert s.value == 0.0


def test_sigma_partials_match_finite_differences(params, gains):
    rng = np.random.default_rng(13)
    sp = Setpoint(1e-3)
    h_x, h_P = 1e-8, 1e-1
    for _ in range(20):
        state = _random_state(params, rng)
        F_hat = float(rng.uniform(-5, 5))
        s = sigma(state, F_hat, gains, sp, params.geometry)

        def val(st):
            return sigma(st, F_hat, gains, sp, params.geometry).value

        fd_x = (val(replace(state, x=state.x + h_x))
                - val(replace(state, x=state.x - h_x))) / (2 * h_x)
        assert s.d_x == pytest.approx(fd_x, rel=1e-6)
        fd_P1 = (val(replace(state, P1=state.P1 + h_P))
                 - val(replace(state, P1=state.P1 - h_P))) / (2 * h_P)
        assert s.d_P1 == pytest.approx(fd_P1, rel=1e-6)
        fd_P2 = (val(replace(state, P2=state.P2 + h_P))
                 - val(replace(state, P2=state.P2 - h_P))) / (2 * h_P)
        assert s.d_P2 == pytest.approx(fd_P2, rel=1e-6)


def test_flows_vanish_at_equilibrium(params, gains):
    state = PlantState(1e-3, 0.0, 0.0, 0.0)
    obs = ObserverState(F_hat=0.0, alpha=gains.alpha)
    U1, U2 = control_flows(state, obs, gains, Setpoint(1e-3), params)
    assert U1 == 0.0 and U2 == 0.0


def test_closed_loop_field_zero_at_equilibrium(params, gains):
    state = PlantState(1e-3, 0.0, 0.0, 0.0)
    obs = ObserverState(F_hat=0.0, alpha=gains.alpha)
    field = closed_loop_field(state, obs, 0.0, gains, Setpoint(1e-3), params)
    assert field == (0.0, 0.0, 0.0, 0.0)


def test_matching_shaped_equals_driven_open_loop(params, gains):
    """The open-loop field driven by the flow commands reproduces the shaped
    field componentwise — the central design identity, exercised here on a
    smaller sample than the acceptance run."""
    report = check_matching(seed=123, samples=30)
    assert report.ok, report.lines()


def test_matching_single_state_spot_check(params, gains):
    rng = np.random.default_rng(77)
    state = _random_state(params, rng)
    obs = ObserverState(F_hat=1.5, alpha=gains.alpha)
    sp = Setpoint(5e-4)
    F = -2.0
    U1, U2 = control_flows(state, obs, gains, sp, params)
    raw = open_loop_field(state, U1, U2, F, params)
    shaped = closed_loop_field(state, obs, F, gains, sp, params)
    for a, b in zip(raw, shaped):
        assert a == pytest.approx(b, rel=1e-9, abs=1e-18)


def test_desired_energy_zero_at_equilibrium_positive_elsewhere(params, gains):
    sp = Setpoint(1e-3)
    obs0 = ObserverState(F_hat=0.0, alpha=gains.alpha)
    H_d, Psi = desired_energy(PlantState(1e-3, 0.0, 0.0, 0.0), obs0, 0.0,
                              gains, sp, params)
    assert H_d == 0.0 and Psi == 0.0
    rng = np.random.default_rng(31)
    for _ in range(20):
        state = _random_state(params, rng)
        obs = ObserverState(F_hat=float(rng.uniform(-5, 5)), alpha=gains.alpha)
        H_d, Psi = desired_energy(state, obs, 0.0, gains, sp, params)
        assert H_d >= 0.0 and Psi >= H_d


def test_energy_rate_matches_directional_derivative(params, gains):
    """The analytic rate of the Lyapunov candidate equals its directional
    derivative along the augmented closed-loop field."""
    rng = np.random.default_rng(41)
    sp = Setpoint(1e-3)
    force = ForceModel("constant", 0.5)

    def psi_of(y):
        state = PlantState(*y[:4])
        obs = ObserverState(F_hat=y[4], alpha=gains.alpha)
        return desired_energy(state, obs, force.value, gains, sp, params)[1]

    # per-component steps: the candidate is polynomial in p, P1, P2 and F_hat
    # (central differences are exact there); only x needs a small step.
    steps = np.array([1e-9, 1e-7, 1.0, 1.0, 1e-6])
    for _ in range(15):
        state = _random_state(params, rng, p_scale=0.02, P_scale=2e4)
        obs = ObserverState(F_hat=float(rng.uniform(-2, 2)), alpha=gains.alpha)
        y = np.array([state.x, state.p, state.P1, state.P2, obs.F_hat])
        f = np.array(augmented_field(state, obs, gains, sp, force, params))
        numeric = 0.0
        for i, h in enumerate(steps):
            e = np.zeros(5)
            e[i] = h
            numeric += (psi_of(y + e) - psi_of(y - e)) / (2 * h) * f[i]
        analytic = desired_energy_rate(state, obs, force.value, gains, sp, params)
        scale = max(abs(analytic), abs(numeric), 1e-12)
        assert abs(analytic - numeric) / scale < 1e-6, (state, analytic, numeric)


def test_energy_rate_is_negative_quadratic_at_converged_estimate(params, gains):
    """With the estimate converged (zeta = 0) and sigma = 0 the rate reduces
    to the pure damping term and is strictly negative for nonzero momentum."""
    sp = Setpoint(1e-3)
    state = PlantState(1e-3, 0.05, 0.0, 0.0)
    obs = ObserverState(F_hat=gains.alpha * state.p, alpha=gains.alpha)
    F = 0.0
    rate = desired_energy_rate(state, obs, F, gains, sp, params)
    M = total_mass(state.x, params)
    S22 = gains.k_m * (params.R - gains.alpha * M)
    dHd_p = state.p / (gains.k_m * M)
    s = sigma(state, obs.F_hat, gains, sp, params.geometry)
    F_hat_rate = observer_rate(state, obs, params)
    expected = -S22 * dHd_p**2 - 2 * gains.k_i * s.value**2 \
        + dHd_p * 0.0 - s.value * F_hat_rate
    assert rate == pytest.approx(expected, rel=1e-12)
    assert -S22 * dHd_p**2 < 0


# --------------------------------------------------------------------------
# Gain validation.

def test_reference_tuning_condition_product(params, gains):
    report = validate_gains(params, gains, M_eval=total_mass(0.0, params))
    expected = (params.R - gains.alpha * total_mass(0.0, params)) \
        * gains.alpha * gains.k_m
    assert report.condition_product == pytest.approx(expected, rel=1e-12)
    assert report.condition_product == pytest.approx(49.374, rel=1e-3)
    assert report.positive_definite
    assert report.rate_bound_ok
    assert report.margin > 0


def test_alpha_beyond_damping_bound_invalid(params, gains):
    M = total_mass(0.0, params)
    too_fast = replace(gains, alpha=params.R / M + 0.1)
    report = validate_gains(params, too_fast, M_eval=M)
    assert not report.positive_definite
    assert report.condition_product < 0


def test_positive_definiteness_flips_at_analytic_root(params, gains):
    """(R - alpha*M)*alpha*k_m crosses 1/4 at the larger root of the quadratic
    in alpha; validity must flip exactly there."""
    M = total_mass(0.0, params)
    R, k_m = params.R, gains.k_m
    root = (R + math.sqrt(R * R - M / k_m)) / (2 * M)
    below = validate_gains(params, replace(gains, alpha=root * (1 - 1e-6)), M_eval=M)
    above = validate_gains(params, replace(gains, alpha=root * (1 + 1e-6)), M_eval=M)
    assert below.positive_definite
    assert not above.positive_definite


def test_epsilon_bounds_flip_validity(params, gains):
    """Both robustness conditions flip at their analytically computed
    force-variation bounds."""
    M = total_mass(0.0, params)
    prod = (params.R - gains.alpha * M) * gains.alpha  # (R - aM)*a
    # positive-definiteness threshold: 4*k_m*prod = (1 + eps*k_m)^2
    eps_pd = (math.sqrt(4 * gains.k_m * prod) - 1) / gains.k_m
    lo = validate_gains(params, gains, M_eval=M, epsilon=eps_pd * (1 - 1e-9))
    hi = validate_gains(params, gains, M_eval=M, epsilon=eps_pd * (1 + 1e-9))
    assert lo.positive_definite and not hi.positive_definite
    # solvability threshold: prod = eps/2
    eps_rate = 2 * prod
    lo = validate_gains(params, gains, M_eval=M, epsilon=eps_rate * (1 - 1e-9))
    hi = validate_gains(params, gains, M_eval=M, epsilon=eps_rate * (1 + 1e-9))
    assert lo.rate_bound_ok and not hi.rate_bound_ok


def test_minor_and_eigenvalue_tests_agree(params):
    rng = np.random.default_rng(53)
    for _ in range(60):
        gains = ControllerGains(k_p=float(rng.uniform(0.1, 10)),
                                k_m=float(rng.uniform(0.1, 10)),
                                k_i=float(rng.uniform(0.1, 50)),
                                alpha=float(rng.uniform(0.1, 40)))
        # would raise RuntimeError on disagreement
        validate_gains(params, gains, epsilon=float(rng.uniform(0, 5)))


def test_assigned_damping_positive_when_valid(params):
    rng = np.random.default_rng(59)
    for _ in range(40):
        gains = ControllerGains(k_p=1.0, k_m=float(rng.uniform(0.5, 4)),
                                k_i=10.0, alpha=float(rng.uniform(1, 30)))
        M = total_mass(0.0, params)
        report = validate_gains(params, gains, M_eval=M)
        if report.positive_definite:
            assert gains.k_m * (params.R - gains.alpha * M) > 0


# --------------------------------------------------------------------------
# Stepper mapping.

def test_min_jerk_boundaries_and_midpoint():
    assert min_jerk_position(0.0, 2.0, 1.0, 3.0) == 1.0
    assert min_jerk_position(2.0, 2.0, 1.0, 3.0) == 3.0
    assert min_jerk_position(1.0, 2.0, 1.0, 3.0) == pytest.approx(2.0, rel=1e-14)
    with pytest.raises(DomainError):
        min_jerk_position(-0.1, 2.0, 1.0, 3.0)
    with pytest.raises(DomainError):
        min_jerk_position(2.1, 2.0, 1.0, 3.0)


def test_min_jerk_velocity_matches_finite_difference():
    T_f, x0, x1 = 0.096, 0.0, 2e-4
    h = 1e-9
    for t in np.linspace(0.01, 0.086, 9):
        t = float(t)
        fd = (min_jerk_position(t + h, T_f, x0, x1)
              - min_jerk_position(t - h, T_f, x0, x1)) / (2 * h)
        assert min_jerk_velocity(t, T_f, x0, x1) == pytest.approx(fd, rel=1e-6)


def test_stepper_target_zero_flow():
    stepper = StepperParams(S=5.7256e-4, delta_t=0.048, T_f=0.096)
    assert stepper_target(0.0, stepper, 1e-3, 0.02) == 1e-3
    assert stepper_target_digital(0.0, stepper, 1e-3) == 1e-3


def test_stepper_general_equals_digital_special_case():
    stepper = StepperParams(S=5.7256e-4, delta_t=0.048, T_f=2 * 0.048)
    for U in (1e-6, -3e-7, 4.2e-6):
        general = stepper_target(U, stepper, 0.0, stepper.delta_t)
        digital = stepper_target_digital(U, stepper, 0.0)
        assert general == pytest.approx(digital, rel=1e-15)


def test_stepper_worked_value():
    stepper = StepperParams(S=5.7256e-4, delta_t=0.048, T_f=0.096)
    dx = stepper_target_digital(1e-6, stepper, 0.0)
    assert dx == pytest.approx(8.943e-5, rel=5e-4)


def test_stepper_time_domain_errors():
    stepper = StepperParams(S=5.7256e-4, delta_t=0.048, T_f=0.096)
    for t in (0.0, 0.096, -0.01, 0.2):
        with pytest.raises(DomainError):
            stepper_target(1e-6, stepper, 0.0, t)


def test_stepper_empirical_mapping():
    stepper = StepperParams(S=5.7256e-4, delta_t=0.048, T_f=0.096, k_U=1234.5)
    assert stepper_target_empirical(2e-6, stepper, 1e-3) == 1e-3 + 2e-6 * 1234.5
