"""Self-contained numerical verification suites.

Each suite re-derives a theoretical property of the closed loop with an
independent oracle (finite differences, exact exponential solutions, raw
open-loop composition, exact arithmetic) and reports worst-case residuals
against pinned bounds. The CLI ``verify`` subcommand prints these reports;
the test suite asserts on the same numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .controller import (
    ControllerGains,
    Setpoint,
    closed_loop_field,
    sigma,
    validate_gains,
)
from .engine import ForceModel, diagnostics, fit_decay_rate, simulate
from .observer import ObserverState
from .plant import (
    PlantParams,
    PlantState,
    hamiltonian,
    hamiltonian_gradient,
    open_loop_field,
    volume_curvatures,
    volume_gradients,
    volumes,
)
from .scenario_io import load_preset

_REL_FLOOR = 1e-20


def _rel_err(a: float, b: float) -> float:
    scale = max(abs(a), abs(b), _REL_FLOOR)
    return abs(a - b) / scale


# --------------------------------------------------------------------------
# 1. Matching: shaped closed-loop field == open-loop field under the control law.

@dataclass(frozen=True)
class MatchingReport:
    samples: int
    worst_rel_err: float
    bound: float
    ok: bool

    def lines(self) -> tuple[str, ...]:
        return (
            f"matching: {self.samples} random states, "
            f"worst componentwise rel. err {self.worst_rel_err:.3e} "
            f"(bound {self.bound:.1e}) -> {'PASS' if self.ok else 'FAIL'}",
        )


def check_matching(seed: int = 0, samples: int = 100,
                   bound: float = 1e-9) -> MatchingReport:
    """Compare the substituted closed-loop field against the raw composition.

    At random in-domain states, gains and forces, the open-loop plant driven
    by the computed flow commands must reproduce the shaped field exactly;
    this is the central algebraic identity of the control design.
    """
    from .controller import control_flows

    params = load_preset("fig2-F1").params
    lo, hi = params.geometry.position_bounds()
    pad = 0.05 * (hi - lo)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        state = PlantState(
            x=float(rng.uniform(lo + pad, hi - pad)),
            p=float(rng.uniform(-0.1, 0.1)),
            P1=float(rng.uniform(-5e4, 5e4)),
            P2=float(rng.uniform(-5e4, 5e4)),
        )
        gains = ControllerGains(
            k_p=float(rng.uniform(0.5, 5.0)),
            k_m=float(rng.uniform(0.5, 4.0)),
            k_i=float(rng.uniform(1.0, 20.0)),
            alpha=float(rng.uniform(1.0, 15.0)),
        )
        setpoint = Setpoint(float(rng.uniform(lo + pad, hi - pad)))
        obs = ObserverState(F_hat=float(rng.uniform(-5.0, 5.0)), alpha=gains.alpha)
        F = float(rng.uniform(-10.0, 10.0))

        U1, U2 = control_flows(state, obs, gains, setpoint, params)
        raw = open_loop_field(state, U1, U2, F, params)
        shaped = closed_loop_field(state, obs, F, gains, setpoint, params)
        worst = max(worst, *(_rel_err(a, b) for a, b in zip(raw, shaped)))
    return MatchingReport(samples=samples, worst_rel_err=worst, bound=bound,
                          ok=worst < bound)


# --------------------------------------------------------------------------
# 2. Observer decay: zeta decays exactly like exp(-alpha t) for constant force.

@dataclass(frozen=True)
class DecayReport:
    alpha: float
    zeta_rate: float
    zeta_rel_err: float
    upsilon_rate: float
    upsilon_rel_err: float
    bound: float
    ok: bool

    def lines(self) -> tuple[str, ...]:
        return (
            f"observer decay: fitted |zeta| rate {self.zeta_rate:.6f} "
            f"vs gain {self.alpha:g} (rel. err {self.zeta_rel_err:.3e})",
            f"observer energy: fitted zeta^2 rate {self.upsilon_rate:.6f} "
            f"vs 2*gain {2 * self.alpha:g} (rel. err {self.upsilon_rel_err:.3e})",
            f"bound {self.bound:.1e} -> {'PASS' if self.ok else 'FAIL'}",
        )


def check_observer_decay(bound: float = 1e-2) -> DecayReport:
    """Fit the estimation-error decay in a constant-force run.

    The error obeys an exact linear ODE, so the fitted rate must equal the
    observer gain and the squared error must decay at twice that rate.
    """
    base = load_preset("fig2-F1")
    # 0.01 N matches the equilibrium-force scale of the reference scenarios;
    # much larger constant loads push the payload out of its few-millimetre
    # travel before the loop can compensate.
    scenario = replace(base, force=ForceModel("constant", 0.01), duration=1.2,
                       name="observer-decay")
    record = simulate(scenario)
    alpha = scenario.gains.alpha
    t, zeta = record["t"], record["zeta"]
    zeta_rate = fit_decay_rate(t, zeta)
    upsilon_rate = fit_decay_rate(t, zeta**2)
    zeta_err = abs(zeta_rate - alpha) / alpha
    ups_err = abs(upsilon_rate - 2.0 * alpha) / (2.0 * alpha)
    return DecayReport(alpha=alpha, zeta_rate=zeta_rate, zeta_rel_err=zeta_err,
                       upsilon_rate=upsilon_rate, upsilon_rel_err=ups_err,
                       bound=bound, ok=max(zeta_err, ups_err) < bound)


# --------------------------------------------------------------------------
# 3. Lyapunov descent over the reference scenarios.

@dataclass(frozen=True)
class LyapunovEntry:
    name: str
    max_increment: float
    psi_max: float
    bound: float
    ok: bool


@dataclass(frozen=True)
class LyapunovReport:
    entries: tuple[LyapunovEntry, ...]
    ok: bool

    def lines(self) -> tuple[str, ...]:
        out = []
        for e in self.entries:
            out.append(
                f"lyapunov {e.name}: max Psi increment {e.max_increment:.3e} "
                f"(bound {e.bound:.3e}) -> {'PASS' if e.ok else 'FAIL'}"
            )
        return tuple(out)


def check_lyapunov(rel_bound: float = 1e-9,
                   presets: tuple[str, ...] = ("fig2-F1", "fig2-F2", "fig2-F3")
                   ) -> LyapunovReport:
    """Check that the Lyapunov candidate Psi never increases along each run.

    The descent argument assumes the external force varies no faster than the
    motion opposes it; a motion-favouring load sits outside that assumption
    and can produce genuine (tiny but resolvable) positive increments.
    """
    entries = []
    for name in presets:
        scenario = load_preset(name)
        record = simulate(scenario)
        summary = diagnostics(record, scenario.gains, scenario.params)
        bound = rel_bound * summary.psi_max
        entries.append(LyapunovEntry(
            name=name, max_increment=summary.max_psi_increment,
            psi_max=summary.psi_max, bound=bound,
            ok=summary.max_psi_increment <= bound,
        ))
    return LyapunovReport(entries=tuple(entries), ok=all(e.ok for e in entries))


# --------------------------------------------------------------------------
# 4. Gradient suites against central finite differences.

@dataclass(frozen=True)
class GradientCheck:
    name: str
    worst: float
    bound: float
    ok: bool


@dataclass(frozen=True)
class GradientReport:
    points: int
    checks: tuple[GradientCheck, ...]
    ok: bool

    def lines(self) -> tuple[str, ...]:
        return tuple(
            f"gradients {c.name}: worst rel. err {c.worst:.3e} "
            f"(bound {c.bound:.1e}) -> {'PASS' if c.ok else 'FAIL'}"
            for c in self.checks
        )


def check_gradients(seed: int = 0, points: int = 20) -> GradientReport:
    """Finite-difference validation of every closed-form derivative."""
    params = load_preset("fig2-F1").params
    geo = params.geometry
    lo, hi = geo.position_bounds()
    pad = 0.05 * (hi - lo)
    rng = np.random.default_rng(seed)
    xs = rng.uniform(lo + pad, hi - pad, size=points)

    h_x = 1e-8
    worst_A = worst_dA = worst_H = worst_sig = 0.0
    for x in xs:
        x = float(x)
        # Volume gradients vs finite differences of the volumes.
        A1, A2 = volume_gradients(x, geo)
        for i, Ai in enumerate((A1, A2)):
            fd = (volumes(x + h_x, geo)[i] - volumes(x - h_x, geo)[i]) / (2 * h_x)
            worst_A = max(worst_A, _rel_err(Ai, fd))
        # Curvatures vs finite differences of the gradients.
        dA1, dA2 = volume_curvatures(x, geo)
        for i, dAi in enumerate((dA1, dA2)):
            fd = (volume_gradients(x + h_x, geo)[i]
                  - volume_gradients(x - h_x, geo)[i]) / (2 * h_x)
            worst_dA = max(worst_dA, _rel_err(dAi, fd))

        state = PlantState(x=x, p=float(rng.uniform(-0.1, 0.1)),
                           P1=float(rng.uniform(1e3, 5e4)),
                           P2=float(rng.uniform(1e3, 5e4)))
        grad = hamiltonian_gradient(state, params)
        # Pressure steps must be large enough that the energy change clears
        # the kinetic term's roundoff floor; truncation stays negligible
        # because the fluid energy is nearly quadratic in P.
        steps = (1e-8, 1e-7, 1e3, 1e3)
        for i, (g, h) in enumerate(zip(grad, steps)):
            vals = list((state.x, state.p, state.P1, state.P2))
            vals[i] += h
            hi_val = hamiltonian(PlantState(*vals), params)
            vals[i] -= 2 * h
            lo_val = hamiltonian(PlantState(*vals), params)
            worst_H = max(worst_H, _rel_err(g, (hi_val - lo_val) / (2 * h)))

        gains = ControllerGains(k_p=1.0, k_m=2.0, k_i=10.0, alpha=10.0)
        setpoint = Setpoint(float(rng.uniform(lo + pad, hi - pad)))
        F_hat = float(rng.uniform(-5.0, 5.0))
        s = sigma(state, F_hat, gains, setpoint, geo)
        fd_x = (sigma(PlantState(x + h_x, state.p, state.P1, state.P2),
                      F_hat, gains, setpoint, geo).value
                - sigma(PlantState(x - h_x, state.p, state.P1, state.P2),
                        F_hat, gains, setpoint, geo).value) / (2 * h_x)
        worst_sig = max(worst_sig, _rel_err(s.d_x, fd_x))
        h_P = 1e-1
        for attr, d in (("P1", s.d_P1), ("P2", s.d_P2)):
            up = replace(state, **{attr: getattr(state, attr) + h_P})
            dn = replace(state, **{attr: getattr(state, attr) - h_P})
            fd = (sigma(up, F_hat, gains, setpoint, geo).value
                  - sigma(dn, F_hat, gains, setpoint, geo).value) / (2 * h_P)
            worst_sig = max(worst_sig, _rel_err(d, fd))

    checks = (
        GradientCheck("volume-gradients", worst_A, 1e-6, worst_A < 1e-6),
        GradientCheck("volume-curvatures", worst_dA, 1e-5, worst_dA < 1e-5),
        GradientCheck("hamiltonian-gradient", worst_H, 1e-6, worst_H < 1e-6),
        GradientCheck("sigma-partials", worst_sig, 1e-6, worst_sig < 1e-6),
    )
    return GradientReport(points=points, checks=checks,
                          ok=all(c.ok for c in checks))


# --------------------------------------------------------------------------
# 5. Gain-condition arithmetic.

@dataclass(frozen=True)
class GainsReport:
    positive_definite: bool
    condition_product: float
    threshold: float
    alpha_limit: float
    alpha_pd_root: float
    ok: bool
    notes: tuple[str, ...]

    def lines(self) -> tuple[str, ...]:
        out = [
            f"gains: condition product (R - alpha*M)*alpha*k_m = "
            f"{self.condition_product:.4f} (threshold {self.threshold:.4f}) -> "
            f"{'PASS' if self.positive_definite else 'FAIL'}",
            f"gains: damping bound alpha < R/M = {self.alpha_limit:.4f}",
            f"gains: positive-definiteness flips at alpha = {self.alpha_pd_root:.4f}",
        ]
        out.extend(f"note: {n}" for n in self.notes)
        return tuple(out)


def check_gains() -> GainsReport:
    """Evaluate the stability conditions on the reference tuning.

    The reference study quotes 80 for the condition product; recomputing it
    from the study's own parameters gives about 49.37, which still clears the
    1/4 threshold comfortably. The discrepancy is reported, not silently
    patched.
    """
    scenario = load_preset("fig2-F1")
    params, gains = scenario.params, scenario.gains
    report = validate_gains(params, gains)
    M = report.M_eval
    R, k_m = params.R, gains.k_m
    # Larger root of (R - alpha*M)*alpha*k_m = 1/4 in alpha.
    disc = math.sqrt(R * R - M / k_m)
    alpha_root = (R + disc) / (2.0 * M)
    notes = list(report.notes)
    notes.append(
        "the reference study states 80 for this product; the parameters it "
        "lists give 49.37"
    )
    return GainsReport(
        positive_definite=report.positive_definite,
        condition_product=report.condition_product,
        threshold=0.25,
        alpha_limit=report.alpha_limit,
        alpha_pd_root=alpha_root,
        ok=report.positive_definite,
        notes=tuple(notes),
    )


SUITES = {
    "matching": check_matching,
    "observer-decay": check_observer_decay,
    "lyapunov": check_lyapunov,
    "gradients": check_gradients,
    "gains": check_gains,
}
