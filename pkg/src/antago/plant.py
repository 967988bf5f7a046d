"""Port-Hamiltonian model of an antagonistic pair of soft hydraulic bellow actuators.

Two bellow actuators made of inextensible pouches drive a payload of mass ``m``
along a horizontal axis ``x``. Each actuator contracts when its internal fluid
volume grows, so the pair acts antagonistically: actuator 2 contracts (and
actuator 1 expands) as ``x`` increases. The state is ``(x, p, P1, P2)`` with
momentum ``p`` and gauge pressures ``P1``, ``P2``; the open-loop dynamics are
Hamiltonian with a skew interconnection, transmission damping ``R``, an
external force ``F`` on the payload, and the syringe-pump flow rates
``(U1, U2)`` as inputs.

All functions here are pure and operate on plain floats; they are safe to call
concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

from .errors import DomainError

# Margin [m] kept between the position and the square-root domain boundary,
# where the volume gradients blow up.
DEFAULT_DOMAIN_MARGIN = 1e-6

# Relative tolerance for the k0/K0 redundancy check.
_K0_CONSISTENCY_RTOL = 1e-12


@dataclass(frozen=True)
class ActuatorGeometry:
    """Geometry of one bellow actuator (both actuators of the pair are identical).

    ``k0`` and ``K0`` are redundant: ``K0 = k0 * (L0**2 / n_L) * (d_c/3 + D_s/2)``
    is the combined volume scale. Both are stored and checked for consistency;
    use :meth:`from_scale` to supply only one of them.
    """

    L0: float    # length of the empty actuator [m]
    n_L: int     # number of pouches
    D_s: float   # geometric diameter [m]
    d_c: float   # geometric diameter [m]
    k0: float    # dimensionless volume scaling factor
    K0: float    # combined volume scale [m^3]
    V0: float    # dead volume of fluid [m^3]
    x0: float    # initial offset contraction [m]
    x_M: float   # maximum contraction [m]

    def __post_init__(self) -> None:
        if not (self.L0 > 0 and self.D_s > 0 and self.d_c > 0 and self.V0 > 0):
            raise ValueError("L0, D_s, d_c and V0 must be positive")
        if self.n_L < 1:
            raise ValueError("n_L must be a positive integer")
        if not (0 < self.x0 < self.x_M):
            raise ValueError("offset contraction must satisfy 0 < x0 < x_M")
        # x_M <= L0/4 keeps the analytic zero of the volume gradient, at
        # contraction 4*L0/9, strictly outside the reachable range.
        if self.x_M > self.L0 / 4:
            raise ValueError("maximum contraction must satisfy x_M <= L0/4")
        expected = self.k0 * (self.L0**2 / self.n_L) * (self.d_c / 3 + self.D_s / 2)
        if abs(self.K0 - expected) > _K0_CONSISTENCY_RTOL * abs(expected):
            raise ValueError(
                f"inconsistent volume scales: K0={self.K0!r} but "
                f"k0*(L0^2/n_L)*(d_c/3 + D_s/2)={expected!r}"
            )

    @classmethod
    def from_scale(cls, *, L0: float, n_L: int, D_s: float, d_c: float,
                   V0: float, x0: float, x_M: float,
                   k0: float | None = None, K0: float | None = None) -> "ActuatorGeometry":
        """Build a geometry from either ``k0`` or ``K0`` (the other is derived)."""
        unit = (L0**2 / n_L) * (d_c / 3 + D_s / 2)
        if k0 is None and K0 is None:
            raise ValueError("one of k0, K0 is required")
        if k0 is None:
            k0 = K0 / unit
        elif K0 is None:
            K0 = k0 * unit
        return cls(L0=L0, n_L=n_L, D_s=D_s, d_c=d_c, k0=k0, K0=K0,
                   V0=V0, x0=x0, x_M=x_M)

    def position_bounds(self, margin: float = DEFAULT_DOMAIN_MARGIN) -> tuple[float, float]:
        """Open interval of admissible payload positions, shrunk by ``margin``."""
        return (-self.x0 + margin, self.x_M - self.x0 - margin)


@dataclass(frozen=True)
class FluidParams:
    """Hydraulic fluid properties. All stored pressures are gauge."""

    Gamma0: float        # isothermal bulk modulus [Pa]
    rho: float           # density [kg/m^3]
    P_atm: float = 1e5   # atmospheric reference [Pa], metadata only

    def __post_init__(self) -> None:
        if self.Gamma0 <= 0 or self.rho < 0:
            raise ValueError("Gamma0 must be positive and rho nonnegative")


@dataclass(frozen=True)
class PlantParams:
    """Complete physical description of the antagonistic pair."""

    geometry: ActuatorGeometry
    fluid: FluidParams
    m: float   # payload mass [kg]
    R: float   # transmission damping [N*s/m]

    def __post_init__(self) -> None:
        if self.m <= 0 or self.R <= 0:
            raise ValueError("m and R must be positive")


@dataclass(frozen=True)
class PlantState:
    """State vector (position, momentum, gauge pressures)."""

    x: float
    p: float
    P1: float
    P2: float


class GeometryTerms(NamedTuple):
    """Volumes, volume gradients and curvatures at one position.

    A1 = dV1/dx < 0 and A2 = dV2/dx > 0 throughout the admissible range.
    """

    V1: float
    V2: float
    A1: float
    A2: float
    dA1: float
    dA2: float


def _check_contraction(u: float, actuator: int, margin: float) -> None:
    if u <= margin:
        raise DomainError(
            f"actuator {actuator} contraction {u:.3e} m is within {margin:.1e} m "
            "of the volume-model boundary"
        )


def _bellows_branch(u: float, geometry: ActuatorGeometry) -> tuple[float, float, float]:
    """Volume of one actuator and its first two derivatives w.r.t. contraction u."""
    L0 = geometry.L0
    K0 = geometry.K0
    s = math.sqrt(6.0 * u / L0)
    a = 2.0 / 3.0 - u / (2.0 * L0)
    V = K0 * a * s + geometry.V0
    d1 = K0 * (-s / (2.0 * L0) + 3.0 * a / (L0 * s))
    d2 = K0 * (-3.0 / (L0 * L0 * s) - 9.0 * a / (L0 * L0 * s**3))
    return V, d1, d2


def geometry_terms(x: float, geometry: ActuatorGeometry,
                   margin: float = DEFAULT_DOMAIN_MARGIN) -> GeometryTerms:
    """Evaluate both actuators' volumes, gradients and curvatures at position x."""
    u1 = geometry.x_M - x - geometry.x0
    u2 = x + geometry.x0
    _check_contraction(u1, 1, margin)
    _check_contraction(u2, 2, margin)
    V1, f1, g1 = _bellows_branch(u1, geometry)
    V2, f2, g2 = _bellows_branch(u2, geometry)
    # u1 decreases with x, so the chain rule flips the sign of odd derivatives.
    return GeometryTerms(V1=V1, V2=V2, A1=-f1, A2=f2, dA1=g1, dA2=g2)


def pouch_length(theta: float, geometry: ActuatorGeometry) -> float:
    """Actuator length as a function of the half central angle theta.

    Returns ``L0 * sin(theta) / theta`` with the analytic limit ``L0`` at
    ``theta = 0``.
    """
    if not 0.0 <= theta < math.pi:
        raise DomainError(f"half central angle {theta!r} outside [0, pi)")
    if theta == 0.0:
        return geometry.L0
    return geometry.L0 * math.sin(theta) / theta


def pouch_volume(theta: float, geometry: ActuatorGeometry) -> float:
    """Internal volume of one actuator as a function of the half central angle."""
    if not 0.0 <= theta < math.pi:
        raise DomainError(f"half central angle {theta!r} outside [0, pi)")
    if theta == 0.0:
        return 0.0
    return geometry.K0 * (theta - math.cos(theta) * math.sin(theta)) / theta**2


def volumes(x: float, geometry: ActuatorGeometry,
            margin: float = DEFAULT_DOMAIN_MARGIN) -> tuple[float, float]:
    """Fluid volumes (V1, V2) of the pair at payload position x."""
    g = geometry_terms(x, geometry, margin)
    return g.V1, g.V2


def volume_gradients(x: float, geometry: ActuatorGeometry,
                     margin: float = DEFAULT_DOMAIN_MARGIN) -> tuple[float, float]:
    """Volume gradients (A1, A2) = (dV1/dx, dV2/dx) at payload position x."""
    g = geometry_terms(x, geometry, margin)
    return g.A1, g.A2


def volume_curvatures(x: float, geometry: ActuatorGeometry,
                      margin: float = DEFAULT_DOMAIN_MARGIN) -> tuple[float, float]:
    """Second derivatives (dA1/dx, dA2/dx) of the volumes at position x."""
    g = geometry_terms(x, geometry, margin)
    return g.dA1, g.dA2


def total_mass(x: float, params: PlantParams,
               margin: float = DEFAULT_DOMAIN_MARGIN) -> float:
    """Total moving mass: payload plus the fluid contained in both actuators."""
    V1, V2 = volumes(x, params.geometry, margin)
    return params.m + (V1 + V2) * params.fluid.rho


def pressure_potential(P: float, fluid: FluidParams) -> float:
    """Specific internal-energy density phi(P) = -P + Gamma0*(exp(P/Gamma0) - 1).

    Convex with minimum 0 at P = 0; evaluated with expm1 because the two terms
    cancel to second order for gauge pressures far below the bulk modulus.
    """
    return -P + fluid.Gamma0 * math.expm1(P / fluid.Gamma0)


def fluid_energy(P: float, V: float, fluid: FluidParams) -> float:
    """Internal energy of a volume V of fluid pressurized to gauge pressure P."""
    return pressure_potential(P, fluid) * V


def hamiltonian(state: PlantState, params: PlantParams,
                margin: float = DEFAULT_DOMAIN_MARGIN) -> float:
    """Total mechanical energy: kinetic plus fluid internal energy."""
    g = geometry_terms(state.x, params.geometry, margin)
    M = params.m + (g.V1 + g.V2) * params.fluid.rho
    return (state.p**2 / (2.0 * M)
            + fluid_energy(state.P1, g.V1, params.fluid)
            + fluid_energy(state.P2, g.V2, params.fluid))


def hamiltonian_gradient(state: PlantState, params: PlantParams,
                         margin: float = DEFAULT_DOMAIN_MARGIN
                         ) -> tuple[float, float, float, float]:
    """Gradient of the Hamiltonian: (dH/dx, dH/dp, dH/dP1, dH/dP2)."""
    g = geometry_terms(state.x, params.geometry, margin)
    fluid = params.fluid
    rho = fluid.rho
    M = params.m + (g.V1 + g.V2) * rho
    dH_x = (-state.p**2 * rho * (g.A1 + g.A2) / (2.0 * M * M)
            + pressure_potential(state.P1, fluid) * g.A1
            + pressure_potential(state.P2, fluid) * g.A2)
    dH_p = state.p / M
    dH_P1 = g.V1 * math.expm1(state.P1 / fluid.Gamma0)
    dH_P2 = g.V2 * math.expm1(state.P2 / fluid.Gamma0)
    return dH_x, dH_p, dH_P1, dH_P2


def generalized_force(state: PlantState, params: PlantParams,
                      margin: float = DEFAULT_DOMAIN_MARGIN) -> float:
    """Net momentum rate excluding the external force.

    Equals ``-dH/dx - R*dH/dp + (Gamma0*A1/V1)*dH/dP1 + (Gamma0*A2/V2)*dH/dP2``
    in the exactly simplified form ``p^2*rho*(A1+A2)/(2*M^2) + A1*P1 + A2*P2
    - R*p/M``, which avoids evaluating the exponential pressure terms. This is
    the measurable quantity the force observer integrates.
    """
    g = geometry_terms(state.x, params.geometry, margin)
    rho = params.fluid.rho
    M = params.m + (g.V1 + g.V2) * rho
    return (state.p**2 * rho * (g.A1 + g.A2) / (2.0 * M * M)
            + g.A1 * state.P1 + g.A2 * state.P2
            - params.R * state.p / M)


def open_loop_field(state: PlantState, U1: float, U2: float, F: float,
                    params: PlantParams,
                    margin: float = DEFAULT_DOMAIN_MARGIN
                    ) -> tuple[float, float, float, float]:
    """Open-loop state derivative (dx, dp, dP1, dP2) under flows (U1, U2) and force F."""
    g = geometry_terms(state.x, params.geometry, margin)
    fluid = params.fluid
    Gamma0 = fluid.Gamma0
    dH_x, dH_p, dH_P1, dH_P2 = hamiltonian_gradient(state, params, margin)
    Gamma01 = Gamma0 * g.A1 / g.V1
    Gamma02 = Gamma0 * g.A2 / g.V2
    dx = dH_p
    dp = -dH_x - params.R * dH_p + Gamma01 * dH_P1 + Gamma02 * dH_P2 - F
    dP1 = Gamma0 * (U1 - g.A1 * dx) / g.V1
    dP2 = Gamma0 * (U2 - g.A2 * dx) / g.V2
    return dx, dp, dP1, dP2


def with_position(state: PlantState, x: float) -> PlantState:
    """Copy of ``state`` at a different position (finite-difference helper)."""
    return replace(state, x=x)
