"""Constitutive laws for barotropic network flows.

The state per edge is (rho, m): density and mass flux per unit area.
The energy density in (rho, v) variables is ``rho*v**2/2 + P(rho)``
with a pressure potential P tied to the pressure law by
``P''(rho) = p'(rho)/rho``. Its convex conjugate with respect to the
velocity,

    g(rho, m) = m**2/(2*rho) - P(rho),

drives all nonlinear terms of the discrete scheme: the velocity is
``d g/d m = m/rho`` and the (negative) effort is
``d g/d rho = -(P'(rho) + m**2/(2*rho**2))``.

All functions are vectorized over numpy arrays and free of state;
law objects are immutable and thread-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SchemaError


class IsentropicLaw:
    """Quadratic pressure law p(rho) = c*rho**2 with potential P = c*rho**2."""

    kind = "isentropic"

    def __init__(self, c: float):
        if not c > 0:
            raise SchemaError("isentropic law requires c > 0")
        self.c = float(c)

    def p(self, rho):
        return self.c * rho**2

    def p_prime(self, rho):
        return 2.0 * self.c * rho

    def P(self, rho):
        return self.c * rho**2

    def P_prime(self, rho):
        return 2.0 * self.c * rho

    def P_second(self, rho):
        return 2.0 * self.c * np.ones_like(np.asarray(rho, dtype=float))

    def rho_bounds(self) -> tuple[float, float]:
        return (0.0, math.inf)

    # typical admissible states, used for randomized checks
    sampling_box = ((0.5, 3.5), (-3.0, 3.0))

    def to_dict(self) -> dict:
        return {"type": "isentropic", "c": self.c}


class IsothermalAlphaLaw:
    """Isothermal pressure law with a compressibility correction.

    p(rho) = R*T*rho / (1 - R*T*alpha*rho); the matching potential with
    P'' = p'/rho is P(rho) = R*T*rho*log(rho / ((1 - R*T*alpha*rho)*rho_star)).
    For alpha > 0 the density must stay below 1/(R*T*alpha); for
    alpha <= 0 only a positive floor (rho_min_factor*rho_star) applies.
    """

    kind = "isothermal_alpha"

    def __init__(self, R: float, T: float, alpha: float, rho_star: float = 1.0,
                 rho_min_factor: float = 1e-6):
        if not (R > 0 and T > 0 and rho_star > 0):
            raise SchemaError("isothermal law requires R, T, rho_star > 0")
        self.R = float(R)
        self.T = float(T)
        self.alpha = float(alpha)
        self.rho_star = float(rho_star)
        self.rho_min_factor = float(rho_min_factor)
        self._rt = self.R * self.T
        self._beta = self._rt * self.alpha

    def _s(self, rho):
        # 1 - R*T*alpha*rho, positive on the admissible interval
        return 1.0 - self._beta * rho

    def p(self, rho):
        return self._rt * rho / self._s(rho)

    def p_prime(self, rho):
        return self._rt / self._s(rho) ** 2

    def P(self, rho):
        return self._rt * rho * np.log(rho / (self._s(rho) * self.rho_star))

    def P_prime(self, rho):
        return self._rt * (np.log(rho / (self._s(rho) * self.rho_star)) + 1.0 / self._s(rho))

    def P_second(self, rho):
        s = self._s(rho)
        return self._rt * (1.0 / rho + self._beta / s + self._beta / s**2)

    def rho_bounds(self) -> tuple[float, float]:
        lo = self.rho_min_factor * self.rho_star
        hi = 1.0 / self._beta if self._beta > 0 else math.inf
        return (lo, hi)

    @property
    def sampling_box(self):
        return ((30.0 * self.rho_star, 70.0 * self.rho_star), (-600.0, 600.0))

    def to_dict(self) -> dict:
        return {
            "type": "isothermal_alpha",
            "R": self.R,
            "T": self.T,
            "alpha": self.alpha,
            "rho_star": self.rho_star,
        }


def pressure_law_from_dict(data: dict):
    try:
        kind = data["type"]
    except (KeyError, TypeError):
        raise SchemaError("pressure law: missing 'type'") from None
    if kind == "isentropic":
        return IsentropicLaw(c=float(data["c"]))
    if kind == "isothermal_alpha":
        return IsothermalAlphaLaw(
            R=float(data["R"]),
            T=float(data["T"]),
            alpha=float(data["alpha"]),
            rho_star=float(data.get("rho_star", 1.0)),
        )
    raise SchemaError(f"unknown pressure law type {kind!r}")


@dataclass(frozen=True)
class ConstitutiveLaw:
    """Pressure law plus friction factor; the full edgewise physics.

    ``lam`` is the dimensionless friction factor (0 disables friction).
    The admissible density interval comes from the pressure law.
    """

    pressure: IsentropicLaw | IsothermalAlphaLaw
    lam: float = 0.0

    def __post_init__(self):
        if self.lam < 0:
            raise SchemaError("friction factor must be nonnegative")
        lo, hi = self.pressure.rho_bounds()
        object.__setattr__(self, "rho_min", lo)
        object.__setattr__(self, "rho_max", hi)

    # -- admissibility ---------------------------------------------------

    def admissible(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        return (rho > self.rho_min) & (rho < self.rho_max)

    def require_admissible(self, rho, context: str = "state"):
        ok = self.admissible(rho)
        if not np.all(ok):
            bad = np.atleast_1d(np.asarray(rho, dtype=float))[~np.atleast_1d(ok)]
            raise DomainError(
                f"{context}: density {bad.flat[0]:.6g} outside admissible interval "
                f"({self.rho_min:.6g}, {self.rho_max:.6g})"
            )

    # -- conjugate energy density and derivatives -------------------------

    def g(self, rho, m):
        """Velocity-conjugate of the energy density at (rho, m)."""
        self.require_admissible(rho, "g")
        rho = np.asarray(rho, dtype=float)
        m = np.asarray(m, dtype=float)
        return m**2 / (2.0 * rho) - self.pressure.P(rho)

    def grad_g(self, rho, m):
        """Partial derivatives (d/d rho, d/d m) of g."""
        self.require_admissible(rho, "grad_g")
        rho = np.asarray(rho, dtype=float)
        m = np.asarray(m, dtype=float)
        d_rho = -(self.pressure.P_prime(rho) + m**2 / (2.0 * rho**2))
        d_m = m / rho
        return d_rho, d_m

    def z_hat(self, rho, m):
        """Mixed (rho, m) to energy (rho, v) variables."""
        self.require_admissible(rho, "z_hat")
        rho = np.asarray(rho, dtype=float)
        return rho, np.asarray(m, dtype=float) / rho

    def a_hat(self, rho, v):
        """Energy (rho, v) back to mixed (rho, m) variables; inverse of z_hat."""
        self.require_admissible(rho, "a_hat")
        rho = np.asarray(rho, dtype=float)
        return rho, rho * np.asarray(v, dtype=float)

    def h(self, rho, v):
        """Energy density in (rho, v) variables."""
        self.require_admissible(rho, "h")
        rho = np.asarray(rho, dtype=float)
        v = np.asarray(v, dtype=float)
        return rho * v**2 / 2.0 + self.pressure.P(rho)

    def hamiltonian_density(self, rho, m):
        """Energy density in mixed variables: m**2/(2*rho) + P(rho)."""
        self.require_admissible(rho, "hamiltonian_density")
        rho = np.asarray(rho, dtype=float)
        m = np.asarray(m, dtype=float)
        return m**2 / (2.0 * rho) + self.pressure.P(rho)

    def effort(self, rho, m):
        """Boundary effort P'(rho) + m**2/(2*rho**2) = -d g/d rho."""
        d_rho, _ = self.grad_g(rho, m)
        return -d_rho

    # -- friction ---------------------------------------------------------

    def friction(self, rho, m, diameter):
        """Friction coefficient lam*|m| / (2*D*rho**2), nonnegative.

        The assembled damping term is friction(rho, m, D) * m, which is
        C1 in m; Jacobians use d(r*m)/dm = 2*r with sign(0) = 0.
        """
        if self.lam == 0.0:
            return np.zeros_like(np.asarray(m, dtype=float))
        self.require_admissible(rho, "friction")
        rho = np.asarray(rho, dtype=float)
        m = np.asarray(m, dtype=float)
        return self.lam * np.abs(m) / (2.0 * np.asarray(diameter, dtype=float) * rho**2)

    # -- diagnostics --------------------------------------------------------

    def spd_margin(self, rho, m):
        """Determinant margin rho*P''(rho) - v**2 of the energy Hessian.

        Positive values mean the Hessian of h is positive definite at the
        state (the flow is locally subsonic); nonpositive values flag a
        violation of the convexity assumption.
        """
        self.require_admissible(rho, "spd_margin")
        rho = np.asarray(rho, dtype=float)
        v = np.asarray(m, dtype=float) / rho
        return rho * self.pressure.P_second(rho) - v**2

    def to_dict(self) -> dict:
        return {"pressure": self.pressure.to_dict(), "lambda": self.lam}


def law_from_dict(data: dict) -> ConstitutiveLaw:
    try:
        pressure = pressure_law_from_dict(data["pressure"])
    except (KeyError, TypeError):
        raise SchemaError("law: missing 'pressure' object") from None
    return ConstitutiveLaw(pressure=pressure, lam=float(data.get("lambda", 0.0)))
