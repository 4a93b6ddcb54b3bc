"""Assembly of the structured operators and quadrature-reduced nonlinear forms.

Static matrices (both mass matrices, the convection block and the trace
map) are integrated exactly; only the nonlinear forms and functionals
(velocity projection, convective flux, friction, energy) honor the
configurable per-element Gauss rule. All Gauss weights are positive, so
the assembled friction operator is symmetric positive semidefinite by
construction.

Per-element basis values at the quadrature points are cached at build
time; nonlinear evaluations take the state by value and are safe to run
concurrently on shared operator objects.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .constitutive import ConstitutiveLaw
from .errors import BuildError, StateError
from .femspace import SpacePair, derivative_matrix, trace_map
from .network import NetworkTopology

__all__ = [
    "QuadratureRule",
    "DiscreteOperators",
    "assemble_static",
    "n2_vec",
    "jacobian_n2",
    "c1_vec",
    "jacobian_c1",
    "R_apply",
    "friction_vec",
    "jacobian_friction",
    "assemble_R_dense",
    "G_and_H",
    "to_standard_ph_coordinates",
    "quadrature_report",
]


class QuadratureRule:
    """Realized per-element Gauss rule over the whole network.

    Holds global point coordinates, positive weights scaled by element
    size and edge area, the owning edge/element of every point and the
    cached basis value matrices.
    """

    def __init__(self, sp: SpacePair, points_per_element: int):
        if points_per_element < 1:
            raise BuildError("quadrature needs at least one point per element")
        self.points_per_element = points_per_element
        xi, wref = np.polynomial.legendre.leggauss(points_per_element)
        self.ref_points = xi
        self.ref_weights = wref

        v1ref = sp.v1_reference_values(xi)          # (npts, q+1)
        v2ref = sp.v2_reference_values(xi)          # (npts, deg+1)
        dv2ref = sp.v2_reference_derivatives(xi)    # reference derivative

        m1 = sp.q + 1
        m2 = sp.v2_degree
        npts = points_per_element
        xs, ws, edge_ids, diams = [], [], [], []
        r1, c1_, v1 = [], [], []
        r2, c2, v2 = [], [], []
        dv2 = []
        base = 0
        for e in sp.edges:
            j = sp.partition.counts[e.id]
            h = sp.partition.h(e.id)
            k = np.arange(j)
            # point coordinates and weights on this edge
            x_loc = (k[:, None] * h + (xi[None, :] + 1.0) * h / 2.0).ravel()
            xs.append(x_loc)
            ws.append(np.tile(wref * h / 2.0 * e.area, j))
            edge_ids.extend([e.id] * (j * npts))
            diams.append(np.full(j * npts, e.diameter if e.diameter else np.nan))
            rows = base + np.arange(j * npts)
            # density basis entries
            for jm in range(m1):
                r1.append(rows)
                c1_.append(np.repeat(sp.v1_offset[e.id] + k * m1 + jm, npts))
                v1.append(np.tile(v1ref[:, jm], j))
            # flux basis entries (values and x-derivatives)
            for l in range(m2 + 1):
                r2.append(rows)
                c2.append(np.repeat(sp.v2_full_offset[e.id] + k * m2 + l, npts))
                v2.append(np.tile(v2ref[:, l], j))
                dv2.append(np.tile(dv2ref[:, l] * 2.0 / h, j))
            base += j * npts

        self.n_points = base
        self.x = np.concatenate(xs)
        self.w = np.concatenate(ws)
        self.edge_ids = edge_ids
        self.diameters = np.concatenate(diams)
        if np.any(self.w <= 0):
            raise BuildError("quadrature weights must be positive")

        shape1 = (base, sp.n1)
        shape2 = (base, sp.n2_full)
        self.phi1 = sparse.csr_matrix(
            (np.concatenate(v1), (np.concatenate(r1), np.concatenate(c1_))), shape=shape1
        )
        phi2_full = sparse.csr_matrix(
            (np.concatenate(v2), (np.concatenate(r2), np.concatenate(c2))), shape=shape2
        )
        dphi2_full = sparse.csr_matrix(
            (np.concatenate(dv2), (np.concatenate(r2), np.concatenate(c2))), shape=shape2
        )
        self.phi2 = (phi2_full @ sp.E).tocsr()
        self.dphi2 = (dphi2_full @ sp.E).tocsr()

    def point_label(self, i: int) -> str:
        return f"edge {self.edge_ids[i]!r}, x={self.x[i]:.6g}"


class DiscreteOperators:
    """Static matrices plus the quadrature cache and the physics handle."""

    def __init__(self, sp, topology, law, m1_diag, m2, j_mat, k2, d_mat, mass_vec, quad):
        self.sp = sp
        self.topology = topology
        self.law = law
        self.M1_diag = m1_diag
        self.M2 = m2
        self.J = j_mat
        self.K2 = k2
        self.D = d_mat
        self.mass_vec = mass_vec          # exact integral of each density basis function
        self.quad = quad
        self._m2_solve = spla.factorized(m2.tocsc())

    @property
    def n1(self):
        return self.sp.n1

    @property
    def n2(self):
        return self.sp.n2

    @property
    def n_ports(self):
        return len(self.topology.boundary_nodes)

    def total_mass(self, a1: np.ndarray) -> float:
        """Exact area-weighted integral of the density field."""
        return float(self.mass_vec @ a1)

    def solve_m2(self, rhs: np.ndarray) -> np.ndarray:
        return self._m2_solve(rhs)

    def point_states(self, a1: np.ndarray, a2: np.ndarray, context: str):
        """Density and flux at the quadrature points, with admissibility check."""
        rho = self.quad.phi1 @ a1
        ok = self.law.admissible(rho)
        if not np.all(ok):
            i = int(np.argmax(~ok))
            raise StateError(
                f"{context}: inadmissible density {rho[i]:.6g} at quadrature point "
                f"({self.quad.point_label(i)})"
            )
        return rho, self.quad.phi2 @ a2


def assemble_static(sp: SpacePair, topology: NetworkTopology, law: ConstitutiveLaw,
                    quadrature_points: int | None = None) -> DiscreteOperators:
    """Build the static operators and the reduced quadrature cache.

    The reduced rule defaults to q+2 points per element, the smallest
    Gauss rule whose restriction to the flux space is a norm; weaker
    rules are allowed but reported by ``quadrature_report``.
    """
    exact_pts = sp.v2_degree + 1          # integrates products of flux basis exactly
    exact = QuadratureRule(sp, exact_pts)

    # density mass matrix is diagonal for the Legendre basis
    m1 = sp.q + 1
    diag = np.zeros(sp.n1)
    mass_vec = np.zeros(sp.n1)
    for e in sp.edges:
        j = sp.partition.counts[e.id]
        h = sp.partition.h(e.id)
        off = sp.v1_offset[e.id]
        idx = off + np.arange(j * m1)
        modes = np.tile(np.arange(m1), j)
        diag[idx] = e.area * h / (2.0 * modes + 1.0)
        mass_vec[idx] = np.where(modes == 0, e.area * h, 0.0)

    w = sparse.diags(exact.w)
    m2 = (exact.phi2.T @ w @ exact.phi2).tocsr()
    j_mat = (-(exact.phi1.T @ w @ exact.dphi2)).tocsr()
    k2 = trace_map(sp)
    d_mat = derivative_matrix(sp)

    # cross-check the two constructions of the convection block
    resid = abs(j_mat + sparse.diags(diag) @ d_mat).max()
    scale = max(abs(j_mat).max(), 1.0)
    if resid > 1e-12 * scale:
        raise BuildError(f"convection block inconsistent with derivative map ({resid:.3g})")

    npts = quadrature_points if quadrature_points is not None else sp.q + 2
    quad = exact if npts == exact_pts else QuadratureRule(sp, npts)

    return DiscreteOperators(sp, topology, law, diag, m2, j_mat, k2, d_mat, mass_vec, quad)


# -- nonlinear forms -----------------------------------------------------------


def n2_vec(ops: DiscreteOperators, a1: np.ndarray, a2: np.ndarray) -> np.ndarray:
    """Quadrature projection of the velocity m/rho onto the flux test space."""
    rho, m = ops.point_states(a1, a2, "n2_vec")
    return ops.quad.phi2.T @ (ops.quad.w * m / rho)

def jacobian_n2(ops, a1, a2):
    rho, m = ops.point_states(a1, a2, "jacobian_n2")
    w = ops.quad.w
    d_a1 = ops.quad.phi2.T @ sparse.diags(-w * m / rho**2) @ ops.quad.phi1
    d_a2 = ops.quad.phi2.T @ sparse.diags(w / rho) @ ops.quad.phi2
    return d_a1.tocsr(), d_a2.tocsr()


def c1_vec(ops: DiscreteOperators, a1: np.ndarray, a2: np.ndarray) -> np.ndarray:
    """Convective flux term: P'(rho) + m^2/(2 rho^2) against flux test derivatives."""
    rho, m = ops.point_states(a1, a2, "c1_vec")
    integrand = ops.law.pressure.P_prime(rho) + m**2 / (2.0 * rho**2)
    return ops.quad.dphi2.T @ (ops.quad.w * integrand)

def jacobian_c1(ops, a1, a2):
    rho, m = ops.point_states(a1, a2, "jacobian_c1")
    w = ops.quad.w
    d_a1 = ops.quad.dphi2.T @ sparse.diags(
        w * (ops.law.pressure.P_second(rho) - m**2 / rho**3)
    ) @ ops.quad.phi1
    d_a2 = ops.quad.dphi2.T @ sparse.diags(w * m / rho**2) @ ops.quad.phi2
    return d_a1.tocsr(), d_a2.tocsr()


def _friction_coeff(ops, rho, m):
    if ops.law.lam == 0.0:
        return np.zeros_like(m)
    d = ops.quad.diameters
    if np.any(np.isnan(d)):
        raise StateError("friction requires a diameter on every edge")
    return ops.law.lam * np.abs(m) / (2.0 * d * rho**2)


def friction_vec(ops: DiscreteOperators, a1: np.ndarray, a2: np.ndarray) -> np.ndarray:
    """Damping term R(a) a2, assembled matrix-free."""
    rho, m = ops.point_states(a1, a2, "friction_vec")
    r = _friction_coeff(ops, rho, m)
    return ops.quad.phi2.T @ (ops.quad.w * r * m)


def R_apply(ops: DiscreteOperators, a1: np.ndarray, a2: np.ndarray,
            w_vec: np.ndarray) -> np.ndarray:
    """Apply the state-dependent damping operator R(a) to a flux vector."""
    rho, m = ops.point_states(a1, a2, "R_apply")
    r = _friction_coeff(ops, rho, m)
    return ops.quad.phi2.T @ (ops.quad.w * r * (ops.quad.phi2 @ w_vec))

def jacobian_friction(ops, a1, a2):
    """Derivatives of the damping term R(a) a2; uses d(|m| m)/dm = 2|m|."""
    rho, m = ops.point_states(a1, a2, "jacobian_friction")
    w = ops.quad.w
    r = _friction_coeff(ops, rho, m)
    d_a1 = ops.quad.phi2.T @ sparse.diags(-2.0 * w * r * m / rho) @ ops.quad.phi1
    d_a2 = ops.quad.phi2.T @ sparse.diags(2.0 * w * r) @ ops.quad.phi2
    return d_a1.tocsr(), d_a2.tocsr()


def assemble_R_dense(ops: DiscreteOperators, a1: np.ndarray, a2: np.ndarray) -> np.ndarray:
    """Dense damping matrix, testing path for the matrix-free product."""
    rho, m = ops.point_states(a1, a2, "assemble_R_dense")
    r = _friction_coeff(ops, rho, m)
    return (ops.quad.phi2.T @ sparse.diags(ops.quad.w * r) @ ops.quad.phi2).toarray()


def G_and_H(ops: DiscreteOperators, a1: np.ndarray, a2: np.ndarray) -> tuple[float, float]:
    """Quadrature values of the conjugate functional and the energy."""
    rho, m = ops.point_states(a1, a2, "G_and_H")
    kinetic = m**2 / (2.0 * rho)
    potential = ops.law.pressure.P(rho)
    g_val = float(ops.quad.w @ (kinetic - potential))
    h_val = float(ops.quad.w @ (kinetic + potential))
    return g_val, h_val


def to_standard_ph_coordinates(ops: DiscreteOperators, a1: np.ndarray,
                               a2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map mixed coefficients to (density, mass-weighted velocity) coordinates."""
    return a1.copy(), ops.solve_m2(n2_vec(ops, a1, a2))


def quadrature_report(ops: DiscreteOperators) -> dict:
    """Health report of the reduced rule on the discrete spaces.

    Positive definiteness of the reduced Gram matrices is the computable
    necessary condition for the reduced product to be a norm; the
    basis-wise ratio of reduced to exact norms is a spot check of the
    norm equivalence. The report never enforces thresholds.
    """
    w = sparse.diags(ops.quad.w)
    g1 = (ops.quad.phi1.T @ w @ ops.quad.phi1).toarray()
    g2 = (ops.quad.phi2.T @ w @ ops.quad.phi2).toarray()
    out = {}
    for name, g in (("v1", g1), ("v2", g2)):
        try:
            np.linalg.cholesky(g)
            spd = True
        except np.linalg.LinAlgError:
            spd = False
        out[f"{name}_gram_spd"] = spd
        out[f"{name}_gram_cond"] = float(np.linalg.cond(g))
    ratios = np.sqrt(np.maximum(np.diag(g2), 0.0) / ops.M2.diagonal())
    out["v2_norm_ratio_range"] = (float(ratios.min()), float(ratios.max()))
    return out
