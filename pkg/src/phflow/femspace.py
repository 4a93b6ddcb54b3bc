"""Compatible discrete spaces on a meshed network.

Two spaces are built on a per-edge uniform partition:

* a density space of elementwise Legendre polynomials of degree q
  (discontinuous across element and edge boundaries), and
* a flux space of edgewise-continuous nodal polynomials of degree q+1
  whose endpoint traces satisfy the signed-area junction condition
  ``sum_over_adjacent_edges incidence * trace = 0`` at every interior
  node.

The junction condition removes one degree of freedom per interior node.
It is eliminated by a sparse null-space embedding E that maps reduced
coefficients to the unconstrained per-edge nodal coefficients, so all
downstream operators act on unconstrained vectors.

Space objects are immutable after construction; evaluation and matrix
queries are safe for concurrent reads.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sparse

from .errors import BuildError, SchemaError
from .network import NetworkTopology

__all__ = [
    "Partition",
    "SpacePair",
    "build_space_pair",
    "derivative_matrix",
    "trace_map",
    "evaluate",
    "check_compatibility",
]


# -- reference-element helpers ------------------------------------------------


def gauss_lobatto_nodes(n: int) -> np.ndarray:
    """n Gauss-Lobatto nodes on [-1, 1], endpoints included (n >= 2)."""
    if n < 2:
        raise BuildError("Gauss-Lobatto rule needs at least 2 nodes")
    if n == 2:
        return np.array([-1.0, 1.0])
    # interior nodes are the roots of P'_{n-1}
    coeffs = np.zeros(n)
    coeffs[-1] = 1.0
    interior = np.polynomial.legendre.legroots(np.polynomial.legendre.legder(coeffs))
    return np.concatenate(([-1.0], np.sort(interior), [1.0]))


def lagrange_coefficient_matrix(nodes: np.ndarray) -> np.ndarray:
    """Monomial coefficients of the Lagrange basis on the given nodes.

    Column j holds the coefficients of the basis polynomial that is 1 at
    nodes[j] and 0 at the others. Stable for the small degrees used here.
    """
    n = len(nodes)
    vander = np.polynomial.polynomial.polyvander(nodes, n - 1)
    return np.linalg.solve(vander, np.eye(n))


def legendre_values(x: np.ndarray, degree: int) -> np.ndarray:
    """Values of the Legendre polynomials P_0..P_degree at x, shape (len(x), degree+1)."""
    return np.polynomial.legendre.legvander(np.asarray(x, dtype=float), degree)


# -- partition ----------------------------------------------------------------


class Partition:
    """Per-edge uniform element subdivision."""

    def __init__(self, counts: dict[str, int], topology: NetworkTopology):
        self.counts = dict(counts)
        self.breakpoints = {}
        for e in topology.edges:
            j = self.counts.get(e.id)
            if j is None or j < 1:
                raise BuildError(f"edge {e.id!r}: invalid element count {j!r}")
            self.breakpoints[e.id] = np.linspace(0.0, e.length, j + 1)

    @classmethod
    def build(cls, topology: NetworkTopology, dx_max: float | None = None) -> "Partition":
        """Resolve element counts from a size cap or the per-edge values.

        A given ``dx_max`` wins over per-edge counts stored on the edges;
        without a cap every edge must carry its own count.
        """
        counts = {}
        for e in topology.edges:
            if dx_max is not None:
                if not dx_max > 0:
                    raise BuildError("dx_max must be positive")
                counts[e.id] = max(1, int(np.ceil(e.length / dx_max - 1e-12)))
            elif e.num_elements is not None:
                counts[e.id] = e.num_elements
            else:
                raise BuildError(
                    f"edge {e.id!r}: no num_elements and no dx_max cap given"
                )
        return cls(counts, topology)

    def h(self, edge_id: str) -> float:
        bp = self.breakpoints[edge_id]
        return float(bp[1] - bp[0])


# -- the compatible pair --------------------------------------------------------


class SpacePair:
    """Density/flux space pair with the junction constraint eliminated.

    Attributes of interest:

    n1, n2
        Dimensions of the density and (constrained) flux space.
    E
        Sparse (n2_full x n2) embedding of reduced flux coefficients into
        the unconstrained per-edge nodal coefficients.
    """

    def __init__(self, topology: NetworkTopology, partition: Partition, q: int,
                 v2_degree: int | None = None):
        if q < 0:
            raise BuildError("polynomial degree q must be >= 0")
        self.topology = topology
        self.partition = partition
        self.q = q
        self.v2_degree = q + 1 if v2_degree is None else v2_degree
        if self.v2_degree < 1:
            raise BuildError("flux space degree must be >= 1")
        self.edges = topology.sorted_edges()

        # reference data
        self.v2_nodes = gauss_lobatto_nodes(self.v2_degree + 1)
        self._lagrange_coeffs = lagrange_coefficient_matrix(self.v2_nodes)
        self._lagrange_dcoeffs = np.polynomial.polynomial.polyder(self._lagrange_coeffs, axis=0)

        # indexing
        m1 = q + 1                      # density modes per element
        m2 = self.v2_degree             # new flux nodes per element (shared endpoint)
        self.v1_offset = {}
        self.v2_full_offset = {}
        n1 = 0
        n2f = 0
        for e in self.edges:
            j = partition.counts[e.id]
            self.v1_offset[e.id] = n1
            self.v2_full_offset[e.id] = n2f
            n1 += j * m1
            n2f += j * m2 + 1
        self.n1 = n1
        self.n2_full = n2f

        self._build_embedding()
        self.n2 = self.E.shape[1]

    # -- reference basis evaluation ------------------------------------------

    def v1_reference_values(self, xi: np.ndarray) -> np.ndarray:
        return legendre_values(xi, self.q)

    def v2_reference_values(self, xi: np.ndarray) -> np.ndarray:
        return np.polynomial.polynomial.polyval(
            np.asarray(xi, dtype=float), self._lagrange_coeffs
        ).T

    def v2_reference_derivatives(self, xi: np.ndarray) -> np.ndarray:
        """d/d xi of the nodal basis on the reference element (no 2/h factor)."""
        return np.polynomial.polynomial.polyval(
            np.asarray(xi, dtype=float), self._lagrange_dcoeffs
        ).T

    # -- dof bookkeeping -------------------------------------------------------

    def endpoint_dof(self, edge_id: str, node_id: str) -> int:
        """Unconstrained flux dof of ``edge`` sitting at ``node``."""
        e = self.topology.edge(edge_id)
        off = self.v2_full_offset[edge_id]
        if node_id == e.tail:
            return off
        if node_id == e.head:
            return off + self.partition.counts[edge_id] * self.v2_degree
        raise SchemaError(f"node {node_id!r} not an endpoint of edge {edge_id!r}")

    def _build_embedding(self):
        """Null-space embedding of the junction constraints.

        At each interior node the endpoint coefficient of the lowest-id
        adjacent edge is expressed through the others:
        c_0 = -(1/w_0) * sum_i w_i c_i with w = signed area weights.
        Constraints at distinct nodes involve distinct dofs, so the
        elimination is purely local.
        """
        eliminated: dict[int, list[tuple[int, float]]] = {}
        self.constraint_rows = []  # (node, [(full dof, weight), ...]) for checks
        for node in sorted(self.topology.interior_nodes):
            adj = self.topology.adjacent_edges(node)
            if not adj:
                continue
            dofs = [(self.endpoint_dof(e.id, node), w) for e, w in adj]
            self.constraint_rows.append((node, dofs))
            d0, w0 = dofs[0]
            eliminated[d0] = [(d, -w / w0) for d, w in dofs[1:]]

        keep = [d for d in range(self.n2_full) if d not in eliminated]
        col_of = {d: j for j, d in enumerate(keep)}
        rows, cols, vals = [], [], []
        for d in keep:
            rows.append(d)
            cols.append(col_of[d])
            vals.append(1.0)
        for d0, terms in eliminated.items():
            for d, w in terms:
                rows.append(d0)
                cols.append(col_of[d])
                vals.append(w)
        self.E = sparse.csr_matrix(
            (vals, (rows, cols)), shape=(self.n2_full, len(keep))
        )
        self.kept_dofs = np.array(keep, dtype=int)
        self.eliminated = eliminated

    def constraint_matrix(self) -> sparse.csr_matrix:
        """Junction conditions as rows over unconstrained flux dofs."""
        rows, cols, vals = [], [], []
        for i, (_, dofs) in enumerate(self.constraint_rows):
            for d, w in dofs:
                rows.append(i)
                cols.append(d)
                vals.append(w)
        return sparse.csr_matrix(
            (vals, (rows, cols)), shape=(len(self.constraint_rows), self.n2_full)
        )

    # -- field evaluation -------------------------------------------------------

    def locate(self, edge_id: str, x: np.ndarray):
        """Element indices and reference coordinates for points on an edge."""
        e = self.topology.edge(edge_id)
        x = np.asarray(x, dtype=float)
        if np.any(x < -1e-12) or np.any(x > e.length * (1 + 1e-12)):
            raise SchemaError(f"point off edge {edge_id!r} of length {e.length}")
        j = self.partition.counts[edge_id]
        h = self.partition.h(edge_id)
        k = np.clip((x / h).astype(int), 0, j - 1)
        xi = 2.0 * (x - k * h) / h - 1.0
        return k, np.clip(xi, -1.0, 1.0)

    def eval_density(self, a1: np.ndarray, edge_id: str, x: np.ndarray) -> np.ndarray:
        k, xi = self.locate(edge_id, x)
        vals = self.v1_reference_values(xi)
        m1 = self.q + 1
        off = self.v1_offset[edge_id]
        out = np.zeros(len(np.atleast_1d(xi)))
        for jmode in range(m1):
            out += vals[:, jmode] * a1[off + k * m1 + jmode]
        return out

    def eval_flux(self, a2: np.ndarray, edge_id: str, x: np.ndarray,
                  a2_full: np.ndarray | None = None) -> np.ndarray:
        if a2_full is None:
            a2_full = self.E @ a2
        k, xi = self.locate(edge_id, x)
        vals = self.v2_reference_values(xi)
        m2 = self.v2_degree
        off = self.v2_full_offset[edge_id]
        out = np.zeros(len(np.atleast_1d(xi)))
        for l in range(m2 + 1):
            out += vals[:, l] * a2_full[off + k * m2 + l]
        return out

    def flux_node_values(self, a2: np.ndarray) -> np.ndarray:
        """Unconstrained nodal values of a flux field (embedding applied)."""
        return self.E @ a2


def build_space_pair(topology: NetworkTopology, partition: Partition, q: int) -> SpacePair:
    """Construct the compatible degree-(q, q+1) pair on the meshed network."""
    violations = topology.validate()
    if violations:
        raise BuildError("invalid topology: " + "; ".join(violations))
    return SpacePair(topology, partition, q)


# -- derived linear maps ---------------------------------------------------------


def derivative_matrix(sp: SpacePair) -> sparse.csr_matrix:
    """Coefficient matrix of the broken derivative, flux space to density space.

    For flux coefficients c, D @ c are the density-space coefficients of
    the elementwise derivative. Built by exact Legendre projection of the
    reference nodal basis derivatives.
    """
    q = sp.q
    npts = max(q + 1, 1)
    xi, wref = np.polynomial.legendre.leggauss(npts)
    pvals = sp.v1_reference_values(xi)                    # (npts, q+1)
    dvals = sp.v2_reference_derivatives(xi)               # (npts, deg+1)
    # c[j, l] = (2j+1)/2 * integral P_j * L_l' on [-1, 1]; exact for the degrees here
    scale = (2.0 * np.arange(q + 1) + 1.0) / 2.0
    local = scale[:, None] * (pvals.T @ (wref[:, None] * dvals))

    m1 = q + 1
    m2 = sp.v2_degree
    rows, cols, vals = [], [], []
    for e in sp.edges:
        j = sp.partition.counts[e.id]
        h = sp.partition.h(e.id)
        block = (2.0 / h) * local
        k = np.arange(j)
        r0 = sp.v1_offset[e.id] + k * m1
        c0 = sp.v2_full_offset[e.id] + k * m2
        for jm in range(m1):
            for l in range(m2 + 1):
                rows.append(r0 + jm)
                cols.append(c0 + l)
                vals.append(np.full(j, block[jm, l]))
    dt = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(sp.n1, sp.n2_full),
    )
    return (dt @ sp.E).tocsr()


def trace_map(sp: SpacePair) -> sparse.csr_matrix:
    """Boundary trace matrix K2 of shape (n2, p).

    Entry (j, i) is the signed-area-weighted value of the j-th flux basis
    function at boundary node i; ports are numbered by the topology's
    boundary node order.
    """
    bnodes = sp.topology.boundary_nodes
    rows, cols, vals = [], [], []
    for i, node in enumerate(bnodes):
        adj = sp.topology.adjacent_edges(node)
        if len(adj) != 1:
            raise BuildError(f"boundary node {node!r} must have exactly one edge")
        edge, weight = adj[0]
        rows.append(sp.endpoint_dof(edge.id, node))
        cols.append(i)
        vals.append(weight)
    kt = sparse.csr_matrix((vals, (rows, cols)), shape=(sp.n2_full, len(bnodes)))
    return (sp.E.T @ kt).tocsr()


def evaluate(sp: SpacePair, a, points) -> np.ndarray:
    """Evaluate the coefficient pair a = (a1, a2) at (edge, x) points.

    Returns an array of shape (len(points), 2) with columns (rho, m).
    """
    a1, a2 = a
    a2_full = sp.E @ a2
    out = np.zeros((len(points), 2))
    for i, (edge_id, x) in enumerate(points):
        xs = np.array([float(x)])
        out[i, 0] = sp.eval_density(a1, edge_id, xs)[0]
        out[i, 1] = sp.eval_flux(a2, edge_id, xs, a2_full=a2_full)[0]
    return out


# -- compatibility checks ----------------------------------------------------------


def _constant_kernel_basis(sp: SpacePair) -> np.ndarray:
    """Edgewise-constant assignments compatible with the junction conditions.

    Returns a (n_edges, dim) array of per-edge constants spanning the
    kernel of the broken derivative inside the constrained flux space.
    """
    n_e = len(sp.edges)
    idx = {e.id: i for i, e in enumerate(sp.edges)}
    interior = sorted(sp.topology.interior_nodes)
    if not interior:
        return np.eye(n_e)
    w = np.zeros((len(interior), n_e))
    for r, node in enumerate(interior):
        for e, weight in sp.topology.adjacent_edges(node):
            w[r, idx[e.id]] += weight
    # orthonormal basis of the null space
    _, s, vt = np.linalg.svd(w)
    tol = max(w.shape) * np.finfo(float).eps * (s[0] if len(s) else 1.0)
    rank = int(np.sum(s > tol))
    return vt[rank:].T


def check_compatibility(sp: SpacePair) -> dict:
    """Verify the two structural conditions of the space pair.

    Condition one: the broken derivative maps the flux space onto the full
    density space (rank test). Condition two: every junction-compatible
    edgewise-constant field is represented exactly in the flux space.
    Returns a report dict with boolean flags and the measured quantities.
    """
    d = derivative_matrix(sp)
    rank = np.linalg.matrix_rank(d.toarray()) if min(d.shape) else 0
    a1_ok = rank == sp.n1

    kernel = _constant_kernel_basis(sp)
    m2 = sp.v2_degree
    max_residual = 0.0
    for col in kernel.T:
        full = np.zeros(sp.n2_full)
        for e, c in zip(sp.edges, col):
            j = sp.partition.counts[e.id]
            off = sp.v2_full_offset[e.id]
            full[off:off + j * m2 + 1] = c
        # must satisfy the junction rows and be reproduced by the embedding
        cmat = sp.constraint_matrix()
        if cmat.shape[0]:
            max_residual = max(max_residual, float(np.max(np.abs(cmat @ full))))
        reduced = full[sp.kept_dofs]
        max_residual = max(max_residual, float(np.max(np.abs(sp.E @ reduced - full))))
        max_residual = max(max_residual, float(np.max(np.abs(d @ reduced))))
    a2_ok = max_residual <= 1e-10

    return {
        "a1_surjective": bool(a1_ok),
        "a1_rank": int(rank),
        "n1": sp.n1,
        "a2_kernel_included": bool(a2_ok),
        "a2_max_residual": max_residual,
        "kernel_dim": kernel.shape[1],
    }
