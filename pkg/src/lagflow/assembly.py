"""Discrete minimizing-movement objective, exact gradient, exact sparse Hessian.

One implicit Euler step minimizes

    F(G) = (1/2 tau) ||G - G*||^2_{L^2(rho_ref)} + sum_m mu_m ht(det Q_m / 2 mu_m)
           + w * sum_m mu_m V(image centroid_m)

over node positions G, where Q_m is the edge matrix of the image triangle.
The potential weight w is 1 in the default 'exact_gradient' quadrature and
1/2 in the 'paper61' variant; residual and hessian are the exact first and
second derivatives of F in either mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "OrientationError",
    "LagrangianState",
    "ConstraintProjector",
    "SparseBlockMatrix",
    "potential_weight",
    "triangle_matrix",
    "internal_energy",
    "potential_energy",
    "l2_distance_sq",
    "mm_objective",
    "residual",
    "hessian",
]

QUADRATURES = ("exact_gradient", "paper61")


class OrientationError(RuntimeError):
    """An image triangle has non-positive determinant."""

    def __init__(self, triangle: int, det: float):
        super().__init__(f"triangle {triangle} lost orientation (det Q = {det:g})")
        self.triangle = triangle
        self.det = det


@dataclass
class LagrangianState:
    """Node image positions at one time level; the scheme's sole unknown."""

    positions: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.positions = np.ascontiguousarray(np.asarray(self.positions, dtype=float))

    def copy(self) -> "LagrangianState":
        return LagrangianState(self.positions.copy(), self.time)

    @staticmethod
    def identity(mesh, time: float = 0.0) -> "LagrangianState":
        return LagrangianState(mesh.nodes.copy(), time)


class ConstraintProjector:
    """Per-node 2x2 projectors onto the admissible motion directions."""

    def __init__(self, mesh):
        L = mesh.n_nodes
        P = np.tile(np.eye(2), (L, 1, 1))
        constrained = np.zeros(L, dtype=bool)
        for l, tag in enumerate(mesh.constraints):
            if tag[0] == "line":
                d = np.asarray(tag[1], dtype=float)
                P[l] = np.outer(d, d)
                constrained[l] = True
            elif tag[0] == "pinned":
                P[l] = 0.0
                constrained[l] = True
        self.matrices = P
        self.constrained = constrained
        self.any_constrained = bool(constrained.any())

    def apply(self, Z: np.ndarray) -> np.ndarray:
        """Project an (L, 2) nodal vector field."""
        if not self.any_constrained:
            return Z
        return np.einsum("lab,lb->la", self.matrices, Z)


def potential_weight(quadrature: str) -> float:
    if quadrature not in QUADRATURES:
        raise ValueError(f"unknown potential quadrature {quadrature!r}")
    return 1.0 if quadrature == "exact_gradient" else 0.5


def _tri_edges(positions, tris):
    p0 = positions[tris[:, 0]]
    e1 = positions[tris[:, 1]] - p0
    e2 = positions[tris[:, 2]] - p0
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    return p0, e1, e2, det


def _checked_dets(positions, mesh):
    _, _, _, det = _tri_edges(positions, mesh.triangles)
    bad = np.flatnonzero(det <= 0.0)
    if bad.size:
        t = int(bad[0])
        raise OrientationError(t, float(det[t]))
    return det


def _rot90(v):
    """Quarter turn J v = (-v_y, v_x) applied along the last axis."""
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def triangle_matrix(state: LagrangianState, mesh, m: int):
    """Edge matrix Q_m = (G1-G0 | G2-G0) and its determinant."""
    i, j, k = mesh.triangles[m]
    g = state.positions
    Q = np.column_stack([g[j] - g[i], g[k] - g[i]])
    return Q, float(np.linalg.det(Q))


def internal_energy(state, mesh, ref, model) -> float:
    """sum_m mu_m * ht(det Q_m / (2 mu_m))."""
    det = _checked_dets(state.positions, mesh)
    s = det / (2.0 * ref.tri_mass)
    return float(np.sum(ref.tri_mass * model.internal.ht(s)))


def potential_energy(state, mesh, ref, model) -> float:
    """One-point (image centroid) quadrature: sum_m mu_m * V(centroid_m)."""
    cen = mesh.centroids(state.positions)
    return float(np.sum(ref.tri_mass * model.potential.V(cen)))


def l2_distance_sq(state, prev, mesh, ref) -> float:
    """||G - G*||^2 in L^2(rho_ref), evaluated trianglewise.

    On each triangle the squared distance of two affine maps averages to
    (1/6) * sum_{0<=i<=j<=2} dG_i . dG_j.
    """
    d = state.positions - prev.positions
    t = mesh.triangles
    d0, d1, d2 = d[t[:, 0]], d[t[:, 1]], d[t[:, 2]]
    pair = (
        np.sum(d0 * d0 + d1 * d1 + d2 * d2, axis=1)
        + np.sum(d0 * d1 + d0 * d2 + d1 * d2, axis=1)
    )
    return float(np.sum(ref.tri_mass * pair / 6.0))


def mm_objective(state, prev, tau, mesh, ref, model, quadrature="exact_gradient") -> float:
    """Implicit Euler functional (1/2 tau) dist^2 + internal + w * potential."""
    w = potential_weight(quadrature)
    val = l2_distance_sq(state, prev, mesh, ref) / (2.0 * tau)
    val += internal_energy(state, mesh, ref, model)
    if w != 0.0 and model.potential.name != "zero":
        val += w * potential_energy(state, mesh, ref, model)
    return val


def total_energy(state, mesh, ref, model, quadrature="exact_gradient") -> float:
    """Discrete energy of a state (the tau -> infinity objective)."""
    w = potential_weight(quadrature)
    e = internal_energy(state, mesh, ref, model)
    if model.potential.name != "zero":
        e += w * potential_energy(state, mesh, ref, model)
    return e


def residual(state, prev, tau, mesh, ref, model, quadrature="exact_gradient",
             projector: ConstraintProjector | None = None) -> np.ndarray:
    """Exact gradient of mm_objective with respect to node positions, (L, 2).

    Per incident triangle, node l at local slot i receives
      mass      (mu/12 tau) * (2 dG_i + dG_a + dG_b)
      pressure  (1/2) ht'(det/2mu) * J (G_b - G_a),  (a, b) CCW from l
      potential (w mu/3) * grad V(image centroid).
    Constraint projectors are applied last.
    """
    w = potential_weight(quadrature)
    g = state.positions
    tris = mesh.triangles
    mu = ref.tri_mass
    _, e1, e2, det = _tri_edges(g, tris)
    bad = np.flatnonzero(det <= 0.0)
    if bad.size:
        raise OrientationError(int(bad[0]), float(det[bad[0]]))
    s = det / (2.0 * mu)
    hp = model.internal.ht_p(s)

    d = g - prev.positions
    d0, d1, d2 = d[tris[:, 0]], d[tris[:, 1]], d[tris[:, 2]]
    cm = (mu / (12.0 * tau))[:, None]
    contrib = [
        cm * (2.0 * d0 + d1 + d2),
        cm * (2.0 * d1 + d2 + d0),
        cm * (2.0 * d2 + d0 + d1),
    ]
    # v_i = J (G_b - G_a) = d(det)/dG_i for (a, b) the other two vertices CCW
    half_hp = 0.5 * hp[:, None]
    contrib[0] += half_hp * _rot90(e2 - e1)
    contrib[1] += half_hp * _rot90(-e2)
    contrib[2] += half_hp * _rot90(e1)
    if w != 0.0 and model.potential.name != "zero":
        gv = (w / 3.0) * mu[:, None] * model.potential.grad(mesh.centroids(g))
        for i in range(3):
            contrib[i] = contrib[i] + gv

    Z = np.zeros_like(g)
    for i in range(3):
        np.add.at(Z, tris[:, i], contrib[i])
    if projector is None:
        projector = ConstraintProjector(mesh)
    return projector.apply(Z)


class SparseBlockMatrix:
    """Node-indexed 2x2 block matrix in unconsolidated COO block form.

    The block pattern is the mesh adjacency plus the diagonal; entry lists
    carry one block per (triangle, vertex pair) in ascending triangle order,
    which makes assembly deterministic.
    """

    def __init__(self, n_nodes, rows, cols, blocks):
        self.n_nodes = int(n_nodes)
        self.rows = np.asarray(rows, dtype=np.int64)
        self.cols = np.asarray(cols, dtype=np.int64)
        self.blocks = np.asarray(blocks, dtype=float)

    def block(self, l, lp) -> np.ndarray:
        """Consolidated 2x2 block (l, lp); zero if outside the pattern."""
        mask = (self.rows == l) & (self.cols == lp)
        return self.blocks[mask].sum(axis=0) if mask.any() else np.zeros((2, 2))

    def to_csr(self) -> sp.csr_matrix:
        K = self.rows.shape[0]
        r = (2 * self.rows)[:, None, None] + np.array([[0, 0], [1, 1]])
        c = (2 * self.cols)[:, None, None] + np.array([[0, 1], [0, 1]])
        mat = sp.coo_matrix(
            (self.blocks.ravel(), (r.ravel(), c.ravel())),
            shape=(2 * self.n_nodes, 2 * self.n_nodes),
        )
        return mat.tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()


def hessian(state, prev, tau, mesh, ref, model, quadrature="exact_gradient",
            projector: ConstraintProjector | None = None) -> SparseBlockMatrix:
    """Exact second derivative of mm_objective as a sparse block matrix.

    Per triangle with vertex slots (i, j):
      mass      (mu/12 tau) (1 + delta_ij) I
      pressure  (ht''/4 mu) v_i v_j^T  plus  +-(ht'/2) J  for j = i+-1 (mod 3)
      potential (w mu/9) hess V(centroid) on all nine blocks.
    Constrained nodes get P H P plus the complementary (I - P) diagonal so
    the system stays nonsingular.
    """
    w = potential_weight(quadrature)
    g = state.positions
    tris = mesh.triangles
    mu = ref.tri_mass
    M = tris.shape[0]
    _, e1, e2, det = _tri_edges(g, tris)
    bad = np.flatnonzero(det <= 0.0)
    if bad.size:
        raise OrientationError(int(bad[0]), float(det[bad[0]]))
    s = det / (2.0 * mu)
    hp = model.internal.ht_p(s)
    hpp = model.internal.ht_pp(s)

    v = np.empty((3, M, 2))
    v[0] = _rot90(e2 - e1)
    v[1] = _rot90(-e2)
    v[2] = _rot90(e1)

    J = np.array([[0.0, -1.0], [1.0, 0.0]])
    eye = np.eye(2)
    mass_c = mu / (12.0 * tau)
    press_c = hpp / (4.0 * mu)
    half_hp = 0.5 * hp
    if w != 0.0 and model.potential.name != "zero":
        pot = (w / 9.0) * mu[:, None, None] * model.potential.hess(mesh.centroids(g))
    else:
        pot = None

    rows, cols, blocks = [], [], []
    for i in range(3):
        for j in range(3):
            B = press_c[:, None, None] * np.einsum("ma,mb->mab", v[i], v[j])
            B += (mass_c * (2.0 if i == j else 1.0))[:, None, None] * eye
            if j == (i + 1) % 3:
                B += -half_hp[:, None, None] * J
            elif j == (i + 2) % 3:
                B += half_hp[:, None, None] * J
            if pot is not None:
                B = B + pot
            rows.append(tris[:, i])
            cols.append(tris[:, j])
            blocks.append(B)
    # triangle-major entry order: a block and its transpose then accumulate
    # their per-triangle contributions in the same order, which keeps the
    # assembled Hessian transpose-symmetric to the last bit
    rows = np.stack(rows).T.ravel()
    cols = np.stack(cols).T.ravel()
    blocks = np.stack(blocks).transpose(1, 0, 2, 3).reshape(-1, 2, 2)

    proj = ConstraintProjector(mesh) if projector is None else projector
    if proj.any_constrained:
        P = proj.matrices
        blocks = np.einsum("kab,kbc,kcd->kad", P[rows], blocks, P[cols])
        extra = np.flatnonzero(proj.constrained)
        rows = np.concatenate([rows, extra])
        cols = np.concatenate([cols, extra])
        blocks = np.concatenate([blocks, eye - P[extra]])
    return SparseBlockMatrix(mesh.n_nodes, rows, cols, blocks)
