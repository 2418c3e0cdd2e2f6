"""Density reconstruction, analytic oracles, error metrics, consistency harness.

Contains the push-forward density of a Lagrangian state, the closed-form
Barenblatt solutions used as references by the experiments, l1 error and
log-log slope fits, the node-wise consistency probe for smooth Lagrangian
flows on (almost) hexagonal patches, and numerical verification of the
auxiliary algebraic identities and of the non-convexity of the internal
energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mesh import LatticeSpec, TriangleMesh, build_hexagonal_patch

__all__ = [
    "PiecewiseDensity",
    "SmoothFlow",
    "pushforward_density",
    "barenblatt_free",
    "barenblatt_free_support_radius",
    "barenblatt_confined_steady",
    "l1_error",
    "fit_loglog_slope",
    "lagrangian_velocity",
    "consistency_probe",
    "dilation_flow",
    "shear_drift_flow",
    "skew_witness_flow",
    "lemma_b1_check",
    "lemma_b2_b5_checks",
    "nonconvexity_witness",
]

_J = np.array([[0.0, -1.0], [1.0, 0.0]])


# ---------------------------------------------------------------------------
# push-forward density and error metrics

@dataclass(frozen=True)
class PiecewiseDensity:
    """Piecewise-constant density carried by the image triangles."""

    values: np.ndarray
    areas: np.ndarray
    centroids: np.ndarray
    total_mass: float


def pushforward_density(state, mesh, ref) -> PiecewiseDensity:
    """Density of the mapped state: rho_m = 2 mu_m / det Q_m per triangle.

    The per-triangle mass rho_m * area_m equals mu_m identically, so the
    total mass is carried through unchanged.
    """
    det = mesh.signed_dets(state.positions)
    bad = np.flatnonzero(det <= 0.0)
    if bad.size:
        from .assembly import OrientationError

        raise OrientationError(int(bad[0]), float(det[bad[0]]))
    values = 2.0 * ref.tri_mass / det
    return PiecewiseDensity(
        values=values,
        areas=0.5 * det,
        centroids=mesh.centroids(state.positions),
        total_mass=float(np.sum(ref.tri_mass)),
    )


def l1_error(density: PiecewiseDensity, oracle: Callable) -> float:
    """sum_m |rho_m - oracle(image centroid_m)| * image area_m."""
    return float(np.sum(np.abs(density.values - oracle(density.centroids)) * density.areas))


def fit_loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError("slope fit needs at least two points")
    if np.any(x <= 0.0) or np.any(y <= 0.0):
        raise ValueError("slope fit needs positive data")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# ---------------------------------------------------------------------------
# Barenblatt oracles for the cubic porous medium equation  d_t rho = Lap(rho^3)

def barenblatt_free(t, x, mass: float = 1.0):
    """Self-similar solution of d_t rho = Lap(rho^3) in the plane.

    rho(t, x) = s^(-1/3) * (C - |s^(-1/6) x|^2 / 3)_+^(1/2)  with  s = 6 t
    and C = (mass / 2 pi)^(2/3).  The inner time scale s = 6t makes the
    profile an exact solution of the cubic equation; dropping the factor 6
    would instead solve d_t rho = Lap(rho^3)/6.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    s = 6.0 * t
    C = (mass / (2.0 * math.pi)) ** (2.0 / 3.0)
    z2 = np.sum(x * x, axis=1) * s ** (-1.0 / 3.0)
    return s ** (-1.0 / 3.0) * np.sqrt(np.maximum(C - z2 / 3.0, 0.0))


def barenblatt_free_support_radius(t, mass: float = 1.0) -> float:
    C = (mass / (2.0 * math.pi)) ** (2.0 / 3.0)
    return math.sqrt(3.0 * C) * (6.0 * t) ** (1.0 / 6.0)


def barenblatt_confined_steady(x, mass: float = 1.0):
    """Steady state of d_t rho = Lap(rho^3) + div(rho grad V), V = 5|x|^2/2.

    rho(x) = (C - (5/3)|x|^2)_+^(1/2) with C = (5 mass / 2 pi)^(2/3), which
    makes grad(h'(rho) + V) = 0 inside the support and normalizes the mass.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    C = (5.0 * mass / (2.0 * math.pi)) ** (2.0 / 3.0)
    r2 = np.sum(x * x, axis=1)
    return np.sqrt(np.maximum(C - (5.0 / 3.0) * r2, 0.0))


# ---------------------------------------------------------------------------
# smooth Lagrangian flows and the velocity functional

@dataclass(frozen=True)
class SmoothFlow:
    """Analytic flow with hand-coded derivatives, for consistency probing.

    G(t, W) -> (N, 2); dt_G likewise; DG(t, W) -> (N, 2, 2) with
    DG[n, p, q] = d G_p / d w_q; D2G(t, W) -> (N, 2, 2, 2) symmetric in the
    last two slots; rho(W) -> (N,) and grad_rho(W) -> (N, 2) describe the
    smooth reference density.
    """

    name: str
    G: Callable
    dt_G: Callable
    DG: Callable
    D2G: Callable
    rho: Callable
    grad_rho: Callable


def _default_rho():
    def rho(w):
        w = np.atleast_2d(w)
        return 1.0 + 0.3 * np.sin(w[:, 0]) * np.cos(w[:, 1])

    def grad_rho(w):
        w = np.atleast_2d(w)
        g = np.empty_like(w)
        g[:, 0] = 0.3 * np.cos(w[:, 0]) * np.cos(w[:, 1])
        g[:, 1] = -0.3 * np.sin(w[:, 0]) * np.sin(w[:, 1])
        return g

    return rho, grad_rho


def dilation_flow(rate: float = 0.25) -> SmoothFlow:
    """G(t, w) = (1 + rate*t) w with the wavy reference density."""
    rho, grad_rho = _default_rho()

    def lam(t):
        return 1.0 + rate * t

    def G(t, w):
        return lam(t) * np.atleast_2d(w)

    def dt_G(t, w):
        return rate * np.atleast_2d(w)

    def DG(t, w):
        w = np.atleast_2d(w)
        return np.tile(lam(t) * np.eye(2), (w.shape[0], 1, 1))

    def D2G(t, w):
        w = np.atleast_2d(w)
        return np.zeros((w.shape[0], 2, 2, 2))

    return SmoothFlow("dilation", G, dt_G, DG, D2G, rho, grad_rho)


def shear_drift_flow(amp: float = 0.1) -> SmoothFlow:
    """G(t, w) = w + amp*t*(sin w1, cos w2) with the wavy reference density."""
    rho, grad_rho = _default_rho()

    def G(t, w):
        w = np.atleast_2d(w)
        return w + amp * t * np.stack([np.sin(w[:, 0]), np.cos(w[:, 1])], axis=1)

    def dt_G(t, w):
        w = np.atleast_2d(w)
        return amp * np.stack([np.sin(w[:, 0]), np.cos(w[:, 1])], axis=1)

    def DG(t, w):
        w = np.atleast_2d(w)
        D = np.tile(np.eye(2), (w.shape[0], 1, 1))
        D[:, 0, 0] += amp * t * np.cos(w[:, 0])
        D[:, 1, 1] += -amp * t * np.sin(w[:, 1])
        return D

    def D2G(t, w):
        w = np.atleast_2d(w)
        B = np.zeros((w.shape[0], 2, 2, 2))
        B[:, 0, 0, 0] = -amp * t * np.sin(w[:, 0])
        B[:, 1, 1, 1] = -amp * t * np.cos(w[:, 1])
        return B

    return SmoothFlow("shear_drift", G, dt_G, DG, D2G, rho, grad_rho)


def skew_witness_flow() -> SmoothFlow:
    """Quadratic flow whose curvature tensor has the degenerate-hexagon pattern.

    At the origin DG = I and D2G has its only nonzero entries at (0,1,1) and
    (1,0,0), so the trace term of the Lagrangian velocity vanishes there;
    uniform reference density, meant to be probed with V = 0.
    """

    def c(t):
        return 1.0 + 0.5 * t

    drift = np.array([0.3, 0.2])

    def G(t, w):
        w = np.atleast_2d(w)
        quad = 0.5 * np.stack([w[:, 1] ** 2, w[:, 0] ** 2], axis=1)
        return w + c(t) * quad + t * drift

    def dt_G(t, w):
        w = np.atleast_2d(w)
        return 0.25 * np.stack([w[:, 1] ** 2, w[:, 0] ** 2], axis=1) + drift

    def DG(t, w):
        w = np.atleast_2d(w)
        D = np.tile(np.eye(2), (w.shape[0], 1, 1))
        D[:, 0, 1] = c(t) * w[:, 1]
        D[:, 1, 0] = c(t) * w[:, 0]
        return D

    def D2G(t, w):
        w = np.atleast_2d(w)
        B = np.zeros((w.shape[0], 2, 2, 2))
        B[:, 0, 1, 1] = c(t)
        B[:, 1, 0, 0] = c(t)
        return B

    def rho(w):
        w = np.atleast_2d(w)
        return np.ones(w.shape[0])

    def grad_rho(w):
        w = np.atleast_2d(w)
        return np.zeros_like(w)

    return SmoothFlow("skew_witness", G, dt_G, DG, D2G, rho, grad_rho)


def lagrangian_velocity(flow: SmoothFlow, model, t, w) -> np.ndarray:
    """Velocity functional of a smooth flow at reference points w, (N, 2).

    V[G] = P'(rho/det DG) (DG)^-T (tr12[(DG)^-1 D2G]^T - grad rho / rho)
           - grad V (G).
    """
    w = np.atleast_2d(w)
    D = flow.DG(t, w)
    det = np.linalg.det(D)
    if np.any(det <= 0.0):
        raise ValueError("flow gradient is singular or orientation-reversing")
    rho = flow.rho(w)
    if np.any(rho <= 0.0):
        raise ValueError("reference density must be positive")
    Dinv = np.linalg.inv(D)
    B = flow.D2G(t, w)
    # tr12[(DG)^-1 D2G]_r = sum_{a,p} (DG)^-1_{ap} D2G_{p a r}
    trace = np.einsum("nap,npar->nr", Dinv, B)
    vec = trace - flow.grad_rho(w) / rho[:, None]
    Pp = model.internal.P_p(rho / det)
    vel = Pp[:, None] * np.einsum("nqp,nq->np", Dinv, vec)
    vel -= model.potential.grad(flow.G(t, w))
    return vel


# ---------------------------------------------------------------------------
# degree-5 quadrature on the reference triangle (barycentric (1-x-y, x, y))

_SQRT15 = math.sqrt(15.0)
_TRI_Q5_POINTS = np.array(
    [
        [1.0 / 3.0, 1.0 / 3.0],
        [(6.0 - _SQRT15) / 21.0, (6.0 - _SQRT15) / 21.0],
        [1.0 - 2.0 * (6.0 - _SQRT15) / 21.0, (6.0 - _SQRT15) / 21.0],
        [(6.0 - _SQRT15) / 21.0, 1.0 - 2.0 * (6.0 - _SQRT15) / 21.0],
        [(6.0 + _SQRT15) / 21.0, (6.0 + _SQRT15) / 21.0],
        [1.0 - 2.0 * (6.0 + _SQRT15) / 21.0, (6.0 + _SQRT15) / 21.0],
        [(6.0 + _SQRT15) / 21.0, 1.0 - 2.0 * (6.0 + _SQRT15) / 21.0],
    ]
)
_TRI_Q5_WEIGHTS = np.array(
    [9.0 / 40.0]
    + [(155.0 - _SQRT15) / 1200.0] * 3
    + [(155.0 + _SQRT15) / 1200.0] * 3
)


def _triangle_average(f, p0, p1, p2):
    """Average of f over the triangle (p0, p1, p2) with the degree-5 rule."""
    xi = _TRI_Q5_POINTS
    pts = (
        np.outer(1.0 - xi[:, 0] - xi[:, 1], p0)
        + np.outer(xi[:, 0], p1)
        + np.outer(xi[:, 1], p2)
    )
    vals = f(pts)
    return np.tensordot(_TRI_Q5_WEIGHTS, vals, axes=(0, 0))


def consistency_probe(flow: SmoothFlow, model, eps, tau, t=0.5, center=(0.0, 0.0),
                      kind: str = "hexagonal"):
    """Residuals of the node-wise Euler-Lagrange expansion at one patch center.

    Interpolates G(t, .) and G(t - tau, .) on the 7-node patch of spacing
    eps, evaluates the momentum p0 and the impulse J0 of the discrete
    Euler-Lagrange equation (with an exact simplex average for the potential
    term), and compares with a*eps^2*rho(w0)*dt_G and a*eps^2*rho(w0)*V[G],
    where a = patch area / (3 eps^2) is sqrt(3)/2 on hexagonal patches.
    Returns (momentum residual norm, impulse residual norm).
    """
    patch = build_hexagonal_patch(LatticeSpec(kind, eps), rings=1, center=center)
    W = patch.nodes
    Gt = flow.G(t, W)
    Gs = flow.G(t - tau, W)
    mu = np.empty(patch.n_triangles)
    for m, (i, j, k) in enumerate(patch.triangles):
        area = 0.5 * patch.signed_dets()[m]
        mu[m] = area * _triangle_average(flow.rho, W[i], W[j], W[k])

    dG = (Gt - Gs) / tau
    p0 = np.zeros(2)
    J0 = np.zeros(2)
    has_V = model.potential.name != "zero"
    for m, (i, j, k) in enumerate(patch.triangles):
        # rotate so the center node (index 0) sits first
        loc = [int(i), int(j), int(k)]
        r = loc.index(0)
        c, a, b = loc[r], loc[(r + 1) % 3], loc[(r + 2) % 3]
        p0 += (mu[m] / 12.0) * (2.0 * dG[c] + dG[a] + dG[b])
        ea, eb = Gt[a] - Gt[c], Gt[b] - Gt[c]
        det = float(ea[0] * eb[1] - ea[1] * eb[0])
        if det <= 0.0:
            raise ValueError(f"interpolated patch triangle {m} degenerated (det={det:g})")
        J0 += 0.5 * model.internal.P(2.0 * mu[m] / det) * (_J @ (Gt[b] - Gt[a]))
        if has_V:
            def integrand(xi_pts, c=c, a=a, b=b):
                lam0 = 1.0 - xi_pts[:, 0] - xi_pts[:, 1]
                pts = (
                    lam0[:, None] * Gt[c]
                    + xi_pts[:, 0][:, None] * Gt[a]
                    + xi_pts[:, 1][:, None] * Gt[b]
                )
                return model.potential.grad(pts) * lam0[:, None]

            avg = np.tensordot(
                _TRI_Q5_WEIGHTS,
                integrand(_TRI_Q5_POINTS),
                axes=(0, 0),
            )
            J0 -= mu[m] * avg

    a_geom = float(np.sum(patch.areas())) / (3.0 * eps * eps)
    w0 = W[0:1]
    rho0 = float(flow.rho(w0)[0])
    p_target = a_geom * eps * eps * rho0 * flow.dt_G(t, w0)[0]
    J_target = a_geom * eps * eps * rho0 * lagrangian_velocity(flow, model, t, w0)[0]
    return float(np.linalg.norm(p0 - p_target)), float(np.linalg.norm(J0 - J_target))


# ---------------------------------------------------------------------------
# auxiliary algebraic identities

def _simplex_average_gauss(f, d: int, n: int = 8):
    """Average of f over the standard d-simplex by iterated Gauss-Legendre.

    Stick-breaking map of the unit cube, w_k = u_k * prod_{i<k} (1 - u_i),
    with polynomial Jacobian prod_k prod_{i<k} (1 - u_i); moderate n
    integrates any low-degree polynomial to machine precision.
    """
    x, wts = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    wts = 0.5 * wts
    U = np.stack([g.ravel() for g in np.meshgrid(*([x] * d), indexing="ij")], axis=1)
    Wgt = np.prod(
        np.stack([g.ravel() for g in np.meshgrid(*([wts] * d), indexing="ij")], axis=1),
        axis=1,
    )
    pts = np.empty_like(U)
    jac = np.ones(U.shape[0])
    rem = np.ones(U.shape[0])
    for k in range(d):
        pts[:, k] = U[:, k] * rem
        jac = jac * rem
        rem = rem * (1.0 - U[:, k])
    simplex_vol = 1.0 / math.factorial(d)
    return np.sum(Wgt * jac * f(pts)) / simplex_vol


def lemma_b1_check(d: int, g: np.ndarray, n: int = 8):
    """Simplex average of |g0 + sum_j w_j (g_j - g0)|^2 vs its closed form.

    Returns (quadrature value, algebraic value); the algebraic value is
    (2/((d+1)(d+2))) * sum_{0<=i<=j<=d} g_i . g_j.
    """
    g = np.asarray(g, dtype=float)
    if g.shape[0] != d + 1:
        raise ValueError(f"need d+1 = {d + 1} sample vectors, got {g.shape[0]}")

    def f(pts):
        field = g[0] + pts @ (g[1:] - g[0])
        return np.sum(field * field, axis=1)

    lhs = float(_simplex_average_gauss(f, d, n=n))
    rhs = 0.0
    for i in range(d + 1):
        for j in range(i, d + 1):
            rhs += float(np.dot(g[i], g[j]))
    rhs *= 2.0 / ((d + 1) * (d + 2))
    return lhs, rhs


def _b_contract(B, v):
    """B:[v]^2 for a (2,2,2) tensor, returning a 2-vector."""
    return np.einsum("pqr,q,r->p", B, v, v)


def _trace_sum(sigma, B):
    """sum_k tr[(s_k|s_k+1)^-1 (B:[s_k]^2 | B:[s_k+1]^2)] J(s_k - s_k+1)."""
    total = np.zeros(2)
    for k in range(6):
        a, b = sigma[k], sigma[(k + 1) % 6]
        S = np.linalg.inv(np.column_stack([a, b]))
        beta = np.column_stack([_b_contract(B, a), _b_contract(B, b)])
        total += np.trace(S @ beta) * (_J @ (a - b))
    return total


def lemma_b2_b5_checks(rng=None, samples: int = 100) -> dict:
    """Numerically verify the four auxiliary identities; returns max deviations.

    B.2: J A J^T = det(A) A^-T for random A.
    B.3: sum_k J(s_k - s_k+1) ((s_k + s_k+1)/3)^T = sqrt(3) I on the hexagon.
    B.4: the trace sum equals 2 sqrt(3) tr12[B]^T for symmetric-last-two B.
    B.5: on the degenerate hexagon with the (0,1,1)/(1,0,0) pattern the
         trace sum equals (-1, -1).
    """
    from .mesh import hex_sigma, skew_sigma

    rng = np.random.default_rng(0) if rng is None else rng
    out = {}

    dev = 0.0
    for _ in range(samples):
        A = rng.normal(size=(2, 2))
        if abs(np.linalg.det(A)) < 1e-3:
            continue
        lhs = _J @ A @ _J.T
        rhs = np.linalg.det(A) * np.linalg.inv(A).T
        dev = max(dev, float(np.max(np.abs(lhs - rhs))))
    out["B2"] = dev

    sigma = hex_sigma()
    acc = np.zeros((2, 2))
    for k in range(6):
        a, b = sigma[k], sigma[(k + 1) % 6]
        acc += np.outer(_J @ (a - b), (a + b) / 3.0)
    out["B3"] = float(np.max(np.abs(acc - math.sqrt(3.0) * np.eye(2))))

    dev = 0.0
    for _ in range(samples):
        B = rng.normal(size=(2, 2, 2))
        B = 0.5 * (B + np.transpose(B, (0, 2, 1)))
        lhs = _trace_sum(sigma, B)
        rhs = 2.0 * math.sqrt(3.0) * np.einsum("ppr->r", B)
        dev = max(dev, float(np.max(np.abs(lhs - rhs))))
    out["B4"] = dev

    Bw = np.zeros((2, 2, 2))
    Bw[0, 1, 1] = 1.0
    Bw[1, 0, 0] = 1.0
    lhs = _trace_sum(skew_sigma(), Bw)
    out["B5"] = float(np.max(np.abs(lhs - np.array([-1.0, -1.0]))))
    return out


def nonconvexity_witness(A: np.ndarray, rho_bar: float, model, step: float = 1e-4):
    """Second derivative of s -> ht(det(A + s A J)/rho_bar) at s = 0.

    Along the rotation direction alpha = A J the analytic value is
    2 sbar ht'(sbar) = -2 sbar P(1/sbar) < 0 with sbar = det A / rho_bar,
    exhibiting a strictly negative-curvature direction of the internal
    energy.  Returns (analytic, finite-difference) second derivatives.
    """
    A = np.asarray(A, dtype=float)
    detA = float(np.linalg.det(A))
    if detA <= 0.0 or rho_bar <= 0.0:
        raise ValueError("need det A > 0 and rho_bar > 0")
    sbar = detA / rho_bar
    analytic = float(2.0 * sbar * model.internal.ht_p(sbar))

    def f(s):
        return float(model.internal.ht(np.linalg.det(A + s * (A @ _J)) / rho_bar))

    fd = (f(step) - 2.0 * f(0.0) + f(-step)) / (step * step)
    return analytic, float(fd)


def swap_direction_second_derivative(A: np.ndarray, rho_bar: float, model):
    """Analytic curvature along the swap direction alpha = A [[0,1],[1,0]].

    Equals -2 sbar ht'(sbar) >= 0; reported alongside the rotation witness.
    """
    A = np.asarray(A, dtype=float)
    sbar = float(np.linalg.det(A)) / rho_bar
    return float(-2.0 * sbar * model.internal.ht_p(sbar))
