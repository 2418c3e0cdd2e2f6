import dataclasses
import math

import numpy as np
import pytest
from scipy.integrate import quad

import lagflow.analysis as an
from lagflow.assembly import LagrangianState
from lagflow.mesh import LatticeSpec, build_domain_mesh, build_hexagonal_patch
from lagflow.model import (
    EnergyModel,
    init_reference_density,
    make_power_law,
    quadratic_potential,
    zero_potential,
)

from _utils import random_admissible_state

CUBIC = EnergyModel(make_power_law(3.0), zero_potential())


# ---------------------------------------------------------------------------
# push-forward density and error metrics

def test_pushforward_identity_and_dilation():
    mesh = build_domain_mesh("square", 0.5, bounds=(0, 0, 1, 1))
    ref = init_reference_density(mesh, lambda x: 1.0 + x[:, 0])
    dens = an.pushforward_density(LagrangianState.identity(mesh), mesh, ref)
    assert np.allclose(dens.values, ref.tri_value, rtol=1e-14)
    dens2 = an.pushforward_density(LagrangianState(2.0 * mesh.nodes), mesh, ref)
    assert np.allclose(dens2.values, ref.tri_value / 4.0, rtol=1e-14)


def test_pushforward_mass_identity():
    mesh = build_domain_mesh("disc", 0.4, radius=1.0)
    ref = init_reference_density(mesh, lambda x: 1.0 + 0.5 * x[:, 1] ** 2)
    rng = np.random.default_rng(1)
    st = random_admissible_state(mesh, rng, scale=0.05)
    dens = an.pushforward_density(st, mesh, ref)
    assert dens.total_mass == float(np.sum(ref.tri_mass))
    recomputed = float(np.sum(dens.values * dens.areas))
    assert recomputed == pytest.approx(dens.total_mass, rel=1e-13)


def test_l1_error_examples():
    mesh = build_domain_mesh("square", 0.5, bounds=(0, 0, 1, 1))
    ref = init_reference_density(mesh, lambda x: np.ones(x.shape[0]))
    st = LagrangianState.identity(mesh)
    dens = an.pushforward_density(st, mesh, ref)
    assert an.l1_error(dens, lambda x: np.ones(x.shape[0])) == 0.0
    assert an.l1_error(dens, lambda x: np.zeros(x.shape[0])) == pytest.approx(1.0, rel=1e-12)


def test_fit_loglog_slope():
    x = np.array([1.0, 2.0, 4.0])
    assert an.fit_loglog_slope(x, x**2) == pytest.approx(2.0, abs=1e-12)
    assert an.fit_loglog_slope(x, 3.7 * x**1.18) == pytest.approx(1.18, abs=1e-12)
    assert an.fit_loglog_slope(x, np.full(3, 2.5)) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(ValueError):
        an.fit_loglog_slope(x, np.array([1.0, -1.0, 2.0]))
    with pytest.raises(ValueError):
        an.fit_loglog_slope([1.0], [1.0])


# ---------------------------------------------------------------------------
# Barenblatt oracles

def test_barenblatt_free_center_value():
    assert an.barenblatt_free(1.0, [[0.0, 0.0]])[0] == pytest.approx(
        0.2982334096465499, rel=1e-14  # (12 pi)^(-1/3)
    )


def test_barenblatt_free_support():
    R = an.barenblatt_free_support_radius(0.7)
    assert an.barenblatt_free(0.7, [[R * 1.0000001, 0.0]])[0] == 0.0
    assert an.barenblatt_free(0.7, [[R * 0.999, 0.0]])[0] > 0.0


@pytest.mark.parametrize("t,mass", [(0.01, 1.0), (1.0, 1.0), (0.5, 0.25)])
def test_barenblatt_free_mass(t, mass):
    R = an.barenblatt_free_support_radius(t, mass)
    val, _ = quad(lambda r: 2 * np.pi * r * an.barenblatt_free(t, [[r, 0.0]], mass)[0], 0.0, R)
    assert val == pytest.approx(mass, abs=1e-6 * mass)


def test_barenblatt_free_selfsimilar_scaling():
    rng = np.random.default_rng(0)
    x = 0.4 * rng.normal(size=(20, 2))
    for t in (0.2, 1.7):
        lhs = an.barenblatt_free(t, x)
        rhs = t ** (-1.0 / 3.0) * an.barenblatt_free(1.0, x * t ** (-1.0 / 6.0))
        assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_barenblatt_free_solves_the_pde():
    """Radial finite-volume evolution of d_t rho = Lap(rho^3): the implemented
    family must track itself; the same family without the 6t inner time scale
    (the printed normalization) must not."""
    N, R = 1200, 2.5
    r = np.linspace(0.0, R, N + 1)
    rc = 0.5 * (r[1:] + r[:-1])
    dr = r[1] - r[0]
    rf = r[1:-1]

    def evolve(rho, t0, t1):
        t = t0
        while t < t1:
            p = rho**3
            F = -rf * (p[1:] - p[:-1]) / dr
            dt = min(0.2 * dr * dr / max(3 * rho.max() ** 2, 1e-12), t1 - t)
            vol = rc * dr
            div = np.zeros_like(rho)
            div[1:-1] = (F[1:] - F[:-1]) / vol[1:-1]
            div[0] = F[0] / vol[0]
            div[-1] = -F[-1] / vol[-1]
            rho = rho - dt * div
            t += dt
        return rho

    def l1(a, b):
        return float(2 * np.pi * np.sum(np.abs(a - b) * rc) * dr)

    pts = np.column_stack([rc, np.zeros_like(rc)])
    t0, t1 = 1.0, 1.4
    good = evolve(an.barenblatt_free(t0, pts), t0, t1)
    drift_good = l1(good, an.barenblatt_free(t1, pts))

    def unrescaled(t, x):
        return an.barenblatt_free(t / 6.0, x)  # equivalent to dropping s = 6t

    bad = evolve(unrescaled(t0, pts), t0, t1)
    drift_bad = l1(bad, unrescaled(t1, pts))
    assert drift_good < 5e-4
    assert drift_bad > 100 * drift_good


def test_barenblatt_confined_mass_and_support():
    mass = 0.3232
    C = (5 * mass / (2 * np.pi)) ** (2 / 3)
    R = math.sqrt(3 * C / 5)
    val, _ = quad(lambda r: 2 * np.pi * r * an.barenblatt_confined_steady([[r, 0.0]], mass)[0], 0, R)
    assert val == pytest.approx(mass, abs=1e-6)
    assert an.barenblatt_confined_steady([[R * 1.000001, 0.0]], mass)[0] == 0.0


def test_barenblatt_confined_is_stationary():
    # inside the support, h'(rho) + V must be constant (here h'(r) = 3r^2/2)
    mass = 1.0
    pot = quadratic_potential(5.0)

    def chemical_potential(x):
        rho = an.barenblatt_confined_steady(x, mass)
        return 1.5 * rho**2 + pot.V(x)

    rng = np.random.default_rng(2)
    C = (5 * mass / (2 * np.pi)) ** (2 / 3)
    R = math.sqrt(3 * C / 5)
    rad = R * rng.uniform(0.0, 0.9, size=10)
    ang = rng.uniform(0.0, 2 * np.pi, size=10)
    pts = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    vals = chemical_potential(pts)
    assert np.max(np.abs(vals - vals[0])) < 1e-12


# ---------------------------------------------------------------------------
# smooth flows and the Lagrangian velocity

FLOWS = [an.dilation_flow(), an.shear_drift_flow(), an.skew_witness_flow()]


@pytest.mark.parametrize("flow", FLOWS, ids=lambda f: f.name)
def test_flow_derivatives_match_fd(flow):
    rng = np.random.default_rng(4)
    w = 0.4 * rng.normal(size=(8, 2))
    t, h = 0.37, 1e-6
    dt_fd = (flow.G(t + h, w) - flow.G(t - h, w)) / (2 * h)
    assert np.allclose(dt_fd, flow.dt_G(t, w), rtol=1e-6, atol=1e-9)
    for c in range(2):
        wp = w.copy(); wp[:, c] += h
        wm = w.copy(); wm[:, c] -= h
        DG_fd = (flow.G(t, wp) - flow.G(t, wm)) / (2 * h)
        assert np.allclose(DG_fd, flow.DG(t, w)[:, :, c], rtol=1e-6, atol=1e-9)
        D2G_fd = (flow.DG(t, wp) - flow.DG(t, wm)) / (2 * h)
        assert np.allclose(D2G_fd, flow.D2G(t, w)[:, :, :, c], rtol=1e-5, atol=1e-8)
    rho_fd = np.stack(
        [(flow.rho(w + h * np.eye(2)[c]) - flow.rho(w - h * np.eye(2)[c])) / (2 * h) for c in range(2)],
        axis=1,
    )
    assert np.allclose(rho_fd, flow.grad_rho(w), rtol=1e-6, atol=1e-9)
    B = flow.D2G(t, w)
    assert np.allclose(B, np.transpose(B, (0, 1, 3, 2)), atol=1e-15)


def test_velocity_identity_map_confined():
    flow = dataclasses.replace(
        an.dilation_flow(0.0),
        rho=lambda w: np.ones(np.atleast_2d(w).shape[0]),
        grad_rho=lambda w: np.zeros_like(np.atleast_2d(w)),
    )
    lam = 2.0
    model = EnergyModel(make_power_law(3.0), quadratic_potential(lam))
    w = np.array([[0.3, -0.2], [0.1, 0.5]])
    assert np.allclose(an.lagrangian_velocity(flow, model, 0.0, w), -lam * w, atol=1e-15)


def test_velocity_identity_map_linear_density():
    eps = 0.05
    flow = dataclasses.replace(
        an.dilation_flow(0.0),
        rho=lambda w: 1.0 + eps * np.atleast_2d(w)[:, 0],
        grad_rho=lambda w: np.column_stack(
            [np.full(np.atleast_2d(w).shape[0], eps), np.zeros(np.atleast_2d(w).shape[0])]
        ),
    )
    w = np.array([[0.4, 0.1]])
    v = an.lagrangian_velocity(flow, CUBIC, 0.0, w)
    rho = 1.0 + eps * w[0, 0]
    expected = -CUBIC.internal.P_p(rho) * np.array([eps / rho, 0.0])
    assert np.allclose(v[0], expected, rtol=1e-13)


def test_velocity_dilation_uniform_density():
    flow = dataclasses.replace(
        an.dilation_flow(0.5),
        rho=lambda w: np.ones(np.atleast_2d(w).shape[0]),
        grad_rho=lambda w: np.zeros_like(np.atleast_2d(w)),
    )
    v = an.lagrangian_velocity(flow, CUBIC, 0.3, np.array([[0.7, -0.4]]))
    assert np.allclose(v, 0.0, atol=1e-15)


def test_velocity_against_eulerian_field():
    # independent route: for the dilation flow, push the density forward
    # analytically and compare V[G](w) with -grad(h'(rho) + V) at G(w)
    rate = 0.25
    t = 0.8
    lam = 1.0 + rate * t
    flow = an.dilation_flow(rate)
    model = EnergyModel(make_power_law(3.0), quadratic_potential(0.7))

    def rho_phys(x):
        return flow.rho(np.atleast_2d(x) / lam) / lam**2

    def chemical(x):
        return 1.5 * rho_phys(x) ** 2 + model.potential.V(np.atleast_2d(x))

    w = np.array([[0.3, -0.15]])
    x = flow.G(t, w)
    h = 1e-6
    fd = np.array(
        [
            (chemical(x + h * np.eye(2)[c]) - chemical(x - h * np.eye(2)[c]))[0] / (2 * h)
            for c in range(2)
        ]
    )
    v = an.lagrangian_velocity(flow, model, t, w)[0]
    assert np.allclose(v, -fd, rtol=1e-6)


# ---------------------------------------------------------------------------
# consistency probe

def test_probe_trivial_state_is_exact():
    flow = dataclasses.replace(
        an.dilation_flow(0.0),
        rho=lambda w: np.ones(np.atleast_2d(w).shape[0]),
        grad_rho=lambda w: np.zeros_like(np.atleast_2d(w)),
    )
    p, j = an.consistency_probe(flow, CUBIC, 0.1, 0.01, t=0.5, kind="hexagonal")
    assert p == 0.0
    assert j < 1e-15


def test_probe_hexagonal_orders():
    flow = an.shear_drift_flow()
    model = EnergyModel(make_power_law(3.0), quadratic_potential(1.0))
    eps = [0.1, 0.05, 0.025]
    res = [an.consistency_probe(flow, model, e, e / 10.0, t=0.5, center=(0.3, 0.2)) for e in eps]
    p_order = an.fit_loglog_slope(eps, [r[0] for r in res])
    j_order = an.fit_loglog_slope(eps, [r[1] for r in res])
    assert p_order >= 2.7
    assert j_order >= 2.7


def test_probe_skew_lattice_fails_consistency():
    flow = an.skew_witness_flow()
    eps = [0.1, 0.05, 0.025]
    res = [an.consistency_probe(flow, CUBIC, e, e / 10.0, t=0.5, kind="skew") for e in eps]
    p_order = an.fit_loglog_slope(eps, [r[0] for r in res])
    j_order = an.fit_loglog_slope(eps, [r[1] for r in res])
    assert p_order >= 2.7  # the momentum expansion survives on any lattice
    assert j_order < 3.0  # the impulse one does not (degenerate hexagon)


def test_probe_detects_degenerate_interpolation():
    # a flow that collapses one axis produces degenerate image triangles
    collapse = dataclasses.replace(
        an.dilation_flow(0.0),
        G=lambda t, w: np.column_stack([np.atleast_2d(w)[:, 0], 0.0 * np.atleast_2d(w)[:, 1]]),
    )
    with pytest.raises(ValueError, match="degenerate"):
        an.consistency_probe(collapse, CUBIC, 0.1, 0.01)


# ---------------------------------------------------------------------------
# appendix identities and the non-convexity witness

def test_lemma_b1_trivial_and_constant():
    assert an.lemma_b1_check(2, np.zeros((3, 2))) == (0.0, 0.0)
    c = np.array([0.3, -1.1])
    lhs, rhs = an.lemma_b1_check(2, np.tile(c, (3, 1)))
    assert lhs == pytest.approx(float(c @ c), rel=1e-13)
    assert rhs == pytest.approx(float(c @ c), rel=1e-15)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_lemma_b1_random(d):
    rng = np.random.default_rng(d)
    for _ in range(25):
        lhs, rhs = an.lemma_b1_check(d, rng.normal(size=(d + 1, d)))
        assert abs(lhs - rhs) < 1e-10


def test_lemma_b2_to_b5():
    devs = an.lemma_b2_b5_checks(rng=np.random.default_rng(0), samples=100)
    assert devs["B2"] < 1e-12
    assert devs["B3"] < 1e-12
    assert devs["B4"] < 1e-10
    assert devs["B5"] < 1e-12


def test_lemma_b2_identity_matrix():
    J = np.array([[0.0, -1.0], [1.0, 0.0]])
    assert np.array_equal(J @ np.eye(2) @ J.T, np.eye(2))


def test_nonconvexity_witness_unit_case():
    ana, fd = an.nonconvexity_witness(np.eye(2), 1.0, CUBIC)
    assert ana == pytest.approx(-2.0, rel=1e-15)  # 2 * sbar * ht'(sbar) at sbar = 1
    assert fd == pytest.approx(ana, rel=1e-6)


def test_nonconvexity_witness_random():
    rng = np.random.default_rng(3)
    for _ in range(10):
        A = rng.normal(size=(2, 2))
        while np.linalg.det(A) <= 0.05:
            A = rng.normal(size=(2, 2))
        rho = float(rng.uniform(0.5, 2.0))
        ana, fd = an.nonconvexity_witness(A, rho, CUBIC)
        assert ana < 0.0
        assert fd == pytest.approx(ana, rel=1e-6)
        # the curvature equals 2*g(sbar) with g(s) = s ht'(s) <= 0
        sbar = np.linalg.det(A) / rho
        assert ana == pytest.approx(-2.0 * sbar * CUBIC.internal.P(1.0 / sbar), rel=1e-12)
        assert an.swap_direction_second_derivative(A, rho, CUBIC) == pytest.approx(-ana, rel=1e-14)


def test_witness_rejects_inadmissible_input():
    with pytest.raises(ValueError):
        an.nonconvexity_witness(np.diag([1.0, -1.0]), 1.0, CUBIC)
