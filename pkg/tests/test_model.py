import numpy as np
import pytest
from scipy.integrate import quad

from lagflow.analysis import barenblatt_free, barenblatt_free_support_radius
from lagflow.mesh import TriangleMesh, build_domain_mesh
from lagflow.model import (
    init_reference_density,
    make_power_law,
    preset_initial_density,
    quadratic_potential,
    quartic_potential,
    zero_potential,
)

MS = [1.5, 2.0, 2.5, 3.0, 4.0]


@pytest.mark.parametrize("m", MS)
def test_ht_prime_equals_minus_pressure(m):
    law = make_power_law(m)
    s = np.logspace(-3, 3, 61)
    lhs = law.ht_p(s)
    rhs = -law.P(1.0 / s)
    assert np.max(np.abs(lhs - rhs) / np.abs(rhs)) < 1e-12


@pytest.mark.parametrize("m", MS)
def test_ht_second_derivative_matches_fd(m):
    law = make_power_law(m)
    s = np.logspace(-2, 2, 25)
    h = 1e-6 * s
    fd = (law.ht_p(s + h) - law.ht_p(s - h)) / (2 * h)
    assert np.max(np.abs(fd - law.ht_pp(s)) / np.abs(law.ht_pp(s))) < 1e-6


def test_cubic_closed_forms():
    # by hand from ht(s) = s*h(1/s) with h(r) = r^3/2:
    # ht(s) = 1/(2 s^2), ht'(s) = -1/s^3, ht''(s) = 3/s^4
    law = make_power_law(3.0)
    s = np.array([0.25, 0.5, 1.0, 2.0, 7.5])
    assert np.allclose(law.ht(s), 1.0 / (2 * s**2), rtol=1e-14)
    assert np.allclose(law.ht_p(s), -1.0 / s**3, rtol=1e-14)
    assert np.allclose(law.ht_pp(s), 3.0 / s**4, rtol=1e-14)


def test_quadratic_law_closed_forms():
    law = make_power_law(2.0)
    r = np.array([0.3, 1.0, 4.0])
    assert np.allclose(law.h(r), r**2, rtol=1e-14)
    assert np.allclose(law.P(r), r**2, rtol=1e-14)
    assert np.allclose(law.ht(np.array([0.5, 2.0])), [2.0, 0.5], rtol=1e-14)


@pytest.mark.parametrize("m", MS)
def test_ht_prime_at_one(m):
    assert make_power_law(m).ht_p(1.0) == pytest.approx(-1.0, abs=1e-15)


@pytest.mark.parametrize("m", [1.0, 0.5, -2.0])
def test_fast_diffusion_rejected(m):
    with pytest.raises(ValueError):
        make_power_law(m)


@pytest.mark.parametrize("m", MS)
def test_h_convex_and_pressure_monotone(m):
    law = make_power_law(m)
    r = np.linspace(0.05, 5.0, 200)
    d2 = law.h(r[2:]) - 2 * law.h(r[1:-1]) + law.h(r[:-2])
    assert np.all(d2 >= 0.0)
    assert np.all(law.P(r) >= 0.0)
    assert np.all(np.diff(law.P(r)) >= 0.0)
    assert np.all(law.P_p(r) >= 0.0)


@pytest.mark.parametrize("make", [lambda: quadratic_potential(5.0), quartic_potential])
def test_potential_derivatives_match_fd(make):
    pot = make()
    rng = np.random.default_rng(3)
    x = rng.normal(size=(20, 2))
    h = 1e-6
    for c in range(2):
        dp = x.copy()
        dp[:, c] += h
        dm = x.copy()
        dm[:, c] -= h
        fd_g = (pot.V(dp) - pot.V(dm)) / (2 * h)
        assert np.allclose(pot.grad(x)[:, c], fd_g, rtol=1e-6, atol=1e-8)
        fd_h = (pot.grad(dp) - pot.grad(dm)) / (2 * h)
        assert np.allclose(pot.hess(x)[:, :, c], fd_h, rtol=1e-6, atol=1e-7)


def test_zero_potential_is_zero():
    pot = zero_potential()
    x = np.array([[1.0, 2.0], [-0.5, 0.25]])
    assert np.all(pot.V(x) == 0.0)
    assert np.all(pot.grad(x) == 0.0)
    assert np.all(pot.hess(x) == 0.0)


def test_quartic_values():
    pot = quartic_potential()
    assert pot.V(np.array([[0.0, 0.0]]))[0] == pytest.approx(2.5, rel=1e-15)
    assert pot.V(np.array([[0.0, 1.0]]))[0] == pytest.approx(0.0, abs=1e-15)


def _single_triangle_mesh():
    return TriangleMesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
                        np.array([[0, 1, 2]]))


def test_reference_density_uniform_field():
    mesh = build_domain_mesh("square", 0.5, bounds=(0, 0, 1, 1))
    ref = init_reference_density(mesh, lambda x: np.ones(x.shape[0]))
    assert np.array_equal(ref.tri_mass, mesh.areas())
    assert ref.total_mass == np.sum(mesh.areas())


def test_reference_density_single_triangle():
    ref = init_reference_density(_single_triangle_mesh(), lambda x: 2.0 * np.ones(x.shape[0]))
    assert ref.tri_mass[0] == pytest.approx(1.0, rel=1e-15)
    assert ref.tri_value[0] == 2.0


def test_reference_density_resumming_is_exact():
    mesh = build_domain_mesh("disc", 0.3, radius=1.0)
    ref = init_reference_density(mesh, lambda x: 1.0 + 0.5 * x[:, 0] ** 2)
    assert float(np.sum(ref.tri_mass)) == ref.total_mass


def test_reference_density_rejects_nonpositive():
    with pytest.raises(ValueError, match="triangle 0"):
        init_reference_density(_single_triangle_mesh(), lambda x: -np.ones(x.shape[0]))


def test_two_peaks_values():
    field = preset_initial_density("two_peaks")
    # plug (0.35, 0.35) into the formula by hand: the far peak sits at
    # squared distance 0.7^2 + 0.7^2 = 0.98
    v = field(np.array([[0.35, 0.35]]))[0]
    assert v == pytest.approx(1.0 + np.exp(-20 * 0.98) + 0.001, rel=1e-14)
    assert np.all(field(np.array([[1.5, 1.5], [0.0, 0.0]])) >= 0.001)


def test_two_peaks_positive_on_experiment_mesh():
    mesh = build_domain_mesh("square", 0.15, bounds=(-1.5, -1.5, 1.5, 1.5))
    ref = init_reference_density(mesh, preset_initial_density("two_peaks"))
    assert np.all(ref.tri_mass > 0.0)


def test_bump_and_exp2_values():
    assert preset_initial_density("bump")(np.array([[0.0, 0.0]]))[0] == 1.0
    v = preset_initial_density("exp2")(np.array([[0.0, 0.0]]))[0]
    assert v == pytest.approx(0.1, rel=1e-15)


def test_unknown_preset_rejected():
    with pytest.raises(ValueError, match="unknown"):
        preset_initial_density("nope")


def test_barenblatt_preset_center_value():
    # physical solution of d_t rho = Lap(rho^3): value (12 pi)^(-1/3) at the
    # origin at t = 1 (see the analysis-module oracle tests for the PDE check)
    field = preset_initial_density("barenblatt_t0", t0=1.0)
    assert field(np.array([[0.0, 0.0]]))[0] == pytest.approx((12 * np.pi) ** (-1 / 3), rel=1e-13)


@pytest.mark.parametrize("t0", [0.01, 0.3, 1.0])
def test_barenblatt_preset_mass_is_one(t0):
    R = barenblatt_free_support_radius(t0)
    val, _ = quad(lambda r: 2 * np.pi * r * barenblatt_free(t0, [[r, 0.0]])[0], 0.0, R)
    assert val == pytest.approx(1.0, abs=1e-6)


def test_barenblatt_preset_needs_positive_t0():
    with pytest.raises(ValueError):
        preset_initial_density("barenblatt_t0", t0=0.0)
