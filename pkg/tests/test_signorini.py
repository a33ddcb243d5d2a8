import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slitlab.coefficients import CoeffField
from slitlab.fields import model_solution
from slitlab.geometry import perp_weights
from slitlab.grid import SlitGrid
from slitlab.signorini import (SignoriniProblem, blow_up, classify_regular, derivative_fields, frequency,
                               frequency_profile, free_boundary_graph, solve_signorini)
from slitlab import signorini as sg

I1 = CoeffField.identity(1)
I2 = CoeffField.identity(2)


def half(h, n=1):
    return SlitGrid.box(n, h, 1.0, half=True)


def xi(p):
    return perp_weights(p)[1]


@pytest.fixture(scope="module")
def model64():
    g = half(1 / 64)
    return g, solve_signorini(SignoriniProblem(1, I1, model_solution), g)


def test_positive_data_gives_empty_contact():
    g = half(1 / 32)
    harm = lambda p: 1.1 + p[..., 0] ** 2 - p[..., 1] ** 2
    s = solve_signorini(SignoriniProblem(1, I1, harm), g)
    assert not s.contact.any()
    assert np.max(np.abs(s.U.values - harm(g.points))) < 1e-10


def test_model_solution_reproduced(model64):
    g, s = model64
    assert np.max(np.abs(s.U.values - model_solution(g.points))) < 1e-4
    xn = g.axes[0]
    np.testing.assert_array_equal(s.contact, xn <= 0)
    assert abs(float(s.Gamma[1])) <= 2 / 64
    assert s.complementarity <= 1e-8


def test_negative_data_gives_full_contact():
    g = half(1 / 32)
    s = solve_signorini(SignoriniProblem(1, I1, lambda p: -1 - 0 * p[..., 0]), g)
    assert s.contact.all()
    assert s.complementarity <= 1e-8
    assert s.flags
    _, gam, flags = s.Gamma
    assert bool(flags) and np.isnan(gam)


def test_psor_matches_active_set_and_descends():
    g = half(1 / 32)
    p = SignoriniProblem(1, I1, model_solution)
    a = solve_signorini(p, g, method="psor")
    b = solve_signorini(p, g)
    assert np.max(np.abs(a.U.values - b.U.values)) < 1e-5
    assert a.energy == pytest.approx(b.energy, rel=1e-9)
    assert all(x["pass"] for x in a.report()["bounds_checked"])
    assert sg._monotone(a.energy_history)


def test_energy_is_minimal_among_admissible_perturbations(model64, rng):
    g, s = model64
    from slitlab.grid import Quadrature
    from slitlab.dsolve import stiffness
    K = stiffness(g, I1, None, Quadrature(g, refine_tip=False)).tocsr()
    fixed, thin = sg._masks(g)
    u = s.U.values.ravel()
    J = 0.5 * u @ (K @ u)
    for _ in range(5):
        v = u + 0.01 * rng.standard_normal(u.size) * ~fixed.ravel()
        v[thin.ravel()] = np.maximum(v[thin.ravel()], 0)
        assert 0.5 * v @ (K @ v) >= J - 1e-12


def test_translated_free_boundary():
    g = half(1 / 64)
    s = solve_signorini(SignoriniProblem(1, I1, lambda p: model_solution(p - np.array([0.3, 0.0]))), g)
    assert float(s.Gamma[1]) == pytest.approx(0.3, abs=2 / 64)


def test_tilted_free_boundary_slope():
    th = np.arctan(0.2)

    def tilt(p):
        q = np.stack([np.cos(th) * p[..., 1] - np.sin(th) * p[..., 0], p[..., 2]], -1)
        return model_solution(q)

    s = solve_signorini(SignoriniProblem(2, I2, tilt), half(1 / 16, 2))
    xT, gam, flags = s.Gamma
    m = np.abs(xT[:, 0]) <= 0.5
    slope, icpt = np.polyfit(xT[m, 0], gam[m], 1)
    assert slope == pytest.approx(0.2, rel=0.05)
    assert abs(icpt) < 2 / 16
    assert not flags.any()


def test_even_data_in_tangential_direction_gives_even_solution():
    g = half(1 / 16, 2)
    data = lambda p: model_solution(p[..., 1:]) + 0.2 * p[..., 0] ** 2
    s = solve_signorini(SignoriniProblem(2, I2, data), g)
    np.testing.assert_allclose(s.U.values, s.U.values[::-1], atol=1e-8)


def test_solver_errors():
    p = SignoriniProblem(1, I1, model_solution)
    with pytest.raises(ValueError):
        solve_signorini(p, SlitGrid.box(1, 1 / 16, 1.0))
    with pytest.raises(ValueError):
        solve_signorini(p, half(1 / 16), omega=2.0)
    with pytest.raises(ValueError):
        solve_signorini(p, half(1 / 16), method="multigrid")
    with pytest.raises(ValueError):
        SignoriniProblem(2, I1, model_solution)


@pytest.fixture(scope="module")
def fine():
    return half(1 / 256)


def test_frequency_examples(fine):
    radii = (0.1, 0.2, 0.3, 0.4, 0.5)
    np.testing.assert_allclose(frequency_profile(fine.sample(model_solution), radii=radii).N, 1.5, atol=0.02)
    np.testing.assert_allclose(frequency_profile(fine.sample(lambda p: p[..., 0]), radii=radii).N, 1.0, atol=0.01)
    np.testing.assert_allclose(frequency_profile(fine.sample(xi), radii=radii).N, 0.5, atol=0.01)


def test_frequency_vanishing_denominator():
    g = half(1 / 32)
    with pytest.raises(ValueError):
        frequency(g.sample(lambda p: 0 * p[..., 0]), r=0.5)


def test_frequency_monotone_for_solution():
    s = solve_signorini(SignoriniProblem(1, I1, model_solution), half(1 / 128))
    prof = frequency_profile(s.U, radii=(0.1, 0.2, 0.3, 0.4, 0.5))
    assert prof.monotonicity_violation() <= 0.01


def test_classify_examples(fine):
    c = classify_regular(frequency_profile(fine.sample(model_solution)))
    assert c["regular"] and c["monotone"]
    assert not classify_regular(frequency_profile(fine.sample(lambda p: p[..., 0])))["regular"]
    assert not classify_regular(frequency_profile(fine.sample(xi)))["regular"]
    with pytest.raises(ValueError):
        classify_regular(frequency_profile(fine.sample(model_solution), radii=(0.1, 0.2, 0.3)))


@settings(max_examples=5)
@given(st.floats(0.5, 2.0))
def test_classification_is_scale_invariant(R):
    g = half(1 / 128)
    scaled = g.sample(lambda p: R ** -1.5 * model_solution(R * p))
    assert classify_regular(frequency_profile(scaled, radii=(0.1, 0.15, 0.2, 0.25, 0.3)))["regular"]


def test_blow_up_of_homogeneous_solution(model64):
    _, s = model64
    a, b = blow_up(s.U, r=0.5), blow_up(s.U, r=0.25)
    assert np.max(np.abs(a.values - b.values)) < 0.01


def test_blow_up_of_xi():
    g = half(1 / 128)
    b = blow_up(g.sample(xi), r=0.5)
    assert b.meta["normaliser"] == pytest.approx(0.5, rel=1e-6)
    # interpolation is only first order at the square-root edge
    far = perp_weights(b.grid.points)[0] > 0.1
    np.testing.assert_allclose(b.values[far], np.sqrt(2) * xi(b.grid.points)[far], atol=1e-3)


def test_blow_up_drops_lower_order_terms():
    g = half(1 / 128)
    U = g.sample(lambda p: model_solution(p) + p[..., 0] ** 2)
    ref = g.sample(model_solution)
    drift = [np.max(np.abs(blow_up(U, r=r).values - blow_up(ref, r=r).values)) for r in (0.4, 0.2, 0.1)]
    assert drift[0] > drift[1] > drift[2]


def test_derivative_of_model_solution():
    errs = []
    for h in (1 / 32, 1 / 64):
        g = half(h)
        s = solve_signorini(SignoriniProblem(1, I1, model_solution), g)
        d = derivative_fields(s, 0)
        x, y = g.points[..., 0], g.points[..., 1]
        r = np.hypot(x, y)
        m = (r < 0.5) & (r > 0.1) & ~((x < 0) & (y < -0.5 * x))
        errs.append(np.max(np.abs(d.values - 1.5 * xi(g.points))[m]))
    assert errs[1] < 1e-3
    assert np.log2(errs[0] / errs[1]) >= 0.9


def test_derivative_of_linear_field():
    g = half(1 / 16, 2)
    d = derivative_fields(g.sample(lambda p: 3 * p[..., 0] + p[..., 1]), 0)
    np.testing.assert_allclose(d.values, 3.0, atol=1e-12)
    with pytest.raises(ValueError):
        derivative_fields(g.sample(lambda p: p[..., 0]), 2)


def test_free_boundary_graph_recomputes(model64):
    _, s = model64
    xT, gam, flags = free_boundary_graph(s)
    assert float(gam) == float(s.Gamma[1])
