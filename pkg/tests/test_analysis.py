import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slitlab.analysis import (VARIANTS, HypothesisError, c2alpha_pipeline, campanato_fit, check_property_F,
                              decay_exponent, equivalence_suite, harnack_experiment, holder_average_fit,
                              hopf_check, kappa_at, manufacture_phi, property_f_corpus, ratio_field,
                              ratio_residual)
from slitlab.coefficients import CoeffField
from slitlab.fields import get_field, model_solution
from slitlab.geometry import hom_eval, perp_weights
from slitlab.grid import SlitGrid
from slitlab.poly import LinearPoly
from slitlab.signorini import SignoriniProblem

A2 = CoeffField.perturbed(2, 0.05, seed=0)


def xi(p):
    return perp_weights(p)[1]


def rho(p):
    return perp_weights(p)[0]


def sqrt_grid(h, n=1):
    return SlitGrid.box(n, h, 1.0, coords="sqrt")


@pytest.mark.parametrize("variant", VARIANTS)
def test_xi_has_property_F(variant):
    rep = check_property_F(xi, None, variant)
    assert rep.passed
    assert rep.seminorm == 0.0
    assert rep.sup == pytest.approx(1.0)


@pytest.mark.parametrize("variant", VARIANTS)
def test_sqrt_rho_fails_property_F(variant):
    rep = check_property_F(lambda p: np.sqrt(rho(p)), None, variant)
    assert not rep.passed
    assert rep.constant > 1e3


def test_constructed_field_with_variable_coefficients():
    f = lambda p: hom_eval(kappa_at(A2, p[..., :-2]), p) * (1 + p[..., 0])
    for v in VARIANTS:
        rep = check_property_F(f, A2, v)
        assert rep.passed
        # sup of 1 + x1 plus a Hölder quotient of order one
        assert 1.5 < rep.constant < 5.0


def test_property_F_constant_shrinks_with_region():
    for _, f in property_f_corpus(A2, count=5):
        for v in VARIANTS:
            c = [check_property_F(f, A2, v, radius=R, samples=300).constant for R in (1.0, 0.5, 0.25)]
            assert c[0] >= c[1] - 1e-9 and c[1] >= c[2] - 1e-9


def test_property_F_rejects_unknown_variant():
    with pytest.raises(ValueError):
        check_property_F(xi, None, "F4")


def test_equivalence_suite_examples():
    corpus = property_f_corpus(A2, count=3)
    fields = corpus + [("sqrt_rho", lambda p: np.sqrt(rho(p))), ("zero", lambda p: 0 * p[..., 0])]
    rep = equivalence_suite(fields, A2, samples=200)
    assert rep["lattice_holds"]
    rows = {r["field"]: r for r in rep["fields"]}
    for name, _ in corpus:
        assert all(rows[name]["passed"].values()) and all(rows[name]["passed_shrunk"].values())
    assert not any(rows["sqrt_rho"]["passed"].values())
    assert all(rows["zero"]["passed"].values())
    assert max(rows["zero"]["constants"].values()) == 0.0


def test_ratio_of_equal_fields_is_one():
    g = sqrt_grid(1 / 32)
    u = g.sample(model_solution)
    np.testing.assert_allclose(ratio_field(u, u).values, 1.0, atol=1e-12)


def test_model_ratio_identity():
    g = sqrt_grid(1 / 256)
    w = ratio_field(g.sample(model_solution), g.sample(xi))
    m = rho(g.points) <= 0.5
    exact = 2 * g.points[..., 0] - rho(g.points)
    assert np.max(np.abs(w.values - exact)[m]) <= 2e-2


@settings(max_examples=10)
@given(st.floats(0.01, 100.0))
def test_ratio_is_scale_invariant(c):
    g = sqrt_grid(1 / 32)
    u1, u2 = g.sample(model_solution), g.sample(lambda p: xi(p) * (1 + 0.2 * p[..., 0]))
    a = ratio_field(u1, u2).values
    b = ratio_field(u1.with_values(c * u1.values), u2.with_values(c * u2.values)).values
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_ratio_floor_violation():
    g = sqrt_grid(1 / 32)
    with pytest.raises(HypothesisError):
        ratio_field(g.sample(model_solution), g.sample(lambda p: 0.3 * xi(p)), floor=0.5)


def test_ratio_residual_trivial_and_manufactured():
    u = lambda p: 2 + np.sin(p[..., 1]) + 0.3 * p[..., 0] * p[..., 2]
    f = lambda p: 0.5 * p
    pts = np.random.default_rng(0).uniform(-0.5, 0.5, (40, 3))
    phi = manufacture_phi(u, A2, f, 1e-2)
    assert np.max(np.abs(ratio_residual(u, u, A2, f, f, phi, phi, pts, 1e-2))) < 1e-10

    u1 = lambda p: np.exp(p[..., 0]) * (1 + p[..., 1]) + p[..., 2] ** 2
    f1 = lambda p: np.stack([p[..., 1], np.cos(p[..., 0]), p[..., 2]], -1)
    pts[:, 2] = np.abs(pts[:, 2]) + 0.1
    res = []
    for s in (2e-2, 1e-2):
        r = ratio_residual(u1, u, A2, f1, f, manufacture_phi(u1, A2, f1, s), manufacture_phi(u, A2, f, s), pts, s)
        res.append(np.max(np.abs(r)))
    assert res[1] < 1e-3
    assert np.log2(res[0] / res[1]) >= 0.9


@settings(max_examples=10)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_campanato_fit_is_equivariant_under_linear_shifts(coef):
    g = sqrt_grid(1 / 32)
    w = g.sample(get_field("harmonic_linear"))
    Lp = LinearPoly.from_coef(np.array(coef), (), 1.0)
    a = campanato_fit(w, radii=(0.4, 0.2, 0.1))
    b = campanato_fit(w.with_values(w.values + Lp(g.points)), radii=(0.4, 0.2, 0.1))
    for fa, fb in zip(a.fits, b.fits):
        np.testing.assert_allclose(fb.coef - fa.coef, coef, atol=1e-9)
    np.testing.assert_allclose(a.sigma, b.sigma, atol=1e-8)


def test_decay_exponent_needs_three_radii():
    with pytest.raises(ValueError):
        decay_exponent([0.2, 0.1], [1.0, 0.5])
    assert decay_exponent([0.4, 0.2, 0.1], [0.0, 0.0, 0.0]) == float("inf")


def test_harnack_model_pair():
    g = sqrt_grid(1 / 64)
    rep = harnack_experiment(g.sample(model_solution), g.sample(xi))
    np.testing.assert_allclose(rep.reports[0].L.coef, [0.0, 2.0, -1.0], atol=5e-2)
    assert rep.reports[0].exponent >= 0.9 * 1.25


def test_harnack_tangential_fit_and_linearize_agree():
    from slitlab.dsolve import linearize

    g = sqrt_grid(1 / 32, 2)
    u1, u2 = g.sample(model_solution), g.sample(xi)
    rep = harnack_experiment(u1, u2, centers=[(-0.1,), (0.0,), (0.1,)])
    for r in rep.reports:
        np.testing.assert_allclose(r.L.coef, [0.0, 0.0, 2.0, -1.0], atol=5e-2)
    assert rep.taylor_exponent >= 0.9 * 1.25
    direct = linearize(ratio_field(u1, u2), 0.2)
    np.testing.assert_allclose(rep.reports[1].L.coef, direct.coef, atol=5e-2)


def test_harnack_equal_fields():
    g = sqrt_grid(1 / 32, 2)
    u = g.sample(xi)
    rep = harnack_experiment(u, u, centers=[(-0.1,), (0.0,), (0.1,)])
    for r in rep.reports:
        np.testing.assert_allclose(r.L.coef, [1.0, 0.0, 0.0, 0.0], atol=1e-10)


def test_harnack_hopf_floor():
    g = sqrt_grid(1 / 32)
    with pytest.raises(HypothesisError):
        harnack_experiment(g.sample(model_solution), g.sample(lambda p: 0.05 * xi(p)))


def test_holder_average_examples():
    g = sqrt_grid(1 / 32, 2)
    assert holder_average_fit(g.sample(xi)).cbar == pytest.approx(1.0, abs=1e-12)
    rep = holder_average_fit(g.sample(lambda p: xi(p) * (1 + p[..., 0])), (0.0,))
    assert rep.cbar == pytest.approx(1.0, abs=1e-6)
    assert rep.exponent == pytest.approx(1.0, abs=0.05)
    pert = lambda p: xi(p) * (1 + rho(p) ** 0.25 * p[..., 1] / np.maximum(rho(p), 1e-300))
    rep = holder_average_fit(g.sample(pert), (0.0,))
    assert rep.exponent == pytest.approx(0.25, abs=0.05)


def test_hopf_examples():
    g = sqrt_grid(1 / 64)
    assert hopf_check(g.sample(xi)) == pytest.approx(1.0, abs=1e-10)
    assert hopf_check(g.sample(lambda p: 0.3 * xi(p))) == pytest.approx(0.3, abs=1e-10)


@pytest.fixture(scope="module")
def flat_pipeline():
    return c2alpha_pipeline(SignoriniProblem(2, CoeffField.identity(2), model_solution))


def test_pipeline_flat_model(flat_pipeline):
    rep = flat_pipeline
    assert rep["pass"] and rep["stage"] == "complete"
    assert [s["stage"] for s in rep["stages"]] == ["solve", "free_boundary", "classify", "pullback",
                                                   "derivatives", "hopf_check", "harnack", "exponent"]
    fb = rep["stages"][1]
    assert abs(fb["gamma0"]) < 2 / 64
    assert np.max(np.abs(rep["constants"]["dgamma"])) < 1e-6
    harn = next(s for s in rep["stages"] if s["stage"] == "harnack")
    assert np.max(np.abs(harn["slopes"])) < 1e-4


def test_pipeline_aborts_on_hopf_floor():
    rep = c2alpha_pipeline(SignoriniProblem(2, CoeffField.identity(2), model_solution), hopf_threshold=1.5)
    assert rep["stage"] == "hopf_check" and rep["aborted_at"] == "hopf_check"
    assert not rep["pass"]


def test_pipeline_needs_n2():
    with pytest.raises(ValueError):
        c2alpha_pipeline(SignoriniProblem(1, CoeffField.identity(1), model_solution))
