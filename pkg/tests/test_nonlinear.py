import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paradiff.errors import ConfigError, EllipticityError, HypothesisError, ParameterError
from paradiff.nonlinear import (
    Monomial,
    NonlinearitySpec,
    A_fields,
    build_A,
    check_ellipticity,
    check_hamiltonian,
    check_parity,
    nonlinearity,
    paralinearize,
    preset,
    remainder,
    sample_states,
    structural_gate,
    wirtinger_derivative,
)
from paradiff.quantizer import MatrixOperator, reality_violation
from paradiff.spectral import DoubledState, PeriodicGrid, PotentialSpec, SpectralField, to_samples
from paradiff.symbols import make_cutoff

N = 64


def state(amp, mode=1, n=N, profile="exp"):
    g = PeriodicGrid(n)
    x = g.nodes
    s = amp * np.exp(1j * mode * x) if profile == "exp" else amp * np.cos(mode * x) + 0j
    return DoubledState.from_scalar(SpectralField.from_samples(s, g)).array


def spec_of(*terms, relaxed=False):
    return NonlinearitySpec(tuple(Monomial(c, e) for c, e in terms), relaxed=relaxed)


def poly_values(spec, U):
    return to_samples(nonlinearity(spec, U)[0])


# Wirtinger calculus --------------------------------------------------------


@pytest.mark.parametrize(
    "f, var, expected",
    [
        # d/d uxx (|u|^2 uxx) = |u|^2
        (((1, (1, 1, 0, 0, 1, 0)),), "uxx", {(1, 1, 0, 0, 0, 0): 1}),
        # d/d ubar (u^2) = 0
        (((1, (2, 0, 0, 0, 0, 0)),), "ubar", {}),
        # d/d ux (ux^2 ubar) = 2 ux ubar
        (((1, (0, 1, 2, 0, 0, 0)),), "ux", {(0, 1, 1, 0, 0, 0): 2}),
    ],
)
def test_wirtinger_examples(f, var, expected):
    d = wirtinger_derivative(spec_of(*f), var)
    assert {e: c for e, c in d.poly.items()} == pytest.approx(expected)


def test_wirtinger_unknown_variable():
    with pytest.raises(ParameterError):
        wirtinger_derivative(preset("manuela1"), "uxxx")


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 5), st.integers(0, 1000))
def test_wirtinger_matches_finite_difference(var, seed):
    rng = np.random.default_rng(seed)
    f = spec_of((1 + 0.5j, (1, 1, 0, 1, 1, 0)), (0.3, (0, 2, 1, 0, 0, 1)), (-2j, (1, 0, 0, 0, 0, 2)))
    d = wirtinger_derivative(f, var)
    z = rng.normal(size=6) + 1j * rng.normal(size=6)
    from paradiff.nonlinear import poly_eval

    h = 1e-6
    e = np.zeros(6, complex)
    e[var] = h
    fd = (poly_eval(f.poly, (z + e)[:, None]) - poly_eval(f.poly, (z - e)[:, None])) / (2 * h)
    np.testing.assert_allclose(poly_eval(d.poly, z[:, None]), fd, rtol=1e-6, atol=1e-8)


def test_degree_check():
    with pytest.raises(ParameterError):
        spec_of((1, (1, 0, 0, 0, 0, 0)))
    with pytest.raises(ParameterError):
        Monomial(1, (1, 0, 0))


# paralinearization -----------------------------------------------------------


def test_zero_spec_gives_zero_symbol():
    A = A_fields(build_A(preset("zero"), state(0.5)))
    assert all(np.max(np.abs(v)) == 0 for v in A.values())


def test_manuela1_single_mode():
    A = A_fields(build_A(preset("manuela1"), state(0.5)))
    np.testing.assert_allclose(A["a2"], 0.25, atol=1e-13)
    np.testing.assert_allclose(A["a1"], 0.0, atol=1e-13)
    np.testing.assert_allclose(A["b2"], 0.0, atol=1e-13)


@pytest.mark.parametrize("amp", [0.1, 0.4])
def test_christ_first_order_coefficient(amp):
    U = state(amp, profile="cos")
    A = A_fields(build_A(preset("christ(2)"), U))
    np.testing.assert_allclose(A["a1"], 1j * to_samples(U[0]), atol=1e-13)
    np.testing.assert_allclose(A["a2"], 0.0, atol=1e-15)


def test_nonlinearity_values():
    U = state(0.5)
    x = PeriodicGrid(N).nodes
    np.testing.assert_allclose(poly_values(preset("manuela1"), U), -0.125 * np.exp(1j * x), atol=1e-13)
    f = nonlinearity(preset("manuela1"), U)
    assert reality_violation(f) < 1e-12


def test_remainder_zero_and_reconstruction():
    chi = make_cutoff(0.5)
    U = sample_states(N, 1)[0]
    assert np.max(np.abs(remainder(preset("zero"), U, chi))) == 0.0
    spec = preset("manuela")
    R = remainder(spec, U, chi)
    back = MatrixOperator(build_A(spec, U), chi)(U) + R
    np.testing.assert_allclose(back, nonlinearity(spec, U), atol=1e-13)


def test_remainder_quadratically_small():
    chi = make_cutoff(0.5)
    sys = [paralinearize(preset("manuela"), state(eps, profile="cos"), cutoff=chi) for eps in (0.02, 0.01)]
    r = [np.linalg.norm(s.remainder()) for s in sys]
    assert r[1] < 1e-3 * 0.01
    # cubic nonlinearity: halving the amplitude cuts the remainder by at least four
    assert r[0] / r[1] > 4.0


# structural checks -------------------------------------------------------------


def test_hamiltonian_check():
    assert check_hamiltonian(preset("manuela")).ok
    assert check_hamiltonian(preset("zero")).ok
    bad = NonlinearitySpec(preset("manuela").monomials[:-1], preset("manuela").hamiltonian_data, "hamiltonian")
    rep = check_hamiltonian(bad)
    assert not rep.ok and rep.details["monomial_diff"]
    with pytest.raises(HypothesisError):
        structural_gate(bad, None)


def test_parity_check():
    assert check_parity(preset("manuela1")).ok
    rep = check_parity(preset("manuela"))
    assert not rep.ok and rep.details["odd_in_ux"]
    lopsided = PotentialSpec({1: 1.0}, symmetric_flag=False)
    assert not check_parity(preset("manuela1"), lopsided).ok


def test_ellipticity_examples():
    rep = check_ellipticity(preset("zero"), state(0.5))
    assert rep.ok and rep.details["min_1_plus_a2"] == 1.0
    assert check_ellipticity(preset("manuela1"), state(0.5)).ok
    rep = check_ellipticity(preset("manuela2"), state(1.2))
    assert not rep.ok
    assert rep.details["min_1_plus_a2"] == pytest.approx(-0.44)
    assert rep.details["violated_where_abs_u_at_least"] == pytest.approx(1.2)
    with pytest.raises(EllipticityError):
        structural_gate(preset("manuela2"), None, state(1.2))


def test_presets():
    with pytest.raises(ConfigError) as exc:
        preset("nope")
    assert "zero" in exc.value.details["valid"]
    assert preset("christ(3)").monomials[0].exps == (2, 0, 1, 0, 0, 0)
    with pytest.raises(ParameterError):
        preset("christ(1)")


@pytest.mark.parametrize("name", ["zero", "manuela", "manuela1", "christ(2)"])
def test_spec_json_roundtrip(name):
    s = preset(name)
    back = NonlinearitySpec.from_json(s.to_json())
    assert back.poly == s.poly and back.structure_claim == s.structure_claim
    assert back.sign_mode == s.sign_mode


def test_spec_json_errors():
    with pytest.raises(ConfigError) as exc:
        NonlinearitySpec.from_json({"monomials": [{"re": 1.0}]})
    assert exc.value.details["path"] == "spec.monomials[0]"


def test_sample_states_even():
    for U in sample_states(N, 2, even=True, seed=3):
        c = U[0]
        np.testing.assert_allclose(c[1:], c[1:][::-1], atol=1e-15)
