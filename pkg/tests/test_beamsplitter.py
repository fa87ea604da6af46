import cmath
import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from cavity_broadcast.beamsplitter import (
    Tuning,
    apply,
    apply_vector,
    attenuation_amplitude,
    beam_splitter_for,
    build_beam_splitter,
    conversion_fractions,
    generator_block,
    tuning_to_lambda,
)
from cavity_broadcast.errors import DegenerateAtom, DimensionMismatch
from cavity_broadcast.fock import (
    FockCutoff,
    TwoModeState,
    lowering_operator,
    number_vector,
    product_state,
    trace_distance,
    two_mode_coherent_vector,
    two_mode_number_vector,
)

import oracles

KAPPAS = [0, -1, 2, 1j, -1 + 0.5j]


def test_tuning_from_atom():
    t = Tuning.from_atom(1 / math.sqrt(2), -1 / math.sqrt(2))
    assert t.kappa == pytest.approx(-1)
    t = Tuning.from_atom(0.6, 0.8, r=2.0)
    assert t.kappa == pytest.approx(0.375)


def test_tuning_from_kappa_roundtrip():
    for k in KAPPAS:
        t = Tuning.from_kappa(k, r=1.5)
        assert abs(t.alpha) ** 2 + abs(t.beta) ** 2 == pytest.approx(1, abs=1e-14)
        assert t.alpha / (t.beta * t.r) == pytest.approx(k, abs=1e-14)


def test_tuning_rejects_bad_input():
    with pytest.raises(DegenerateAtom):
        Tuning.from_atom(1, 0)
    with pytest.raises(ValueError):
        Tuning.from_atom(0.5, 0.5)
    with pytest.raises(ValueError):
        Tuning(kappa=3, alpha=0.6, beta=0.8, r=1.0)
    with pytest.raises(ValueError):
        Tuning.from_kappa(1, r=0)


@pytest.mark.parametrize(
    "kappa,theta,phi",
    [(0, 0, 0), (-1, math.pi / 4, math.pi), (2, math.atan(2), 0), (1j, math.pi / 4, math.pi / 2), (-1j, math.pi / 4, -math.pi / 2)],
)
def test_tuning_to_lambda(kappa, theta, phi):
    th, ph = tuning_to_lambda(kappa)
    assert th == pytest.approx(theta, abs=1e-15)
    assert ph == pytest.approx(phi, abs=1e-15)
    assert cmath.exp(1j * ph) * math.tan(th) == pytest.approx(kappa, abs=1e-14)


def test_conversion_fractions():
    assert conversion_fractions(-1) == (0.5, 0.5)
    assert conversion_fractions(0) == (0.0, 1.0)
    down, up = conversion_fractions(2)
    assert down == pytest.approx(0.8) and up == pytest.approx(0.2)
    assert attenuation_amplitude(-1) == pytest.approx(1 / math.sqrt(2))


def test_n1_block_symbolic():
    # exp of the one-photon generator, in closed form from sympy
    th, ph = sympy.symbols("theta phi", real=True)
    lam = th * sympy.exp(-sympy.I * ph)
    G = sympy.Matrix([[0, lam], [-sympy.conjugate(lam), 0]])
    U = sympy.simplify(G.exp())
    for theta, phi in [(0.3, 0.0), (math.pi / 4, math.pi), (1.1, -0.7)]:
        ref = np.array(U.subs({th: theta, ph: phi}).evalf(), dtype=complex)
        bs = build_beam_splitter(theta, phi, 1)
        np.testing.assert_allclose(bs.block_unitaries[1], ref, atol=1e-14)


def test_sign_convention_regression():
    # frozen: the N=1 block is [[cos, e^{-i phi} sin], [-e^{i phi} sin, cos]]
    theta, phi = 0.4, 0.9
    U = build_beam_splitter(theta, phi, 1).block_unitaries[1]
    expected = np.array(
        [[math.cos(theta), cmath.exp(-1j * phi) * math.sin(theta)], [-cmath.exp(1j * phi) * math.sin(theta), math.cos(theta)]]
    )
    np.testing.assert_allclose(U, expected, atol=1e-15)
    # |1,0> -> cos|1,0> - e^{i phi} sin |0,1>
    out = apply_vector(build_beam_splitter(theta, phi, 1), two_mode_number_vector(1, 0, 1))
    np.testing.assert_allclose(out[1:], [math.cos(theta), -cmath.exp(1j * phi) * math.sin(theta)], atol=1e-15)


def test_generator_block_antihermitian():
    G = generator_block(0.3 - 0.8j, 5)
    np.testing.assert_allclose(G, -G.conj().T, atol=0)


@pytest.mark.parametrize("kappa", KAPPAS)
def test_blocks_match_rectangular_expm(kappa):
    m = 8
    theta, phi = tuning_to_lambda(kappa)
    lam = theta * cmath.exp(-1j * phi)
    ref = oracles.rect_matrix_to_triangle(oracles.beam_splitter_rect(lam, m), m, m)
    bs = beam_splitter_for(kappa, m)
    np.testing.assert_allclose(bs.full_unitary(), ref, atol=1e-12)
    assert bs.unitarity_error() <= 1e-12


@pytest.mark.parametrize("kappa", KAPPAS)
def test_inverse_composes_to_identity(kappa):
    bs = beam_splitter_for(kappa, 10)
    inv = bs.inverse()
    for U, V in zip(bs.block_unitaries, inv.block_unitaries):
        np.testing.assert_allclose(V @ U, np.eye(len(U)), atol=1e-12)


def test_negative_theta_is_inverse():
    a = build_beam_splitter(-0.7, 0.2, 5)
    b = build_beam_splitter(0.7, 0.2, 5)
    np.testing.assert_allclose(a.full_unitary(), b.full_unitary().conj().T, atol=1e-13)


def test_identity_at_kappa_zero():
    bs = beam_splitter_for(0, 6)
    np.testing.assert_allclose(bs.full_unitary(), np.eye(FockCutoff(6).dim), atol=0)


def test_vacuum_invariant():
    rho = product_state(number_vector(0, 12), number_vector(0, 12))
    out = apply(beam_splitter_for(-1 + 0.5j, 12), rho)
    assert trace_distance(out, rho) <= 1e-15


@pytest.mark.parametrize("kappa", KAPPAS)
def test_coherent_product_output(kappa):
    n = 40
    A = attenuation_amplitude(kappa)
    out = apply_vector(beam_splitter_for(kappa, n), two_mode_coherent_vector(1.0, 0, n))
    ref = two_mode_coherent_vector(A, -kappa * A, n)
    assert abs(abs(np.vdot(ref, out)) ** 2 - 1) <= 1e-12


def test_cloning_amplitudes():
    g = 0.8 - 0.3j
    out = apply_vector(beam_splitter_for(-1, 40), two_mode_coherent_vector(math.sqrt(2) * g, 0, 40))
    assert abs(np.vdot(two_mode_coherent_vector(g, g, 40), out)) ** 2 == pytest.approx(1, abs=1e-12)


def test_dimension_mismatch():
    rho = product_state(number_vector(0, 3), number_vector(0, 3))
    with pytest.raises(DimensionMismatch):
        apply(beam_splitter_for(-1, 4), rho)
    with pytest.raises(DimensionMismatch):
        apply_vector(beam_splitter_for(-1, 4), np.ones(3))


def test_heisenberg_image_of_a1():
    # S^dag a1 S = cos a1 + e^{-i phi} sin a2 on states whose photons stay inside the cutoff
    n = 6
    theta, phi = 0.5, 1.3
    bs = build_beam_splitter(theta, phi, n)
    U = bs.full_unitary()
    cut = FockCutoff(n)
    a1, a2 = lowering_operator(cut, 1), lowering_operator(cut, 2)
    lhs = U.conj().T @ a1 @ U
    rhs = math.cos(theta) * a1 + cmath.exp(-1j * phi) * math.sin(theta) * a2
    # a1 maps block N to block N-1 so no truncation effect arises
    np.testing.assert_allclose(lhs, rhs, atol=1e-13)


kappa_st = st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(kappa_st, st.complex_numbers(max_magnitude=1.5, allow_nan=False, allow_infinity=False))
def test_photon_number_and_split(kappa, gamma):
    n = 30
    rho = TwoModeState.from_vector(n, two_mode_coherent_vector(gamma, 0, n))
    out = apply(beam_splitter_for(kappa, n), rho)
    assert abs(out.mean_photons() - rho.mean_photons()) <= 1e-10
    down, _ = conversion_fractions(kappa)
    assert abs(out.mean_photons(2) - down * rho.mean_photons()) <= 1e-8
    assert abs(out.purity() - 1) <= 1e-10


@settings(max_examples=25, deadline=None)
@given(kappa_st)
def test_unitary_blocks(kappa):
    bs = beam_splitter_for(kappa, 12)
    assert bs.unitarity_error() <= 1e-12
    assert bs.kappa == pytest.approx(kappa, abs=1e-9 * max(1, abs(kappa)))
