import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavity_broadcast.errors import DimensionMismatch, InvalidState, NotPositive, TailTooLarge
from cavity_broadcast.fock import (
    CoherentMixture,
    FockCutoff,
    SingleModeState,
    TwoModeState,
    coherent_tail,
    coherent_vector,
    fidelity_pure,
    load_state,
    lowering_operator,
    mixture_state,
    number_vector,
    overlap,
    partial_trace,
    product_state,
    product_vector,
    save_state,
    state_from_dict,
    state_to_dict,
    trace_distance,
    two_mode_coherent_vector,
    two_mode_number_vector,
)

import oracles


def assert_valid(state, psd_tol=1e-10):
    m = state.matrix
    assert np.max(np.abs(m - m.conj().T)) <= 1e-12
    assert abs(np.trace(m).real - 1) <= 1e-10
    assert np.linalg.eigvalsh(m)[0] >= -psd_tol


# ---- cutoff ----------------------------------------------------------------


@pytest.mark.parametrize("n_max", [0, 1, 2, 5, 40])
def test_cutoff_dimension(n_max):
    cut = FockCutoff(n_max)
    assert cut.dim == (n_max + 1) * (n_max + 2) // 2
    assert len(cut.basis()) == cut.dim
    for N in range(n_max + 1):
        s = cut.block_slice(N)
        assert s.stop - s.start == N + 1
        assert all(a + b == N for a, b in cut.basis()[s])


def test_cutoff_index_roundtrip():
    cut = FockCutoff(6)
    for i, (n1, n2) in enumerate(cut.basis()):
        assert cut.index(n1, n2) == i
    with pytest.raises(IndexError):
        cut.index(4, 3)
    with pytest.raises(ValueError):
        FockCutoff(-1)


# ---- coherent vectors ------------------------------------------------------


def test_coherent_vacuum_exact():
    v = coherent_vector(0, 10)
    assert np.array_equal(v, number_vector(0, 10))
    assert coherent_tail(0, 10) == 0.0


def test_coherent_gamma_one_matches_series():
    v = coherent_vector(1.0, 16)
    ref = oracles.coherent_series(1.0, 16)
    ref /= np.linalg.norm(ref)
    np.testing.assert_allclose(v, ref, atol=1e-15)
    # un-normalized amplitudes are e^{-1/2}/sqrt(n!) up to the tiny tail renormalization
    np.testing.assert_allclose(v[:5], [math.exp(-0.5) / math.sqrt(math.factorial(n)) for n in range(5)], rtol=1e-13)
    mean = np.dot(np.arange(17), np.abs(v) ** 2)
    assert abs(mean - 1.0) <= 1e-12


def test_coherent_tail_too_large():
    # Poisson(9) mass above 4, by direct summation, is ~0.98
    assert oracles.poisson_tail(9, 4) > 1e-10
    with pytest.raises(TailTooLarge) as exc:
        coherent_vector(3.0, 4)
    assert exc.value.tail == pytest.approx(oracles.poisson_tail(9, 4), rel=1e-12)


@pytest.mark.parametrize("gamma,n", [(1.0, 10), (0.5j, 6), (2 - 1j, 30)])
def test_coherent_tail_matches_direct_sum(gamma, n):
    assert coherent_tail(gamma, n) == pytest.approx(oracles.poisson_tail(abs(gamma) ** 2, n), rel=1e-9, abs=1e-300)


def test_tail_tolerance_override():
    v = coherent_vector(3.0, 20, tail_tol=1e-2)
    assert abs(np.linalg.norm(v) - 1) < 1e-15


# ---- product states -------------------------------------------------------


def test_product_vacuum():
    rho = product_state(number_vector(0, 5), number_vector(0, 5))
    nz = np.argwhere(np.abs(rho.matrix) > 0)
    assert nz.tolist() == [[0, 0]]
    assert_valid(rho)


def test_product_coherent_is_pure():
    rho = product_state(coherent_vector(1.0, 30), number_vector(0, 30))
    assert abs(rho.purity() - 1) <= 1e-10
    assert_valid(rho)


def test_product_number_states_single_block():
    rho = product_state(number_vector(1, 4), number_vector(1, 4))
    dist = rho.photon_distribution()
    assert dist[2] == pytest.approx(1.0)
    assert np.sum(dist) - dist[2] == 0.0


def test_product_vector_tail_check():
    with pytest.raises(TailTooLarge):
        product_vector(coherent_vector(2.0, 20, 1), coherent_vector(2.0, 20, 1), 20)


def test_two_mode_coherent_matches_rectangular_kron():
    m, n = 30, 30
    ref = np.kron(oracles.coherent_series(0.7, m), oracles.coherent_series(-0.4j, m))
    ref = oracles.rect_to_triangle(ref, m, n)
    ref /= np.linalg.norm(ref)
    np.testing.assert_allclose(two_mode_coherent_vector(0.7, -0.4j, n), ref, atol=1e-14)


# ---- mixtures -------------------------------------------------------------


def test_mixture_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        CoherentMixture(((0.5, 1.0), (0.4, 0.0)))
    with pytest.raises(ValueError):
        CoherentMixture(())


def test_mixture_single_vacuum_term():
    rho = mixture_state(CoherentMixture.coherent(0), 8)
    expected = np.zeros_like(rho.matrix)
    expected[0, 0] = 1
    np.testing.assert_array_equal(rho.matrix, expected)


def test_cat_mixture_odd_coherence_vanishes():
    rho = mixture_state(CoherentMixture(((0.5, 1.0), (0.5, -1.0))), 20)
    m1 = partial_trace(rho, 1)
    assert abs(m1.matrix[0, 1]) < 1e-16
    assert_valid(rho)


def test_mixture_mean_photons():
    rho = mixture_state(CoherentMixture(((0.5, 1.0), (0.5, 1j))), 25)
    n1 = lowering_operator(rho.cutoff, 1)
    assert abs(rho.expect(n1.conj().T @ n1).real - 1.0) <= 1e-10
    assert abs(rho.mean_photons() - 1.0) <= 1e-10


def test_signed_mixture_rejected_when_not_positive():
    # a bare negative coherent term far from the positive one cannot stay PSD
    bad = CoherentMixture(((1.5, 0.0), (-0.5, 2.0)))
    with pytest.raises(NotPositive):
        mixture_state(bad, 30)


def test_signed_mixture_accepted_when_positive():
    # a negative weight of 1e-10 leaves eigenvalues far inside the mixture tolerance
    mix = CoherentMixture(((1.0, 0.0), (-1e-10, 0.5), (1e-10, 0.6)))
    assert mix.is_signed
    rho = mixture_state(mix, 12)
    rho.validate(psd_tol=1e-8)


def test_gram_min_eig_matches_dense():
    from cavity_broadcast.fock import _mixture_min_eig

    rng = np.random.default_rng(3)
    V = np.column_stack([coherent_vector(g, 30) for g in 0.7 * (rng.normal(size=4) + 1j * rng.normal(size=4))])
    w = np.array([0.9, 0.4, -0.2, -0.1])
    dense = np.linalg.eigvalsh((V * w) @ V.conj().T)[0]
    assert _mixture_min_eig(V, w) == pytest.approx(dense, abs=1e-12)


def test_mixture_pruning():
    mix = CoherentMixture(((0.5, 1.0), (0.0, 2.0), (0.5, 1.0)))
    assert mix.pruned().terms == ((1.0, 1.0 + 0j),)


# ---- partial trace and metrics --------------------------------------------


def test_partial_trace_product():
    v = coherent_vector(1.0 + 0.5j, 30)
    rho = product_state(v, number_vector(0, 30))
    m1, m2 = partial_trace(rho, 1), partial_trace(rho, 2)
    assert trace_distance(m1, SingleModeState.from_vector(v)) <= 1e-12
    expected = np.zeros((31, 31))
    expected[0, 0] = 1
    assert trace_distance(m2, expected) <= 1e-12


def test_partial_trace_bell_like():
    cut = FockCutoff(3)
    psi = (two_mode_number_vector(0, 1, cut) + two_mode_number_vector(1, 0, cut)) / np.sqrt(2)
    rho = TwoModeState.from_vector(cut, psi)
    m1 = partial_trace(rho, 1)
    expected = np.diag([0.5, 0.5, 0, 0])
    np.testing.assert_allclose(m1.matrix, expected, atol=1e-15)


def test_partial_trace_matches_rectangular_reshape():
    m = 12
    rng = np.random.default_rng(0)
    X = rng.normal(size=(13 * 14 // 2, 4)) + 1j * rng.normal(size=(13 * 14 // 2, 4))
    rho = X @ X.conj().T
    rho /= np.trace(rho).real
    state = TwoModeState.from_matrix(m, rho)
    # scatter into rectangular (m+1)^2 space and reduce by reshape
    cut = state.cutoff
    idx = np.array([n1 * (m + 1) + n2 for n1, n2 in cut.basis()])
    R = np.zeros(((m + 1) ** 2,) * 2, dtype=complex)
    R[np.ix_(idx, idx)] = rho
    R4 = R.reshape(m + 1, m + 1, m + 1, m + 1)
    np.testing.assert_allclose(partial_trace(state, 1).matrix, np.einsum("ijkj->ik", R4), atol=1e-14)
    np.testing.assert_allclose(partial_trace(state, 2).matrix, np.einsum("jijk->ik", R4), atol=1e-14)


def test_metrics_basic():
    rho = mixture_state(CoherentMixture(((0.3, 1.0), (0.7, -0.2j))), 20)
    assert trace_distance(rho, rho) == 0.0
    assert fidelity_pure(number_vector(0, 3), SingleModeState.from_vector(number_vector(1, 3))) == 0.0
    psi = coherent_vector(0.4, 10)
    assert fidelity_pure(psi, SingleModeState.from_vector(psi)) == pytest.approx(1.0, abs=1e-14)


def test_coherent_overlap():
    ov = overlap(coherent_vector(1.0, 30), coherent_vector(0.0, 30))
    assert abs(abs(ov) ** 2 - math.exp(-1)) <= 1e-10
    # closed form |<g|d>|^2 = exp(-|g - d|^2), via the mpmath series oracle
    a, b = oracles.coherent_series(0.8 + 0.3j, 40), oracles.coherent_series(-0.2 + 0.5j, 40)
    assert abs(abs(np.vdot(a, b)) ** 2 - math.exp(-abs(1.0 - 0.2j) ** 2)) < 1e-14
    assert abs(abs(overlap(coherent_vector(0.8 + 0.3j, 40), coherent_vector(-0.2 + 0.5j, 40))) ** 2 - math.exp(-abs(1.0 - 0.2j) ** 2)) <= 1e-10


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        trace_distance(np.eye(2) / 2, np.eye(3) / 3)
    with pytest.raises(DimensionMismatch):
        overlap(np.ones(2), np.ones(3))
    with pytest.raises(DimensionMismatch):
        fidelity_pure(np.ones(2), np.eye(3) / 3)


def test_invalid_states_rejected():
    with pytest.raises(InvalidState):
        SingleModeState(1, np.array([[0.5, 0.1], [0.2, 0.5]]))
    with pytest.raises(InvalidState):
        SingleModeState(1, np.eye(2))
    with pytest.raises(NotPositive):
        TwoModeState.from_matrix(1, np.diag([1.5, -0.25, -0.25]))


def test_block_structure():
    rho = mixture_state(CoherentMixture.coherent(0.5), 6, tail_tol=1e-8)
    assert not rho.is_block_diagonal()
    assert len(rho.blocks) == 7
    assert rho.blocks[3].shape == (4, 4)
    assert (0, 1) in rho.cross_blocks()
    number = mixture_state(CoherentMixture(((0.5, 0.5), (0.5, -0.5))), 6, tail_tol=1e-8)
    diag = TwoModeState(number.cutoff, np.diag(np.diag(number.matrix)))
    assert diag.is_block_diagonal()
    assert diag.cross_blocks() == {}


# ---- JSON -----------------------------------------------------------------


def test_json_roundtrip(tmp_path):
    rho = mixture_state(CoherentMixture(((0.6, 1.0), (0.4, -0.5j))), 8, tail_tol=1e-5)
    path = tmp_path / "state.json"
    save_state(rho, path)
    data = json.loads(path.read_text())
    assert data["schema_version"] == 1
    assert data["n_max"] == 8
    assert len(data["blocks"]) == 9
    assert data["blocks"][1][0][1] == [rho.block(1)[0, 1].real, rho.block(1)[0, 1].imag]
    back = load_state(path)
    np.testing.assert_array_equal(back.matrix, rho.matrix)


def test_json_rejects_unknown_version():
    d = state_to_dict(mixture_state(CoherentMixture.coherent(0), 2))
    d["schema_version"] = 99
    with pytest.raises(InvalidState):
        state_from_dict(d)


# ---- properties -----------------------------------------------------------

amp = st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False)


@st.composite
def mixtures(draw, max_terms=4):
    k = draw(st.integers(1, max_terms))
    raw = draw(st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k))
    amps = draw(st.lists(amp, min_size=k, max_size=k))
    w = np.array(raw) / np.sum(raw)
    w[-1] = 1.0 - np.sum(w[:-1])
    return CoherentMixture(tuple(zip(w.tolist(), amps)))


@settings(max_examples=30, deadline=None)
@given(mixtures())
def test_mixture_state_invariants(mix):
    rho = mixture_state(mix, 24)
    assert_valid(rho)
    # photon number of the renormalized states differs from the ideal by tail-sized amounts
    assert abs(rho.mean_photons() - mix.mean_photons()) <= 1e-8
    for keep in (1, 2):
        m = partial_trace(rho, keep)
        assert abs(m.trace() - rho.trace()) <= 1e-12
        assert_valid(m)


small_amp = st.complex_numbers(max_magnitude=1.5, allow_nan=False, allow_infinity=False)


@settings(max_examples=30, deadline=None)
@given(small_amp, small_amp)
def test_partial_trace_of_product_is_exact(g1, g2):
    v1, v2 = coherent_vector(g1, 30), coherent_vector(g2, 30)
    rho = TwoModeState.from_vector(30, two_mode_coherent_vector(g1, g2, 30))
    # the triangle drops mass ~1e-14 here; coherences to the dropped levels
    # enter the trace distance at the square root of that
    assert trace_distance(partial_trace(rho, 1), SingleModeState.from_vector(v1)) <= 1e-6
    assert trace_distance(partial_trace(rho, 2), SingleModeState.from_vector(v2)) <= 1e-6
