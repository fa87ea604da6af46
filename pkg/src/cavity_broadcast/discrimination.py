"""Attenuation to the vacuum + one-photon subspace and unambiguous discrimination.

For strong attenuation (``A -> 0``) the mode-1 output of a coherent mixture is
dominated by ``|0>`` and ``|1>``:

    rho_A ~ [[1 - A^2 <|g|^2>, A <g>^*],
             [A <g>,           A^2 <|g|^2>]]

When ``<|g|^2> - |<g>|^2 = A^2 <|g|^2>^2`` this is (to leading order) the
projector onto ``|Phi> ~ |0> + A (<|g|^2> / <g>^*) |1>``, and two such states
can be told apart without error by a three-outcome POVM whose equal-prior
success probability is ``1 - |<Phi_sigma|Phi_rho>|``.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DimensionMismatch, InvalidState, InvalidTruncation, StatesIdentical, ZeroMeanAmplitude
from .fock import (
    DEFAULT_TAIL_TOL,
    CoherentMixture,
    SingleModeState,
    _check_density,
    annihilation,
    coherent_tail,
    mixture_single_mode,
)

logger = logging.getLogger(__name__)

IDENTICAL_TOL = 1e-12
ZERO_MEAN_TOL = 1e-12
# the "much less than" clause of the purity condition
MUCH_LESS_FRACTION = 0.01
SHARD_SIZE = 8192


class PurityWarning(UserWarning):
    """Input violates the purity condition; exact attenuated states are used."""


@dataclass(frozen=True)
class MomentSummary:
    mean_gamma: complex
    mean_abs2: float

    @property
    def variance(self) -> float:
        return self.mean_abs2 - abs(self.mean_gamma) ** 2


def moments(mix: CoherentMixture) -> MomentSummary:
    """``<g> = sum w_k g_k`` and ``<|g|^2> = sum w_k |g_k|^2``."""
    w, g = mix.weights, mix.amplitudes
    return MomentSummary(complex(np.dot(w, g)), float(np.dot(w, np.abs(g) ** 2)))


def operator_moments(state: SingleModeState) -> MomentSummary:
    """``tr(rho a)`` and ``tr(rho a^dag a)`` evaluated on a realized state."""
    a = annihilation(state.n_max)
    return MomentSummary(state.expect(a), state.expect(a.conj().T @ a).real)


@dataclass(frozen=True, eq=False)
class QubitState:
    """2x2 density matrix on ``span{|0>, |1>}``.

    Hermiticity and unit trace are enforced. Positivity is not: the leading
    order two-level matrix has a negative eigenvalue of order ``A^4`` for
    inputs close to a single coherent state.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise DimensionMismatch(f"qubit state must be 2x2, got {m.shape}")
        _check_density(m, "QubitState")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def purity(self) -> float:
        return float(np.vdot(self.matrix, self.matrix).real)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "QubitState":
        v = np.asarray(v, dtype=complex)
        v = v / np.linalg.norm(v)
        m = np.outer(v, v.conj())
        return cls(0.5 * (m + m.conj().T))


def attenuate_exact(mix: CoherentMixture, A: float, n_max: int, tail_tol: float = DEFAULT_TAIL_TOL) -> SingleModeState:
    """``sum_k w_k |A g_k><A g_k|`` on ``|0>..|n_max>``."""
    if not 0 < A <= 1:
        raise ValueError(f"A must lie in (0, 1], got {A}")
    return mixture_single_mode(mix.scaled(A), n_max, tail_tol)


def attenuate_two_level(ms: MomentSummary, A: float) -> QubitState:
    p1 = A**2 * ms.mean_abs2
    if p1 >= 1:
        raise InvalidTruncation(f"A^2 <|g|^2> = {p1:.3g} >= 1; the two-level form is meaningless")
    off = A * ms.mean_gamma
    return QubitState(np.array([[1 - p1, np.conj(off)], [off, p1]], dtype=complex))


def project_two_level(state: SingleModeState, renormalize: bool = False) -> np.ndarray:
    """Top-left 2x2 corner of a single-mode density matrix."""
    m = state.truncated(1)
    if renormalize:
        m = m / np.trace(m).real
    return m


def diagonal_term(mix: CoherentMixture, A: float, n: int) -> float:
    """``<n|rho_A|n> = sum_k w_k (A^2 |g_k|^2)^n exp(-A^2 |g_k|^2) / n!``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    x = A**2 * np.abs(mix.amplitudes) ** 2
    return float(np.dot(mix.weights, x**n * np.exp(-x)) / math.factorial(n))


class PurityCheck(NamedTuple):
    satisfied: bool
    variance: float
    threshold: float


def purity_condition(ms: MomentSummary, A: float, slack: float = 1.0) -> PurityCheck:
    """Order-of-magnitude test for the attenuated state being (nearly) pure.

    Satisfied when the amplitude variance does not exceed
    ``slack * A^2 <|g|^2>^2`` and that threshold is itself at most 1% of
    ``<|g|^2>``.
    """
    if ms.mean_abs2 <= 0:
        raise ValueError("<|g|^2> must be positive")
    variance = ms.variance
    threshold = A**2 * ms.mean_abs2**2
    # relative slack keeps A = 0.1, <|g|^2> = 1 on the right side of 1%
    small = threshold <= MUCH_LESS_FRACTION * ms.mean_abs2 * (1 + 1e-12)
    return PurityCheck(bool(variance <= threshold * slack and small), float(variance), float(threshold))


def _phi_raw(ms: MomentSummary, A: float) -> np.ndarray:
    if abs(ms.mean_gamma) <= ZERO_MEAN_TOL * max(1.0, math.sqrt(max(ms.mean_abs2, 0.0))):
        raise ZeroMeanAmplitude("<g> = 0: phase-symmetric input cannot be discriminated unambiguously")
    pre = math.sqrt(max(0.0, 1 - A**2 * ms.mean_abs2))
    return pre * np.array([1.0, A * ms.mean_abs2 / np.conj(ms.mean_gamma)], dtype=complex)


def phi_state(ms: MomentSummary, A: float) -> np.ndarray:
    """Unit vector proportional to ``|0> + A (<|g|^2> / <g>^*) |1>``."""
    v = _phi_raw(ms, A)
    return v / np.linalg.norm(v)


def phi_norm_residual(ms: MomentSummary, A: float) -> float:
    """``||Phi||^2 - 1`` of the unnormalized leading-order vector (order A^4)."""
    v = _phi_raw(ms, A)
    return float(np.vdot(v, v).real - 1.0)


def _perp(v: np.ndarray) -> np.ndarray:
    return np.array([-np.conj(v[1]), np.conj(v[0])])


@dataclass(frozen=True, eq=False)
class PovmTriple:
    E_rho: np.ndarray
    E_sigma: np.ndarray
    E_inconclusive: np.ndarray
    C_rho: float
    C_sigma: float
    overlap: float
    priors: tuple[float, float]
    success_probability: float

    @property
    def elements(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.E_rho, self.E_sigma, self.E_inconclusive

    def completeness_error(self) -> float:
        return float(np.max(np.abs(sum(self.elements) - np.eye(2))))

    def min_eigenvalues(self) -> tuple[float, float, float]:
        return tuple(float(np.linalg.eigvalsh(E)[0]) for E in self.elements)


def _success(s: float, priors, c_rho: float, c_sigma: float) -> float:
    return (1 - s**2) * (priors[0] * c_rho + priors[1] * c_sigma)


def _boundary_c_sigma(c_rho: float, s: float) -> float:
    # det(1 - C_rho P_sigma_perp - C_sigma P_rho_perp) = 0 for given C_rho
    return (1 - c_rho) / (1 - c_rho * (1 - s**2))


def build_povm(phi_rho: np.ndarray, phi_sigma: np.ndarray, priors: tuple[float, float] = (0.5, 0.5)) -> PovmTriple:
    """Optimal unambiguous discrimination POVM for two pure qubit states.

    Equal priors use ``C_rho = C_sigma = 1 / (1 + s)`` with
    ``s = |<Phi_sigma|Phi_rho>|``. Other priors maximize the average
    conclusive probability along the boundary ``det(E_?) = 0`` by a bounded
    one-dimensional search.
    """
    phi_rho = np.asarray(phi_rho, dtype=complex)
    phi_sigma = np.asarray(phi_sigma, dtype=complex)
    if phi_rho.shape != (2,) or phi_sigma.shape != (2,):
        raise DimensionMismatch("POVM vectors must have two components")
    for v in (phi_rho, phi_sigma):
        if abs(np.linalg.norm(v) - 1) > 1e-10:
            raise InvalidState("POVM vectors must be unit norm")
    p_rho, p_sigma = float(priors[0]), float(priors[1])
    if p_rho < 0 or p_sigma < 0 or abs(p_rho + p_sigma - 1) > 1e-12:
        raise ValueError("priors must be non-negative and sum to 1")
    s = float(min(1.0, abs(np.vdot(phi_sigma, phi_rho))))
    if 1 - s <= IDENTICAL_TOL:
        raise StatesIdentical(f"|<Phi_sigma|Phi_rho>| = {s!r}")

    if p_rho == p_sigma:
        c_rho = c_sigma = 1.0 / (1.0 + s)
    else:
        grid = np.linspace(0.0, 1.0, 2001)
        vals = [_success(s, (p_rho, p_sigma), c, _boundary_c_sigma(c, s)) for c in grid]
        k = int(np.argmax(vals))
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
        res = minimize_scalar(
            lambda c: -_success(s, (p_rho, p_sigma), c, _boundary_c_sigma(c, s)),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-13},
        )
        c_rho = float(res.x) if -res.fun >= vals[k] else float(grid[k])
        c_sigma = _boundary_c_sigma(c_rho, s)

    u_sigma, u_rho = _perp(phi_sigma), _perp(phi_rho)
    E_rho = c_rho * np.outer(u_sigma, u_sigma.conj())
    E_sigma = c_sigma * np.outer(u_rho, u_rho.conj())
    E_inc = np.eye(2) - E_rho - E_sigma
    return PovmTriple(
        E_rho=E_rho,
        E_sigma=E_sigma,
        E_inconclusive=0.5 * (E_inc + E_inc.conj().T),
        C_rho=float(c_rho),
        C_sigma=float(c_sigma),
        overlap=s,
        priors=(p_rho, p_sigma),
        success_probability=_success(s, (p_rho, p_sigma), c_rho, c_sigma),
    )


def born_probabilities(povm: PovmTriple, state) -> np.ndarray:
    """``[p(rho), p(sigma), p(?)]`` for a 2x2 density matrix or unit vector."""
    m = state.matrix if isinstance(state, QubitState) else np.asarray(state, dtype=complex)
    if m.ndim == 1:
        m = np.outer(m, m.conj())
    p = np.array([np.trace(E @ m).real for E in povm.elements])
    p = np.clip(p, 0.0, None)
    return p / p.sum()


@dataclass
class ExperimentReport:
    seed: int
    n_samples: int
    counts: dict
    analytic: dict
    empirical: dict
    inputs: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "inputs": self.inputs,
            "seed": self.seed,
            "n_samples": self.n_samples,
            "counts": self.counts,
            "analytic": self.analytic,
            "empirical": self.empirical,
            "notes": self.notes,
        }


def _run_shard(child: np.random.SeedSequence, m: int, p_true_rho: float, probs_rho, probs_sigma) -> np.ndarray:
    rng = np.random.default_rng(child)
    truth_rho = rng.random(m) < p_true_rho
    u = rng.random(m)
    cum = np.where(truth_rho[:, None], np.cumsum(probs_rho)[None, :], np.cumsum(probs_sigma)[None, :])
    outcome = np.minimum((u[:, None] >= cum).sum(axis=1), 2)
    # counts: outcome rho, outcome sigma, inconclusive, errors, truth rho
    errors = np.sum((outcome == 0) & ~truth_rho) + np.sum((outcome == 1) & truth_rho)
    return np.array(
        [np.sum(outcome == 0), np.sum(outcome == 1), np.sum(outcome == 2), errors, np.sum(truth_rho)],
        dtype=np.int64,
    )


def run_povm_experiment(
    povm: PovmTriple,
    state_rho,
    state_sigma,
    n_samples: int,
    seed: int,
    workers: int = 1,
    shard_size: int = SHARD_SIZE,
) -> ExperimentReport:
    """Sample true states by the POVM priors and outcomes by the Born rule.

    Samples are split into fixed-size shards, each driven by its own child of
    ``SeedSequence(seed)``; the counts therefore do not depend on ``workers``.
    """
    if n_samples < 0:
        raise ValueError("n_samples must be >= 0")
    probs_rho = born_probabilities(povm, state_rho)
    probs_sigma = born_probabilities(povm, state_sigma)
    sizes = [shard_size] * (n_samples // shard_size)
    if n_samples % shard_size:
        sizes.append(n_samples % shard_size)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    args = [(c, m, povm.priors[0], probs_rho, probs_sigma) for c, m in zip(children, sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda a: _run_shard(*a), args))
    else:
        parts = [_run_shard(*a) for a in args]
    tot = np.sum(parts, axis=0) if parts else np.zeros(5, dtype=np.int64)
    n_rho, n_sigma, n_inc, n_err, n_truth_rho = (int(x) for x in tot)
    n = max(n_samples, 1)
    analytic_error = povm.priors[0] * probs_rho[1] + povm.priors[1] * probs_sigma[0]
    analytic_success = povm.priors[0] * probs_rho[0] + povm.priors[1] * probs_sigma[1]
    return ExperimentReport(
        seed=int(seed),
        n_samples=int(n_samples),
        counts={
            "rho": n_rho,
            "sigma": n_sigma,
            "inconclusive": n_inc,
            "errors": n_err,
            "true_rho": n_truth_rho,
        },
        analytic={
            "s": povm.overlap,
            "pmax": povm.success_probability,
            "success_probability": float(analytic_success),
            "error_probability": float(analytic_error),
            "C_rho": povm.C_rho,
            "C_sigma": povm.C_sigma,
        },
        empirical={
            "success_rate": (n_rho + n_sigma - n_err) / n,
            "error_rate": n_err / n,
            "inconclusive_rate": n_inc / n,
        },
    )


def _exact_cutoff(mix: CoherentMixture, A: float, tail_tol: float) -> int:
    n = 4
    while coherent_tail(A * mix.max_amplitude(), n) > tail_tol:
        n += 1
    return n


def run_discrimination_experiment(
    mix_rho: CoherentMixture,
    mix_sigma: CoherentMixture,
    A: float,
    n_samples: int,
    seed: int,
    workers: int = 1,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> ExperimentReport:
    """Attenuate both inputs, build the equal-prior POVM and sample it.

    When an input fails :func:`purity_condition`, its true state is the exact
    attenuated state cut to ``{|0>, |1>}`` and renormalized, and a
    :class:`PurityWarning` is issued; otherwise the pure ``|Phi>`` is used.
    """
    ms_rho, ms_sigma = moments(mix_rho), moments(mix_sigma)
    phi_rho, phi_sigma = phi_state(ms_rho, A), phi_state(ms_sigma, A)
    povm = build_povm(phi_rho, phi_sigma)

    checks = {}
    states = {}
    notes = []
    for name, mix, ms, phi in (("rho", mix_rho, ms_rho, phi_rho), ("sigma", mix_sigma, ms_sigma, phi_sigma)):
        chk = purity_condition(ms, A)
        checks[name] = chk._asdict()
        if chk.satisfied:
            states[name] = phi
        else:
            msg = f"{name}: purity condition fails (variance {chk.variance:.3g} vs {chk.threshold:.3g})"
            warnings.warn(msg + "; sampling the exact attenuated state", PurityWarning, stacklevel=2)
            notes.append(msg)
            exact = attenuate_exact(mix, A, _exact_cutoff(mix, A, tail_tol), tail_tol)
            states[name] = project_two_level(exact, renormalize=True)

    report = run_povm_experiment(povm, states["rho"], states["sigma"], n_samples, seed, workers)
    report.inputs = {
        "rho": mix_rho.to_list(),
        "sigma": mix_sigma.to_list(),
        "A": float(A),
        "purity_condition": checks,
    }
    report.notes = notes
    return report
