"""Raman pump channel: one atom crosses the cavity, then is traced out.

Field and atom evolve under ``U(tau) = exp(-i H tau)`` (hbar = 1) with

    H = g [ a1 a2^dag |2><1| + a1^dag a2 |1><2| ]
      + g [ s1 a1^dag a1 |1><1| + s2 a2^dag a2 |2><2| ]      (Stark terms)

and ``s1 = 1/r``, ``s2 = r`` when Stark terms are switched on. With these
coefficients ``H = (g/r) L^dag L`` where ``L = a1 (x) |e><1| + r a2 (x) |e><2|``
for an auxiliary level ``|e>``, so a product state ``psi (x) (alpha|1> + beta|2>)``
with ``(alpha a1 + beta r a2) psi = 0`` is annihilated by H. Those ``psi`` are
exactly the analytic steady states built by :func:`analytic_steady_state`.
Without Stark terms the exchange term alone has no such dark states beyond
the vacuum.

H conserves ``n1 + n2`` and couples ``|n1, n2, 1>`` to ``|n1 - 1, n2 + 1, 2>``,
so each photon-number block of the field together with the two atomic levels
is exponentiated on its own.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from math import comb

import numpy as np

from .beamsplitter import ATOM_NORM_TOL
from .errors import DegenerateSeed, DimensionMismatch, NotConverged
from .fock import FockCutoff, TwoModeState, apply_blockwise, conjugate_blockwise, trace_distance

logger = logging.getLogger(__name__)

KRAUS_TOL = 1e-10
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 10_000


@dataclass(frozen=True)
class RamanHamiltonianConfig:
    g: float = 1.0
    r: float = 1.0
    tau: float = 1.0
    include_stark: bool = True

    def __post_init__(self):
        if self.g <= 0:
            raise ValueError("g must be positive")
        if self.r <= 0:
            raise ValueError("r must be positive")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")

    @property
    def stark(self) -> tuple[float, float]:
        """Stark coefficients ``(s1, s2)``; zero when disabled."""
        if not self.include_stark:
            return 0.0, 0.0
        return 1.0 / self.r, self.r

    def to_dict(self) -> dict:
        return asdict(self)


def hamiltonian_block(config: RamanHamiltonianConfig, N: int) -> np.ndarray:
    """H on the N-photon field block tensored with the atom.

    Ordering: atom level 1 first (field offsets ``j = 0..N``), then level 2.
    Field state ``|N - j, j>`` sits at offset ``j``.
    """
    d = N + 1
    H = np.zeros((2 * d, 2 * d), dtype=complex)
    j = np.arange(N)
    # a1 a2^dag |2><1| : |N-j, j, 1> -> sqrt((N-j)(j+1)) |N-j-1, j+1, 2>
    c = config.g * np.sqrt((N - j) * (j + 1.0))
    H[d + j + 1, j] = c
    H[j, d + j + 1] = c
    s1, s2 = config.stark
    jj = np.arange(d)
    H[jj, jj] = config.g * s1 * (N - jj)
    H[d + jj, d + jj] = config.g * s2 * jj
    return H


def _propagator(H: np.ndarray, t: float) -> np.ndarray:
    w, V = np.linalg.eigh(H)
    return (V * np.exp(-1j * w * t)) @ V.conj().T


@dataclass(frozen=True, eq=False)
class RamanChannel:
    """Kraus pair ``K_j = <j| U(tau) |alpha, beta>``, stored block by block."""

    config: RamanHamiltonianConfig
    alpha: complex
    beta: complex
    n_max: int
    kraus_blocks: tuple[tuple[np.ndarray, ...], tuple[np.ndarray, ...]] = field(repr=False)

    @property
    def cutoff(self) -> FockCutoff:
        return FockCutoff(self.n_max)

    def kraus(self) -> list[np.ndarray]:
        """Dense ``[K1, K2]`` on the triangular field space."""
        cut = self.cutoff
        out = []
        for blocks in self.kraus_blocks:
            K = np.zeros((cut.dim, cut.dim), dtype=complex)
            for N, b in enumerate(blocks):
                s = cut.block_slice(N)
                K[s, s] = b
            out.append(K)
        return out

    def completeness_error(self) -> float:
        err = 0.0
        for K1, K2 in zip(*self.kraus_blocks):
            S = K1.conj().T @ K1 + K2.conj().T @ K2
            err = max(err, float(np.max(np.abs(S - np.eye(len(S))))))
        return err


def build_channel(config: RamanHamiltonianConfig, atom: tuple[complex, complex], n_max: int) -> RamanChannel:
    alpha, beta = complex(atom[0]), complex(atom[1])
    norm = abs(alpha) ** 2 + abs(beta) ** 2
    if abs(norm - 1.0) > ATOM_NORM_TOL:
        raise ValueError(f"atom state not normalized: |alpha|^2 + |beta|^2 = {norm!r}")
    FockCutoff(n_max)
    k1, k2 = [], []
    for N in range(n_max + 1):
        d = N + 1
        U = _propagator(hamiltonian_block(config, N), config.tau)
        # columns: atom |1> then |2>; contract with the injected atom state
        cols = alpha * U[:, :d] + beta * U[:, d:]
        k1.append(cols[:d])
        k2.append(cols[d:])
    ch = RamanChannel(config, alpha, beta, int(n_max), (tuple(k1), tuple(k2)))
    err = ch.completeness_error()
    if err > KRAUS_TOL:
        raise ArithmeticError(f"Kraus completeness error {err:.2e}")
    return ch


def apply_channel(ch: RamanChannel, rho: TwoModeState) -> TwoModeState:
    """``K1 rho K1^dag + K2 rho K2^dag``."""
    if rho.n_max != ch.n_max:
        raise DimensionMismatch(f"state n_max {rho.n_max} vs channel n_max {ch.n_max}")
    out = sum(conjugate_blockwise(blocks, rho.matrix, rho.cutoff) for blocks in ch.kraus_blocks)
    return TwoModeState(rho.cutoff, 0.5 * (out + out.conj().T))


@dataclass
class SteadyStateResult:
    state: TwoModeState
    n_iters: int
    converged: bool
    step_distances: list[float]

    def __iter__(self):
        return iter((self.state, self.n_iters, self.converged))


def iterate_to_steady(
    ch: RamanChannel,
    rho0: TwoModeState,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    raise_on_failure: bool = True,
) -> SteadyStateResult:
    """Inject atoms one at a time until successive field states agree.

    Stops at the first ``l`` with ``D(rho_l, rho_{l-1}) <= tol`` (trace
    distance) and returns ``rho_l``. ``n_iters`` counts channel applications.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rho = rho0
    history: list[float] = []
    for it in range(1, max_iter + 1):
        nxt = apply_channel(ch, rho)
        dist = trace_distance(nxt, rho)
        history.append(dist)
        rho = nxt
        if dist <= tol:
            logger.info("steady state after %d atoms (step distance %.2e)", it, dist)
            return SteadyStateResult(rho, it, True, history)
    if raise_on_failure:
        raise NotConverged(rho, history[-1], max_iter)
    return SteadyStateResult(rho, max_iter, False, history)


@dataclass(frozen=True)
class SteadyStateSpec:
    seed_coeffs: tuple[complex, ...]
    kappa: complex


def coherent_seed(gamma: complex, kappa: complex, n_max: int) -> tuple[complex, ...]:
    """Seed ``C_{n,0}`` whose steady state is ``|A gamma>|-kappa A gamma>``.

    ``C_{n,0} = (A gamma)^n / sqrt(n!)`` up to normalization, with
    ``A = 1 / sqrt(1 + |kappa|^2)``.
    """
    a = complex(gamma) / np.sqrt(1.0 + abs(complex(kappa)) ** 2)
    c = [1.0 + 0j]
    for n in range(1, n_max + 1):
        c.append(c[-1] * a / np.sqrt(n))
    return tuple(c)


def analytic_steady_state(spec: SteadyStateSpec, n_max: int) -> np.ndarray:
    """Field vector ``C_{n1,n2} = (-kappa)^n2 sqrt(C(N, n2)) C_{N,0}``, normalized."""
    seed = np.zeros(n_max + 1, dtype=complex)
    given = np.asarray(spec.seed_coeffs, dtype=complex)[: n_max + 1]
    seed[: len(given)] = given
    if not np.any(seed):
        raise DegenerateSeed("all seed coefficients are zero")
    cut = FockCutoff(n_max)
    kappa = complex(spec.kappa)
    psi = np.empty(cut.dim, dtype=complex)
    for N in range(n_max + 1):
        j = np.arange(N + 1)
        binom = np.array([comb(N, int(k)) for k in j], dtype=float)
        psi[cut.block_slice(N)] = (-kappa) ** j * np.sqrt(binom) * seed[N]
    return psi / np.linalg.norm(psi)


def dark_state_residual(ch: RamanChannel, psi: np.ndarray) -> float:
    """``|| U(tau) (psi (x) atom) - psi (x) atom ||``; zero for a dark state."""
    cut = ch.cutoff
    total = 0.0
    for N in range(ch.n_max + 1):
        s = cut.block_slice(N)
        v = np.concatenate([ch.alpha * psi[s], ch.beta * psi[s]])
        U = _propagator(hamiltonian_block(ch.config, N), ch.config.tau)
        total += float(np.linalg.norm(U @ v - v) ** 2)
    return float(np.sqrt(total))


def fixed_point_residual(ch: RamanChannel, psi: np.ndarray) -> float:
    """Trace distance between ``|psi><psi|`` and its image under the channel."""
    rho = TwoModeState.from_vector(ch.cutoff, psi)
    return trace_distance(apply_channel(ch, rho), rho)


def apply_kraus_vector(ch: RamanChannel, psi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(K1 psi, K2 psi)``."""
    cut = ch.cutoff
    return tuple(apply_blockwise(blocks, psi, cut) for blocks in ch.kraus_blocks)
