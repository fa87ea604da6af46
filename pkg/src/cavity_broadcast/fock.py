"""Truncated two-mode Fock space organised by total photon number.

The two-mode basis is ``{|n1, n2> : n1 + n2 <= n_max}``. States with the same
total photon number ``N = n1 + n2`` form a block of size ``N + 1``; inside a
block the state ``|N - j, j>`` sits at offset ``j`` (so ``j`` is the mode-2
occupation) and blocks are laid out in order of increasing ``N``. Every
photon-number-conserving operator is block diagonal in this layout.

Density matrices are kept as one dense array in that layout. The diagonal
blocks are views into it; the off-diagonal (cross) blocks are only non-zero
for states that superpose different photon numbers, e.g. coherent states.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.special import gammainc

from .errors import DimensionMismatch, InvalidState, NotPositive, TailTooLarge

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
WEIGHT_SUM_TOL = 1e-12
DEFAULT_TAIL_TOL = 1e-10
# signed mixtures are rejected only below this eigenvalue
MIXTURE_PSD_TOL = 1e-8

STATE_SCHEMA = "cavity-broadcast/two-mode-state"
STATE_SCHEMA_VERSION = 1


# --------------------------------------------------------------------------
# basis bookkeeping
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FockCutoff:
    """Triangular truncation ``n1 + n2 <= n_max`` of the two-mode Fock space."""

    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 0:
            raise ValueError(f"n_max must be a non-negative integer, got {self.n_max!r}")
        object.__setattr__(self, "n_max", int(self.n_max))

    @property
    def dim(self) -> int:
        return (self.n_max + 1) * (self.n_max + 2) // 2

    @property
    def n_blocks(self) -> int:
        return self.n_max + 1

    @staticmethod
    def block_start(N: int) -> int:
        return N * (N + 1) // 2

    def block_slice(self, N: int) -> slice:
        if not 0 <= N <= self.n_max:
            raise IndexError(f"block {N} outside 0..{self.n_max}")
        start = self.block_start(N)
        return slice(start, start + N + 1)

    def index(self, n1: int, n2: int) -> int:
        """Position of ``|n1, n2>`` in the flat basis."""
        if n1 < 0 or n2 < 0 or n1 + n2 > self.n_max:
            raise IndexError(f"|{n1},{n2}> outside cutoff n_max={self.n_max}")
        return self.block_start(n1 + n2) + n2

    @cached_property
    def n1(self) -> np.ndarray:
        return self.total - self.n2

    @cached_property
    def n2(self) -> np.ndarray:
        return np.concatenate([np.arange(N + 1) for N in range(self.n_max + 1)])

    @cached_property
    def total(self) -> np.ndarray:
        return np.concatenate([np.full(N + 1, N) for N in range(self.n_max + 1)])

    def basis(self) -> list[tuple[int, int]]:
        return [(int(a), int(b)) for a, b in zip(self.n1, self.n2)]


def _as_cutoff(cutoff: Union[FockCutoff, int]) -> FockCutoff:
    return cutoff if isinstance(cutoff, FockCutoff) else FockCutoff(cutoff)


# --------------------------------------------------------------------------
# density operators
# --------------------------------------------------------------------------


def _check_density(matrix: np.ndarray, what: str) -> None:
    asym = np.max(np.abs(matrix - matrix.conj().T)) if matrix.size else 0.0
    if asym > HERMITIAN_TOL:
        raise InvalidState(f"{what} is not Hermitian (max asymmetry {asym:.2e})")
    tr = np.trace(matrix).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise InvalidState(f"{what} trace is {tr!r}, expected 1")


def _hermitian_part(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.conj().T)


class _Density:
    """Shared helpers; subclasses store a Hermitian unit-trace ``matrix``."""

    matrix: np.ndarray

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def purity(self) -> float:
        m = self.matrix
        return float(np.vdot(m, m).real)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues()[0])

    def entropy(self) -> float:
        """Von Neumann entropy in nats."""
        ev = self.eigenvalues()
        ev = ev[ev > 1e-15]
        return float(-np.sum(ev * np.log(ev)))

    def validate(self, psd_tol: float = PSD_TOL) -> float:
        """Run the full Hermitian / trace / positivity check; return min eigenvalue."""
        _check_density(self.matrix, type(self).__name__)
        lam = self.min_eigenvalue()
        if lam < -psd_tol:
            raise NotPositive(lam, psd_tol)
        return lam

    def expect(self, op: np.ndarray) -> complex:
        """``tr(rho op)``."""
        if op.shape != self.matrix.shape:
            raise DimensionMismatch(f"operator {op.shape} vs state {self.matrix.shape}")
        return complex(np.sum(self.matrix.T * op))


@dataclass(frozen=True, eq=False)
class SingleModeState(_Density):
    """Density matrix of one mode on ``|0>..|n_max>``."""

    n_max: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (self.n_max + 1, self.n_max + 1):
            raise DimensionMismatch(f"expected {(self.n_max + 1,) * 2}, got {m.shape}")
        _check_density(m, "SingleModeState")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_vector(cls, psi: np.ndarray) -> "SingleModeState":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(len(psi) - 1, _hermitian_part(np.outer(psi, psi.conj())))

    def photon_distribution(self) -> np.ndarray:
        return np.diag(self.matrix).real.copy()

    def mean_photons(self) -> float:
        return float(np.dot(np.arange(self.n_max + 1), np.diag(self.matrix).real))

    def truncated(self, n: int) -> np.ndarray:
        """Raw top-left ``(n+1)x(n+1)`` corner (not renormalized)."""
        return self.matrix[: n + 1, : n + 1].copy()


@dataclass(frozen=True, eq=False)
class TwoModeState(_Density):
    """Two-mode density matrix in the block layout of :class:`FockCutoff`.

    The plain constructor checks Hermiticity and trace only. Use
    :meth:`from_matrix` for untrusted input; it also checks positivity.
    Routes that preserve positivity by construction (unitary conjugation,
    Kraus maps, non-negative mixtures) skip the eigenvalue solve.
    """

    cutoff: FockCutoff
    matrix: np.ndarray

    def __post_init__(self):
        cutoff = _as_cutoff(self.cutoff)
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (cutoff.dim, cutoff.dim):
            raise DimensionMismatch(f"expected {(cutoff.dim,) * 2}, got {m.shape}")
        _check_density(m, "TwoModeState")
        m.flags.writeable = False
        object.__setattr__(self, "cutoff", cutoff)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_matrix(cls, cutoff, matrix, psd_tol: float = PSD_TOL) -> "TwoModeState":
        state = cls(cutoff, matrix)
        state.validate(psd_tol)
        return state

    @classmethod
    def from_vector(cls, cutoff, psi: np.ndarray) -> "TwoModeState":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(cutoff, _hermitian_part(np.outer(psi, psi.conj())))

    @classmethod
    def from_blocks(cls, cutoff, blocks: Sequence[np.ndarray], cross_blocks=None) -> "TwoModeState":
        """Assemble from diagonal blocks and an optional ``{(N, M): block}`` map (N < M)."""
        cutoff = _as_cutoff(cutoff)
        if len(blocks) != cutoff.n_blocks:
            raise DimensionMismatch(f"need {cutoff.n_blocks} blocks, got {len(blocks)}")
        m = np.zeros((cutoff.dim, cutoff.dim), dtype=complex)
        for N, b in enumerate(blocks):
            s = cutoff.block_slice(N)
            m[s, s] = b
        for (N, M), b in (cross_blocks or {}).items():
            if N == M:
                raise ValueError("cross block must couple different sectors")
            m[cutoff.block_slice(N), cutoff.block_slice(M)] = b
            m[cutoff.block_slice(M), cutoff.block_slice(N)] = np.asarray(b).conj().T
        return cls.from_matrix(cutoff, m)

    @property
    def n_max(self) -> int:
        return self.cutoff.n_max

    @property
    def blocks(self) -> list[np.ndarray]:
        return [self.block(N) for N in range(self.cutoff.n_blocks)]

    def block(self, N: int, M: int | None = None) -> np.ndarray:
        M = N if M is None else M
        return self.matrix[self.cutoff.block_slice(N), self.cutoff.block_slice(M)]

    def cross_blocks(self, atol: float = 0.0) -> dict[tuple[int, int], np.ndarray]:
        """Off-diagonal sector couplings with N < M whose largest entry exceeds ``atol``."""
        out = {}
        for N in range(self.cutoff.n_blocks):
            for M in range(N + 1, self.cutoff.n_blocks):
                b = self.block(N, M)
                if np.max(np.abs(b)) > atol:
                    out[(N, M)] = b
        return out

    def is_block_diagonal(self, atol: float = 1e-14) -> bool:
        off = self.matrix.copy()
        for N in range(self.cutoff.n_blocks):
            s = self.cutoff.block_slice(N)
            off[s, s] = 0
        return bool(np.max(np.abs(off), initial=0.0) <= atol)

    def photon_distribution(self) -> np.ndarray:
        """``tr(rho Pi_N)`` for each total photon number N."""
        d = np.diag(self.matrix).real
        return np.bincount(self.cutoff.total, weights=d, minlength=self.cutoff.n_blocks)

    def mean_photons(self, mode: int | None = None) -> float:
        """Mean photon number of mode 1, mode 2, or both (``mode=None``)."""
        counts = {None: self.cutoff.total, 1: self.cutoff.n1, 2: self.cutoff.n2}[mode]
        return float(np.dot(counts, np.diag(self.matrix).real))


State = Union[TwoModeState, SingleModeState, np.ndarray]


def _matrix(x) -> np.ndarray:
    return x.matrix if isinstance(x, _Density) else np.asarray(x, dtype=complex)


# --------------------------------------------------------------------------
# vectors
# --------------------------------------------------------------------------


def coherent_tail(gamma: complex, n_max: int) -> float:
    """Poisson mass ``P(n > n_max)`` of ``|gamma>`` that the cutoff discards."""
    mu = abs(gamma) ** 2
    return 0.0 if mu == 0 else float(gammainc(n_max + 1, mu))


def _coherent_amplitudes(gamma: complex, n_max: int) -> np.ndarray:
    c = np.empty(n_max + 1, dtype=complex)
    c[0] = np.exp(-0.5 * abs(gamma) ** 2)
    for n in range(1, n_max + 1):
        c[n] = c[n - 1] * gamma / np.sqrt(n)
    return c


def coherent_vector(gamma: complex, n_max: int, tail_tol: float = DEFAULT_TAIL_TOL) -> np.ndarray:
    """Coherent state ``|gamma>`` on ``|0>..|n_max>``, renormalized after truncation.

    Raises :class:`TailTooLarge` when the discarded mass exceeds ``tail_tol``.
    The discarded mass itself is available from :func:`coherent_tail`.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    tail = coherent_tail(gamma, n_max)
    if tail > tail_tol:
        raise TailTooLarge(tail, tail_tol, f"coherent state gamma={complex(gamma):.4g}")
    c = _coherent_amplitudes(complex(gamma), n_max)
    logger.debug("coherent gamma=%s n_max=%d tail=%.3e", gamma, n_max, tail)
    return c / np.linalg.norm(c)


def number_vector(n: int, n_max: int) -> np.ndarray:
    v = np.zeros(n_max + 1, dtype=complex)
    v[n] = 1.0
    return v


def two_mode_number_vector(n1: int, n2: int, cutoff) -> np.ndarray:
    cutoff = _as_cutoff(cutoff)
    v = np.zeros(cutoff.dim, dtype=complex)
    v[cutoff.index(n1, n2)] = 1.0
    return v


def _pad(v: np.ndarray, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if len(v) > n:
        return v[:n]
    return np.concatenate([v, np.zeros(n - len(v), dtype=complex)])


def product_vector(mode1, mode2, n_max: int | None = None, tail_tol: float = DEFAULT_TAIL_TOL) -> np.ndarray:
    """Tensor product restricted to ``n1 + n2 <= n_max`` and renormalized."""
    mode1 = np.asarray(mode1, dtype=complex)
    mode2 = np.asarray(mode2, dtype=complex)
    if n_max is None:
        n_max = max(len(mode1), len(mode2)) - 1
    cutoff = FockCutoff(n_max)
    full = np.linalg.norm(mode1) ** 2 * np.linalg.norm(mode2) ** 2
    a, b = _pad(mode1, n_max + 1), _pad(mode2, n_max + 1)
    psi = a[cutoff.n1] * b[cutoff.n2]
    kept = np.linalg.norm(psi) ** 2
    tail = max(0.0, 1.0 - kept / full)
    if tail > tail_tol:
        raise TailTooLarge(tail, tail_tol, "product state")
    return psi / np.sqrt(kept)


def two_mode_coherent_vector(
    gamma1: complex, gamma2: complex, n_max: int, tail_tol: float = DEFAULT_TAIL_TOL
) -> np.ndarray:
    """``|gamma1> (x) |gamma2>`` truncated by total photon number.

    The total photon number of a product coherent state is Poissonian with
    mean ``|gamma1|^2 + |gamma2|^2``, which gives the discarded mass exactly.
    """
    tail = coherent_tail(np.sqrt(abs(gamma1) ** 2 + abs(gamma2) ** 2), n_max)
    if tail > tail_tol:
        raise TailTooLarge(tail, tail_tol, "two-mode coherent state")
    cutoff = FockCutoff(n_max)
    psi = _coherent_amplitudes(complex(gamma1), n_max)[cutoff.n1] * _coherent_amplitudes(
        complex(gamma2), n_max
    )[cutoff.n2]
    return psi / np.linalg.norm(psi)


def product_state(mode1, mode2, n_max: int | None = None, tail_tol: float = DEFAULT_TAIL_TOL) -> TwoModeState:
    psi = product_vector(mode1, mode2, n_max, tail_tol)
    n = max(len(mode1), len(mode2)) - 1 if n_max is None else n_max
    return TwoModeState.from_vector(FockCutoff(n), psi)


# --------------------------------------------------------------------------
# coherent-state mixtures
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CoherentMixture:
    """Finite discretisation ``sum_k w_k |gamma_k><gamma_k|`` of a P-function.

    Weights must sum to one but may be negative; positivity of the realized
    density matrix is checked when it is built at a cutoff.
    """

    terms: tuple[tuple[float, complex], ...]

    def __post_init__(self):
        terms = tuple((float(w), complex(g)) for w, g in self.terms)
        if not terms:
            raise ValueError("mixture needs at least one term")
        ws = np.array([w for w, _ in terms])
        if not np.all(np.isfinite(ws)) or not all(np.isfinite(g) for _, g in terms):
            raise ValueError("non-finite weight or amplitude")
        if abs(ws.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {ws.sum()!r}, expected 1")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def coherent(cls, gamma: complex) -> "CoherentMixture":
        return cls(((1.0, gamma),))

    @classmethod
    def uniform(cls, amplitudes: Iterable[complex]) -> "CoherentMixture":
        amps = list(amplitudes)
        return cls(tuple((1.0 / len(amps), g) for g in amps))

    @classmethod
    def phase_symmetric(cls, radius: float, n_points: int, offset: float = 0.0) -> "CoherentMixture":
        """Equal-weight ring of ``n_points`` amplitudes; its mean amplitude vanishes."""
        phases = offset + 2 * np.pi * np.arange(n_points) / n_points
        return cls.uniform(radius * np.exp(1j * phases))

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.terms])

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([g for _, g in self.terms], dtype=complex)

    @property
    def is_signed(self) -> bool:
        return bool(np.any(self.weights < 0))

    def __len__(self) -> int:
        return len(self.terms)

    def scaled(self, factor: complex) -> "CoherentMixture":
        return CoherentMixture(tuple((w, factor * g) for w, g in self.terms))

    def pruned(self, atol: float = 0.0) -> "CoherentMixture":
        """Merge repeated amplitudes and drop terms with ``|w| <= atol``."""
        merged: dict[complex, float] = {}
        for w, g in self.terms:
            merged[g] = merged.get(g, 0.0) + w
        kept = tuple((w, g) for g, w in merged.items() if abs(w) > atol)
        return CoherentMixture(kept)

    def mean_photons(self) -> float:
        return float(np.dot(self.weights, np.abs(self.amplitudes) ** 2))

    def max_amplitude(self) -> float:
        return float(np.max(np.abs(self.amplitudes)))

    def to_list(self) -> list:
        return [[w, [g.real, g.imag]] for w, g in self.terms]

    @classmethod
    def from_list(cls, data) -> "CoherentMixture":
        return cls(tuple((w, complex(*g) if isinstance(g, (list, tuple)) else complex(g)) for w, g in data))


def _mixture_min_eig(vectors: np.ndarray, weights: np.ndarray) -> float:
    """Smallest eigenvalue of ``V diag(w) V^dagger`` via the K x K Gram matrix.

    ``V W V^dagger`` and ``G^1/2 W G^1/2`` (``G = V^dagger V``) share their
    non-zero spectrum; the remaining eigenvalues are zero.
    """
    gram = vectors.conj().T @ vectors
    ev, U = np.linalg.eigh(gram)
    root = (U * np.sqrt(np.clip(ev, 0, None))) @ U.conj().T
    small = root @ np.diag(weights) @ root
    lam = np.linalg.eigvalsh(_hermitian_part(small))
    rank_deficient = vectors.shape[0] > vectors.shape[1]
    return float(min(lam[0], 0.0) if rank_deficient else lam[0])


def mixture_single_mode(
    mix: CoherentMixture, n_max: int, tail_tol: float = DEFAULT_TAIL_TOL, psd_tol: float = MIXTURE_PSD_TOL
) -> SingleModeState:
    """Realize ``sum_k w_k |gamma_k><gamma_k|`` on one mode."""
    V = np.column_stack([coherent_vector(g, n_max, tail_tol) for g in mix.amplitudes])
    w = mix.weights
    if mix.is_signed:
        lam = _mixture_min_eig(V, w)
        if lam < -psd_tol:
            raise NotPositive(lam, psd_tol)
    rho = (V * w) @ V.conj().T
    return SingleModeState(n_max, _hermitian_part(rho))


def embed_mode1(single: SingleModeState | np.ndarray, cutoff=None) -> TwoModeState:
    """``rho (x) |0><0|`` with mode 2 in vacuum."""
    m = _matrix(single)
    cutoff = _as_cutoff(len(m) - 1 if cutoff is None else cutoff)
    if len(m) != cutoff.n_max + 1:
        raise DimensionMismatch("single-mode size does not match cutoff")
    idx = np.array([cutoff.index(n, 0) for n in range(cutoff.n_max + 1)])
    out = np.zeros((cutoff.dim, cutoff.dim), dtype=complex)
    out[np.ix_(idx, idx)] = m
    return TwoModeState(cutoff, out)


def mixture_state(
    mix: CoherentMixture, n_max: int, tail_tol: float = DEFAULT_TAIL_TOL, psd_tol: float = MIXTURE_PSD_TOL
) -> TwoModeState:
    """Mode 1 in the coherent mixture, mode 2 in vacuum."""
    return embed_mode1(mixture_single_mode(mix, n_max, tail_tol, psd_tol), n_max)


# --------------------------------------------------------------------------
# reductions and metrics
# --------------------------------------------------------------------------


def partial_trace(state: TwoModeState, keep: int) -> SingleModeState:
    """Reduced state of mode ``keep`` (1 or 2)."""
    if keep not in (1, 2):
        raise ValueError("keep must be 1 or 2")
    cut = state.cutoff
    n = cut.n_max
    rho = state.matrix
    out = np.zeros((n + 1, n + 1), dtype=complex)
    for m in range(n + 1):
        if keep == 1:
            idx = np.array([cut.index(k, m) for k in range(n + 1 - m)])
        else:
            idx = np.array([cut.index(m, k) for k in range(n + 1 - m)])
        out[: len(idx), : len(idx)] += rho[np.ix_(idx, idx)]
    return SingleModeState(n, _hermitian_part(out))


def trace_distance(a: State, b: State) -> float:
    """``||a - b||_1 / 2`` for two density matrices of the same size."""
    ma, mb = _matrix(a), _matrix(b)
    if ma.shape != mb.shape:
        raise DimensionMismatch(f"{ma.shape} vs {mb.shape}")
    ev = np.linalg.eigvalsh(_hermitian_part(ma - mb))
    return float(min(1.0, 0.5 * np.sum(np.abs(ev))))


def fidelity_pure(psi: np.ndarray, rho: State) -> float:
    """``<psi|rho|psi>`` for a unit vector ``psi``."""
    psi = np.asarray(psi, dtype=complex)
    m = _matrix(rho)
    if m.shape != (len(psi), len(psi)):
        raise DimensionMismatch(f"vector of length {len(psi)} vs state {m.shape}")
    f = np.vdot(psi, m @ psi).real
    return float(min(1.0, max(0.0, f)))


def overlap(psi: np.ndarray, phi: np.ndarray) -> complex:
    """``<psi|phi>``."""
    psi, phi = np.asarray(psi), np.asarray(phi)
    if psi.shape != phi.shape:
        raise DimensionMismatch(f"{psi.shape} vs {phi.shape}")
    return complex(np.vdot(psi, phi))


# --------------------------------------------------------------------------
# operators
# --------------------------------------------------------------------------


def annihilation(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1)), 1).astype(complex)


def lowering_operator(cutoff, mode: int) -> np.ndarray:
    """Dense ``a_1`` or ``a_2`` on the triangular space (maps block N to N-1)."""
    cutoff = _as_cutoff(cutoff)
    op = np.zeros((cutoff.dim, cutoff.dim), dtype=complex)
    for (n1, n2), col in zip(cutoff.basis(), range(cutoff.dim)):
        if mode == 1 and n1 > 0:
            op[cutoff.index(n1 - 1, n2), col] = np.sqrt(n1)
        elif mode == 2 and n2 > 0:
            op[cutoff.index(n1, n2 - 1), col] = np.sqrt(n2)
    return op


def number_operator(cutoff, mode: int | None = None) -> np.ndarray:
    cutoff = _as_cutoff(cutoff)
    counts = {None: cutoff.total, 1: cutoff.n1, 2: cutoff.n2}[mode]
    return np.diag(counts.astype(complex))


def conjugate_blockwise(blocks: Sequence[np.ndarray], matrix: np.ndarray, cutoff) -> np.ndarray:
    """``B rho B^dagger`` for block-diagonal ``B`` given by its diagonal blocks."""
    cutoff = _as_cutoff(cutoff)
    if len(blocks) != cutoff.n_blocks:
        raise DimensionMismatch(f"need {cutoff.n_blocks} blocks, got {len(blocks)}")
    left = np.empty_like(matrix, dtype=complex)
    for N, b in enumerate(blocks):
        s = cutoff.block_slice(N)
        left[s, :] = b @ matrix[s, :]
    out = np.empty_like(left)
    for N, b in enumerate(blocks):
        s = cutoff.block_slice(N)
        out[:, s] = left[:, s] @ b.conj().T
    return out


def apply_blockwise(blocks: Sequence[np.ndarray], psi: np.ndarray, cutoff) -> np.ndarray:
    cutoff = _as_cutoff(cutoff)
    out = np.empty(cutoff.dim, dtype=complex)
    for N, b in enumerate(blocks):
        s = cutoff.block_slice(N)
        out[s] = b @ psi[s]
    return out


# --------------------------------------------------------------------------
# JSON persistence
# --------------------------------------------------------------------------


def _pairs(block: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(block)]


def _unpairs(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


def state_to_dict(state: TwoModeState, atol: float = 0.0) -> dict:
    """Serializable form: diagonal blocks plus non-zero cross blocks (N < M).

    Matrix entries are written row-major as ``[re, im]`` pairs.
    """
    return {
        "schema": STATE_SCHEMA,
        "schema_version": STATE_SCHEMA_VERSION,
        "n_max": state.n_max,
        "blocks": [_pairs(b) for b in state.blocks],
        "cross_blocks": [
            {"row_block": N, "col_block": M, "data": _pairs(b)}
            for (N, M), b in state.cross_blocks(atol).items()
        ],
    }


def state_from_dict(data: dict) -> TwoModeState:
    if data.get("schema") != STATE_SCHEMA:
        raise InvalidState(f"unexpected schema {data.get('schema')!r}")
    if data.get("schema_version") != STATE_SCHEMA_VERSION:
        raise InvalidState(f"unsupported schema_version {data.get('schema_version')!r}")
    cutoff = FockCutoff(data["n_max"])
    blocks = [_unpairs(b) for b in data["blocks"]]
    cross = {(c["row_block"], c["col_block"]): _unpairs(c["data"]) for c in data.get("cross_blocks", [])}
    return TwoModeState.from_blocks(cutoff, blocks, cross)


def save_state(state: TwoModeState, path) -> None:
    Path(path).write_text(json.dumps(state_to_dict(state)), encoding="utf-8")


def load_state(path) -> TwoModeState:
    return state_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
