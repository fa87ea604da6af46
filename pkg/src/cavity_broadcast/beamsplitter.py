"""Quantum beam splitter ``S(lam) = exp(lam a1^dag a2 - lam^* a2^dag a1)``.

``lam = |theta| exp(-i phi)`` with ``exp(i phi) tan|theta| = kappa`` where
``kappa = alpha / (beta r)`` is the cavity tuning parameter. With the
exponent taken literally (no extra sign), the Heisenberg image of the mode-1
creation operator is ``cos|theta| a1^dag - exp(i phi) sin|theta| a2^dag``, so

    S |gamma>|0> = |A gamma> |-kappa A gamma>,   A = 1 / sqrt(1 + |kappa|^2),

which is the cavity transformation the module is built to reproduce.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateAtom, DimensionMismatch
from .fock import FockCutoff, TwoModeState, apply_blockwise, conjugate_blockwise

ATOM_NORM_TOL = 1e-12
UNITARITY_TOL = 1e-10


@dataclass(frozen=True)
class Tuning:
    """Injected-atom amplitudes, coupling ratio and the derived ``kappa``."""

    kappa: complex
    alpha: complex
    beta: complex
    r: float

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("coupling ratio r must be positive")
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1.0) > ATOM_NORM_TOL:
            raise ValueError(f"|alpha|^2 + |beta|^2 = {norm!r}, expected 1")
        if self.beta != 0 and abs(self.alpha / (self.beta * self.r) - self.kappa) > 1e-12 * max(
            1.0, abs(self.kappa)
        ):
            raise ValueError("kappa inconsistent with alpha / (beta r)")

    @classmethod
    def from_atom(cls, alpha: complex, beta: complex, r: float = 1.0) -> "Tuning":
        if beta == 0:
            raise DegenerateAtom("beta = 0 leaves alpha/(beta r) undefined")
        return cls(complex(alpha) / (complex(beta) * r), complex(alpha), complex(beta), float(r))

    @classmethod
    def from_kappa(cls, kappa: complex, r: float = 1.0) -> "Tuning":
        """Pick the atom state with real positive ``beta`` realizing ``kappa``."""
        kappa = complex(kappa)
        beta = 1.0 / np.sqrt(1.0 + abs(kappa * r) ** 2)
        return cls(kappa, kappa * r * beta, complex(beta), float(r))


def _kappa_of(t) -> complex:
    if isinstance(t, Tuning):
        if t.beta == 0:
            raise DegenerateAtom("beta = 0 leaves alpha/(beta r) undefined")
        return t.kappa
    return complex(t)


def tuning_to_lambda(t: Tuning | complex) -> tuple[float, float]:
    """Return ``(|theta|, phi)`` with ``exp(i phi) tan|theta| = kappa``.

    ``phi`` lies in ``(-pi, pi]``; for ``kappa = 0`` it is 0.
    """
    kappa = _kappa_of(t)
    theta = float(np.arctan(abs(kappa)))
    phi = float(np.angle(kappa)) if kappa != 0 else 0.0
    if phi <= -np.pi:
        phi += 2 * np.pi
    return theta, phi


def conversion_fractions(kappa: complex) -> tuple[float, float]:
    """Fractions of photons ending up in mode 2 (down) and staying in mode 1 (up)."""
    k2 = abs(complex(kappa)) ** 2
    return k2 / (1.0 + k2), 1.0 / (1.0 + k2)


def attenuation_amplitude(kappa: complex) -> float:
    """``A = 1 / sqrt(1 + |kappa|^2)``, the mode-1 amplitude scale factor."""
    return 1.0 / np.sqrt(1.0 + abs(complex(kappa)) ** 2)


def generator_block(lam: complex, N: int) -> np.ndarray:
    """``lam a1^dag a2 - lam^* a2^dag a1`` restricted to the N-photon block.

    Block basis is ``|N - j, j>``, ``j = 0..N``.
    """
    j = np.arange(N)
    # a1^dag a2 |N-j-1, j+1> = sqrt((N-j)(j+1)) |N-j, j>
    c = np.sqrt((N - j) * (j + 1.0))
    G = np.zeros((N + 1, N + 1), dtype=complex)
    G[j, j + 1] = lam * c
    G[j + 1, j] = -np.conj(lam) * c
    return G


def _expm_skew(G: np.ndarray) -> np.ndarray:
    # G is skew-Hermitian: G = -iH with H Hermitian
    w, V = np.linalg.eigh(1j * G)
    return (V * np.exp(-1j * w)) @ V.conj().T


@dataclass(frozen=True, eq=False)
class BeamSplitter:
    theta_abs: float
    phi: float
    n_max: int
    block_unitaries: tuple[np.ndarray, ...] = field(repr=False)

    @property
    def lam(self) -> complex:
        return self.theta_abs * np.exp(-1j * self.phi)

    @property
    def kappa(self) -> complex:
        return np.exp(1j * self.phi) * np.tan(self.theta_abs)

    @property
    def cutoff(self) -> FockCutoff:
        return FockCutoff(self.n_max)

    def unitarity_error(self) -> float:
        return max(float(np.max(np.abs(U.conj().T @ U - np.eye(len(U))))) for U in self.block_unitaries)

    def full_unitary(self) -> np.ndarray:
        cut = self.cutoff
        out = np.zeros((cut.dim, cut.dim), dtype=complex)
        for N, U in enumerate(self.block_unitaries):
            s = cut.block_slice(N)
            out[s, s] = U
        return out

    def inverse(self) -> "BeamSplitter":
        return BeamSplitter(self.theta_abs, self.phi, self.n_max, tuple(U.conj().T for U in self.block_unitaries))


def build_beam_splitter(theta_abs: float, phi: float, n_max: int) -> BeamSplitter:
    """Per-block exponentials of the generator via Hermitian eigendecomposition.

    ``theta_abs`` may be negative, which is how ``S(-lam)`` is built.
    """
    FockCutoff(n_max)
    lam = theta_abs * np.exp(-1j * phi)
    blocks = tuple(_expm_skew(generator_block(lam, N)) for N in range(n_max + 1))
    bs = BeamSplitter(float(theta_abs), float(phi), int(n_max), blocks)
    err = bs.unitarity_error()
    if err > UNITARITY_TOL:
        raise ArithmeticError(f"beam splitter unitarity error {err:.2e}")
    return bs


def beam_splitter_for(tuning: Tuning | complex, n_max: int) -> BeamSplitter:
    theta, phi = tuning_to_lambda(tuning)
    return build_beam_splitter(theta, phi, n_max)


def apply(bs: BeamSplitter, state: TwoModeState) -> TwoModeState:
    """``S rho S^dagger``."""
    if state.n_max != bs.n_max:
        raise DimensionMismatch(f"state n_max {state.n_max} vs beam splitter n_max {bs.n_max}")
    out = conjugate_blockwise(bs.block_unitaries, state.matrix, state.cutoff)
    return TwoModeState(state.cutoff, 0.5 * (out + out.conj().T))


def apply_vector(bs: BeamSplitter, psi: np.ndarray) -> np.ndarray:
    """``S |psi>`` for a vector in the triangular basis."""
    cut = bs.cutoff
    if len(psi) != cut.dim:
        raise DimensionMismatch(f"vector length {len(psi)} vs dim {cut.dim}")
    return apply_blockwise(bs.block_unitaries, np.asarray(psi, dtype=complex), cut)
