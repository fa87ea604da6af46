"""Broadcasting coherent-state mixtures through the cavity beam splitter.

Mode 1 starts in ``sum_k w_k |gamma_k><gamma_k|`` and mode 2 in vacuum. Each
term maps to ``|A gamma_k> |-kappa A gamma_k>``, so the output is known in
closed form; it is also computed by conjugating with the beam splitter and the
two routes are required to agree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import beamsplitter as bsplit
from .errors import ConsistencyError
from .fock import (
    DEFAULT_TAIL_TOL,
    CoherentMixture,
    FockCutoff,
    SingleModeState,
    TwoModeState,
    coherent_tail,
    mixture_single_mode,
    mixture_state,
    partial_trace,
    trace_distance,
    two_mode_coherent_vector,
)

ROUTE_TOL = 1e-8
BROADCAST_KAPPA = -1.0
CLONE_PURITY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class BroadcastReport:
    """Marginals of the output and how far they sit from each other and a target.

    Unless a target mixture is supplied, ``target_distance1/2`` compare each
    marginal with its closed-form prediction ``sum_k w_k |c gamma_k><c gamma_k|``
    (``c = A`` for mode 1, ``c = -kappa A`` for mode 2).
    """

    kappa: complex
    marginal1: SingleModeState
    marginal2: SingleModeState
    marginal_distance: float
    target_distance1: float
    target_distance2: float
    route_distance: float
    output_purity: float
    marginal_entropy1: float
    marginal_entropy2: float

    @property
    def marginals_equal(self) -> bool:
        return self.marginal_distance <= ROUTE_TOL

    def to_dict(self) -> dict:
        return {
            "kappa": [self.kappa.real, self.kappa.imag],
            "marginal_distance": self.marginal_distance,
            "marginals_equal": self.marginals_equal,
            "target_distance1": self.target_distance1,
            "target_distance2": self.target_distance2,
            "route_distance": self.route_distance,
            "output_purity": self.output_purity,
            "marginal_entropy1": self.marginal_entropy1,
            "marginal_entropy2": self.marginal_entropy2,
            "photon_distribution1": self.marginal1.photon_distribution().tolist(),
            "photon_distribution2": self.marginal2.photon_distribution().tolist(),
        }


def closed_form_output(mix: CoherentMixture, kappa: complex, n_max: int, tail_tol: float = DEFAULT_TAIL_TOL) -> TwoModeState:
    """``sum_k w_k |A g_k><A g_k| (x) |-kappa A g_k><-kappa A g_k|``."""
    kappa = complex(kappa)
    a = bsplit.attenuation_amplitude(kappa)
    cut = FockCutoff(n_max)
    rho = np.zeros((cut.dim, cut.dim), dtype=complex)
    for w, g in mix.terms:
        psi = two_mode_coherent_vector(a * g, -kappa * a * g, n_max, tail_tol)
        rho += w * np.outer(psi, psi.conj())
    return TwoModeState(cut, 0.5 * (rho + rho.conj().T))


def broadcast(
    mix: CoherentMixture,
    kappa: complex = BROADCAST_KAPPA,
    n_max: int = 40,
    target: CoherentMixture | None = None,
    tail_tol: float = DEFAULT_TAIL_TOL,
    route_tol: float = ROUTE_TOL,
) -> tuple[TwoModeState, BroadcastReport]:
    """Push ``mix (x) |0><0|`` through ``S(lam(kappa))`` and report the marginals.

    Raises :class:`ConsistencyError` if the beam-splitter route and the closed
    form differ by more than ``route_tol`` in trace distance.
    """
    kappa = complex(kappa)
    bs = bsplit.beam_splitter_for(kappa, n_max)
    rho_in = mixture_state(mix, n_max, tail_tol)
    rho_out = bsplit.apply(bs, rho_in)
    route = trace_distance(rho_out, closed_form_output(mix, kappa, n_max, tail_tol))
    if route > route_tol:
        raise ConsistencyError(f"beam-splitter and closed-form outputs differ by {route:.3e}")

    m1, m2 = partial_trace(rho_out, 1), partial_trace(rho_out, 2)
    a = bsplit.attenuation_amplitude(kappa)
    if target is None:
        t1 = mixture_single_mode(mix.scaled(a), n_max, tail_tol)
        t2 = mixture_single_mode(mix.scaled(-kappa * a), n_max, tail_tol)
    else:
        t1 = t2 = mixture_single_mode(target, n_max, tail_tol)
    report = BroadcastReport(
        kappa=kappa,
        marginal1=m1,
        marginal2=m2,
        marginal_distance=trace_distance(m1, m2),
        target_distance1=trace_distance(m1, t1),
        target_distance2=trace_distance(m2, t2),
        route_distance=route,
        output_purity=rho_out.purity(),
        marginal_entropy1=m1.entropy(),
        marginal_entropy2=m2.entropy(),
    )
    return rho_out, report


def prepare_for_broadcast(target: CoherentMixture) -> CoherentMixture:
    """Input mixture whose 50/50 broadcast reproduces ``target`` in both modes.

    For a continuous P-function the prescribed input is
    ``1/2 int d^2g P(g/sqrt2, g*/sqrt2) |g><g|``; the factor 1/2 is the Jacobian
    of ``g -> sqrt2 g``. A discrete atom of P keeps its weight under that change
    of variables, so only the amplitudes scale.
    """
    return target.scaled(np.sqrt(2.0))


def suggest_cutoff(mix: CoherentMixture, tail_tol: float = DEFAULT_TAIL_TOL, floor: int = 8) -> int:
    """Smallest ``n_max >= floor`` whose coherent-state tail fits ``tail_tol`` for every term."""
    g = mix.max_amplitude()
    n = floor
    while coherent_tail(g, n) > tail_tol:
        n += 1
    return n


def is_clone_case(mix: CoherentMixture, n_max: int | None = None, tol: float = CLONE_PURITY_TOL) -> bool:
    """True when the 50/50 output is pure and factorized.

    Checked on the realized output: both the two-mode purity and the marginal
    purities must be 1 within ``tol``. Zero-weight terms are dropped first.
    """
    mix = mix.pruned()
    if n_max is None:
        n_max = suggest_cutoff(mix)
    rho, rep = broadcast(mix, BROADCAST_KAPPA, n_max)
    return (
        rho.purity() >= 1.0 - tol
        and rep.marginal1.purity() >= 1.0 - tol
        and rep.marginal2.purity() >= 1.0 - tol
    )
