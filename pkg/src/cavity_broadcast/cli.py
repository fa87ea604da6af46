"""Command-line front end.

    cavity-broadcast --config scenario.json --out results/ [--override key=value ...] [--quiet]

Writes ``report.json`` (and ``series.csv`` where a scenario produces a series)
into ``--out``. Exit codes: 0 success, 1 configuration error, 2 failed physics
check. Failures also print a JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Callable

import numpy as np

from . import beamsplitter as bsplit
from . import broadcast as bcast
from . import cavity, discrimination
from .config import ChannelSpec, ConfigError, ScenarioConfig, complex_pair, jsonable, parse_config
from .errors import CavityError
from .fock import (
    FockCutoff,
    TwoModeState,
    partial_trace,
    trace_distance,
    two_mode_coherent_vector,
)

logger = logging.getLogger("cavity_broadcast")

REPORT_SCHEMA = "cavity-broadcast/report"
REPORT_SCHEMA_VERSION = 1
CLONE_FIDELITY_TOL = 1e-8

EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS = 0, 1, 2


class PhysicsCheckFailed(CavityError):
    pass


class ScenarioResult:
    def __init__(self, result: dict, checks: dict | None = None, series: list[list] | None = None):
        self.result = result
        self.checks = checks or {}
        self.series = series


def _clone(cfg: ScenarioConfig) -> ScenarioResult:
    tuning = cfg.resolved_tuning()
    gamma = complex(cfg.gamma)
    n = cfg.n_max
    tail = cfg.tolerances.tail
    bs = bsplit.beam_splitter_for(tuning, n)
    psi_in = two_mode_coherent_vector(np.sqrt(2) * gamma, 0, n, tail)
    psi_out = bsplit.apply_vector(bs, psi_in)
    clones = two_mode_coherent_vector(gamma, gamma, n, tail)
    fidelity = float(min(1.0, abs(np.vdot(clones, psi_out)) ** 2))
    rho = TwoModeState.from_vector(FockCutoff(n), psi_out)
    m1, m2 = partial_trace(rho, 1), partial_trace(rho, 2)
    result = {
        "gamma": complex_pair(gamma),
        "input_amplitude": complex_pair(np.sqrt(2) * gamma),
        "fidelity": fidelity,
        "marginal_distance": trace_distance(m1, m2),
        "mean_photons_mode1": m1.mean_photons(),
        "mean_photons_mode2": m2.mean_photons(),
    }
    checks = {}
    if tuning.kappa == -1:
        checks["clone_fidelity"] = {"value": fidelity, "bound": 1 - CLONE_FIDELITY_TOL, "passed": fidelity >= 1 - CLONE_FIDELITY_TOL}
    series = [["n", "p_mode1", "p_mode2"]] + [
        [k, p1, p2] for k, (p1, p2) in enumerate(zip(m1.photon_distribution(), m2.photon_distribution()))
    ]
    return ScenarioResult(result, checks, series)


def _broadcast(cfg: ScenarioConfig) -> ScenarioResult:
    tuning = cfg.resolved_tuning()
    mix = cfg.mixture(cfg.input)
    target = cfg.mixture(cfg.target) if cfg.target else None
    _, rep = bcast.broadcast(mix, tuning.kappa, cfg.n_max, target=target, tail_tol=cfg.tolerances.tail)
    result = rep.to_dict()
    result["f_down"], result["f_up"] = bsplit.conversion_fractions(tuning.kappa)
    checks = {"route_agreement": {"value": rep.route_distance, "bound": bcast.ROUTE_TOL, "passed": rep.route_distance <= bcast.ROUTE_TOL}}
    d1, d2 = rep.marginal1.photon_distribution(), rep.marginal2.photon_distribution()
    series = [["n", "p_mode1", "p_mode2"]] + [[k, a, b] for k, (a, b) in enumerate(zip(d1, d2))]
    return ScenarioResult(result, checks, series)


def _steady_state(cfg: ScenarioConfig) -> ScenarioResult:
    spec = cfg.channel or ChannelSpec()
    tuning = cfg.resolved_tuning()
    gamma = complex(cfg.gamma if cfg.gamma is not None else 1.0)
    n = cfg.n_max
    tol = cfg.tolerances
    hc = cavity.RamanHamiltonianConfig(g=spec.g, r=spec.r, tau=spec.tau, include_stark=spec.include_stark)
    ch = cavity.build_channel(hc, (tuning.alpha, tuning.beta), n)
    cut = FockCutoff(n)
    rho0 = TwoModeState.from_vector(cut, two_mode_coherent_vector(gamma, 0, n, tol.tail))
    res = cavity.iterate_to_steady(ch, rho0, tol.tol, tol.max_iter)

    predicted = bsplit.apply(bsplit.beam_splitter_for(tuning, n), rho0)
    blocks = max(float(np.max(np.abs(a - b))) for a, b in zip(res.state.blocks, predicted.blocks))
    analytic = cavity.analytic_steady_state(
        cavity.SteadyStateSpec(cavity.coherent_seed(gamma, tuning.kappa, n), tuning.kappa), n
    )
    result = {
        "gamma": complex_pair(gamma),
        "kappa": complex_pair(tuning.kappa),
        "converged": res.converged,
        "n_iters": res.n_iters,
        "final_step_distance": res.step_distances[-1],
        "kraus_completeness_error": ch.completeness_error(),
        "distance_to_beam_splitter_output": trace_distance(res.state, predicted),
        "max_block_deviation": blocks,
        "steady_state_purity": res.state.purity(),
        "analytic_fixed_point_residual": cavity.fixed_point_residual(ch, analytic),
        "analytic_dark_state_residual": cavity.dark_state_residual(ch, analytic),
    }
    series = [["iteration", "step_distance"]] + [[i + 1, d] for i, d in enumerate(res.step_distances)]
    return ScenarioResult(result, {}, series)


def _attenuate(cfg: ScenarioConfig) -> ScenarioResult:
    mix = cfg.mixture(cfg.rho)
    sigma = cfg.mixture(cfg.sigma) if cfg.sigma else None
    ms = discrimination.moments(mix)
    rows = []
    per_A = []
    for A in cfg.attenuation_values():
        exact = discrimination.attenuate_exact(mix, A, cfg.n_max, cfg.tolerances.tail)
        two = discrimination.attenuate_two_level(ms, A)
        chk = discrimination.purity_condition(ms, A) if ms.mean_abs2 > 0 else None
        entry = {
            "A": A,
            "two_level": two.matrix,
            "two_level_error": trace_distance(discrimination.project_two_level(exact), two.matrix),
            "diagonal_terms": [discrimination.diagonal_term(mix, A, k) for k in range(5)],
            "purity_condition": chk._asdict() if chk else None,
        }
        if sigma is not None:
            povm = discrimination.build_povm(
                discrimination.phi_state(ms, A), discrimination.phi_state(discrimination.moments(sigma), A)
            )
            entry["pmax"] = povm.success_probability
            entry["overlap"] = povm.overlap
            rows.append([A, povm.success_probability, povm.success_probability / A**2])
        else:
            rows.append([A, entry["two_level_error"]])
        per_A.append(entry)
    header = ["A", "pmax", "pmax_over_A2"] if sigma is not None else ["A", "two_level_error"]
    result = {"moments": {"mean_gamma": ms.mean_gamma, "mean_abs2": ms.mean_abs2}, "sweep": per_A}
    return ScenarioResult(result, {}, [header] + rows)


def _discriminate(cfg: ScenarioConfig) -> ScenarioResult:
    mc = cfg.monte_carlo
    rep = discrimination.run_discrimination_experiment(
        cfg.mixture(cfg.rho),
        cfg.mixture(cfg.sigma),
        cfg.attenuation_values()[0],
        mc.n_samples,
        mc.seed,
        workers=mc.workers,
        tail_tol=cfg.tolerances.tail,
    )
    out = rep.to_dict()
    p = out["analytic"]["success_probability"]
    sd = np.sqrt(p * (1 - p) / rep.n_samples)
    dev = abs(out["empirical"]["success_rate"] - p)
    checks = {"success_within_3_sigma": {"value": dev, "bound": 3 * sd, "passed": bool(dev <= 3 * sd)}}
    return ScenarioResult(out, checks)


RUNNERS: dict[str, Callable[[ScenarioConfig], ScenarioResult]] = {
    "clone": _clone,
    "broadcast": _broadcast,
    "steady_state": _steady_state,
    "attenuate": _attenuate,
    "discriminate": _discriminate,
}


def build_report(cfg: ScenarioConfig, res: ScenarioResult) -> dict:
    return jsonable(
        {
            "schema": REPORT_SCHEMA,
            "schema_version": REPORT_SCHEMA_VERSION,
            "scenario": cfg.scenario,
            "config": cfg.resolved(),
            "result": res.result,
            "checks": res.checks,
            "status": "ok" if all(c["passed"] for c in res.checks.values()) else "check_failed",
        }
    )


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def dumps_series(rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def run(cfg: ScenarioConfig, out_dir: Path) -> int:
    """Run one scenario, write its files and return the exit code."""
    res = RUNNERS[cfg.scenario](cfg)
    report = build_report(cfg, res)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(dumps_report(report), encoding="utf-8", newline="\n")
    if res.series is not None:
        (out_dir / "series.csv").write_text(dumps_series(res.series), encoding="utf-8", newline="\n")
    failed = [k for k, c in res.checks.items() if not c["passed"]]
    if failed:
        raise PhysicsCheckFailed("failed checks: " + ", ".join(failed))
    return EXIT_OK


def _error_json(exc: Exception, code: int) -> str:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, ConfigError) and exc.path:
        payload["path"] = exc.path
    for attr in ("line", "column", "distance", "n_iters"):
        if getattr(exc, attr, None) is not None:
            payload[attr] = getattr(exc, attr)
    return json.dumps(payload, sort_keys=True)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="cavity-broadcast", description="Run a cavity broadcasting scenario.")
    parser.add_argument("--config", required=True, help="scenario JSON file")
    parser.add_argument("--out", default=".", help="output directory (default: current)")
    parser.add_argument("--override", action="append", default=[], metavar="KEY=VALUE", help="dot-path override; repeatable")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    try:
        text = Path(args.config).read_bytes()
        cfg = parse_config(text, args.override)
    except (ConfigError, OSError) as exc:
        print(_error_json(exc, EXIT_CONFIG), file=sys.stderr)
        return EXIT_CONFIG
    try:
        code = run(cfg, Path(args.out))
    except CavityError as exc:
        print(_error_json(exc, EXIT_PHYSICS), file=sys.stderr)
        return EXIT_PHYSICS
    if not args.quiet:
        logger.info("wrote %s", Path(args.out) / "report.json")
    return code


if __name__ == "__main__":
    sys.exit(main())
