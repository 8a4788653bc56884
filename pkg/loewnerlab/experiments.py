"""End-to-end experiments: commutation of limits, the non-conformal warning example and SLE stability."""
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, TypeVar

import numpy as np
import scipy

from loewnerlab import __version__
from loewnerlab.config import ExperimentConfig, config
from loewnerlab.conformal import NormalizedMap, boundary_normalized, radial_projection, uniformize
from loewnerlab.curves import CurveClass, DrivingFunction, frechet_distance, function_metric
from loewnerlab.errors import InvalidInputError, LabError, NumericFailureError
from loewnerlab.lattice import LatticeDomain, approximate_domain
from loewnerlab.loewner import (
    brownian_path,
    extract_driving,
    forward_evolve,
    mobius_D_to_H,
    sample_sle,
    sle_driving,
    trace_in_disc,
)
from loewnerlab.render import write_report
from loewnerlab.stochastic import sample_lerw, spawn_seeds

logger = logging.getLogger(__name__)

ItemT = TypeVar("ItemT")
ResultT = TypeVar("ResultT")

DISTANCE_TOL = 1e-3

COMMUTE_COLUMNS = ["n", "eps", "seed", "samples", "ell", "exceedance", "stderr", "q50", "q90", "max", "driving_metric"]
WARNING_COLUMNS = ["n", "alpha", "seed", "samples", "gap", "limit_gap", "disc_gap"]
STABILITY_COLUMNS = ["kappa", "kappa_m", "sample", "seed", "samples", "distance"]


@dataclass
class ExperimentReport:
    """Rows of one experiment with their provenance; curves are kept for plotting."""

    name: str
    columns: List[str]
    rows: List[Dict[str, Any]]
    provenance: Dict[str, Any]
    summary: Dict[str, Any] = field(default_factory=dict)
    curves: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def column(self, key: str) -> List[Any]:
        return [row.get(key) for row in self.rows]


class ExperimentRunner:
    """Fans independent experiment cells out to a thread pool and returns results in input order."""

    def __init__(self, max_workers: Optional[int] = None):
        self.max_workers = max_workers or config.MAX_WORKERS
        self.executor = ThreadPoolExecutor(max_workers=self.max_workers)
        logger.info(f"Experiment runner initialized with {self.max_workers} workers")

    def map(self, fn: Callable[[ItemT], ResultT], items: Iterable[ItemT]) -> List[ResultT]:
        return list(self.executor.map(fn, items))

    def __del__(self):
        """Cleanup executor on deletion."""
        if hasattr(self, "executor"):
            self.executor.shutdown(wait=False)


_runner: Optional[ExperimentRunner] = None


def get_runner() -> ExperimentRunner:
    """Get or create the global experiment runner."""
    global _runner
    if _runner is None:
        _runner = ExperimentRunner()
    return _runner


def _provenance(params: Dict[str, Any]) -> Dict[str, Any]:
    canonical = json.dumps(params, sort_keys=True, separators=(",", ":"), default=str)
    return {
        "config_hash": hashlib.sha256(canonical.encode()).hexdigest(),
        "loewnerlab": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "params": params,
    }


def _with_context(e: LabError, context: str) -> LabError:
    message = f"{context}: {e}"
    if isinstance(e, NumericFailureError):
        return type(e)(message, e.diagnostics)
    return type(e)(message)


def _fraction(flags: Sequence[bool]) -> tuple:
    x = np.asarray(flags, dtype=float)
    stderr = float(np.std(x, ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0
    return float(x.mean()), stderr


def _downsample(z: np.ndarray, count: int) -> np.ndarray:
    keep = np.unique(np.linspace(0, z.size - 1, min(count, z.size)).round().astype(int))
    return z[keep]


def _disc_driving(w: np.ndarray, npts: int) -> Optional[DrivingFunction]:
    """Driving function of a disc curve from −1, read in ℍ; None when the curve does not unzip."""
    w = w[np.abs(w - 1.0) > 1e-9]
    try:
        h = mobius_D_to_H(w)
        h[0] = h[0].real
        return extract_driving(h, npts, check=False)
    except LabError as e:
        logger.warning(f"Driving extraction skipped: {e}")
        return None


def _commute_cell(
    cfg: ExperimentConfig,
    dom: LatticeDomain,
    psi: NormalizedMap,
    k: int,
    seed: int,
) -> Dict[str, Any]:
    """Distances d(γ, P_ε^Λ γ) over the ε-list for one sample at one resolution."""
    if cfg.model == "sle":
        gamma_disc = _downsample(trace_in_disc(sample_sle(cfg.kappa, cfg.T, cfg.dt, seed)).z, cfg.curve_points)
        gamma = psi.from_disc(gamma_disc)
    else:
        gamma = sample_lerw(dom, dom.a, dom.b, seed).vertices
        gamma_disc = psi.to_disc(gamma)
    # P_ε acts in the u-centred disc, φ = M^{-1} ∘ ψ
    phi_points = psi.automorphism.inverse()(gamma_disc)
    phi_points = np.where(np.abs(phi_points) > 1, phi_points / np.abs(phi_points), phi_points)
    curve = CurveClass(gamma)
    distances = []
    for eps in cfg.eps_values:
        projected = psi.base.from_disc(radial_projection(phi_points, eps))
        distances.append(frechet_distance(curve, CurveClass(projected), DISTANCE_TOL))
    return {"sample": k, "distances": distances, "driving": _disc_driving(gamma_disc, cfg.curve_points)}


def run_commutation_experiment(cfg: ExperimentConfig, runner: Optional[ExperimentRunner] = None) -> ExperimentReport:
    """
    Sample chordal curves γ^{(n)} and measure how far the radial projection P_ε^Λ moves them.

    For every (n, ε) the report holds the fraction of samples with d(γ^{(n)}, P_ε^Λ γ^{(n)}) > ℓ
    and distance quantiles. The driving functions of ψ_n(γ^{(n)}) are compared across
    consecutive resolutions with the function-space metric.

    Raises:
        LabError: Component failures, re-raised with (n, sample) context
    """
    runner = runner or get_runner()
    run_id = cfg.run_id()
    seeds = spawn_seeds(cfg.seed, cfg.samples)
    logger.info(f"[{run_id}] Commutation experiment: model={cfg.model}, n={cfg.n_values}, eps={cfg.eps_values}, {cfg.samples} samples")

    rows: List[Dict[str, Any]] = []
    previous: Optional[List[Optional[DrivingFunction]]] = None
    curves: Dict[str, np.ndarray] = {}
    for n in cfg.n_values:
        try:
            dom = approximate_domain(cfg.polygon, cfg.u, n, cfg.a_point, cfg.b_point)
            psi = boundary_normalized(uniformize(dom), dom.a, dom.b)
        except LabError as e:
            logger.error(f"[{run_id}] Map construction failed at n={n}: {e}", exc_info=True)
            raise _with_context(e, f"n={n}") from e

        def cell(item):
            k, seed = item
            try:
                return _commute_cell(cfg, dom, psi, k, seed)
            except LabError as e:
                logger.error(f"[{run_id}] Cell n={n} sample={k} failed: {e}", exc_info=True)
                raise _with_context(e, f"n={n}, sample={k}") from e

        results = sorted(runner.map(cell, list(enumerate(seeds))), key=lambda r: r["sample"])
        drivings = [r["driving"] for r in results]
        metric = None
        if previous is not None:
            pairs = [function_metric(a, b) for a, b in zip(previous, drivings) if a is not None and b is not None]
            metric = float(np.median(pairs)) if pairs else None
        previous = drivings

        dist = np.array([r["distances"] for r in results])
        for j, eps in enumerate(cfg.eps_values):
            exceedance, stderr = _fraction(dist[:, j] > cfg.ell)
            rows.append(
                {
                    "n": n,
                    "eps": eps,
                    "seed": cfg.seed,
                    "samples": len(results),
                    "ell": cfg.ell,
                    "exceedance": exceedance,
                    "stderr": stderr,
                    "q50": float(np.quantile(dist[:, j], 0.5)),
                    "q90": float(np.quantile(dist[:, j], 0.9)),
                    "max": float(dist[:, j].max()),
                    "driving_metric": metric,
                }
            )
            logger.info(f"[{run_id}] n={n} eps={eps}: exceedance {exceedance:.3f} ± {stderr:.3f}")
        curves[f"n={n}"] = dom.boundary_vertices
    return ExperimentReport(
        name="commute",
        columns=COMMUTE_COLUMNS,
        rows=rows,
        provenance=_provenance(cfg.model_dump(mode="json")),
        curves=curves,
    )


def twist_map(z, n: int, alpha: float) -> np.ndarray:
    """
    Non-conformal homeomorphism of the closed disc: identity on |z| ≤ 1 − 1/n and on |z| = 1.

    Across the ring the argument is turned by β(|z|), rising linearly from 0 to α at
    |z| = 1 − 1/(2n) and back to 0.
    """
    z = np.asarray(z, dtype=complex)
    rho = np.abs(z)
    beta = alpha * np.clip(1.0 - np.abs(2 * n * (rho - (1 - 0.5 / n))), 0.0, 1.0)
    return z * np.exp(1j * beta)


def _diameter_samples(n: int, ring_points: int) -> np.ndarray:
    ring = np.linspace(1 - 1.0 / n, 1.0, ring_points)
    return np.concatenate([-ring[::-1], [0.0], ring]).astype(complex)


def warning_limit_curve(alpha: float, arc_points: int = 64) -> np.ndarray:
    """Limit of T_n([−1, 1]): arcs to angle α and back at both ends of the diameter."""
    phi = np.linspace(0.0, alpha, arc_points)
    left = np.exp(1j * (np.pi + np.concatenate([phi, phi[::-1][1:]])))
    right = np.exp(1j * np.concatenate([phi, phi[::-1][1:]]))
    return np.concatenate([left, [0.0], right])


def run_warning_example(
    n_values: Sequence[int],
    alpha: float,
    out: Optional[Path] = None,
    ring_points: int = 64,
) -> ExperimentReport:
    """
    γ^{(n)} = T_n([−1, 1]) for the twist maps T_n, compared with γ_D = [−1, 1] and with the limit curve.

    Raises:
        InvalidInputError: If alpha is outside [0, π) or a resolution is not positive
    """
    if not 0 <= alpha < np.pi:
        raise InvalidInputError("alpha must lie in [0, pi)")
    if not n_values or any(n < 1 for n in n_values):
        raise InvalidInputError("n_values must be positive integers")
    params = {"experiment": "warning", "n_values": list(n_values), "alpha": alpha, "ring_points": ring_points}
    provenance = _provenance(params)
    run_id = provenance["config_hash"][:8]
    logger.info(f"[{run_id}] Warning example: alpha={alpha}, n={list(n_values)}")

    gamma_D = CurveClass(np.array([-1.0, 1.0], dtype=complex))
    limit = CurveClass(warning_limit_curve(alpha))
    rows = []
    curves = {"gamma_D": gamma_D.vertices, "limit": limit.vertices}
    for n in sorted(n_values):
        disc = _diameter_samples(n, ring_points)
        gamma_n = CurveClass(twist_map(disc, n, alpha))
        gap = frechet_distance(gamma_n, gamma_D, DISTANCE_TOL / 10)
        limit_gap = frechet_distance(gamma_n, limit, DISTANCE_TOL / 10)
        # γ_D^{(n)} is the diameter itself
        disc_gap = frechet_distance(CurveClass(disc), gamma_D, DISTANCE_TOL / 10)
        rows.append({"n": n, "alpha": alpha, "seed": 0, "samples": 1, "gap": gap, "limit_gap": limit_gap, "disc_gap": disc_gap})
        curves[f"n={n}"] = gamma_n.vertices
        logger.info(f"[{run_id}] n={n}: gap {gap:.4f}, distance to limit {limit_gap:.4f}")

    gaps = [r["gap"] for r in rows]
    report = ExperimentReport(
        name="warning",
        columns=WARNING_COLUMNS,
        rows=rows,
        provenance=provenance,
        summary={"min_gap": min(gaps), "first_gap": gaps[0], "last_gap": gaps[-1]},
        curves=curves,
    )
    if out is not None:
        write_report(report, Path(out))
    return report


def _disc_trace(kappa: float, times: np.ndarray, B: np.ndarray, dt: float) -> np.ndarray:
    return trace_in_disc(forward_evolve(sle_driving(kappa, times, B), dt)).z


def run_stability_experiment(
    kappa: float,
    kappa_list: Sequence[float],
    samples: int,
    seed: int,
    T: float = 1.0,
    dt: float = 1e-3,
    dom: Optional[LatticeDomain] = None,
    out: Optional[Path] = None,
    curve_points: int = 256,
    runner: Optional[ExperimentRunner] = None,
) -> ExperimentReport:
    """
    Couple SLE(κ_m) and SLE(κ) through one Brownian path per seed and compare the traces.

    With a domain the disc traces are carried over by ψ^{-1}. The summary holds the
    fraction of seeds whose distance decreases monotonically as |κ_m − κ| shrinks.

    Raises:
        InvalidInputError: If a κ is outside [0, 8) or samples is zero
    """
    if any(not 0 <= k < 8 for k in [kappa, *kappa_list]):
        raise InvalidInputError("kappa values must lie in [0, 8)")
    if samples < 1:
        raise InvalidInputError("samples must be at least 1")
    runner = runner or get_runner()
    params = {
        "experiment": "stability",
        "kappa": kappa,
        "kappas": list(kappa_list),
        "samples": samples,
        "seed": seed,
        "T": T,
        "dt": dt,
        "domain": dom.name if dom is not None else "disc",
    }
    provenance = _provenance(params)
    run_id = provenance["config_hash"][:8]
    psi = boundary_normalized(uniformize(dom), dom.a, dom.b) if dom is not None else None
    order = sorted(kappa_list, key=lambda k: -abs(k - kappa))
    logger.info(f"[{run_id}] Stability experiment: kappa={kappa}, kappa_m={order}, {samples} samples")

    def cell(item):
        k, s = item
        try:
            times, B = brownian_path(T, dt, s)
            curves = {km: _downsample(_disc_trace(km, times, B, dt), curve_points) for km in [kappa, *order]}
            if psi is not None:
                curves = {km: psi.from_disc(c) for km, c in curves.items()}
            target = CurveClass(curves[kappa])
            return k, s, [frechet_distance(CurveClass(curves[km]), target, DISTANCE_TOL) for km in order]
        except LabError as e:
            logger.error(f"[{run_id}] Stability cell sample={k} failed: {e}", exc_info=True)
            raise _with_context(e, f"sample={k}") from e

    results = sorted(runner.map(cell, list(enumerate(spawn_seeds(seed, samples)))))
    rows = []
    monotone = 0
    for k, s, distances in results:
        for km, d in zip(order, distances):
            rows.append({"kappa": kappa, "kappa_m": km, "sample": k, "seed": s, "samples": samples, "distance": d})
        if all(b <= a + 1e-12 for a, b in zip(distances, distances[1:])):
            monotone += 1
    report = ExperimentReport(
        name="stability",
        columns=STABILITY_COLUMNS,
        rows=rows,
        provenance=provenance,
        summary={"monotone_fraction": monotone / samples},
    )
    logger.info(f"[{run_id}] Stability: monotone for {monotone}/{samples} seeds")
    if out is not None:
        write_report(report, Path(out))
    return report


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Dispatch a configured experiment and write its report to cfg.out."""
    if cfg.experiment == "warning":
        return run_warning_example(cfg.n_values, cfg.alpha, Path(cfg.out))
    if cfg.experiment == "stability":
        return run_stability_experiment(cfg.kappa, cfg.kappas, cfg.samples, cfg.seed, cfg.T, cfg.dt, out=Path(cfg.out), curve_points=cfg.curve_points)
    report = run_commutation_experiment(cfg)
    write_report(report, Path(cfg.out))
    return report
