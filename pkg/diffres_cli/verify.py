from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np
from scipy.spatial.distance import pdist

from diffres_datasets import gen_structured_clusters, gen_xor
from diffres_diffusion import DiffusionConfig, diffuse, diffusion_closed_form, stability_max_step
from diffres_graph import FixedSigma, PointSet, build_weight_matrix, connected_components, graph_laplacian
from diffres_theory import (
    StructuredDataset,
    apply_flow,
    check_parallel_separable,
    construct_separating_flow,
    fit_log_decay,
    linear_separability,
    ratio_trace,
    structured_stats,
    theorem2_threshold,
    verify_stability,
)

from .config import VerifyConfig

logger = logging.getLogger(__name__)

RHO_TOL = 1e-9
ORACLE_REL_TOL = 1e-3
ORDER_RANGE = (1.8, 2.2)
TARGET_TOL = 1e-8
INVARIANT_TOL = 1e-12
PROP1_SHRINK = 0.01
PROP1_R_SQUARED = 0.99
DISTANCE_SLACK = 1e-9


@dataclass
class ClaimResult:
    claim: str
    passed: bool
    measured: Dict[str, float] = field(default_factory=dict)
    tolerances: Dict[str, object] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, object]:
        return {
            "claim": self.claim,
            "status": "pass" if self.passed else "fail",
            "measured": self.measured,
            "tolerances": self.tolerances,
            "failures": self.failures,
        }


def _random_graph(rng: np.random.Generator, n: int) -> PointSet:
    return PointSet(rng.standard_normal((n, 2)))


def verify_stability_claim(cfg: VerifyConfig) -> ClaimResult:
    """rho(I - gamma_max L) = 1 on random k-NN graphs, gamma_max = 1 / max degree."""
    result = ClaimResult("stability", True, tolerances={"rho": RHO_TOL})
    worst = 0.0
    for i in range(cfg.stability_graphs):
        rng = np.random.default_rng(cfg.seed + i)
        n = int(rng.integers(20, 201))
        weights = build_weight_matrix(_random_graph(rng, n), n_top=min(10, n - 1), sigma=FixedSigma(1.0))
        report = verify_stability(weights, stability_max_step(weights))
        gap = abs(report.spectral_radius - 1.0)
        worst = max(worst, gap)
        if gap > RHO_TOL:
            result.passed = False
            result.failures.append(f"graph {i} (n={n}): rho={report.spectral_radius!r}")
    result.measured = {"max_abs_rho_minus_1": worst, "graphs": cfg.stability_graphs}
    return result


def verify_oracle_claim(cfg: VerifyConfig) -> ClaimResult:
    """Forward Euler to t = 1 against the spectral solution, plus the first-order rate."""
    result = ClaimResult("oracle", True, tolerances={"relative_error": ORACLE_REL_TOL, "order_ratio": list(ORDER_RANGE)})
    errors, ratios = [], []
    r = cfg.oracle_steps
    for i in range(cfg.oracle_graphs):
        rng = np.random.default_rng(cfg.seed + 1000 + i)
        n = int(rng.integers(5, 51))
        weights = build_weight_matrix(_random_graph(rng, n), n_top=min(5, n - 1), sigma=FixedSigma(1.0))
        x0 = rng.standard_normal((n, 3))
        exact = diffusion_closed_form(x0, graph_laplacian(weights), gamma=1.0, t=1.0)
        norm = np.linalg.norm(exact)
        err = np.linalg.norm(diffuse(x0, weights, DiffusionConfig(gamma=1.0 / r, steps=r)) - exact) / norm
        err2 = np.linalg.norm(diffuse(x0, weights, DiffusionConfig(gamma=0.5 / r, steps=2 * r)) - exact) / norm
        errors.append(err)
        ratio = err / err2 if err2 > 0 else float("inf")
        ratios.append(ratio)
        if err > ORACLE_REL_TOL:
            result.failures.append(f"graph {i}: relative error {err:.3e}")
        if not ORDER_RANGE[0] <= ratio <= ORDER_RANGE[1]:
            result.failures.append(f"graph {i}: error ratio {ratio:.3f} under step doubling")
    result.passed = not result.failures
    result.measured = {"max_relative_error": float(max(errors)), "min_ratio": float(min(ratios)), "max_ratio": float(max(ratios))}
    return result


def verify_theorem1_claim(cfg: VerifyConfig) -> ClaimResult:
    """The constructed flow lands every point on its target and leaves the data separable."""
    result = ClaimResult("theorem1", True, tolerances={"target": TARGET_TOL, "invariant": INVARIANT_TOL})
    worst_target, worst_invariant = 0.0, 0.0
    for i in range(cfg.theorem1_instances):
        rng = np.random.default_rng(cfg.seed + 2000 + i)
        n = int(rng.integers(1, 13))
        points = rng.standard_normal((n, 3))
        labels = rng.integers(0, 2, n)
        schedule = construct_separating_flow(points, labels, rng=rng)
        final = apply_flow(points, schedule)
        targets = np.where(labels == 1, schedule.targets[1], schedule.targets[0])
        target_err = float(np.abs(final[:, 0] - targets).max())
        scale = max(1.0, float(np.abs(final).max()))
        invariant_err = float(np.abs((final - points) @ schedule.w_star).max()) / scale
        worst_target = max(worst_target, target_err)
        worst_invariant = max(worst_invariant, invariant_err)
        if target_err > TARGET_TOL:
            result.failures.append(f"instance {i}: first coordinate off target by {target_err:.3e}")
        if invariant_err > INVARIANT_TOL:
            result.failures.append(f"instance {i}: w*.x drifted by {invariant_err:.3e}")
        if not linear_separability(final, labels).separable:
            result.failures.append(f"instance {i}: output not linearly separable")
    result.passed = not result.failures
    result.measured = {"max_target_error": worst_target, "max_invariant_error": worst_invariant}
    return result


def verify_theorem2_claim(cfg: VerifyConfig) -> ClaimResult:
    """Structured data at twice the L/D threshold admits parallel separating hyperplanes (d = 2)."""
    k, l, d = 2, 2, 2
    threshold = theorem2_threshold(k * l, d)
    result = ClaimResult("theorem2", True, tolerances={"ratio_factor": 2.0})
    min_ratio = float("inf")
    for i in range(cfg.theorem2_instances):
        rng = np.random.default_rng(cfg.seed + 3000 + i)
        diameter = float(rng.uniform(0.05, 0.5))
        ds = gen_structured_clusters(k, l, d, 10, diameter, 2.0 * threshold * diameter, rng)
        big_d, big_l = structured_stats(ds)
        ratio = big_l / big_d
        min_ratio = min(min_ratio, ratio)
        if ratio < 2.0 * threshold:
            result.failures.append(f"instance {i}: generated ratio {ratio:.3f} below 2x threshold")
        elif check_parallel_separable(ds) is None:
            result.failures.append(f"instance {i}: no separating direction at ratio {ratio:.3f}")
    result.passed = not result.failures
    result.measured = {"threshold": threshold, "min_ratio": min_ratio}
    return result


def _subset_diameters(ds: StructuredDataset) -> np.ndarray:
    return np.array([float(pdist(s).max()) if s.shape[0] > 1 else 0.0 for s in ds.subsets])


def verify_prop1_claim(cfg: VerifyConfig) -> ClaimResult:
    """Pure diffusion on XOR: subclass diameters collapse exponentially and L never shrinks."""
    result = ClaimResult(
        "prop1",
        True,
        tolerances={"shrink": PROP1_SHRINK, "r_squared": PROP1_R_SQUARED, "distance_slack": DISTANCE_SLACK},
    )
    points = gen_xor(np.random.default_rng(cfg.seed + cfg.prop1_seed_offset))
    weights = build_weight_matrix(points, cfg.prop1_n_top, FixedSigma(cfg.prop1_sigma))
    ds = StructuredDataset.from_points(points)
    comps = connected_components(weights)
    n_comp = int(np.unique(comps).size)
    if n_comp != ds.m:
        result.passed = False
        result.failures.append(f"W has {n_comp} connected components, expected {ds.m}")
        result.measured = {"components": n_comp}
        return result

    gamma = min(1.0, stability_max_step(weights))
    trace = ratio_trace(ds, weights, gamma, cfg.prop1_steps)
    x = ds.coords
    x_final = diffuse(x, weights, DiffusionConfig(gamma=gamma, steps=cfg.prop1_steps))
    before = _subset_diameters(ds)
    after = _subset_diameters(ds.with_coords(x_final))
    shrink = float(np.max(after / before))
    fit = fit_log_decay(trace)
    min_distance = float(np.min(trace.distances))

    if not trace.components_match:
        result.failures.append("subsets are not the connected components of W")
    if shrink > PROP1_SHRINK:
        result.failures.append(f"a subclass kept {shrink:.2%} of its diameter")
    if fit.r_squared < PROP1_R_SQUARED:
        result.failures.append(f"log D(t) fit has R^2 = {fit.r_squared:.4f}")
    if min_distance < trace.distances[0] - DISTANCE_SLACK:
        result.failures.append(f"L(t) fell to {min_distance!r} from {trace.distances[0]!r}")
    result.passed = not result.failures
    result.measured = {
        "gamma": gamma,
        "max_diameter_ratio": shrink,
        "decay_slope": fit.slope,
        "r_squared": fit.r_squared,
        "initial_L": trace.distances[0],
        "min_L": min_distance,
        "initial_D": trace.diameters[0],
    }
    return result


SUITES: Dict[str, Callable[[VerifyConfig], ClaimResult]] = {
    "stability": verify_stability_claim,
    "oracle": verify_oracle_claim,
    "theorem1": verify_theorem1_claim,
    "theorem2": verify_theorem2_claim,
    "prop1": verify_prop1_claim,
}


def run_suites(cfg: VerifyConfig) -> List[ClaimResult]:
    results = []
    for claim in cfg.claims:
        logger.info("verifying %s", claim)
        results.append(SUITES[claim](cfg))
    return results
