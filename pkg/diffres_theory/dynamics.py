from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
from scipy import stats

from diffres_diffusion import check_stability, diffusion_step, iteration_matrix, spectral_radius
from diffres_graph import GraphError, SparseWeights, connected_components, graph_laplacian, power_spectral_radius
from diffres_graph.spectral import eigen_size_limit

from .errors import TheoryError
from .structured import StructuredDataset, structured_stats

logger = logging.getLogger(__name__)

CONTRACTION_TOL = 1e-9


@dataclass
class RatioTrace:
    steps: List[int] = field(default_factory=list)
    diameters: List[float] = field(default_factory=list)
    distances: List[float] = field(default_factory=list)
    components_match: bool = True

    @property
    def ratios(self) -> List[float]:
        return [l / d if d > 0.0 else float("nan") for d, l in zip(self.diameters, self.distances)]

    def append(self, step: int, diameter: float, distance: float) -> None:
        self.steps.append(step)
        self.diameters.append(diameter)
        self.distances.append(distance)

    def write_csv(self, path: Union[str, Path], header_comment: Optional[str] = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            writer = csv.writer(fh)
            writer.writerow(["step", "D", "L", "ratio"])
            for row in zip(self.steps, self.diameters, self.distances, self.ratios):
                writer.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])


def _components_match(ds: StructuredDataset, weights: SparseWeights) -> bool:
    """True when every nonempty subset is exactly one connected component of W."""
    comps = connected_components(weights)
    groups = ds.group_index
    for g in np.unique(groups):
        inside = np.unique(comps[groups == g])
        if inside.size != 1 or np.any(comps[groups != g] == inside[0]):
            return False
    return True


def ratio_trace(
    ds: StructuredDataset,
    weights: SparseWeights,
    gamma: float,
    steps: int,
    squared: bool = False,
) -> RatioTrace:
    """D(t) and L(t) after each of ``steps`` explicit diffusion steps (t = 0 included)."""
    x = ds.coords
    if weights.n != x.shape[0]:
        raise TheoryError(f"weight matrix of size {weights.n} does not match {x.shape[0]} points")
    if steps < 0:
        raise TheoryError(f"steps must be >= 0, got {steps}")
    check_stability(weights, gamma)

    trace = RatioTrace(components_match=_components_match(ds, weights))
    if not trace.components_match:
        logger.warning("subsets are not the connected components of W; the ratio need not grow")
    diameter, distance = structured_stats(ds, squared=squared)
    trace.append(0, diameter, distance)
    for t in range(1, steps + 1):
        x = diffusion_step(x, weights, gamma)
        diameter, distance = structured_stats(ds.with_coords(x), squared=squared)
        trace.append(t, diameter, distance)
    return trace


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    r_squared: float
    points: int


def fit_log_decay(trace: RatioTrace, skip_fraction: float = 0.1, floor: float = 1e-10) -> DecayFit:
    """Least-squares line through log D(t), skipping the transient and round-off tail."""
    steps = np.asarray(trace.steps, dtype=float)
    diam = np.asarray(trace.diameters, dtype=float)
    start = int(np.ceil(skip_fraction * steps.size))
    keep = np.arange(steps.size) >= start
    keep &= diam > floor
    if keep.sum() < 3:
        raise TheoryError(f"only {int(keep.sum())} usable points for the decay fit", payload={"floor": floor})
    fit = stats.linregress(steps[keep], np.log(diam[keep]))
    return DecayFit(slope=float(fit.slope), intercept=float(fit.intercept), r_squared=float(fit.rvalue**2), points=int(keep.sum()))


@dataclass(frozen=True)
class StabilityReport:
    gamma: float
    gamma_max: float
    spectral_radius: float
    gershgorin_lower: float
    gershgorin_upper: float
    method: str

    @property
    def passed(self) -> bool:
        return self.spectral_radius <= 1.0 + CONTRACTION_TOL

    def to_dict(self) -> Dict[str, object]:
        return {
            "gamma": self.gamma,
            "gamma_max": self.gamma_max,
            "spectral_radius": self.spectral_radius,
            "gershgorin": [self.gershgorin_lower, self.gershgorin_upper],
            "method": self.method,
            "passed": self.passed,
        }


def verify_stability(weights: SparseWeights, gamma: float) -> StabilityReport:
    """rho(I - gamma L) together with the Gershgorin interval [min 1 - 2 gamma d_i, 1]."""
    if gamma < 0:
        raise TheoryError(f"gamma must be >= 0, got {gamma}")
    matrix = iteration_matrix(weights, gamma)
    try:
        rho = spectral_radius(matrix)
        method = "eigh"
    except GraphError:
        logger.info("n=%d above eigensolver limit %d, using power iteration", weights.n, eigen_size_limit())
        rho = power_spectral_radius(matrix)
        method = "power"
    diag = graph_laplacian(weights).diagonal()
    max_degree = float(weights.degrees.max()) if weights.n else 0.0
    return StabilityReport(
        gamma=float(gamma),
        gamma_max=1.0 / max_degree if max_degree > 0.0 else float("inf"),
        spectral_radius=rho,
        gershgorin_lower=float(np.min(1.0 - 2.0 * gamma * diag)) if diag.size else 1.0,
        gershgorin_upper=1.0,
        method=method,
    )
