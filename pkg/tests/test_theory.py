from __future__ import annotations

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from diffres_datasets import XOR_CENTERS, XOR_CLASSES, gen_circle, gen_xor
from diffres_diffusion import stability_max_step
from diffres_graph import SparseWeights, normalize_symmetric
from diffres_theory import (
    FlowPiece,
    FlowSchedule,
    RatioTrace,
    StructuredDataset,
    TheoryError,
    apply_flow,
    beta_for,
    check_parallel_separable,
    construct_separating_flow,
    critical_directions_2d,
    fit_log_decay,
    flow_summary,
    linear_separability,
    ratio_trace,
    structured_stats,
    theorem2_threshold,
    verify_stability,
)


def _xor_boundary(radius=0.75):
    """Four axis-aligned rim points per XOR disk."""
    rim = radius * np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    subsets = tuple(rim + np.asarray(c) for c in XOR_CENTERS)
    tags = tuple((y, g) for g, y in enumerate(XOR_CLASSES))
    return StructuredDataset(subsets=subsets, tags=tags)


XOR_CORNERS = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
XOR_LABELS = np.array([0, 1, 1, 0])


class TestStructuredStats:
    def test_two_singletons(self):
        ds = StructuredDataset(subsets=(np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]])), tags=((0, 0), (1, 0)))
        assert structured_stats(ds) == (0.0, 1.0)

    def test_xor_boundary(self):
        ds = _xor_boundary()
        d, l = structured_stats(ds)
        assert d == pytest.approx(1.5)
        assert l == pytest.approx(0.5)
        d2, l2 = structured_stats(ds, squared=True)
        assert d2 == pytest.approx(2.25)
        assert l2 == pytest.approx(0.25)

    def test_single_subset(self):
        ds = StructuredDataset(subsets=(np.zeros((2, 2)) + [[0, 0], [1, 1]],), tags=((0, 0),))
        with pytest.raises(TheoryError):
            structured_stats(ds)

    def test_overlapping_subsets_rejected(self):
        with pytest.raises(TheoryError):
            StructuredDataset(subsets=(np.array([[0.0, 0.0]]), np.array([[0.0, 0.0]])), tags=((0, 0), (1, 0)))

    def test_from_points_and_with_coords(self, rng):
        points = gen_xor(rng, n_per=5)
        ds = StructuredDataset.from_points(points)
        assert ds.m == 4
        assert ds.labels.tolist() == np.repeat(XOR_CLASSES, 5).tolist()
        moved = ds.with_coords(ds.coords + 1.0)
        np.testing.assert_allclose(moved.subsets[2], ds.subsets[2] + 1.0)


class TestThreshold:
    def test_values(self):
        assert theorem2_threshold(2, 1) == pytest.approx(np.sqrt(np.pi) / 2.0)
        assert theorem2_threshold(4, 2) == pytest.approx(6.0 * np.sqrt(np.pi))

    def test_monotone(self):
        assert theorem2_threshold(3, 2) > theorem2_threshold(2, 2)
        assert theorem2_threshold(3, 3) > theorem2_threshold(3, 2)

    def test_domain(self):
        with pytest.raises(TheoryError):
            theorem2_threshold(1, 2)


class TestParallelSeparable:
    def test_axis_split(self, rng):
        left = rng.uniform(-2.0, -1.0, (10, 3))
        right = rng.uniform(1.0, 2.0, (10, 3))
        ds = StructuredDataset(subsets=(left, right), tags=((0, 0), (1, 0)))
        np.testing.assert_allclose(check_parallel_separable(ds), [1.0, 0.0, 0.0])

    def test_concentric_rings_have_no_direction(self, rng):
        ds = StructuredDataset.from_points(gen_circle(rng, n_per=60))
        assert check_parallel_separable(ds) is None

    def test_xor_boundary_has_no_direction(self):
        # rim half-width 0.75 max(|cos|, |sin|) always overlaps a neighbouring disk
        assert check_parallel_separable(_xor_boundary()) is None

    def test_critical_directions_unit_length(self):
        dirs = critical_directions_2d(list(_xor_boundary().subsets))
        np.testing.assert_allclose(np.linalg.norm(dirs, axis=1), 1.0)


class TestSeparatingFlow:
    def test_single_point(self):
        schedule = construct_separating_flow(np.array([[0.3, -0.2]]), np.array([1]))
        assert len(schedule.pieces) == 1
        final = apply_flow(np.array([[0.3, -0.2]]), schedule)
        assert final[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_xor_corners_reach_targets(self):
        schedule = construct_separating_flow(XOR_CORNERS, XOR_LABELS, c1=-1.0, c2=2.0)
        final = apply_flow(XOR_CORNERS, schedule)
        np.testing.assert_allclose(final[:, 0], np.where(XOR_LABELS == 1, 2.0, -1.0), atol=1e-10)
        assert linear_separability(final, XOR_LABELS).separable

    def test_width_two_halves_the_pieces(self):
        schedule = construct_separating_flow(XOR_CORNERS, XOR_LABELS, width=2)
        assert len(schedule.pieces) == 2
        assert schedule.width == 2
        final = apply_flow(XOR_CORNERS, schedule)
        np.testing.assert_allclose(final[:, 0], XOR_LABELS.astype(float), atol=1e-10)
        assert flow_summary(schedule)["pieces"] == 2

    def test_projection_invariant(self, rng):
        points = rng.standard_normal((10, 3))
        labels = rng.integers(0, 2, 10)
        schedule = construct_separating_flow(points, labels, rng=rng)
        final = apply_flow(points, schedule)
        np.testing.assert_allclose(final @ schedule.w_star, points @ schedule.w_star, atol=1e-12)
        assert abs(schedule.w_star @ schedule.beta_star) < 1e-12
        assert schedule.beta_star[0] == 1.0

    def test_zero_lambda_is_identity(self, rng):
        w = np.array([0.6, 0.8])
        piece = FlowPiece(start=0.0, end=1.0, lambdas=np.zeros(2), biases=np.array([0.5, -1.0]))
        schedule = FlowSchedule(w_star=w, beta_star=beta_for(w), pieces=(piece,), targets=(0.0, 1.0))
        points = rng.standard_normal((5, 2))
        np.testing.assert_array_equal(apply_flow(points, schedule), points)

    def test_non_orthogonal_schedule_rejected(self):
        piece = FlowPiece(0.0, 1.0, np.zeros(1), np.zeros(1))
        with pytest.raises(TheoryError):
            FlowSchedule(w_star=np.array([1.0, 0.0]), beta_star=np.array([1.0, 1.0]), pieces=(piece,), targets=(0.0, 1.0))

    def test_grouped_subsets_move_as_units(self):
        rim = 0.5 * np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        ds = StructuredDataset(
            subsets=tuple(rim + [3.0 * g, 0.0] for g in range(4)), tags=tuple((y, g) for g, y in enumerate(XOR_CLASSES))
        )
        groups = np.repeat(np.arange(4), 4)
        labels = np.repeat(XOR_CLASSES, 4)
        schedule = construct_separating_flow(ds.coords, labels, groups=groups)
        final = apply_flow(ds.coords, schedule)
        assert linear_separability(final, labels).separable
        assert schedule.intervals is not None

    def test_rejects_mixed_group(self):
        with pytest.raises(TheoryError):
            construct_separating_flow(XOR_CORNERS, XOR_LABELS, groups=np.array([0, 0, 1, 1]))

    def test_rejects_inseparable_groups(self):
        inner = np.array([[0.1, 0.0], [-0.1, 0.0]])
        outer = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        with pytest.raises(TheoryError):
            construct_separating_flow(np.vstack([inner, outer]), np.array([0, 0, 1, 1, 1, 1]), groups=np.array([0, 0, 1, 1, 1, 1]))

    def test_bad_arguments(self):
        with pytest.raises(TheoryError):
            construct_separating_flow(XOR_CORNERS, XOR_LABELS, c1=1.0, c2=0.0)
        with pytest.raises(TheoryError):
            construct_separating_flow(XOR_CORNERS, np.array([0, 1, 2, 0]))
        with pytest.raises(TheoryError):
            beta_for(np.array([1.0]))


class TestLinearSeparability:
    def test_sign_split(self, rng):
        points = rng.standard_normal((20, 2))
        labels = (points[:, 0] > 0).astype(int)
        result = linear_separability(points, labels)
        assert result.separable
        assert result.margin(points, labels) > 0

    def test_xor_corners(self):
        result = linear_separability(XOR_CORNERS, XOR_LABELS)
        assert not result.separable
        np.testing.assert_allclose(result.witness, [0.5, 0.5], atol=1e-9)

    def test_single_class(self):
        points = np.array([[3.0, 1.0], [-2.0, 0.0]])
        result = linear_separability(points, np.array([1, 1]))
        assert result.separable
        assert result.margin(points, np.array([1, 1])) > 0

    def test_non_binary_labels(self):
        with pytest.raises(TheoryError):
            linear_separability(XOR_CORNERS, np.array([0, 1, 2, 1]))


class TestDynamics:
    @pytest.fixture
    def xor_setup(self, rng):
        """XOR disks with a dense Gaussian graph inside each disk and no edges across."""
        points = gen_xor(rng, n_per=30)
        sq = cdist(points.coords, points.coords, metric="sqeuclidean")
        dense = np.exp(-sq / 0.25) * (points.groups[:, None] == points.groups[None, :])
        np.fill_diagonal(dense, 0.0)
        weights = normalize_symmetric(SparseWeights.from_dense(dense))
        return StructuredDataset.from_points(points), weights

    def test_zero_gamma_is_constant(self, xor_setup):
        ds, weights = xor_setup
        trace = ratio_trace(ds, weights, 0.0, 5)
        assert trace.steps == list(range(6))
        assert len(set(trace.diameters)) == 1
        assert len(set(trace.distances)) == 1

    def test_diameter_decays_distance_holds(self, xor_setup):
        ds, weights = xor_setup
        gamma = min(1.0, stability_max_step(weights))
        trace = ratio_trace(ds, weights, gamma, 60)
        assert trace.components_match
        assert trace.diameters[-1] < 0.5 * trace.diameters[0]
        assert min(trace.distances) >= trace.distances[0] - 1e-9
        assert trace.ratios[-1] > trace.ratios[0]
        assert fit_log_decay(trace).slope < 0

    def test_size_mismatch(self, xor_setup, two_node):
        ds, _ = xor_setup
        with pytest.raises(TheoryError):
            ratio_trace(ds, two_node, 0.1, 1)

    def test_trace_csv(self, tmp_path):
        trace = RatioTrace()
        trace.append(0, 2.0, 1.0)
        trace.append(1, 0.0, 1.0)
        trace.write_csv(tmp_path / "r.csv", header_comment="h")
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert lines[1] == "step,D,L,ratio"
        assert lines[2] == "0,2.0,1.0,0.5"
        assert lines[3].endswith("nan")

    def test_fit_needs_points(self):
        trace = RatioTrace()
        trace.append(0, 1.0, 1.0)
        with pytest.raises(TheoryError):
            fit_log_decay(trace)

    def test_fit_exact_exponential(self):
        trace = RatioTrace()
        for t in range(20):
            trace.append(t, 3.0 * np.exp(-0.2 * t), 1.0)
        fit = fit_log_decay(trace)
        assert fit.slope == pytest.approx(-0.2)
        assert fit.r_squared == pytest.approx(1.0)


class TestVerifyStability:
    def test_two_node(self, two_node):
        ok = verify_stability(two_node, 1.0)
        assert ok.passed
        assert ok.spectral_radius == pytest.approx(1.0)
        assert ok.gershgorin_lower == pytest.approx(-1.0)
        bad = verify_stability(two_node, 2.0)
        assert not bad.passed
        assert bad.spectral_radius == pytest.approx(3.0)
        assert bad.to_dict()["passed"] is False

    def test_gamma_max_on_random_graph(self, make_weights):
        w = make_weights(11, 50)
        report = verify_stability(w, stability_max_step(w))
        assert report.spectral_radius == pytest.approx(1.0, abs=1e-9)
        assert report.method == "eigh"

    def test_power_fallback(self, make_weights, monkeypatch):
        monkeypatch.setenv("DIFFRES_EIGEN_LIMIT", "10")
        w = make_weights(5, 30)
        report = verify_stability(w, 0.5 * stability_max_step(w))
        assert report.method == "power"
        assert report.passed

    def test_small_gamma_passes(self):
        w = SparseWeights.from_dense(np.array([[0.0, 2.0], [2.0, 0.0]]))
        assert verify_stability(w, 1e-6).passed

    def test_negative_gamma(self, two_node):
        with pytest.raises(TheoryError):
            verify_stability(two_node, -1.0)
