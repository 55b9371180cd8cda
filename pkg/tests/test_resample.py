import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from pcupsample.cloud import PointCloud
from pcupsample.partition import AxisFrame, LocalSamples
from pcupsample.resample import (
    NotTriangulable,
    UpsampleConfig,
    delaunay,
    edge_midpoints,
    place_points,
    plan_budget,
    upsample_block,
    upsample_cloud,
    upsample_original_units,
)
from pcupsample.spectral import ModelConfig, SurfaceModel, eval_model, fit_model
from pcupsample.synth import SyntheticSpec, generate

FAN = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.25, 0.25]]


def local(op, q, lower=(0.0, 0.0, 0.0), size=1.0):
    op = np.asarray(op, float)
    return LocalSamples(op[:, 0], op[:, 1], np.asarray(q, float), AxisFrame(2, 0, 1),
                        np.asarray(lower, float), size)


def test_single_triangle():
    t = delaunay([[0, 0], [1, 0], [0, 1]])
    assert len(t.triangles) == 1 and len(t.edges) == 3


def test_fan():
    t = delaunay(FAN)
    assert len(t.triangles) == 3 and len(t.edges) == 6
    np.testing.assert_array_equal(t.vertices, FAN)


@pytest.mark.parametrize("pts", [[[0, 0], [1, 1]], [[0, 0], [1, 1], [2, 2], [3, 3]],
                                 [[0.5, 0.5]] * 5])
def test_not_triangulable(pts):
    with pytest.raises(NotTriangulable):
        delaunay(pts)


def test_random_delaunay_brute_force():
    rng = np.random.default_rng(0)
    pts = rng.random((50, 2))
    t = delaunay(pts)
    assert oracles.delaunay_violations(pts.tolist(), t.triangles.tolist()) == []


def test_cocircular_grid_deterministic():
    g = np.linspace(0, 1, 5)
    pts = np.array([(x, y) for x in g for y in g])
    a, b = delaunay(pts), delaunay(pts.copy())
    np.testing.assert_array_equal(a.triangles, b.triangles)
    assert oracles.delaunay_violations(pts.tolist(), a.triangles.tolist()) == []
    # every unit cell split once: 2 * 16 triangles
    assert len(a.triangles) == 32


def test_midpoints_single_triangle():
    mid, length = edge_midpoints(delaunay([[0, 0], [1, 0], [0, 1]]))
    np.testing.assert_array_equal(mid, [[0, 0.5], [0.5, 0], [0.5, 0.5]])
    np.testing.assert_allclose(length, [1, 1, np.sqrt(2)])


def test_midpoints_fan_dedup():
    mid, _ = edge_midpoints(delaunay(FAN))
    assert len(mid) == 6


def test_midpoint_count_matches_edge_set():
    rng = np.random.default_rng(1)
    pts = rng.random((80, 2))
    t = delaunay(pts)
    edges = set()
    for a, b, c in t.triangles.tolist():
        edges |= {frozenset((a, b)), frozenset((b, c)), frozenset((a, c))}
    mid, _ = edge_midpoints(t)
    assert len(mid) == len(edges)
    expected = sorted(tuple((pts[i] + pts[j]) / 2) for i, j in map(tuple, edges))
    np.testing.assert_allclose(mid, expected, rtol=0, atol=0)


@pytest.mark.parametrize(
    "counts, scale, expected",
    [((60, 40), 2, [60, 40]), ((3,), 2, [3]), ((7, 5, 3), 2, [7, 5, 3])],
)
def test_budget_examples(counts, scale, expected):
    assert plan_budget(counts, sum(counts), scale) == expected
    assert oracles.largest_remainder(list(counts), round((scale - 1) * sum(counts))) == expected


def test_budget_redistributes_small_blocks():
    q = plan_budget([10, 2, 10], 22, 2.0)
    assert q[1] == 0 and sum(q) == 22
    assert q == [11, 0, 11]


def test_budget_ineligible_mask():
    assert plan_budget([5, 5], 10, 3.0, eligible=[True, False]) == [20, 0]


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(1, 500), min_size=1, max_size=30),
       st.floats(1.01, 6.0, allow_nan=False))
def test_budget_matches_apportionment_oracle(counts, scale):
    total = sum(counts)
    target = int(np.floor((scale - 1) * total + 0.5))
    quotas = plan_budget(counts, total, scale)
    eligible = [c if c >= 3 else 0 for c in counts]
    if sum(eligible) == 0:
        assert quotas == [0] * len(counts)
        return
    assert quotas == oracles.largest_remainder(eligible, target)
    assert sum(quotas) == target


def test_budget_validation():
    with pytest.raises(ValueError):
        plan_budget([1, 2], 4, 2.0)
    with pytest.raises(ValueError):
        plan_budget([3], 3, 1.0)


def test_upsample_block_zero_quota():
    s = local(FAN, [0.1] * 4)
    assert upsample_block(s, SurfaceModel(), 0).shape == (0, 3)


def test_upsample_block_fan_plane():
    s = local(FAN, [0.3] * 4)
    out = upsample_block(s, SurfaceModel([(0, 0, 0.3)]), 6)
    assert len(out) == 6
    np.testing.assert_array_equal(out[:, 2], 0.3)
    expected, _ = edge_midpoints(delaunay(FAN))
    np.testing.assert_array_equal(np.sort(out[:, :2], axis=0), np.sort(expected, axis=0))


def test_upsample_block_cosine_direct_evaluation():
    rng = np.random.default_rng(2)
    op = rng.random((64, 2))
    q = 0.5 + 0.1 * np.cos(np.pi * op[:, 0]) * np.cos(np.pi * op[:, 1])
    s = local(op, q)
    model = fit_model(s, ModelConfig())
    positions, rounds = place_points(s.op, 64)
    assert rounds == 1 and len(positions) == 64
    out = upsample_block(s, model, 64, UpsampleConfig(clamp_margin=1e9))
    direct = [sum(c * oracles.basis(k, l, a, b) for k, l, c in model.terms) for a, b in positions]
    np.testing.assert_allclose(out[:, 2], direct, rtol=0, atol=1e-12)


def test_longest_edges_selected_first():
    rng = np.random.default_rng(3)
    op = rng.random((30, 2))
    mid, length = edge_midpoints(delaunay(op))
    chosen, _ = place_points(op, 10)
    chosen_len = [length[np.flatnonzero((mid == c).all(axis=1))[0]] for c in chosen]
    assert min(chosen_len) >= np.sort(length)[-10]


def test_recursion_adds_rounds():
    _, rounds = place_points(np.array(FAN, float), 20)
    assert rounds >= 2
    pts, _ = place_points(np.array(FAN, float), 20)
    assert len(pts) == 20


def test_midpoints_stay_in_hull():
    from scipy.spatial import Delaunay as Hull

    rng = np.random.default_rng(4)
    op = rng.random((40, 2))
    pts, _ = place_points(op, 300)
    assert (Hull(op).find_simplex(pts, tol=1e-12) >= 0).all()


def test_clamp_bound():
    rng = np.random.default_rng(5)
    op = rng.random((20, 2))
    q = rng.random(20) * 0.1
    wild = SurfaceModel([(7, 7, 50.0)])
    out = upsample_block(local(op, q), wild, 40, UpsampleConfig(clamp_margin=0.5))
    r = q.max() - q.min()
    assert out[:, 2].min() >= q.min() - 0.5 * r and out[:, 2].max() <= q.max() + 0.5 * r


def test_block_to_global_coordinates():
    s = LocalSamples(np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]), np.array([0.6] * 3),
                     AxisFrame(0, 1, 2), np.array([0.5, 0.25, 0.75]), 0.25)
    out = upsample_block(s, SurfaceModel([(0, 0, 0.6)]), 3)
    np.testing.assert_allclose(out[:, 0], 0.6)
    assert (out[:, 1] >= 0.25).all() and (out[:, 1] <= 0.5).all()
    assert (out[:, 2] >= 0.75).all() and (out[:, 2] <= 1.0).all()


def test_upsample_cloud_plane():
    cloud = generate(SyntheticSpec("plane", 1000, seed=1, height=0.3))
    cfg = UpsampleConfig(scale=2, model=ModelConfig(gamma=1.0))
    for scale, n_out in [(2, 2000), (4, 4000)]:
        out, res = upsample_original_units(cloud, UpsampleConfig(scale, cfg.model))
        assert len(out) == n_out and res.shortfall == 0
        assert np.abs(out.points[1000:, 2] - 0.3).max() <= 1e-9
        assert out.points[:1000].tobytes() == cloud.points.tobytes()


def test_upsample_cloud_order_and_stats():
    cloud = generate(SyntheticSpec("cosine-surface", 3000, seed=2))
    from pcupsample.cloud import normalize_unit_cube

    norm, _ = normalize_unit_cube(cloud)
    res = upsample_cloud(norm, UpsampleConfig(scale=2.5))
    assert res.cloud.points[:3000].tobytes() == norm.points.tobytes()
    assert len(res.cloud) == 3000 + res.achieved
    assert sum(b.achieved for b in res.blocks) == res.achieved == res.requested == 4500
    cells = [b.cell for b in res.blocks]
    assert cells == sorted(cells)
    # new points come block by block in linear cell order
    g = res.grid
    idx = np.clip(np.floor(res.new_points * g), 0, g - 1).astype(int)
    lin = (idx[:, 0] * g + idx[:, 1]) * g + idx[:, 2]
    assert np.all(np.diff(lin) >= 0)


def test_upsample_cloud_skips_small_blocks():
    pts = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [0.95, 0.9, 0.97]]
                   + [[0.1 + 0.01 * i, 0.1 + 0.013 * (i % 5), 0.1] for i in range(20)])
    res = upsample_cloud(PointCloud(pts), UpsampleConfig(scale=2, grid=4))
    status = {b.cell: b.status for b in res.blocks}
    assert status[(3, 3, 3)] == "too_few_points"
    assert res.achieved == 23 and res.shortfall == 0


def test_upsample_cloud_deterministic():
    cloud = generate(SyntheticSpec("sphere-patch", 1500, seed=3))
    a, _ = upsample_original_units(cloud, UpsampleConfig(scale=3))
    b, _ = upsample_original_units(cloud, UpsampleConfig(scale=3))
    assert a.points.tobytes() == b.points.tobytes()


def test_config_validation():
    with pytest.raises(ValueError):
        UpsampleConfig(scale=1.0)
    with pytest.raises(ValueError):
        UpsampleConfig(min_block_points=2)
    with pytest.raises(ValueError):
        UpsampleConfig(clamp_margin=-1)


def test_eval_matches_block_output_on_midpoints():
    op = np.array(FAN, float)
    s = local(op, [0.1, 0.2, 0.3, 0.15])
    model = fit_model(s, ModelConfig(gamma=1.0))
    out = upsample_block(s, model, 6, UpsampleConfig(clamp_margin=1e9))
    np.testing.assert_array_equal(out[:, 2], eval_model(model, out[:, :2]))
