import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcupsample import config
from pcupsample.config import BenchRun, ConfigError, EvaluateRun, SynthRun, UpsampleRun
from pcupsample.synth import SyntheticSpec, cosine_height, generate


def test_plane():
    c = generate(SyntheticSpec("plane", 1000, height=0.3))
    assert (c.points[:, 2] == 0.3).all()
    assert (c.normals == [0, 0, 1]).all()


def test_seed_determinism():
    a = generate(SyntheticSpec("cosine-surface", 200, seed=5))
    b = generate(SyntheticSpec("cosine-surface", 200, seed=5))
    c = generate(SyntheticSpec("cosine-surface", 200, seed=6))
    assert a.points.tobytes() == b.points.tobytes()
    assert a.points.tobytes() != c.points.tobytes()


def test_cosine_on_surface_with_normals():
    spec = SyntheticSpec("cosine-surface", 500, seed=1, amplitude=0.2, frequency=2)
    c = generate(spec)
    x, y, z = c.points.T
    np.testing.assert_array_equal(z, cosine_height(spec, x, y))
    # normal is orthogonal to finite-difference tangents
    h = 1e-6
    tx = np.column_stack([np.full_like(x, 2 * h), np.zeros_like(x),
                          cosine_height(spec, x + h, y) - cosine_height(spec, x - h, y)])
    ty = np.column_stack([np.zeros_like(x), np.full_like(x, 2 * h),
                          cosine_height(spec, x, y + h) - cosine_height(spec, x, y - h)])
    assert np.abs(np.einsum("ij,ij->i", c.normals, tx)).max() / (2 * h) <= 1e-6
    assert np.abs(np.einsum("ij,ij->i", c.normals, ty)).max() / (2 * h) <= 1e-6


def test_sphere_patch_on_sphere():
    spec = SyntheticSpec("sphere-patch", 2000, seed=2, radius=0.45, cap_angle=40)
    c = generate(spec)
    d = np.linalg.norm(c.points - np.array(spec.center), axis=1)
    assert np.abs(d - 0.45).max() <= 1e-12
    cos_cap = np.cos(np.radians(40))
    assert ((c.points[:, 2] - spec.center[2]) / 0.45 >= cos_cap - 1e-12).all()


@pytest.mark.parametrize("bad", [dict(shape="torus"), dict(n_points=0),
                                 dict(shape="sphere-patch", radius=0),
                                 dict(shape="sphere-patch", cap_angle=200)])
def test_synth_validation(bad):
    with pytest.raises(ValueError):
        SyntheticSpec(**bad)


@pytest.mark.parametrize("cls", [UpsampleRun, EvaluateRun, SynthRun, BenchRun])
def test_config_round_trip_defaults(cls):
    run = cls()
    assert config.loads(config.dumps(run)) == run


def test_config_round_trip_values():
    run = UpsampleRun(input="in.ply", output="out.ply", scale=1.5, grid="12", gamma=0.1 + 0.2,
                      timing=True, precision=32, format="ascii")
    text = config.dumps(run)
    assert "gamma = 0.30000000000000004" in text
    assert config.loads(text, UpsampleRun) == run


@settings(max_examples=50, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False), st.integers(-10**9, 10**9),
       st.text(st.characters(blacklist_categories=("Cc", "Cs", "Zl", "Zp", "Zs")), max_size=20))
def test_config_round_trip_property(x, i, s):
    run = BenchRun(rho=x, kmax=i, manifest=s)
    assert config.loads(config.dumps(run)) == run


def test_config_unknown_key():
    with pytest.raises(ConfigError, match="unknown config keys: colour"):
        config.loads("command = synth\ncolour = red\n")


def test_config_wrong_command():
    with pytest.raises(ConfigError):
        config.loads("command = synth\n", UpsampleRun)


def test_config_bad_value_and_lines():
    with pytest.raises(ConfigError, match="bad value"):
        config.loads("command = upsample\nkmax = many\n")
    with pytest.raises(ConfigError, match="expected"):
        config.loads("command = upsample\nkmax\n")
    with pytest.raises(ConfigError, match="duplicate"):
        config.loads("command = upsample\nkmax = 3\nkmax = 4\n")
    with pytest.raises(ConfigError, match="aggregation"):
        config.loads("command = evaluate\naggregation = median\n")


def test_config_comments_and_dashes():
    run = config.loads("# a comment\ncommand = upsample\nmax-iter = 7\n\n")
    assert run.max_iter == 7


def test_upsample_config_translation():
    run = UpsampleRun(grid="8", kmax=5, gamma=1.0, min_block_points=4)
    ucfg = run.upsample_config(3.0)
    assert ucfg.grid == 8 and ucfg.model.kmax == 5 and ucfg.model.gamma == 1.0
    assert ucfg.min_block_points == 4 and ucfg.scale == 3.0
    assert UpsampleRun().upsample_config(2.0).grid is None
    with pytest.raises(ConfigError):
        dataclasses.replace(run, grid="big").upsample_config(2.0)
