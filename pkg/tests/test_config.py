import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphflow.config import (RunConfig, config_from_dict, default_config_text, defaults, emit_config,
                              parse_config)
from graphflow.errors import ConfigurationError

MINIMAL = """
# S2 -> S2 fold, the default acceptance setup
domain_kind = "sphere"
target_kind = "sphere"
map_family = "dilation"
map_parameter = 0.5
resolution = 64
"""


def test_minimal_config_fills_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg == RunConfig()
    assert cfg.cfl_safety == 0.2 and cfg.tol_eps == 1e-3 and not cfg.exploratory


def test_resolution_error_names_key():
    with pytest.raises(ConfigurationError) as info:
        parse_config("resolution = 4")
    assert [k for k, _ in info.value.violations] == ["resolution"]


def test_exploratory_flag():
    cfg = parse_config("map_parameter = 1.5")
    assert cfg.exploratory
    assert not parse_config("map_parameter = 0.99").exploratory


def test_all_violations_reported_together():
    text = "\n".join(["resolution = 2", "cfl_safety = -1.0", "bogus = 3", "target_kind = 'torus'",
                      "tol_eps = 'small'", "resolution = 3", "this line is broken"])
    with pytest.raises(ConfigurationError) as info:
        parse_config(text)
    keys = [k for k, _ in info.value.violations]
    for k in ("resolution", "cfl_safety", "bogus", "target_kind", "tol_eps", "line 7"):
        assert k in keys, keys
    assert any("duplicate" in m for _, m in info.value.violations)


def test_type_checks():
    for bad in ["resolution = 64.5", "gauge_check = 1", "seed = True", "map_point = [0, 'a']",
                "t_max = inf", "max_steps = -1"]:
        with pytest.raises(ConfigurationError):
            parse_config(bad)
    assert parse_config("t_max = 3").t_max == 3.0
    assert parse_config("max_steps = None").max_steps is None


def test_curvature_sign_checked():
    with pytest.raises(ConfigurationError) as info:
        parse_config("target_kind = 'hyperbolic'")
    assert info.value.violations[0][0] == "target_curvature"
    parse_config("target_kind = 'hyperbolic'\ntarget_curvature = -1.0")


def test_identity_needs_equal_spaces():
    with pytest.raises(ConfigurationError):
        parse_config("map_family = 'identity'\ntarget_curvature = 2.0")


def test_default_text_round_trip():
    assert parse_config(default_config_text()) == RunConfig()
    assert set(defaults()) == set(RunConfig().__dict__)


valid_configs = st.builds(
    lambda **kw: config_from_dict(kw),
    target_kind=st.just("sphere"),
    target_curvature=st.floats(0.1, 4.0),
    map_family=st.sampled_from(["dilation", "constant", "stereo_scale", "random"]),
    map_parameter=st.floats(0.01, 3.0),
    resolution=st.integers(8, 512),
    cfl_safety=st.floats(1e-3, 0.5),
    t_max=st.floats(1e-3, 1e3),
    tol_eps=st.floats(1e-9, 1.0),
    tol_disp=st.one_of(st.none(), st.floats(1e-9, 1.0)),
    max_steps=st.one_of(st.none(), st.integers(0, 10**6)),
    monitor_stride=st.integers(1, 100),
    snapshot_stride=st.integers(0, 100),
    seed=st.integers(0, 2**32),
    gauge_check=st.booleans(),
    map_point=st.lists(st.floats(-1, 1), min_size=2, max_size=2),
    output_dir=st.text(st.characters(codec="ascii", exclude_categories=("Cc",)), max_size=20),
)


@settings(max_examples=80, deadline=None)
@given(valid_configs)
def test_parse_emit_round_trip(cfg):
    assert parse_config(emit_config(cfg)) == cfg


@settings(max_examples=40, deadline=None)
@given(st.floats(allow_nan=True, allow_infinity=True))
def test_positive_tolerances_enforced(x):
    ok = x > 0 and math.isfinite(x)
    try:
        cfg = parse_config(f"diam_tol = {x!r}")
    except ConfigurationError:
        assert not ok
    else:
        assert ok and cfg.diam_tol == x
