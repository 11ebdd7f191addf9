import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from romfom.costmodel import (
    CostParams,
    estimate_interface_size,
    offline_costs,
    offline_ratios,
    online_ratio,
    online_speedup,
    speedup_grid,
)
from romfom.errors import ConfigError

BURGERS = CostParams(n=500, n_F=250, r=10, s=3, k=2, n_I=2)


def test_offline_cost_examples():
    assert offline_costs(CostParams(n=200, n_F=100, r=5, s=3, k=1, n_T=10))["sfom"] == 9000
    p = CostParams(n=500, n_F=250, r=10, s=3, k=2, n_T=360)
    assert offline_costs(p)["sfom"] == pytest.approx(1_822_500)
    full = offline_costs(CostParams(n=50, n_F=50, r=5, s=3, k=2))
    assert full["sfom"] == full["global_sfom"]


def test_offline_ratio_examples():
    p = CostParams(n=40, n_F=7, r=7, s=7, k=1, n_I=0, r_g=7)
    assert offline_ratios(p)["vs_global_opinf"] == pytest.approx(2.0)
    full = CostParams(n=100, n_F=100, r=4, s=3, k=1, n_I=0)
    assert offline_ratios(full)["vs_global_sfom"] >= 1.0


def test_online_examples():
    assert online_ratio(BURGERS) == pytest.approx(0.82)
    assert online_speedup(BURGERS) == pytest.approx(1.2195, abs=1e-4)
    p = CostParams(n=10_000, n_F=1000, r=10, s=9, k=1, n_I=32)
    assert online_ratio(p) == pytest.approx(0.001 * 42 / 9 + 0.1)
    assert online_speedup(p) == pytest.approx(9.554, abs=1e-3)
    assert online_speedup(CostParams(n=100, n_F=100, r=5, s=3, k=1)) <= 1.0


def test_interface_estimates():
    assert estimate_interface_size(250, 1) == 1
    assert estimate_interface_size(1000, 2) == 32
    assert estimate_interface_size(10, 2, rule="power") == 10
    assert CostParams(n=10_000, n_F=1000, r=10, s=9, d=2).n_I == 32
    with pytest.raises(ConfigError):
        estimate_interface_size(10, 1, rule="bogus")


def test_validation():
    with pytest.raises(ConfigError):
        CostParams(n=10, n_F=20, r=1, s=3)
    with pytest.raises(ConfigError):
        CostParams(n=10, n_F=5, r=0, s=3)
    with pytest.raises(ConfigError):
        speedup_grid(BURGERS, "n_F/n", [0.5], quantity="bogus")


params = st.builds(
    lambda n, f, r, s, k, n_I, g, n_T: CostParams(n=n, n_F=max(1, int(f * n)), r=r, s=s, k=k,
                                                  n_I=n_I, r_g=max(1, int(g * r)), n_T=n_T),
    st.integers(10, 10_000), st.floats(0.01, 1.0), st.integers(1, 50), st.integers(2, 27),
    st.integers(1, 3), st.integers(0, 100), st.floats(0.5, 4.0), st.integers(1, 1000))


@settings(max_examples=60, deadline=None)
@given(params)
def test_ratios_are_cost_quotients(p):
    c = offline_costs(p)
    r = offline_ratios(p)
    coupled = c["sfom"] + c["opinf"]
    assert r["vs_global_opinf"] == pytest.approx(coupled / c["global_opinf"], rel=1e-12)
    assert r["vs_global_sfom"] == pytest.approx(coupled / c["global_sfom"], rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(params)
def test_ratios_independent_of_snapshot_count(p):
    from dataclasses import replace
    a, b = offline_ratios(p), offline_ratios(replace(p, n_T=2 * p.n_T))
    for key in a:
        assert a[key] == pytest.approx(b[key], rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(params)
def test_online_speedup_decreases_with_fom_fraction(p):
    rows = speedup_grid(p, "n_F/n", np.linspace(0.1, 1.0, 10))
    values = rows[:, 1]
    n_F = np.maximum(1, np.round(np.linspace(0.1, 1.0, 10) * p.n))
    distinct = np.diff(n_F) > 0
    assert np.all(np.diff(values)[distinct] < 0)


def test_two_axis_grid():
    rows = speedup_grid(BURGERS, "n_F/n", [0.2, 0.5], "r", [5, 10, 20])
    assert rows.shape == (6, 3)
    assert rows[4, 2] == pytest.approx(online_speedup(BURGERS))
