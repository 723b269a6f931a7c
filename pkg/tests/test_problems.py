import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from irpinn.net import Jet2, MLPConfig, init_params
from irpinn.problems import (
    BURGERS_DOMAIN,
    BURGERS_NU,
    HEAT_DOMAIN,
    DataLoss,
    Domain,
    ResidualLoss,
    burgers_data,
    burgers_data_target,
    get_problem,
    heat_data,
    heat_data_target,
    heat_initial,
    lhs_sample,
    mse_f,
    mse_u,
    reference_burgers,
    reference_heat,
    reference_heat_jet,
    residual_burgers,
    residual_heat,
)


def burgers_quad(t, x, nu=BURGERS_NU):
    """Cole-Hopf solution by adaptive quadrature in the original variable."""
    width = 12.0 * math.sqrt(4.0 * nu * t)

    def expo(eta):
        return -math.cos(math.pi * (x - eta)) / (2 * math.pi * nu) - eta * eta / (4 * nu * t)

    shift = max(expo(e) for e in np.linspace(-width, width, 2001))
    den = integrate.quad(lambda e: math.exp(expo(e) - shift), -width, width, limit=400,
                         epsabs=0, epsrel=1e-13)[0]
    num = integrate.quad(lambda e: math.sin(math.pi * (x - e)) * math.exp(expo(e) - shift),
                         -width, width, limit=400, epsabs=0, epsrel=1e-13)[0]
    return -num / den


def constant_net(value):
    cfg = MLPConfig((2, 3, 1))
    p = np.zeros(cfg.n_params)
    p[-1] = value
    return cfg, p


def time_net():
    # identity activation, u(t, x) = t
    cfg = MLPConfig((2, 1, 1), activation="identity")
    return cfg, np.array([1.0, 0.0, 0.0, 1.0, 0.0])


# -- domains and sampling

def test_domain_invariants():
    with pytest.raises(ValueError):
        Domain(1.0, 0.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        Domain(0.0, 1.0, 1.0, 1.0)
    assert BURGERS_DOMAIN.contains(0.5, -1.0)
    assert not BURGERS_DOMAIN.contains(1.5, 0.0)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 300), seed=st.integers(0, 2**32 - 1), which=st.sampled_from(["b", "h"]))
def test_lhs_stratified(n, seed, which):
    d = BURGERS_DOMAIN if which == "b" else HEAT_DOMAIN
    pts = lhs_sample(n, d, seed)
    assert pts.shape == (n, 2)
    for col, lo, hi in ((0, d.t_min, d.t_max), (1, d.x_min, d.x_max)):
        strata = np.floor((pts[:, col] - lo) / (hi - lo) * n).astype(int)
        assert sorted(strata) == list(range(n))


def test_lhs_single_point_and_determinism():
    p = lhs_sample(1, HEAT_DOMAIN, 3)
    assert HEAT_DOMAIN.contains(p[0, 0], p[0, 1])
    a, b = lhs_sample(10, BURGERS_DOMAIN, 5), lhs_sample(10, BURGERS_DOMAIN, 5)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, lhs_sample(10, BURGERS_DOMAIN, 6))


def test_lhs_rejects_empty():
    with pytest.raises(ValueError):
        lhs_sample(0, BURGERS_DOMAIN, 0)


def test_data_targets_by_hand():
    assert burgers_data_target(0.0, 0.5) == pytest.approx(-1.0, abs=1e-15)
    assert burgers_data_target(0.3, 1.0) == 0.0
    assert burgers_data_target(0.3, -1.0) == 0.0
    assert heat_data_target(0.0, 5.0) == pytest.approx(0.0, abs=1e-15)
    assert heat_data_target(2.0, 0.0) == 0.0
    assert heat_data_target(0.0, 2.5) == pytest.approx(math.sqrt(2.0), rel=1e-15)


@pytest.mark.parametrize("sampler,problem", [(burgers_data, "burgers"), (heat_data, "heat")])
def test_data_points(sampler, problem):
    d = get_problem(problem).domain
    target = burgers_data_target if problem == "burgers" else heat_data_target
    data = sampler(100, 0)
    assert data.shape == (100, 3)
    assert np.all(d.contains(data[:, 0], data[:, 1]))
    on_initial = data[:, 0] == d.t_min
    on_wall = (data[:, 1] == d.x_min) | (data[:, 1] == d.x_max)
    assert np.all(on_initial | on_wall)
    assert on_initial.sum() == 50 and (data[:, 1] == d.x_min).sum() == 25
    np.testing.assert_allclose(data[:, 2], target(data[:, 0], data[:, 1]), atol=1e-15)
    assert sampler(100, 0).tobytes() == data.tobytes()
    with pytest.raises(ValueError):
        sampler(2, 0)


# -- residuals and losses

def test_residual_examples():
    zero = Jet2(0.0, 0.0, 0.0, 0.0)
    assert residual_burgers(zero) == 0.0
    assert residual_burgers(Jet2(1.0, 2.0, 3.0, 0.0)) == 5.0
    assert residual_burgers(Jet2(0.0, 0.0, 0.0, math.pi)) == pytest.approx(-0.01, rel=1e-14)
    assert residual_heat(zero, 1.0) == 0.0
    assert residual_heat(Jet2(0.0, 1.0, 0.0, 1.0), 1.0) == 0.0
    assert residual_heat(Jet2(0.0, 2.0, 0.0, 0.5), 1.0) == 1.5


def test_mse_u_examples():
    cfg, p = constant_net(1.0)
    assert mse_u(p, cfg, [[0.2, 0.1, 0.0]]) == 1.0
    assert mse_u(p, cfg, [[0.2, 0.1, 0.0], [0.5, 0.5, -2.0]]) == 5.0
    assert mse_u(p, cfg, [[0.2, 0.1, 1.0], [0.5, 0.5, 1.0]]) == 0.0
    with pytest.raises(ValueError):
        mse_u(p, cfg, np.zeros((0, 3)))


def test_mse_f_examples():
    cfg, p = time_net()
    value = lambda j: j.val
    assert mse_f(p, cfg, value, [[2.0, 0.0]]) == 4.0
    assert mse_f(p, cfg, value, [[1.0, 0.0], [2.0, 0.3], [3.0, -0.3]]) == pytest.approx(14 / 3, rel=1e-15)
    assert mse_f(p, cfg, lambda j: 0.0 * j.val, [[1.0, 0.0]]) == 0.0
    with pytest.raises(ValueError):
        mse_f(p, cfg, value, np.zeros((0, 2)))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), problem=st.sampled_from(["burgers", "heat"]))
def test_losses_nonnegative(seed, problem):
    pr = get_problem(problem)
    d = pr.domain
    cfg = MLPConfig.hidden(2, 8, input_lower=d.lower, input_upper=d.upper)
    p = init_params(cfg, seed) * 3.0
    lu, lf = pr.losses(cfg, pr.points(20, 10, seed))
    assert lu.value(p) >= 0.0 and lf.value(p) >= 0.0
    assert isinstance(lu, DataLoss) and isinstance(lf, ResidualLoss)


# -- reference solutions

def test_heat_reference_examples():
    xs = np.linspace(0, 10, 41)
    np.testing.assert_array_equal(reference_heat(0.0, xs), heat_initial(xs))
    for t in (0.0, 0.7, 5.0):
        assert reference_heat(t, 0.0) == 0.0
        assert abs(reference_heat(t, 10.0)) < 1e-15


def test_heat_reference_solves_pde():
    pts = lhs_sample(1000, HEAT_DOMAIN, 11)
    j = reference_heat_jet(pts[:, 0], pts[:, 1])
    assert np.max(np.abs(residual_heat(j, 1.0))) < 1e-12
    np.testing.assert_allclose(j.val, reference_heat(pts[:, 0], pts[:, 1]), rtol=0, atol=1e-14)


def test_heat_reference_jet_matches_fd():
    t, x, h = 1.3, 3.7, 1e-4
    j = reference_heat_jet(t, x)
    assert j.d_t == pytest.approx((reference_heat(t + h, x) - reference_heat(t - h, x)) / (2 * h), rel=1e-7)
    assert j.d_x == pytest.approx((reference_heat(t, x + h) - reference_heat(t, x - h)) / (2 * h), rel=1e-7)


def test_burgers_reference_near_initial_time():
    xs = np.linspace(-1, 1, 41)
    assert np.max(np.abs(reference_burgers(1e-4, xs) + np.sin(np.pi * xs))) < 1e-3
    np.testing.assert_array_equal(reference_burgers(0.0, xs), -np.sin(np.pi * xs))


def test_burgers_reference_odd_and_boundary():
    xs = np.linspace(0.0, 1.0, 51)
    for t in (0.25, 0.5, 0.75, 1.0):
        np.testing.assert_allclose(reference_burgers(t, -xs), -reference_burgers(t, xs), atol=1e-12)
    for t in (0.25, 0.5, 0.75):
        assert abs(reference_burgers(t, 1.0)) < 1e-3
        assert abs(reference_burgers(t, -1.0)) < 1e-3


def test_burgers_reference_quadrature_order():
    xs = np.linspace(-1, 1, 401)
    xs = xs[np.abs(xs) > 0.05]
    for t in (0.1, 0.25, 0.5, 0.75):
        a = reference_burgers(t, xs, n_nodes=100)
        b = reference_burgers(t, xs, n_nodes=200)
        assert np.max(np.abs(a - b)) < 1e-6


@pytest.mark.parametrize(
    "t,x", [(0.25, 0.3), (0.5, -0.7), (0.75, 0.06), (0.75, -0.5), (1.0, 0.2), (0.1, 0.9)]
)
def test_burgers_reference_matches_adaptive_quadrature(t, x):
    assert reference_burgers(t, x) == pytest.approx(burgers_quad(t, x), abs=1e-9)


def test_point_set_csv(tmp_path):
    pts = get_problem("heat").points(7, 5, 0)
    pts.to_csv(tmp_path / "c.csv", tmp_path / "d.csv")
    with open(tmp_path / "d.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "x", "value"]
    back = np.array(rows[1:], dtype=float)
    assert back.tobytes() == pts.data.tobytes()
    with open(tmp_path / "c.csv") as fh:
        assert len(list(csv.reader(fh))) == 8


def test_points_fixed_per_seed():
    pr = get_problem("burgers")
    a, b = pr.points(50, 10, 4), pr.points(50, 10, 4)
    assert a.collocation.tobytes() == b.collocation.tobytes()
    assert a.data.tobytes() == b.data.tobytes()
    with pytest.raises(ValueError):
        get_problem("wave")
