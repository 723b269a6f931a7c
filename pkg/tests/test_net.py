import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irpinn.net import (
    ConfigurationError,
    FunctionLoss,
    Jet2,
    MLPConfig,
    NumericalError,
    forward,
    forward_jet,
    grad_params,
    init_params,
    load_checkpoint,
    save_checkpoint,
    unpack,
)
from irpinn.problems import BURGERS_DOMAIN, BurgersResidual, DataLoss, ResidualLoss, lhs_sample


def central_fd_grad(fun, p, h=1e-5):
    g = np.zeros_like(p)
    for i in range(p.size):
        e = np.zeros_like(p)
        e[i] = h
        g[i] = (fun(p + e) - fun(p - e)) / (2 * h)
    return g


def random_net(seed, widths=(2, 6, 5, 1), scale=0.3):
    cfg = MLPConfig(widths, input_lower=(0.0, -1.0), input_upper=(1.0, 1.0))
    rng = np.random.default_rng(seed)
    p = init_params(cfg, seed) + rng.normal(0.0, scale, cfg.n_params)
    return cfg, p


def test_config_invariants():
    with pytest.raises(ConfigurationError):
        MLPConfig((2, 1))
    with pytest.raises(ConfigurationError):
        MLPConfig((3, 4, 1))
    with pytest.raises(ConfigurationError):
        MLPConfig((2, 4, 2))
    assert MLPConfig.hidden(9, 20).layer_widths == (2,) + (20,) * 9 + (1,)


def test_param_length():
    assert MLPConfig((2, 3, 1)).n_params == 13
    assert init_params(MLPConfig((2, 3, 1)), 0).shape == (13,)


def test_init_deterministic_and_zero_biases():
    cfg = MLPConfig((2, 20, 1))
    a, b = init_params(cfg, 7), init_params(cfg, 7)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, init_params(cfg, 8))
    for W, bias in unpack(a, cfg):
        assert np.all(bias == 0.0)
        bound = math.sqrt(6.0 / sum(W.shape))
        assert np.all(np.abs(W) <= bound)


def test_forward_zero_params():
    cfg = MLPConfig((2, 8, 8, 1))
    assert forward(np.zeros(cfg.n_params), cfg, 0.3, -0.2) == 0.0
    assert forward_jet(np.zeros(cfg.n_params), cfg, 0.3, -0.2) == Jet2(0.0, 0.0, 0.0, 0.0)


def test_forward_single_neuron_by_hand():
    # u = v * tanh(a t + b x + c) + d
    cfg = MLPConfig((2, 1, 1))
    a, b, c, v, d = 0.7, -1.3, 0.2, 1.5, -0.4
    p = np.array([a, b, c, v, d])
    t, x = 0.25, 0.6
    assert forward(p, cfg, t, x) == pytest.approx(v * math.tanh(a * t + b * x + c) + d, abs=1e-15)


def test_forward_single_neuron_jet_by_hand():
    cfg = MLPConfig((2, 1, 1))
    a, b, c, v, d = 0.7, -1.3, 0.2, 1.5, -0.4
    p = np.array([a, b, c, v, d])
    s = math.tanh(a * 0.25 + b * 0.6 + c)
    j = forward_jet(p, cfg, 0.25, 0.6)
    assert j.d_t == pytest.approx(v * (1 - s * s) * a, rel=1e-14)
    assert j.d_x == pytest.approx(v * (1 - s * s) * b, rel=1e-14)
    assert j.d_xx == pytest.approx(v * (-2 * s * (1 - s * s)) * b * b, rel=1e-14)


def test_forward_permutation_invariance():
    cfg, p = random_net(3, widths=(2, 6, 1))
    (W1, b1), (W2, b2) = unpack(p, cfg)
    perm = np.array([3, 0, 5, 1, 4, 2])
    q = np.concatenate([W1[perm].ravel(), b1[perm], W2[:, perm].ravel(), b2])
    t, x = np.linspace(0, 1, 7), np.linspace(-1, 1, 7)
    np.testing.assert_allclose(forward(q, cfg, t, x), forward(p, cfg, t, x), rtol=1e-14, atol=1e-15)


def test_affine_network_jets():
    cfg = MLPConfig((2, 3, 1), activation="identity")
    rng = np.random.default_rng(0)
    p = rng.normal(size=cfg.n_params)
    (W1, b1), (W2, b2) = unpack(p, cfg)
    a, b = (W2 @ W1)[0]
    j = forward_jet(p, cfg, 0.4, 0.9)
    assert j.d_t == pytest.approx(a, rel=1e-14)
    assert j.d_x == pytest.approx(b, rel=1e-14)
    assert j.d_xx == 0.0


def test_shape_mismatch():
    cfg = MLPConfig((2, 3, 1))
    with pytest.raises(ConfigurationError):
        forward(np.zeros(12), cfg, 0.0, 0.0)
    with pytest.raises(ConfigurationError):
        forward_jet(np.zeros(14), cfg, 0.0, 0.0)


@pytest.mark.parametrize("seed", range(5))
def test_jet_matches_finite_differences(seed):
    cfg, p = random_net(seed)
    rng = np.random.default_rng(100 + seed)
    t, x = rng.uniform(0, 1), rng.uniform(-1, 1)
    h = 1e-4
    f = lambda tt, xx: forward(p, cfg, tt, xx)
    j = forward_jet(p, cfg, t, x)
    fd_t = (f(t + h, x) - f(t - h, x)) / (2 * h)
    fd_x = (f(t, x + h) - f(t, x - h)) / (2 * h)
    fd_xx = (f(t, x + h) - 2 * f(t, x) + f(t, x - h)) / (h * h)
    for got, want in ((j.d_t, fd_t), (j.d_x, fd_x), (j.d_xx, fd_xx)):
        assert abs(got - want) / max(1.0, abs(want)) < 1e-5


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**31 - 1),
    t=st.floats(0.0, 1.0),
    x=st.floats(-1.0, 1.0),
)
def test_jet_value_is_forward_bitwise(seed, t, x):
    cfg, p = random_net(seed)
    assert forward_jet(p, cfg, t, x).val == forward(p, cfg, t, x)
    ts, xs = np.array([t, 0.5]), np.array([x, -0.5])
    assert forward_jet(p, cfg, ts, xs).val.tobytes() == forward(p, cfg, ts, xs).tobytes()


@settings(max_examples=30, deadline=None)
@given(
    z0=st.floats(-2.0, 2.0),
    zx=st.floats(-2.0, 2.0),
    zxx=st.floats(-2.0, 2.0),
)
def test_tanh_second_order_rule(z0, zx, zxx):
    # single tanh layer on a quadratic pre-activation z(x) = z0 + zx x + zxx x^2 / 2
    s = math.tanh(z0)
    ds = 1 - s * s
    rule = ds * zxx - 2 * s * ds * zx * zx
    h = 1e-4
    z = lambda xx: z0 + zx * xx + 0.5 * zxx * xx * xx
    fd = (math.tanh(z(h)) - 2 * math.tanh(z(0.0)) + math.tanh(z(-h))) / (h * h)
    assert abs(rule - fd) <= 1e-6 * max(1.0, abs(fd))


def test_grad_half_norm_squared():
    loss = FunctionLoss(lambda p: 0.5 * np.dot(p, p), lambda p: p)
    p = np.array([1.0, -2.0, 3.5])
    np.testing.assert_array_equal(grad_params(p, loss), p)


def test_grad_of_constant_loss_is_zero():
    cfg, p = random_net(1)
    data = np.array([[0.0, 0.5, 1.0]])
    # a zero-weight output layer makes MSE_u independent of the hidden weights
    loss = DataLoss(MLPConfig((2, 3, 1)), data)
    q = np.zeros(13)
    g = grad_params(q, loss)
    np.testing.assert_array_equal(g[:9], 0.0)


def test_grad_non_finite_signals():
    loss = FunctionLoss(lambda p: float("nan"), lambda p: p)
    with pytest.raises(NumericalError):
        grad_params(np.ones(2), loss)


@pytest.mark.parametrize("seed", range(3))
def test_mse_f_gradient_matches_fd(seed):
    cfg, p = random_net(seed, widths=(2, 5, 4, 1))
    loss = ResidualLoss(cfg, BurgersResidual(), lhs_sample(5, BURGERS_DOMAIN, seed))
    g = grad_params(p, loss)
    fd = central_fd_grad(loss.value, p)
    assert np.max(np.abs(g - fd) / np.maximum(1.0, np.abs(fd))) < 1e-5


def test_checkpoint_roundtrip(tmp_path):
    cfg, p = random_net(4)
    path = tmp_path / "c.bin"
    save_checkpoint(path, cfg, p)
    widths, q = load_checkpoint(path)
    assert widths == cfg.layer_widths
    assert q.tobytes() == p.tobytes()
    blob = path.read_bytes()
    # header: magic, count, widths, then float64 payload
    assert blob[:8] == b"IRPINN\x00\x01"
    assert len(blob) == 8 + 4 + 4 * len(widths) + 8 * cfg.n_params


@pytest.mark.parametrize(
    "mangle",
    [lambda b: b[:-3], lambda b: b"XXXXXXXX" + b[8:], lambda b: b[:10], lambda b: b + b"\x00" * 8],
)
def test_corrupt_checkpoint(tmp_path, mangle):
    cfg, p = random_net(4)
    path = tmp_path / "c.bin"
    save_checkpoint(path, cfg, p)
    path.write_bytes(mangle(path.read_bytes()))
    with pytest.raises(ConfigurationError):
        load_checkpoint(path)


def test_determinism_across_calls():
    cfg, p = random_net(9)
    pts = lhs_sample(50, BURGERS_DOMAIN, 2)
    loss = ResidualLoss(cfg, BurgersResidual(), pts)
    v1, g1 = loss.value_and_grad(p)
    v2, g2 = loss.value_and_grad(p)
    assert v1 == v2 and g1.tobytes() == g2.tobytes()
