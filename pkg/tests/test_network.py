import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlrm.exceptions import ConfigurationError, ContractViolation, NumericalError
from nlrm.matrix_core import SamplerSpec, singular_values
from nlrm.network import (
    ACTIVATIONS,
    NetworkConfig,
    NetworkSample,
    forward,
    get_activation,
    lipschitz_probe,
    sample_network,
)
from nlrm.rng import RngStream


def test_hand_example():
    cfg = NetworkConfig(n=1, widths=(1, 1), activations="relu", bias=True)
    net = NetworkSample(np.array([[3.0]]), (np.array([[2.0]]),), (np.array([1.0]),))
    assert forward(net, cfg).output[0, 0] == 7.0


def test_identity_two_layer_product():
    gen = RngStream(0).generator
    x, w0, w1 = gen.standard_normal((4, 5)), gen.standard_normal((3, 4)), gen.standard_normal((2, 3))
    cfg = NetworkConfig(n=5, widths=(4, 3, 2), activations="identity")
    z = forward(NetworkSample(x, (w0, w1), (np.zeros(3), np.zeros(2))), cfg).output
    assert np.allclose(z, w1 @ w0 @ x / np.sqrt(4 * 3 * 2), atol=1e-14)


@pytest.mark.parametrize("name", sorted(ACTIVATIONS))
def test_activation_constants(name):
    a = ACTIVATIONS[name]
    x = np.linspace(-20, 20, 20001)
    y = a(x)
    assert np.max(np.abs(np.diff(y)) / np.diff(x)) <= a.lipschitz * (1 + 1e-6)
    assert np.max(np.abs(y)) <= a.sup_bound
    assert abs(a(np.array([0.0]))[0]) == pytest.approx(a.zero_bound)
    if a.is_odd:
        assert np.array_equal(a(-x), -y)


def test_sigmoid_is_stable():
    y = ACTIVATIONS["sigmoid"](np.array([-1000.0, 0.0, 1000.0]))
    assert np.array_equal(y, [0.0, 0.5, 1.0])


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(widths=(3, -1)),
        dict(widths=()),
        dict(widths=(3, 3), activations=("tanh", "tanh")),
        dict(widths=(3, 3), regime="A1", activations="relu"),
        dict(widths=(3, 3), regime="A4", bias=True),
        dict(widths=(3, 3), regime="A4", activations="relu"),
        dict(widths=(3, 3, 3), regime="A3", tied_transpose=(1,)),
        dict(widths=(3, 3), tied_transpose=(1,)),
        dict(widths=(3, 3), regime="A5"),
        dict(widths=(3, 3), activations="softplus"),
        dict(widths=(3, 3), bias="yes"),
    ],
)
def test_config_errors(kwargs):
    with pytest.raises(ConfigurationError):
        NetworkConfig(n=2, **kwargs)


def test_ratios():
    cfg = NetworkConfig(n=8, widths=(8, 64, 16))
    assert cfg.L == 2 and cfg.alpha == 0.5 and cfg.beta == 4.0 and cfg.eta == 8
    cfg0 = NetworkConfig(n=3, widths=(5,))
    assert cfg0.alpha is None and cfg0.beta is None


def test_config_round_trip():
    cfg = NetworkConfig(n=4, widths=(2, 6, 3), activations=("tanh", "sin"), w_init="uniform",
                        tied_transpose=(1,))
    assert NetworkConfig.from_dict(cfg.to_dict()) == cfg


def test_forward_shapes_and_determinism():
    cfg = NetworkConfig(n=7, widths=(5, 6, 4), bias=True)
    t1 = forward(sample_network(cfg, RngStream(3)), cfg)
    t2 = forward(sample_network(cfg, RngStream(3)), cfg)
    assert [z.shape for z in t1.layers] == [(5, 7), (6, 7), (4, 7)]
    assert all(np.array_equal(a, b) for a, b in zip(t1.layers, t2.layers))
    assert len(t1.hs_norms) == 3 and t1.op_norms[0] <= t1.hs_norms[0]


def test_blocks_use_separate_streams():
    # changing a later width leaves X and W_0 untouched
    a = sample_network(NetworkConfig(n=4, widths=(3, 5, 2)), RngStream(1))
    b = sample_network(NetworkConfig(n=4, widths=(3, 5, 7)), RngStream(1))
    assert np.array_equal(a.X, b.X) and np.array_equal(a.weights[0], b.weights[0])


def test_tied_transpose():
    cfg = NetworkConfig(n=1, widths=(8, 64, 16), activations="identity", tied_transpose=(1,))
    net = sample_network(cfg, RngStream(2))
    w0, w1 = net.weights
    assert w1.shape == (16, 64)
    assert np.array_equal(w1[:8], w0.T)
    square = NetworkConfig(n=1, widths=(8, 64, 8), activations="identity", tied_transpose=(1,))
    net = sample_network(square, RngStream(2))
    assert np.array_equal(net.weights[1], net.weights[0].T)


def test_odd_flip_is_exact():
    # A4: negating W_0 negates every layer, so all spectral statistics agree bit for bit
    cfg = NetworkConfig(n=20, widths=(20, 30, 20), activations=("tanh", "sin"), regime="A4")
    net = sample_network(cfg, RngStream(4))
    z = forward(net, cfg).output
    z_neg = forward(net.negated_weights([0]), cfg).output
    assert np.array_equal(z_neg, -z)
    assert np.array_equal(singular_values(z_neg), singular_values(z))


def test_bias_broadcast():
    cfg = NetworkConfig(n=3, widths=(2, 2), activations="identity", bias=True)
    net = NetworkSample(np.zeros((2, 3)), (np.eye(2),), (np.array([1.0, -2.0]),))
    assert np.array_equal(forward(net, cfg).output * np.sqrt(2), [[1, 1, 1], [-2, -2, -2]])


def test_forward_errors():
    cfg = NetworkConfig(n=2, widths=(2, 2), activations="identity")
    with pytest.raises(ContractViolation):
        forward(NetworkSample(np.zeros((3, 2)), (np.eye(2),), (np.zeros(2),)), cfg)
    big = np.full((2, 2), 1e308)
    with pytest.raises(NumericalError) as info:
        forward(NetworkSample(big, (big,), (np.zeros(2),)), cfg)
    assert info.value.diagnostics["layer"] == 1


def test_lipschitz_probe_linear():
    # deterministic, finite and of order one for a 1-Lipschitz activation
    cfg = NetworkConfig(n=10, widths=(10, 10), activations="tanh")
    r1 = lipschitz_probe(cfg, RngStream(5), 1e-6)
    assert r1 == lipschitz_probe(cfg, RngStream(5), 1e-6)
    assert 0 < r1 < 10
    with pytest.raises(ContractViolation):
        lipschitz_probe(cfg, RngStream(5), 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.lists(st.integers(1, 12), min_size=1, max_size=3),
       st.sampled_from(["tanh", "sigmoid", "clamp01", "sin"]), st.booleans(), st.integers(0, 2**32))
def test_bounded_activation_hs_bound(n, widths, act, bias, seed):
    # |entries of Z_L| <= kappa / sqrt(n_L), hence ||Z_L||_HS <= kappa sqrt(n)
    cfg = NetworkConfig(n=n, widths=(3, *widths), activations=act, bias=bias, regime="A1")
    z = forward(sample_network(cfg, RngStream(seed)), cfg).output
    kappa = get_activation(act).sup_bound
    assert np.linalg.norm(z) <= kappa * np.sqrt(n) * (1 + 1e-12)


def test_initializer_per_layer():
    cfg = NetworkConfig(n=3, widths=(2, 3, 4), w_init=["zero", SamplerSpec("gaussian", 2.0)], activations="identity")
    net = sample_network(cfg, RngStream(6))
    assert not net.weights[0].any() and net.weights[1].any()
