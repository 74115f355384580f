"""Random feed-forward networks at initialization.

The forward recursion is

    Z_0 = X / sqrt(n_0),
    Z_{l+1} = sigma_l(W_l Z_l + B_l 1_n^T) / sqrt(n_{l+1}),

with X of shape (n_0, n) holding the n samples as columns, W_l of shape
(n_{l+1}, n_l) and B_l a vector in R^{n_{l+1}}.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import check_positive_int, check_positive_real
from .exceptions import ConfigurationError, ContractViolation, NumericalError
from .matrix_core import SamplerSpec, hs_norm, operator_norm, sample
from .rng import RngStream


@dataclass(frozen=True)
class Activation:
    """Entrywise nonlinearity with its analytic constants.

    ``lipschitz`` bounds |f(x) - f(y)| / |x - y|, ``sup_bound`` bounds |f|
    (``inf`` when unbounded), ``zero_bound`` is |f(0)|.
    """

    name: str
    fn: object = field(repr=False, compare=False)
    lipschitz: float
    sup_bound: float
    zero_bound: float
    is_odd: bool

    def __call__(self, x):
        return self.fn(x)

    @property
    def is_bounded(self):
        return np.isfinite(self.sup_bound)


def _sigmoid(x):
    # split by sign so that exp never overflows
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


ACTIVATIONS = {
    a.name: a
    for a in [
        Activation("relu", lambda x: np.maximum(x, 0.0), 1.0, np.inf, 0.0, False),
        Activation("abs", np.abs, 1.0, np.inf, 0.0, False),
        Activation("tanh", np.tanh, 1.0, 1.0, 0.0, True),
        Activation("sigmoid", lambda x: _sigmoid(np.asarray(x, dtype=np.float64)), 0.25, 1.0, 0.5, False),
        Activation("sin", np.sin, 1.0, 1.0, 0.0, True),
        Activation("identity", lambda x: np.array(x, dtype=np.float64, copy=True), 1.0, np.inf, 0.0, True),
        Activation("clamp01", lambda x: np.clip(x, 0.0, 1.0), 1.0, 1.0, 0.0, False),
        Activation("clamp11", lambda x: np.clip(x, -1.0, 1.0), 1.0, 1.0, 0.0, True),
        Activation("abs_clamp", lambda x: np.minimum(np.abs(x), 1.0), 1.0, 1.0, 0.0, False),
    ]
}


def get_activation(name):
    if isinstance(name, Activation):
        return name
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ConfigurationError(f"unknown activation {name!r}; expected one of {sorted(ACTIVATIONS)}") from None


REGIMES = ("A1", "A2", "A3", "A4")


def _as_spec(value, name):
    if isinstance(value, SamplerSpec):
        return value
    if isinstance(value, str):
        return SamplerSpec(value)
    if isinstance(value, dict):
        return SamplerSpec(**value)
    raise ConfigurationError(f"{name} must be a SamplerSpec, a kind name or a mapping, got {value!r}")


def _per_layer(value, L, name, convert):
    if isinstance(value, (list, tuple)):
        if len(value) != L:
            raise ConfigurationError(f"{name} needs {L} entries (one per layer), got {len(value)}")
        return tuple(convert(v, f"{name}[{i}]") for i, v in enumerate(value))
    item = convert(value, name)
    return (item,) * L


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture and initialization laws of a random network.

    Parameters
    ----------
    n : int
        Number of samples (columns of X).
    widths : sequence of int
        ``(n_0, ..., n_L)``; ``L = len(widths) - 1``.
    activations : str or sequence of str
        One name per layer, or a single name used for every layer.
    bias : bool
        Whether bias vectors are drawn; when False they are zero.
    x_init, w_init, b_init : SamplerSpec, kind name or mapping
        Laws of X, of each W_l and of each B_l (per-layer sequences allowed).
    regime : {"A1", "A2", "A3", "A4"}
        Hypothesis set the configuration claims to satisfy; checked here.
    tied_transpose : sequence of int
        Layers l >= 1 whose weight rows are tied to the previous layer,
        ``W_l[r, :] = W_{l-1}[:, r]`` for ``r < min(n_{l+1}, n_{l-1})``;
        remaining rows are drawn independently.  When ``n_{l+1} = n_{l-1}``
        this is exactly ``W_l = W_{l-1}^T``.
    """

    n: int
    widths: tuple
    activations: tuple = "tanh"
    bias: bool = False
    x_init: SamplerSpec = SamplerSpec("gaussian_iid")
    w_init: tuple = SamplerSpec("gaussian_iid")
    b_init: tuple = SamplerSpec("uniform_iid")
    regime: str = "A2"
    tied_transpose: tuple = ()

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("n", check_positive_int(self.n, "n"))
        if isinstance(self.widths, (int, np.integer)) or len(self.widths) < 1:
            raise ConfigurationError("widths must be a non-empty sequence (n_0, ..., n_L)")
        set_("widths", tuple(check_positive_int(w, f"widths[{i}]") for i, w in enumerate(self.widths)))
        L = self.L
        set_("activations", _per_layer(self.activations, L, "activations", lambda v, _: get_activation(v).name))
        if not isinstance(self.bias, (bool, np.bool_)):
            raise ConfigurationError(f"bias must be a boolean, got {self.bias!r}")
        set_("bias", bool(self.bias))
        set_("x_init", _as_spec(self.x_init, "x_init"))
        set_("w_init", _per_layer(self.w_init, L, "w_init", _as_spec))
        set_("b_init", _per_layer(self.b_init, L, "b_init", _as_spec))
        if self.regime not in REGIMES:
            raise ConfigurationError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        tied = tuple(sorted(set(check_positive_int(t, "tied_transpose entry") for t in self.tied_transpose)))
        for t in tied:
            if t >= L:
                raise ConfigurationError(f"tied_transpose layer {t} does not exist (L = {L})")
        set_("tied_transpose", tied)
        self._check_regime()

    def _check_regime(self):
        acts = [ACTIVATIONS[a] for a in self.activations]
        r = self.regime
        if not self.x_init.is_centered or not all(w.is_centered for w in self.w_init):
            raise ConfigurationError(f"regime {r} requires centered X and W_l")
        if r == "A1" and not all(a.is_bounded for a in acts):
            bad = [a.name for a in acts if not a.is_bounded]
            raise ConfigurationError(f"regime A1 requires bounded activations, got {bad}")
        if r in ("A2", "A3") and self.bias and not all(b.is_centered for b in self.b_init):
            raise ConfigurationError(f"regime {r} requires centered biases")
        if r in ("A3", "A4") and self.tied_transpose:
            raise ConfigurationError(f"regime {r} requires independent layers; tied_transpose is not allowed")
        if r == "A4":
            if self.bias:
                raise ConfigurationError("regime A4 forbids biases (bias must be False)")
            if not all(a.is_odd for a in acts):
                raise ConfigurationError(f"regime A4 requires odd activations, got {list(self.activations)}")
            if not all(w.is_symmetric for w in self.w_init):
                raise ConfigurationError("regime A4 requires weight laws symmetric about the origin")

    @property
    def L(self):
        return len(self.widths) - 1

    @property
    def alpha(self):
        """max over l >= 1 of n / n_l (None when L = 0)."""
        return max(self.n / w for w in self.widths[1:]) if self.L else None

    @property
    def beta(self):
        """max over l >= 1 of n_{l-1} / n_l (None when L = 0)."""
        return max(a / b for a, b in zip(self.widths[:-1], self.widths[1:])) if self.L else None

    @property
    def eta(self):
        return self.widths[0]

    def to_dict(self):
        return {
            "n": self.n,
            "widths": list(self.widths),
            "activations": list(self.activations),
            "bias": self.bias,
            "x_init": self.x_init.to_dict(),
            "w_init": [w.to_dict() for w in self.w_init],
            "b_init": [b.to_dict() for b in self.b_init],
            "regime": self.regime,
            "tied_transpose": list(self.tied_transpose),
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("widths", "tied_transpose"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass(frozen=True)
class NetworkSample:
    """One realization (X, (W_l, B_l)) of the network's random blocks."""

    X: np.ndarray
    weights: tuple
    biases: tuple

    def negated_weights(self, layers=None):
        """Copy with W_l -> -W_l for the given layers (all by default)."""
        layers = range(len(self.weights)) if layers is None else layers
        weights = tuple(-w if i in layers else w for i, w in enumerate(self.weights))
        return NetworkSample(self.X, weights, self.biases)


def _free_shapes(config):
    """Shapes of the independently drawn blocks, keyed by block name."""
    shapes = {"X": (config.widths[0], config.n)}
    for ell in range(config.L):
        rows, cols = config.widths[ell + 1], config.widths[ell]
        if ell in config.tied_transpose:
            rows -= min(rows, config.widths[ell - 1])
        shapes[("W", ell)] = (rows, cols)
        if config.bias:
            shapes[("B", ell)] = (config.widths[ell + 1], 1)
    return shapes


def _spec_for(config, block):
    if block == "X":
        return config.x_init
    kind, ell = block
    return config.w_init[ell] if kind == "W" else config.b_init[ell]


def _draw_free(config, rng):
    blocks = {}
    for block, shape in _free_shapes(config).items():
        if shape[0] == 0:
            blocks[block] = np.zeros(shape)
            continue
        sub = rng.child(block) if block == "X" else rng.child(*block)
        blocks[block] = sample(_spec_for(config, block), sub, shape)
    return blocks


def _assemble(config, blocks):
    weights = []
    for ell in range(config.L):
        free = blocks[("W", ell)]
        if ell in config.tied_transpose:
            k = config.widths[ell + 1] - free.shape[0]
            w = np.vstack([weights[ell - 1][:, :k].T, free])
        else:
            w = free
        weights.append(w)
    if config.bias:
        biases = tuple(blocks[("B", ell)][:, 0] for ell in range(config.L))
    else:
        biases = tuple(np.zeros(config.widths[ell + 1]) for ell in range(config.L))
    return NetworkSample(blocks["X"], tuple(weights), biases)


def sample_network(config, rng):
    """Draw X, W_l and B_l from their laws.

    Each block reads its own sub-stream of ``rng`` (``"X"``, ``("W", l)``,
    ``("B", l)``), so blocks are independent unless explicitly tied.
    """
    return _assemble(config, _draw_free(config, rng))


class ForwardTrace:
    """All layers Z_0, ..., Z_L of one forward pass; norms are computed lazily."""

    def __init__(self, layers):
        self.layers = tuple(layers)

    @property
    def output(self):
        return self.layers[-1]

    @cached_property
    def hs_norms(self):
        return tuple(hs_norm(z) for z in self.layers)

    @cached_property
    def op_norms(self):
        return tuple(operator_norm(z) for z in self.layers)

    def __len__(self):
        return len(self.layers)


def forward(net, config):
    """Run the normalized recursion and keep every layer."""
    X = np.asarray(net.X, dtype=np.float64)
    if X.shape != (config.widths[0], config.n):
        raise ContractViolation(f"X has shape {X.shape}, expected {(config.widths[0], config.n)}")
    z = X / np.sqrt(config.widths[0])
    layers = [z]
    for ell in range(config.L):
        w, b = net.weights[ell], net.biases[ell]
        expected = (config.widths[ell + 1], config.widths[ell])
        if w.shape != expected or b.shape != (expected[0],):
            raise ContractViolation(f"layer {ell}: W has shape {w.shape}, B has shape {b.shape}; expected W {expected}")
        with np.errstate(over="ignore", invalid="ignore"):  # reported below with the layer index
            h = w @ z
            if config.bias:
                h += b[:, None]
            z = ACTIVATIONS[config.activations[ell]](h)
            z /= np.sqrt(config.widths[ell + 1])
        if not np.all(np.isfinite(z)):
            raise NumericalError(f"non-finite values in layer {ell + 1}", layer=ell + 1)
        layers.append(z)
    return ForwardTrace(layers)


def lipschitz_probe(config, rng, perturbation_scale):
    """Finite-difference Lipschitz ratio of the map (X, W, B) -> Z_L.

    Returns ||Z_L(x + d) - Z_L(x)||_HS / ||d||_2 for a Gaussian direction d
    of Euclidean norm ``perturbation_scale`` over all independently drawn
    blocks.
    """
    scale = check_positive_real(perturbation_scale, "perturbation_scale", error=ContractViolation)
    blocks = _draw_free(config, rng.child("sample"))
    drng = rng.child("direction").generator
    direction = {k: drng.standard_normal(v.shape) for k, v in blocks.items()}
    total = np.sqrt(sum(np.sum(d * d) for d in direction.values()))
    perturbed = {k: blocks[k] + direction[k] * (scale / total) for k in blocks}
    z0 = forward(_assemble(config, blocks), config).output
    z1 = forward(_assemble(config, perturbed), config).output
    return hs_norm(z1 - z0) / scale


class RandomNetworkFeatures(TransformerMixin, BaseEstimator):
    """Random network at initialization as a scikit-learn transformer.

    ``fit`` draws the weights for the number of input features; ``transform``
    maps samples-as-rows data ``X`` (shape ``(n_samples, n_0)``) to the
    transposed last layer ``Z_L^T`` (shape ``(n_samples, n_L)``).

    Parameters
    ----------
    widths : tuple of int
        Hidden and output widths ``(n_1, ..., n_L)``.
    activation : str
        Name from :data:`ACTIVATIONS`, used for every layer.
    bias : bool
    weight_init, bias_init : str
        Sampler kinds for W_l and B_l.
    weight_scale, bias_scale : float
    random_state : int, RandomState or None
    """

    def __init__(self, widths=(100,), activation="tanh", bias=False, weight_init="gaussian_iid",
                 weight_scale=1.0, bias_init="uniform_iid", bias_scale=1.0, random_state=None):
        self.widths = widths
        self.activation = activation
        self.bias = bias
        self.weight_init = weight_init
        self.weight_scale = weight_scale
        self.bias_init = bias_init
        self.bias_scale = bias_scale
        self.random_state = random_state

    def _config(self, n_features, n_samples):
        return NetworkConfig(
            n=n_samples,
            widths=(n_features, *self.widths),
            activations=self.activation,
            bias=self.bias,
            w_init=SamplerSpec(self.weight_init, self.weight_scale),
            b_init=SamplerSpec(self.bias_init, self.bias_scale),
            regime="A1" if get_activation(self.activation).is_bounded else "A2",
        )

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if isinstance(self.random_state, (int, np.integer)) and not isinstance(self.random_state, bool):
            seed = int(self.random_state)
        else:
            seed = int(check_random_state(self.random_state).randint(0, 2**31 - 1))
        config = self._config(X.shape[1], X.shape[0])
        net = _assemble(config, _draw_free(config, RngStream(seed).child("network")))
        self.weights_ = net.weights
        self.biases_ = net.biases
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "weights_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, but {type(self).__name__} is expecting "
                             f"{self.n_features_in_} features as input")
        config = self._config(X.shape[1], X.shape[0])
        net = NetworkSample(X.T, self.weights_, self.biases_)
        return forward(net, config).output.T

    def conjugate_kernel(self, X):
        """Gram matrix Z_L^T Z_L of the features of ``X`` (n_samples x n_samples)."""
        feats = self.transform(X)
        k = feats @ feats.T
        return 0.5 * (k + k.T)
