"""Attention-LSTM forecaster for reserved-resource arrival peaks.

The base station provisions reserved uplink resources one slot ahead, so it
needs a conservative estimate of how many latency-critical devices are about
to show up. The forecaster reads a short window of recent per-slot arrival
counts and regresses the peak count over the slots the provisioning must
cover; predictions are rounded up, since over-provisioning merely wastes
resources while under-provisioning drops traffic.

The network is built from scratch on numpy so that every gradient is
transparent and testable: a first LSTM layer encodes the count window, an
additive-attention layer pools its hidden states (query: the final hidden
state), and a second LSTM layer digests the pooled vector concatenated with
all first-layer states before an affine head emits the scalar forecast.
Deleting the attention layer (``attention=False``) restores the basic
stacked wiring: the second layer then runs over the first layer's state
sequence step by step and the head reads its final state. Training is plain
mini-batch gradient descent on a root-mean-square loss, with full
backpropagation through time.

``AttentionLstmRegressor`` wraps all of this behind the familiar
fit/predict estimator interface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .traffic import TrafficTrace, windowed_max_labels

__all__ = [
    "AttentionLstmRegressor",
    "AttentionParams",
    "LstmLayerParams",
    "PredictorNetwork",
    "attend",
    "forward",
    "load_forecaster",
    "loss_and_gradients",
    "lstm_forward",
    "network_parameters",
    "predict_count",
    "rms_error",
    "save_forecaster",
    "train_forecaster",
    "training_pairs",
    "underprediction_rate",
]


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _as_generator(random_state) -> np.random.Generator:
    if isinstance(random_state, np.random.Generator):
        return random_state
    return np.random.default_rng(random_state)


# ---------------------------------------------------------------------------
# parameter containers
# ---------------------------------------------------------------------------

@dataclass
class LstmLayerParams:
    """Gate weights of one LSTM layer; each matrix is (hidden, hidden + input)."""

    w_forget: np.ndarray
    w_update: np.ndarray
    w_cell: np.ndarray
    w_output: np.ndarray
    b_forget: np.ndarray
    b_update: np.ndarray
    b_cell: np.ndarray
    b_output: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.w_forget.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_forget.shape[1] - self.w_forget.shape[0]

    @classmethod
    def initialize(cls, input_size: int, hidden_size: int, rng: np.random.Generator):
        scale = 1.0 / math.sqrt(hidden_size + input_size)

        def w():
            return rng.standard_normal((hidden_size, hidden_size + input_size)) * scale

        def b():
            return np.zeros(hidden_size)

        return cls(w(), w(), w(), w(), b(), b(), b(), b())


@dataclass
class AttentionParams:
    """Additive attention: score_j = v . tanh(Wc h_j + Wq query)."""

    v: np.ndarray
    w_context: np.ndarray
    w_query: np.ndarray

    @classmethod
    def initialize(cls, hidden_size: int, rng: np.random.Generator):
        scale = 1.0 / math.sqrt(hidden_size)
        return cls(
            v=rng.standard_normal(hidden_size) * scale,
            w_context=rng.standard_normal((hidden_size, hidden_size)) * scale,
            w_query=rng.standard_normal((hidden_size, hidden_size)) * scale,
        )


@dataclass
class PredictorNetwork:
    """Two LSTM layers around an optional attention pool, plus an affine head."""

    layer1: LstmLayerParams
    attention: AttentionParams | None
    layer2: LstmLayerParams
    head_w: np.ndarray
    head_b: np.ndarray  # shape (1,)
    input_window: int

    @property
    def hidden_size(self) -> int:
        return self.layer1.hidden_size

    @property
    def uses_attention(self) -> bool:
        return self.attention is not None


def initialize_network(
    window: int,
    hidden_size: int,
    rng: np.random.Generator,
    attention: bool = True,
) -> PredictorNetwork:
    if window < 1 or hidden_size < 1:
        raise ValueError("window and hidden_size must be positive")
    # with attention, layer 2 takes one step on concat(pooled, all states);
    # without it, layer 2 runs over the state sequence like a basic stack
    layer2_input = (window + 1) * hidden_size if attention else hidden_size
    return PredictorNetwork(
        layer1=LstmLayerParams.initialize(1, hidden_size, rng),
        attention=AttentionParams.initialize(hidden_size, rng) if attention else None,
        layer2=LstmLayerParams.initialize(layer2_input, hidden_size, rng),
        head_w=rng.standard_normal(hidden_size) / math.sqrt(hidden_size),
        head_b=np.zeros(1),
        input_window=window,
    )


def network_parameters(net: PredictorNetwork) -> dict[str, np.ndarray]:
    """Named views of every trainable array, for updates and gradient checks."""
    params = {}
    for prefix, layer in (("layer1", net.layer1), ("layer2", net.layer2)):
        for gate in ("forget", "update", "cell", "output"):
            params[f"{prefix}.w_{gate}"] = getattr(layer, f"w_{gate}")
            params[f"{prefix}.b_{gate}"] = getattr(layer, f"b_{gate}")
    if net.attention is not None:
        params["attention.v"] = net.attention.v
        params["attention.w_context"] = net.attention.w_context
        params["attention.w_query"] = net.attention.w_query
    params["head.w"] = net.head_w
    params["head.b"] = net.head_b
    return params


# ---------------------------------------------------------------------------
# forward pass
# ---------------------------------------------------------------------------

def _lstm_step(layer: LstmLayerParams, x, h_prev, c_prev):
    v = np.concatenate([h_prev, x], axis=1)
    f = _sigmoid(v @ layer.w_forget.T + layer.b_forget)
    u = _sigmoid(v @ layer.w_update.T + layer.b_update)
    cand = np.tanh(v @ layer.w_cell.T + layer.b_cell)
    o = _sigmoid(v @ layer.w_output.T + layer.b_output)
    c = f * c_prev + u * cand
    tc = np.tanh(c)
    h = o * tc
    cache = (v, f, u, cand, o, c_prev, tc)
    return h, c, cache


def _lstm_run(layer: LstmLayerParams, xs: np.ndarray):
    """Run a layer over xs of shape (steps, batch, input): returns stacked
    hidden states (steps, batch, hidden), the final cell state and caches."""
    steps, batch, _ = xs.shape
    h = np.zeros((batch, layer.hidden_size))
    c = np.zeros((batch, layer.hidden_size))
    hs, caches = [], []
    for t in range(steps):
        h, c, cache = _lstm_step(layer, xs[t], h, c)
        hs.append(h)
        caches.append(cache)
    return np.stack(hs), c, caches


def lstm_forward(
    layer: LstmLayerParams, inputs, initial: tuple[np.ndarray, np.ndarray] | None = None
):
    """Single-sequence LSTM pass: inputs (steps, input_size).

    Returns (hidden states (steps, hidden), (final hidden, final cell)).
    """
    xs = np.asarray(inputs, dtype=float)
    if xs.ndim == 1:
        xs = xs[:, None]
    if xs.ndim != 2 or xs.shape[1] != layer.input_size:
        raise ValueError("inputs must be (steps, input_size)")
    batch_xs = xs[:, None, :]
    h = np.zeros((1, layer.hidden_size))
    c = np.zeros((1, layer.hidden_size))
    if initial is not None:
        h = np.asarray(initial[0], dtype=float).reshape(1, -1).copy()
        c = np.asarray(initial[1], dtype=float).reshape(1, -1).copy()
    hs = []
    for t in range(xs.shape[0]):
        h, c, _ = _lstm_step(layer, batch_xs[t], h, c)
        hs.append(h[0])
    return np.stack(hs), (hs[-1], c[0])


def attend(params: AttentionParams, context, query):
    """Additive-attention pool of a hidden-state sequence.

    context: (steps, hidden); query: (hidden,). Scores are
    v . tanh(w_context h_j + w_query query); weights are their softmax and
    the pooled vector is the weighted sum of the context states.
    Returns (pooled vector, weights).
    """
    context = np.asarray(context, dtype=float)
    query = np.asarray(query, dtype=float)
    scores = np.tanh(context @ params.w_context.T + query @ params.w_query.T) @ params.v
    shifted = scores - scores.max()
    weights = np.exp(shifted)
    weights /= weights.sum()
    return weights @ context, weights


def _forward_batch(net: PredictorNetwork, xn: np.ndarray):
    """Forward pass on normalized windows (batch, window); returns
    (predictions (batch,), cache for backprop)."""
    batch, window = xn.shape
    if window != net.input_window:
        raise ValueError("window length does not match the network")
    xs = xn.T[:, :, None]  # (steps, batch, 1)
    h1, _, caches1 = _lstm_run(net.layer1, xs)  # (q, B, H)
    hidden = np.transpose(h1, (1, 0, 2))  # (B, q, H)
    hq = hidden[:, -1, :]
    cache = {"caches1": caches1, "hidden": hidden}

    if net.attention is not None:
        att = net.attention
        pre = hidden @ att.w_context.T + (hq @ att.w_query.T)[:, None, :]
        scored = np.tanh(pre)  # (B, q, H)
        e = scored @ att.v  # (B, q)
        e = e - e.max(axis=1, keepdims=True)
        weights = np.exp(e)
        weights /= weights.sum(axis=1, keepdims=True)
        pooled = (weights[:, :, None] * hidden).sum(axis=1)  # (B, H)
        layer2_in = np.concatenate([pooled, hidden.reshape(batch, -1)], axis=1)
        zeros = np.zeros((batch, net.hidden_size))
        h2, _, cache2 = _lstm_step(net.layer2, layer2_in, zeros, zeros)
        cache.update({"scored": scored, "weights": weights, "cache2": cache2})
    else:
        h2_seq, _, caches2 = _lstm_run(net.layer2, h1)
        h2 = h2_seq[-1]
        cache["caches2"] = caches2

    predictions = h2 @ net.head_w + net.head_b[0]
    cache["h2"] = h2
    return predictions, cache


def forward(net: PredictorNetwork, window, scale: float = 1.0) -> float:
    """Real-valued forecast for one raw count window."""
    xn = np.asarray(window, dtype=float).reshape(1, -1) / scale
    value, _ = _forward_batch(net, xn)
    return float(value[0]) * scale


def predict_count(net: PredictorNetwork, window, scale: float = 1.0) -> int:
    """Integer forecast: rounded up, never below zero."""
    return int(math.ceil(max(forward(net, window, scale), 0.0)))


# ---------------------------------------------------------------------------
# backward pass
# ---------------------------------------------------------------------------

def _lstm_step_backward(layer: LstmLayerParams, cache, dh, dc_in, grads, prefix):
    v, f, u, cand, o, c_prev, tc = cache
    do = dh * tc
    dc = dh * o * (1.0 - tc**2) + dc_in
    dpre = {
        "output": do * o * (1.0 - o),
        "update": dc * cand * u * (1.0 - u),
        "cell": dc * u * (1.0 - cand**2),
        "forget": dc * c_prev * f * (1.0 - f),
    }
    dv = np.zeros_like(v)
    for gate, d in dpre.items():
        grads[f"{prefix}.w_{gate}"] += d.T @ v
        grads[f"{prefix}.b_{gate}"] += d.sum(axis=0)
        dv += d @ getattr(layer, f"w_{gate}")
    hidden = layer.hidden_size
    return dv[:, :hidden], dv[:, hidden:], dc * f


def loss_and_gradients(net: PredictorNetwork, xn: np.ndarray, yn: np.ndarray):
    """Root-mean-square loss on normalized data and its exact gradients.

    Returns (loss, dict of gradients matching network_parameters keys).
    """
    xn = np.asarray(xn, dtype=float)
    yn = np.asarray(yn, dtype=float)
    batch = xn.shape[0]
    predictions, cache = _forward_batch(net, xn)
    residual = predictions - yn
    loss = math.sqrt(float(np.mean(residual**2)))
    grads = {name: np.zeros_like(array) for name, array in network_parameters(net).items()}
    if loss == 0.0:
        return loss, grads

    dpred = residual / (batch * loss)
    grads["head.w"] += cache["h2"].T @ dpred
    grads["head.b"] += np.array([dpred.sum()])
    dh2 = dpred[:, None] * net.head_w[None, :]

    hidden = cache["hidden"]
    batch_size, window, width = hidden.shape
    if net.attention is not None:
        _, dlayer2_in, _ = _lstm_step_backward(
            net.layer2, cache["cache2"], dh2, np.zeros_like(dh2), grads, "layer2"
        )
        att = net.attention
        weights, scored = cache["weights"], cache["scored"]
        dpooled = dlayer2_in[:, :width]
        dhidden = dlayer2_in[:, width:].reshape(batch_size, window, width).copy()
        dweights = (hidden * dpooled[:, None, :]).sum(axis=2)
        dhidden += weights[:, :, None] * dpooled[:, None, :]
        de = weights * (dweights - (weights * dweights).sum(axis=1, keepdims=True))
        grads["attention.v"] += (scored * de[:, :, None]).sum(axis=(0, 1))
        dpre = de[:, :, None] * att.v[None, None, :] * (1.0 - scored**2)
        grads["attention.w_context"] += np.einsum("bqa,bqh->ah", dpre, hidden)
        dhidden += np.einsum("bqa,ah->bqh", dpre, att.w_context)
        hq = hidden[:, -1, :]
        grads["attention.w_query"] += np.einsum("bqa,bh->ah", dpre, hq)
        dhidden[:, -1, :] += dpre.sum(axis=1) @ att.w_query
    else:
        # plain stacked wiring: only the final layer-2 state feeds the head
        dhidden = np.zeros((batch_size, window, width))
        dh_carry2 = dh2
        dc_carry2 = np.zeros_like(dh2)
        for t in reversed(range(window)):
            dh_carry2, dx, dc_carry2 = _lstm_step_backward(
                net.layer2, cache["caches2"][t], dh_carry2, dc_carry2, grads, "layer2"
            )
            dhidden[:, t, :] = dx

    dh_carry = np.zeros((batch_size, width))
    dc_carry = np.zeros((batch_size, width))
    for t in reversed(range(window)):
        dh = dhidden[:, t, :] + dh_carry
        dh_carry, _, dc_carry = _lstm_step_backward(
            net.layer1, cache["caches1"][t], dh, dc_carry, grads, "layer1"
        )
    return loss, grads


def _sgd_step(net: PredictorNetwork, grads: dict[str, np.ndarray], learning_rate: float):
    for name, array in network_parameters(net).items():
        array -= learning_rate * grads[name]


# ---------------------------------------------------------------------------
# training data and metrics
# ---------------------------------------------------------------------------

def training_pairs(trace, window: int, horizon: int):
    """Build (inputs, labels, anchors) from a count trace.

    For each start slot s the input row holds counts[s+1 .. s+window], the
    label is the peak of counts[s .. s+horizon], and the anchor is counts[s],
    the one slot of the label span the input row does not reveal. Forecast
    quality is judged against the anchor: an under-prediction there is
    exactly a provisioning failure.
    """
    counts = trace.counts if isinstance(trace, TrafficTrace) else np.asarray(trace)
    if window < 1 or horizon < 1:
        raise ValueError("window and horizon must be positive")
    n = counts.size - max(window, horizon)
    if n < 1:
        raise ValueError("trace too short for one training pair")
    inputs = sliding_window_view(counts, window)[1 : 1 + n].astype(float)
    labels = windowed_max_labels(counts, horizon)[:n].astype(float)
    anchors = counts[:n].astype(int)
    return inputs, labels, anchors


def rms_error(model, trace, window: int | None = None, horizon: int | None = None) -> float:
    """Root-mean-square gap between real-valued forecasts and peak labels."""
    window = model.window_ if window is None else window
    horizon = model.horizon_ if horizon is None else horizon
    inputs, labels, _ = training_pairs(trace, window, horizon)
    return math.sqrt(float(np.mean((model.predict_value(inputs) - labels) ** 2)))


def underprediction_rate(
    model,
    trace,
    against: str = "actual",
    window: int | None = None,
    horizon: int | None = None,
) -> float:
    """Fraction of slots whose integer forecast fell short.

    ``against="actual"`` compares with the arrival count of the one slot the
    model did not observe (the provisioning-failure probability);
    ``against="label"`` compares with the full peak label.
    """
    if against not in ("actual", "label"):
        raise ValueError("against must be 'actual' or 'label'")
    window = model.window_ if window is None else window
    horizon = model.horizon_ if horizon is None else horizon
    inputs, labels, anchors = training_pairs(trace, window, horizon)
    forecasts = model.predict(inputs)
    target = anchors if against == "actual" else labels
    return float(np.mean(forecasts < target))


# ---------------------------------------------------------------------------
# estimator
# ---------------------------------------------------------------------------

class AttentionLstmRegressor(RegressorMixin, BaseEstimator):
    """Peak-arrival regressor: stacked LSTM with an additive-attention pool.

    Parameters
    ----------
    hidden_size : width of both LSTM layers and the attention space.
    epochs, batch_size, learning_rate : plain mini-batch gradient descent
        settings; the loss is the root mean square of the residuals.
    attention : set False to bypass the attention pool (ablation), feeding
        the second layer the raw concatenation of first-layer states.
    random_state : seed or Generator for initialization and batch order.

    Attributes (after fit)
    ----------------------
    network_ : the trained PredictorNetwork.
    scale_ : normalization constant (max training label).
    loss_history_ : mean batch loss per epoch.
    window_ : input window length, taken from the training matrix.
    """

    def __init__(
        self,
        hidden_size: int = 32,
        epochs: int = 8,
        batch_size: int = 128,
        learning_rate: float = 1e-3,
        attention: bool = True,
        random_state=None,
    ):
        self.hidden_size = hidden_size
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.attention = attention
        self.random_state = random_state

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).ravel()
        if y.shape[0] != X.shape[0]:
            raise ValueError("X and y lengths differ")
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("epochs, batch_size and learning_rate must be positive")
        rng = _as_generator(self.random_state)
        window = X.shape[1]
        scale = max(float(y.max(initial=0.0)), 1.0)
        xn, yn = X / scale, y / scale

        net = initialize_network(window, self.hidden_size, rng, self.attention)
        net.head_b[0] = float(yn.mean())  # start at the mean label

        history = []
        n = xn.shape[0]
        for _ in range(self.epochs):
            order = rng.permutation(n)
            batch_losses = []
            for start in range(0, n, self.batch_size):
                rows = order[start : start + self.batch_size]
                loss, grads = loss_and_gradients(net, xn[rows], yn[rows])
                _sgd_step(net, grads, self.learning_rate)
                batch_losses.append(loss)
            history.append(float(np.mean(batch_losses)))

        self.network_ = net
        self.scale_ = scale
        self.loss_history_ = history
        self.window_ = window
        self.n_features_in_ = window
        return self

    def predict_value(self, X) -> np.ndarray:
        """Real-valued forecasts on the raw count scale."""
        check_is_fitted(self, "network_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.window_:
            raise ValueError("window length does not match the fitted network")
        values, _ = _forward_batch(self.network_, X / self.scale_)
        return values * self.scale_

    def predict(self, X) -> np.ndarray:
        """Integer forecasts: rounded up, clamped at zero."""
        return np.ceil(np.maximum(self.predict_value(X), 0.0)).astype(int)


def train_forecaster(
    trace,
    window: int = 5,
    horizon: int = 5,
    hidden_size: int = 32,
    epochs: int = 8,
    batch_size: int = 128,
    learning_rate: float = 1e-3,
    attention: bool = True,
    random_state=None,
) -> AttentionLstmRegressor:
    """Fit a peak forecaster directly on a traffic trace."""
    inputs, labels, _ = training_pairs(trace, window, horizon)
    model = AttentionLstmRegressor(
        hidden_size=hidden_size,
        epochs=epochs,
        batch_size=batch_size,
        learning_rate=learning_rate,
        attention=attention,
        random_state=random_state,
    )
    model.fit(inputs, labels)
    model.horizon_ = horizon
    return model


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------

_FORMAT_TAG = "hybridra-forecaster 1"


def save_forecaster(model: AttentionLstmRegressor, path) -> None:
    """Write a fitted forecaster as plain text, one named tensor per block."""
    check_is_fitted(model, "network_")
    net = model.network_
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{_FORMAT_TAG}\n")
        fh.write(f"window {model.window_}\n")
        fh.write(f"horizon {getattr(model, 'horizon_', model.window_)}\n")
        fh.write(f"hidden {net.hidden_size}\n")
        fh.write(f"attention {int(net.uses_attention)}\n")
        fh.write(f"scale {model.scale_!r}\n")
        for name, array in network_parameters(net).items():
            rows = array if array.ndim == 2 else array[None, :]
            fh.write(f"tensor {name} {' '.join(str(d) for d in array.shape)}\n")
            for row in rows:
                fh.write(" ".join(repr(float(x)) for x in row) + "\n")
        fh.write("end\n")


def load_forecaster(path) -> AttentionLstmRegressor:
    """Read back a forecaster written by save_forecaster."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines or lines[0] != _FORMAT_TAG:
        raise ValueError("not a forecaster file")
    header: dict[str, str] = {}
    i = 1
    while i < len(lines) and not lines[i].startswith("tensor "):
        key, value = lines[i].split(" ", 1)
        header[key] = value
        i += 1
    window = int(header["window"])
    hidden = int(header["hidden"])
    attention = bool(int(header["attention"]))
    net = initialize_network(window, hidden, np.random.default_rng(0), attention)
    params = network_parameters(net)
    while i < len(lines) and lines[i] != "end":
        _, name, *dims = lines[i].split(" ")
        shape = tuple(int(d) for d in dims)
        i += 1
        rows = shape[0] if len(shape) == 2 else 1
        data = [
            [float(x) for x in lines[i + r].split()]
            for r in range(rows)
        ]
        i += rows
        params[name][...] = np.array(data).reshape(shape)
    model = AttentionLstmRegressor(hidden_size=hidden, attention=attention)
    model.network_ = net
    model.scale_ = float(header["scale"])
    model.window_ = window
    model.horizon_ = int(header["horizon"])
    model.loss_history_ = []
    model.n_features_in_ = window
    return model
