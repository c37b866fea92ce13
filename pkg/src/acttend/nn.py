"""Five-layer weighted GCN with mean pooling and a logistic head, in plain numpy.

Forward, manual backward, Adam training and JSON checkpoints.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

N_GCN_LAYERS = 5
N_NODE_FEATURES = 3
BCE_EPS = 1e-7
CHECKPOINT_VERSION = 1


class CheckpointFormatError(ValueError):
    pass


@dataclass
class ModelParams:
    gcn_weights: list[np.ndarray]
    gcn_biases: list[np.ndarray]
    fc_weight: np.ndarray
    fc_bias: float
    feature_mean: np.ndarray = field(default_factory=lambda: np.zeros(N_NODE_FEATURES))
    feature_std: np.ndarray = field(default_factory=lambda: np.ones(N_NODE_FEATURES))
    train_seed: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def hidden_dim(self) -> int:
        return self.fc_weight.shape[0]

    def arrays(self) -> list[np.ndarray]:
        """Trainable parameters as a flat list (fc bias as a 1-vector)."""
        out = []
        for w, b in zip(self.gcn_weights, self.gcn_biases):
            out += [w, b]
        return out + [self.fc_weight, np.array([self.fc_bias])]

    def with_arrays(self, arrays: list[np.ndarray]) -> "ModelParams":
        L = len(self.gcn_weights)
        return ModelParams(
            gcn_weights=[arrays[2 * l] for l in range(L)],
            gcn_biases=[arrays[2 * l + 1] for l in range(L)],
            fc_weight=arrays[2 * L],
            fc_bias=float(arrays[2 * L + 1][0]),
            feature_mean=self.feature_mean.copy(),
            feature_std=self.feature_std.copy(),
            train_seed=self.train_seed,
            extra=dict(self.extra),
        )

    def validate(self):
        if len(self.gcn_weights) != N_GCN_LAYERS or len(self.gcn_biases) != N_GCN_LAYERS:
            raise CheckpointFormatError(f"expected {N_GCN_LAYERS} GCN layers, got {len(self.gcn_weights)}")
        d_in = N_NODE_FEATURES
        for l, (w, b) in enumerate(zip(self.gcn_weights, self.gcn_biases)):
            if w.ndim != 2 or w.shape[0] != d_in or b.shape != (w.shape[1],):
                raise CheckpointFormatError(f"layer {l}: weight {w.shape} / bias {b.shape} do not chain from width {d_in}")
            d_in = w.shape[1]
        if self.fc_weight.shape != (d_in,):
            raise CheckpointFormatError(f"fc weight shape {self.fc_weight.shape} != ({d_in},)")
        if self.feature_mean.shape != (N_NODE_FEATURES,) or self.feature_std.shape != (N_NODE_FEATURES,):
            raise CheckpointFormatError("feature_norm must hold 3 means and 3 stds")
        if not np.all(self.feature_std > 0):
            raise CheckpointFormatError("feature_norm std entries must be > 0")
        if not all(np.all(np.isfinite(a)) for a in self.arrays()):
            raise CheckpointFormatError("non-finite parameter")

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        mine, theirs = self.arrays(), other.arrays()
        return (
            len(mine) == len(theirs)
            and all(a.shape == b.shape and np.array_equal(a, b) for a, b in zip(mine, theirs))
            and np.array_equal(self.feature_mean, other.feature_mean)
            and np.array_equal(self.feature_std, other.feature_std)
            and self.train_seed == other.train_seed
        )


def init_params(
    hidden_dim: int = 32,
    rng: np.random.Generator | None = None,
    feature_mean: np.ndarray | None = None,
    feature_std: np.ndarray | None = None,
) -> ModelParams:
    """Xavier-uniform weights, zero biases."""
    rng = rng if rng is not None else np.random.default_rng(0)
    dims = [N_NODE_FEATURES] + [hidden_dim] * N_GCN_LAYERS

    def xavier(fan_in, fan_out, shape):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=shape)

    ws = [xavier(dims[l], dims[l + 1], (dims[l], dims[l + 1])) for l in range(N_GCN_LAYERS)]
    bs = [np.zeros(dims[l + 1]) for l in range(N_GCN_LAYERS)]
    fc_w = xavier(hidden_dim, 1, (hidden_dim,))
    return ModelParams(
        ws,
        bs,
        fc_w,
        0.0,
        np.zeros(N_NODE_FEATURES) if feature_mean is None else np.asarray(feature_mean, dtype=np.float64),
        np.ones(N_NODE_FEATURES) if feature_std is None else np.asarray(feature_std, dtype=np.float64),
    )


def zero_params(hidden_dim: int = 32) -> ModelParams:
    p = init_params(hidden_dim)
    return p.with_arrays([np.zeros_like(a) for a in p.arrays()])


def propagation_matrix(graph) -> np.ndarray:
    """Dense ``D^-1/2 (A_w + I) D^-1/2``.

    Degrees sum absolute weights so negative (cosine) weights cannot produce a
    non-positive degree; for nonnegative weights this is the usual GCN rule.
    """
    n = graph.n_nodes
    a = np.zeros((n, n))
    if len(graph.edges):
        i, j = graph.edges[:, 0], graph.edges[:, 1]
        a[i, j] = graph.edge_weights
        a[j, i] = graph.edge_weights
    a.flat[:: n + 1] += 1.0
    dinv = 1.0 / np.sqrt(np.abs(a).sum(axis=1))
    a *= dinv[:, None]
    a *= dinv[None, :]
    return a


def standardize_features(features: np.ndarray, params: ModelParams) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != N_NODE_FEATURES:
        raise ValueError(f"node features must be (n, {N_NODE_FEATURES}), got {features.shape}")
    return (features - params.feature_mean) / params.feature_std


def sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _forward(s: np.ndarray, x: np.ndarray, params: ModelParams):
    """Return the logit and the activations the backward pass needs."""
    h = x
    cache = []
    last = len(params.gcn_weights) - 1
    for l, (w, b) in enumerate(zip(params.gcn_weights, params.gcn_biases)):
        sh = s @ h
        z = sh @ w + b
        cache.append((sh, z))
        h = z if l == last else np.maximum(z, 0.0)
    g = h.mean(axis=0)
    logit = float(params.fc_weight @ g + params.fc_bias)
    return logit, (cache, g)


def _backward(s: np.ndarray, params: ModelParams, cache, dlogit: float) -> list[np.ndarray]:
    layers, g = cache
    n = s.shape[0]
    grads_fc_w = dlogit * g
    dh = np.broadcast_to(dlogit * params.fc_weight / n, (n, params.hidden_dim))
    grads = []
    last = len(params.gcn_weights) - 1
    for l in range(last, -1, -1):
        sh, z = layers[l]
        dz = dh if l == last else dh * (z > 0)
        grads.append(dz.sum(axis=0))
        grads.append(sh.T @ dz)
        if l:
            # s is symmetric
            dh = s @ (dz @ params.gcn_weights[l].T)
    grads.reverse()
    return grads + [grads_fc_w, np.array([dlogit])]


def gcn_forward(graph, params: ModelParams) -> float:
    """Probability that ``graph`` comes from a clustered dataset."""
    logit, _ = _forward(propagation_matrix(graph), standardize_features(graph.node_features, params), params)
    return sigmoid(logit)


def node_embeddings(graph, params: ModelParams) -> np.ndarray:
    """Output of the last GCN layer, one row per node (before pooling)."""
    _, (layers, _) = _forward(propagation_matrix(graph), standardize_features(graph.node_features, params), params)
    return layers[-1][1]


def gcn_logit(graph, params: ModelParams) -> float:
    logit, _ = _forward(propagation_matrix(graph), standardize_features(graph.node_features, params), params)
    return logit


def bce_loss(p: float, y: bool | float, eps: float = BCE_EPS) -> float:
    p = min(max(float(p), eps), 1.0 - eps)
    y = float(y)
    return -(y * math.log(p) + (1.0 - y) * math.log(1.0 - p))


def backward(graph, params: ModelParams, y: bool | float) -> ModelParams:
    """Gradient of ``bce_loss(gcn_forward(graph), y)``, shaped like ``params``.

    Uses the logit-space derivative ``p - y``, which is exact whenever ``p`` lies
    inside the loss clamp ``[eps, 1 - eps]``.
    """
    s = propagation_matrix(graph)
    logit, cache = _forward(s, standardize_features(graph.node_features, params), params)
    return params.with_arrays(_backward(s, params, cache, sigmoid(logit) - float(y)))


def predict(graph, params: ModelParams, threshold: float = 0.5) -> tuple[float, bool]:
    p = gcn_forward(graph, params)
    return p, p >= threshold


@dataclass(frozen=True)
class TrainConfig:
    hidden_dim: int = 32
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 16
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.hidden_dim < 1 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("hidden_dim, epochs and batch_size must be positive")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if not self.adam_eps > 0:
            raise ValueError("adam_eps must be > 0")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class TrainLog:
    epoch_loss: list[float] = field(default_factory=list)
    epoch_accuracy: list[float] = field(default_factory=list)
    val_accuracy: float | None = None

    def to_csv(self, path: str | Path):
        lines = ["epoch,mean_loss,train_accuracy"]
        lines += [f"{e + 1},{l!r},{a!r}" for e, (l, a) in enumerate(zip(self.epoch_loss, self.epoch_accuracy))]
        if self.val_accuracy is not None:
            lines.append(f"val,,{self.val_accuracy!r}")
        Path(path).write_text("\n".join(lines) + "\n")


def corpus_feature_norm(graphs) -> tuple[np.ndarray, np.ndarray]:
    feats = np.concatenate([g.node_features for g in graphs], axis=0)
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    std[std == 0] = 1.0
    return mean, std


class Adam:
    def __init__(self, arrays, lr, beta1, beta2, eps):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(a) for a in arrays]
        self.v = [np.zeros_like(a) for a in arrays]
        self.t = 0

    def step(self, arrays, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        out = []
        for a, g, m, v in zip(arrays, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            out.append(a - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps))
        return out


def _prepare(graphs, params):
    return [(propagation_matrix(g), standardize_features(g.node_features, params)) for g in graphs]


def evaluate(graphs, labels, params: ModelParams, threshold: float = 0.5) -> tuple[float, float]:
    """Mean BCE loss and accuracy of ``params`` on a labelled set."""
    loss = correct = 0.0
    for g, y in zip(graphs, labels):
        p = gcn_forward(g, params)
        loss += bce_loss(p, y)
        correct += (p >= threshold) == bool(y)
    return loss / len(graphs), correct / len(graphs)


def train(
    corpus,
    cfg: TrainConfig | None = None,
    val=None,
    cache_limit_bytes: int = 1 << 30,
) -> tuple[ModelParams, TrainLog]:
    """Fit a fresh model on ``corpus``, a list of ``(GraphRep, label)`` pairs.

    Propagation matrices are cached while they fit in ``cache_limit_bytes``;
    past that they are rebuilt each step (same arithmetic, same result).
    """
    cfg = cfg or TrainConfig()
    corpus = list(corpus)
    if not corpus:
        raise ValueError("training corpus is empty")
    graphs = [g for g, _ in corpus]
    labels = np.array([float(bool(y)) for _, y in corpus])
    if labels.min() == labels.max():
        raise ValueError("training corpus must contain both classes")

    rng = np.random.default_rng(cfg.seed)
    mean, std = corpus_feature_norm(graphs)
    params = init_params(cfg.hidden_dim, rng, mean, std)
    params.train_seed = cfg.seed
    xs = [standardize_features(g.node_features, params) for g in graphs]
    cached: dict[int, np.ndarray] = {}
    budget = cache_limit_bytes
    for idx, g in enumerate(graphs):
        size = g.n_nodes**2 * 8
        if size > budget:
            break
        cached[idx] = propagation_matrix(g)
        budget -= size

    arrays = params.arrays()
    opt = Adam(arrays, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    tlog = TrainLog()
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(graphs))
        loss_sum = correct = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            current = params.with_arrays(arrays)
            acc = None
            for idx in batch:
                s = cached.get(idx)
                if s is None:
                    s = propagation_matrix(graphs[idx])
                logit, cache = _forward(s, xs[idx], current)
                p = sigmoid(logit)
                y = labels[idx]
                loss_sum += bce_loss(p, y)
                correct += (p >= 0.5) == bool(y)
                grads = _backward(s, current, cache, p - y)
                acc = grads if acc is None else [a + g for a, g in zip(acc, grads)]
            arrays = opt.step(arrays, [a / len(batch) for a in acc])
        tlog.epoch_loss.append(loss_sum / len(graphs))
        tlog.epoch_accuracy.append(correct / len(graphs))
        log.debug("epoch %d loss %.4f acc %.3f", epoch + 1, tlog.epoch_loss[-1], tlog.epoch_accuracy[-1])

    params = params.with_arrays(arrays)
    if val is not None:
        val = list(val)
        _, tlog.val_accuracy = evaluate([g for g, _ in val], [y for _, y in val], params)
    return params, tlog


def save_checkpoint(params: ModelParams, path: str | Path) -> Path:
    # repr() of a Python float is the shortest string that round-trips exactly
    obj = {
        "format_version": CHECKPOINT_VERSION,
        "hidden_dim": params.hidden_dim,
        "layers": [{"w": w.tolist(), "b": b.tolist()} for w, b in zip(params.gcn_weights, params.gcn_biases)],
        "fc": {"w": params.fc_weight.tolist(), "b": params.fc_bias},
        "feature_norm": {"mean": params.feature_mean.tolist(), "std": params.feature_std.tolist()},
        "train_seed": params.train_seed,
    }
    obj.update(params.extra)
    path = Path(path)
    path.write_text(json.dumps(obj))
    return path


def load_checkpoint(path: str | Path, expected_hidden_dim: int | None = None) -> ModelParams:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except FileNotFoundError:
        raise
    except (OSError, UnicodeDecodeError) as exc:
        raise OSError(f"cannot read checkpoint {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CheckpointFormatError(f"{path}: not valid checkpoint JSON ({exc.msg} at char {exc.pos})") from exc
    if not isinstance(obj, dict):
        raise CheckpointFormatError(f"{path}: checkpoint must be a JSON object")
    try:
        if obj["format_version"] != CHECKPOINT_VERSION:
            raise CheckpointFormatError(f"{path}: unsupported format_version {obj['format_version']}")
        hidden = int(obj["hidden_dim"])
        params = ModelParams(
            gcn_weights=[np.array(layer["w"], dtype=np.float64) for layer in obj["layers"]],
            gcn_biases=[np.array(layer["b"], dtype=np.float64) for layer in obj["layers"]],
            fc_weight=np.array(obj["fc"]["w"], dtype=np.float64),
            fc_bias=float(obj["fc"]["b"]),
            feature_mean=np.array(obj["feature_norm"]["mean"], dtype=np.float64),
            feature_std=np.array(obj["feature_norm"]["std"], dtype=np.float64),
            train_seed=obj.get("train_seed"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CheckpointFormatError):
            raise
        raise CheckpointFormatError(f"{path}: malformed checkpoint ({exc!r})") from exc
    params.extra = {k: v for k, v in obj.items() if k not in {"format_version", "hidden_dim", "layers", "fc", "feature_norm", "train_seed"}}
    params.validate()
    if params.hidden_dim != hidden:
        raise CheckpointFormatError(f"{path}: header hidden_dim={hidden} but weights have width {params.hidden_dim}")
    if expected_hidden_dim is not None and hidden != expected_hidden_dim:
        raise CheckpointFormatError(f"{path}: checkpoint hidden_dim={hidden}, expected {expected_hidden_dim}")
    return params
