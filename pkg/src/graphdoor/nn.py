"""Framework-free graph classification stack.

Dense numpy forward/backward for GCN, GIN and GraphSAGE layers with mean
pooling, softmax cross-entropy, Adam, and the reweighted clean+poisoned
training objective. Everything is float64 and deterministic under seeds.
"""

from __future__ import annotations

import hashlib
import json
import weakref
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .core import Graph, GraphDataset, GraphdoorError
from .poison import PoisonedDataset
from .rng import substream


class TrainingError(GraphdoorError):
    def __init__(self, epoch: int, message: str):
        self.epoch = epoch
        super().__init__(f"epoch {epoch}: {message}")


@dataclass(frozen=True)
class ModelConfig:
    arch: str = "gcn"  # "gcn" | "gin" | "sage"
    num_layers: int = 3
    hidden_dim: int = 64
    num_classes: int = 2
    gin_eps: float = 0.0
    gin_eps_learnable: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.arch not in ("gcn", "gin", "sage"):
            raise ValueError(f"unknown architecture {self.arch!r}")
        if self.num_layers < 1 or self.hidden_dim < 1:
            raise ValueError("num_layers and hidden_dim must be >= 1")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    weight_decay: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.learning_rate <= 0 or self.batch_size < 1:
            raise ValueError("invalid training hyperparameters")


@dataclass
class TrainedModel:
    config: ModelConfig
    input_dim: int
    params: dict[str, np.ndarray]
    train_log: list[float] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def copy(self) -> "TrainedModel":
        return TrainedModel(
            self.config,
            self.input_dim,
            {k: v.copy() for k, v in self.params.items()},
            list(self.train_log),
            dict(self.provenance),
        )


def models_equal(a: TrainedModel, b: TrainedModel) -> bool:
    return (
        a.config == b.config
        and a.input_dim == b.input_dim
        and set(a.params) == set(b.params)
        and all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
    )


# ---------------------------------------------------------------------------
# per-graph sparse operators, cached on the (immutable) graph


_OPS_CACHE: "weakref.WeakKeyDictionary[Graph, dict]" = weakref.WeakKeyDictionary()


def _graph_ops(g: Graph) -> dict:
    ops = _OPS_CACHE.get(g)
    if ops is not None:
        return ops
    n = g.num_nodes
    if g.edges:
        e = np.array(g.edges, dtype=np.int64)
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        data = np.ones(len(rows), dtype=np.float64)
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        data = np.zeros(0, dtype=np.float64)
    adj = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    deg = np.asarray(adj.sum(axis=1)).ravel()
    # GCN: symmetric normalization with self-loops
    inv_sqrt = 1.0 / np.sqrt(deg + 1.0)
    gcn = sp.csr_matrix(
        (inv_sqrt[rows] * data * inv_sqrt[cols], (rows, cols)), shape=(n, n)
    ) + sp.diags(inv_sqrt * inv_sqrt)
    gcn = gcn.tocsr()
    # SAGE: row-normalized neighbor mean (zero rows for isolated nodes)
    inv_deg = np.where(deg > 0, 1.0 / np.maximum(deg, 1.0), 0.0)
    mean_op = sp.csr_matrix((inv_deg[rows] * data, (rows, cols)), shape=(n, n))
    ops = {"adj": adj, "gcn": gcn, "mean": mean_op, "mean_t": mean_op.T.tocsr()}
    _OPS_CACHE[g] = ops
    return ops


# ---------------------------------------------------------------------------
# parameters


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_model(config: ModelConfig, input_dim: int) -> TrainedModel:
    """Glorot-uniform initialization from the config seed."""
    rng = substream(config.seed, "init", config.arch)
    params: dict[str, np.ndarray] = {}
    in_dim = input_dim
    h = config.hidden_dim
    for l in range(config.num_layers):
        if config.arch == "gin":
            params[f"layer{l}.W1"] = _glorot(rng, in_dim, h)
            params[f"layer{l}.b1"] = np.zeros(h)
            params[f"layer{l}.W2"] = _glorot(rng, h, h)
            params[f"layer{l}.b2"] = np.zeros(h)
            if config.gin_eps_learnable:
                params[f"layer{l}.eps"] = np.array([config.gin_eps])
        elif config.arch == "sage":
            params[f"layer{l}.W_self"] = _glorot(rng, in_dim, h)
            params[f"layer{l}.W_nbr"] = _glorot(rng, in_dim, h)
            params[f"layer{l}.b"] = np.zeros(h)
        else:
            params[f"layer{l}.W"] = _glorot(rng, in_dim, h)
            params[f"layer{l}.b"] = np.zeros(h)
        in_dim = h
    params["head.W"] = _glorot(rng, h, config.num_classes)
    params["head.b"] = np.zeros(config.num_classes)
    return TrainedModel(config, input_dim, params, [], {"seed": config.seed})


# ---------------------------------------------------------------------------
# forward / backward


def _forward_graph(model: TrainedModel, g: Graph, keep_cache: bool = False):
    """Per-graph forward pass; returns (probs, hidden_states, cache)."""
    if g.feature_dim != model.input_dim:
        raise ValueError(
            f"graph feature dim {g.feature_dim} != model input dim {model.input_dim}"
        )
    cfg = model.config
    p = model.params
    ops = _graph_ops(g)
    H = g.features
    cache = [] if keep_cache else None
    hidden = []
    for l in range(cfg.num_layers):
        if cfg.arch == "gcn":
            Z = ops["gcn"] @ H
            U = Z @ p[f"layer{l}.W"] + p[f"layer{l}.b"]
            Hn = np.maximum(U, 0.0)
            if keep_cache:
                cache.append(("gcn", H, Z, U))
        elif cfg.arch == "gin":
            eps = (
                float(p[f"layer{l}.eps"][0])
                if cfg.gin_eps_learnable
                else cfg.gin_eps
            )
            Z = (1.0 + eps) * H + ops["adj"] @ H
            U1 = Z @ p[f"layer{l}.W1"] + p[f"layer{l}.b1"]
            R = np.maximum(U1, 0.0)
            U2 = R @ p[f"layer{l}.W2"] + p[f"layer{l}.b2"]
            Hn = np.maximum(U2, 0.0)
            if keep_cache:
                cache.append(("gin", H, Z, U1, R, U2))
        else:  # sage
            Zn = ops["mean"] @ H
            U = H @ p[f"layer{l}.W_self"] + Zn @ p[f"layer{l}.W_nbr"] + p[f"layer{l}.b"]
            Hn = np.maximum(U, 0.0)
            if keep_cache:
                cache.append(("sage", H, Zn, U))
        H = Hn
        hidden.append(H)
    readout = H.mean(axis=0)
    logits = readout @ p["head.W"] + p["head.b"]
    shifted = logits - logits.max()
    exp = np.exp(shifted)
    probs = exp / exp.sum()
    if keep_cache:
        cache.append(("head", readout, probs))
    return probs, hidden, cache


def forward(model: TrainedModel, g: Graph) -> np.ndarray:
    """Class-probability vector for one graph."""
    probs, _, _ = _forward_graph(model, g)
    return probs


def predict(model: TrainedModel, g: Graph) -> int:
    """Argmax class; ties broken by lowest class index."""
    return int(np.argmax(forward(model, g)))


def predict_dataset(model: TrainedModel, ds: GraphDataset) -> list[int]:
    return [predict(model, g) for g in ds]


def activations(model: TrainedModel, g: Graph, layer: int) -> np.ndarray:
    """Mean post-activation hidden state at the given layer."""
    if not (0 <= layer < model.config.num_layers):
        raise IndexError(f"layer {layer} out of range")
    _, hidden, _ = _forward_graph(model, g)
    return hidden[layer].mean(axis=0)


def _backward_graph(model: TrainedModel, g: Graph, label: int, grads: dict, weight: float):
    """Accumulate weight * dCE/dparam into grads; returns weighted CE loss."""
    cfg = model.config
    p = model.params
    ops = _graph_ops(g)
    probs, hidden, cache = _forward_graph(model, g, keep_cache=True)
    _, readout, _ = cache[-1]
    loss = -np.log(max(probs[label], 1e-300))
    dlogits = probs.copy()
    dlogits[label] -= 1.0
    dlogits *= weight
    grads["head.W"] += np.outer(readout, dlogits)
    grads["head.b"] += dlogits
    dreadout = p["head.W"] @ dlogits
    dH = np.tile(dreadout / g.num_nodes, (g.num_nodes, 1))
    for l in range(cfg.num_layers - 1, -1, -1):
        entry = cache[l]
        if cfg.arch == "gcn":
            _, H, Z, U = entry
            dU = dH * (U > 0)
            grads[f"layer{l}.W"] += Z.T @ dU
            grads[f"layer{l}.b"] += dU.sum(axis=0)
            dZ = dU @ p[f"layer{l}.W"].T
            dH = ops["gcn"] @ dZ  # symmetric operator
        elif cfg.arch == "gin":
            _, H, Z, U1, R, U2 = entry
            eps = (
                float(p[f"layer{l}.eps"][0]) if cfg.gin_eps_learnable else cfg.gin_eps
            )
            dU2 = dH * (U2 > 0)
            grads[f"layer{l}.W2"] += R.T @ dU2
            grads[f"layer{l}.b2"] += dU2.sum(axis=0)
            dR = dU2 @ p[f"layer{l}.W2"].T
            dU1 = dR * (U1 > 0)
            grads[f"layer{l}.W1"] += Z.T @ dU1
            grads[f"layer{l}.b1"] += dU1.sum(axis=0)
            dZ = dU1 @ p[f"layer{l}.W1"].T
            if cfg.gin_eps_learnable:
                grads[f"layer{l}.eps"] += np.array([float((H * dZ).sum())])
            dH = (1.0 + eps) * dZ + ops["adj"] @ dZ
        else:
            _, H, Zn, U = entry
            dU = dH * (U > 0)
            grads[f"layer{l}.W_self"] += H.T @ dU
            grads[f"layer{l}.W_nbr"] += Zn.T @ dU
            grads[f"layer{l}.b"] += dU.sum(axis=0)
            dH = dU @ p[f"layer{l}.W_self"].T + ops["mean_t"] @ (
                dU @ p[f"layer{l}.W_nbr"].T
            )
    return weight * loss


def loss_and_grad(model: TrainedModel, batch, weights=None):
    """Weighted-mean cross-entropy over the batch and exact gradients.

    batch is a list of (Graph, label); weights default to 1 per sample.
    """
    if not batch:
        raise ValueError("empty batch")
    if weights is None:
        weights = [1.0] * len(batch)
    grads = {k: np.zeros_like(v) for k, v in model.params.items()}
    total = 0.0
    inv = 1.0 / len(batch)
    for (g, label), w in zip(batch, weights):
        total += _backward_graph(model, g, label, grads, w * inv)
    return float(total), grads


def sample_weights(data) -> tuple[list, list[float]]:
    """Flatten a dataset into (graph, label) samples with the combined-loss
    weights: clean samples |D|/|D_clean|, poisoned(j) samples |D|/(m*|D_p(j)|).
    """
    if isinstance(data, PoisonedDataset):
        ds = data.dataset
        counts = data.poisoned_counts()
        m_active = sum(1 for c in counts if c > 0)
        n_clean = sum(1 for t in data.origin if t == -1)
        n_total = len(ds)
        weights = []
        for tag in data.origin:
            if tag == -1:
                weights.append(n_total / n_clean if n_clean else 0.0)
            else:
                weights.append(n_total / (m_active * counts[tag]))
        samples = [(g, g.label) for g in ds]
        return samples, weights
    ds = data
    return [(g, g.label) for g in ds], [1.0] * len(ds)


def train(model_init: TrainedModel, data, tc: TrainConfig) -> TrainedModel:
    """Adam minibatch training on the reweighted clean+poisoned objective."""
    samples, weights = sample_weights(data)
    if not samples:
        raise ValueError("empty training data")
    model = model_init.copy()
    params = model.params
    m_state = {k: np.zeros_like(v) for k, v in params.items()}
    v_state = {k: np.zeros_like(v) for k, v in params.items()}
    rng = substream(tc.seed, "train-shuffle")
    step = 0
    log = []
    n = len(samples)
    for epoch in range(tc.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, tc.batch_size):
            idx = order[start : start + tc.batch_size]
            batch = [samples[i] for i in idx]
            bw = [weights[i] for i in idx]
            loss, grads = loss_and_grad(model, batch, bw)
            if not np.isfinite(loss):
                raise TrainingError(epoch, "loss diverged (non-finite)")
            epoch_loss += loss * len(batch)
            step += 1
            for k in params:
                gk = grads[k]
                if tc.weight_decay and not k.endswith((".b", ".b1", ".b2")):
                    gk = gk + tc.weight_decay * params[k]
                m_state[k] = tc.beta1 * m_state[k] + (1 - tc.beta1) * gk
                v_state[k] = tc.beta2 * v_state[k] + (1 - tc.beta2) * gk * gk
                m_hat = m_state[k] / (1 - tc.beta1**step)
                v_hat = v_state[k] / (1 - tc.beta2**step)
                params[k] = params[k] - tc.learning_rate * m_hat / (
                    np.sqrt(v_hat) + tc.eps
                )
        log.append(float(epoch_loss) / n)
    model.params = params
    model.train_log = log
    model.provenance = {
        "init_seed": model_init.config.seed,
        "train_seed": tc.seed,
        "data_hash": dataset_hash(data.dataset if isinstance(data, PoisonedDataset) else data),
        "epochs": tc.epochs,
    }
    return model


# ---------------------------------------------------------------------------
# checkpoints and hashing


def dataset_hash(ds: GraphDataset) -> str:
    h = hashlib.sha256()
    h.update(f"{len(ds)}|{ds.num_classes}|{ds.feature_kind.value}".encode())
    for g in ds:
        h.update(f"{g.num_nodes}|{g.label}|{g.edges}".encode())
        h.update(np.ascontiguousarray(g.features).tobytes())
    return h.hexdigest()


def save_model(model: TrainedModel, path) -> None:
    doc = {
        "format_version": 1,
        "config": {
            "arch": model.config.arch,
            "num_layers": model.config.num_layers,
            "hidden_dim": model.config.hidden_dim,
            "num_classes": model.config.num_classes,
            "gin_eps": model.config.gin_eps,
            "gin_eps_learnable": model.config.gin_eps_learnable,
            "seed": model.config.seed,
        },
        "input_dim": model.input_dim,
        "params": {
            k: {"shape": list(v.shape), "data": v.ravel().tolist()}
            for k, v in model.params.items()
        },
        "train_log": model.train_log,
        "provenance": model.provenance,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path) -> TrainedModel:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != 1:
        raise ValueError(f"unsupported checkpoint version {doc.get('format_version')}")
    config = ModelConfig(**doc["config"])
    params = {
        k: np.array(v["data"], dtype=np.float64).reshape(v["shape"])
        for k, v in doc["params"].items()
    }
    return TrainedModel(
        config, doc["input_dim"], params, doc.get("train_log", []), doc.get("provenance", {})
    )
