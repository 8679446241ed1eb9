"""From-scratch binary learners and the stochastic bootstrap ensemble.

Networks are trained by full-batch gradient descent on standardised inputs.
A step that raises the training loss is rejected and the learning rate is
halved, so the recorded loss never increases. Dropout is applied only at
scoring time and only when a random generator is passed in; this is what
makes repeated scoring of the same row stochastic.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from fleetrisk.rng import derive_seed, substream

LOSSES = ("log", "squared")


class DegenerateTargetError(ValueError):
    pass


@dataclass(frozen=True)
class TrainingHyper:
    learning_rate: float = 0.5
    epochs: int = 300
    l2: float = 1e-3
    hidden_sizes: tuple[int, ...] = ()
    dropout_rate: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.learning_rate <= 0 or self.epochs < 1 or self.l2 < 0:
            raise ValueError("need learning_rate > 0, epochs >= 1, l2 >= 0")
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden sizes must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_sizes"] = list(self.hidden_sizes)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "TrainingHyper":
        known = {f.name for f in fields(cls)}
        if set(data) - known:
            raise ValueError(f"unknown hyperparameter keys {sorted(set(data) - known)}")
        return cls(**data)

    def replace(self, **changes) -> "TrainingHyper":
        return TrainingHyper(**{**asdict(self), **changes})


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def layer_shapes(n_in: int, hidden: Sequence[int]) -> list[tuple[int, int]]:
    dims = [n_in, *hidden, 1]
    return [(dims[i], dims[i + 1]) for i in range(len(dims) - 1)]


def unpack(params: np.ndarray, shapes: list[tuple[int, int]]) -> list[tuple[np.ndarray, np.ndarray]]:
    out, pos = [], 0
    for a, b in shapes:
        W = params[pos:pos + a * b].reshape(a, b)
        pos += a * b
        out.append((W, params[pos:pos + b]))
        pos += b
    return out


def n_params(shapes: list[tuple[int, int]]) -> int:
    return sum(a * b + b for a, b in shapes)


def net_loss_grad(params: np.ndarray, X: np.ndarray, y: np.ndarray, shapes: list[tuple[int, int]],
                  l2: float, loss: str = "log") -> tuple[float, np.ndarray]:
    """Mean training loss plus 0.5*l2*sum(W**2), and its gradient.

    Hidden layers use tanh; the output passes through a sigmoid. ``loss`` is
    binary cross-entropy ("log") or squared error on the sigmoid output.
    """
    layers = unpack(params, shapes)
    acts = [X]
    h = X
    for W, b in layers[:-1]:
        h = np.tanh(h @ W + b)
        acts.append(h)
    W_out, b_out = layers[-1]
    z = (h @ W_out + b_out)[:, 0]
    p = sigmoid(z)
    n = len(y)
    if loss == "log":
        value = np.mean(np.logaddexp(0.0, z) - y * z)
        dz = (p - y) / n
    elif loss == "squared":
        value = np.mean((p - y) ** 2)
        dz = 2.0 * (p - y) * p * (1 - p) / n
    else:
        raise ValueError(f"unknown loss {loss!r}")
    value += 0.5 * l2 * sum(float(np.sum(W * W)) for W, _ in layers)

    grads = []
    delta = dz[:, None]
    for li in range(len(layers) - 1, -1, -1):
        W, _ = layers[li]
        a_in = acts[li]
        grads.append((a_in.T @ delta + l2 * W, delta.sum(axis=0)))
        if li > 0:
            delta = (delta @ W.T) * (1.0 - acts[li] ** 2)
    grads.reverse()
    flat = np.concatenate([np.concatenate([gW.ravel(), gb]) for gW, gb in grads])
    return float(value), flat


@dataclass(eq=False)
class NetScorer:
    """Trained network mapping feature rows to a score in [0, 1]."""

    shapes: list[tuple[int, int]]
    params: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    dropout_rate: float = 0.0
    loss: str = "log"
    loss_history: list[float] = field(default_factory=list)

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return tuple(b for _, b in self.shapes[:-1])

    def _standardize(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale

    def score(self, X, rng: np.random.Generator | None = None):
        """Scores for a row or a matrix of rows.

        With ``rng`` and a positive dropout rate, each layer input is masked
        by inverted dropout drawn from ``rng``.
        """
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        h = self._standardize(np.atleast_2d(X))
        noisy = rng is not None and self.dropout_rate > 0
        keep = 1.0 - self.dropout_rate
        layers = unpack(self.params, self.shapes)
        for li, (W, b) in enumerate(layers):
            if noisy:
                h = h * (rng.random(h.shape) < keep) / keep
            z = h @ W + b
            h = np.tanh(z) if li < len(layers) - 1 else sigmoid(z)
        out = h[:, 0]
        return float(out[0]) if single else out

    def save(self, path: str | Path) -> None:
        hidden = ",".join(str(h) for h in self.hidden_sizes) or "-"
        lines = [f"net in={self.shapes[0][0]} hidden={hidden} loss={self.loss} dropout={self.dropout_rate!r}",
                 "mean " + " ".join(repr(v) for v in self.mean.tolist()),
                 "scale " + " ".join(repr(v) for v in self.scale.tolist())]
        for li, (W, b) in enumerate(unpack(self.params, self.shapes)):
            for row in W.tolist():
                lines.append(f"W{li} " + " ".join(repr(v) for v in row))
            lines.append(f"b{li} " + " ".join(repr(v) for v in b.tolist()))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "NetScorer":
        lines = Path(path).read_text().splitlines()
        head = dict(tok.split("=", 1) for tok in lines[0].split()[1:])
        hidden = [] if head["hidden"] == "-" else [int(h) for h in head["hidden"].split(",")]
        shapes = layer_shapes(int(head["in"]), hidden)

        def values(line: str) -> list[float]:
            return [float(v) for v in line.split()[1:]]

        params = np.array([v for line in lines[3:] for v in values(line)])
        if len(params) != n_params(shapes):
            raise ValueError(f"{path}: expected {n_params(shapes)} weights, found {len(params)}")
        return cls(shapes=shapes, params=params, mean=np.array(values(lines[1])), scale=np.array(values(lines[2])),
                   dropout_rate=float(head["dropout"]), loss=head["loss"])


def _check_inputs(X, y, binary: bool) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("X must be a non-empty 2-D array")
    if len(y) != len(X):
        raise ValueError(f"X has {len(X)} rows but y has {len(y)}")
    if binary:
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("binary targets must be 0 or 1")
        if y.min() == y.max():
            raise DegenerateTargetError("both classes must be present in the targets")
    elif np.any((y < 0) | (y > 1)):
        raise ValueError("regression targets must lie in [0, 1]")
    return X, y


def _fit_net(X, y, hyper: TrainingHyper, hidden: Sequence[int], loss: str) -> NetScorer:
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale < 1e-12] = 1.0
    Xs = (X - mean) / scale
    shapes = layer_shapes(X.shape[1], hidden)
    rng = substream(hyper.seed, "init")
    parts = []
    for a, b in shapes:
        parts.append(rng.standard_normal(a * b) / np.sqrt(a))
        parts.append(np.zeros(b))
    params = np.concatenate(parts)

    lr = hyper.learning_rate
    value, grad = net_loss_grad(params, Xs, y, shapes, hyper.l2, loss)
    history = [value]
    for _ in range(hyper.epochs):
        trial = params - lr * grad
        t_value, t_grad = net_loss_grad(trial, Xs, y, shapes, hyper.l2, loss)
        if t_value > value + 1e-9:
            lr *= 0.5
            continue
        params, value, grad = trial, t_value, t_grad
        history.append(value)
    return NetScorer(shapes=shapes, params=params, mean=mean, scale=scale, dropout_rate=hyper.dropout_rate,
                     loss=loss, loss_history=history)


def fit_logistic(X, y, hyper: TrainingHyper = TrainingHyper()) -> NetScorer:
    """L2-regularised logistic regression (hidden sizes are ignored)."""
    X, y = _check_inputs(X, y, binary=True)
    return _fit_net(X, y, hyper, (), "log")


def fit_mlp(X, y, hyper: TrainingHyper) -> NetScorer:
    if not hyper.hidden_sizes:
        raise ValueError("fit_mlp needs at least one hidden layer")
    X, y = _check_inputs(X, y, binary=True)
    return _fit_net(X, y, hyper, hyper.hidden_sizes, "log")


def fit_binary(X, y, hyper: TrainingHyper) -> NetScorer:
    """Logistic regression or MLP depending on ``hyper.hidden_sizes``."""
    return fit_mlp(X, y, hyper) if hyper.hidden_sizes else fit_logistic(X, y, hyper)


def fit_sigmoid_regressor(X, target, hyper: TrainingHyper) -> NetScorer:
    """Regress targets in [0, 1] through a sigmoid output with squared error."""
    X, t = _check_inputs(X, target, binary=False)
    return _fit_net(X, t, hyper, hyper.hidden_sizes, "squared")


@dataclass(eq=False)
class StochasticEnsemble:
    members: list[NetScorer]
    seeds: list[int]

    @property
    def dropout_rate(self) -> float:
        return self.members[0].dropout_rate


def balanced_bootstrap(y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Indices with exactly equal class counts, each class drawn with replacement."""
    y = np.asarray(y)
    half = max(1, len(y) // 2)
    pos, neg = np.flatnonzero(y == 1), np.flatnonzero(y == 0)
    if len(pos) == 0 or len(neg) == 0:
        raise DegenerateTargetError("both classes must be present in the targets")
    return np.concatenate([rng.choice(neg, size=half, replace=True), rng.choice(pos, size=half, replace=True)])


def ensemble_fit(X, y, n_models: int = 5, hyper: TrainingHyper = TrainingHyper()) -> StochasticEnsemble:
    X, y = _check_inputs(X, y, binary=True)
    if n_models < 1:
        raise ValueError("n_models must be positive")
    members, seeds = [], []
    for m in range(n_models):
        seed = derive_seed(hyper.seed, "member", m)
        idx = balanced_bootstrap(y, substream(seed, "bootstrap"))
        members.append(fit_binary(X[idx], y[idx], hyper.replace(seed=seed)))
        seeds.append(seed)
    return StochasticEnsemble(members=members, seeds=seeds)


def ensemble_score(ens: StochasticEnsemble, X, n_draws: int = 20, rng: np.random.Generator | None = None):
    """Mean over members and stochastic draws; deterministic without dropout."""
    X = np.asarray(X, dtype=np.float64)
    if ens.dropout_rate == 0 or rng is None:
        return np.mean([m.score(X) for m in ens.members], axis=0)
    total = np.zeros(1 if X.ndim == 1 else len(X))
    for member in ens.members:
        for _ in range(n_draws):
            total += member.score(X, rng)
    out = total / (len(ens.members) * n_draws)
    return float(out[0]) if X.ndim == 1 else out
