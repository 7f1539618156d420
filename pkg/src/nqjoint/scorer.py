"""Start/end/type scoring heads and a small trainable reference scorer.

The reference scorer is deliberately tiny: token + position embeddings, one
single-head self-attention block with a residual connection, and three
linear heads. Per-position start/end scores read every hidden row; the type
head reads row 0 (the [CLS] slot). It exists so the joint loss and its
gradient can be exercised end to end without a full encoder; any external
model can stand in for it by writing a logits file.

All arithmetic is float64.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import InputError, NumericError, ParseError, TrainingError
from .hashing import SplitMix64, splitmix64
from .instances import TrainingInstance
from .parallel import ordered_map

log = logging.getLogger(__name__)

NUM_TYPES = 5
MAX_POSITIONS = 512
INIT_SCALE = 0.05
PARAM_NAMES = (
    "token_emb", "pos_emb",
    "w_query", "w_key", "w_value", "w_out",
    "w_start", "w_end", "w_type", "b_type",
)


@dataclass(frozen=True)
class Logits:
    start: np.ndarray
    end: np.ndarray
    type: np.ndarray

    def __len__(self) -> int:
        return len(self.start)


@dataclass
class ModelParams:
    token_emb: np.ndarray  # (vocab, d)
    pos_emb: np.ndarray    # (max_positions, d)
    w_query: np.ndarray    # (d, d)
    w_key: np.ndarray
    w_value: np.ndarray
    w_out: np.ndarray
    w_start: np.ndarray    # (d,)
    w_end: np.ndarray      # (d,)
    w_type: np.ndarray     # (d, 5)
    b_type: np.ndarray     # (5,)

    @property
    def embed_dim(self) -> int:
        return self.token_emb.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.token_emb.shape[0]

    @property
    def max_positions(self) -> int:
        return self.pos_emb.shape[0]

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, name) for name in PARAM_NAMES]

    def copy(self) -> "ModelParams":
        return ModelParams(*(a.copy() for a in self.arrays()))

    def zeros_like(self) -> "ModelParams":
        return ModelParams(*(np.zeros_like(a) for a in self.arrays()))

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def all_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays())

    def equals(self, other: "ModelParams") -> bool:
        return all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))


def param_shapes(vocab_size: int, embed_dim: int, max_positions: int = MAX_POSITIONS) -> dict[str, tuple[int, ...]]:
    d = embed_dim
    return {
        "token_emb": (vocab_size, d),
        "pos_emb": (max_positions, d),
        "w_query": (d, d),
        "w_key": (d, d),
        "w_value": (d, d),
        "w_out": (d, d),
        "w_start": (d,),
        "w_end": (d,),
        "w_type": (d, NUM_TYPES),
        "b_type": (NUM_TYPES,),
    }


def init_params(
    vocab_size: int,
    embed_dim: int = 32,
    seed: int = 0,
    max_positions: int = MAX_POSITIONS,
    zeros: bool = False,
) -> ModelParams:
    """Uniform(-0.05, 0.05) initialization from one SplitMix64 stream.

    Arrays are filled in ``PARAM_NAMES`` order, each in C order, draw k being
    ``-0.05 + 0.1 * (splitmix64_k >> 11) / 2**53``.
    """
    shapes = param_shapes(vocab_size, embed_dim, max_positions)
    if zeros:
        return ModelParams(**{name: np.zeros(shape) for name, shape in shapes.items()})
    rng = SplitMix64(seed)
    return ModelParams(**{
        name: rng.uniform_array(shape, -INIT_SCALE, INIT_SCALE) for name, shape in shapes.items()
    })


def save_params(params: ModelParams, path: str | Path, meta: dict | None = None) -> None:
    doc = {
        "format": "nqjoint-params",
        "meta": meta or {},
        "arrays": {
            name: {"shape": list(a.shape), "data": a.ravel().tolist()}
            for name, a in zip(PARAM_NAMES, params.arrays())
        },
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(doc, f, separators=(",", ":"), allow_nan=False)
        f.write("\n")


def load_params(path: str | Path) -> ModelParams:
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise ParseError("<params>", f"invalid JSON: {exc.msg}") from None
    if doc.get("format") != "nqjoint-params":
        raise ParseError("format", "not a params file")
    try:
        arrays = {
            name: np.asarray(doc["arrays"][name]["data"], dtype=np.float64).reshape(doc["arrays"][name]["shape"])
            for name in PARAM_NAMES
        }
    except KeyError as exc:
        raise ParseError(f"arrays.{exc.args[0]}", "missing") from None
    return ModelParams(**arrays)


# --------------------------------------------------------------------------
# forward / loss / backward

def log_softmax(x: np.ndarray) -> np.ndarray:
    z = x - np.max(x)
    return z - np.log(np.sum(np.exp(z)))


def softmax(x: np.ndarray) -> np.ndarray:
    z = np.exp(x - np.max(x))
    return z / np.sum(z)


def _check_ids(params: ModelParams, ids: np.ndarray) -> None:
    if len(ids) == 0:
        raise InputError("empty instance")
    if len(ids) > params.max_positions:
        raise InputError(f"instance length {len(ids)} exceeds {params.max_positions} positions")
    if ids.min() < 0 or ids.max() >= params.vocab_size:
        raise InputError(f"token id out of range for vocabulary of {params.vocab_size}")


def _forward(params: ModelParams, input_ids: Sequence[int]):
    ids = np.asarray(input_ids, dtype=np.int64)
    _check_ids(params, ids)
    n = len(ids)
    d = params.embed_dim
    x = params.token_emb[ids] + params.pos_emb[:n]
    q = x @ params.w_query
    k = x @ params.w_key
    v = x @ params.w_value
    scores = (q @ k.T) / math.sqrt(d)
    scores -= scores.max(axis=1, keepdims=True)
    attn = np.exp(scores)
    attn /= attn.sum(axis=1, keepdims=True)
    ctx = attn @ v
    h = x + ctx @ params.w_out
    logits = Logits(h @ params.w_start, h @ params.w_end, h[0] @ params.w_type + params.b_type)
    cache = (ids, x, q, k, v, attn, ctx, h)
    return logits, cache


def forward(params: ModelParams, input_ids: Sequence[int]) -> Logits:
    return _forward(params, input_ids)[0]


def loss(logits: Logits, s: int, e: int, t: int) -> float:
    """Joint negative log-likelihood of start ``s``, end ``e`` and type ``t``."""
    n = len(logits.start)
    if not (0 <= s < n and 0 <= e < n and 0 <= t < NUM_TYPES):
        raise InputError(f"target ({s}, {e}, {t}) out of range for length {n}")
    for name, arr in (("start", logits.start), ("end", logits.end), ("type", logits.type)):
        if not np.isfinite(arr).all():
            raise NumericError(f"non-finite {name} logits")
    return float(-(log_softmax(logits.start)[s] + log_softmax(logits.end)[e] + log_softmax(logits.type)[t]))


def loss_and_grad(params: ModelParams, input_ids: Sequence[int], s: int, e: int, t: int) -> tuple[float, ModelParams]:
    logits, (ids, x, q, k, v, attn, ctx, h) = _forward(params, input_ids)
    value = loss(logits, s, e, t)
    d = params.embed_dim

    d_start = softmax(logits.start)
    d_start[s] -= 1.0
    d_end = softmax(logits.end)
    d_end[e] -= 1.0
    d_type = softmax(logits.type)
    d_type[t] -= 1.0

    g = params.zeros_like()
    g.w_start = h.T @ d_start
    g.w_end = h.T @ d_end
    g.w_type = np.outer(h[0], d_type)
    g.b_type = d_type

    d_h = np.outer(d_start, params.w_start) + np.outer(d_end, params.w_end)
    d_h[0] += params.w_type @ d_type

    g.w_out = ctx.T @ d_h
    d_ctx = d_h @ params.w_out.T
    d_attn = d_ctx @ v.T
    d_v = attn.T @ d_ctx
    d_scores = attn * (d_attn - np.sum(d_attn * attn, axis=1, keepdims=True))
    d_scores /= math.sqrt(d)
    d_q = d_scores @ k
    d_k = d_scores.T @ q

    g.w_query = x.T @ d_q
    g.w_key = x.T @ d_k
    g.w_value = x.T @ d_v
    d_x = d_h + d_q @ params.w_query.T + d_k @ params.w_key.T + d_v @ params.w_value.T

    np.add.at(g.token_emb, ids, d_x)
    g.pos_emb[: len(ids)] = d_x
    return value, g


def grad(params: ModelParams, input_ids: Sequence[int], s: int, e: int, t: int) -> ModelParams:
    return loss_and_grad(params, input_ids, s, e, t)[1]


def batch_loss_and_grad(params: ModelParams, batch: Sequence[TrainingInstance]) -> tuple[float, ModelParams]:
    """Mean loss and gradient over ``batch``, reduced in batch order."""
    total = 0.0
    acc = params.zeros_like()
    for inst in batch:
        value, g = loss_and_grad(params, inst.input_ids, inst.target_start, inst.target_end, int(inst.answer_type))
        total += value
        for a, b in zip(acc.arrays(), g.arrays()):
            a += b
    scale = 1.0 / len(batch)
    for a in acc.arrays():
        a *= scale
    return total * scale, acc


def mean_loss(params: ModelParams, instances: Sequence[TrainingInstance]) -> float:
    return sum(
        loss(forward(params, i.input_ids), i.target_start, i.target_end, int(i.answer_type)) for i in instances
    ) / len(instances)


# --------------------------------------------------------------------------
# training

@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 3e-5
    batch_size: int = 8
    epochs: int = 1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    embed_dim: int = 32

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0 or self.embed_dim < 1:
            raise InputError("learning_rate, batch_size and embed_dim must be positive; epochs >= 0")


@dataclass
class TrainResult:
    params: ModelParams
    epoch_losses: list[float] = field(default_factory=list)
    steps: int = 0


class Adam:
    def __init__(self, params: ModelParams, config: TrainConfig):
        self.config = config
        self.m = params.zeros_like()
        self.v = params.zeros_like()
        self.t = 0

    def step(self, params: ModelParams, g: ModelParams) -> None:
        c = self.config
        self.t += 1
        corr1 = 1.0 - c.beta1 ** self.t
        corr2 = 1.0 - c.beta2 ** self.t
        for p, gi, m, v in zip(params.arrays(), g.arrays(), self.m.arrays(), self.v.arrays()):
            m *= c.beta1
            m += (1.0 - c.beta1) * gi
            v *= c.beta2
            v += (1.0 - c.beta2) * gi * gi
            p -= c.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + c.eps)


def train(
    instances: Sequence[TrainingInstance],
    config: TrainConfig,
    vocab_size: int,
    params: ModelParams | None = None,
) -> TrainResult:
    """Constant-rate Adam over shuffled mini-batches.

    Initial params come from ``init_params(seed=config.seed)`` unless given;
    batch order is a SplitMix64 Fisher-Yates shuffle seeded with
    ``splitmix64(seed)``, reshuffled every epoch.
    """
    if not instances:
        raise InputError("training needs at least one instance")
    params = params.copy() if params is not None else init_params(vocab_size, config.embed_dim, config.seed)
    result = TrainResult(params)
    if config.epochs == 0:
        return result
    opt = Adam(params, config)
    order_rng = SplitMix64(splitmix64(config.seed))
    order = list(range(len(instances)))
    for epoch in range(config.epochs):
        order_rng.shuffle(order)
        total = 0.0
        for b in range(0, len(order), config.batch_size):
            batch = [instances[i] for i in order[b:b + config.batch_size]]
            try:
                value, g = batch_loss_and_grad(params, batch)
            except NumericError as exc:
                raise TrainingError(str(exc), opt.t) from None
            if not math.isfinite(value):
                raise TrainingError("loss is not finite", opt.t)
            opt.step(params, g)
            if not params.all_finite():
                raise TrainingError("parameters diverged", opt.t)
            total += value * len(batch)
        result.epoch_losses.append(total / len(order))
        log.info("epoch %d/%d mean loss %.6f", epoch + 1, config.epochs, result.epoch_losses[-1])
    result.steps = opt.t
    return result


# --------------------------------------------------------------------------
# logits records

@dataclass(frozen=True)
class LogitsRecord:
    example_id: int
    window_start: int
    start_logits: np.ndarray
    end_logits: np.ndarray
    type_logits: np.ndarray

    @property
    def key(self) -> tuple[int, int]:
        return (self.example_id, self.window_start)

    @property
    def logits(self) -> Logits:
        return Logits(self.start_logits, self.end_logits, self.type_logits)

    def to_dict(self) -> dict:
        return {
            "example_id": self.example_id,
            "window_start": self.window_start,
            "start_logits": self.start_logits.tolist(),
            "end_logits": self.end_logits.tolist(),
            "type_logits": self.type_logits.tolist(),
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "LogitsRecord":
        try:
            out = cls(
                int(rec["example_id"]),
                int(rec["window_start"]),
                np.asarray(rec["start_logits"], dtype=np.float64),
                np.asarray(rec["end_logits"], dtype=np.float64),
                np.asarray(rec["type_logits"], dtype=np.float64),
            )
        except KeyError as exc:
            raise ParseError(exc.args[0], "missing field in logits record") from None
        except (TypeError, ValueError) as exc:
            raise ParseError("<logits>", str(exc)) from None
        if out.start_logits.ndim != 1 or out.start_logits.shape != out.end_logits.shape:
            raise ParseError("end_logits", "start/end logits must be equal-length vectors")
        if out.type_logits.shape != (NUM_TYPES,):
            raise ParseError("type_logits", f"expected {NUM_TYPES} values")
        return out


def score_instances(params: ModelParams, instances: Iterable[TrainingInstance], threads: int = 1) -> Iterator[LogitsRecord]:
    def work(inst: TrainingInstance) -> LogitsRecord:
        out = forward(params, inst.input_ids)
        return LogitsRecord(inst.example_id, inst.window_start, out.start, out.end, out.type)

    yield from ordered_map(work, instances, threads)
