"""Joint training: clue CE + generation CE + copy-gate CE, optimized with
Adam under elementwise gradient clipping, plus an exponential moving average
of all trainable parameters.

Per-step generation likelihood is branch-supervised: a copy-labeled step
scores g_c * sum of attention over every aligned source position, a
generated step scores (1 - g_c) * P_gen(target id).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor, set_default_dtype
from .config import ModelConfig, rng_stream
from .corpus import AnnotatedExample, build_vocabulary, stopword_set
from .features import FeatureVocab
from .labeling import LabeledExample, label_corpus, label_example
from .model import QgModel

PROB_FLOOR = 1e-12


class TrainingError(RuntimeError):
    """Raised when training hits a non-finite loss."""


@dataclass
class LossBreakdown:
    loss_clue: Tensor
    loss_gen: Tensor
    loss_gate: Tensor
    total: Tensor

    def values(self) -> dict[str, float]:
        return {
            "loss_clue": self.loss_clue.item(),
            "loss_gen": self.loss_gen.item(),
            "loss_gate": self.loss_gate.item(),
            "total": self.total.item(),
        }


def _neg_log(p: Tensor) -> Tensor:
    return ad.neg(ad.log(ad.clamp_min(p, PROB_FLOOR)))


def clue_loss(clue_probs: Tensor, gold_labels: list[bool]) -> Tensor:
    """Mean cross-entropy of the per-token clue probabilities."""
    n = len(gold_labels)
    gold = np.zeros((n, 2))
    gold[np.arange(n), np.asarray(gold_labels, dtype=int)] = 1.0
    p_gold = ad.sum_(ad.mul(clue_probs, Tensor(gold)), axis=1)
    return ad.mean_(_neg_log(p_gold))


def sequence_losses(steps, example: LabeledExample) -> tuple[Tensor, Tensor]:
    """(generation CE, copy-gate CE), each averaged over decode steps."""
    n = len(example.base.passage)
    gate_terms = []
    gen_terms = []
    copy_labels = list(example.question_copy_label) + [False]  # final step predicts <EOS>
    for t, (state, dist) in enumerate(steps):
        if copy_labels[t]:
            gate_terms.append(_neg_log(state.gate))
            mask = np.zeros(n)
            mask[example.copy_alignment[t]] = 1.0
            p_copy = ad.matmul(dist.copy, Tensor(mask))
            gen_terms.append(_neg_log(ad.mul(state.gate, p_copy)))
        else:
            gate_terms.append(_neg_log(ad.sub(1.0, state.gate)))
            p_gen = dist.gen[example.question_target_id[t]]
            gen_terms.append(_neg_log(ad.mul(ad.sub(1.0, state.gate), p_gen)))
    return ad.mean_(ad.stack_scalars(gen_terms)), ad.mean_(ad.stack_scalars(gate_terms))


def losses_from_forward(config: ModelConfig, fwd, example: LabeledExample) -> LossBreakdown:
    loss_clue = clue_loss(fwd.clue.probs, example.passage_clue_label)
    loss_gen, loss_gate = sequence_losses(fwd.steps, example)
    total = ad.add(
        ad.add(ad.mul(loss_clue, config.lambda_clue), ad.mul(loss_gen, config.lambda_gen)),
        ad.mul(loss_gate, config.lambda_gate),
    )
    return LossBreakdown(loss_clue=loss_clue, loss_gen=loss_gen, loss_gate=loss_gate, total=total)


def compute_losses(
    model: QgModel,
    example: LabeledExample,
    gumbel_rng: np.random.Generator | None = None,
    dropout_rng: np.random.Generator | None = None,
    mode: str = "train",
    clue_mode: str | None = None,
    clue_source: str = "predicted",
    gumbel_noise: np.ndarray | None = None,
) -> LossBreakdown:
    """Average cross-entropies for one example (over tokens / decode steps)."""
    fwd = model.forward(
        example, mode=mode, clue_mode=clue_mode, clue_source=clue_source,
        gumbel_rng=gumbel_rng, dropout_rng=dropout_rng, gumbel_noise=gumbel_noise,
    )
    return losses_from_forward(model.config, fwd, example)


@dataclass
class OptimizerState:
    """Per-parameter Adam moments and the shared step counter."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adam_step(params: ParamStore, state: OptimizerState, config: ModelConfig) -> None:
    """Clip every gradient entry to [-clip, clip], then bias-corrected Adam."""
    state.step += 1
    t = state.step
    b1, b2 = config.beta1, config.beta2
    for name, tensor in params.items():
        g = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        g = np.clip(g, -config.clip, config.clip)
        if name not in state.m:
            state.m[name] = np.zeros_like(tensor.data)
            state.v[name] = np.zeros_like(tensor.data)
        state.m[name] = b1 * state.m[name] + (1 - b1) * g
        state.v[name] = b2 * state.v[name] + (1 - b2) * g * g
        m_hat = state.m[name] / (1 - b1 ** t)
        v_hat = state.v[name] / (1 - b2 ** t)
        tensor.data = tensor.data - config.lr * m_hat / (np.sqrt(v_hat) + config.eps)


class EmaState:
    """Shadow copy of every trainable parameter, decayed toward the params."""

    def __init__(self, params: ParamStore, decay: float):
        self.decay = decay
        self.shadow = {name: t.data.copy() for name, t in params.items()}

    def update(self, params: ParamStore) -> None:
        d = self.decay
        for name, t in params.items():
            self.shadow[name] = d * self.shadow[name] + (1 - d) * t.data

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: a.copy() for name, a in self.shadow.items()}


@dataclass
class EpochLog:
    epoch: int
    loss_clue: float
    loss_gen: float
    loss_gate: float
    total: float
    dev_total: float | None = None

    def to_json(self) -> str:
        d = {k: v for k, v in vars(self).items() if v is not None}
        return json.dumps(d, sort_keys=True)


@dataclass
class TrainResult:
    model: QgModel
    ema: EmaState
    log: list[EpochLog]
    best_dev_arrays: dict[str, np.ndarray] | None


def dev_loss(model: QgModel, labeled_dev: list[LabeledExample]) -> float:
    total = 0.0
    for ex in labeled_dev:
        total += compute_losses(model, ex, mode="eval", clue_mode="eval").total.item()
    return total / max(len(labeled_dev), 1)


def train(
    corpus: list[AnnotatedExample],
    config: ModelConfig,
    dev_corpus: list[AnnotatedExample] | None = None,
    vectors_file=None,
    progress=None,
    stop_total: float | None = None,
) -> TrainResult:
    """Full training run from a raw corpus; all randomness flows from
    config.seed through named substreams.  `stop_total` ends training early
    once an epoch's mean total loss drops below it."""
    config.validate()
    set_default_dtype(config.precision)
    init_rng = rng_stream(config.seed, "init")
    gumbel_rng = rng_stream(config.seed, "gumbel")
    dropout_rng = rng_stream(config.seed, "dropout")
    shuffle_rng = rng_stream(config.seed, "shuffle")

    stopwords = stopword_set()
    vocab = build_vocabulary(corpus, config.vocab_max)
    feature_vocab = FeatureVocab.from_corpus(corpus)
    labeled, reduced = label_corpus(corpus, vocab, stopwords, config.r_h, config.reduced_vocab_size)
    labeled_dev = None
    if dev_corpus:
        labeled_dev = [label_example(ex, vocab, reduced, stopwords, config.r_h) for ex in dev_corpus]

    model = QgModel.build(config, vocab, reduced, feature_vocab, init_rng, vectors_file)
    opt = OptimizerState()
    ema = EmaState(model.params, config.ema)

    log: list[EpochLog] = []
    best_dev = float("inf")
    best_arrays = None
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(labeled))
        sums = {"loss_clue": 0.0, "loss_gen": 0.0, "loss_gate": 0.0, "total": 0.0}
        seen = 0
        for batch_id, start in enumerate(range(0, len(order), config.batch)):
            batch = [labeled[i] for i in order[start:start + config.batch]]
            model.params.zero_grad()
            totals = []
            for ex in batch:
                breakdown = compute_losses(model, ex, gumbel_rng, dropout_rng, mode="train")
                vals = breakdown.values()
                if not all(np.isfinite(v) for v in vals.values()):
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch} batch {batch_id} "
                        f"(example {ex.base.id}): {vals}"
                    )
                totals.append(breakdown.total)
                for k in sums:
                    sums[k] += vals[k]
                seen += 1
            batch_loss = ad.mean_(ad.stack_scalars(totals))
            batch_loss.backward()
            adam_step(model.params, opt, config)
            ema.update(model.params)
        record = EpochLog(
            epoch=epoch,
            loss_clue=sums["loss_clue"] / seen,
            loss_gen=sums["loss_gen"] / seen,
            loss_gate=sums["loss_gate"] / seen,
            total=sums["total"] / seen,
        )
        if labeled_dev is not None:
            record.dev_total = dev_loss(model, labeled_dev)
            if record.dev_total < best_dev:
                best_dev = record.dev_total
                best_arrays = model.params.state_arrays()
        log.append(record)
        if progress is not None:
            progress(record)
        if stop_total is not None and record.total < stop_total:
            break
    return TrainResult(model=model, ema=ema, log=log, best_dev_arrays=best_arrays)
