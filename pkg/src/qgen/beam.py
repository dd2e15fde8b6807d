"""Beam-search question generation over the extended output distribution.

At every step the generation and copy paths are merged per surface token
(probabilities of identical strings summed) before pruning; hypotheses are
ranked by length-normalized log-probability and finish on <EOS>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .autodiff import Tensor, no_grad
from .corpus import EOS, SOS, AnnotatedExample
from .decoder import decode_step, init_decoder, zero_context
from .encoder import encode
from .model import QgModel
from .training import PROB_FLOOR


@dataclass
class BeamHypothesis:
    tokens: list[str]      # emitted surface tokens; <EOS> terminates
    log_prob: float
    s: Tensor
    c: Tensor
    w_prev: Tensor
    finished: bool

    @property
    def score(self) -> float:
        """Length-normalized ranking score."""
        return self.log_prob / max(len(self.tokens), 1)

    def surface(self) -> list[str]:
        return [t for t in self.tokens if t != EOS]


def _surface_probs(dist, passage_texts: list[str], reduced) -> dict[str, float]:
    """Merge generation and copy probabilities by emitted string."""
    gate = dist.gate.item()
    probs: dict[str, float] = {}
    gen = dist.gen.data
    for idx in range(len(gen)):
        token = reduced.token_of(idx)
        if token == SOS:
            continue
        probs[token] = probs.get(token, 0.0) + (1.0 - gate) * float(gen[idx])
    copy = dist.copy.data
    for i, text in enumerate(passage_texts):
        probs[text] = probs.get(text, 0.0) + gate * float(copy[i])
    return probs


def generate(
    model: QgModel,
    example: AnnotatedExample,
    beam_width: int | None = None,
    max_len: int | None = None,
) -> list[BeamHypothesis]:
    """Ranked question hypotheses for a passage + answer span.

    Clue indicators come from the deterministic eval-mode predictor; decoding
    stops per hypothesis on <EOS> and globally at max_len.
    """
    beam_width = beam_width if beam_width is not None else model.config.beam
    max_len = max_len if max_len is not None else model.config.max_len
    passage_texts = [t.text for t in example.passage]
    p = model.decoder_params()

    with no_grad():
        clue = model.predict_clues(example, rng=None, mode="eval")
        enc_features = model.embedder.embed_passage(example, clue_weights=clue.weights)
        fwd, bwd = model.encoder_params()
        enc_out = encode(enc_features, fwd, bwd, model.config.enc_hidden, mode="eval")
        s0 = init_decoder(enc_out.last_backward, p.w_init, p.b_init)
        beam = [BeamHypothesis(
            tokens=[], log_prob=0.0, s=s0,
            c=zero_context(enc_out.states.shape[1]),
            w_prev=model.embedder.special_word_embedding(SOS),
            finished=False,
        )]
        done: list[BeamHypothesis] = []

        for _ in range(max_len):
            live = [h for h in beam if not h.finished]
            if not live:
                break
            candidates: list[BeamHypothesis] = []
            for hyp in live:
                state, dist = decode_step(hyp.w_prev, hyp.c, hyp.s, enc_out.states, p, mode="eval")
                merged = _surface_probs(dist, passage_texts, model.reduced)
                top = sorted(merged.items(), key=lambda kv: (-kv[1], kv[0]))[:beam_width]
                for token, prob in top:
                    lp = hyp.log_prob + math.log(max(prob, PROB_FLOOR))
                    if token == EOS:
                        candidates.append(replace(
                            hyp, tokens=hyp.tokens + [token], log_prob=lp, finished=True))
                    else:
                        candidates.append(BeamHypothesis(
                            tokens=hyp.tokens + [token], log_prob=lp,
                            s=state.s, c=state.c,
                            w_prev=model.embedder.decoder_word_embedding(token),
                            finished=False,
                        ))
            candidates.sort(key=lambda h: -h.score)
            beam = candidates[:beam_width]
            newly_done = [h for h in beam if h.finished]
            done.extend(newly_done)
            beam = [h for h in beam if not h.finished]

        pool = done + beam
        pool.sort(key=lambda h: -h.score)
        return pool
