"""Wires the clue predictor, passage encoder and question decoder together
around one parameter store, and handles checkpoint round-trips."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import ParamStore, Tensor, set_default_dtype
from .clue_predictor import (
    ClueForward,
    DependencyAdjacency,
    build_adjacency,
    run_clue_predictor,
)
from .config import ModelConfig
from .corpus import SOS, AnnotatedExample, ReducedTargetVocab, Vocabulary
from .decoder import DecoderParams, DecoderState, ExtendedDistribution, teacher_forced_unroll
from .encoder import EncoderOutput, GruCellParams, encode
from .features import (
    FeatureEmbedder,
    FeatureVocab,
    build_feature_tables,
    clue_input_width,
    encoder_input_width,
)
from .labeling import LabeledExample, tag_answer_bio


@dataclass
class ModelForward:
    clue: ClueForward
    adjacency: DependencyAdjacency
    encoder: EncoderOutput
    steps: list[tuple[DecoderState, ExtendedDistribution]] | None


class QgModel:
    """The full question generation model over one parameter store."""

    def __init__(self, config: ModelConfig, vocab: Vocabulary, reduced: ReducedTargetVocab,
                 feature_vocab: FeatureVocab, params: ParamStore):
        self.config = config
        self.vocab = vocab
        self.reduced = reduced
        self.features = feature_vocab
        self.params = params
        self.embedder = FeatureEmbedder(params, config, vocab, feature_vocab)

    @classmethod
    def build(cls, config: ModelConfig, vocab: Vocabulary, reduced: ReducedTargetVocab,
              feature_vocab: FeatureVocab, rng: np.random.Generator,
              vectors_file=None) -> "QgModel":
        set_default_dtype(config.precision)
        params = ParamStore()
        build_feature_tables(params, config, vocab, feature_vocab, rng, vectors_file)

        gcn_in = clue_input_width(config)
        for layer in range(config.gcn_layers):
            d_in = gcn_in if layer == 0 else config.gcn_hidden
            params.add(f"clue.gcn{layer}.w", rng.uniform(-0.08, 0.08, size=(config.gcn_hidden, d_in)))
            params.add(f"clue.gcn{layer}.b", np.zeros(config.gcn_hidden))
        params.add("clue.out.w", rng.uniform(-0.08, 0.08, size=(2, config.gcn_hidden)))
        params.add("clue.out.b", np.zeros(2))

        enc_in = encoder_input_width(config)
        GruCellParams.create(params, "enc.fwd", enc_in, config.enc_hidden, rng)
        GruCellParams.create(params, "enc.bwd", enc_in, config.enc_hidden, rng)

        DecoderParams.create(
            params,
            word_dim=config.word_dim,
            enc_width=2 * config.enc_hidden,
            dec_hidden=config.dec_hidden,
            attn_dim=config.attn_dim,
            vocab_out=len(reduced),
            rng=rng,
        )
        return cls(config, vocab, reduced, feature_vocab, params)

    # parameter views
    def gcn_params(self) -> list[tuple[Tensor, Tensor]]:
        return [
            (self.params[f"clue.gcn{layer}.w"], self.params[f"clue.gcn{layer}.b"])
            for layer in range(self.config.gcn_layers)
        ]

    def encoder_params(self) -> tuple[GruCellParams, GruCellParams]:
        return (GruCellParams.from_store(self.params, "enc.fwd"),
                GruCellParams.from_store(self.params, "enc.bwd"))

    def decoder_params(self) -> DecoderParams:
        return DecoderParams.from_store(self.params)

    def predict_clues(self, example: AnnotatedExample, rng: np.random.Generator | None,
                      mode: str = "eval", noise: np.ndarray | None = None,
                      bio_tags: list[str] | None = None) -> ClueForward:
        """Clue probabilities plus indicators; stochastic only in train/soft mode."""
        bio = bio_tags if bio_tags is not None else tag_answer_bio(example)
        feats = self.embedder.embed_passage(example, bio_tags=bio, clue_weights=None)
        adj = build_adjacency(example)
        return run_clue_predictor(
            feats, adj, self.gcn_params(),
            self.params["clue.out.w"], self.params["clue.out.b"],
            self.config.tau, rng, mode, noise=noise,
        )

    def forward(
        self,
        example: LabeledExample | AnnotatedExample,
        mode: str = "eval",
        clue_mode: str | None = None,
        clue_source: str = "predicted",
        gumbel_rng: np.random.Generator | None = None,
        dropout_rng: np.random.Generator | None = None,
        gumbel_noise: np.ndarray | None = None,
    ) -> ModelForward:
        """Run clue prediction, encoding, and (when a question is present)
        the teacher-forced decoder unroll.

        `clue_source='gold'` feeds gold clue labels to the encoder while the
        predictor still runs for its loss.
        """
        if isinstance(example, LabeledExample):
            base, bio = example.base, example.answer_bio
        else:
            base, bio = example, tag_answer_bio(example)
        clue_mode = clue_mode or ("train" if mode == "train" else "eval")
        clue = self.predict_clues(base, gumbel_rng, mode=clue_mode, noise=gumbel_noise, bio_tags=bio)
        adj = build_adjacency(base)

        if clue_source == "gold":
            if not isinstance(example, LabeledExample):
                raise ValueError("clue_source='gold' requires a labeled example")
            clue_weights = np.asarray(example.passage_clue_label, dtype=int)
        else:
            clue_weights = clue.weights
        enc_features = self.embedder.embed_passage(base, bio_tags=bio, clue_weights=clue_weights)
        fwd, bwd = self.encoder_params()
        enc_out = encode(enc_features, fwd, bwd, self.config.enc_hidden,
                         dropout_p=self.config.dropout, mode=mode, rng=dropout_rng)

        steps = None
        if isinstance(example, LabeledExample):
            steps = teacher_forced_unroll(
                base.question,
                self.embedder.decoder_word_embedding,
                self.embedder.special_word_embedding(SOS),
                enc_out.states,
                enc_out.last_backward,
                self.decoder_params(),
                mode=mode,
                dropout_p=self.config.dropout,
                rng=dropout_rng,
            )
        return ModelForward(clue=clue, adjacency=adj, encoder=enc_out, steps=steps)

    # persistence
    def save(self, path) -> None:
        meta = {
            "config": self.config.to_dict(),
            "vocab_words": self.vocab.words,
            "reduced_words": self.reduced.words,
            "feature_vocab": self.features.to_dict(),
        }
        self.params.save(path, meta)

    @classmethod
    def load(cls, path) -> "QgModel":
        arrays, meta = ParamStore.read(path)
        config = ModelConfig.from_dict(meta["config"])
        set_default_dtype(config.precision)
        vocab = Vocabulary(words=list(meta["vocab_words"]))
        reduced = ReducedTargetVocab(words=list(meta["reduced_words"]))
        feature_vocab = FeatureVocab.from_dict(meta["feature_vocab"])
        model = cls.build(config, vocab, reduced, feature_vocab,
                          np.random.default_rng(0))
        model.params.load_arrays(arrays)
        return model
