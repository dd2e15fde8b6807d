"""Per-token input vectors: word embeddings plus feature-tag embeddings.

Slot order is fixed: [word | NER | POS | DEP | is_lower | is_digit |
like_num | answer-BIO | frequency-tier | clue-indicator], where the clue
slot is omitted for the clue predictor's own input.  Low-frequency (tier L)
words use a shared <l> row in place of their word embedding; every other
slot stays token-specific.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .config import ModelConfig
from .corpus import (
    LOWFREQ,
    SPECIAL_TOKENS,
    TIER_HIGH,
    TIER_LOW,
    TIER_MEDIUM,
    UNK,
    AnnotatedExample,
    Vocabulary,
    load_word_vectors,
    normalize,
    tier_of,
)
from .labeling import BIO_BEGIN, BIO_INSIDE, BIO_OUTSIDE, tag_answer_bio

UNK_TAG = "<unk-tag>"
_BOOL_FEATURES = ("is_lower", "is_digit", "like_num")
_BIO_INDEX = {BIO_OUTSIDE: 0, BIO_BEGIN: 1, BIO_INSIDE: 2}
_TIER_INDEX = {TIER_HIGH: 0, TIER_MEDIUM: 1, TIER_LOW: 2}


@dataclass
class FeatureVocab:
    """Closed tag inventories for the categorical feature slots.

    Tags unseen at build time map to a reserved <unk-tag> row at lookup,
    never to an error.
    """

    pos: list[str]
    ner: list[str]
    dep: list[str]
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self._index = {
            "pos": {t: i for i, t in enumerate(self.pos)},
            "ner": {t: i for i, t in enumerate(self.ner)},
            "dep": {t: i for i, t in enumerate(self.dep)},
        }

    @classmethod
    def from_corpus(cls, corpus: list[AnnotatedExample]) -> "FeatureVocab":
        pos, ner, dep = set(), set(), set()
        for ex in corpus:
            for tok in ex.passage:
                pos.add(tok.pos)
                ner.add(tok.ner)
                dep.add(tok.dep)
        return cls(pos=sorted(pos), ner=sorted(ner), dep=sorted(dep))

    def rows(self, kind: str) -> int:
        return len(self._index[kind]) + 1  # final row is <unk-tag>

    def index(self, kind: str, tag: str) -> int:
        table = self._index[kind]
        return table.get(tag, len(table))

    def to_dict(self) -> dict:
        return {"pos": self.pos, "ner": self.ner, "dep": self.dep}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureVocab":
        return cls(pos=list(d["pos"]), ner=list(d["ner"]), dep=list(d["dep"]))


def encoder_input_width(config: ModelConfig) -> int:
    return config.word_dim + 7 * config.feat_dim + config.tier_dim + config.feat_dim


def clue_input_width(config: ModelConfig) -> int:
    return config.word_dim + 7 * config.feat_dim + config.tier_dim


def init_word_table(
    vocab: Vocabulary,
    rng: np.random.Generator,
    dim: int,
    vectors_file=None,
) -> np.ndarray:
    """Word-embedding table: pre-trained rows where covered, uniform(-0.1, 0.1)
    elsewhere.  Rows 0..4 are the special tokens, then words by rank."""
    table = rng.uniform(-0.1, 0.1, size=(vocab.table_size, dim))
    if vectors_file is not None:
        vectors = load_word_vectors(vectors_file, dim)
        for word in vocab.words:
            if word in vectors:
                table[vocab.id_of(word)] = vectors[word]
    return table


def build_feature_tables(
    params: ParamStore,
    config: ModelConfig,
    vocab: Vocabulary,
    feature_vocab: FeatureVocab,
    rng: np.random.Generator,
    vectors_file=None,
) -> None:
    """Register every embedding table in the parameter store."""
    params.add("embed.word", init_word_table(vocab, rng, config.word_dim, vectors_file))

    def table(name: str, rows: int, dim: int):
        params.add(name, rng.uniform(-0.1, 0.1, size=(rows, dim)))

    table("embed.ner", feature_vocab.rows("ner"), config.feat_dim)
    table("embed.pos", feature_vocab.rows("pos"), config.feat_dim)
    table("embed.dep", feature_vocab.rows("dep"), config.feat_dim)
    for name in _BOOL_FEATURES:
        table(f"embed.{name}", 2, config.feat_dim)
    table("embed.bio", 3, config.feat_dim)
    table("embed.tier", 3, config.tier_dim)
    table("embed.clue", 2, config.feat_dim)


class FeatureEmbedder:
    """Assembles concatenated per-token representations from the tables."""

    def __init__(self, params: ParamStore, config: ModelConfig, vocab: Vocabulary,
                 feature_vocab: FeatureVocab):
        self.params = params
        self.config = config
        self.vocab = vocab
        self.features = feature_vocab

    def word_row_id(self, token: str) -> int:
        """Encoder-side word row with low-frequency masking.

        Tier-L words (including OOV) collapse onto the shared <l> row.
        """
        tier = tier_of(token, self.vocab, self.config.r_h, self.config.r_l)
        if tier == TIER_LOW:
            return SPECIAL_TOKENS.index(LOWFREQ)
        return self.vocab.id_of(token)

    def decoder_word_row_id(self, token: str) -> int:
        """Decoder-input word row: <l> for in-vocabulary tier-L words, the
        token's own row otherwise, <UNK> when out of vocabulary."""
        if normalize(token) not in self.vocab:
            return SPECIAL_TOKENS.index(UNK)
        return self.word_row_id(token)

    def special_word_embedding(self, token: str) -> Tensor:
        return ad.gather_rows(self.params["embed.word"], [SPECIAL_TOKENS.index(token)])[0]

    def decoder_word_embedding(self, token: str) -> Tensor:
        return ad.gather_rows(self.params["embed.word"], [self.decoder_word_row_id(token)])[0]

    def clue_slot(self, clue_weights) -> Tensor:
        """Clue-indicator embedding rows mixed by (possibly relaxed) weights.

        `clue_weights` is an (n, 2) tensor of [not-clue, clue] weights; a hard
        indicator is the one-hot case.  Keeping this a matmul lets straight-
        through gradients reach the clue predictor.
        """
        if not isinstance(clue_weights, Tensor):
            arr = np.asarray(clue_weights, dtype=float)
            if arr.ndim == 1:  # binary indicators -> one-hot rows
                onehot = np.zeros((arr.shape[0], 2))
                onehot[np.arange(arr.shape[0]), arr.astype(int)] = 1.0
                arr = onehot
            clue_weights = Tensor(arr)
        return ad.matmul(clue_weights, self.params["embed.clue"])

    def embed_passage(
        self,
        example: AnnotatedExample,
        bio_tags: list[str] | None = None,
        clue_weights=None,
        mask_low_freq: bool = True,
    ) -> Tensor:
        """(n, width) feature matrix for the passage.

        With `clue_weights=None` the clue slot is omitted (the clue
        predictor's input variant); otherwise it is appended last.
        """
        tokens = example.passage
        bio_tags = bio_tags if bio_tags is not None else tag_answer_bio(example)
        if mask_low_freq:
            word_ids = [self.word_row_id(t.text) for t in tokens]
        else:
            word_ids = [self.vocab.id_of(t.text) for t in tokens]
        tiers = [
            _TIER_INDEX[tier_of(t.text, self.vocab, self.config.r_h, self.config.r_l)]
            for t in tokens
        ]
        slots = [
            ad.gather_rows(self.params["embed.word"], word_ids),
            ad.gather_rows(self.params["embed.ner"], [self.features.index("ner", t.ner) for t in tokens]),
            ad.gather_rows(self.params["embed.pos"], [self.features.index("pos", t.pos) for t in tokens]),
            ad.gather_rows(self.params["embed.dep"], [self.features.index("dep", t.dep) for t in tokens]),
            ad.gather_rows(self.params["embed.is_lower"], [int(t.is_lower) for t in tokens]),
            ad.gather_rows(self.params["embed.is_digit"], [int(t.is_digit) for t in tokens]),
            ad.gather_rows(self.params["embed.like_num"], [int(t.like_num) for t in tokens]),
            ad.gather_rows(self.params["embed.bio"], [_BIO_INDEX[b] for b in bio_tags]),
            ad.gather_rows(self.params["embed.tier"], tiers),
        ]
        if clue_weights is not None:
            slots.append(self.clue_slot(clue_weights))
        return ad.concat(slots, axis=1)
