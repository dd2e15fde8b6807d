"""Corpus statistics: question-word rank distributions split by copy label,
and clue-to-answer distances over the dependency tree vs the token sequence.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field

from .corpus import AnnotatedExample, Vocabulary
from .labeling import LabeledExample


def _mean(xs: list[float]) -> float:
    return sum(xs) / len(xs) if xs else 0.0


def _median(xs: list[float]) -> float:
    if not xs:
        return 0.0
    s = sorted(xs)
    mid = len(s) // 2
    if len(s) % 2 == 1:
        return float(s[mid])
    return (s[mid - 1] + s[mid]) / 2.0


@dataclass
class Population:
    count: int
    mean_rank: float
    median_rank: float
    buckets: dict[int, int]  # bucket start rank -> count


@dataclass
class RankHistogram:
    bucket_width: int
    all_words: Population
    generated: Population
    copied: Population


def rank_distributions(labeled_corpus: list[LabeledExample], vocab: Vocabulary,
                       bucket_width: int = 100) -> RankHistogram:
    """Vocabulary-rank histograms of question tokens, split by copy label.

    Out-of-vocabulary tokens land in the V+1 rank bucket.
    """
    oov_rank = len(vocab) + 1
    ranks = {"all": [], "generated": [], "copied": []}
    for ex in labeled_corpus:
        for token, copied in zip(ex.base.question, ex.question_copy_label):
            rank = vocab.rank_of(token)
            rank = oov_rank if rank is None else rank
            ranks["all"].append(rank)
            ranks["copied" if copied else "generated"].append(rank)

    def pop(key: str) -> Population:
        values = ranks[key]
        buckets: Counter[int] = Counter()
        for r in values:
            buckets[((r - 1) // bucket_width) * bucket_width + 1] += 1
        return Population(
            count=len(values),
            mean_rank=_mean(values),
            median_rank=_median(values),
            buckets=dict(sorted(buckets.items())),
        )

    return RankHistogram(bucket_width=bucket_width, all_words=pop("all"),
                         generated=pop("generated"), copied=pop("copied"))


def _adjacency_lists(example: AnnotatedExample) -> list[list[tuple[int, str]]]:
    """Undirected tree as neighbor lists; each edge carries the dependent's
    dependency label."""
    n = len(example.passage)
    neighbors: list[list[tuple[int, str]]] = [[] for _ in range(n)]
    for i, tok in enumerate(example.passage):
        if tok.head != i:
            neighbors[i].append((tok.head, tok.dep))
            neighbors[tok.head].append((i, tok.dep))
    return neighbors


def shortest_tree_path(example: AnnotatedExample, from_token: int,
                       answer_span: tuple[int, int]) -> tuple[int, list[str]]:
    """BFS distance and edge-label path from a token to the nearest
    answer-span token; (0, []) when the token lies inside the span."""
    start, end = answer_span
    if start <= from_token <= end:
        return 0, []
    neighbors = _adjacency_lists(example)
    parent: dict[int, tuple[int, str]] = {from_token: (-1, "")}
    queue = deque([from_token])
    while queue:
        node = queue.popleft()
        if start <= node <= end:
            labels = []
            cur = node
            while cur != from_token:
                prev, label = parent[cur]
                labels.append(label)
                cur = prev
            labels.reverse()
            return len(labels), labels
        for nxt, label in neighbors[node]:
            if nxt not in parent:
                parent[nxt] = (node, label)
                queue.append(nxt)
    raise ValueError("answer span unreachable; the parse is not a connected tree")


@dataclass
class DepPathStats:
    clue_count: int
    tree_mean: float
    tree_median: float
    seq_mean: float
    seq_median: float
    tree_hist: dict[int, int] = field(default_factory=dict)
    seq_hist: dict[int, int] = field(default_factory=dict)
    label_counts: dict[str, int] = field(default_factory=dict)

    def top_labels(self, k: int = 5) -> list[str]:
        ordered = sorted(self.label_counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return [label for label, _ in ordered[:k]]


def dep_path_stats(labeled_corpus: list[LabeledExample]) -> DepPathStats:
    """Aggregate clue-to-answer distances over every (clue token, example)."""
    tree_d: list[int] = []
    seq_d: list[int] = []
    labels: Counter[str] = Counter()
    for ex in labeled_corpus:
        start, end = ex.base.answer_span
        span_tokens = range(start, end + 1)
        for i, is_clue in enumerate(ex.passage_clue_label):
            if not is_clue:
                continue
            dist, path = shortest_tree_path(ex.base, i, ex.base.answer_span)
            tree_d.append(dist)
            labels.update(path)
            seq_d.append(min(abs(i - j) for j in span_tokens))
    return DepPathStats(
        clue_count=len(tree_d),
        tree_mean=_mean(tree_d),
        tree_median=_median(tree_d),
        seq_mean=_mean(seq_d),
        seq_median=_median(seq_d),
        tree_hist=dict(sorted(Counter(tree_d).items())),
        seq_hist=dict(sorted(Counter(seq_d).items())),
        label_counts=dict(labels),
    )
