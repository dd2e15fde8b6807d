"""Clue-word prediction: GCN over the undirected dependency tree, then a
Straight-Through Gumbel-Softmax sample of a binary indicator per token.

The adjacency matrix is the undirected tree plus self-loops; each layer
averages transformed neighbor features by node degree, so after L layers a
token's representation sees exactly its <= L-hop neighborhood.  Dependency
edge types are not encoded here; they already enter through the DEP
feature embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, _node
from .config import ConfigError
from .corpus import AnnotatedExample


@dataclass
class DependencyAdjacency:
    """A_tilde = A + I for the undirected dependency tree, with degrees."""

    a_tilde: np.ndarray   # (n, n), symmetric, ones on the diagonal
    degrees: np.ndarray   # (n,), row sums of a_tilde
    norm: np.ndarray      # a_tilde with rows divided by degree


def build_adjacency(example: AnnotatedExample) -> DependencyAdjacency:
    n = len(example.passage)
    a = np.eye(n)
    for i, tok in enumerate(example.passage):
        if tok.head != i:
            a[i, tok.head] = 1.0
            a[tok.head, i] = 1.0
    d = a.sum(axis=1)
    return DependencyAdjacency(a_tilde=a, degrees=d, norm=a / d[:, None])


_NONLINEARITIES = {"relu": ad.relu, "tanh": ad.tanh}


def gcn_layer(h_prev: Tensor, adj: DependencyAdjacency, w: Tensor, b: Tensor,
              nonlinearity: str = "relu") -> Tensor:
    """One propagation step: h_i = f(sum_j A~_ij (W h_j) / d_i + b)."""
    if w.shape[1] != h_prev.shape[1]:
        raise ad.TensorError(
            f"gcn_layer: weight expects input width {w.shape[1]}, features have {h_prev.shape[1]}"
        )
    mixed = ad.matmul(Tensor(adj.norm), ad.matmul(h_prev, ad.transpose(w)))
    return _NONLINEARITIES[nonlinearity](ad.add(mixed, b))


def encode_clue_features(features: Tensor, adj: DependencyAdjacency,
                         layer_params: list[tuple[Tensor, Tensor]],
                         nonlinearity: str = "relu") -> Tensor:
    """Stack GCN layers; the receptive field grows one hop per layer."""
    if not layer_params:
        raise ConfigError("encode_clue_features requires at least one GCN layer")
    h = features
    for w, b in layer_params:
        h = gcn_layer(h, adj, w, b, nonlinearity)
    return h


def clue_logits(h: Tensor, w_out: Tensor, b_out: Tensor) -> Tensor:
    """Per-token unnormalized [not-clue, clue] scores."""
    return ad.add(ad.matmul(h, ad.transpose(w_out)), b_out)


@dataclass
class GumbelSample:
    u: np.ndarray        # uniform draws
    g: np.ndarray        # Gumbel noise -log(-log(u))
    y: Tensor            # continuous relaxed sample, rows sum to 1
    y_st: Tensor         # one-hot discretization with pass-through gradient
    tau: float


def gumbel_noise(rng: np.random.Generator, shape) -> tuple[np.ndarray, np.ndarray]:
    u = rng.random(shape)
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    return u, -np.log(-np.log(u))


def gumbel_softmax_sample(logits: Tensor, tau: float, rng: np.random.Generator,
                          noise: np.ndarray | None = None) -> GumbelSample:
    """Relaxed categorical sample y = softmax((log-probs + gumbel noise) / tau).

    Row-constant log-normalization cancels inside the softmax, so the raw
    logits are used directly; `noise` overrides the Gumbel draw (test hook).
    """
    if tau <= 0:
        raise ConfigError(f"gumbel temperature must be positive, got {tau}")
    if noise is None:
        u, g = gumbel_noise(rng, logits.shape)
    else:
        g = np.asarray(noise, dtype=float)
        u = np.exp(-np.exp(-g))
    perturbed = ad.mul(ad.add(logits, Tensor(g)), 1.0 / tau)
    y = ad.softmax(perturbed)
    return GumbelSample(u=u, g=g, y=y, y_st=st_discretize(y), tau=tau)


def st_discretize(y: Tensor) -> Tensor:
    """One-hot argmax forward, identity gradient backward (ties -> lower index)."""
    idx = np.argmax(y.data, axis=-1)
    hard = np.zeros_like(y.data)
    if y.data.ndim == 1:
        hard[idx] = 1.0
    else:
        hard[np.arange(y.data.shape[0]), idx] = 1.0
    out = _node(hard, (y,), "st_discretize")

    def bw():
        if y.requires_grad:
            y._accumulate(out.grad)

    out._backward = bw
    return out


@dataclass
class ClueForward:
    probs: Tensor          # (n, 2) softmax of the logits
    weights: Tensor        # (n, 2) what the encoder's clue slot consumes
    indicators: np.ndarray  # (n,) binary decisions


def run_clue_predictor(features: Tensor, adj: DependencyAdjacency,
                       layer_params: list[tuple[Tensor, Tensor]],
                       w_out: Tensor, b_out: Tensor,
                       tau: float, rng: np.random.Generator, mode: str,
                       noise: np.ndarray | None = None) -> ClueForward:
    """Full predictor pass over pre-embedded features.

    mode 'train': stochastic straight-through one-hot (differentiable);
    mode 'eval': deterministic argmax of the clue probability, no noise;
    mode 'soft': continuous relaxed sample (differentiable test hook).
    """
    h = encode_clue_features(features, adj, layer_params)
    logits = clue_logits(h, w_out, b_out)
    probs = ad.softmax(logits)
    if mode == "eval":
        idx = np.argmax(probs.data, axis=-1)
        onehot = np.zeros_like(probs.data)
        onehot[np.arange(len(idx)), idx] = 1.0
        return ClueForward(probs=probs, weights=Tensor(onehot), indicators=idx)
    if mode == "train":
        sample = gumbel_softmax_sample(logits, tau, rng, noise=noise)
        idx = np.argmax(sample.y_st.data, axis=-1)
        return ClueForward(probs=probs, weights=sample.y_st, indicators=idx)
    if mode == "soft":
        sample = gumbel_softmax_sample(logits, tau, rng, noise=noise)
        idx = np.argmax(sample.y.data, axis=-1)
        return ClueForward(probs=probs, weights=sample.y, indicators=idx)
    raise ConfigError(f"clue predictor mode must be train/eval/soft, got {mode!r}")
