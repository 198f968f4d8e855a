"""Hierarchical stick-breaking edge model with mean-field variational fitting.

A directed edge is a (sender, receiver) token pair. Both endpoints are
explained by one shared pool of corpus-level node distributions ("topics"):
stick-breaking weights over the pool pick which topics matter, each side of
the edge process owns a truncated stick-breaking mixture whose atoms each
point at one shared topic, and endpoints are drawn from the selected topic.
Sequences of edges drawn this way are exchangeable.

Fitting uses coordinate ascent on a fully factorized variational family at
fixed truncation levels. Every update is the exact optimum of its block, so
the evidence lower bound never decreases from sweep to sweep. The fitted
model keeps posterior mean topics and topic weights, which give a cheap
holdout score for any candidate edge.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betaln, digamma, gammaln, logsumexp, xlogy

from .graph_core import Edge, EdgeCorpus, NodeVocab

__all__ = [
    "LOG_FLOOR",
    "MODEL_MAGIC",
    "ModelFormatError",
    "HyperParams",
    "TruncationLevels",
    "VariationalState",
    "FitDiagnostics",
    "FittedModel",
    "SamplerParams",
    "stick_weights",
    "expected_log_sticks",
    "stick_posterior",
    "dirichlet_log_expectation",
    "init_state",
    "update_document_level",
    "update_corpus_level",
    "compute_elbo",
    "fit_state",
    "fit",
    "predictive_log_likelihood",
    "sample_edges",
    "save_model",
    "load_model",
]

# Scores below exp(-745) underflow float64; holdout log likelihoods clamp here.
LOG_FLOOR = -745.0

MODEL_MAGIC = "ADND1"


class ModelFormatError(ValueError):
    """Model file is missing the magic line or has a malformed body."""


@dataclass(frozen=True)
class HyperParams:
    """Positive concentrations: eta for topics over nodes, gamma for the
    corpus-level sticks, tau for the per-side sticks."""

    eta: float = 1.0
    gamma: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        for name in ("eta", "gamma", "tau"):
            value = getattr(self, name)
            if not (value > 0.0 and np.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value}")


@dataclass(frozen=True)
class TruncationLevels:
    """Truncation sizes: k_h shared topics, k_a sender atoms, k_b receiver
    atoms. The shared pool must be at least as large as either side."""

    k_h: int = 50
    k_a: int = 15
    k_b: int = 15

    def __post_init__(self):
        if self.k_h < 2:
            raise ValueError("k_h must be at least 2")
        if self.k_a < 1 or self.k_b < 1:
            raise ValueError("k_a and k_b must be at least 1")
        if self.k_h < max(self.k_a, self.k_b):
            raise ValueError("k_h must be at least max(k_a, k_b)")


def stick_weights(stick_fractions, truncate_last: bool = False) -> np.ndarray:
    """Map stick fractions to mixture weights.

    Entry k gets fraction_k times the mass left after the first k-1 breaks.
    With truncate_last=True the final entry instead absorbs all remaining
    mass, so the result sums to one.
    """
    fractions = np.asarray(stick_fractions, dtype=float)
    if fractions.ndim != 1 or fractions.size == 0:
        raise ValueError("stick_fractions must be a nonempty vector")
    if np.any(fractions < 0.0) or np.any(fractions > 1.0):
        raise ValueError("stick fractions must lie in [0, 1]")
    remaining = np.concatenate(([1.0], np.cumprod(1.0 - fractions[:-1])))
    weights = fractions * remaining
    if truncate_last:
        weights[-1] = remaining[-1]
    return weights


def expected_log_sticks(shape_a, shape_b) -> np.ndarray:
    """Posterior expectations of log stick weights under independent Beta
    stick fractions.

    shape_a and shape_b hold the K-1 Beta parameters; the result has length
    K, where the final entry covers the leftover stick. Every entry is the
    digamma identity E[log x] = psi(a) - psi(a+b) accumulated along the
    breaks, hence nonpositive.
    """
    a = np.asarray(shape_a, dtype=float)
    b = np.asarray(shape_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("stick parameters must be equal-length vectors")
    if np.any(a <= 0.0) or np.any(b <= 0.0):
        raise ValueError("stick parameters must be positive")
    both = digamma(a + b)
    log_fraction = digamma(a) - both
    log_leftover = digamma(b) - both
    out = np.zeros(a.size + 1)
    out[:-1] = log_fraction
    out[1:] += np.cumsum(log_leftover)
    return out


def stick_posterior(responsibilities, concentration: float):
    """Exact Beta block update for stick fractions given responsibilities.

    Column t of the (n, K) responsibility matrix contributes its sum to the
    first shape and everything assigned past t to the second. Returns the
    (K-1,) shape vectors.
    """
    resp = np.asarray(responsibilities, dtype=float)
    column_mass = resp.sum(axis=0)
    tail_mass = np.cumsum(column_mass[::-1])[::-1]
    shape_a = 1.0 + column_mass[:-1]
    shape_b = concentration + tail_mass[1:]
    return shape_a, shape_b


def dirichlet_log_expectation(alpha: np.ndarray) -> np.ndarray:
    """Rowwise E[log p] for Dirichlet-distributed rows with parameters alpha."""
    return digamma(alpha) - digamma(alpha.sum(axis=-1, keepdims=True))


def _exp_normalize(logits: np.ndarray) -> np.ndarray:
    """Rowwise softmax, stabilized by subtracting each row's maximum."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    return probs


def _uniform_rows(rng: np.random.Generator, shape) -> np.ndarray:
    rows = rng.uniform(size=shape)
    rows /= rows.sum(axis=1, keepdims=True)
    return rows


def _token_counts(edge_resp: np.ndarray, tokens: np.ndarray, dim: int) -> np.ndarray:
    """Responsibility-weighted token counts, shape (num_atoms, dim)."""
    counts = np.zeros((dim, edge_resp.shape[1]))
    np.add.at(counts, tokens, edge_resp)
    return counts.T


@dataclass
class VariationalState:
    """All variational parameters for one corpus.

    Shapes, with n edges, vocabulary size W (so W+1 token slots), and
    truncations (k_h, k_a, k_b):

    - lam: (k_h, W+1) Dirichlet parameters of the topics over node slots
    - corpus_stick_a/b: (k_h-1,) Beta parameters of the shared topic sticks
    - send_stick_a/b: (k_a-1,), recv_stick_a/b: (k_b-1,) per-side sticks
    - send_topic_resp: (k_a, k_h), recv_topic_resp: (k_b, k_h) rowwise
      probabilities that an atom points at each shared topic
    - send_edge_resp: (n, k_a), recv_edge_resp: (n, k_b) rowwise
      probabilities that an edge used each atom
    """

    lam: np.ndarray
    corpus_stick_a: np.ndarray
    corpus_stick_b: np.ndarray
    send_stick_a: np.ndarray
    send_stick_b: np.ndarray
    recv_stick_a: np.ndarray
    recv_stick_b: np.ndarray
    send_topic_resp: np.ndarray
    recv_topic_resp: np.ndarray
    send_edge_resp: np.ndarray
    recv_edge_resp: np.ndarray

    def validate(self, atol: float = 1e-9) -> None:
        """Check positivity and simplex constraints; raise on violation."""
        if np.any(self.lam <= 0.0):
            raise ValueError("lam must stay positive")
        for name in ("corpus", "send", "recv"):
            a = getattr(self, f"{name}_stick_a")
            b = getattr(self, f"{name}_stick_b")
            if np.any(a <= 0.0) or np.any(b <= 0.0):
                raise ValueError(f"{name} stick parameters must stay positive")
        for name in (
            "send_topic_resp",
            "recv_topic_resp",
            "send_edge_resp",
            "recv_edge_resp",
        ):
            rows = getattr(self, name)
            if np.any(rows < 0.0):
                raise ValueError(f"{name} has negative entries")
            if np.max(np.abs(rows.sum(axis=1) - 1.0)) > atol:
                raise ValueError(f"{name} rows must sum to one")


@dataclass(frozen=True)
class FitDiagnostics:
    """Bound trace and stopping facts from one fit."""

    elbo_trace: tuple[float, ...]
    sweeps: int
    converged: bool


@dataclass(frozen=True)
class FittedModel:
    """Posterior summary used for scoring: mean topics and topic weights."""

    topic_node: np.ndarray
    topic_weights: np.ndarray
    vocab: NodeVocab
    hyper: HyperParams
    trunc: TruncationLevels
    diagnostics: FitDiagnostics = field(repr=False)

    def __post_init__(self):
        if np.max(np.abs(self.topic_node.sum(axis=1) - 1.0)) > 1e-9:
            raise ValueError("topic_node rows must sum to one")
        if abs(self.topic_weights.sum() - 1.0) > 1e-9:
            raise ValueError("topic_weights must sum to one")
        self.topic_node.flags.writeable = False
        self.topic_weights.flags.writeable = False

    @property
    def num_nodes(self) -> int:
        return self.topic_node.shape[1] - 1


def init_state(
    corpus: EdgeCorpus,
    hyper: HyperParams,
    trunc: TruncationLevels,
    seed: int,
) -> VariationalState:
    """Seeded random starting point satisfying every state invariant.

    Topic parameters start at eta plus Uniform(0, n / (k_h * (W+1))) noise;
    sticks start at their priors; responsibilities start near uniform. Draw
    order is fixed, so equal seeds give bit-identical states.
    """
    n = corpus.n
    if n == 0:
        raise ValueError("cannot initialize from an empty corpus")
    dim = corpus.vocab.num_nodes + 1
    rng = np.random.default_rng(seed)
    lam = hyper.eta + rng.uniform(0.0, n / (trunc.k_h * dim), size=(trunc.k_h, dim))
    return VariationalState(
        lam=lam,
        corpus_stick_a=np.ones(trunc.k_h - 1),
        corpus_stick_b=np.full(trunc.k_h - 1, hyper.gamma),
        send_stick_a=np.ones(trunc.k_a - 1),
        send_stick_b=np.full(trunc.k_a - 1, hyper.tau),
        recv_stick_a=np.ones(trunc.k_b - 1),
        recv_stick_b=np.full(trunc.k_b - 1, hyper.tau),
        send_topic_resp=_uniform_rows(rng, (trunc.k_a, trunc.k_h)),
        recv_topic_resp=_uniform_rows(rng, (trunc.k_b, trunc.k_h)),
        send_edge_resp=_uniform_rows(rng, (n, trunc.k_a)),
        recv_edge_resp=_uniform_rows(rng, (n, trunc.k_b)),
    )


def update_document_level(
    state: VariationalState, corpus: EdgeCorpus, hyper: HyperParams
) -> VariationalState:
    """Exact block updates for both sides' edge responsibilities, atom-topic
    responsibilities, and sticks, in that order per side.

    Edge responsibilities weigh each atom by its expected token score plus
    its expected log stick weight; atom responsibilities weigh each shared
    topic by responsibility-weighted token scores plus the corpus stick
    expectation; stick shapes then absorb the new responsibilities.
    """
    elog_topic = dirichlet_log_expectation(state.lam)
    elog_corpus = expected_log_sticks(state.corpus_stick_a, state.corpus_stick_b)
    dim = state.lam.shape[1]

    for side, tokens in (("send", corpus.senders), ("recv", corpus.receivers)):
        topic_resp = getattr(state, f"{side}_topic_resp")
        elog_side = expected_log_sticks(
            getattr(state, f"{side}_stick_a"), getattr(state, f"{side}_stick_b")
        )

        atom_token_score = topic_resp @ elog_topic
        edge_resp = _exp_normalize(atom_token_score[:, tokens].T + elog_side)

        counts = _token_counts(edge_resp, tokens, dim)
        topic_resp = _exp_normalize(counts @ elog_topic.T + elog_corpus)

        shape_a, shape_b = stick_posterior(edge_resp, hyper.tau)
        setattr(state, f"{side}_edge_resp", edge_resp)
        setattr(state, f"{side}_topic_resp", topic_resp)
        setattr(state, f"{side}_stick_a", shape_a)
        setattr(state, f"{side}_stick_b", shape_b)
    return state


def update_corpus_level(
    state: VariationalState, corpus: EdgeCorpus, hyper: HyperParams
) -> VariationalState:
    """Exact block updates for the shared topic sticks and topic parameters.

    Both sides' atom-topic responsibilities stack into one responsibility
    matrix for the corpus sticks; topic parameters add responsibility-routed
    token counts from both sides onto the eta prior.
    """
    stacked = np.vstack([state.send_topic_resp, state.recv_topic_resp])
    state.corpus_stick_a, state.corpus_stick_b = stick_posterior(stacked, hyper.gamma)

    dim = state.lam.shape[1]
    send_counts = _token_counts(state.send_edge_resp, corpus.senders, dim)
    recv_counts = _token_counts(state.recv_edge_resp, corpus.receivers, dim)
    state.lam = (
        hyper.eta
        + state.send_topic_resp.T @ send_counts
        + state.recv_topic_resp.T @ recv_counts
    )
    return state


def _categorical_entropy(rows: np.ndarray) -> float:
    return float(-xlogy(rows, rows).sum())


def _beta_entropy(shape_a: np.ndarray, shape_b: np.ndarray) -> float:
    total = shape_a + shape_b
    return float(
        np.sum(
            betaln(shape_a, shape_b)
            - (shape_a - 1.0) * digamma(shape_a)
            - (shape_b - 1.0) * digamma(shape_b)
            + (total - 2.0) * digamma(total)
        )
    )


def _dirichlet_entropy(alpha: np.ndarray) -> float:
    alpha0 = alpha.sum(axis=1)
    dim = alpha.shape[1]
    return float(
        np.sum(
            gammaln(alpha).sum(axis=1)
            - gammaln(alpha0)
            + (alpha0 - dim) * digamma(alpha0)
            - ((alpha - 1.0) * digamma(alpha)).sum(axis=1)
        )
    )


def _stick_prior_term(shape_a, shape_b, concentration: float) -> float:
    """E[log Beta(fraction; 1, c)] summed over sticks, dropping nothing."""
    if shape_a.size == 0:
        return 0.0
    elog_leftover = digamma(shape_b) - digamma(shape_a + shape_b)
    return float(
        shape_a.size * np.log(concentration) + (concentration - 1.0) * elog_leftover.sum()
    )


def compute_elbo(
    state: VariationalState, corpus: EdgeCorpus, hyper: HyperParams
) -> float:
    """Evidence lower bound for the current state on the given corpus.

    Sums expected token log likelihoods, expected log priors for both sides'
    assignments and sticks, the shared stick and topic priors, and the
    entropies of every variational factor. Finite for any valid state.
    """
    elog_topic = dirichlet_log_expectation(state.lam)
    elog_corpus = expected_log_sticks(state.corpus_stick_a, state.corpus_stick_b)
    dim = state.lam.shape[1]
    total = 0.0

    for side, tokens in (("send", corpus.senders), ("recv", corpus.receivers)):
        topic_resp = getattr(state, f"{side}_topic_resp")
        edge_resp = getattr(state, f"{side}_edge_resp")
        shape_a = getattr(state, f"{side}_stick_a")
        shape_b = getattr(state, f"{side}_stick_b")
        elog_side = expected_log_sticks(shape_a, shape_b)
        counts = _token_counts(edge_resp, tokens, dim)

        total += float((topic_resp * (counts @ elog_topic.T)).sum())
        total += float((topic_resp @ elog_corpus).sum())
        total += float(edge_resp.sum(axis=0) @ elog_side)
        total += _stick_prior_term(shape_a, shape_b, hyper.tau)
        total += _categorical_entropy(topic_resp)
        total += _categorical_entropy(edge_resp)
        total += _beta_entropy(shape_a, shape_b)

    total += _stick_prior_term(state.corpus_stick_a, state.corpus_stick_b, hyper.gamma)
    total += float(
        state.lam.shape[0] * (gammaln(dim * hyper.eta) - dim * gammaln(hyper.eta))
        + (hyper.eta - 1.0) * elog_topic.sum()
    )
    total += _beta_entropy(state.corpus_stick_a, state.corpus_stick_b)
    total += _dirichlet_entropy(state.lam)
    return total


def fit_state(
    corpus: EdgeCorpus,
    hyper: HyperParams,
    trunc: TruncationLevels,
    *,
    max_sweeps: int = 200,
    rel_tol: float = 1e-5,
    seed: int = 0,
):
    """Run coordinate ascent to convergence; return (state, diagnostics).

    One sweep is a document-level update followed by a corpus-level update.
    Stops once the bound's relative change drops below rel_tol or after
    max_sweeps sweeps.
    """
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be at least 1")
    if rel_tol <= 0.0:
        raise ValueError("rel_tol must be positive")
    state = init_state(corpus, hyper, trunc, seed)
    trace: list[float] = []
    converged = False
    for _ in range(max_sweeps):
        update_document_level(state, corpus, hyper)
        update_corpus_level(state, corpus, hyper)
        bound = compute_elbo(state, corpus, hyper)
        trace.append(bound)
        if len(trace) > 1 and abs(bound - trace[-2]) <= rel_tol * abs(bound):
            converged = True
            break
    diagnostics = FitDiagnostics(
        elbo_trace=tuple(trace), sweeps=len(trace), converged=converged
    )
    return state, diagnostics


def fit(
    corpus: EdgeCorpus,
    hyper: HyperParams | None = None,
    trunc: TruncationLevels | None = None,
    *,
    max_sweeps: int = 200,
    rel_tol: float = 1e-5,
    seed: int = 0,
) -> FittedModel:
    """Fit the model and summarize the posterior for scoring.

    Topics become their posterior means; topic weights come from posterior
    mean stick fractions with the last weight absorbing the leftover stick.
    The corpus vocabulary is frozen, since scoring must not shift indices.
    """
    hyper = hyper if hyper is not None else HyperParams()
    trunc = trunc if trunc is not None else TruncationLevels()
    state, diagnostics = fit_state(
        corpus, hyper, trunc, max_sweeps=max_sweeps, rel_tol=rel_tol, seed=seed
    )
    topic_node = state.lam / state.lam.sum(axis=1, keepdims=True)
    mean_fractions = state.corpus_stick_a / (state.corpus_stick_a + state.corpus_stick_b)
    topic_weights = stick_weights(np.append(mean_fractions, 1.0), truncate_last=True)
    corpus.vocab.freeze()
    return FittedModel(
        topic_node=topic_node,
        topic_weights=topic_weights,
        vocab=corpus.vocab,
        hyper=hyper,
        trunc=trunc,
        diagnostics=diagnostics,
    )


def predictive_log_likelihood(model: FittedModel, edge: Edge) -> float:
    """Log score of one edge under the fitted summary.

    Computes log sum_i w_i * topic[i, sender] * w_i * topic[i, receiver]
    with the topic weight applied once per endpoint, via logsumexp, clamped
    below at LOG_FLOOR so the result is always finite.
    """
    limit = model.num_nodes
    if not (0 <= edge.sender <= limit and 0 <= edge.receiver <= limit):
        raise ValueError(
            f"edge ({edge.sender}, {edge.receiver}) out of range for {limit} nodes"
        )
    with np.errstate(divide="ignore"):
        terms = (
            2.0 * np.log(model.topic_weights)
            + np.log(model.topic_node[:, edge.sender])
            + np.log(model.topic_node[:, edge.receiver])
        )
        value = float(logsumexp(terms))
    return max(value, LOG_FLOOR)


@dataclass(frozen=True)
class SamplerParams:
    """One parameter draw from the generative process.

    base is the node distribution underlying the topics; topics holds one
    node distribution per row; each side keeps its atom-to-topic pointers
    and stick weights. All are conditioned on when computing densities.
    """

    base: np.ndarray
    topic_weights: np.ndarray
    topics: np.ndarray
    send_atoms: np.ndarray
    recv_atoms: np.ndarray
    send_weights: np.ndarray
    recv_weights: np.ndarray

    def sender_marginal(self) -> np.ndarray:
        """Node distribution of senders given this parameter draw."""
        return self.send_weights @ self.topics[self.send_atoms]

    def receiver_marginal(self) -> np.ndarray:
        return self.recv_weights @ self.topics[self.recv_atoms]

    def edge_log_density(self, sender: int, receiver: int) -> float:
        """Log density of one edge; sender and receiver are independent
        given the parameters."""
        return float(
            np.log(self.sender_marginal()[sender])
            + np.log(self.receiver_marginal()[receiver])
        )

    def sequence_log_density(self, corpus: EdgeCorpus) -> float:
        """Joint log density of an edge sequence given the parameters.

        A sum of per-edge terms, so any permutation of the sequence has the
        same value up to floating point round-off.
        """
        send_marginal = self.sender_marginal()
        recv_marginal = self.receiver_marginal()
        return float(
            np.log(send_marginal[corpus.senders]).sum()
            + np.log(recv_marginal[corpus.receivers]).sum()
        )


def _draw_tokens(
    rng: np.random.Generator, topics: np.ndarray, topic_ids: np.ndarray
) -> np.ndarray:
    """Draw one token per entry of topic_ids from the matching topic row.

    Grouped by topic in sorted order so the draw sequence is reproducible.
    """
    tokens = np.empty(topic_ids.size, dtype=np.int64)
    for topic in np.unique(topic_ids):
        mask = topic_ids == topic
        tokens[mask] = rng.choice(topics.shape[1], size=int(mask.sum()), p=topics[topic])
    return tokens


def sample_edges(
    hyper: HyperParams,
    trunc: TruncationLevels,
    num_nodes: int,
    num_edges: int,
    seed: int,
    *,
    return_params: bool = False,
):
    """Draw an exchangeable synthetic corpus from the generative process.

    One parameter draw covers the whole corpus: a base node distribution
    from a symmetric Dirichlet restricted to the real nodes, topics drawn
    from that base, truncated stick weights at every level, and atom
    pointers into the shared topics. Edges then sample endpoints through
    per-side atoms. Node labels are "n0".."n{num_nodes-1}" and the returned
    vocabulary is frozen. With return_params=True also returns the
    SamplerParams used.
    """
    if num_nodes < 1:
        raise ValueError("num_nodes must be at least 1")
    if num_edges < 1:
        raise ValueError("num_edges must be at least 1")
    rng = np.random.default_rng(seed)

    base_full = rng.dirichlet(np.full(num_nodes + 1, hyper.eta))
    base = base_full[:num_nodes] / base_full[:num_nodes].sum()
    topic_weights = stick_weights(
        np.append(rng.beta(1.0, hyper.gamma, size=trunc.k_h - 1), 1.0),
        truncate_last=True,
    )
    topics = rng.dirichlet(base, size=trunc.k_h)

    send_atoms = rng.choice(trunc.k_h, size=trunc.k_a, p=topic_weights)
    recv_atoms = rng.choice(trunc.k_h, size=trunc.k_b, p=topic_weights)
    send_weights = stick_weights(
        np.append(rng.beta(1.0, hyper.tau, size=trunc.k_a - 1), 1.0), truncate_last=True
    )
    recv_weights = stick_weights(
        np.append(rng.beta(1.0, hyper.tau, size=trunc.k_b - 1), 1.0), truncate_last=True
    )

    send_z = rng.choice(trunc.k_a, size=num_edges, p=send_weights)
    recv_z = rng.choice(trunc.k_b, size=num_edges, p=recv_weights)
    senders = _draw_tokens(rng, topics, send_atoms[send_z])
    receivers = _draw_tokens(rng, topics, recv_atoms[recv_z])

    vocab = NodeVocab(f"n{i}" for i in range(num_nodes)).freeze()
    corpus = EdgeCorpus(
        [Edge(int(u), int(v)) for u, v in zip(senders, receivers)], vocab
    )
    if not return_params:
        return corpus
    params = SamplerParams(
        base=base,
        topic_weights=topic_weights,
        topics=topics,
        send_atoms=send_atoms,
        recv_atoms=recv_atoms,
        send_weights=send_weights,
        recv_weights=recv_weights,
    )
    return corpus, params


def _hex_vector(values: np.ndarray) -> list[str]:
    return [float(v).hex() for v in values]


def _unhex_vector(values) -> np.ndarray:
    return np.array([float.fromhex(v) for v in values])


def save_model(model: FittedModel, path) -> None:
    """Write a fitted model as a magic line plus a JSON body.

    Array entries are stored as C99 hex floats, so a load reproduces
    topic_node and topic_weights bit for bit.
    """
    payload = {
        "version": 1,
        "vocab_labels": list(model.vocab.labels),
        "hyper": {"eta": model.hyper.eta, "gamma": model.hyper.gamma, "tau": model.hyper.tau},
        "trunc": {"k_h": model.trunc.k_h, "k_a": model.trunc.k_a, "k_b": model.trunc.k_b},
        "topic_node": [_hex_vector(row) for row in model.topic_node],
        "topic_weights": _hex_vector(model.topic_weights),
        "diagnostics": {
            "elbo_trace": _hex_vector(np.asarray(model.diagnostics.elbo_trace)),
            "sweeps": model.diagnostics.sweeps,
            "converged": model.diagnostics.converged,
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(MODEL_MAGIC + "\n")
        json.dump(payload, fh)
        fh.write("\n")


def load_model(path) -> FittedModel:
    """Read back a model written by save_model, verifying the magic line."""
    with open(path, encoding="utf-8") as fh:
        magic = fh.readline().rstrip("\n")
        if magic != MODEL_MAGIC:
            raise ModelFormatError(f"{path}: not a {MODEL_MAGIC} model file")
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as err:
            raise ModelFormatError(f"{path}: malformed model body: {err}") from err
    try:
        vocab = NodeVocab(payload["vocab_labels"]).freeze()
        hyper = HyperParams(**payload["hyper"])
        trunc = TruncationLevels(**payload["trunc"])
        topic_node = np.array([_unhex_vector(row) for row in payload["topic_node"]])
        topic_weights = _unhex_vector(payload["topic_weights"])
        diag = payload["diagnostics"]
        diagnostics = FitDiagnostics(
            elbo_trace=tuple(_unhex_vector(diag["elbo_trace"]).tolist()),
            sweeps=int(diag["sweeps"]),
            converged=bool(diag["converged"]),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise ModelFormatError(f"{path}: malformed model body: {err}") from err
    return FittedModel(
        topic_node=topic_node,
        topic_weights=topic_weights,
        vocab=vocab,
        hyper=hyper,
        trunc=trunc,
        diagnostics=diagnostics,
    )
