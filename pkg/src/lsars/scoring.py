"""Top-k spatial item recommendation and target user discovery.

Item score for a query ``(u_q, l_q)``::

    sum_r P(r) N(l_v | r) N(l_q | r) phi_r[r, v]
        * sum_z theta[u_q, z] omega[z, +] prod_{w in W_v} psi[z, w] ** (1 / |W_v|)

User score for an item ``(v, W_v)`` is the joint ``P(u, s, v, W_v)``
normalized over all users and sentiments, with::

    P(u, s, v, W_v) = P(u) sum_z theta[u, z] omega[z, s] P(W_v | z) sum_r phi_r[r, v]

Both use the geometric mean of the word probabilities for ``P(W_v | z)``
and are evaluated in log space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.special import logsumexp

from .corpus import GeoPoint
from .geo import gaussian_logpdf
from .lexicon import POSITIVE
from .model import TrainedModel

__all__ = [
    "DEFAULT_KAPPA",
    "QueryError",
    "ItemQuery",
    "UserQuery",
    "RankedList",
    "ItemScorer",
    "rank",
    "region_prior",
    "user_prior",
    "score_item",
    "recommend_items",
    "score_user",
    "user_sentiment_table",
    "discover_users",
]

DEFAULT_KAPPA = 1.0


class QueryError(ValueError):
    """Raised for queries that reference unknown users or items."""


@dataclass(frozen=True)
class ItemQuery:
    user: int
    location: GeoPoint
    k: int = 20

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass(frozen=True)
class UserQuery:
    """Either a known ``item`` index or an ad-hoc item (``location`` + ``content_words``).

    For a known item, ``content_words``/``location`` default to the model's
    maps.  ``content_words`` hold content-vocabulary indices.
    """

    k: int = 10
    item: int | None = None
    location: GeoPoint | None = None
    content_words: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.item is None and self.content_words is None and self.location is None:
            raise ValueError("a user query needs an item or an ad-hoc description")

    @classmethod
    def adhoc(cls, model: TrainedModel, location: GeoPoint | None,
              tokens: Iterable[str], k: int = 10) -> "UserQuery":
        """Build an ad-hoc query; tokens missing from the content vocabulary are dropped."""
        words = tuple(i for i in (model.content_vocab.get(t) for t in tokens) if i is not None)
        return cls(k=k, item=None, location=location, content_words=words)


@dataclass(frozen=True)
class RankedList:
    entries: tuple[tuple[int, float], ...]

    @property
    def indices(self) -> list[int]:
        return [i for i, _ in self.entries]

    @property
    def scores(self) -> list[float]:
        return [s for _, s in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def rank(log_scores: np.ndarray, candidates: np.ndarray | None = None,
         k: int | None = None) -> np.ndarray:
    """Candidate indices ordered by descending score, ties by ascending index."""
    cand = np.arange(len(log_scores)) if candidates is None else np.asarray(candidates, dtype=np.int64)
    cand = np.sort(cand)
    order = cand[np.lexsort((cand, -log_scores[cand]))]
    return order if k is None else order[:k]


def _ranked_list(log_scores: np.ndarray, order: np.ndarray) -> RankedList:
    return RankedList(tuple((int(i), float(np.exp(log_scores[i]))) for i in order))


def _positive(model: TrainedModel) -> int:
    return min(POSITIVE, model.params.S - 1)


def region_prior(model: TrainedModel, kappa: float = DEFAULT_KAPPA) -> np.ndarray:
    """P(r): user region distributions weighted by smoothed check-in share."""
    weights = model.params.n_u + kappa
    weights = weights / weights.sum()
    return weights @ model.params.vartheta


def user_prior(model: TrainedModel, u: int, kappa: float = DEFAULT_KAPPA) -> float:
    if not 0 <= u < model.n_users:
        raise QueryError(f"unknown user index {u}")
    n = model.params.n_u
    return float((n[u] + kappa) / (n + kappa).sum())


def _log_word_factor(model: TrainedModel, words: Sequence[int]) -> np.ndarray:
    """log P(W | z) per topic under the geometric-mean convention (0 if no words)."""
    if len(words) == 0:
        return np.zeros(model.params.K)
    return np.log(model.params.psi[:, list(words)]).mean(axis=1)


class ItemScorer:
    """Precomputed per-model terms for scoring many items or queries."""

    def __init__(self, model: TrainedModel, kappa: float = DEFAULT_KAPPA):
        p = model.params
        self.model = model
        self.kappa = kappa
        self.regions = p.regions
        self.log_prior_r = np.log(region_prior(model, kappa))
        # (R, V): log P(r) + log N(l_v | r) + log phi_r[r, v]
        item_ll = np.array([gaussian_logpdf(model.item_locations, g) for g in self.regions])
        item_ll = item_ll.reshape(p.R, model.n_items)
        self.spatial_item = self.log_prior_r[:, None] + item_ll + np.log(p.phi_r)
        # (V, K) mean log psi over each item's content words
        rows, cols, vals = [], [], []
        for v, words in enumerate(model.item_content):
            for w in words:
                rows.append(v)
                cols.append(w)
                vals.append(1.0 / len(words))
        avg = sparse.csr_matrix((vals, (rows, cols)), shape=(model.n_items, p.psi.shape[1]))
        self.word_factor = np.asarray(avg @ np.log(p.psi).T).reshape(model.n_items, p.K)
        self.log_theta = np.log(p.theta)
        self.log_omega_pos = np.log(p.omega[:, _positive(model)])

    def log_query_region(self, location: GeoPoint) -> np.ndarray:
        return np.array([gaussian_logpdf(location, g) for g in self.regions], dtype=np.float64)

    def log_spatial(self, location: GeoPoint, items=None) -> np.ndarray:
        terms = self.spatial_item if items is None else self.spatial_item[:, items]
        return logsumexp(terms + self.log_query_region(location)[:, None], axis=0)

    def log_interest(self, user: int, items=None) -> np.ndarray:
        wf = self.word_factor if items is None else self.word_factor[items]
        return logsumexp(wf + (self.log_theta[user] + self.log_omega_pos)[None, :], axis=1)

    def log_scores(self, user: int, location: GeoPoint, items=None) -> np.ndarray:
        if not 0 <= user < self.model.n_users:
            raise QueryError(f"unknown user index {user}")
        return self.log_spatial(location, items) + self.log_interest(user, items)


def score_item(model: TrainedModel, query: ItemQuery, v: int,
               kappa: float = DEFAULT_KAPPA) -> float:
    """Score of item ``v`` for ``query`` (non-negative, unnormalized)."""
    if not 0 <= v < model.n_items:
        raise QueryError(f"unknown item index {v}")
    if not 0 <= query.user < model.n_users:
        raise QueryError(f"unknown user index {query.user}")
    p = model.params
    lv = model.item_location(v)
    spatial = logsumexp([
        np.log(pr) + gaussian_logpdf(lv, g) + gaussian_logpdf(query.location, g) + np.log(p.phi_r[r, v])
        for r, (pr, g) in enumerate(zip(region_prior(model, kappa), p.regions))
    ])
    interest = logsumexp(
        np.log(p.theta[query.user]) + np.log(p.omega[:, _positive(model)])
        + _log_word_factor(model, model.item_content[v])
    )
    return float(np.exp(spatial + interest))


def recommend_items(model: TrainedModel, query: ItemQuery, candidates=None,
                    exclude_visited: bool = True, kappa: float = DEFAULT_KAPPA,
                    scorer: ItemScorer | None = None) -> RankedList:
    """Top-k items for ``query``.

    Candidates default to every item; ``exclude_visited`` removes the items
    the user checked into during training.
    """
    scorer = scorer or ItemScorer(model, kappa)
    log_scores = scorer.log_scores(query.user, query.location)
    cand = np.arange(model.n_items) if candidates is None else np.asarray(candidates, dtype=np.int64)
    if exclude_visited and len(model.visited[query.user]):
        cand = np.setdiff1d(cand, np.asarray(model.visited[query.user], dtype=np.int64))
    return _ranked_list(log_scores, rank(log_scores, cand, query.k))


def _query_item_terms(model: TrainedModel, query: UserQuery) -> tuple[np.ndarray, float]:
    """(log P(W_v | z) per topic, log sum_r phi_r[r, v]) for a user query."""
    if query.item is not None:
        if not 0 <= query.item < model.n_items:
            raise QueryError(f"unknown item index {query.item}")
        words = query.content_words if query.content_words is not None else model.item_content[query.item]
        return _log_word_factor(model, words), float(np.log(model.params.phi_r[:, query.item].sum()))
    W = model.params.psi.shape[1]
    words = [w for w in (query.content_words or ()) if 0 <= w < W]
    # an ad-hoc item has no popularity column; the factor is constant across users anyway
    return _log_word_factor(model, words), 0.0


def user_sentiment_table(model: TrainedModel, query: UserQuery,
                         kappa: float = DEFAULT_KAPPA) -> np.ndarray:
    """N x S table of P(u, s | v, W_v); sums to 1."""
    p = model.params
    log_words, log_pop = _query_item_terms(model, query)
    log_pu = np.log(p.n_u + kappa) - np.log((p.n_u + kappa).sum())
    # (N, K, S) -> logsumexp over K
    terms = (np.log(p.theta)[:, :, None] + np.log(p.omega)[None, :, :]
             + log_words[None, :, None])
    joint = log_pu[:, None] + logsumexp(terms, axis=1) + log_pop
    return np.exp(joint - logsumexp(joint))


def score_user(model: TrainedModel, query: UserQuery, u: int,
               kappa: float = DEFAULT_KAPPA) -> float:
    """P(u, s_+ | v, W_v)."""
    if not 0 <= u < model.n_users:
        raise QueryError(f"unknown user index {u}")
    return float(user_sentiment_table(model, query, kappa)[u, _positive(model)])


def discover_users(model: TrainedModel, query: UserQuery, candidates=None,
                   kappa: float = DEFAULT_KAPPA) -> RankedList:
    """Top-k users by P(u, s_+ | v, W_v); ``candidates`` restricts who may be ranked."""
    table = user_sentiment_table(model, query, kappa)
    with np.errstate(divide="ignore"):
        log_pos = np.log(table[:, _positive(model)])
    return _ranked_list(log_pos, rank(log_pos, candidates, query.k))
