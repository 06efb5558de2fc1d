"""Collapsed Gibbs sampling over per-record topic, sentiment and region.

Every check-in record carries one latent triple ``(z, s, r)``: a single
topic ``z`` for all of its content and review words, a sentiment ``s`` for
its review, and a geographic region ``r`` for its item and location.
Topic and sentiment are block-sampled from their joint conditional, then
the region is sampled; the region Gaussians are refitted after each sweep.

Random streams
--------------
``numpy.random.SeedSequence(seed).spawn(3)`` yields three PCG64 streams:
stream 0 drives k-means seeding, stream 1 the random topic/sentiment
initialization, stream 2 the sweeps.  Each sweep draws ``2 * n_records``
uniforms from stream 2 (record ``i`` uses positions ``2i`` for ``(z, s)``
and ``2i + 1`` for ``r``).  Results therefore depend only on the seed.
"""

from __future__ import annotations

import contextlib
import logging
import math
from dataclasses import dataclass, field, fields
from typing import Callable

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .corpus import CheckinCorpus
from .geo import COVARIANCE_EPS, RegionGaussian, fit_region_gaussian, kmeans_regions
from .lexicon import SeedLexicon, default_lexicon

__all__ = [
    "HyperParams",
    "CorpusArrays",
    "CountTables",
    "SamplerState",
    "init_state",
    "remove_record",
    "add_record",
    "held_out",
    "conditional_topic_sentiment",
    "conditional_region",
    "gibbs_sweep",
    "complete_data_log_posterior",
    "train",
]

log = logging.getLogger(__name__)


@dataclass
class HyperParams:
    """Model dimensions, Dirichlet priors and run settings.

    ``alpha`` and ``gamma`` default to ``50 / K`` and ``50 / R``; the word,
    sentiment and item priors default to 0.01.
    """

    K: int = 40
    R: int = 20
    S: int = 2
    alpha: float | None = None
    gamma: float | None = None
    eta: float = 0.01
    delta: float = 0.01
    beta: float = 0.01
    tau: float = 0.01
    iterations: int = 1600
    seed: int = 0

    def __post_init__(self):
        for name in ("K", "R", "S"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
            setattr(self, name, int(getattr(self, name)))
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.alpha is None:
            self.alpha = 50.0 / self.K
        if self.gamma is None:
            self.gamma = 50.0 / self.R
        for name in ("alpha", "gamma", "eta", "delta", "beta", "tau"):
            val = float(getattr(self, name))
            if not (val > 0.0 and math.isfinite(val)):
                raise ValueError(f"prior {name} must be positive and finite")
            setattr(self, name, val)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class CorpusArrays:
    """Flat record arrays consumed by the compiled kernels (CSR word lists)."""

    rec_user: np.ndarray
    rec_item: np.ndarray
    loc: np.ndarray
    cw_ptr: np.ndarray
    cw_idx: np.ndarray
    rw_ptr: np.ndarray
    rw_idx: np.ndarray
    N: int
    V: int
    W: int
    C: int

    @classmethod
    def from_corpus(cls, corpus: CheckinCorpus) -> "CorpusArrays":
        recs = corpus.records
        cw_lens = [len(r.content_words) for r in recs]
        rw_lens = [len(r.review_words) for r in recs]
        cw_ptr = np.zeros(len(recs) + 1, dtype=np.int64)
        rw_ptr = np.zeros(len(recs) + 1, dtype=np.int64)
        np.cumsum(cw_lens, out=cw_ptr[1:])
        np.cumsum(rw_lens, out=rw_ptr[1:])
        return cls(
            rec_user=np.array([r.user for r in recs], dtype=np.int64),
            rec_item=np.array([r.item for r in recs], dtype=np.int64),
            loc=np.array([[r.location.lat, r.location.lon] for r in recs],
                         dtype=np.float64).reshape(-1, 2),
            cw_ptr=cw_ptr,
            cw_idx=np.fromiter((w for r in recs for w in r.content_words), dtype=np.int64),
            rw_ptr=rw_ptr,
            rw_idx=np.fromiter((c for r in recs for c in r.review_words), dtype=np.int64),
            N=corpus.n_users,
            V=corpus.n_items,
            W=corpus.n_content_words,
            C=corpus.n_review_words,
        )

    def __len__(self) -> int:
        return len(self.rec_user)


@dataclass
class CountTables:
    """Sufficient statistics of the collapsed model.

    ``n_u`` is the per-user total currently in the user tables (|D_u| except
    while a record is held out); ``n_z_words``, ``n_z_recs``,
    ``n_zs_words`` and ``n_r`` are marginal totals.
    """

    n_uz: np.ndarray
    n_ur: np.ndarray
    n_u: np.ndarray
    n_zw: np.ndarray
    n_z_words: np.ndarray
    n_zs: np.ndarray
    n_z_recs: np.ndarray
    n_zsc: np.ndarray
    n_zs_words: np.ndarray
    n_rv: np.ndarray
    n_r: np.ndarray

    @classmethod
    def tally(cls, arrays: CorpusArrays, K: int, R: int, S: int,
              z: np.ndarray, s: np.ndarray, r: np.ndarray) -> "CountTables":
        """Count tables recomputed from scratch for the given assignments."""
        N, V, W, C = arrays.N, arrays.V, arrays.W, arrays.C
        u, v = arrays.rec_user, arrays.rec_item
        n_uz = np.zeros((N, K), dtype=np.int64)
        np.add.at(n_uz, (u, z), 1)
        n_ur = np.zeros((N, R), dtype=np.int64)
        np.add.at(n_ur, (u, r), 1)
        n_zs = np.zeros((K, S), dtype=np.int64)
        np.add.at(n_zs, (z, s), 1)
        n_rv = np.zeros((R, V), dtype=np.int64)
        np.add.at(n_rv, (r, v), 1)
        cw_rec = np.repeat(np.arange(len(u)), np.diff(arrays.cw_ptr))
        n_zw = np.zeros((K, W), dtype=np.int64)
        np.add.at(n_zw, (z[cw_rec], arrays.cw_idx), 1)
        rw_rec = np.repeat(np.arange(len(u)), np.diff(arrays.rw_ptr))
        n_zsc = np.zeros((K, S, C), dtype=np.int64)
        np.add.at(n_zsc, (z[rw_rec], s[rw_rec], arrays.rw_idx), 1)
        return cls(
            n_uz=n_uz, n_ur=n_ur, n_u=n_uz.sum(axis=1),
            n_zw=n_zw, n_z_words=n_zw.sum(axis=1),
            n_zs=n_zs, n_z_recs=n_zs.sum(axis=1),
            n_zsc=n_zsc, n_zs_words=n_zsc.sum(axis=2),
            n_rv=n_rv, n_r=n_rv.sum(axis=1),
        )

    def copy(self) -> "CountTables":
        return CountTables(**{f.name: getattr(self, f.name).copy() for f in fields(self)})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CountTables):
            return NotImplemented
        return all(np.array_equal(getattr(self, f.name), getattr(other, f.name))
                   for f in fields(self))


@dataclass
class SamplerState:
    corpus: CheckinCorpus
    arrays: CorpusArrays
    hyper: HyperParams
    z: np.ndarray
    s: np.ndarray
    r: np.ndarray
    counts: CountTables
    regions: list[RegionGaussian]
    rng: np.random.Generator
    iteration: int = 0
    _gauss_cache: tuple | None = field(default=None, repr=False)

    def recount(self) -> CountTables:
        h = self.hyper
        return CountTables.tally(self.arrays, h.K, h.R, h.S, self.z, self.s, self.r)

    def refit_regions(self) -> None:
        loc = self.arrays.loc
        self.regions = [
            fit_region_gaussian(loc[self.r == k], previous_mean=self.regions[k].mean
                                if self.regions else None)
            for k in range(self.hyper.R)
        ]
        self._gauss_cache = None

    def gaussian_terms(self):
        """(means, inverse covariances, log normalizers) for the kernels."""
        if self._gauss_cache is None:
            means = np.array([g.mean for g in self.regions])
            covs = np.array([g.cov for g in self.regions])
            dets = covs[:, 0, 0] * covs[:, 1, 1] - covs[:, 0, 1] * covs[:, 1, 0]
            if np.any(dets <= 0.0):
                raise np.linalg.LinAlgError("singular region covariance")
            inv = np.linalg.inv(covs)
            log_norms = -np.log(2.0 * np.pi) - 0.5 * np.log(dets)
            self._gauss_cache = (means, inv, log_norms)
        return self._gauss_cache


def _split_streams(seed: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(ss))
            for ss in np.random.SeedSequence(seed).spawn(3)]


def init_state(corpus: CheckinCorpus, hyper: HyperParams,
               lexicon: SeedLexicon | None = None) -> SamplerState:
    """Initial assignments: k-means regions, random topics, lexicon-seeded sentiments.

    Regions come from k-means over the distinct items referenced by the
    corpus (one point per item).  Sentiments start at the majority
    polarity of a record's review words under ``lexicon`` (when ``S >= 2``);
    records without a lexicon signal keep a uniform-random sentiment.
    """
    if len(corpus) == 0:
        raise ValueError("cannot initialize a sampler on an empty corpus")
    lexicon = default_lexicon() if lexicon is None else lexicon
    km_rng, init_rng, sweep_rng = _split_streams(hyper.seed)
    arrays = CorpusArrays.from_corpus(corpus)

    used_items = np.unique(arrays.rec_item)
    item_region = np.zeros(corpus.n_items, dtype=np.int64)
    item_region[used_items] = kmeans_regions(corpus.item_locations[used_items], hyper.R, km_rng)
    r = item_region[arrays.rec_item]

    n = len(arrays)
    z = init_rng.integers(hyper.K, size=n).astype(np.int64)
    s = init_rng.integers(hyper.S, size=n).astype(np.int64)
    if hyper.S >= 2:
        vocab = corpus.review_vocab
        for i, rec in enumerate(corpus.records):
            pol = lexicon.polarity(vocab.token_of(c) for c in rec.review_words)
            if pol is not None:
                s[i] = pol

    counts = CountTables.tally(arrays, hyper.K, hyper.R, hyper.S, z, s, r)
    state = SamplerState(corpus=corpus, arrays=arrays, hyper=hyper, z=z, s=s, r=r,
                         counts=counts, regions=[], rng=sweep_rng)
    centroids = np.zeros((hyper.R, 2))
    for k in range(hyper.R):
        members = arrays.loc[r == k]
        centroids[k] = members.mean(axis=0) if len(members) else arrays.loc.mean(axis=0)
    state.regions = [RegionGaussian(c, COVARIANCE_EPS * np.eye(2)) for c in centroids]
    state.refit_regions()
    return state


def _zs_args(state: SamplerState):
    a, c = state.arrays, state.counts
    return (a.rec_user, a.cw_ptr, a.cw_idx, a.rw_ptr, a.rw_idx,
            c.n_uz, c.n_zw, c.n_z_words, c.n_zs, c.n_z_recs, c.n_zsc, c.n_zs_words)


def remove_record(state: SamplerState, i: int) -> None:
    """Subtract record ``i``'s current assignment from every count table."""
    a, c = state.arrays, state.counts
    _kernels.update_topic_sentiment(i, state.z[i], state.s[i], -1, *_zs_args(state))
    _kernels.update_region(i, state.r[i], -1, a.rec_user, a.rec_item, c.n_ur, c.n_rv, c.n_r)
    c.n_u[a.rec_user[i]] -= 1


def add_record(state: SamplerState, i: int) -> None:
    a, c = state.arrays, state.counts
    _kernels.update_topic_sentiment(i, state.z[i], state.s[i], 1, *_zs_args(state))
    _kernels.update_region(i, state.r[i], 1, a.rec_user, a.rec_item, c.n_ur, c.n_rv, c.n_r)
    c.n_u[a.rec_user[i]] += 1


@contextlib.contextmanager
def held_out(state: SamplerState, i: int):
    """Temporarily exclude record ``i`` from the counts."""
    remove_record(state, i)
    try:
        yield state
    finally:
        add_record(state, i)


def conditional_topic_sentiment(state: SamplerState, i: int, log: bool = False) -> np.ndarray:
    """K x S table of unnormalized (z, s) probabilities for record ``i``.

    The record must already be excluded from the counts (see
    :func:`held_out`).  With ``log=True`` the natural log is returned, which
    is what the sampler uses internally.
    """
    h, a, c = state.hyper, state.arrays, state.counts
    out = np.empty((h.K, h.S))
    _kernels.log_topic_sentiment(out, i, a.rec_user, a.cw_ptr, a.cw_idx, a.rw_ptr, a.rw_idx,
                                 c.n_uz, c.n_u, c.n_zw, c.n_z_words, c.n_zs, c.n_z_recs,
                                 c.n_zsc, c.n_zs_words, h.alpha, h.eta, h.delta, h.beta)
    return out if log else np.exp(out)


def conditional_region(state: SamplerState, i: int, log: bool = False) -> np.ndarray:
    """Length-R vector of unnormalized region probabilities for record ``i``."""
    h, a, c = state.hyper, state.arrays, state.counts
    means, inv, log_norms = state.gaussian_terms()
    out = np.empty(h.R)
    _kernels.log_region(out, i, a.rec_user, a.rec_item, a.loc, c.n_ur, c.n_u, c.n_rv, c.n_r,
                        h.gamma, h.tau, means, inv, log_norms)
    return out if log else np.exp(out)


def gibbs_sweep(state: SamplerState) -> SamplerState:
    """Resample every record once, then refit the region Gaussians."""
    h, a, c = state.hyper, state.arrays, state.counts
    uniforms = state.rng.random(2 * len(a))
    means, inv, log_norms = state.gaussian_terms()
    _kernels.sweep(uniforms, state.z, state.s, state.r,
                   a.rec_user, a.rec_item, a.loc, a.cw_ptr, a.cw_idx, a.rw_ptr, a.rw_idx,
                   c.n_uz, c.n_u, c.n_zw, c.n_z_words, c.n_zs, c.n_z_recs, c.n_zsc,
                   c.n_zs_words, c.n_ur, c.n_rv, c.n_r,
                   h.alpha, h.eta, h.delta, h.beta, h.gamma, h.tau,
                   means, inv, log_norms)
    state.refit_regions()
    state.iteration += 1
    return state


def _dirichlet_multinomial(counts: np.ndarray, prior: float) -> float:
    """Sum over rows of the log Polya (Dirichlet-multinomial) likelihood."""
    counts = counts.reshape(-1, counts.shape[-1])
    rows, dim = counts.shape
    if dim == 0:
        return 0.0  # empty vocabulary: nothing is generated
    totals = counts.sum(axis=1)
    nz = counts[counts > 0]
    return float(
        rows * gammaln(dim * prior)
        - gammaln(totals + dim * prior).sum()
        + (gammaln(nz + prior) - gammaln(prior)).sum()
    )


def complete_data_log_posterior(state: SamplerState) -> float:
    """Log joint of observations and current assignments, parameters integrated out.

    Sum of Dirichlet-multinomial terms for the user-topic, user-region,
    topic-word, topic-sentiment, topic-sentiment-review-word and
    region-item tables, plus each record's log location density under its
    region Gaussian.
    """
    h, c = state.hyper, state.counts
    total = (
        _dirichlet_multinomial(c.n_uz, h.alpha)
        + _dirichlet_multinomial(c.n_ur, h.gamma)
        + _dirichlet_multinomial(c.n_zw, h.eta)
        + _dirichlet_multinomial(c.n_zs, h.delta)
        + _dirichlet_multinomial(c.n_zsc, h.beta)
        + _dirichlet_multinomial(c.n_rv, h.tau)
    )
    means, inv, log_norms = state.gaussian_terms()
    x = state.arrays.loc - means[state.r]
    quad = np.einsum("ni,nij,nj->n", x, inv[state.r], x)
    return total + float(np.sum(log_norms[state.r] - 0.5 * quad))


def train(corpus: CheckinCorpus, hyper: HyperParams, lexicon: SeedLexicon | None = None,
          callback: Callable[[int, float], None] | None = None):
    """Initialize, run ``hyper.iterations`` sweeps and estimate parameters.

    ``callback(iteration, log_posterior)`` is invoked after every sweep
    (iterations count from 1).  Returns a :class:`lsars.model.TrainedModel`.
    """
    from .model import build_trained_model

    state = init_state(corpus, hyper, lexicon)
    for _ in range(hyper.iterations):
        gibbs_sweep(state)
        if callback is not None:
            callback(state.iteration, complete_data_log_posterior(state))
        elif log.isEnabledFor(logging.DEBUG):
            log.debug("iteration %d", state.iteration)
    return build_trained_model(state)
