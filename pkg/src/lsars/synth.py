"""Forward simulation of the generative process and parameter-recovery checks.

For each record of user ``u``: topic ``z ~ theta_u``, region
``r ~ vartheta_u``, item ``v ~ phi_r[r]``, location ``l_v ~ N(mu_r, Sigma_r)``
(drawn once per item, at its first use), content words ``w ~ psi_z``,
sentiment ``s ~ omega_z`` and review words ``c ~ phi_zs[z, s]``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._io import ContainerError, read_container, write_container
from .corpus import CheckinCorpus, build_corpus
from .lexicon import default_lexicon
from .model import FORMAT_VERSION, TrainedModel

__all__ = [
    "TrueParams",
    "RecoveryReport",
    "generate_corpus",
    "random_truth",
    "separated_truth",
    "align_topics",
    "recovery_report",
    "save_truth",
    "load_truth",
]

TRUTH_TAG = "synthetic-truth"
_TABLES = ("theta", "vartheta", "omega", "psi", "phi_r", "phi_zs")


@dataclass(eq=False)
class TrueParams:
    theta: np.ndarray
    vartheta: np.ndarray
    omega: np.ndarray
    psi: np.ndarray
    phi_r: np.ndarray
    phi_zs: np.ndarray
    region_means: np.ndarray
    region_covs: np.ndarray
    records_per_user: int
    content_len: tuple[int, int] = (1, 3)
    review_len: tuple[int, int] = (1, 5)
    content_tokens: list[str] = field(default_factory=list)
    review_tokens: list[str] = field(default_factory=list)

    def __post_init__(self):
        for name in (*_TABLES, "region_means", "region_covs"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        self.content_len = tuple(int(x) for x in self.content_len)
        self.review_len = tuple(int(x) for x in self.review_len)
        if not self.content_tokens:
            self.content_tokens = [f"w{j}" for j in range(self.W)]
        if not self.review_tokens:
            self.review_tokens = [f"c{j}" for j in range(self.C)]
        self.validate()

    N = property(lambda self: self.theta.shape[0])
    K = property(lambda self: self.psi.shape[0])
    R = property(lambda self: self.phi_r.shape[0])
    S = property(lambda self: self.omega.shape[1])
    V = property(lambda self: self.phi_r.shape[1])
    W = property(lambda self: self.psi.shape[1])
    C = property(lambda self: self.phi_zs.shape[2])

    @property
    def user_tokens(self) -> list[str]:
        return [f"u{i}" for i in range(self.N)]

    @property
    def item_tokens(self) -> list[str]:
        return [f"v{i}" for i in range(self.V)]

    def validate(self) -> None:
        N, K, R, S, V, W, C = self.N, self.K, self.R, self.S, self.V, self.W, self.C
        if min(N, K, R, S, V, W, C, self.records_per_user) < 1:
            raise ValueError("all sizes must be >= 1")
        shapes = {"theta": (N, K), "vartheta": (N, R), "omega": (K, S), "psi": (K, W),
                  "phi_r": (R, V), "phi_zs": (K, S, C), "region_means": (R, 2),
                  "region_covs": (R, 2, 2)}
        for name, shape in shapes.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        for name in _TABLES:
            t = getattr(self, name)
            if np.any(t < 0) or not np.allclose(t.sum(axis=-1), 1.0, rtol=0, atol=1e-9):
                raise ValueError(f"{name} rows must be non-negative and sum to 1")
        for lo, hi in (self.content_len, self.review_len):
            if not 0 <= lo <= hi:
                raise ValueError("word-count ranges must satisfy 0 <= lo <= hi")
        if len(self.content_tokens) != W or len(self.review_tokens) != C:
            raise ValueError("token lists must match vocabulary sizes")
        if len(set(self.content_tokens)) != W or len(set(self.review_tokens)) != C:
            raise ValueError("token lists must be unique")
        for cov in self.region_covs:
            if np.linalg.det(cov) <= 0 or cov[0, 0] <= 0:
                raise ValueError("region covariances must be positive definite")


def _draw_grouped(rng: np.random.Generator, groups: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Draw one category per element, from row ``groups[i]`` of ``probs``."""
    out = np.empty(len(groups), dtype=np.int64)
    for g in np.unique(groups):
        mask = groups == g
        out[mask] = rng.choice(probs.shape[-1], size=int(mask.sum()), p=probs[g])
    return out


def generate_corpus(truth: TrueParams, seed: int = 0) -> tuple[CheckinCorpus, np.ndarray]:
    """Simulate a corpus; returns it with the hidden ``(z, s, r)`` per record.

    Hidden assignments use the truth's topic/sentiment/region indices and
    follow the corpus record order.
    """
    rng = np.random.default_rng(seed)
    N, m = truth.N, truth.records_per_user
    users = np.repeat(np.arange(N), m)
    z = _draw_grouped(rng, users, truth.theta)
    r = _draw_grouped(rng, users, truth.vartheta)
    v = _draw_grouped(rng, r, truth.phi_r)
    s = _draw_grouped(rng, z, truth.omega)

    n = len(users)
    cw_len = rng.integers(truth.content_len[0], truth.content_len[1] + 1, size=n)
    cw = _draw_grouped(rng, np.repeat(z, cw_len), truth.psi)
    rw_len = rng.integers(truth.review_len[0], truth.review_len[1] + 1, size=n)
    zs_flat = np.repeat(z * truth.S + s, rw_len)
    rw = _draw_grouped(rng, zs_flat, truth.phi_zs.reshape(truth.K * truth.S, truth.C))

    # one location per item, drawn from the region of its first record
    _, first = np.unique(v, return_index=True)
    item_loc: dict[int, tuple[float, float]] = {}
    for i in np.sort(first):
        mean = truth.region_means[r[i]]
        chol = np.linalg.cholesky(truth.region_covs[r[i]])
        lat, lon = mean + chol @ rng.standard_normal(2)
        item_loc[int(v[i])] = (float(np.clip(lat, -90.0, 90.0)), float(np.clip(lon, -180.0, 180.0)))

    cw_ptr = np.concatenate([[0], np.cumsum(cw_len)])
    rw_ptr = np.concatenate([[0], np.cumsum(rw_len)])
    ctok, rtok = truth.content_tokens, truth.review_tokens
    rows = []
    for i in range(n):
        lat, lon = item_loc[int(v[i])]
        rows.append({
            "user": f"u{users[i]}",
            "item": f"v{v[i]}",
            "lat": lat,
            "lon": lon,
            "content_words": [ctok[w] for w in cw[cw_ptr[i]:cw_ptr[i + 1]]],
            "review_words": [rtok[c] for c in rw[rw_ptr[i]:rw_ptr[i + 1]]],
        })
    corpus = build_corpus(rows)
    return corpus, np.stack([z, s, r], axis=1)


def random_truth(n_users: int, records_per_user: int, K: int = 5, R: int = 3, S: int = 2,
                 n_items: int = 100, W: int = 50, C: int = 50, seed: int = 0,
                 content_len: tuple[int, int] = (1, 3),
                 review_len: tuple[int, int] = (1, 5)) -> TrueParams:
    """Random ground truth with Dirichlet rows and regions scattered over the globe."""
    if min(n_users, records_per_user, K, R, S, n_items, W, C) < 1:
        raise ValueError("all sizes must be >= 1")
    rng = np.random.default_rng(seed)
    means = np.column_stack([rng.uniform(-60, 60, R), rng.uniform(-150, 150, R)])
    covs = np.array([np.diag(rng.uniform(0.05, 0.5, 2)) for _ in range(R)])
    return TrueParams(
        theta=rng.dirichlet(np.full(K, 0.5), size=n_users),
        vartheta=rng.dirichlet(np.full(R, 0.5), size=n_users),
        omega=rng.dirichlet(np.full(S, 2.0), size=K),
        psi=rng.dirichlet(np.full(W, 0.1), size=K),
        phi_r=rng.dirichlet(np.full(n_items, 0.5), size=R),
        phi_zs=rng.dirichlet(np.full(C, 0.1), size=(K, S)),
        region_means=means,
        region_covs=covs,
        records_per_user=records_per_user,
        content_len=content_len,
        review_len=review_len,
    )


def separated_truth(n_users: int = 200, records_per_user: int = 50, K: int = 3, R: int = 2,
                    S: int = 2, words_per_topic: int = 10, items_per_region: int = 30,
                    region_spacing: float = 25.0, seed: int = 0) -> TrueParams:
    """A well-separated, identifiable truth.

    Topics own disjoint blocks of dominant content words (90% of their
    mass); regions sit ``region_spacing`` degrees apart and own disjoint
    item sets; the positive and negative review rows of every topic put most
    of their mass on seed-lexicon words of the matching polarity.
    """
    if S != 2:
        raise ValueError("separated_truth plants lexicon polarity and needs S == 2")
    rng = np.random.default_rng(seed)
    W = K * words_per_topic
    dominant = 0.9 if K > 1 else 1.0
    psi = np.zeros((K, W))
    for k in range(K):
        if K > 1:
            psi[k] = (1.0 - dominant) / (W - words_per_topic)
        block = slice(k * words_per_topic, (k + 1) * words_per_topic)
        psi[k, block] = dominant * rng.dirichlet(np.full(words_per_topic, 20.0))

    V = R * items_per_region
    phi_r = np.zeros((R, V))
    for k in range(R):
        phi_r[k, k * items_per_region:(k + 1) * items_per_region] = \
            rng.dirichlet(np.full(items_per_region, 5.0))
    means = np.array([[-30.0 + region_spacing * k, -60.0 + region_spacing * k] for k in range(R)])
    covs = np.array([np.diag([0.5, 0.5]) for _ in range(R)])

    lex = default_lexicon()
    pos_words = sorted(lex.positive)[:8]
    neg_words = sorted(lex.negative)[:8]
    topical = [f"r{k}_{j}" for k in range(K) for j in range(5)]
    review_tokens = pos_words + neg_words + topical
    C = len(review_tokens)
    phi_zs = np.zeros((K, S, C))
    for k in range(K):
        own = [16 + 5 * k + j for j in range(5)]
        for s, lex_block in ((1, range(0, 8)), (0, range(8, 16))):
            row = np.full(C, 0.1 / C)
            row[list(lex_block)] += 0.6 / 8
            row[own] += 0.3 / 5
            phi_zs[k, s] = row / row.sum()
    omega = np.column_stack([np.linspace(0.25, 0.6, K), 1 - np.linspace(0.25, 0.6, K)])

    return TrueParams(
        theta=rng.dirichlet(np.full(K, 0.3), size=n_users),
        vartheta=rng.dirichlet(np.full(R, 0.5), size=n_users),
        omega=omega,
        psi=psi,
        phi_r=phi_r,
        phi_zs=phi_zs,
        region_means=means,
        region_covs=covs,
        records_per_user=records_per_user,
        content_len=(2, 4),
        review_len=(2, 5),
        content_tokens=[f"w{j}" for j in range(W)],
        review_tokens=review_tokens,
    )


def align_topics(truth: np.ndarray, estimate: np.ndarray) -> np.ndarray:
    """Permutation ``p`` minimizing ``sum_k |truth[k] - estimate[p[k]]|_1``."""
    truth, estimate = np.asarray(truth), np.asarray(estimate)
    if truth.shape != estimate.shape:
        raise ValueError(f"shape mismatch: {truth.shape} vs {estimate.shape}")
    cost = np.abs(truth[:, None, :] - estimate[None, :, :]).sum(axis=2)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(len(rows), dtype=np.int64)
    perm[rows] = cols
    return perm


@dataclass
class RecoveryReport:
    topic_perm: list[int]
    region_perm: list[int]
    sentiment_aligned: list[bool]
    psi_l1: float
    theta_l1: float
    vartheta_l1: float
    omega_l1: float
    phi_r_l1: float
    phi_zs_l1: float
    region_mean_dist: list[float]

    @property
    def positive_sentiment_correct(self) -> bool:
        return all(self.sentiment_aligned)

    def to_dict(self) -> dict:
        return {**self.__dict__, "positive_sentiment_correct": self.positive_sentiment_correct}


def _reindex(values: np.ndarray, tokens, vocab) -> np.ndarray:
    """Columns of ``values`` (model index space) rearranged into ``tokens`` order, 0 if absent."""
    out = np.zeros(values.shape[:-1] + (len(tokens),))
    for j, t in enumerate(tokens):
        idx = vocab.get(t)
        if idx is not None:
            out[..., j] = values[..., idx]
    return out


def _mean_l1(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(a - b).sum(axis=-1).mean())


def recovery_report(truth: TrueParams, model: TrainedModel) -> RecoveryReport:
    """Compare a trained model against the truth after resolving label switching.

    Topics are matched on content-word distributions, regions on Gaussian
    means, and sentiments per matched topic on review-word distributions.
    """
    p = model.params
    if (p.K, p.R, p.S) != (truth.K, truth.R, truth.S):
        raise ValueError("model and truth dimensions differ")
    psi = _reindex(p.psi, truth.content_tokens, model.content_vocab)
    tperm = align_topics(truth.psi, psi)

    dist = np.linalg.norm(truth.region_means[:, None, :] - p.region_means[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(dist)
    rperm = np.empty(truth.R, dtype=np.int64)
    rperm[rows] = cols

    phi_zs = _reindex(p.phi_zs, truth.review_tokens, model.review_vocab)[tperm]
    aligned = []
    for k in range(truth.K):
        cost = np.abs(truth.phi_zs[k][:, None, :] - phi_zs[k][None, :, :]).sum(axis=2)
        r_, c_ = linear_sum_assignment(cost)
        aligned.append(bool(np.array_equal(c_[np.argsort(r_)], np.arange(truth.S))))

    users = [model.users.get(t) for t in truth.user_tokens]
    known = [i for i, u in enumerate(users) if u is not None]
    theta = p.theta[[users[i] for i in known]][:, tperm]
    vartheta = p.vartheta[[users[i] for i in known]][:, rperm]
    phi_r = _reindex(p.phi_r, truth.item_tokens, model.items)[rperm]

    return RecoveryReport(
        topic_perm=tperm.tolist(),
        region_perm=rperm.tolist(),
        sentiment_aligned=aligned,
        psi_l1=_mean_l1(truth.psi, psi[tperm]),
        theta_l1=_mean_l1(truth.theta[known], theta) if known else float("nan"),
        vartheta_l1=_mean_l1(truth.vartheta[known], vartheta) if known else float("nan"),
        omega_l1=_mean_l1(truth.omega, p.omega[tperm]),
        phi_r_l1=_mean_l1(truth.phi_r, phi_r),
        phi_zs_l1=_mean_l1(truth.phi_zs, phi_zs),
        region_mean_dist=[float(dist[k, rperm[k]]) for k in range(truth.R)],
    )


def save_truth(truth: TrueParams, path: str | os.PathLike) -> None:
    header = {
        "format": FORMAT_VERSION,
        "tag": TRUTH_TAG,
        "records_per_user": truth.records_per_user,
        "content_len": list(truth.content_len),
        "review_len": list(truth.review_len),
        "vocab": {"content": truth.content_tokens, "review": truth.review_tokens},
    }
    arrays = {name: getattr(truth, name) for name in (*_TABLES, "region_means", "region_covs")}
    write_container(path, header, arrays)


def load_truth(path: str | os.PathLike) -> TrueParams:
    try:
        header, arrays = read_container(path)
    except OSError as exc:
        raise ValueError(f"cannot read truth file {path}: {exc}") from None
    except ContainerError as exc:
        raise ValueError(str(exc)) from None
    if header.get("format") != FORMAT_VERSION or header.get("tag") != TRUTH_TAG:
        raise ValueError(f"{path}: not a {TRUTH_TAG} file in format {FORMAT_VERSION}")
    try:
        return TrueParams(
            **{name: arrays[name] for name in (*_TABLES, "region_means", "region_covs")},
            records_per_user=header["records_per_user"],
            content_len=tuple(header["content_len"]),
            review_len=tuple(header["review_len"]),
            content_tokens=header["vocab"]["content"],
            review_tokens=header["vocab"]["review"],
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: incomplete truth file ({exc})") from None
