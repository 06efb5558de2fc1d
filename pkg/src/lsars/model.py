"""Parameter estimation from final counts and model persistence."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields

import numpy as np

from ._io import ContainerError, read_container, write_container
from .corpus import GeoPoint, Vocabulary
from .geo import RegionGaussian
from .sampler import CountTables, HyperParams, SamplerState

__all__ = [
    "FORMAT_VERSION",
    "ModelError",
    "ModelParams",
    "TrainedModel",
    "estimate_parameters",
    "build_trained_model",
    "save_model",
    "load_model",
]

FORMAT_VERSION = "lsars-model/1"
NORM_TOL = 1e-12


class ModelError(ValueError):
    """Raised when a model file or in-memory model violates its invariants."""


def _normalize(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] == 0:
        return x
    return x / x.sum(axis=-1, keepdims=True)


@dataclass(eq=False)
class ModelParams:
    """Estimated multinomials and region Gaussians.

    theta (N, K) user-topic, vartheta (N, R) user-region, omega (K, S)
    topic-sentiment, psi (K, W) topic-content-word, phi_r (R, V)
    region-item, phi_zs (K, S, C) topic-sentiment-review-word.
    """

    theta: np.ndarray
    vartheta: np.ndarray
    omega: np.ndarray
    psi: np.ndarray
    phi_r: np.ndarray
    phi_zs: np.ndarray
    region_means: np.ndarray
    region_covs: np.ndarray
    n_u: np.ndarray

    TABLES = ("theta", "vartheta", "omega", "psi", "phi_r", "phi_zs")

    @property
    def K(self) -> int:
        return self.omega.shape[0]

    @property
    def S(self) -> int:
        return self.omega.shape[1]

    @property
    def R(self) -> int:
        return self.phi_r.shape[0]

    @property
    def N(self) -> int:
        return self.theta.shape[0]

    @property
    def regions(self) -> list[RegionGaussian]:
        return [RegionGaussian(m, c) for m, c in zip(self.region_means, self.region_covs)]

    def validate(self) -> None:
        N, K, R, S = self.N, self.K, self.R, self.S
        W, V, C = self.psi.shape[1], self.phi_r.shape[1], self.phi_zs.shape[2]
        expected = {
            "theta": (N, K), "vartheta": (N, R), "omega": (K, S), "psi": (K, W),
            "phi_r": (R, V), "phi_zs": (K, S, C), "region_means": (R, 2),
            "region_covs": (R, 2, 2), "n_u": (N,),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ModelError(f"{name} has shape {got}, expected {shape}")
        for name in self.TABLES:
            table = getattr(self, name)
            if table.shape[-1] == 0:
                continue
            flat = table.reshape(-1, table.shape[-1])
            if not np.all(np.isfinite(flat)) or np.any(flat <= 0.0):
                bad = int(np.argmax(~np.isfinite(flat).all(axis=1) | (flat <= 0.0).any(axis=1)))
                raise ModelError(f"{name} row {bad} has non-positive or non-finite entries")
            sums = flat.sum(axis=1)
            off = np.abs(sums - 1.0) > NORM_TOL
            if np.any(off):
                row = int(np.argmax(off))
                raise ModelError(f"{name} row {row} sums to {float(sums[row])!r}, not 1")
        if np.any(self.n_u < 0):
            raise ModelError("n_u has negative entries")
        for k, cov in enumerate(self.region_covs):
            if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
                raise ModelError(f"region {k} covariance is not symmetric")
            if cov[0, 0] <= 0 or np.linalg.det(cov) <= 0:
                raise ModelError(f"region {k} covariance is not positive definite")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ModelParams):
            return NotImplemented
        return all(np.array_equal(getattr(self, f.name), getattr(other, f.name))
                   for f in fields(self))


def estimate_parameters(counts: CountTables, hyper: HyperParams,
                        regions: list[RegionGaussian] | None = None) -> ModelParams:
    """Posterior-mean style estimates ``(count + prior) / sum(count + prior)`` per row.

    ``regions`` supplies the fitted Gaussians; without it every region is a
    unit Gaussian at the origin.
    """
    if regions is None:
        regions = [RegionGaussian(np.zeros(2), np.eye(2)) for _ in range(hyper.R)]
    return ModelParams(
        theta=_normalize(counts.n_uz + hyper.alpha),
        vartheta=_normalize(counts.n_ur + hyper.gamma),
        omega=_normalize(counts.n_zs + hyper.delta),
        psi=_normalize(counts.n_zw + hyper.eta),
        phi_r=_normalize(counts.n_rv + hyper.tau),
        phi_zs=_normalize(counts.n_zsc + hyper.beta),
        region_means=np.array([g.mean for g in regions], dtype=np.float64).reshape(-1, 2),
        region_covs=np.array([g.cov for g in regions], dtype=np.float64).reshape(-1, 2, 2),
        n_u=np.asarray(counts.n_u, dtype=np.int64).copy(),
    )


def _csr(rows) -> tuple[np.ndarray, np.ndarray]:
    ptr = np.zeros(len(rows) + 1, dtype=np.int64)
    np.cumsum([len(r) for r in rows], out=ptr[1:])
    idx = np.fromiter((x for r in rows for x in r), dtype=np.int64, count=int(ptr[-1]))
    return ptr, idx


def _uncsr(ptr: np.ndarray, idx: np.ndarray) -> list[tuple[int, ...]]:
    return [tuple(int(x) for x in idx[ptr[i]:ptr[i + 1]]) for i in range(len(ptr) - 1)]


@dataclass(eq=False)
class TrainedModel:
    """A queryable model: parameters plus everything scoring needs.

    ``visited[u]`` lists the items ``u`` checked into during training
    (sorted); ``item_content[v]`` is item ``v``'s content-word list.
    """

    params: ModelParams
    hyper: HyperParams
    users: Vocabulary
    items: Vocabulary
    content_vocab: Vocabulary
    review_vocab: Vocabulary
    item_locations: np.ndarray
    item_content: list[tuple[int, ...]]
    home_locations: np.ndarray
    visited: list[tuple[int, ...]]
    summary: dict = field(default_factory=dict)
    version: str = FORMAT_VERSION

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_items(self) -> int:
        return len(self.items)

    def home_location(self, u: int) -> GeoPoint:
        return GeoPoint(*self.home_locations[u])

    def item_location(self, v: int) -> GeoPoint:
        return GeoPoint(*self.item_locations[v])

    def validate(self) -> None:
        p = self.params
        p.validate()
        checks = {
            "users": (len(self.users), p.N),
            "items": (len(self.items), p.phi_r.shape[1]),
            "content words": (len(self.content_vocab), p.psi.shape[1]),
            "review words": (len(self.review_vocab), p.phi_zs.shape[2]),
            "item locations": (len(self.item_locations), len(self.items)),
            "item content": (len(self.item_content), len(self.items)),
            "home locations": (len(self.home_locations), len(self.users)),
            "visited": (len(self.visited), len(self.users)),
            "K": (self.hyper.K, p.K), "R": (self.hyper.R, p.R), "S": (self.hyper.S, p.S),
        }
        for what, (a, b) in checks.items():
            if a != b:
                raise ModelError(f"dimension mismatch for {what}: {a} != {b}")
        W, V = len(self.content_vocab), len(self.items)
        for v, words in enumerate(self.item_content):
            if any(not 0 <= w < W for w in words):
                raise ModelError(f"item {v} references an unknown content word")
        for u, items in enumerate(self.visited):
            if any(not 0 <= v < V for v in items):
                raise ModelError(f"user {u} visited list references an unknown item")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TrainedModel):
            return NotImplemented
        return (
            self.params == other.params
            and self.hyper == other.hyper
            and self.users == other.users
            and self.items == other.items
            and self.content_vocab == other.content_vocab
            and self.review_vocab == other.review_vocab
            and np.array_equal(self.item_locations, other.item_locations)
            and self.item_content == other.item_content
            and np.array_equal(self.home_locations, other.home_locations, equal_nan=True)
            and self.visited == other.visited
            and self.summary == other.summary
            and self.version == other.version
        )


def build_trained_model(state: SamplerState) -> TrainedModel:
    corpus = state.corpus
    params = estimate_parameters(state.counts, state.hyper, state.regions)
    visited = [tuple(sorted({corpus.records[i].item for i in pos})) for pos in corpus.profiles]
    return TrainedModel(
        params=params,
        hyper=state.hyper,
        users=corpus.users,
        items=corpus.items,
        content_vocab=corpus.content_vocab,
        review_vocab=corpus.review_vocab,
        item_locations=np.array(corpus.item_locations, dtype=np.float64).reshape(-1, 2),
        item_content=list(corpus.item_content),
        home_locations=np.array(corpus.home_locations, dtype=np.float64).reshape(-1, 2),
        visited=visited,
        summary={**corpus.summary(), "iterations_run": state.iteration},
    )


def save_model(model: TrainedModel, path: str | os.PathLike) -> None:
    """Write ``model`` atomically; floats are stored as raw float64 bytes."""
    p = model.params
    content_ptr, content_idx = _csr(model.item_content)
    visited_ptr, visited_idx = _csr(model.visited)
    header = {
        "format": model.version,
        "tag": "model",
        "hyper": model.hyper.to_dict(),
        "summary": model.summary,
        "dims": {"N": p.N, "K": p.K, "R": p.R, "S": p.S, "V": model.n_items,
                 "W": len(model.content_vocab), "C": len(model.review_vocab)},
        "vocab": {
            "users": model.users.tokens,
            "items": model.items.tokens,
            "content": model.content_vocab.tokens,
            "review": model.review_vocab.tokens,
        },
    }
    arrays = {name: getattr(p, name) for name in (*ModelParams.TABLES, "region_means",
                                                   "region_covs", "n_u")}
    arrays.update(
        item_locations=model.item_locations,
        home_locations=model.home_locations,
        item_content_ptr=content_ptr, item_content_idx=content_idx,
        visited_ptr=visited_ptr, visited_idx=visited_idx,
    )
    write_container(path, header, arrays)


def load_model(path: str | os.PathLike) -> TrainedModel:
    """Read and fully validate a model file written by :func:`save_model`."""
    try:
        header, arrays = read_container(path)
    except ContainerError as exc:
        raise ModelError(str(exc)) from None
    except OSError as exc:
        raise ModelError(f"cannot read model file {path}: {exc}") from None
    version = header.get("format")
    if version != FORMAT_VERSION:
        raise ModelError(f"{path}: unsupported format version {version!r} "
                         f"(expected {FORMAT_VERSION!r})")
    if header.get("tag") != "model":
        raise ModelError(f"{path}: file is tagged {header.get('tag')!r}, not a trained model")
    try:
        params = ModelParams(**{name: arrays[name] for name in (
            *ModelParams.TABLES, "region_means", "region_covs", "n_u")})
        vocab = header["vocab"]
        model = TrainedModel(
            params=params,
            hyper=HyperParams(**header["hyper"]),
            users=Vocabulary(vocab["users"]),
            items=Vocabulary(vocab["items"]),
            content_vocab=Vocabulary(vocab["content"]),
            review_vocab=Vocabulary(vocab["review"]),
            item_locations=arrays["item_locations"],
            item_content=_uncsr(arrays["item_content_ptr"], arrays["item_content_idx"]),
            home_locations=arrays["home_locations"],
            visited=_uncsr(arrays["visited_ptr"], arrays["visited_idx"]),
            summary=header.get("summary", {}),
            version=version,
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"{path}: incomplete or malformed model ({exc})") from None
    dims = header.get("dims", {})
    for key, val in {"N": params.N, "K": params.K, "R": params.R, "S": params.S}.items():
        if dims.get(key) != val:
            raise ModelError(f"{path}: header dimension {key}={dims.get(key)} "
                             f"disagrees with stored tables ({val})")
    model.validate()
    return model
