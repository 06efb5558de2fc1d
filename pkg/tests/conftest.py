import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lsars.corpus import Vocabulary, build_corpus  # noqa: E402
from lsars.model import ModelParams, TrainedModel  # noqa: E402
from lsars.sampler import HyperParams  # noqa: E402

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def rows(*specs):
    """Build raw rows from (user, item, lat, lon, content_words, review_words) tuples."""
    out = []
    for user, item, lat, lon, cw, rw in specs:
        out.append({"user": user, "item": item, "lat": lat, "lon": lon,
                    "content_words": list(cw), "review_words": list(rw)})
    return out


def make_corpus(*specs):
    return build_corpus(rows(*specs))


def write_jsonl(path, row_list):
    with open(path, "w", encoding="utf-8") as fh:
        for r in row_list:
            fh.write(json.dumps(r) + "\n")
    return path


def oracle_inputs(state):
    """Translate a sampler state into the plain-Python oracle's arguments."""
    corpus = state.corpus
    records = [(r.user, r.item, (r.location.lat, r.location.lon), list(r.content_words),
                list(r.review_words)) for r in corpus.records]
    h = state.hyper
    dims = {"N": corpus.n_users, "V": corpus.n_items, "W": corpus.n_content_words,
            "C": corpus.n_review_words, "K": h.K, "R": h.R, "S": h.S}
    hyper = {"alpha": h.alpha, "gamma": h.gamma, "eta": h.eta, "delta": h.delta,
             "beta": h.beta, "tau": h.tau}
    regions = [(g.mean.tolist(), g.cov.tolist()) for g in state.regions]
    return records, list(map(int, state.z)), list(map(int, state.s)), list(map(int, state.r)), \
        dims, hyper, regions


def hand_model(theta, vartheta, omega, psi, phi_r, phi_zs=None, means=None, covs=None,
               n_u=None, item_locations=None, item_content=None, visited=None, home=None):
    """A TrainedModel assembled directly from parameter tables."""
    theta, vartheta, omega = (np.asarray(x, dtype=float) for x in (theta, vartheta, omega))
    psi, phi_r = np.asarray(psi, dtype=float), np.asarray(phi_r, dtype=float)
    N, K = theta.shape
    R, V = phi_r.shape
    S, W = omega.shape[1], psi.shape[1]
    if phi_zs is None:
        phi_zs = np.full((K, S, 1), 1.0)
    phi_zs = np.asarray(phi_zs, dtype=float)
    means = np.zeros((R, 2)) if means is None else np.asarray(means, dtype=float)
    covs = np.array([np.eye(2)] * R) if covs is None else np.asarray(covs, dtype=float)
    params = ModelParams(theta=theta, vartheta=vartheta, omega=omega, psi=psi, phi_r=phi_r,
                         phi_zs=phi_zs, region_means=means, region_covs=covs,
                         n_u=np.ones(N, dtype=np.int64) if n_u is None else np.asarray(n_u))
    if item_content is None:
        item_content = [(v % W,) for v in range(V)]
    locs = np.zeros((V, 2)) if item_locations is None else np.asarray(item_locations, dtype=float)
    model = TrainedModel(
        params=params, hyper=HyperParams(K=K, R=R, S=S),
        users=Vocabulary(f"u{i}" for i in range(N)), items=Vocabulary(f"v{i}" for i in range(V)),
        content_vocab=Vocabulary(f"w{i}" for i in range(W)),
        review_vocab=Vocabulary(f"c{i}" for i in range(phi_zs.shape[2])),
        item_locations=locs, item_content=[tuple(c) for c in item_content],
        home_locations=np.zeros((N, 2)) if home is None else np.asarray(home, dtype=float),
        visited=[()] * N if visited is None else [tuple(x) for x in visited],
    )
    model.validate()
    return model


def random_model(g, N=3, K=2, R=2, S=2, V=4, W=5, C=3):
    def dirichlet(*shape):
        return g.dirichlet(np.ones(shape[-1]), size=shape[:-1])
    return hand_model(
        dirichlet(N, K), dirichlet(N, R), dirichlet(K, S), dirichlet(K, W), dirichlet(R, V),
        dirichlet(K, S, C), means=g.uniform(-1, 1, (R, 2)),
        covs=[np.diag(g.uniform(0.5, 2, 2)) for _ in range(R)],
        n_u=g.integers(0, 20, N), item_locations=g.uniform(-1, 1, (V, 2)),
        item_content=[tuple(g.integers(0, W, g.integers(0, 4))) for _ in range(V)],
    )


@pytest.fixture
def tiny_corpus():
    return make_corpus(
        ("a", "x", 0.0, 0.0, ["cafe"], ["good"]),
        ("a", "y", 0.5, 0.5, ["bar"], ["bad"]),
        ("b", "x", 0.0, 0.0, ["cafe"], ["great"]),
        ("b", "z", 40.0, 40.0, ["museum"], ["good", "art"]),
        ("b", "x", 0.0, 0.0, ["cafe"], []),
    )


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
