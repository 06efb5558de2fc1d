"""Evaluation protocol: home-town/out-of-town split, Accuracy@k and Precision@k.

Item recommendation: for each held-out check-in ``(u, v)`` the ground-truth
item is ranked against every item ``u`` did not visit in training, with the
query location set to ``v``'s location; a hit at ``k`` means rank ``<= k``.

User discovery: for each held-out item, users are ranked by
``P(u, s_+ | v, W_v)``; relevant users are those with a held-out check-in on
that item, and Precision@k is ``#relevant in top-k / k`` averaged over items.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._io import atomic_write
from .corpus import CheckinCorpus, CheckinRecord, GeoPoint
from .geo import haversine_km, haversine_km_array
from .model import TrainedModel
from .scoring import DEFAULT_KAPPA, ItemScorer, UserQuery, discover_users

__all__ = [
    "DEFAULT_DISTANCE_KM",
    "Scenario",
    "EmptyEvaluationError",
    "ItemCase",
    "ItemGroupCase",
    "EvalReport",
    "classify_scenario",
    "map_records_to_model",
    "rank_item_cases",
    "accuracy_at_k",
    "evaluate_items",
    "discovery_cases",
    "precision_at_k",
    "evaluate_users",
]

DEFAULT_DISTANCE_KM = 100.0


class Scenario(enum.Enum):
    HOME_TOWN = "hometown"
    OUT_OF_TOWN = "outoftown"


class EmptyEvaluationError(ValueError):
    """No test case survives the scenario filter."""


def classify_scenario(home: GeoPoint, target: GeoPoint,
                      d: float = DEFAULT_DISTANCE_KM) -> Scenario:
    """Out-of-town iff the great-circle distance exceeds ``d`` km."""
    if not d > 0:
        raise ValueError("distance threshold must be positive")
    return Scenario.OUT_OF_TOWN if haversine_km(home, target) > d else Scenario.HOME_TOWN


def _scenario_filter(scenario) -> Scenario | None:
    if scenario is None or scenario == "all":
        return None
    return scenario if isinstance(scenario, Scenario) else Scenario(scenario)


def map_records_to_model(model: TrainedModel, corpus: CheckinCorpus) -> list[CheckinRecord]:
    """Re-index records of a separately parsed corpus into ``model``'s vocabularies.

    Unknown users/items become index -1; unknown content words are dropped.
    """
    out = []
    for rec in corpus.records:
        u = model.users.get(corpus.users.token_of(rec.user), -1)
        v = model.items.get(corpus.items.token_of(rec.item), -1)
        words = tuple(w for w in (model.content_vocab.get(corpus.content_vocab.token_of(c))
                                  for c in rec.content_words) if w is not None)
        out.append(CheckinRecord(u, v, rec.location, words, (), rec.timestamp))
    return out


@dataclass
class ItemCase:
    case_id: int
    user: int
    item: int
    scenario: Scenario | None
    rank: int | None  # None when skipped
    skipped: str | None = None

    def hit(self, k: int) -> bool:
        return self.rank is not None and self.rank <= k


@dataclass
class ItemGroupCase:
    case_id: int
    item: int
    scenario: Scenario | None
    relevant: tuple[int, ...]
    top: tuple[int, ...]  # ranked users, length max(ks)
    skipped: str | None = None

    def relevances(self, k: int) -> int:
        rel = set(self.relevant)
        return sum(1 for u in self.top[:k] if u in rel)


@dataclass
class EvalReport:
    task: str
    scenario: str
    distance_km: float
    ks: list[int]
    metrics: dict[int, float]
    counts: dict[str, int]
    cases: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "scenario": self.scenario,
            "distance_km": self.distance_km,
            "ks": list(self.ks),
            "metrics": {str(k): v for k, v in self.metrics.items()},
            "counts": dict(self.counts),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        name = "Accuracy" if self.task == "items" else "Precision"
        lines = [
            f"task      {self.task}",
            f"scenario  {self.scenario} (d = {self.distance_km:g} km)",
        ]
        for key in sorted(self.counts):
            lines.append(f"{key:<10}{self.counts[key]}")
        width = max(len(f"{name}@{k}") for k in self.ks)
        for k in self.ks:
            lines.append(f"{name + '@' + str(k):<{width}}  {self.metrics[k]:.6f}")
        return "\n".join(lines) + "\n"

    def cases_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if self.task == "items":
            writer.writerow(["case_id", "user", "item", "scenario", "rank",
                             *[f"hit@{k}" for k in self.ks]])
            for c in self.cases:
                writer.writerow([c.case_id, c.user, c.item,
                                 c.scenario.value if c.scenario else "skipped",
                                 "" if c.rank is None else c.rank,
                                 *[int(c.hit(k)) for k in self.ks]])
        else:
            writer.writerow(["case_id", "item", "scenario", "n_relevant", "top_users",
                             *[f"relevant@{k}" for k in self.ks]])
            for c in self.cases:
                writer.writerow([c.case_id, c.item,
                                 c.scenario.value if c.scenario else "all",
                                 len(c.relevant), " ".join(map(str, c.top)),
                                 *[c.relevances(k) for k in self.ks]])
        return buf.getvalue()

    def write_cases_csv(self, path) -> None:
        with atomic_write(path, "w") as fh:
            fh.write(self.cases_csv())


def _item_rank(log_scores: np.ndarray, truth: int, candidates: np.ndarray) -> int:
    """1-based position of ``truth`` among ``candidates`` under the ranking tie rule."""
    ts = log_scores[truth]
    others = candidates[candidates != truth]
    ahead = np.sum((log_scores[others] > ts) | ((log_scores[others] == ts) & (others < truth)))
    return int(ahead) + 1


def rank_item_cases(model: TrainedModel, test_records: Sequence[CheckinRecord],
                    d: float = DEFAULT_DISTANCE_KM, kappa: float = DEFAULT_KAPPA,
                    scorer: ItemScorer | None = None) -> list[ItemCase]:
    """Rank each held-out check-in's item against the user's unvisited items."""
    scorer = scorer or ItemScorer(model, kappa)
    all_items = np.arange(model.n_items)
    cases: list[ItemCase] = []
    by_item: dict[int, list[int]] = defaultdict(list)
    for cid, rec in enumerate(test_records):
        if not 0 <= rec.user < model.n_users:
            cases.append(ItemCase(cid, rec.user, rec.item, None, None, "unknown user"))
        elif not 0 <= rec.item < model.n_items:
            cases.append(ItemCase(cid, rec.user, rec.item, None, None, "unknown item"))
        else:
            scen = classify_scenario(model.home_location(rec.user), rec.location, d)
            cases.append(ItemCase(cid, rec.user, rec.item, scen, None))
            by_item[rec.item].append(cid)
    for v, cids in by_item.items():
        # query location = ground-truth item's location
        spatial = scorer.log_spatial(model.item_location(v))
        for cid in cids:
            case = cases[cid]
            log_scores = spatial + scorer.log_interest(case.user)
            visited = np.asarray(model.visited[case.user], dtype=np.int64)
            cand = np.setdiff1d(all_items, visited) if len(visited) else all_items
            cand = np.union1d(cand, [v])
            case.rank = _item_rank(log_scores, v, cand)
    return cases


def _item_metrics(cases: Iterable[ItemCase], ks: Sequence[int], scenario: Scenario | None):
    kept = [c for c in cases if c.skipped is None and (scenario is None or c.scenario == scenario)]
    if not kept:
        raise EmptyEvaluationError("no test cases left after filtering")
    return {k: sum(c.hit(k) for c in kept) / len(kept) for k in ks}, kept


def accuracy_at_k(model: TrainedModel, test_records: Sequence[CheckinRecord], k: int,
                  scenario=None, d: float = DEFAULT_DISTANCE_KM,
                  kappa: float = DEFAULT_KAPPA, cases: list[ItemCase] | None = None) -> float:
    """#hits@k / #evaluated cases.  Skipped cases are excluded from the denominator."""
    if k < 1:
        raise ValueError("k must be >= 1")
    cases = cases if cases is not None else rank_item_cases(model, test_records, d, kappa)
    metrics, _ = _item_metrics(cases, [k], _scenario_filter(scenario))
    return metrics[k]


def evaluate_items(model: TrainedModel, test_records: Sequence[CheckinRecord],
                   ks: Sequence[int] = (1, 10, 20), scenario=None,
                   d: float = DEFAULT_DISTANCE_KM, kappa: float = DEFAULT_KAPPA) -> EvalReport:
    if any(k < 1 for k in ks):
        raise ValueError("k values must be >= 1")
    filt = _scenario_filter(scenario)
    cases = rank_item_cases(model, test_records, d, kappa)
    metrics, kept = _item_metrics(cases, ks, filt)
    counts = {
        "hometown": sum(c.scenario == Scenario.HOME_TOWN for c in cases),
        "outoftown": sum(c.scenario == Scenario.OUT_OF_TOWN for c in cases),
        "skipped": sum(c.skipped is not None for c in cases),
        "evaluated": len(kept),
    }
    return EvalReport("items", filt.value if filt else "all", d, list(ks), metrics, counts, cases)


def discovery_cases(model: TrainedModel, test_records: Sequence[CheckinRecord], k_max: int,
                    scenario=None, d: float = DEFAULT_DISTANCE_KM,
                    kappa: float = DEFAULT_KAPPA) -> tuple[list[ItemGroupCase], dict[str, int]]:
    """One case per held-out item with at least one relevant user under the filter.

    Under a scenario filter only users whose home location falls in that
    scenario relative to the item are ranked.
    """
    filt = _scenario_filter(scenario)
    counts = {"hometown": 0, "outoftown": 0, "skipped": 0}
    relevant: dict[int, set[int]] = defaultdict(set)
    order: list[int] = []
    for rec in test_records:
        if not (0 <= rec.user < model.n_users and 0 <= rec.item < model.n_items):
            counts["skipped"] += 1
            continue
        scen = classify_scenario(model.home_location(rec.user), model.item_location(rec.item), d)
        counts[scen.value] += 1
        if filt is None or scen == filt:
            if rec.item not in relevant:
                order.append(rec.item)
            relevant[rec.item].add(rec.user)
    cases = []
    homes = model.home_locations
    for cid, v in enumerate(order):
        cand = None
        if filt is not None:
            lat, lon = model.item_locations[v]
            dist = haversine_km_array(homes[:, 0], homes[:, 1], lat, lon)
            far = dist > d
            cand = np.flatnonzero(far if filt == Scenario.OUT_OF_TOWN else ~far)
        ranked = discover_users(model, UserQuery(k=k_max, item=v), candidates=cand, kappa=kappa)
        cases.append(ItemGroupCase(cid, v, filt, tuple(sorted(relevant[v])), tuple(ranked.indices)))
    return cases, counts


def _precision(cases: Sequence[ItemGroupCase], k: int) -> float:
    if not cases:
        raise EmptyEvaluationError("no test items left after filtering")
    return float(np.mean([c.relevances(k) / k for c in cases]))


def precision_at_k(model: TrainedModel, test_records: Sequence[CheckinRecord], k: int,
                   scenario=None, d: float = DEFAULT_DISTANCE_KM,
                   kappa: float = DEFAULT_KAPPA) -> float:
    """Mean over held-out items of (#relevant users in the top k) / k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    cases, _ = discovery_cases(model, test_records, k, scenario, d, kappa)
    return _precision(cases, k)


def evaluate_users(model: TrainedModel, test_records: Sequence[CheckinRecord],
                   ks: Sequence[int] = (1, 5, 10), scenario=None,
                   d: float = DEFAULT_DISTANCE_KM, kappa: float = DEFAULT_KAPPA) -> EvalReport:
    if any(k < 1 for k in ks):
        raise ValueError("k values must be >= 1")
    filt = _scenario_filter(scenario)
    cases, counts = discovery_cases(model, test_records, max(ks), filt, d, kappa)
    metrics = {k: _precision(cases, k) for k in ks}
    counts["evaluated"] = len(cases)
    return EvalReport("users", filt.value if filt else "all", d, list(ks), metrics, counts, cases)
