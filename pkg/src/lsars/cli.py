"""Command-line entry point: ``lsars {train,recommend,discover,eval,synth,split}``.

Exit codes: 0 success, 2 input/configuration error, 3 query error
(unknown user or item), 4 empty evaluation.
"""

from __future__ import annotations

import argparse
import os
import sys

from ._io import atomic_write
from .corpus import CorpusError, GeoPoint, parse_checkin_file, split_train_test, write_checkin_file
from .evaluation import (
    DEFAULT_DISTANCE_KM,
    EmptyEvaluationError,
    evaluate_items,
    evaluate_users,
    map_records_to_model,
)
from .lexicon import default_lexicon, load_lexicon
from .model import ModelError, load_model, save_model
from .sampler import HyperParams, train
from .scoring import DEFAULT_KAPPA, ItemQuery, UserQuery, discover_users, recommend_items
from .synth import generate_corpus, load_truth, random_truth, save_truth

EXIT_OK, EXIT_INPUT, EXIT_QUERY, EXIT_EMPTY = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, status: int = EXIT_INPUT):
        super().__init__(message)
        self.status = status


def _positive_int(text: str) -> int:
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {val}")
    return val


def _nonneg_int(text: str) -> int:
    val = int(text)
    if val < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {val}")
    return val


def _positive_float(text: str) -> float:
    val = float(text)
    if not val > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {val}")
    return val


def _k_list(text: str) -> list[int]:
    try:
        ks = [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid k list {text!r}") from None
    if not ks or any(k < 1 for k in ks):
        raise argparse.ArgumentTypeError("k values must be >= 1")
    return ks


def _require_file(path: str, what: str) -> None:
    if not os.path.isfile(path):
        raise CliError(f"{what} not found: {path}")


def _load(path: str):
    _require_file(path, "model file")
    try:
        return load_model(path)
    except ModelError as exc:
        raise CliError(str(exc)) from None


def _location(args) -> GeoPoint:
    try:
        return GeoPoint(args.lat, args.lon)
    except CorpusError as exc:
        raise CliError(str(exc)) from None


def cmd_train(args) -> int:
    _require_file(args.input, "check-in file")
    try:
        hyper = HyperParams(K=args.topics, R=args.regions, S=args.sentiments, alpha=args.alpha,
                            gamma=args.gamma, eta=args.eta, delta=args.delta, beta=args.beta,
                            tau=args.tau, iterations=args.iters, seed=args.seed)
    except ValueError as exc:
        raise CliError(f"invalid configuration: {exc}") from None
    lexicon = default_lexicon()
    if args.lexicon:
        _require_file(args.lexicon, "lexicon file")
        try:
            lexicon = load_lexicon(args.lexicon)
        except ValueError as exc:
            raise CliError(str(exc)) from None
    try:
        corpus = parse_checkin_file(args.input)
    except CorpusError as exc:
        raise CliError(f"{args.input}: {exc}") from None
    if len(corpus) == 0:
        raise CliError(f"{args.input}: no check-in records")

    def progress(it: int, logpost: float) -> None:
        print(f"iter {it} log_posterior {logpost:.6f}", file=sys.stderr, flush=True)

    model = train(corpus, hyper, lexicon=lexicon, callback=progress)
    save_model(model, args.output)
    return EXIT_OK


def cmd_recommend(args) -> int:
    model = _load(args.model)
    u = model.users.get(args.user)
    if u is None:
        raise CliError(f"unknown user {args.user!r}", EXIT_QUERY)
    query = ItemQuery(u, _location(args), args.k)
    ranked = recommend_items(model, query, exclude_visited=not args.include_visited,
                             kappa=args.kappa)
    for v, score in ranked:
        print(f"{model.items.token_of(v)}\t{score:.17g}")
    return EXIT_OK


def cmd_discover(args) -> int:
    model = _load(args.model)
    adhoc = args.words is not None or args.lat is not None or args.lon is not None
    v = model.items.get(args.item) if args.item is not None else None
    if v is not None:
        query = UserQuery(k=args.k, item=v)
    elif adhoc:
        if (args.lat is None) != (args.lon is None):
            raise CliError("ad-hoc queries need both --lat and --lon")
        loc = _location(args) if args.lat is not None else None
        tokens = (args.words or "").replace(",", " ").split()
        query = UserQuery.adhoc(model, loc, tokens, k=args.k)
    elif args.item is not None:
        raise CliError(f"unknown item {args.item!r}", EXIT_QUERY)
    else:
        raise CliError("discover needs --item or an ad-hoc --lat/--lon/--words description")
    ranked = discover_users(model, query, kappa=args.kappa)
    for u, prob in ranked:
        print(f"{model.users.token_of(u)}\t{prob:.17g}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = _load(args.model)
    _require_file(args.test, "test file")
    try:
        test = parse_checkin_file(args.test)
    except CorpusError as exc:
        raise CliError(f"{args.test}: {exc}") from None
    records = map_records_to_model(model, test)
    evaluate = evaluate_items if args.task == "items" else evaluate_users
    try:
        report = evaluate(model, records, ks=args.k, scenario=args.scenario,
                          d=args.distance_km, kappa=args.kappa)
    except EmptyEvaluationError as exc:
        raise CliError(f"empty evaluation: {exc}", EXIT_EMPTY) from None
    sys.stdout.write(report.to_text())
    if args.json:
        with atomic_write(args.json, "w") as fh:
            fh.write(report.to_json() + "\n")
    if args.cases:
        report.write_cases_csv(args.cases)
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.truth:
        _require_file(args.truth, "truth file")
        try:
            truth = load_truth(args.truth)
        except ValueError as exc:
            raise CliError(str(exc)) from None
    elif args.random_truth:
        truth = random_truth(args.users, args.records, K=args.topics, R=args.regions,
                             S=args.sentiments, n_items=args.items, W=args.content_words,
                             C=args.review_words, seed=args.seed)
    else:
        raise CliError("synth needs --truth FILE or --random-truth")
    corpus, hidden = generate_corpus(truth, seed=args.seed)
    stem = args.output[:-6] if args.output.endswith(".jsonl") else args.output
    truth_out = args.truth_out or stem + ".truth"
    hidden_out = args.hidden_out or stem + ".hidden.csv"
    write_checkin_file(corpus, args.output)
    if not args.truth:
        save_truth(truth, truth_out)
    with atomic_write(hidden_out, "w") as fh:
        fh.write("record,user,item,topic,sentiment,region\n")
        for i, (rec, (z, s, r)) in enumerate(zip(corpus.records, hidden)):
            fh.write(f"{i},{corpus.users.token_of(rec.user)},{corpus.items.token_of(rec.item)},"
                     f"{z},{s},{r}\n")
    print(f"wrote {len(corpus)} records to {args.output}", file=sys.stderr)
    return EXIT_OK


def cmd_split(args) -> int:
    _require_file(args.input, "check-in file")
    try:
        corpus = parse_checkin_file(args.input)
        train_corpus, test_records = split_train_test(corpus, args.train_fraction, args.seed)
    except (CorpusError, ValueError) as exc:
        raise CliError(f"{args.input}: {exc}") from None
    write_checkin_file(corpus, args.train, train_corpus.records)
    write_checkin_file(corpus, args.test, test_records)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lsars", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model on a check-in file")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="model file to write")
    p.add_argument("--topics", type=_positive_int, default=40)
    p.add_argument("--regions", type=_positive_int, default=20)
    p.add_argument("--sentiments", type=_positive_int, default=2)
    p.add_argument("--iters", type=_nonneg_int, default=1600)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lexicon", help="seed lexicon with [positive]/[negative] sections")
    for name in ("alpha", "gamma", "eta", "delta", "beta", "tau"):
        p.add_argument(f"--{name}", type=_positive_float, default=None if name in ("alpha", "gamma") else 0.01)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("recommend", help="top-k items for a user at a location")
    p.add_argument("--model", required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--lat", type=float, required=True)
    p.add_argument("--lon", type=float, required=True)
    p.add_argument("--k", type=_positive_int, default=20)
    p.add_argument("--include-visited", action="store_true",
                   help="also rank items the user visited in training")
    p.add_argument("--kappa", type=_positive_float, default=DEFAULT_KAPPA)
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("discover", help="top-k users likely to favour an item")
    p.add_argument("--model", required=True)
    p.add_argument("--item")
    p.add_argument("--lat", type=float)
    p.add_argument("--lon", type=float)
    p.add_argument("--words", help="content words of an ad-hoc item (space or comma separated)")
    p.add_argument("--k", type=_positive_int, default=10)
    p.add_argument("--kappa", type=_positive_float, default=DEFAULT_KAPPA)
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("eval", help="Accuracy@k / Precision@k on held-out check-ins")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--task", choices=("items", "users"), default="items")
    p.add_argument("--k", type=_k_list, default=None, help="e.g. '1,10,20'")
    p.add_argument("--scenario", choices=("hometown", "outoftown", "all"), default="all")
    p.add_argument("--distance-km", type=_positive_float, default=DEFAULT_DISTANCE_KM)
    p.add_argument("--kappa", type=_positive_float, default=DEFAULT_KAPPA)
    p.add_argument("--json", help="write the report as JSON to this path")
    p.add_argument("--cases", help="write per-case CSV to this path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="simulate a corpus from known parameters")
    p.add_argument("-o", "--output", required=True, help="check-in JSON-lines file to write")
    p.add_argument("--truth", help="truth file to simulate from")
    p.add_argument("--random-truth", action="store_true")
    p.add_argument("--users", type=_positive_int, default=50)
    p.add_argument("--records", type=_positive_int, default=20, help="records per user")
    p.add_argument("--topics", type=_positive_int, default=5)
    p.add_argument("--regions", type=_positive_int, default=3)
    p.add_argument("--sentiments", type=_positive_int, default=2)
    p.add_argument("--items", type=_positive_int, default=100)
    p.add_argument("--content-words", type=_positive_int, default=50)
    p.add_argument("--review-words", type=_positive_int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--truth-out")
    p.add_argument("--hidden-out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="per-user random train/test split")
    p.add_argument("input")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_split)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "eval" and args.k is None:
        args.k = [1, 10, 20] if args.task == "items" else [1, 5, 10]
    try:
        return args.func(args)
    except CliError as exc:
        print(f"lsars {args.command}: error: {exc}", file=sys.stderr)
        return exc.status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
