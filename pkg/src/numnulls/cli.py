"""Command-line interface.

Every command prints exactly one JSON document on stdout; diagnostics go to
stderr. Options may also be set through ``NUMNULLS_<OPTION>`` environment
variables (for example ``NUMNULLS_SEED=7``); explicit flags win.

Exit codes: 0 success, 1 input / parse / type / configuration errors,
2 aborted sampling or evaluation, 3 conditional-world blowup.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Any, Callable, Dict, List, Optional

from . import __version__
from .approx import LikelihoodQuery, like_apx, threshold
from .condworld import (
    DEFAULT_BLOWUP_CAP,
    check_trivial_extension,
    lift,
    prune,
    validate_world,
    world_from_json,
    world_of,
    world_to_json,
)
from .errors import BlowupLimit, ConfigError, EvalError, NumNullsError, SampleError, SchemaError
from .evaluate import evaluate
from .model import bag_to_json, database_from_json
from .oracle import DEFAULT_CELL_LIMIT, DEFAULT_RESOLUTION, likelihood as oracle_likelihood
from .parser import intervals_from_json, parse
from .rewrite import DEFAULT_ARITY_CAP, build_apx_query, build_compute_query

log = logging.getLogger("numnulls")

ENV_PREFIX = "NUMNULLS_"
CMP_CHOICES = {"lt": "<", "eq": "=", "gt": ">"}


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _epsilon(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError(f"epsilon must lie in (0, 1], got {value}")
    return value


def _delta(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError(f"delta must lie in [0, 1], got {value}")
    return value


def _flag(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off", ""):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


# option name -> (converter, default); shared by flags and environment overrides
OPTIONS: Dict[str, Any] = {
    "seed": (_seed, 0),
    "epsilon": (_epsilon, 0.1),
    "gamma": (_positive_int, None),
    "trials": (_positive_int, 1),
    "threads": (_positive_int, 1),
    "skip_bad_samples": (_flag, False),
    "blowup_cap": (_positive_int, DEFAULT_BLOWUP_CAP),
    "cell_limit": (_positive_int, DEFAULT_CELL_LIMIT),
    "cmp": (lambda t: _choice(t, CMP_CHOICES), "eq"),
    "k": (_nonneg_int, 1),
    "delta": (_delta, 0.5),
    "samples": (_positive_int, 1000),
    "resolution": (_positive_int, DEFAULT_RESOLUTION),
    "arity_cap": (_positive_int, DEFAULT_ARITY_CAP),
}


def _choice(text, choices):
    if text not in choices:
        raise argparse.ArgumentTypeError(f"expected one of {sorted(choices)}, got {text!r}")
    return text


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _env_defaults(environ) -> Dict[str, Any]:
    out = {}
    for name, (convert, _) in OPTIONS.items():
        raw = environ.get(ENV_PREFIX + name.upper())
        if raw is None:
            continue
        try:
            out[name] = convert(raw)
        except argparse.ArgumentTypeError as exc:
            raise ConfigError(f"{ENV_PREFIX}{name.upper()}: {exc}") from None
    return out


def _add(p: argparse.ArgumentParser, name: str, help: str):
    convert, _ = OPTIONS[name]
    flag = "--" + name.replace("_", "-")
    if convert is _flag:
        p.add_argument(flag, dest=name, action="store_const", const=True, help=help)
    else:
        p.add_argument(flag, dest=name, type=convert, help=help)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="numnulls", description="Query answering over databases with numerical marked nulls.")
    parser.add_argument("--version", action="version", version=f"numnulls {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more log output on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, help, needs_query=True):
        p = sub.add_parser(name, help=help)
        p.add_argument("database", help="database JSON file")
        if needs_query:
            p.add_argument("query", help="query file in the text grammar")
        return p

    def likelihood_opts(p, sampling=True):
        p.add_argument("--intervals", help="interval tuple JSON file (default: no constraint)")
        _add(p, "cmp", "comparator: lt, eq or gt")
        _add(p, "k", "count to compare against")
        if sampling:
            _add(p, "seed", "64-bit master seed")
            _add(p, "epsilon", "additive error in (0, 1]")
            _add(p, "gamma", "override the number of samples")

    p = command("likelihood", "estimate the likelihood with additive error epsilon")
    likelihood_opts(p)
    _add(p, "trials", "median over this many independent runs")
    _add(p, "threads", "worker processes for sampling")
    _add(p, "skip_bad_samples", "count failing samples instead of aborting")

    p = command("threshold", "decide whether the likelihood exceeds delta")
    likelihood_opts(p)
    _add(p, "delta", "threshold in [0, 1]")
    _add(p, "trials", "median over this many independent runs")
    _add(p, "threads", "worker processes for sampling")
    _add(p, "skip_bad_samples", "count failing samples instead of aborting")

    p = command("rewrite", "compile the sampling run into a single query")
    likelihood_opts(p)
    _add(p, "arity_cap", "largest intermediate arity allowed in base-relation gadgets")
    p.add_argument("--out", help="write the compiled query text here instead of embedding it")
    p.add_argument("--evaluate", action="store_true", help="also evaluate the compiled query")

    p = command("compute", "compile and evaluate the possible-answer enumerator")
    _add(p, "seed", "64-bit master seed")
    _add(p, "epsilon", "additive error in (0, 1]")
    _add(p, "gamma", "override the number of samples")
    _add(p, "arity_cap", "largest intermediate arity allowed in base-relation gadgets")
    p.add_argument("--out", help="write the compiled query text here")

    p = command("lift", "lift the query to the conditional world of the database")
    _add(p, "blowup_cap", "maximum number of conditional databases")
    p.add_argument("--prune", action="store_true", help="drop contradictory pairs instead of flagging them")

    p = sub.add_parser("validate-world", help="check coverage and disjointness of a conditional world")
    p.add_argument("input", help="world JSON file, or a database JSON file")
    p.add_argument("query", nargs="?", help="lift this query over the database first")
    _add(p, "samples", "number of sampled valuations")
    _add(p, "seed", "64-bit master seed")
    _add(p, "blowup_cap", "maximum number of conditional databases")

    p = command("check-extension", "compare lifted-world instantiation with direct evaluation")
    _add(p, "samples", "number of sampled valuations")
    _add(p, "seed", "64-bit master seed")
    _add(p, "blowup_cap", "maximum number of conditional databases")

    p = command("oracle", "reference likelihood by cell decomposition or grid quadrature")
    likelihood_opts(p, sampling=False)
    p.add_argument("--mode", choices=("auto", "cells", "grid"), default="auto")
    _add(p, "resolution", "grid cells per null")
    _add(p, "cell_limit", "maximum number of exact cells")

    p = command("eval", "evaluate a query (complete mode unless --naive)")
    p.add_argument("--naive", action="store_true", help="treat nulls as constants")
    p.add_argument("--desugar", action="store_true", help="evaluate the core-only translation")
    return parser


# -- helpers --------------------------------------------------------------------


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None


def _json_file(path: str):
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from None


def _likelihood_query(args, q):
    intervals = intervals_from_json(_json_file(args.intervals)) if args.intervals else ()
    return LikelihoodQuery(q, CMP_CHOICES[args.cmp], args.k, intervals)


def _value(x):
    if isinstance(x, float):
        return x
    return str(x) if not isinstance(x, (int, str)) else x


def _sampling_options(args) -> Dict[str, Any]:
    return {
        "gamma": args.gamma,
        "skip_bad_samples": args.skip_bad_samples,
        "trials": args.trials,
        "workers": args.threads,
    }


# -- commands ---------------------------------------------------------------------


def cmd_likelihood(args, db, q) -> Dict:
    L = _likelihood_query(args, q)
    est = like_apx(L, db, args.epsilon, args.seed, **_sampling_options(args))
    log.info("estimate %.6f from %d samples", est.value, est.gamma)
    return est.to_json()


def cmd_threshold(args, db, q) -> Dict:
    L = _likelihood_query(args, q)
    return threshold(L, args.delta, db, args.epsilon, args.seed, **_sampling_options(args)).to_json()


def _emit_query(rq, out_path) -> Dict:
    doc = {"sidecar": rq.sidecar()}
    text = rq.text()
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        sidecar_path = out_path + ".json"
        with open(sidecar_path, "w", encoding="utf-8") as fh:
            json.dump(rq.sidecar(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        doc["query_file"] = out_path
        doc["sidecar_file"] = sidecar_path
    else:
        doc["query"] = text
    return doc


def cmd_rewrite(args, db, q) -> Dict:
    L = _likelihood_query(args, q)
    rq = build_apx_query(L, db, args.epsilon, args.seed, args.gamma, args.arity_cap)
    doc = _emit_query(rq, args.out)
    if args.evaluate:
        bag = evaluate(rq.ast, db, mode="naive")
        (row,) = bag.counts
        doc["value"] = row[0]
    return doc


def cmd_compute(args, db, q) -> Dict:
    rq = build_compute_query(q, db, args.epsilon, args.seed, args.gamma, args.arity_cap)
    doc = _emit_query(rq, args.out)
    bag = evaluate(rq.ast, db, mode="naive")
    rows = sorted(bag.counts, key=lambda r: [repr(x) for x in r])
    doc["rows"] = [{"tuple": [_value(x) for x in r[:-2]], "count": r[-2], "p": r[-1]} for r in rows]
    doc["total_p"] = sum(r[-1] for r in rows)
    return doc


def cmd_lift(args, db, q) -> Dict:
    world = lift(q, world_of(db), args.blowup_cap, db.schema())
    doc = world_to_json(prune(world) if args.prune else world)
    doc["pairs_before_prune"] = len(world)
    return doc


def cmd_validate_world(args) -> Dict:
    doc = _json_file(args.input)
    if isinstance(doc, dict) and "pairs" in doc:
        if args.query:
            raise ConfigError("a query can only be lifted over a database, not over a world file")
        world = world_from_json(doc)
    else:
        db = database_from_json(doc)
        world = world_of(db)
        if args.query:
            world = lift(parse(_read(args.query)), world, args.blowup_cap, db.schema())
    return validate_world(world, args.samples, args.seed).to_json()


def cmd_check_extension(args, db, q) -> Dict:
    return check_trivial_extension(q, db, args.samples, args.seed, args.blowup_cap).to_json()


def cmd_oracle(args, db, q) -> Dict:
    L = _likelihood_query(args, q)
    return oracle_likelihood(L, db, args.mode, args.resolution, args.cell_limit).to_json()


def cmd_eval(args, db, q) -> Dict:
    bag = evaluate(q, db, mode="naive" if args.naive else "complete", desugared=args.desugar)
    return {"result": bag_to_json(bag)}


COMMANDS: Dict[str, Callable] = {
    "likelihood": cmd_likelihood,
    "threshold": cmd_threshold,
    "rewrite": cmd_rewrite,
    "compute": cmd_compute,
    "lift": cmd_lift,
    "check-extension": cmd_check_extension,
    "oracle": cmd_oracle,
    "eval": cmd_eval,
}


# output schema shipped in ``numnulls/schemas`` for each command
SCHEMA_OF = {
    "likelihood": "estimate",
    "threshold": "threshold",
    "rewrite": "rewrite",
    "compute": "compute",
    "lift": "world",
    "validate-world": "validation",
    "check-extension": "extension",
    "oracle": "oracle",
    "eval": "eval",
}


def load_schema(name: str) -> Dict:
    """The JSON schema ``name`` (a value of :data:`SCHEMA_OF`, or ``"error"``)."""
    from importlib.resources import files

    return json.loads(files("numnulls").joinpath("schemas", f"{name}.json").read_text(encoding="utf-8"))


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, BlowupLimit):
        return 3
    if isinstance(exc, (SampleError, EvalError)):
        return 2
    return 1


def run(argv: Optional[List[str]] = None, environ=None) -> int:
    environ = os.environ if environ is None else environ
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        env = _env_defaults(environ)
        for name, (_, default) in OPTIONS.items():
            if hasattr(args, name) and getattr(args, name) is None:
                setattr(args, name, env.get(name, default))
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command == "validate-world":
            doc = cmd_validate_world(args)
        else:
            db = database_from_json(_json_file(args.database))
            q = parse(_read(args.query))
            doc = COMMANDS[args.command](args, db, q)
    except NumNullsError as exc:
        code = exit_code(exc)
        print(f"numnulls: {type(exc).__name__}: {exc}", file=sys.stderr)
        print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code}},
                         sort_keys=True))
        return code
    print(json.dumps(doc, sort_keys=True))
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
