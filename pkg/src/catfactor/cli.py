"""Command-line entry point: ``catfactor <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Optional, Sequence

from . import __version__
from .classifier import evaluate, feature_rows, load_model, predict_proba, save_model, train
from .dataset import MISSING_POLICIES, load_csv, write_csv
from .partitions import bell_number, format_partition
from .scoring import bayes_factor_two_binary
from .search import SearchConfig, rank_partitions, search
from .synth import generate, load_spec


def _non_negative_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative: {text!r}")
    return v


def _positive_int(text: str) -> int:
    v = _non_negative_int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _search_cfg(args) -> SearchConfig:
    return SearchConfig(mode=args.mode, exhaustive_cap=args.cap, parallelism=args.jobs)


def _emit(text: str, dest: Optional[str], out) -> None:
    if dest is None or dest == "-":
        out.write(text)
    else:
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def cmd_factor(args, out) -> None:
    d = load_csv(args.csv, header=not args.no_header, missing_policy=args.missing)
    if args.label is not None:
        li = d.column_index(args.label)
        d = d.select([j for j in range(d.n_vars) if j != li])
    cfg = _search_cfg(args)
    use_greedy = cfg.mode == "greedy" or (cfg.mode == "auto" and d.n_vars > cfg.exhaustive_cap)
    if use_greedy:
        results = [search(d, SearchConfig(mode="greedy", parallelism=cfg.parallelism))]
        method = "greedy"
    else:
        results = rank_partitions(d, cfg, top=args.top)
        method = "exhaustive"

    rows = []
    for rank, sp in enumerate(results, 1):
        item = {
            "rank": rank,
            "partition": format_partition(sp.partition, d.names),
            "assignment": list(sp.partition.assignment),
            "n_blocks": sp.partition.n_blocks,
            "log_score": sp.comparable_log_score,
        }
        if args.full:
            item["full_log_marginal"] = sp.full_log_marginal
        rows.append(item)

    if args.format == "json":
        report = {
            "variables": d.names,
            "n_rows": d.sample_count,
            "search": method,
            "results": rows,
        }
        out.write(json.dumps(report, indent=2) + "\n")
        return
    out.write(f"# {d.sample_count} rows, {d.n_vars} variables, {method} search\n")
    for item in rows:
        line = f"{item['rank']}\t{item['log_score']!r}"
        if args.full:
            line += f"\t{item['full_log_marginal']!r}"
        out.write(line + f"\t{item['partition']}\n")


def cmd_bf2(args, out) -> None:
    k = bayes_factor_two_binary(args.n1, args.n2, args.n3, args.n4)
    if k > 1:
        verdict = "favors independence"
    elif k < 1:
        verdict = "favors dependence"
    else:
        verdict = "inconclusive (K=1)"
    if args.format == "json":
        out.write(json.dumps({"K": k, "verdict": verdict}) + "\n")
    else:
        out.write(f"K = {k!r}\n{verdict}\n")


def cmd_train(args, out) -> None:
    d = load_csv(args.csv, header=not args.no_header, label_column=args.label,
                 missing_policy=args.missing)
    mode = args.partition_mode.replace("-", "_")
    m = train(d, args.label, _search_cfg(args), mode=mode)
    save_model(m, args.output)
    names = m.feature_names
    for y, cat in enumerate(m.label_schema.categories):
        if mode == "shared" and y > 0:
            break
        tag = "all classes" if mode == "shared" else f"class {cat}"
        out.write(f"{tag}: {format_partition(m.partition_for(y), names)}\n")


def _read_for_model(args, m):
    schemas = list(m.feature_schemas) + [m.label_schema]
    return load_csv(args.csv, header=True, missing_policy=args.missing,
                    schemas=schemas, unknown_policy=args.unknown)


def cmd_predict(args, out) -> None:
    m = load_model(args.model)
    schemas = list(m.feature_schemas)
    d = load_csv(args.csv, header=True, missing_policy=args.missing,
                 schemas=schemas, unknown_policy=args.unknown)
    post = predict_proba(m, feature_rows(m, d))
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    classes = m.label_schema.categories
    writer.writerow(["predicted"] + [f"p({c})" for c in classes])
    for p in post:
        writer.writerow([classes[int(p.argmax())]] + [repr(float(v)) for v in p])
    _emit(buf.getvalue(), args.output, out)


def cmd_evaluate(args, out) -> None:
    m = load_model(args.model)
    d = _read_for_model(args, m)
    res = evaluate(m, d)
    if args.format == "json":
        out.write(json.dumps(res) + "\n")
        return
    out.write(f"accuracy\t{res['accuracy']!r}\n")
    out.write(f"log_loss\t{res['log_loss']!r}\n")
    classes = m.label_schema.categories
    out.write("confusion (rows=true, cols=predicted)\n")
    out.write("\t" + "\t".join(classes) + "\n")
    for c, row in zip(classes, res["confusion"]):
        out.write(c + "\t" + "\t".join(str(v) for v in row) + "\n")


def cmd_generate(args, out) -> None:
    spec = load_spec(args.spec)
    d = generate(spec, args.n, seed=args.seed)
    _emit(write_csv(d), args.output, out)


def cmd_bell(args, out) -> None:
    out.write(f"{bell_number(args.n)}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="catfactor",
        description="Factor categorical data by Dirichlet-multinomial marginal likelihood.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def search_flags(p):
        p.add_argument("--mode", choices=("exhaustive", "greedy", "auto"), default="auto")
        p.add_argument("--cap", type=_positive_int, default=12,
                       help="largest variable count searched exhaustively")
        p.add_argument("--jobs", type=_positive_int, default=1,
                       help="worker threads for block scoring (does not change results)")

    def data_flags(p, header_flag=True):
        p.add_argument("--missing", choices=MISSING_POLICIES, default="error")
        if header_flag:
            p.add_argument("--no-header", action="store_true",
                           help="first record is data; columns are named X1..XN")

    p = sub.add_parser("factor", help="rank factorizations of a CSV's columns")
    p.add_argument("csv")
    search_flags(p)
    data_flags(p)
    p.add_argument("--top", type=_positive_int, default=10)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--full", action="store_true",
                   help="also report the log marginal likelihood with the multinomial coefficient")
    p.add_argument("--label", help="column to leave out of the factorization")
    p.set_defaults(func=cmd_factor)

    p = sub.add_parser("bf2", help="Bayes factor for a 2x2 table of counts")
    for name in ("n1", "n2", "n3", "n4"):
        p.add_argument(name, type=_non_negative_int)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_bf2)

    p = sub.add_parser("train", help="train a factored Bayes classifier")
    p.add_argument("csv")
    p.add_argument("--label", required=True)
    p.add_argument("-o", "--output", required=True, help="model JSON path")
    p.add_argument("--partition-mode", choices=("shared", "per-class"), default="shared")
    search_flags(p)
    data_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="per-row class posteriors")
    p.add_argument("model")
    p.add_argument("csv")
    p.add_argument("-o", "--output", help="output CSV (default stdout)")
    p.add_argument("--unknown", choices=("error", "missing"), default="error",
                   help="unseen categories: fail, or map to the missing category")
    data_flags(p, header_flag=False)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="accuracy, log-loss and confusion matrix")
    p.add_argument("model")
    p.add_argument("csv")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--unknown", choices=("error", "missing"), default="error")
    data_flags(p, header_flag=False)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("generate", help="sample a CSV from a generator spec")
    p.add_argument("spec")
    p.add_argument("-n", type=_non_negative_int, required=True, help="number of rows")
    p.add_argument("--seed", type=int, help="overrides the spec's seed")
    p.add_argument("-o", "--output", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bell", help="print the Bell number B(n)")
    p.add_argument("n", type=_non_negative_int)
    p.set_defaults(func=cmd_bell)
    return parser


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out if out is not None else sys.stdout
    args = build_parser().parse_args(argv)
    try:
        args.func(args, out)
    except (ValueError, OSError) as exc:
        print(f"catfactor {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
