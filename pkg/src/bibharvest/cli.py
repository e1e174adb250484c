"""Command-line interface.

Subcommands: ``run`` (execute or resume a harvest), ``sweep`` (growth
traces across keyword counts), ``compare`` (pairwise proximity matrix),
``consistency`` (single-corpus consistency), ``synth-gen`` (materialize a
synthetic catalog).  Progress goes to stderr, data to files or stdout.

Exit codes: 0 success, 1 usage error, 2 backend failure, 3 corrupt state.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import catalog, engine, metrics, plotting
from .risio import Corpus, dedup_key, merge, write_ris

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BACKEND = 2
EXIT_CORRUPT = 3

logger = logging.getLogger("bibharvest")


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the CLI contract wants 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _print_record(rec: engine.IterationRecord) -> None:
    print(
        f"n={rec.n} r_size={rec.r_size} added={rec.added} c_size={rec.c_size} "
        f"n_keywords={rec.n_keywords} warnings={len(rec.warnings)}",
        file=sys.stderr,
    )
    for warning in rec.warnings:
        print(f"  warning: {warning}", file=sys.stderr)


def cmd_run(args) -> int:
    state_dir = Path(args.state_dir)
    if args.resume:
        try:
            state = engine.load(state_dir)
        except engine.CorruptState as exc:
            return _fail(EXIT_CORRUPT, f"cannot resume: {exc}")
        if state.status != engine.RUNNING:
            print(f"run already finished ({state.status}); nothing to do", file=sys.stderr)
            return EXIT_OK
        config = state.config
    else:
        if not args.config:
            return _fail(EXIT_USAGE, "--config is required unless --resume is given")
        try:
            config = engine.config_from_json(args.config)
        except (OSError, ValueError, json.JSONDecodeError) as exc:
            return _fail(EXIT_USAGE, f"bad config {args.config}: {exc}")
        state = engine.new_state(config)

    try:
        backend = catalog.make_backend(config.backend)
    except (KeyError, ValueError) as exc:
        return _fail(EXIT_USAGE, f"bad backend config: {exc}")

    def checkpoint(rec: engine.IterationRecord) -> None:
        _print_record(rec)

    try:
        while state.status == engine.RUNNING:
            state = engine.step(state, backend)
            checkpoint(state.trace[-1])
            engine.persist(state, state_dir)
    except catalog.BackendUnavailable as exc:
        engine.persist(state, state_dir)
        return _fail(EXIT_BACKEND, f"backend failure (state saved for --resume): {exc}")
    except catalog.AuthMissing as exc:
        return _fail(EXIT_BACKEND, str(exc))

    engine.persist(state, state_dir)
    print(f"{state.status}: {len(state.corpus)} references after {len(state.trace)} iterations", file=sys.stderr)
    if args.plot:
        plotting.plot_trace(state.trace, args.plot)
        print(f"trace plot written to {args.plot}", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        base = engine.config_from_json(args.config)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        return _fail(EXIT_USAGE, f"bad config {args.config}: {exc}")
    try:
        n_k_values = [int(v) for v in args.nk.split(",") if v.strip()]
    except ValueError:
        return _fail(EXIT_USAGE, f"--nk must be a comma-separated list of integers: {args.nk!r}")
    if not n_k_values or any(v < 1 for v in n_k_values):
        return _fail(EXIT_USAGE, "--nk needs at least one integer >= 1")
    try:
        backend = catalog.make_backend(base.backend)
    except (KeyError, ValueError) as exc:
        return _fail(EXIT_USAGE, f"bad backend config: {exc}")
    except catalog.AuthMissing as exc:
        return _fail(EXIT_BACKEND, str(exc))

    result = metrics.sensitivity_sweep(base, n_k_values, backend)
    Path(args.out).write_text(metrics.sweep_csv(result), encoding="utf-8")
    for n_k in result.n_k_values:
        state = result.states[n_k]
        print(
            f"n_k={n_k}: {state.status} with {result.summary[n_k]} references "
            f"in {len(result.traces[n_k])} iterations",
            file=sys.stderr,
        )
    if args.plot:
        plotting.plot_sweep(result, args.plot)
        print(f"sweep plot written to {args.plot}", file=sys.stderr)
    return EXIT_OK


def cmd_compare(args) -> int:
    dirs = [d for d in args.states.split(",") if d.strip()]
    if len(dirs) < 2:
        return _fail(EXIT_USAGE, "--states needs at least 2 state directories")
    runs = []
    labels = []
    for d in dirs:
        try:
            runs.append(engine.load(d))
        except engine.CorruptState as exc:
            return _fail(EXIT_CORRUPT, f"cannot load {d}: {exc}")
        labels.append(Path(d).name)
    try:
        matrix = metrics.proximity_matrix(runs, labels)
    except metrics.EmptyKeywords as exc:
        return _fail(EXIT_USAGE, str(exc))
    Path(args.out).write_text(metrics.proximity_csv(matrix), encoding="utf-8")
    print(f"proximity matrix for {len(runs)} runs written to {args.out}", file=sys.stderr)
    if args.plot:
        plotting.plot_proximity(matrix, args.plot)
        print(f"proximity plot written to {args.plot}", file=sys.stderr)
    return EXIT_OK


def cmd_consistency(args) -> int:
    try:
        state = engine.load(args.state)
    except engine.CorruptState as exc:
        return _fail(EXIT_CORRUPT, f"cannot load {args.state}: {exc}")
    try:
        value = metrics.consistency(state.corpus, state.keywords)
    except metrics.TooFewKeywords as exc:
        return _fail(EXIT_USAGE, str(exc))
    print(f"{value:.6f}")
    return EXIT_OK


def cmd_synth_gen(args) -> int:
    try:
        with open(args.spec, encoding="utf-8") as fh:
            spec = catalog.SyntheticCatalogSpec(**json.load(fh))
    except (OSError, TypeError, ValueError, json.JSONDecodeError) as exc:
        return _fail(EXIT_USAGE, f"bad synthetic spec {args.spec}: {exc}")
    cat = catalog.generate_synthetic(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus, _ = merge(Corpus.empty(), cat.references, 1)
    (out / "catalog.ris").write_text(write_ris(corpus), encoding="utf-8")
    index = {
        "spec": asdict(spec),
        "phrases": {
            phrase: sorted(
                str(dedup_key(ref))
                for ref in cat.references
                if phrase in ref.keywords
            )
            for phrase in cat.phrase_strings()
        },
    }
    (out / "index.json").write_text(
        json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"materialized {len(cat.references)} references into {out}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bibharvest", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p_run = sub.add_parser("run", help="execute or resume a harvest run")
    p_run.add_argument("--config", help="run config JSON file")
    p_run.add_argument("--state-dir", required=True, help="directory for persisted state")
    p_run.add_argument("--resume", action="store_true", help="continue from the state directory")
    p_run.add_argument("--plot", help="also render the growth trace to this image file")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run once per keyword-count value")
    p_sweep.add_argument("--config", required=True, help="base run config JSON file")
    p_sweep.add_argument("--nk", required=True, help="comma-separated keyword counts, e.g. 2,5,10,20,30")
    p_sweep.add_argument("--out", required=True, help="long-format CSV output (n_k,n,c_size)")
    p_sweep.add_argument("--plot", help="also render the growth curves to this image file")
    p_sweep.set_defaults(func=cmd_sweep)

    p_cmp = sub.add_parser("compare", help="pairwise proximity matrix of finished runs")
    p_cmp.add_argument("--states", required=True, help="comma-separated state directories")
    p_cmp.add_argument("--out", required=True, help="CSV output for the matrix")
    p_cmp.add_argument("--plot", help="also render the matrix heatmap to this image file")
    p_cmp.set_defaults(func=cmd_compare)

    p_cons = sub.add_parser("consistency", help="print the lexical consistency of a run")
    p_cons.add_argument("--state", required=True, help="state directory")
    p_cons.set_defaults(func=cmd_consistency)

    p_gen = sub.add_parser("synth-gen", help="materialize a synthetic catalog")
    p_gen.add_argument("--spec", required=True, help="synthetic catalog spec JSON file")
    p_gen.add_argument("--out", required=True, help="output directory (catalog.ris + index.json)")
    p_gen.set_defaults(func=cmd_synth_gen)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
