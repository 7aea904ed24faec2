"""Command line front end.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
The default output directory comes from ``$LDPRECOVER_OUTPUT`` (else
``ldprecover-out``).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import DEFAULT_CONFIG, ConfigError, load_config, parse_config
from .core import ItemDomain, load_dataset, save_dataset, synthesize_zipf, true_frequencies
from .evaluation import format_table, run_experiment, run_sweep, write_results

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("ldprecover")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _default_outdir() -> Path:
    return Path(os.environ.get("LDPRECOVER_OUTPUT", "ldprecover-out"))


def _parse_zipf(text: str) -> dict:
    out = {}
    for part in text.split(","):
        key, sep, value = part.partition("=")
        key = key.strip()
        if not sep or key not in ("d", "n", "s"):
            raise UsageError(f"--zipf: expected d=<int>,n=<int>,s=<float>, got {text!r}")
        try:
            out[key] = float(value) if key == "s" else int(value)
        except ValueError:
            raise UsageError(f"--zipf: bad value for {key}: {value!r}") from None
    missing = {"d", "n"} - set(out)
    if missing:
        raise UsageError(f"--zipf: missing {', '.join(sorted(missing))}")
    return out


def cmd_gen_data(args) -> int:
    if (args.zipf is None) == (args.source is None):
        raise UsageError("gen-data needs exactly one of --zipf or --from")
    if args.zipf is not None:
        spec = _parse_zipf(args.zipf)
        try:
            domain = ItemDomain(spec["d"])
            data = synthesize_zipf(domain, spec["n"], spec.get("s", 1.1), args.seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:
        try:
            data = load_dataset(args.source)
        except (OSError, ValueError) as exc:
            raise UsageError(str(exc)) from None

    out = Path(args.output) if args.output else _default_outdir() / "dataset.txt"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(data, out, counted=args.counted)

    f = true_frequencies(data)
    top = np.argsort(-f, kind="stable")[:5]
    print(f"wrote {out}")
    print(f"n={data.n} d={data.d}")
    for v in top:
        label = data.labels[v] if data.labels else str(v)
        print(f"  item {label:>6}  {f[v]:.4f}")
    return EXIT_OK


def _load(args):
    if args.config:
        config = load_config(args.config)
    else:
        config = parse_config(tomllib.loads(DEFAULT_CONFIG))
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    return config


def cmd_run(args) -> int:
    config = _load(args)
    if config.sweep_param is not None:
        log.info("ignoring [sweep] section; use the sweep subcommand to run the grid")
        config = replace(config, sweep_param=None, sweep_values=())
    result = run_experiment(config, jobs=args.jobs)
    outdir = Path(args.out) if args.out else _default_outdir()
    write_results(outdir, result, config)
    print(format_table(result))
    print(f"results written to {outdir}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _load(args)
    if config.sweep_param is None:
        raise ConfigError("sweep: the config declares no [sweep] grid")
    results = run_sweep(config, jobs=args.jobs)
    outdir = Path(args.out) if args.out else _default_outdir()
    write_results(outdir, results, config)
    for value, result in results.items():
        print(f"{config.sweep_param} = {value:g}")
        print(format_table(result))
    print(f"results written to {outdir}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    outdir = Path(args.dir)
    if not outdir.is_dir():
        raise UsageError(f"{outdir}: no such directory")
    freq_path, rec_path = outdir / "frequencies.csv", outdir / "recovery.json"
    missing = [p.name for p in (freq_path, rec_path) if not p.is_file()]
    if missing:
        raise UsageError(f"{outdir}: missing {', '.join(missing)} (inspect needs a 'run' output directory)")

    with freq_path.open(encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    recovery = json.loads(rec_path.read_text(encoding="utf-8"))
    rows.sort(key=lambda r: -float(r["true"]))
    print(f"{'item':>6} {'true':>10} {'poisoned':>10} {'recovered':>10}")
    for r in rows[: args.top]:
        print(f"{r['item']:>6} {float(r['true']):>10.4g} {float(r['poisoned']):>10.4g} {float(r['recovered']):>10.4g}")
    zeroed = recovery["zeroed"]
    print(f"zeroed ({len(zeroed)} items, {recovery['iterations']} iterations): {' '.join(map(str, zeroed))}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ldprecover", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="write a dataset file")
    gen.add_argument("--zipf", help="Zipf law, e.g. d=102,n=389894,s=1.1")
    gen.add_argument("--from", dest="source", help="re-export an existing dataset or CSV")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--counted", action="store_true", help="write the item,count form")
    gen.add_argument("-o", "--output", help="file to write (default: <outdir>/dataset.txt)")
    gen.set_defaults(func=cmd_gen_data)

    for name, func, text in (
        ("run", cmd_run, "run one experiment"),
        ("sweep", cmd_sweep, "run the experiment over a parameter grid"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("-c", "--config", help="TOML or JSON config (default: built-in defaults)")
        p.add_argument("-o", "--out", help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("-j", "--jobs", type=int, default=1, help="parallel trial workers")
        p.set_defaults(func=func)

    insp = sub.add_parser("inspect", help="show per-item frequencies from a run directory")
    insp.add_argument("dir")
    insp.add_argument("--top", type=int, default=10)
    insp.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
