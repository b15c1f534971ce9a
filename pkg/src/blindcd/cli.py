"""Command line entry point: ``generate``, ``run``, ``theory`` and ``presets``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .errors import ConfigError
from .excitation import gen_signals, gen_sketch, save_batch, save_csv, write_matrix

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_source(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="experiment config JSON")
    src.add_argument("--preset", choices=sorted(harness.PRESET_CONFIGS), help="named experiment preset")
    p.add_argument("--seed", type=int, help="run this single seed instead of the configured list")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="blindcd", description="Blind community detection from graph signals.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a graph, its labels, the sketch and a signal batch")
    _add_source(g)
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--format", choices=("binary", "csv"), default="binary")

    r = sub.add_parser("run", help="run a config and write the results CSV")
    _add_source(r)
    r.add_argument("--out", help="CSV path (stdout when omitted)")
    r.add_argument("--jobs", type=int, default=1, help="worker processes")
    r.add_argument("--include-runtime", action="store_true", help="add the wall-clock runtime column")

    t = sub.add_parser("theory", help="theory report JSON for one instance")
    _add_source(t)
    t.add_argument("--out", help="JSON path (stdout when omitted)")

    p = sub.add_parser("presets", help="list named presets or print one as JSON")
    p.add_argument("--show", choices=sorted(harness.PRESET_CONFIGS))
    return ap


def _load(args) -> harness.ExperimentConfig:
    if args.config:
        cfg = harness.ExperimentConfig.load(args.config)
        d, base = cfg.to_dict(), cfg.base_dir
    else:
        d, base = harness.preset_dict(args.preset), "."
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        d["seeds"] = [args.seed]
    return harness.ExperimentConfig.from_dict(d, base)


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _generate(cfg: harness.ExperimentConfig, out: Path, fmt: str):
    if cfg.scenario not in ("diffusion", "edgelist"):
        raise ConfigError("generate supports the diffusion and edgelist scenarios")
    from .graph import eig_laplacian

    seed, point = cfg.seeds[0], cfg.sweep_points()[0]
    graph, truth = harness._build_graph(cfg, seed)
    eig = eig_laplacian(graph)
    exc = cfg.excitation
    sketch = gen_sketch(exc["mode"], graph.n, point["r"], harness._sub_seed(seed, 1, point["r"]))
    batch = gen_signals(graph, harness._filter_for(cfg, point), sketch, point["n_samples"],
                        cfg.sigma_w2, cfg.latent, harness._sub_seed(seed, 2, 0), eig=eig)
    out.mkdir(parents=True, exist_ok=True)
    (out / "graph.json").write_text(graph.to_json())
    (out / "labels.txt").write_text("".join(f"{c}\n" for c in truth.labels))
    if fmt == "binary":
        with open(out / "sketch.bcdm", "wb") as fh:
            write_matrix(fh, sketch.b)
        save_batch(out / "signals.bcdm", batch)
    else:
        save_csv(out / "sketch.csv", sketch.b)
        save_csv(out / "y.csv", batch.y)
        save_csv(out / "z.csv", batch.z)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        if args.command == "presets":
            if args.show:
                print(json.dumps(harness.preset_dict(args.show), indent=2))
            else:
                for name in sorted(harness.PRESET_CONFIGS):
                    print(name)
            return EXIT_OK
        cfg = _load(args)
        if args.command == "run":
            if args.jobs < 1:
                raise ConfigError("--jobs must be >= 1")
            rows = harness.run_experiment(cfg, jobs=args.jobs)
            _emit(harness.write_csv(rows, include_runtime=args.include_runtime), args.out)
        elif args.command == "theory":
            _emit(json.dumps(harness.theory_instance(cfg), indent=2, default=float) + "\n", args.out)
        else:
            _generate(cfg, Path(args.out), args.format)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
