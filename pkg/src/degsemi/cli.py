"""Command line: ``degsemi run <config>`` and ``degsemi list``.

Configs are YAML maps with keys ``experiment``, ``parameters``, and
optionally ``output`` and ``plot``. Run ``degsemi list`` for the
parameters of each experiment. Exit codes: 0 when every assertion passes,
1 when one fails, 2 for an invalid config.
"""

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import yaml

from . import __version__
from .errors import ConfigInvalid, DegsemiError, ExperimentFailed
from .io import emit_svg_plot, write_trace_csv
from .parallel import set_threads
from .runners import RUNNERS, SCHEMA, validate

OUT_ENV = "DEGSEMI_OUT"


def load_config(path):
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigInvalid(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"{path} is not valid YAML: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigInvalid("config must be a map")
    extra = set(cfg) - {"experiment", "parameters", "output", "plot"}
    if extra:
        raise ConfigInvalid(f"unknown top-level keys: {sorted(extra)}")
    if "experiment" not in cfg:
        raise ConfigInvalid("missing 'experiment'")
    cfg.setdefault("parameters", {})
    cfg.setdefault("plot", False)
    if not isinstance(cfg["plot"], bool):
        raise ConfigInvalid("plot must be true or false")
    return cfg


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def run(config_path, out=None, plot=None, seed=None, threads=None):
    """Run one config; returns ``(exit_code, manifest)``.

    Raises :class:`ConfigInvalid` for bad configs. Failing assertions do not
    raise; they set exit code 1 and are listed in the manifest.
    """
    cfg = load_config(config_path)
    kind = cfg["experiment"]
    params = dict(cfg["parameters"] or {})
    if seed is not None:
        if not any(k.name == "seed" for k in SCHEMA.get(kind, [])):
            raise ConfigInvalid(f"{kind} takes no seed")
        params["seed"] = int(seed)
    checked = validate(kind, params)
    out_dir = out or os.environ.get(OUT_ENV) or cfg.get("output")
    if not out_dir:
        raise ConfigInvalid("no output directory (use --out, DEGSEMI_OUT or 'output')")
    if threads is not None:
        set_threads(threads)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    start = time.perf_counter()
    result = RUNNERS[kind](checked)
    wall = time.perf_counter() - start

    artifacts = []
    for name, trace in result.traces.items():
        write_trace_csv(trace, out_dir / f"{name}.csv")
        artifacts.append(f"{name}.csv")
        if plot if plot is not None else cfg["plot"]:
            emit_svg_plot(trace, out_dir / f"{name}.svg", title=f"{kind}: {name}")
            artifacts.append(f"{name}.svg")
    for name, table in result.tables.items():
        table.to_csv(out_dir / f"{name}.csv")
        artifacts.append(f"{name}.csv")

    failed = [c for c in result.checks if not c["passed"]]
    manifest = {
        "experiment": kind,
        "config_hash": config_hash({"experiment": kind, "parameters": params}),
        "version": __version__,
        "wall_clock_seconds": round(wall, 3),
        "checks": result.checks,
        "artifacts": artifacts,
        "passed": not failed,
        "first_failure": failed[0]["name"] if failed else None,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return (0 if not failed else 1), manifest


def list_experiments():
    lines = []
    for kind in sorted(SCHEMA):
        lines.append(kind)
        for k in SCHEMA[kind]:
            tag = "required" if k.required else f"default {k.default!r}"
            lines.append(f"  {k.name:<16} {tag:<28} {k.doc}")
    return "\n".join(lines)


def build_parser():
    p = argparse.ArgumentParser(prog="degsemi", description="Convergence experiments for degenerate semigroups.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("config")
    r.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and the config)")
    r.add_argument("--plot", action="store_true", default=None, help="also write SVG plots")
    r.add_argument("--threads", type=int, help="worker threads for experiment sweeps")
    r.add_argument("--seed", type=int, help="override the config seed")
    sub.add_parser("list", help="list experiment kinds and their parameters")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "list":
        print(list_experiments())
        return 0
    try:
        code, manifest = run(args.config, out=args.out, plot=args.plot, seed=args.seed, threads=args.threads)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ExperimentFailed as exc:
        print(f"experiment failed: {exc}", file=sys.stderr)
        return 1
    except DegsemiError as exc:
        print(f"experiment failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for c in manifest["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}")
    if code:
        print(f"first failing assertion: {manifest['first_failure']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
