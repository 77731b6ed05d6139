"""Experiment runner CLI: load a config, run, write metrics.

Outputs per run: a CSV (one row per round, RFC-4180 quoting for the
selected-set field) and a JSON manifest echoing the config together with a
deterministic build id. Re-running the same config produces byte-identical
CSVs; `FEEL_SEED` in the environment overrides the config seed.
"""

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import ConfigError, config_to_dict, load_config
from .protocol import run_experiment

__all__ = ["emit_metrics", "sweep", "main", "CSV_HEADER"]

logger = logging.getLogger(__name__)

CSV_HEADER = ["round", "selected", "acc", "loss", "dl_bits_total",
              "ul_bits_total", "q_dl_min", "q_dl_max", "q_ul_min", "q_ul_max"]


def _build_id(config) -> str:
    canon = json.dumps(config_to_dict(config), sort_keys=True).encode()
    return f"feelsim-{__version__}+cfg.{hashlib.sha1(canon).hexdigest()[:12]}"


def _qrange(qmap: dict):
    if not qmap:
        return 0, 0
    values = list(qmap.values())
    return min(values), max(values)


def emit_metrics(reports, path, config=None, wall_time=0.0):
    """Write the per-round CSV plus a JSON manifest next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER)
        for rep in reports:
            q_dl_min, q_dl_max = _qrange(rep.dl_q)
            q_ul_min, q_ul_max = _qrange(rep.ul_q)
            writer.writerow([
                rep.round,
                ",".join(str(k) for k in rep.selected),
                repr(rep.accuracy),
                repr(rep.loss),
                repr(rep.dl_bits_total),
                repr(rep.ul_bits_total),
                q_dl_min, q_dl_max, q_ul_min, q_ul_max,
            ])
    manifest = {
        "config": config_to_dict(config) if config is not None else None,
        "seed": config.seed if config is not None else None,
        "build_id": _build_id(config) if config is not None else None,
        "rounds_written": len(reports),
        "wall_time_s": wall_time,
    }
    manifest_path = path.with_suffix(".manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    return [path, manifest_path]


def _run_one(config, csv_path):
    start = time.monotonic()
    reports = run_experiment(config)
    return emit_metrics(reports, csv_path, config, time.monotonic() - start)


def sweep(config, k_values, out_dir):
    """Run the experiment once per K with a shared master seed.

    Channel streams are keyed by iteration, so every K sees the same fading
    realizations. Returns the list of CSV paths written.
    """
    out_dir = Path(out_dir)
    if not k_values:
        logger.warning("empty K list: nothing to run")
        return []
    for k in k_values:
        if not 1 <= k <= config.devices:
            raise ConfigError(f"sweep K={k} outside [1, devices={config.devices}]")
    written = []
    for k in k_values:
        cfg_k = replace(config, selected=k)
        tag = f"K{k}_baseline" if config.baseline else f"K{k}"
        paths = _run_one(cfg_k, out_dir / f"metrics_{tag}.csv")
        written.append(paths[0])
        logger.info("wrote %s", paths[0])
    return written


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="feelsim",
        description="Federated edge learning simulator over parallel fading channels")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run one experiment or a K sweep")
    run_p.add_argument("--config", required=True, help="JSON experiment config")
    run_p.add_argument("--out", default=None,
                       help="output directory (default: config output_dir)")
    run_p.add_argument("--sweep-k", default=None,
                       help="comma-separated K values, one run per value")
    run_p.add_argument("--baseline", action="store_true",
                       help="full participation with one common broadcast rate "
                            "set by the worst device's capacity")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        config = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if "FEEL_SEED" in os.environ:
        config = replace(config, seed=int(os.environ["FEEL_SEED"]))
        logger.info("seed overridden by FEEL_SEED=%d", config.seed)
    if args.baseline:
        config = replace(config, baseline=True, selected=config.devices)
    out_dir = Path(args.out) if args.out else Path(config.output_dir)

    try:
        if args.sweep_k is not None:
            ks = [int(tok) for tok in args.sweep_k.split(",") if tok.strip()]
            sweep(config, ks, out_dir)
        else:
            tag = "baseline" if config.baseline else f"K{config.selected}"
            paths = _run_one(config, out_dir / f"metrics_{tag}.csv")
            logger.info("wrote %s", paths[0])
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
