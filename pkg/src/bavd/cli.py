"""Command-line entry point: ``bavd eval|rank|simulate|experiment|convert``.

Settings resolve in the order defaults < ``--config`` JSON < ``BAVD_*``
environment variables < command-line flags.  Exit codes: 0 success, 1 usage
error, 2 data error (unreadable or malformed input), 3 internal error,
4 metric undefined because a mask is empty.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .metrics import REPORT_COLUMNS, EmptyMaskError, GroundTruth, MetricOptions
from .pipeline import (ExperimentConfig, dump_json, load_simulation, manifest, phantom_name,
                       prepare_phantom, rank_set, run_experiment, write_simulation)
from .ranking import (SetResult, set_table_csv, summarize_experiment, summary_csv, to_csv)
from .volume import MaskError, convert_mask, load_mask

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL, EXIT_EMPTY = 0, 1, 2, 3, 4

ENV_PREFIX = "BAVD_"

DEFAULTS = {
    "seed": 1,
    "phantoms": 1,
    "dims": (128, 128, 128),
    "sets": 20,
    "errors": 10,
    "catalog": 55,
    "mode": "all",
    "units": "voxel",
    "format": "both",
    "workers": 1,
    "out": None,
}

MODE_NAMES = {"all": "all_voxels", "boundary": "boundary_only"}
UNIT_NAMES = {"voxel": "voxel", "mm": "physical"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _dims(text) -> tuple[int, int, int]:
    if isinstance(text, (list, tuple)):
        parts = list(text)
    else:
        parts = str(text).split(",")
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise UsageError(f"--dims expects X,Y,Z integers, got {text!r}") from None
    if len(dims) != 3 or min(dims) < 1:
        raise UsageError(f"--dims expects three positive integers, got {text!r}")
    return dims


_CONVERTERS = {"seed": int, "phantoms": int, "sets": int, "errors": int, "catalog": int,
               "workers": int, "dims": _dims, "mode": str, "units": str, "format": str,
               "out": str}
_CHOICES = {"mode": tuple(MODE_NAMES), "units": tuple(UNIT_NAMES), "format": ("csv", "json", "both")}


def resolve_settings(args: argparse.Namespace, environ=os.environ) -> dict:
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        # a run manifest is accepted as a config file
        if "config" in cfg and isinstance(cfg["config"], dict):
            c = cfg["config"]
            cfg = {"seed": c["seed"], "phantoms": c["phantoms"], "dims": c["dims"],
                   "sets": c["n_sets"], "errors": c["k_errors"], "catalog": c["catalog_size"],
                   "mode": {v: k for k, v in MODE_NAMES.items()}[c["point_mode"]],
                   "units": {v: k for k, v in UNIT_NAMES.items()}[c["units"]]}
        for key, value in cfg.items():
            if key not in DEFAULTS:
                raise UsageError(f"unknown config key {key!r}")
            settings[key] = value
    for key in DEFAULTS:
        env = environ.get(ENV_PREFIX + key.upper())
        if env is not None:
            settings[key] = env
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    for key, conv in _CONVERTERS.items():
        if settings[key] is None:
            continue
        try:
            settings[key] = conv(settings[key])
        except (TypeError, ValueError):
            raise UsageError(f"invalid value for {key}: {settings[key]!r}") from None
        if key in _CHOICES and settings[key] not in _CHOICES[key]:
            raise UsageError(f"{key} must be one of {_CHOICES[key]}, got {settings[key]!r}")
    for key in ("phantoms", "sets", "errors", "catalog", "workers"):
        if settings[key] < 1:
            raise UsageError(f"{key} must be positive")
    if settings["seed"] < 0:
        raise UsageError("seed must be non-negative")
    return settings


def _opts(settings) -> MetricOptions:
    return MetricOptions(MODE_NAMES[settings["mode"]], UNIT_NAMES[settings["units"]])


def _config(settings) -> ExperimentConfig:
    opts = _opts(settings)
    return ExperimentConfig(seed=settings["seed"], phantoms=settings["phantoms"],
                            dims=settings["dims"], n_sets=settings["sets"],
                            k_errors=settings["errors"], catalog_size=settings["catalog"],
                            point_mode=opts.point_mode, units=opts.units)


def _emit(settings, stem: str, csv_text: str | None, json_obj) -> None:
    fmt, out = settings["format"], settings["out"]
    if out is None:
        if fmt in ("csv", "both") and csv_text is not None:
            sys.stdout.write(csv_text)
        if fmt in ("json", "both") or csv_text is None:
            sys.stdout.write(dump_json(json_obj))
        return
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if fmt in ("csv", "both") and csv_text is not None:
        (out / f"{stem}.csv").write_text(csv_text, encoding="utf-8")
    if fmt in ("json", "both"):
        (out / f"{stem}.json").write_text(dump_json(json_obj), encoding="utf-8")


def _require(path, flag):
    if path is None:
        raise UsageError(f"{flag} is required")
    if not Path(path).exists():
        raise FileNotFoundError(f"{flag}: no such file or directory: {path}")
    return Path(path)


# ---------------------------------------------------------------- commands

def cmd_eval(args, settings) -> int:
    gt_path, seg_path = _require(args.gt, "--gt"), _require(args.seg, "--seg")
    gt, seg = load_mask(gt_path), load_mask(seg_path)
    seg_id = seg_path.stem
    try:
        report = GroundTruth(gt, _opts(settings)).evaluate(seg)
    except EmptyMaskError as exc:
        if not args.allow_empty:
            raise
        record = {"id": seg_id, "g_count": gt.foreground_count, "s_count": seg.foreground_count,
                  "undefined": str(exc)}
        row = [seg_id, gt.foreground_count, seg.foreground_count] + ["undefined"] * 6
        _emit(settings, "report", to_csv(REPORT_COLUMNS, [row]), record)
        return EXIT_OK
    _emit(settings, "report", to_csv(REPORT_COLUMNS, [report.row(seg_id)]),
          {"id": seg_id, **report.as_dict()})
    return EXIT_OK


def _header_error_count(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8")).get("error_count")
    except (OSError, json.JSONDecodeError):
        return None


def cmd_rank(args, settings) -> int:
    gt_path, seg_dir = _require(args.gt, "--gt"), _require(args.dir, "--dir")
    gt = GroundTruth(load_mask(gt_path), _opts(settings))
    names, counts, reports, skipped = [], [], [], []
    for i, path in enumerate(sorted(seg_dir.glob("*.json"))):
        try:
            reports.append(gt.evaluate(load_mask(path)))
        except (MaskError, OSError, ValueError) as exc:
            skipped.append({"file": path.name, "reason": str(exc)})
            print(f"skipped {path.name}: {exc}", file=sys.stderr)
            continue
        names.append(path.stem)
        count = _header_error_count(path)
        counts.append(int(count) if count is not None else i)
    if len(reports) < 2:
        raise MaskError(f"need at least two readable segmentations in {seg_dir}, "
                        f"got {len(reports)}")
    avd_table, bavd_table = rank_set(names, counts, reports)
    _emit(settings, "ranking", set_table_csv(avd_table, bavd_table), {
        "avd": avd_table.to_dict(),
        "bavd": bavd_table.to_dict(),
        "reports": [{"id": n, **r.as_dict()} for n, r in zip(names, reports)],
        "skipped": skipped,
    })
    if skipped:
        print(f"{len(skipped)} file(s) skipped", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args, settings) -> int:
    if settings["out"] is None:
        raise UsageError("--out is required for simulate")
    config = _config(settings)
    out = Path(settings["out"])
    phantoms = []
    for seed in config.phantom_seeds:
        sub = out if config.phantoms == 1 else out / phantom_name(seed)
        print(f"simulating {phantom_name(seed)}", file=sys.stderr)
        entry = write_simulation(prepare_phantom(seed, config), config, sub, args.gzip)
        entry["path"] = sub.relative_to(out).as_posix() if sub != out else "."
        phantoms.append(entry)
    (out / "manifest.json").write_text(dump_json(manifest("simulation", config, phantoms, out)),
                                       encoding="utf-8")
    return EXIT_OK


def _write_summary(out: Path, results: list[SetResult], fmt: str) -> None:
    summary = summarize_experiment(results)
    for group in summary.phantoms:
        d = out / group.name
        d.mkdir(parents=True, exist_ok=True)
        if fmt in ("csv", "both"):
            (d / "summary.csv").write_text(summary_csv(group), encoding="utf-8")
        if fmt in ("json", "both"):
            (d / "summary.json").write_text(dump_json(group.to_dict()), encoding="utf-8")
    rows = []
    for g in summary.phantoms + (summary.pooled,):
        rows.append([g.name, "bAVD", g.mean_tau_bavd, g.imperfect_bavd, g.p_value])
        rows.append([g.name, "AVD", g.mean_tau_avd, g.imperfect_avd, g.p_value])
    if fmt in ("csv", "both"):
        (out / "summary.csv").write_text(
            to_csv(["phantom", "metric", "mean_tau", "imperfect_count", "p_value"], rows),
            encoding="utf-8")
    if fmt in ("json", "both"):
        (out / "summary.json").write_text(dump_json(summary.to_dict()), encoding="utf-8")


def _write_set(out: Path, res: SetResult, fmt: str) -> None:
    d = out / res.phantom
    d.mkdir(parents=True, exist_ok=True)
    stem = f"set{res.set_index:02d}"
    if fmt in ("csv", "both"):
        (d / f"{stem}.csv").write_text(set_table_csv(res.avd, res.bavd), encoding="utf-8")
    if fmt in ("json", "both"):
        (d / f"{stem}.json").write_text(
            dump_json({"avd": res.avd.to_dict(), "bavd": res.bavd.to_dict()}), encoding="utf-8")


def cmd_experiment(args, settings) -> int:
    if settings["out"] is None:
        raise UsageError("--out is required for experiment")
    out = Path(settings["out"])
    out.mkdir(parents=True, exist_ok=True)
    fmt, workers = settings["format"], settings["workers"]
    results: list[SetResult] = []
    source = None
    try:
        if args.dir is not None:
            sim_root = _require(args.dir, "--dir")
            source = json.loads((sim_root / "manifest.json").read_text(encoding="utf-8"))
            config = ExperimentConfig(**{**source["config"], "dims": tuple(source["config"]["dims"]),
                                         "point_mode": _opts(settings).point_mode,
                                         "units": _opts(settings).units})
            for _, _, res in load_simulation(sim_root, config.metric_options, workers):
                results.append(res)
                _write_set(out, res, fmt)
        else:
            config = _config(settings)

            def on_set(run, sim, res):
                results.append(res)
                _write_set(out, res, fmt)
                print(f"{res.phantom} set{res.set_index:02d}: tau avd={res.avd.tau:.4f} "
                      f"bavd={res.bavd.tau:.4f}", file=sys.stderr)

            run_experiment(config, workers, on_set)
    finally:
        if results:
            _write_summary(out, results, fmt)
    phantoms = []
    for res in results:
        if not phantoms or phantoms[-1]["id"] != res.phantom:
            phantoms.append({"id": res.phantom, "sets": []})
        phantoms[-1]["sets"].append(res.set_index)
    man = manifest("experiment", config, phantoms, out)
    if source is not None:
        man["source"] = {"dir": Path(args.dir).name, "config": source["config"]}
    (out / "manifest.json").write_text(dump_json(man), encoding="utf-8")
    return EXIT_OK


def cmd_convert(args, settings) -> int:
    src = _require(args.src, "src")
    if args.dst is None:
        raise UsageError("convert needs a destination header path")
    convert_mask(src, Path(args.dst), compress=args.to == "gzip")
    return EXIT_OK


# -------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bavd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON config file (or a run manifest)")
        p.add_argument("--out", help="output directory (default: stdout where possible)")
        p.add_argument("--format", choices=_CHOICES["format"])
        p.add_argument("--mode", choices=_CHOICES["mode"], help="point sets: all voxels or boundary")
        p.add_argument("--units", choices=_CHOICES["units"], help="voxel units or mm via spacing")
        p.add_argument("--workers", type=int)

    def sim_flags(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--phantoms", type=int, help="phantom seeds are SEED..SEED+N-1")
        p.add_argument("--dims", type=_dims, help="X,Y,Z")
        p.add_argument("--sets", type=int)
        p.add_argument("--errors", type=int, help="errors per set (members = errors + 1)")
        p.add_argument("--catalog", type=int, help="error catalog size")

    p = sub.add_parser("eval", help="all metrics for one ground truth / segmentation pair")
    common(p)
    p.add_argument("--gt")
    p.add_argument("--seg")
    p.add_argument("--allow-empty", action="store_true",
                   help="report an 'undefined' record instead of failing on empty masks")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rank", help="rank every mask in a directory by AVD and bAVD")
    common(p)
    p.add_argument("--gt")
    p.add_argument("--dir")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("simulate", help="write a phantom, its error catalog and simulation sets")
    common(p)
    sim_flags(p)
    p.add_argument("--gzip", action="store_true", help="gzip mask payloads")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="simulate (or read --dir), evaluate, rank, summarize")
    common(p)
    sim_flags(p)
    p.add_argument("--dir", help="existing simulation directory to evaluate")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("convert", help="rewrite a mask with a raw or gzip payload")
    p.add_argument("src")
    p.add_argument("dst")
    p.add_argument("--to", choices=("raw", "gzip"), default="gzip")
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        settings = resolve_settings(args)
        return args.func(args, settings)
    except UsageError as exc:
        print(f"bavd: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EmptyMaskError as exc:
        print(f"bavd: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except (MaskError, OSError) as exc:
        print(f"bavd: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"bavd: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
