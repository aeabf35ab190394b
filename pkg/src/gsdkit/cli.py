"""Command-line interface.

Subcommands map one-to-one onto library operations: calibrate, estimate,
evaluate, area, sweep, serve, and gen (synthetic scenes). Results go to
stdout, logs to stderr; exit codes are 0 on success, 1 on operational
errors, 2 on usage errors. The VANGUARD_CALIBRATION environment variable
supplies the default calibration path.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import (
    EvalRecord,
    SyntheticScene,
    ablation_sweep,
    evaluate,
    format_report,
    generate_scene,
    record_to_json,
    sample_vehicle_lengths,
    sweep_to_csv,
)
from .estimator import (
    EstimatorConfig,
    calibrate_lref,
    estimate_gsd,
    parse_calibration,
    save_calibration,
)
from .ingest import (
    DetectionSchemaError,
    canonical_dumps,
    parse_dota_annotation,
    parse_gsd_meta,
    read_detection_json,
    write_detection_json,
)
from .measurement import parse_pixel_counts
from .server import make_server
from .toolapi import ToolError, handle_area, handle_estimate

CALIBRATION_ENV = "VANGUARD_CALIBRATION"


class OperationalError(Exception):
    pass


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OperationalError(f"cannot read {path}: {exc}") from exc


def _load_l_ref(args) -> float:
    """Resolve l_ref: --l-ref flag, --calibration file, or the env variable."""
    if getattr(args, "l_ref", None) is not None:
        return args.l_ref
    path = getattr(args, "calibration", None) or os.environ.get(CALIBRATION_ENV)
    if not path:
        raise OperationalError(
            "no calibration: pass --l-ref or --calibration, "
            f"or set {CALIBRATION_ENV}")
    try:
        return parse_calibration(_read_text(path))["l_ref"]
    except (ValueError, json.JSONDecodeError) as exc:
        raise OperationalError(f"bad calibration file {path}: {exc}") from exc


def _parse_alpha(text: str) -> float | None:
    if text.lower() in ("none", "off"):
        return None
    return float(text)


# Distinguishes "--alpha none" (disable the filter) from an absent flag.
_UNSET = object()


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--calibration", help="calibration JSON path")
    parser.add_argument("--l-ref", type=float, help="reference length in metres")
    parser.add_argument("--min-conf", type=float, default=None)
    parser.add_argument("--alpha", type=_parse_alpha, default=_UNSET,
                        help="outlier factor, or 'none' to disable")
    parser.add_argument("--fallback-n", type=int, default=None)
    parser.add_argument("--weighted-kde", action="store_true")
    parser.add_argument("--gsd-max", type=float, default=None)
    parser.add_argument("--aggregation", choices=("kde", "median", "mean"),
                        default=None)
    parser.add_argument("--bandwidth", type=float, default=None)


def _build_config(args) -> EstimatorConfig:
    config = EstimatorConfig(l_ref=_load_l_ref(args))
    overrides = {}
    for flag, key in (("min_conf", "min_conf"), ("fallback_n", "fallback_n"),
                      ("gsd_max", "gsd_max"), ("aggregation", "aggregation"),
                      ("bandwidth", "bandwidth")):
        value = getattr(args, flag)
        if value is not None:
            overrides[key] = value
    if args.alpha is not _UNSET:
        overrides["alpha"] = args.alpha
    if args.weighted_kde:
        overrides["weighted_kde"] = True
    return config.with_overrides(**overrides) if overrides else config


def _load_dataset(detections_dir: str, meta_dir: str | None):
    """Pair detection JSON files with their GSD metadata by image id."""
    det_dir = Path(detections_dir)
    if not det_dir.is_dir():
        raise OperationalError(f"not a directory: {detections_dir}")
    dataset = []
    for path in sorted(det_dir.glob("*.json")):
        try:
            det_set = read_detection_json(_read_text(str(path)))
        except DetectionSchemaError as exc:
            raise OperationalError(f"{path}: {exc}") from exc
        meta = None
        if meta_dir is not None:
            meta_path = Path(meta_dir) / f"{det_set.image_id}.txt"
            if meta_path.exists():
                meta = parse_gsd_meta(_read_text(str(meta_path)),
                                      image_id=det_set.image_id)
        dataset.append((det_set, meta))
    if not dataset:
        raise OperationalError(f"no detection files in {detections_dir}")
    return dataset


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_calibrate(args) -> int:
    ann_dir = Path(args.annotations)
    if not ann_dir.is_dir():
        raise OperationalError(f"not a directory: {args.annotations}")
    pairs = []
    n_missing_meta = 0
    for path in sorted(ann_dir.glob("*.txt")):
        image_id = path.stem
        det_set = parse_dota_annotation(_read_text(str(path)), args.category,
                                        image_id=image_id)
        meta_path = Path(args.meta) / f"{image_id}.txt"
        if not meta_path.exists():
            n_missing_meta += 1
            continue
        meta = parse_gsd_meta(_read_text(str(meta_path)), image_id=image_id)
        pairs.append((det_set, meta))
    if n_missing_meta:
        _log(f"skipped {n_missing_meta} annotation files without metadata")
    try:
        calibration = calibrate_lref(pairs)
    except ValueError as exc:
        raise OperationalError(str(exc)) from exc
    document = save_calibration(calibration)
    if args.out:
        Path(args.out).write_text(document, encoding="utf-8")
        _log(f"calibration written to {args.out} "
             f"(l_ref={calibration.l_ref:.4f} m, n={calibration.n_instances})")
    else:
        sys.stdout.write(document)
    return 0


def _cmd_estimate(args) -> int:
    config = _build_config(args)
    if args.detections:
        try:
            response = handle_estimate(
                {"detections_path": args.detections}, config.l_ref, config)
        except ToolError as exc:
            raise OperationalError(str(exc)) from exc
        sys.stdout.write(canonical_dumps(response))
        return 0

    dataset = _load_dataset(args.detections_dir, None)
    lines = []
    for det_set, _ in dataset:
        estimate = estimate_gsd(det_set, config)
        lines.append(canonical_dumps({
            "image_id": det_set.image_id,
            "gsd_pred": estimate.gsd_pred,
            "confidence": estimate.confidence.c_final,
            "guard_triggered": estimate.confidence.guard_triggered,
            "path": estimate.path,
            "n_raw": estimate.n_raw,
            "n_filtered": estimate.n_filtered,
        }))
    payload = "".join(lines)
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
        _log(f"{len(lines)} records written to {args.out}")
    else:
        sys.stdout.write(payload)
    return 0


def _read_predictions(path: str) -> list[dict]:
    records = []
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise OperationalError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if not isinstance(rec, dict) or "image_id" not in rec:
            raise OperationalError(f"{path}:{lineno}: expected an object with image_id")
        records.append(rec)
    return records


def _cmd_evaluate(args) -> int:
    preds = _read_predictions(args.pred)
    records = []
    n_no_meta = 0
    for rec in preds:
        image_id = rec["image_id"]
        meta_path = Path(args.gt) / f"{image_id}.txt"
        if not meta_path.exists():
            n_no_meta += 1
            continue
        meta = parse_gsd_meta(_read_text(str(meta_path)), image_id=image_id)
        if meta.gsd_gt is None:
            n_no_meta += 1
            continue
        gsd_pred = rec.get("gsd_pred")
        records.append(EvalRecord(
            image_id=image_id,
            gsd_pred=gsd_pred,
            gsd_gt=meta.gsd_gt,
            rel_error=(None if gsd_pred is None
                       else abs(gsd_pred - meta.gsd_gt) / meta.gsd_gt),
            confidence=float(rec.get("confidence", 0.0)),
            path=str(rec.get("path", "")),
            n_filtered=int(rec.get("n_filtered", 0)),
        ))
    if n_no_meta:
        _log(f"excluded {n_no_meta} images without GSD metadata")
    try:
        report = evaluate(records)
    except ValueError as exc:
        raise OperationalError(str(exc)) from exc
    if args.records:
        Path(args.records).write_text("".join(record_to_json(r) for r in records),
                                      encoding="utf-8")
        _log(f"per-image records written to {args.records}")
    sys.stdout.write(format_report(report))
    return 0


def _cmd_area(args) -> int:
    if args.pixel_count is not None:
        request = {"pixel_count": args.pixel_count}
        if args.gsd is not None:
            request["gsd"] = args.gsd
        elif args.detections:
            request["detections_path"] = args.detections
        else:
            raise OperationalError("--pixel-count needs --gsd or --detections")
        l_ref = args.l_ref if args.l_ref is not None else 1.0
        if args.gsd is None:
            l_ref = _load_l_ref(args)
        try:
            response = handle_area(request, l_ref)
        except ToolError as exc:
            raise OperationalError(str(exc)) from exc
        sys.stdout.write(canonical_dumps(response))
        return 0

    if not args.counts_file:
        raise OperationalError("pass --pixel-count or --counts-file")
    if args.gsd is None and not args.pred:
        raise OperationalError("--counts-file needs --gsd or --pred")
    counts = parse_pixel_counts(_read_text(args.counts_file))
    gsd_by_image: dict[str, tuple[float | None, float | None]] = {}
    if args.pred:
        for rec in _read_predictions(args.pred):
            gsd_by_image[rec["image_id"]] = (rec.get("gsd_pred"),
                                             rec.get("confidence"))
    for image_id, object_id, pixel_count in counts:
        if args.gsd is not None:
            gsd, conf = args.gsd, None
        elif image_id in gsd_by_image:
            gsd, conf = gsd_by_image[image_id]
        else:
            gsd, conf = None, None
        area = None if gsd is None else pixel_count * gsd * gsd
        sys.stdout.write(canonical_dumps({
            "image_id": image_id,
            "object_id": object_id,
            "pixel_count": pixel_count,
            "gsd_used": gsd,
            "area_m2": area,
            "confidence": conf,
        }))
    return 0


def _parse_grid(text: str | None, convert):
    if text is None:
        return None
    return [convert(tok) for tok in text.split(",") if tok]


def _cmd_sweep(args) -> int:
    base = _build_config(args)
    dataset = _load_dataset(args.detections_dir, args.gt)
    dataset = [(ds, meta) for ds, meta in dataset if meta is not None]
    grid = {}
    l_ref_grid = _parse_grid(args.l_ref_grid, float)
    alpha_grid = _parse_grid(args.alpha_grid, _parse_alpha)
    agg_grid = _parse_grid(args.aggregation_grid, str)
    if l_ref_grid:
        grid["l_ref"] = l_ref_grid
    if alpha_grid is not None and args.alpha_grid:
        grid["alpha"] = alpha_grid
    if agg_grid:
        grid["aggregation"] = agg_grid
    cells = ablation_sweep(dataset, grid, base)
    csv_text = sweep_to_csv(cells)
    if args.csv:
        Path(args.csv).write_text(csv_text, encoding="utf-8")
        _log(f"sweep written to {args.csv}")
    else:
        sys.stdout.write(csv_text)
    for cell in cells:
        rep = cell.report
        med = "n/a" if rep is None else f"{rep.median_err:.4%}"
        _log(f"cell {cell.params}: median={med}")
    return 0


def _cmd_gen(args) -> int:
    out = Path(args.out)
    (out / "detections").mkdir(parents=True, exist_ok=True)
    (out / "meta").mkdir(parents=True, exist_ok=True)
    master = np.random.default_rng(args.seed)
    for i in range(args.trials):
        gsd = float(master.uniform(args.gsd_min, args.gsd_max))
        n_vehicles = int(master.integers(args.vehicles_min, args.vehicles_max + 1))
        lengths = sample_vehicle_lengths(master, n_vehicles, args.modal_length)
        n_fp = int(round(args.fp_frac * n_vehicles))
        fp_px = master.uniform(10.0, 400.0, n_fp)
        scene = SyntheticScene(
            true_gsd=gsd,
            vehicle_lengths_m=tuple(float(x) for x in lengths),
            false_positive_lengths_px=tuple(float(x) for x in fp_px),
            detector_noise_sigma=args.noise,
            seed=int(master.integers(0, 2**63 - 1)),
        )
        det_set, meta = generate_scene(scene, args.modal_length)
        image_id = f"synth-{i:05d}"
        det_set.image_id = image_id
        (out / "detections" / f"{image_id}.json").write_text(
            write_detection_json(det_set), encoding="utf-8")
        (out / "meta" / f"{image_id}.txt").write_text(
            f"gsd:{meta.gsd_gt:.9g}\n", encoding="utf-8")
    _log(f"{args.trials} scenes written under {out}")
    return 0


def _cmd_serve(args) -> int:
    host, _, port_text = args.bind.rpartition(":")
    if not host or not port_text.isdigit():
        raise OperationalError(f"--bind must be HOST:PORT, got {args.bind!r}")
    path = args.calibration or os.environ.get(CALIBRATION_ENV)
    if not path:
        raise OperationalError(
            f"pass --calibration or set {CALIBRATION_ENV}")
    try:
        calibration = parse_calibration(_read_text(path))
    except (ValueError, json.JSONDecodeError) as exc:
        raise OperationalError(f"bad calibration file {path}: {exc}") from exc
    server = make_server(host, int(port_text), calibration, version=__version__)
    _log(f"serving on http://{host}:{server.server_address[1]} "
         f"(l_ref={calibration['l_ref']})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        _log("shutting down")
    finally:
        server.server_close()
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gsdkit",
        description="Ground sample distance estimation from oriented vehicle "
                    "detections.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="derive the reference length from "
                                         "ground-truth annotations")
    p.add_argument("--annotations", required=True, help="DOTA label directory")
    p.add_argument("--meta", required=True, help="GSD metadata directory")
    p.add_argument("--category", default="small-vehicle")
    p.add_argument("--out", help="write calibration JSON here (default stdout)")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("estimate", help="estimate GSD for detection JSON")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--detections", help="one detection JSON file")
    group.add_argument("--detections-dir", help="directory of detection JSON files")
    p.add_argument("--out", help="NDJSON output path for --detections-dir")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("evaluate", help="aggregate prediction errors against "
                                        "ground-truth metadata")
    p.add_argument("--pred", required=True, help="predictions NDJSON")
    p.add_argument("--gt", required=True, help="GSD metadata directory")
    p.add_argument("--records", help="write joined per-image records NDJSON here")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("area", help="convert pixel counts to square metres")
    p.add_argument("--pixel-count", type=int)
    p.add_argument("--gsd", type=float)
    p.add_argument("--detections", help="estimate GSD from this detection JSON")
    p.add_argument("--counts-file", help="'image_id object_id pixel_count' lines")
    p.add_argument("--pred", help="predictions NDJSON for per-image GSD")
    p.add_argument("--calibration", help="calibration JSON path")
    p.add_argument("--l-ref", type=float)
    p.set_defaults(func=_cmd_area)

    p = sub.add_parser("sweep", help="ablation sweep over config grids")
    p.add_argument("--detections-dir", required=True)
    p.add_argument("--gt", required=True, help="GSD metadata directory")
    p.add_argument("--l-ref-grid", help="comma-separated l_ref values")
    p.add_argument("--alpha-grid", help="comma-separated alpha values ('none' allowed)")
    p.add_argument("--aggregation-grid", help="comma-separated of kde,median,mean")
    p.add_argument("--csv", help="write the per-cell CSV here (default stdout)")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("gen", help="generate seeded synthetic scenes")
    p.add_argument("--out", required=True)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gsd-min", type=float, default=0.05)
    p.add_argument("--gsd-max", type=float, default=0.25)
    p.add_argument("--vehicles-min", type=int, default=20)
    p.add_argument("--vehicles-max", type=int, default=60)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--fp-frac", type=float, default=0.1)
    p.add_argument("--modal-length", type=float, default=5.0)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("serve", help="run the HTTP tool service")
    p.add_argument("--bind", default="127.0.0.1:8080")
    p.add_argument("--calibration", help="calibration JSON path")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OperationalError as exc:
        _log(f"error: {exc}")
        return 1
    except (OSError, ValueError) as exc:
        _log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
