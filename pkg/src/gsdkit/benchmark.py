"""Evaluation harness and seeded synthetic scene generation.

The evaluator aggregates per-image relative errors the way the result
tables are defined: no-estimate images are counted but excluded from the
error statistics, threshold fractions use strict less-than, and bucket
breakdowns partition by vehicle count and ground-truth GSD. The scene
generator is the desk-scale oracle substrate: every scene is a pure
function of its seed.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .estimator import EstimatorConfig, GsdEstimate, estimate_gsd
from .geometry import ObbDetection, ObbPolygon
from .ingest import DetectionSet, ImageMeta, canonical_dumps

__all__ = [
    "EvalRecord",
    "EvalReport",
    "BucketStats",
    "SyntheticScene",
    "SweepCell",
    "relative_error",
    "evaluate",
    "generate_scene",
    "sample_vehicle_lengths",
    "ablation_sweep",
    "sweep_to_csv",
    "format_report",
    "record_to_json",
]

# Report buckets: vehicle-count regimes and GSD ranges.
BUCKETS = ("n_ge_20", "n_lt_5", "gsd_lt_0.3", "gsd_gt_0.7")


def relative_error(pred: float, gt: float) -> float:
    """|pred - gt| / gt."""
    if gt <= 0.0:
        raise ValueError(f"ground-truth GSD must be positive, got {gt}")
    return abs(pred - gt) / gt


@dataclass(frozen=True)
class EvalRecord:
    """One image's outcome. rel_error is present iff gsd_pred is.

    n_filtered rides along because the bucket breakdown partitions on it.
    """

    image_id: str
    gsd_pred: float | None
    gsd_gt: float
    rel_error: float | None
    confidence: float
    path: str
    n_filtered: int

    @classmethod
    def from_estimate(cls, image_id: str, estimate: GsdEstimate,
                      gsd_gt: float) -> "EvalRecord":
        err = None if estimate.gsd_pred is None else relative_error(estimate.gsd_pred, gsd_gt)
        return cls(image_id=image_id, gsd_pred=estimate.gsd_pred, gsd_gt=gsd_gt,
                   rel_error=err, confidence=estimate.confidence.c_final,
                   path=estimate.path, n_filtered=estimate.n_filtered)


@dataclass(frozen=True)
class BucketStats:
    n: int
    median_err: float | None


@dataclass(frozen=True)
class EvalReport:
    n_evaluated: int
    n_no_estimate: int
    median_err: float
    mean_err: float
    frac_lt_10: float
    frac_lt_20: float
    confidence_error_correlation: float | None
    per_bucket: dict[str, BucketStats] = field(default_factory=dict)


def _pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    if x.size < 3:
        return None
    sx = float(np.std(x, ddof=1))
    sy = float(np.std(y, ddof=1))
    if sx == 0.0 or sy == 0.0:
        return None
    cov = float(np.dot(x - x.mean(), y - y.mean())) / (x.size - 1)
    return cov / (sx * sy)


def evaluate(records: list[EvalRecord]) -> EvalReport:
    """Aggregate records into the report statistics.

    Records are put in a canonical order first so the aggregation is
    bitwise permutation-invariant.
    """
    evaluable = [r for r in records if r.rel_error is not None]
    n_no_estimate = len(records) - len(evaluable)
    if not evaluable:
        raise ValueError("zero evaluable records")
    evaluable.sort(key=lambda r: (r.rel_error, r.confidence, r.image_id))
    errs = np.array([r.rel_error for r in evaluable], dtype=np.float64)
    confs = np.array([r.confidence for r in evaluable], dtype=np.float64)

    def bucket(pred) -> BucketStats:
        sub = np.array([r.rel_error for r in evaluable if pred(r)], dtype=np.float64)
        if sub.size == 0:
            return BucketStats(n=0, median_err=None)
        return BucketStats(n=int(sub.size), median_err=float(np.median(sub)))

    per_bucket = {
        "n_ge_20": bucket(lambda r: r.n_filtered >= 20),
        "n_lt_5": bucket(lambda r: r.n_filtered < 5),
        "gsd_lt_0.3": bucket(lambda r: r.gsd_gt < 0.3),
        "gsd_gt_0.7": bucket(lambda r: r.gsd_gt > 0.7),
    }
    return EvalReport(
        n_evaluated=len(evaluable),
        n_no_estimate=n_no_estimate,
        median_err=float(np.median(errs)),
        mean_err=float(errs.mean()),
        frac_lt_10=float(np.mean(errs < 0.10)),
        frac_lt_20=float(np.mean(errs < 0.20)),
        confidence_error_correlation=_pearson(confs, errs),
        per_bucket=per_bucket,
    )


# ---------------------------------------------------------------------------
# Synthetic scenes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticScene:
    """Recipe for one reproducible scene; the seed fixes everything drawn."""

    true_gsd: float
    vehicle_lengths_m: tuple[float, ...]
    false_positive_lengths_px: tuple[float, ...] = ()
    detector_noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.true_gsd <= 0.0:
            raise ValueError(f"true_gsd must be positive, got {self.true_gsd}")
        if self.detector_noise_sigma < 0.0:
            raise ValueError("detector_noise_sigma must be >= 0")
        object.__setattr__(self, "vehicle_lengths_m", tuple(self.vehicle_lengths_m))
        object.__setattr__(self, "false_positive_lengths_px",
                           tuple(self.false_positive_lengths_px))


def sample_vehicle_lengths(rng: np.random.Generator, n: int,
                           modal_length: float = 5.0) -> np.ndarray:
    """Two-component fleet: 0.8 N(modal, 0.3) sedans + 0.2 N(modal+3, 0.5) trucks."""
    component = rng.random(n) < 0.8
    sedans = rng.normal(modal_length, 0.3, n)
    trucks = rng.normal(modal_length + 3.0, 0.5, n)
    lengths = np.where(component, sedans, trucks)
    return np.clip(lengths, 0.5, None)


def _make_obb(cx: float, cy: float, long_px: float, short_px: float,
              theta: float) -> ObbPolygon:
    hl = 0.5 * long_px
    hs = 0.5 * short_px
    corners = np.array([[-hl, -hs], [hl, -hs], [hl, hs], [-hl, hs]])
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    return ObbPolygon(corners @ rot.T + np.array([cx, cy]))


def _place(rng: np.random.Generator, size: int, long_px: float,
           short_px: float) -> tuple[float, float]:
    d = 0.5 * math.hypot(long_px, short_px) + 1.0
    if 2.0 * d >= size:
        return size / 2.0, size / 2.0
    return float(rng.uniform(d, size - d)), float(rng.uniform(d, size - d))


def generate_scene(scene: SyntheticScene,
                   l_ref_truth: float) -> tuple[DetectionSet, ImageMeta]:
    """Render a scene's detections (no pixels, just geometry).

    Each vehicle length l becomes an OBB with longer side
    l / true_gsd + noise at a random position and orientation; false
    positives are appended verbatim in pixels. Confidences are uniform in
    [0.3, 0.99]. The image side scales with l_ref_truth / true_gsd so
    vehicles fit at any resolution.
    """
    if l_ref_truth <= 0.0:
        raise ValueError("l_ref_truth must be positive")
    rng = np.random.default_rng(scene.seed)
    gsd = scene.true_gsd
    size = int(min(max(round(20.0 * l_ref_truth / gsd), 512), 8192))

    detections: list[ObbDetection] = []
    for length_m in scene.vehicle_lengths_m:
        side = length_m / gsd + scene.detector_noise_sigma * rng.standard_normal()
        side = max(side, 1e-3)
        short = side * rng.uniform(0.35, 0.55)
        theta = rng.uniform(0.0, math.pi)
        cx, cy = _place(rng, size, side, short)
        conf = rng.uniform(0.3, 0.99)
        detections.append(ObbDetection(polygon=_make_obb(cx, cy, side, short, theta),
                                       confidence=float(conf), label="small-vehicle"))
    for fp_px in scene.false_positive_lengths_px:
        side = max(float(fp_px), 1e-3)
        short = side * rng.uniform(0.35, 0.55)
        theta = rng.uniform(0.0, math.pi)
        cx, cy = _place(rng, size, side, short)
        conf = rng.uniform(0.3, 0.99)
        detections.append(ObbDetection(polygon=_make_obb(cx, cy, side, short, theta),
                                       confidence=float(conf), label="small-vehicle"))

    image_id = f"scene-{scene.seed}"
    det_set = DetectionSet(image_id=image_id, width=size, height=size,
                           detections=detections, source="detector")
    return det_set, ImageMeta(image_id=image_id, gsd_gt=gsd)


# ---------------------------------------------------------------------------
# Ablation sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepCell:
    """One grid cell: its parameters and report (None when the cell is empty)."""

    params: dict
    report: EvalReport | None


def ablation_sweep(dataset, config_grid: dict,
                   base_config: EstimatorConfig) -> list[SweepCell]:
    """Run the estimator over the dataset for every grid combination.

    ``dataset`` is a list of (DetectionSet, ImageMeta) pairs; images without
    ground-truth GSD are ignored. ``config_grid`` may sweep "aggregation",
    "l_ref", and "alpha" (alpha None disables the outlier filter).
    """
    unknown = set(config_grid) - {"aggregation", "l_ref", "alpha"}
    if unknown:
        raise ValueError(f"unknown sweep axes: {sorted(unknown)}")
    aggregations = list(config_grid.get("aggregation", [base_config.aggregation]))
    l_refs = list(config_grid.get("l_ref", [base_config.l_ref]))
    alphas = list(config_grid.get("alpha", [base_config.alpha]))

    usable = [(ds, meta) for ds, meta in dataset if meta.gsd_gt is not None]
    cells: list[SweepCell] = []
    for agg in aggregations:
        for l_ref in l_refs:
            for alpha in alphas:
                cfg = base_config.with_overrides(aggregation=agg, l_ref=l_ref,
                                                 alpha=alpha)
                records = [
                    EvalRecord.from_estimate(ds.image_id, estimate_gsd(ds, cfg),
                                             meta.gsd_gt)
                    for ds, meta in usable
                ]
                try:
                    report = evaluate(records)
                except ValueError:
                    report = None
                cells.append(SweepCell(
                    params={"aggregation": agg, "l_ref": l_ref, "alpha": alpha},
                    report=report,
                ))
    return cells


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


_CSV_COLUMNS = [
    "aggregation", "l_ref", "alpha", "n_evaluated", "n_no_estimate",
    "median_err", "mean_err", "frac_lt_10", "frac_lt_20",
    "confidence_error_correlation",
] + [f"median_err[{b}]" for b in BUCKETS]


def sweep_to_csv(cells: list[SweepCell]) -> str:
    """One CSV row per grid cell; empty cells leave their statistics blank."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_COLUMNS)
    for cell in cells:
        row = [_fmt(cell.params.get("aggregation")),
               _fmt(cell.params.get("l_ref")),
               _fmt(cell.params.get("alpha"))]
        rep = cell.report
        if rep is None:
            row += [""] * (len(_CSV_COLUMNS) - 3)
        else:
            row += [_fmt(rep.n_evaluated), _fmt(rep.n_no_estimate),
                    _fmt(rep.median_err), _fmt(rep.mean_err),
                    _fmt(rep.frac_lt_10), _fmt(rep.frac_lt_20),
                    _fmt(rep.confidence_error_correlation)]
            row += [_fmt(rep.per_bucket[b].median_err if b in rep.per_bucket else None)
                    for b in BUCKETS]
        writer.writerow(row)
    return buf.getvalue()


def format_report(report: EvalReport) -> str:
    """Human-readable summary table."""
    lines = [
        f"evaluated images:      {report.n_evaluated}",
        f"no-estimate images:    {report.n_no_estimate}",
        f"median relative error: {report.median_err:.4%}",
        f"mean relative error:   {report.mean_err:.4%}",
        f"fraction < 10% error:  {report.frac_lt_10:.1%}",
        f"fraction < 20% error:  {report.frac_lt_20:.1%}",
    ]
    corr = report.confidence_error_correlation
    lines.append("confidence-error r:    "
                 + ("n/a" if corr is None else f"{corr:+.3f}"))
    for name in BUCKETS:
        stats = report.per_bucket.get(name)
        if stats is None:
            continue
        med = "n/a" if stats.median_err is None else f"{stats.median_err:.4%}"
        lines.append(f"bucket {name:<11} n={stats.n:<5} median={med}")
    return "\n".join(lines) + "\n"


def record_to_json(record: EvalRecord) -> str:
    """One NDJSON line per image for downstream plotting."""
    return canonical_dumps({
        "image_id": record.image_id,
        "gsd_pred": record.gsd_pred,
        "gsd_gt": record.gsd_gt,
        "rel_error": record.rel_error,
        "confidence": record.confidence,
        "path": record.path,
        "n_filtered": record.n_filtered,
    })
