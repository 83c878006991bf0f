"""Command-line front door: fit | synth | eval | detmetrics.

Exit codes: 0 success, 1 validation error (bad flag, missing file,
malformed config), 2 runtime error. All outputs are written atomically
after the work succeeds, numeric output carries 6 significant digits,
and identical argv + inputs + seed produce byte-identical files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io as fio
from . import metrics as fmetrics
from . import synth as fsynth
from .ellipsoid import MveeParams, fit_ellipsoid_mvee
from .errors import FruitSizeError
from .sphere import RansacParams, fit_sphere_lsq, fit_sphere_ransac
from .types import CameraIntrinsics, EllipsoidModel, Point3, SphereModel

METHODS = ("lsq-sphere", "ransac-sphere", "ellipsoid")


class UsageError(Exception):
    """Validation failure: reported on one line, exit status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _q6(x):
    """Quantize to 6 significant digits for stable, readable output."""
    if isinstance(x, float):
        return float(f"{x:.6g}")
    return x


def _q6_tree(obj):
    if isinstance(obj, dict):
        return {k: _q6_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_q6_tree(v) for v in obj]
    return _q6(obj)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def _require_file(path, flag: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{flag}: file not found: {p}")
    return p


def _subseed(master: int, index: int) -> int:
    ss = np.random.SeedSequence(entropy=master, spawn_key=(index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _load_config(path) -> dict:
    doc = _load_config_file(path, "--config")
    if not isinstance(doc, dict):
        raise UsageError(f"--config: {path} must hold a JSON object")
    return doc


def _merge_config(args: argparse.Namespace, config: dict, defaults: dict):
    """Flags beat config values beat built-in defaults."""
    for key, default in defaults.items():
        if getattr(args, key, None) is None:
            value = config.get(key, default)
            setattr(args, key, value)


def _write_json(path: Path, doc) -> None:
    data = json.dumps(_q6_tree(doc), indent=2, sort_keys=True) + "\n"
    fio.atomic_write_bytes(path, data.encode("ascii"))


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, float):
                cells.append("%.6g" % v)
            elif v is None:
                cells.append("")
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    fio.atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("ascii"))


def _model_doc(model):
    if isinstance(model, SphereModel):
        return {"type": "sphere",
                "center_mm": [model.center.x, model.center.y, model.center.z],
                "radius_mm": model.radius}
    if isinstance(model, EllipsoidModel):
        return {"type": "ellipsoid",
                "center_mm": list(map(float, model.center)),
                "semi_axes_mm": list(map(float, model.semi_axes)),
                "orientation": [list(map(float, r)) for r in model.orientation]}
    return {"type": "unknown"}


# --------------------------------------------------------------------------
# fit

def _add_fit_parser(sub, shared):
    p = sub.add_parser("fit", parents=[shared], allow_abbrev=False,
                       help="fit shapes to clouds or depth+mask input")
    p.add_argument("--method", choices=METHODS + ("all",), default=None)
    p.add_argument("--cloud", nargs="+", default=None, metavar="FILE")
    p.add_argument("--format", choices=[f.value for f in fio.CloudFileFormat],
                   default=None)
    p.add_argument("--depth", default=None, metavar="PNG")
    p.add_argument("--mask", nargs="+", default=None, metavar="PNG")
    p.add_argument("--intrinsics", default=None, metavar="JSON")
    p.add_argument("--erode-px", type=int, default=None, dest="erode_px")
    p.add_argument("--min-depth", type=float, default=None, dest="min_depth")
    p.add_argument("--max-depth", type=float, default=None, dest="max_depth")
    p.add_argument("--ransac-threshold", type=float, default=None)
    p.add_argument("--ransac-confidence", type=float, default=None)
    p.add_argument("--ransac-max-iter", type=int, default=None)
    p.add_argument("--ransac-min-points", type=int, default=None)
    p.add_argument("--mvee-tol", type=float, default=None)
    p.add_argument("--mvee-max-iter", type=int, default=None)


_FIT_DEFAULTS = dict(
    method="all", cloud=None, format="csv-xyz", depth=None, mask=None,
    intrinsics=None, erode_px=fio.DEFAULT_ERODE_PX,
    min_depth=fio.DEFAULT_MIN_DEPTH_MM, max_depth=fio.DEFAULT_MAX_DEPTH_MM,
    ransac_threshold=1.0, ransac_confidence=0.99, ransac_max_iter=10000,
    ransac_min_points=10, mvee_tol=1e-6, mvee_max_iter=5000,
)


def _fit_one(item_id, cloud, methods, args, seed):
    records = []
    for method in methods:
        if method == "lsq-sphere":
            rep = fit_sphere_lsq(cloud)
        elif method == "ransac-sphere":
            params = RansacParams(
                inlier_threshold=args.ransac_threshold,
                confidence=args.ransac_confidence,
                max_iterations=args.ransac_max_iter,
                min_points=args.ransac_min_points,
                rng_seed=seed,
            )
            rep, _ = fit_sphere_ransac(cloud, params)
        else:
            rep = fit_ellipsoid_mvee(
                cloud, MveeParams(tolerance=args.mvee_tol,
                                  max_iterations=args.mvee_max_iter))
        records.append({
            "id": item_id,
            "method": method,
            "diameter_mm": rep.diameter_mm,
            "rms_residual_mm": rep.rms_residual_mm,
            "iterations": rep.iterations,
            "converged": rep.converged,
            "inlier_count": rep.inlier_count,
            "inlier_fraction": rep.inlier_fraction,
            "model": _model_doc(rep.model),
        })
    return records


def _cmd_fit(args) -> int:
    methods = METHODS if args.method == "all" else (args.method,)
    inputs = {}
    items = []  # (id, PointCloud)

    if args.cloud:
        fmt = fio.CloudFileFormat(args.format)
        for c in args.cloud:
            path = _require_file(c, "--cloud")
            inputs[str(path)] = _sha256(path)
        for c in args.cloud:
            path = Path(c)
            items.append((path.stem, fio.load_point_cloud(path, fmt)))
    elif args.depth or args.mask or args.intrinsics:
        for flag, value in (("--depth", args.depth),
                            ("--mask", args.mask),
                            ("--intrinsics", args.intrinsics)):
            if not value:
                raise UsageError(f"{flag} is required for depth input")
        depth_path = _require_file(args.depth, "--depth")
        intr_path = _require_file(args.intrinsics, "--intrinsics")
        mask_paths = [_require_file(m, "--mask") for m in args.mask]
        for p in [depth_path, intr_path, *mask_paths]:
            inputs[str(p)] = _sha256(p)
        frame = fio.load_depth_png(depth_path)
        intr = fio.load_intrinsics_json(intr_path)
        for mp in mask_paths:
            mask = fio.erode_mask(fio.load_mask_png(mp), args.erode_px)
            cloud = fio.back_project(frame, mask, intr,
                                     args.min_depth, args.max_depth)
            items.append((mp.stem, cloud))
    else:
        raise UsageError("fit needs --cloud or --depth/--mask/--intrinsics")

    def work(idx_item):
        idx, (item_id, cloud) = idx_item
        return _fit_one(item_id, cloud, methods, args,
                        _subseed(args.seed, idx))

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            per_item = list(pool.map(work, enumerate(items)))
    else:
        per_item = [work(pair) for pair in enumerate(items)]
    records = [rec for group in per_item for rec in group]

    doc = {
        "records": records,
        "provenance": {
            "command": "fit",
            "methods": list(methods),
            "seed": args.seed,
            "parameters": {
                "erode_px": args.erode_px,
                "min_depth_mm": args.min_depth,
                "max_depth_mm": args.max_depth,
                "ransac_threshold": args.ransac_threshold,
                "ransac_confidence": args.ransac_confidence,
                "ransac_max_iter": args.ransac_max_iter,
                "ransac_min_points": args.ransac_min_points,
                "mvee_tol": args.mvee_tol,
                "mvee_max_iter": args.mvee_max_iter,
            },
            "inputs": inputs,
        },
    }
    out = Path(args.out)
    json_path = out if out.suffix == ".json" else out.with_suffix(".json")
    csv_path = json_path.with_suffix(".csv")
    header = ["id", "method", "diameter_mm", "rms_residual_mm",
              "iterations", "converged", "inlier_count", "inlier_fraction"]
    rows = [[r["id"], r["method"], r["diameter_mm"], r["rms_residual_mm"],
             r["iterations"], r["converged"], r["inlier_count"],
             r["inlier_fraction"]] for r in records]
    _write_json(json_path, doc)
    _write_csv(csv_path, header, rows)
    print(f"fit: {len(records)} records -> {json_path}, {csv_path}")
    return 0


# --------------------------------------------------------------------------
# synth

def _add_synth_parser(sub, shared):
    p = sub.add_parser("synth", parents=[shared], allow_abbrev=False,
                       help="generate benchmark clouds or a depth scene")
    p.add_argument("--fruit", type=int, default=None)
    p.add_argument("--dmin", type=float, default=None)
    p.add_argument("--dmax", type=float, default=None)
    p.add_argument("--diameters", default=None,
                   help="comma-separated diameters overriding --dmin/--dmax")
    p.add_argument("--shape-mix", type=float, default=None, dest="shape_mix")
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--visible", type=float, default=None)
    p.add_argument("--noise-sigma", type=float, default=None, dest="noise_sigma")
    p.add_argument("--outlier-frac", type=float, default=None, dest="outlier_frac")
    p.add_argument("--preset", choices=sorted(fsynth.SENSOR_PRESETS), default=None)
    p.add_argument("--scene", default=None, metavar="JSON",
                   help="render a depth scene from this config instead")


_SYNTH_DEFAULTS = dict(
    fruit=102, dmin=20.0, dmax=75.0, diameters=None, shape_mix=0.5,
    points=800, visible=2.0, noise_sigma=0.0, outlier_frac=0.0,
    preset=None, scene=None,
)


def _cmd_synth(args) -> int:
    out = Path(args.out)
    sigma = args.noise_sigma
    if args.preset is not None:
        sigma = fsynth.SENSOR_PRESETS[args.preset]

    if args.scene is not None:
        doc = _load_config_file(args.scene, "--scene")
        return _render_scene(doc, out, sigma, args.seed)

    diameters = None
    if args.diameters:
        try:
            diameters = [float(tok) for tok in str(args.diameters).split(",")]
        except ValueError:
            raise UsageError(f"--diameters: not a number list: {args.diameters}")
    noise = fsynth.NoiseSpec(gaussian_sigma=sigma,
                             outlier_fraction=args.outlier_frac,
                             rng_seed=args.seed)
    try:
        rows = fsynth.generate_benchmark(
            n_fruit=args.fruit if diameters is None else len(diameters),
            diameter_range_mm=(args.dmin, args.dmax),
            shape_mix=args.shape_mix, noise=noise, out_dir=out,
            n_points=args.points, visible_fraction=args.visible,
            diameters=diameters,
        )
    except FruitSizeError as exc:
        raise UsageError(str(exc)) from None
    print(f"synth: {len(rows)} clouds + manifest -> {out / fsynth.MANIFEST_NAME}")
    return 0


def _load_config_file(path, flag) -> dict:
    p = _require_file(path, flag)
    try:
        with open(p, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{flag}: malformed JSON in {p}: {exc}") from None


def _render_scene(doc: dict, out: Path, sigma: float, seed: int) -> int:
    try:
        intr_doc = doc["intrinsics"]
        intr = CameraIntrinsics(
            fx=float(intr_doc["fx"]), fy=float(intr_doc["fy"]),
            cx=float(intr_doc["cx"]), cy=float(intr_doc["cy"]),
            width=int(intr_doc["width"]), height=int(intr_doc["height"]))
        fruits = []
        for i, f in enumerate(doc["fruits"]):
            orient = np.asarray(f.get("orientation", np.eye(3)), dtype=float)
            fruits.append(fsynth.FruitSpec(
                shape=f.get("shape", "sphere"),
                center=Point3(*[float(v) for v in f["center"]]),
                semi_axes=tuple(float(v) for v in f["semi_axes"]),
                orientation=orient, label=int(f.get("label", i))))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"--scene: bad scene config: {exc}") from None

    noise_doc = doc.get("noise", {})
    noise = fsynth.NoiseSpec(
        gaussian_sigma=float(noise_doc.get("gaussian_sigma", sigma)),
        rng_seed=int(noise_doc.get("rng_seed", seed)))
    frame, masks, records = fsynth.render_depth_scene(fruits, intr, noise)

    out.mkdir(parents=True, exist_ok=True)
    fio.save_depth_png(frame, out / "depth.png")
    fio.save_intrinsics_json(intr, out / "intrinsics.json")
    for k, mask in enumerate(masks):
        fio.save_mask_png(mask, out / f"mask_{k:03d}.png")
    truth_rows = [[r.spec.label, r.spec.shape, r.spec.diameter_mm,
                   r.spec.semi_axes[0], r.spec.semi_axes[1], r.spec.semi_axes[2],
                   r.pixel_count] for r in records]
    _write_csv(out / "truth.csv",
               ["id", "shape", "diameter_mm", "ax_mm", "bx_mm", "cx_mm",
                "pixel_count"], truth_rows)
    print(f"synth: scene with {len(masks)} fruit -> {out}")
    return 0


# --------------------------------------------------------------------------
# eval

def _add_eval_parser(sub, shared):
    p = sub.add_parser("eval", parents=[shared], allow_abbrev=False,
                       help="size-error metrics from predictions + truth")
    p.add_argument("--pred", default=None, metavar="CSV")
    p.add_argument("--truth", default=None, metavar="CSV")
    p.add_argument("--group-by", choices=["method"], default=None, dest="group_by")


_EVAL_DEFAULTS = dict(pred=None, truth=None, group_by=None)


def _read_csv_dicts(path: Path):
    import csv as _csv

    with open(path, newline="", encoding="ascii") as fh:
        return list(_csv.DictReader(fh))


def _cmd_eval(args) -> int:
    if not args.pred:
        raise UsageError("--pred is required")
    pred_path = _require_file(args.pred, "--pred")
    pred_rows = _read_csv_dicts(pred_path)
    if not pred_rows:
        raise UsageError(f"--pred: {pred_path} has no data rows")

    cols = set(pred_rows[0].keys())
    pairs = []  # (method, actual, predicted)
    if {"actual_mm", "predicted_mm"} <= cols:
        for r in pred_rows:
            pairs.append((r.get("method", ""), float(r["actual_mm"]),
                          float(r["predicted_mm"])))
    elif {"id", "diameter_mm"} <= cols:
        if not args.truth:
            raise UsageError("--truth is required when --pred has no actual_mm")
        truth_path = _require_file(args.truth, "--truth")
        truth = {r["id"]: float(r["diameter_mm"])
                 for r in _read_csv_dicts(truth_path)}
        for r in pred_rows:
            if r["id"] in truth:
                pairs.append((r.get("method", ""), truth[r["id"]],
                              float(r["diameter_mm"])))
        if not pairs:
            raise UsageError("--pred/--truth share no ids")
    else:
        raise UsageError(
            "--pred: need columns (actual_mm, predicted_mm) or (id, diameter_mm)")

    def report(sub_pairs):
        series = fmetrics.SizeSeries(
            np.array([p[1] for p in sub_pairs]),
            np.array([p[2] for p in sub_pairs]))
        return fmetrics.size_report(series)

    if args.group_by == "method":
        doc = {"groups": {}}
        methods = sorted({p[0] for p in pairs})
        rows = []
        for m in methods:
            rep = report([p for p in pairs if p[0] == m])
            doc["groups"][m or "(none)"] = rep
            rows.append([m or "(none)", rep["rmse_mm"], rep["mae_mm"],
                         rep["mape_pct"], rep["r_squared"], rep["n"]])
        out = Path(args.out)
        json_path = out if out.suffix == ".json" else out.with_suffix(".json")
        _write_json(json_path, doc)
        _write_csv(json_path.with_suffix(".csv"),
                   ["method", "rmse_mm", "mae_mm", "mape_pct", "r_squared", "n"],
                   rows)
        print(f"eval: {len(methods)} method groups -> {json_path}")
    else:
        doc = report(pairs)
        out = Path(args.out)
        json_path = out if out.suffix == ".json" else out.with_suffix(".json")
        _write_json(json_path, doc)
        print(f"eval: n={doc['n']} -> {json_path}")
    return 0


# --------------------------------------------------------------------------
# detmetrics

def _add_detmetrics_parser(sub, shared):
    p = sub.add_parser("detmetrics", parents=[shared], allow_abbrev=False,
                       help="instance segmentation metrics from mask sets")
    p.add_argument("--pred", default=None, metavar="JSON")
    p.add_argument("--truth", default=None, metavar="JSON")
    p.add_argument("--iou", type=float, default=None)


_DET_DEFAULTS = dict(pred=None, truth=None, iou=0.5)


def _cmd_detmetrics(args) -> int:
    if not args.pred or not args.truth:
        raise UsageError("--pred and --truth are required")
    pred_path = _require_file(args.pred, "--pred")
    truth_path = _require_file(args.truth, "--truth")
    pred_doc = _load_config_file(pred_path, "--pred")
    truth_doc = _load_config_file(truth_path, "--truth")
    if not isinstance(pred_doc, list) or not isinstance(truth_doc, list):
        raise UsageError("--pred/--truth must each hold a JSON list")

    def mask_at(base: Path, rel, flag):
        p = (base.parent / rel) if not Path(rel).is_absolute() else Path(rel)
        if not p.is_file():
            raise UsageError(f"{flag}: mask file not found: {p}")
        return fio.load_mask_png(p)

    preds = []
    for d in pred_doc:
        preds.append(fmetrics.ScoredDetection(
            mask=mask_at(pred_path, d["mask"], "--pred"),
            confidence=float(d["confidence"]),
            image_id=str(d.get("image_id", ""))))
    gts_by_image = {}
    for d in truth_doc:
        gts_by_image.setdefault(str(d.get("image_id", "")), []).append(
            mask_at(truth_path, d["mask"], "--truth"))

    tp = fp = 0
    fn = 0
    for image_id, gts in gts_by_image.items():
        sub = [p for p in preds if p.image_id == image_id]
        counts, _ = fmetrics.match_instances(sub, gts, args.iou)
        tp += counts.tp
        fp += counts.fp
        fn += counts.fn
    fp += sum(1 for p in preds if p.image_id not in gts_by_image)

    counts = fmetrics.MatchCounts(tp=tp, fp=fp, fn=fn)
    precision, recall, f1 = fmetrics.precision_recall_f1(counts)
    denom = tp + fp + fn
    doc = {
        "iou_threshold": args.iou,
        "tp": tp, "fp": fp, "fn": fn,
        "precision": precision, "recall": recall, "f1": f1,
        "miou": (tp / denom) if denom else 0.0,
        "ap@0.5": fmetrics.average_precision(preds, gts_by_image, 0.5),
        "ap@0.75": fmetrics.average_precision(preds, gts_by_image, 0.75),
        "map": fmetrics.map_over_thresholds(preds, gts_by_image, [0.5, 0.75]),
    }
    out = Path(args.out)
    json_path = out if out.suffix == ".json" else out.with_suffix(".json")
    _write_json(json_path, doc)
    print(f"detmetrics: tp={tp} fp={fp} fn={fn} -> {json_path}")
    return 0


# --------------------------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(prog="fruitsize", description=__doc__, allow_abbrev=False)
    shared = _Parser(add_help=False, allow_abbrev=False)
    shared.add_argument("--out", default=None, help="output path (or directory)")
    shared.add_argument("--seed", type=int, default=None)
    shared.add_argument("--jobs", type=int, default=None)
    shared.add_argument("--config", default=None,
                        help="JSON config; flags override")
    sub = parser.add_subparsers(dest="command")
    _add_fit_parser(sub, shared)
    _add_synth_parser(sub, shared)
    _add_eval_parser(sub, shared)
    _add_detmetrics_parser(sub, shared)
    return parser


_SHARED_DEFAULTS = dict(out=None, seed=0, jobs=1)

_COMMANDS = {
    "fit": (_cmd_fit, _FIT_DEFAULTS),
    "synth": (_cmd_synth, _SYNTH_DEFAULTS),
    "eval": (_cmd_eval, _EVAL_DEFAULTS),
    "detmetrics": (_cmd_detmetrics, _DET_DEFAULTS),
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("missing subcommand (fit | synth | eval | detmetrics)")
        handler, defaults = _COMMANDS[args.command]
        config = _load_config(args.config) if args.config else {}
        _merge_config(args, config, {**_SHARED_DEFAULTS, **defaults})
        if not args.out:
            raise UsageError("--out is required")
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        return handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FruitSizeError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
