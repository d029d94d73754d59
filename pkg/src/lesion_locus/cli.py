"""Command line interface.

Exit codes: 0 success, 1 I/O or manifest problems, 2 pipeline stage failure,
64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import LesionLocusError, ManifestError, ParseError
from .evaluation import (CSV_HEADER, DEFAULT_EXPANSIONS, SweepConfig, area_estimate_errors,
                         area_pairs, enumerate_ensembles, fit_line, hance_error, sweep)
from .frame import CropRect, FrameParams, remove_black_frame
from .fusion import FusionParams, build_weight_tables, fuse
from .groundtruth import load_ground_truth
from .imaging import BoundingBox, extract_blue_channel, histogram, read_rgb, write_mask, write_rgb
from .localization import BoxPolicy, ExpansionSpec, LocalizeConfig, localize
from .manifest import read_manifest, write_manifest
from .thresholding import METHOD_ORDER, EnsembleSpec, compute_ensemble

EXIT_OK, EXIT_IO, EXIT_STAGE, EXIT_USAGE = 0, 1, 2, 64

RED = (255, 0, 0)
GREEN = (0, 255, 0)
BLUE = (0, 0, 255)

log = logging.getLogger("lesion_locus")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _arg_type(fn, what):
    def conv(text):
        try:
            return fn(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"invalid {what} {text!r}: {exc}") from None
    return conv


def _methods(text: str) -> EnsembleSpec:
    if text.strip().lower() == "all":
        return EnsembleSpec(METHOD_ORDER)
    return EnsembleSpec.parse(text)


def _sizes(text: str) -> list[int]:
    sizes = [int(t) for t in text.split(",") if t.strip()]
    if not sizes or any(not 1 <= k <= 6 for k in sizes):
        raise ValueError("sizes must be integers in 1..6")
    return sizes


def _expansions(text: str) -> list[ExpansionSpec]:
    return [ExpansionSpec.parse(t) for t in text.split(",") if t.strip()]


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("LESION_LOCUS_JOBS", "1")))
    except ValueError:
        return 1


# --- shared flag groups ---------------------------------------------------

def _add_frame_flags(p):
    g = p.add_argument_group("frame removal")
    g.add_argument("--black-lightness", type=int, default=20, metavar="L",
                   help="pixels with HSL lightness below L are black (default 20)")
    g.add_argument("--black-fraction", type=float, default=0.60, metavar="F",
                   help="a line is frame when at least F of it is black (default 0.60)")
    g.add_argument("--max-frame-fraction", type=float, default=0.40, metavar="F",
                   help="cap on removal per side as a fraction of the dimension (default 0.40)")


def _add_fusion_flags(p, methods=True):
    g = p.add_argument_group("fusion")
    if methods:
        g.add_argument("--methods", type=_arg_type(_methods, "method list"),
                       default=EnsembleSpec.parse("otsu,kapur,huang,sahoo"),
                       help="comma separated methods or 'all' (default otsu,kapur,huang,sahoo)")
    g.add_argument("--gamma", type=float, default=0.1)
    g.add_argument("--beta-sp", type=float, default=0.0, help="spatial weight for refinement sweeps")
    g.add_argument("--k-max", type=int, default=0, help="refinement sweeps (default 0: initial labelling only)")
    g.add_argument("--neighborhood", type=int, default=3, help="odd window side (default 3)")
    g.add_argument("--stop-fraction", type=float, default=0.001)


def _add_box_flags(p):
    p.add_argument("--policy", type=_arg_type(BoxPolicy.parse, "policy"), default=BoxPolicy(),
                   help="all | largest | fraction:F (default fraction:0.05)")


def _frame_params(a) -> FrameParams:
    return FrameParams(a.black_lightness, a.black_fraction, a.max_frame_fraction)


def _fusion_params(a) -> FusionParams:
    return FusionParams(a.gamma, a.beta_sp, a.k_max, a.neighborhood, a.stop_fraction)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def _deframe(img, a):
    if getattr(a, "keep_frame", False):
        h, w = img.shape[:2]
        return img, CropRect.full(w, h)
    f = _frame_params(a)
    return remove_black_frame(img, f.black_lightness_threshold, f.black_row_fraction,
                              f.max_frame_fraction)


# --- overlay --------------------------------------------------------------

def draw_box(img: np.ndarray, box: BoundingBox, color, thickness: int = 2) -> None:
    h, w = img.shape[:2]
    for k in range(thickness):
        l, t = max(0, box.left - k), max(0, box.top - k)
        r, b = min(w - 1, box.right + k), min(h - 1, box.bottom + k)
        img[t, l:r + 1] = color
        img[b, l:r + 1] = color
        img[t:b + 1, l] = color
        img[t:b + 1, r] = color


def render_overlay(img: np.ndarray, result: dict) -> np.ndarray:
    """Draw the boxes of a result dictionary (as written to result.json)."""
    out = np.array(img, dtype=np.uint8, copy=True)
    draw_box(out, BoundingBox.from_dict(result["initial_box"]), RED)
    draw_box(out, BoundingBox.from_dict(result["expanded_box"]), GREEN)
    if result.get("ground_truth_box"):
        draw_box(out, BoundingBox.from_dict(result["ground_truth_box"]), BLUE)
    return out


# --- commands -------------------------------------------------------------

def cmd_deframe(a) -> int:
    img = read_rgb(a.image)
    f = _frame_params(a)
    cropped, rect = remove_black_frame(img, f.black_lightness_threshold, f.black_row_fraction,
                                       f.max_frame_fraction)
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_rgb(out / "cropped.png", cropped)
    _write_json(out / "crop.json", rect.to_dict())
    return EXIT_OK


def cmd_threshold(a) -> int:
    img = read_rgb(a.image)
    cropped, _ = _deframe(img, a)
    results = compute_ensemble(histogram(extract_blue_channel(cropped)), a.methods)
    print(json.dumps({r.method.label: r.threshold for r in results}))
    return EXIT_OK


def cmd_fuse(a) -> int:
    img = read_rgb(a.image)
    cropped, rect = _deframe(img, a)
    params = _fusion_params(a)
    mask, results = fuse(extract_blue_channel(cropped), a.methods, params)
    full = np.zeros(img.shape[:2], dtype=np.uint8)
    rect.apply(full)[...] = mask
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_mask(out / "fused.png", full)
    tables = build_weight_tables(results, params.gamma)
    info = {
        "methods": [r.method.label for r in results],
        "thresholds": {r.method.label: r.threshold for r in results},
        "t_bar": tables.t_bar,
        "beta": {r.method.label: float(b) for r, b in zip(results, tables.beta)},
        "params": asdict(params),
        "crop": rect.to_dict(),
        "fusion_area": int(mask.sum()),
    }
    _write_json(out / "fuse.json", info)
    return EXIT_OK


def cmd_localize(a) -> int:
    img = read_rgb(a.image)
    config = LocalizeConfig(frame=_frame_params(a), ensemble=a.methods, fusion=_fusion_params(a),
                            expansion=a.expansion, policy=a.policy)
    result = localize(img, config)
    data = result.to_dict()
    data["ensemble"] = a.methods.name
    data["expansion"] = str(a.expansion)
    if a.ground_truth:
        h, w = img.shape[:2]
        gt = load_ground_truth(a.ground_truth, (w, h), a.gt_kind)
        data["ground_truth_box"] = gt.manual_box.to_dict()
        data["epsilon_initial"] = hance_error(result.initial_box, gt.manual_box)
        data["epsilon_expanded"] = hance_error(result.expanded_box, gt.manual_box)
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "result.json", data)
    write_rgb(out / "overlay.png", render_overlay(img, data))
    if a.save_mask:
        write_mask(out / "fused.png", result.fused)
    return EXIT_OK


def cmd_overlay(a) -> int:
    img = read_rgb(a.image)
    data = json.loads(Path(a.result).read_text(encoding="utf-8"))
    write_rgb(a.out, render_overlay(img, data))
    return EXIT_OK


def cmd_sweep(a) -> int:
    manifest = read_manifest(a.manifest)
    ensembles = enumerate_ensembles(a.sizes)
    if a.individual:
        ensembles += enumerate_ensembles([1])
    config = SweepConfig(frame=_frame_params(a), fusion=_fusion_params(a), policy=a.policy)
    result = sweep(manifest, ensembles, a.expansions, config, jobs=a.jobs)
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = result.sorted_rows()
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow(r.csv_fields())
    doc = result.to_dict()
    doc["rows"] = [r.to_dict() for r in rows]
    _write_json(out / "sweep.json", doc)
    return EXIT_OK


def cmd_fit_area(a) -> int:
    doc = json.loads(Path(a.sweep_json).read_text(encoding="utf-8"))
    records = doc["records"] if isinstance(doc, dict) else doc
    ensemble, expansion = a.ensemble, a.expansion
    if ensemble is None:
        rows = doc.get("rows") if isinstance(doc, dict) else None
        if rows:
            ensemble = rows[0]["ensemble"]
            expansion = expansion or rows[0]["expansion"]
    if ensemble is not None:
        ensemble = EnsembleSpec.parse(ensemble).name
        records = [r for r in records if r["ensemble"] == ensemble]
    if expansion is not None:
        records = [r for r in records if r["expansion"] == str(ExpansionSpec.parse(expansion))]
    if not records:
        print("fit-area: no records match the selection", file=sys.stderr)
        return EXIT_IO
    fits = {}
    for key, predictor in (("box", "automatic_box"), ("fusion", "fusion_output")):
        pairs = area_pairs(records, predictor)
        model = fit_line(pairs)
        fits[key] = {"slope": model.slope, "intercept": model.intercept,
                     **area_estimate_errors(model, pairs), "n": len(pairs)}
    fits["ensemble"] = ensemble
    fits["expansion"] = expansion
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "fit.json", fits)
    return EXIT_OK


def cmd_synth(a) -> int:
    from .synthetic import make_suite

    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cases = make_suite(a.count, seed=a.seed, width=a.width, height=a.height, frame=a.frame,
                       noise_sigma=a.noise, edge_sigma=a.edge)
    rows = []
    for i, c in enumerate(cases):
        name = f"lesion_{i:03d}"
        write_rgb(out / f"{name}.png", c.image)
        if a.gt_kind == "points":
            e = c.ellipse
            ang = np.linspace(0, 2 * np.pi, a.points, endpoint=False)
            ca, sa = np.cos(e.angle), np.sin(e.angle)
            xs = e.cx + e.a * np.cos(ang) * ca - e.b * np.sin(ang) * sa
            ys = e.cy + e.a * np.cos(ang) * sa + e.b * np.sin(ang) * ca
            lines = [f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys)]
            (out / f"{name}_gt.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
            rows.append((f"{name}.png", f"{name}_gt.csv", "points"))
        else:
            write_mask(out / f"{name}_gt.png", c.gt_mask)
            rows.append((f"{name}.png", f"{name}_gt.png", "mask"))
    write_manifest(out / "manifest.csv", rows)
    return EXIT_OK


# --- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lesion-locus", description="Approximate lesion localization in dermoscopy images.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("deframe", help="remove the black frame")
    s.add_argument("image")
    s.add_argument("--out-dir", required=True)
    _add_frame_flags(s)
    s.set_defaults(func=cmd_deframe)

    s = sub.add_parser("threshold", help="print per-method thresholds of the blue channel as JSON")
    s.add_argument("image")
    s.add_argument("--methods", type=_arg_type(_methods, "method list"), default=_methods("all"))
    s.add_argument("--keep-frame", action="store_true", help="skip frame removal")
    _add_frame_flags(s)
    s.set_defaults(func=cmd_threshold)

    s = sub.add_parser("fuse", help="write the fused threshold mask")
    s.add_argument("image")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--keep-frame", action="store_true", help="skip frame removal")
    _add_frame_flags(s)
    _add_fusion_flags(s)
    s.set_defaults(func=cmd_fuse)

    s = sub.add_parser("localize", help="full pipeline: result.json and overlay.png")
    s.add_argument("image")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--expansion", type=_arg_type(ExpansionSpec.parse, "expansion"),
                   default=ExpansionSpec("nonadaptive", 2),
                   help="none | nonadaptive:P | adaptive:G (default nonadaptive:2)")
    s.add_argument("--ground-truth", help="mask PNG or points CSV; adds the blue box and errors")
    s.add_argument("--gt-kind", choices=("mask", "points"))
    s.add_argument("--save-mask", action="store_true", help="also write fused.png")
    _add_box_flags(s)
    _add_frame_flags(s)
    _add_fusion_flags(s)
    s.set_defaults(func=cmd_localize)

    s = sub.add_parser("overlay", help="re-render an overlay from a result.json")
    s.add_argument("image")
    s.add_argument("result")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_overlay)

    s = sub.add_parser("sweep", help="evaluate ensembles and expansions over a manifest")
    s.add_argument("manifest")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--sizes", type=_arg_type(_sizes, "sizes"), default=[3, 4, 5, 6])
    s.add_argument("--expansions", type=_arg_type(_expansions, "expansions"),
                   default=list(DEFAULT_EXPANSIONS),
                   help="comma separated, e.g. nonadaptive:2,adaptive:6")
    s.add_argument("--individual", action="store_true", help="add single-method rows")
    s.add_argument("--jobs", type=int, default=_default_jobs(),
                   help="worker processes (default $LESION_LOCUS_JOBS or 1)")
    _add_box_flags(s)
    _add_frame_flags(s)
    _add_fusion_flags(s, methods=False)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("fit-area", help="fit lesion area against box and fusion areas")
    s.add_argument("sweep_json")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--ensemble", help="default: best row of the sweep")
    s.add_argument("--expansion")
    s.set_defaults(func=cmd_fit_area)

    s = sub.add_parser("synth", help="generate a synthetic image suite with a manifest")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--count", type=int, default=20)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--width", type=int, default=768)
    s.add_argument("--height", type=int, default=512)
    s.add_argument("--frame", type=int, default=15)
    s.add_argument("--noise", type=float, default=8.0)
    s.add_argument("--edge", type=float, default=4.0)
    s.add_argument("--gt-kind", choices=("mask", "points"), default="mask")
    s.add_argument("--points", type=int, default=16, help="border points when --gt-kind points")
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return a.func(a)
    except (ManifestError, ParseError, OSError) as exc:
        print(f"{parser.prog}: {exc}", file=sys.stderr)
        return EXIT_IO
    except LesionLocusError as exc:
        stage = exc.stage or a.command
        print(f"{parser.prog}: {stage} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except ValueError as exc:
        # parameter validation that argparse could not express
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
