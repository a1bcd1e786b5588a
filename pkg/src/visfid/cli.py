"""Command-line entry point.

Subcommands: standardize, simplify, render, measure-geom, measure-image,
predict, stats, pipeline, serve, make-corpus.  Every flag can also be set
in a YAML config file passed with --config; explicit flags win.
Exit codes: 0 ok, 1 partial or full failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import yaml


def _fail(msg: str, code: int = 1):
    print(f"error: {msg}", file=sys.stderr)
    raise SystemExit(code)


def _merge_config(args: argparse.Namespace, defaults: dict):
    """Fill unset (None) args from --config YAML, then from defaults."""
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = yaml.safe_load(fh) or {}
        if not isinstance(cfg, dict):
            _fail(f"{args.config}: config must be a mapping", 2)
    for key, default in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, cfg.get(key.replace("_", "-"), cfg.get(key, default)))
    return args


def _load(path):
    from .mesh import load_mesh

    try:
        return load_mesh(path)
    except Exception as exc:
        _fail(str(exc))


def cmd_standardize(args):
    from .mesh import save_off
    from .simplify import standardize

    _merge_config(args, {"budget": 3700})
    mesh = _load(args.input)
    out = standardize(mesh, int(args.budget))
    save_off(out, args.output)
    print(f"standardized {args.input}: {mesh.n_faces} -> {out.n_faces} faces")


def cmd_simplify(args):
    from .mesh import save_off
    from .simplify import Algorithm, SimplifySpec, qem_simplify, vclust_to_target

    _merge_config(args, {"algorithm": "qem", "seed": 0})
    mesh = _load(args.input)
    target = int(args.target_faces)
    if args.algorithm == "qem":
        out = qem_simplify(mesh, SimplifySpec(Algorithm.QEM, target, int(args.seed)))
        achieved = out.n_faces
    elif args.algorithm == "vclust":
        res = vclust_to_target(mesh, target)
        out, achieved = res.mesh, res.achieved_faces
    else:
        _fail(f"unknown algorithm {args.algorithm!r}", 2)
    save_off(out, args.output)
    print(f"simplified {args.input} ({args.algorithm}): "
          f"{mesh.n_faces} -> {achieved} faces (target {target})")


def cmd_render(args):
    from .render import canonical_camera, render_stimulus, save_pgm

    _merge_config(args, {"fov_deg": 40.0, "distance_factor": 2.0,
                         "azimuth_deg": 45.0, "elevation_deg": 25.0,
                         "width": None})
    mesh = _load(args.input)
    cam = canonical_camera(mesh, fov_deg=float(args.fov_deg),
                           distance_factor=float(args.distance_factor),
                           azimuth_deg=float(args.azimuth_deg),
                           elevation_deg=float(args.elevation_deg))
    img = (render_stimulus(mesh, cam) if args.width is None
           else render_stimulus(mesh, cam, int(args.width)))
    save_pgm(img, args.output)
    print(f"rendered {args.input} -> {args.output} ({img.width}x{img.height})")


def cmd_measure_geom(args):
    from .geomdist import SurfaceSampler, metro_measures
    from .predict import MEASURE_NAMES

    _merge_config(args, {"samples": None, "seed": 0})
    pivot = _load(args.pivot)
    other = _load(args.other)
    samples = int(args.samples) if args.samples else max(100_000, 50 * pivot.n_faces)
    mm = metro_measures(pivot, other, SurfaceSampler(samples, int(args.seed)))
    print("pivot,other," + ",".join(k for k in MEASURE_NAMES if k.startswith("metro")))
    print(f"{args.pivot},{args.other}," + ",".join(
        f"{mm[k]:.9g}" for k in MEASURE_NAMES if k.startswith("metro")))


def cmd_measure_image(args):
    from .imagediff import ViewParams, bm_measure, mse
    from .render import load_pgm

    _merge_config(args, {"pixels_per_degree": None, "max_luminance": 100.0})
    a = load_pgm(args.reference)
    b = load_pgm(args.test)
    vp = (ViewParams(max_luminance=float(args.max_luminance))
          if args.pixels_per_degree is None
          else ViewParams(float(args.pixels_per_degree), float(args.max_luminance)))
    print("reference,test,bm,mse,mse_normalized")
    print(f"{args.reference},{args.test},{bm_measure(a, b, vp):.9g},"
          f"{mse(a, b):.9g},{mse(a, b, normalized=True):.9g}")


def cmd_predict(args):
    from .predict import (preference_predictors, read_measures_csv,
                          write_predictions_csv)

    rows = read_measures_csv(args.measures)
    by_object: dict[str, list] = {}
    for r in rows:
        by_object.setdefault(r.object, []).append(r)
    predictions = []
    for obj in sorted(by_object):
        predictions.extend(preference_predictors(by_object[obj]))
    write_predictions_csv(predictions, args.output)
    print(f"wrote {len(predictions)} predictions to {args.output}")


def cmd_stats(args):
    from .predict import read_measures_csv, read_predictions_csv
    from .stats import (anova_report, clean_naming, correlate_report,
                        format_correlation_table, read_human_csv,
                        write_correlations_csv)

    _merge_config(args, {"report": None, "correlations": None})
    responses = read_human_csv(args.human)
    measures = read_measures_csv(args.measures)
    predictions = read_predictions_csv(args.predictions)
    rows = correlate_report(measures, predictions, responses)
    report = format_correlation_table(rows)
    naming = [r for r in responses if r.task == "NAMING"]
    if naming:
        _, excl = clean_naming(naming)
        report += ("\nnaming exclusions: "
                   f"{excl['flag_excluded']} flagged, "
                   f"{excl['outlier_excluded']} outliers of {excl['input']}\n")
    anovas = anova_report(responses)
    if anovas:
        report += "\nANOVA summary\n"
        for row in anovas:
            report += f"  [{row.scheme}] {row}\n"
    if args.correlations:
        write_correlations_csv(rows, args.correlations)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(report)
    print(report, end="")


def cmd_pipeline(args):
    from .pipeline import PipelineConfig, run_pipeline

    _merge_config(args, {"out_dir": "out", "budget": None, "samples": None,
                         "seed": 0, "workers": 1,
                         "pixels_per_degree": None, "max_luminance": 100.0,
                         "no_images": False})
    config = PipelineConfig(
        manifest=args.manifest, out_dir=args.out_dir,
        budget=int(args.budget) if args.budget else None,
        samples=int(args.samples) if args.samples else None,
        seed=int(args.seed),
        pixels_per_degree=(float(args.pixels_per_degree)
                           if args.pixels_per_degree else None),
        max_luminance=float(args.max_luminance),
        workers=int(args.workers), write_images=not args.no_images)
    result = run_pipeline(config)
    print(f"pipeline: {len(result.measures)} measure rows, "
          f"{len(result.predictions)} prediction rows -> {args.out_dir}")
    if not result.ok:
        for name, err in result.failures.items():
            print(f"FAILED {name}: {err.splitlines()[-1]}", file=sys.stderr)
        raise SystemExit(1)


def cmd_serve(args):
    from .server import serve

    _merge_config(args, {"store_dir": "sessions", "host": "127.0.0.1",
                         "port": 8571})
    serve(args.manifest, args.store_dir, args.host, int(args.port))


def cmd_make_corpus(args):
    from .corpus import generate_corpus

    _merge_config(args, {"budget": 640, "n_objects": 12})
    manifest = generate_corpus(args.out_dir, int(args.budget), int(args.n_objects))
    print(f"wrote corpus manifest {manifest}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="visfid",
        description="Simplified-mesh stimuli, automatic fidelity measures, "
                    "and the served experiment protocol.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="YAML file supplying defaults for any flag")
        p.set_defaults(fn=fn)
        return p

    p = add("standardize", cmd_standardize,
            "QEM-simplify a model to the common polygon budget")
    p.add_argument("input", help="mesh file (OFF/OBJ/ASCII-PLY)")
    p.add_argument("output", help="output OFF path")
    p.add_argument("--budget", type=int, help="target face count (default 3700)")

    p = add("simplify", cmd_simplify, "simplify a mesh to a face-count target")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--algorithm", choices=["qem", "vclust"])
    p.add_argument("--target-faces", type=int, required=True, dest="target_faces")
    p.add_argument("--seed", type=int)

    p = add("render", cmd_render, "render a stimulus image (binary PGM)")
    p.add_argument("input")
    p.add_argument("output", help="output PGM path")
    p.add_argument("--fov-deg", type=float, help="vertical field of view, degrees")
    p.add_argument("--distance-factor", type=float,
                   help="eye distance as a multiple of the bbox diagonal")
    p.add_argument("--azimuth-deg", type=float)
    p.add_argument("--elevation-deg", type=float)
    p.add_argument("--width", type=int, help="image width in pixels (default 591)")

    p = add("measure-geom", cmd_measure_geom,
            "surface-distance and volume measures for a mesh pair")
    p.add_argument("pivot", help="standard (pivot) mesh")
    p.add_argument("other", help="approximation mesh")
    p.add_argument("--samples", type=int, help="surface sample count")
    p.add_argument("--seed", type=int)

    p = add("measure-image", cmd_measure_image,
            "perceptual and MSE measures for an image pair")
    p.add_argument("reference", help="reference PGM image")
    p.add_argument("test", help="approximation PGM image")
    p.add_argument("--pixels-per-degree", type=float)
    p.add_argument("--max-luminance", type=float, help="cd/m^2 at pixel value 1")

    p = add("predict", cmd_predict, "preference predictors from measures.csv")
    p.add_argument("measures", help="measures.csv")
    p.add_argument("output", help="predictions.csv")

    p = add("stats", cmd_stats, "correlation/ANOVA report from CSV inputs")
    p.add_argument("measures", help="measures.csv")
    p.add_argument("predictions", help="predictions.csv")
    p.add_argument("human", help="human.csv")
    p.add_argument("--correlations", help="write correlation rows CSV here")
    p.add_argument("--report", help="write the text report here")

    p = add("pipeline", cmd_pipeline, "run the full corpus pipeline")
    p.add_argument("manifest", help="corpus manifest YAML")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--budget", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--pixels-per-degree", type=float)
    p.add_argument("--max-luminance", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--no-images", action="store_true", default=None,
                   help="skip writing stimulus PGMs")

    p = add("serve", cmd_serve, "serve the experiment protocol over HTTP")
    p.add_argument("manifest", help="corpus manifest YAML")
    p.add_argument("--store-dir", dest="store_dir")
    p.add_argument("--host")
    p.add_argument("--port", type=int)

    p = add("make-corpus", cmd_make_corpus, "generate the procedural corpus")
    p.add_argument("out_dir")
    p.add_argument("--budget", type=int)
    p.add_argument("--n-objects", type=int, dest="n_objects")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors already
        raise
    try:
        args.fn(args)
    except SystemExit:
        raise
    except FileNotFoundError as exc:
        _fail(str(exc))
    except Exception as exc:
        _fail(f"{type(exc).__name__}: {exc}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
