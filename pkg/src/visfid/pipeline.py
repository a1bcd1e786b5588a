"""End-to-end orchestration: corpus -> families -> stimuli -> measures ->
predictions -> reports."""

from __future__ import annotations

import json
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict, replace

from .corpus import Corpus, load_manifest
from .geomdist import SurfaceSampler
from .imagediff import ViewParams
from .mesh import save_off
from .predict import (MEASURE_NAMES, _FMT, PairMeasures, PreferencePrediction, measure_family,
                      preference_predictors, write_measures_csv,
                      write_predictions_csv)
from .render import canonical_camera, render_stimulus, save_pgm
from .simplify import build_family


@dataclass(frozen=True)
class PipelineConfig:
    manifest: str
    out_dir: str = "out"
    budget: int | None = None       # None -> manifest budget
    samples: int | None = None      # None -> max(100000, 50 * pivot faces)
    seed: int = 0
    pixels_per_degree: float | None = None
    max_luminance: float = 100.0
    workers: int = 1
    write_images: bool = True

    def view_params(self) -> ViewParams:
        if self.pixels_per_degree is None:
            return ViewParams(max_luminance=self.max_luminance)
        return ViewParams(pixels_per_degree=self.pixels_per_degree,
                          max_luminance=self.max_luminance)


@dataclass
class PipelineResult:
    measures: list = field(default_factory=list)
    predictions: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)  # object -> error text

    @property
    def ok(self):
        return not self.failures


def _process_object(args):
    config, corpus_root, budget, entry = args
    mesh = entry.load(corpus_root)
    family = build_family(mesh, budget, name=entry.name,
                          object_type=entry.object_type)
    cam = canonical_camera(family.s, **entry.camera_overrides)
    obj_dir = os.path.join(config.out_dir, entry.name)
    os.makedirs(os.path.join(obj_dir, "meshes"), exist_ok=True)
    for version, m in family.versions().items():
        save_off(m, os.path.join(obj_dir, "meshes", f"{entry.name}_{version}.off"))
    if config.write_images:
        os.makedirs(os.path.join(obj_dir, "images"), exist_ok=True)
        for version, m in family.versions().items():
            save_pgm(render_stimulus(m, cam),
                     os.path.join(obj_dir, "images", f"{entry.name}_{version}.pgm"))
    samples = config.samples or max(100_000, 50 * family.s.n_faces)
    sampler = SurfaceSampler(samples_target=samples, seed=config.seed)
    measures = measure_family(family, sampler, config.view_params(), camera=cam)
    # predictors derive from the CSV-precision values so that recomputing
    # them from measures.csv reproduces predictions.csv exactly
    rounded = [replace(pm, **{m: float(_FMT.format(pm.value(m)))
                              for m in MEASURE_NAMES})
               for pm in measures]
    predictions = preference_predictors(rounded)
    return entry.name, family.achieved, measures, predictions


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Build every family, measure every pair, and write the artifact tree.

    Per-object failures are isolated; surviving objects still produce
    rows.  Output CSVs are deterministic for a fixed config and seed.
    """
    corpus = load_manifest(config.manifest)
    budget = config.budget or corpus.budget
    os.makedirs(config.out_dir, exist_ok=True)
    result = PipelineResult()
    achieved: dict = {}
    jobs = [(config, corpus.root, budget, e) for e in corpus.entries]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_try_process, jobs))
    else:
        outcomes = [_try_process(j) for j in jobs]
    for name, outcome in outcomes:
        if isinstance(outcome, str):
            result.failures[name] = outcome
        else:
            _, counts, measures, predictions = outcome
            achieved[name] = counts
            result.measures.extend(measures)
            result.predictions.extend(predictions)
    result.measures.sort(key=lambda m: (m.object, m.pair))
    result.predictions.sort(key=lambda p: (p.object, p.measure))
    write_measures_csv(result.measures, os.path.join(config.out_dir, "measures.csv"))
    write_predictions_csv(result.predictions,
                          os.path.join(config.out_dir, "predictions.csv"))
    with open(os.path.join(config.out_dir, "config.json"), "w") as fh:
        json.dump({"config": asdict(config), "budget": budget,
                   "achieved_faces": achieved,
                   "failures": result.failures}, fh, indent=2, sort_keys=True)
    return result


def _try_process(job):
    entry = job[3]
    try:
        return entry.name, _process_object(job)
    except Exception:
        return entry.name, traceback.format_exc()
