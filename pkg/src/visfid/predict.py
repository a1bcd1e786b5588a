"""Per-pair measure assembly and preference predictors."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, asdict

from .geomdist import SurfaceSampler, metro_measures
from .imagediff import ViewParams, bm_measure, mse
from .render import CameraSpec, canonical_camera, render_stimulus
from .simplify import ModelFamily

PAIR_IDS = ("s,q5", "s,q8", "s,v5", "s,v8")
MEASURE_NAMES = ("bm", "mse", "metro_mn", "metro_mse", "metro_max", "metro_vol")

# CSV rendering precision: 9 significant digits keeps recomputation checks
# meaningful while staying human-readable
_FMT = "{:.9g}"


@dataclass(frozen=True)
class PairMeasures:
    object: str
    object_type: str
    pair: str  # one of PAIR_IDS
    bm: float
    mse: float
    metro_mn: float
    metro_mse: float
    metro_max: float
    metro_vol: float

    def __post_init__(self):
        if self.pair not in PAIR_IDS:
            raise ValueError(f"unknown pair id {self.pair!r}")
        for name in MEASURE_NAMES:
            v = getattr(self, name)
            if not (v == v and abs(v) != float("inf")):
                raise ValueError(f"measure {name} is not finite: {v!r}")

    def value(self, measure: str) -> float:
        if measure not in MEASURE_NAMES:
            raise KeyError(measure)
        return getattr(self, measure)


@dataclass(frozen=True)
class PreferencePrediction:
    """Signed per-measure predictors; positive predicts a Vclust preference,
    negative a Qslim preference."""

    object: str
    measure: str
    p5: float
    p8: float


def measure_family(fam: ModelFamily, sampler: SurfaceSampler,
                   view_params: ViewParams | None = None,
                   camera: CameraSpec | None = None) -> list[PairMeasures]:
    """All six measures for the four (standard, simplified) pairs.

    Geometric measures use the standard as pivot; image measures compare
    single-stimulus renders of both members under the family's camera.
    """
    cam = camera or canonical_camera(fam.s)
    img_s = render_stimulus(fam.s, cam)
    out = []
    for pair_id, approx in fam.pairs():
        metro = metro_measures(fam.s, approx, sampler)
        img_a = render_stimulus(approx, cam)
        out.append(PairMeasures(
            object=fam.name, object_type=fam.object_type, pair=pair_id,
            bm=bm_measure(img_s, img_a, view_params),
            mse=mse(img_s, img_a),
            **metro,
        ))
    return out


def preference_predictors(pms: list[PairMeasures]) -> list[PreferencePrediction]:
    """p5/p8 = meas(s,q) - meas(s,v) per measure for one object."""
    by_pair = {pm.pair: pm for pm in pms}
    missing = [p for p in PAIR_IDS if p not in by_pair]
    if missing:
        raise ValueError(f"missing pairs for predictors: {missing}")
    objects = {pm.object for pm in pms}
    if len(objects) != 1:
        raise ValueError(f"predictors need a single object, got {sorted(objects)}")
    obj = objects.pop()
    return [
        PreferencePrediction(
            object=obj, measure=m,
            p5=by_pair["s,q5"].value(m) - by_pair["s,v5"].value(m),
            p8=by_pair["s,q8"].value(m) - by_pair["s,v8"].value(m),
        )
        for m in MEASURE_NAMES
    ]


# ---------------------------------------------------------------------------
# CSV schemas

MEASURES_FIELDS = ["object", "object_type", "pair", *MEASURE_NAMES]
PREDICTIONS_FIELDS = ["object", "measure", "p5", "p8"]


def write_measures_csv(rows: list[PairMeasures], path: str | os.PathLike | io.TextIOBase):
    _write_csv(path, MEASURES_FIELDS, [
        {k: (_FMT.format(v) if isinstance(v, float) else v)
         for k, v in asdict(r).items()}
        for r in sorted(rows, key=lambda r: (r.object, r.pair))
    ])


def write_predictions_csv(rows: list[PreferencePrediction],
                          path: str | os.PathLike | io.TextIOBase):
    _write_csv(path, PREDICTIONS_FIELDS, [
        {"object": r.object, "measure": r.measure,
         "p5": _FMT.format(r.p5), "p8": _FMT.format(r.p8)}
        for r in sorted(rows, key=lambda r: (r.object, MEASURE_NAMES.index(r.measure)))
    ])


def _write_csv(path, fields, dict_rows):
    if hasattr(path, "write"):
        _dump_csv(path, fields, dict_rows)
    else:
        with open(os.fspath(path), "w", newline="") as fh:
            _dump_csv(fh, fields, dict_rows)


def _dump_csv(fh, fields, dict_rows):
    writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(dict_rows)


def read_measures_csv(path) -> list[PairMeasures]:
    with open(os.fspath(path), newline="") as fh:
        return [
            PairMeasures(
                object=row["object"], object_type=row["object_type"], pair=row["pair"],
                **{m: float(row[m]) for m in MEASURE_NAMES},
            )
            for row in csv.DictReader(fh)
        ]


def read_predictions_csv(path) -> list[PreferencePrediction]:
    with open(os.fspath(path), newline="") as fh:
        return [
            PreferencePrediction(object=row["object"], measure=row["measure"],
                                 p5=float(row["p5"]), p8=float(row["p8"]))
            for row in csv.DictReader(fh)
        ]
