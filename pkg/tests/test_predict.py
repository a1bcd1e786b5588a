"""Per-pair measure tables and the signed preference predictors."""

from __future__ import annotations

import io
import warnings

import pytest

from visfid.geomdist import SurfaceSampler
from visfid.predict import (MEASURE_NAMES, PAIR_IDS, PairMeasures,
                            measure_family, preference_predictors,
                            read_measures_csv, read_predictions_csv,
                            write_measures_csv, write_predictions_csv)
from visfid.simplify import TargetUnreachableWarning, build_family


def make_measures(obj="ball", base=0.1):
    rows = []
    for i, pair in enumerate(PAIR_IDS):
        rows.append(PairMeasures(
            object=obj, object_type="animal", pair=pair,
            **{m: base * (i + 1) * (j + 1)
               for j, m in enumerate(MEASURE_NAMES)}))
    return rows


class TestPairMeasures:
    def test_validation(self):
        with pytest.raises(ValueError):
            make_measures(base=float("nan"))
        with pytest.raises(ValueError):
            PairMeasures(object="x", object_type="animal", pair="q5,v5",
                         **{m: 0.0 for m in MEASURE_NAMES})

    def test_value_accessor(self):
        pm = make_measures()[0]
        assert pm.value("bm") == pm.bm
        with pytest.raises(KeyError):
            pm.value("nope")


class TestPredictors:
    def test_signed_differences(self):
        rows = make_measures()
        preds = {p.measure: p for p in preference_predictors(rows)}
        by_pair = {r.pair: r for r in rows}
        for m in MEASURE_NAMES:
            assert preds[m].p5 == pytest.approx(
                by_pair["s,q5"].value(m) - by_pair["s,v5"].value(m))
            assert preds[m].p8 == pytest.approx(
                by_pair["s,q8"].value(m) - by_pair["s,v8"].value(m))

    def test_missing_pair_rejected(self):
        with pytest.raises(ValueError):
            preference_predictors(make_measures()[:3])

    def test_mixed_objects_rejected(self):
        rows = make_measures("a")[:2] + make_measures("b")[2:]
        with pytest.raises(ValueError):
            preference_predictors(rows)


class TestMeasureFamily:
    def test_family_measures(self, icosphere):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TargetUnreachableWarning)
            fam = build_family(icosphere, budget=640, name="ball",
                               object_type="animal")
        rows = measure_family(fam, SurfaceSampler(10000, seed=0))
        assert [r.pair for r in rows] == list(PAIR_IDS)
        by_pair = {r.pair: r for r in rows}
        # the 80% reduction must be geometrically worse than the 50% one
        assert by_pair["s,q8"].metro_mn > by_pair["s,q5"].metro_mn
        assert all(r.metro_mn >= 0 and 0 <= r.bm <= 1 for r in rows)


class TestCsv:
    def test_measures_round_trip(self, tmp_path):
        rows = make_measures()
        p = tmp_path / "measures.csv"
        write_measures_csv(rows, p)
        again = read_measures_csv(p)
        for a, b in zip(rows, again):
            assert a.object == b.object and a.pair == b.pair
            for m in MEASURE_NAMES:
                assert b.value(m) == pytest.approx(a.value(m), rel=1e-8)

    def test_predictions_round_trip(self, tmp_path):
        preds = preference_predictors(make_measures())
        p = tmp_path / "pred.csv"
        write_predictions_csv(preds, p)
        again = read_predictions_csv(p)
        assert [x.measure for x in again] == list(MEASURE_NAMES)
        for a, b in zip(preds, again):
            assert b.p5 == pytest.approx(a.p5, rel=1e-8)

    def test_deterministic_bytes(self):
        buf1, buf2 = io.StringIO(), io.StringIO()
        write_measures_csv(make_measures(), buf1)
        write_measures_csv(list(reversed(make_measures())), buf2)
        assert buf1.getvalue() == buf2.getvalue()
