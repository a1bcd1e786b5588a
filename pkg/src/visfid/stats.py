"""Response cleaning, correlations, fixed-effects ANOVA, preference rates,
and the correlation report joining automatic measures to human measures."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np
from scipy.special import betainc

from .predict import MEASURE_NAMES, PairMeasures, PreferencePrediction

SIGNIFICANT_P = 0.05
MARGINAL_P = 0.1

TASKS = ("NAMING", "RATING", "PREFERENCE")
SIMP_TYPES = ("QSLIM", "VCLUST", "NONE")
SCHEMES = ("BY_PARTICIPANT", "BY_OBJECT")


class StatsError(Exception):
    pass


@dataclass(frozen=True)
class HumanResponse:
    participant: str
    object: str
    object_type: str  # "animal" | "artifact"
    simp_type: str    # QSLIM | VCLUST | NONE
    simp_level: int   # 0 | 50 | 80
    task: str         # NAMING | RATING | PREFERENCE
    value: float | str  # naming ms | rating 1-7 | choice QSLIM/VCLUST
    spoiled: bool = False
    error: bool = False

    def __post_init__(self):
        if self.task not in TASKS:
            raise StatsError(f"unknown task {self.task!r}")
        if self.simp_type not in SIMP_TYPES:
            raise StatsError(f"unknown simp_type {self.simp_type!r}")
        if (self.simp_type == "NONE") != (self.simp_level == 0):
            raise StatsError("simp_type NONE iff simp_level 0")
        if self.task == "RATING" and not (1 <= float(self.value) <= 7):
            raise StatsError(f"rating out of range: {self.value!r}")
        if self.task == "NAMING" and float(self.value) <= 0:
            raise StatsError(f"naming time must be positive: {self.value!r}")
        if self.task == "PREFERENCE" and self.value not in ("QSLIM", "VCLUST"):
            raise StatsError(f"preference choice must be QSLIM/VCLUST: {self.value!r}")


@dataclass(frozen=True)
class CorrelationRow:
    measure: str
    variable: str  # naming | rating | naming_diff | rating_diff | preference
    subset: str    # all | animal | artifact
    simp_type: str  # QSLIM | VCLUST | "" for difference/preference rows
    r: float
    n: int
    p: float

    @property
    def annotation(self) -> str:
        if self.p < SIGNIFICANT_P:
            return "**"
        if self.p < MARGINAL_P:
            return "*"
        return ""


@dataclass(frozen=True)
class AnovaRow:
    effect: str
    df_effect: int
    df_error: int
    F: float
    p: float
    scheme: str

    def __str__(self):
        return f"{self.effect}: F({self.df_effect},{self.df_error}) = {self.F:.2f}, p = {self.p:.4g}"


# ---------------------------------------------------------------------------
# tail probabilities via the regularized incomplete beta function


def t_sf_two_sided(t: float, df: int) -> float:
    """Two-sided p for a t statistic."""
    if df < 1:
        raise StatsError("t distribution needs df >= 1")
    x = df / (df + t * t)
    return float(betainc(df / 2.0, 0.5, x))


def f_sf(F: float, df1: int, df2: int) -> float:
    """Upper-tail p for an F statistic."""
    if df1 < 1 or df2 < 1:
        raise StatsError("F distribution needs positive dfs")
    if F <= 0:
        return 1.0
    return float(betainc(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * F)))


def pearson(x, y) -> tuple[float, float, int]:
    """Sample Pearson r with a two-sided t-based p-value."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(x)
    if n != len(y):
        raise StatsError("pearson inputs must have equal length")
    if n < 3:
        raise StatsError("pearson needs n >= 3")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt((dx * dx).sum())
    sy = np.sqrt((dy * dy).sum())
    if sx == 0.0 or sy == 0.0:
        raise StatsError("correlation undefined: zero variance input")
    r = float((dx * dy).sum() / (sx * sy))
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, 0.0, n
    t = r * np.sqrt((n - 2) / (1.0 - r * r))
    return r, t_sf_two_sided(float(t), n - 2), n


# ---------------------------------------------------------------------------
# naming-time cleaning


def clean_naming(responses: list[HumanResponse]):
    """Drop spoiled and error trials, then times more than 3 SD above the
    mean of what remains (one pass, long tail only)."""
    naming = [r for r in responses if r.task == "NAMING"]
    if not naming:
        raise StatsError("clean_naming needs naming responses")
    unflagged = [r for r in naming if not (r.spoiled or r.error)]
    if not unflagged:
        return [], {"input": len(naming), "flag_excluded": len(naming),
                    "outlier_excluded": 0, "kept": 0}
    times = np.array([float(r.value) for r in unflagged])
    cutoff = times.mean() + 3.0 * times.std(ddof=1) if len(times) > 1 else np.inf
    kept = [r for r in unflagged if float(r.value) <= cutoff]
    return kept, {
        "input": len(naming),
        "flag_excluded": len(naming) - len(unflagged),
        "outlier_excluded": len(unflagged) - len(kept),
        "kept": len(kept),
        "cutoff_ms": float(cutoff),
    }


# ---------------------------------------------------------------------------
# fixed-effects n-way ANOVA on a balanced, fully crossed design


def anova(cells: np.ndarray, factor_names: list[str],
          scheme: str = "BY_PARTICIPANT") -> list[AnovaRow]:
    """Sums-of-squares decomposition for main effects and interactions.

    ``cells`` has one axis per factor plus a trailing replicate axis
    (replicates = the averaged-over units, participants or objects).
    F = MS_effect / MS_error with the pooled within-cell error term.
    """
    cells = np.asarray(cells, dtype=np.float64)
    k = len(factor_names)
    if cells.ndim != k + 1:
        raise StatsError(f"cells must have {k} factor axes plus replicates")
    if not np.isfinite(cells).all():
        raise StatsError("ANOVA requires a balanced design with no missing cells")
    levels = cells.shape[:k]
    reps = cells.shape[k]
    if reps < 2:
        raise StatsError("ANOVA needs >= 2 replicates per cell")
    if min(levels) < 2:
        raise StatsError("every factor needs >= 2 levels")
    n_total = cells.size

    grand = cells.mean()
    cell_means = cells.mean(axis=k)
    ss_error = float(((cells - cell_means[..., None]) ** 2).sum())
    df_error = n_total - int(np.prod(levels))
    if df_error < 1:
        raise StatsError("no error degrees of freedom")
    ms_error = ss_error / df_error

    def marginal_mean(subset):
        axes = tuple(i for i in range(k) if i not in subset) + (k,)
        m = cells.mean(axis=axes)  # shape = levels of subset, in order
        # broadcast back to the full factor grid
        shape = [levels[i] if i in subset else 1 for i in range(k)]
        return m.reshape(shape)

    rows = []
    for size in range(1, k + 1):
        for subset in combinations(range(k), size):
            effect = np.zeros([1] * k)
            for r in range(size + 1):
                for sub in combinations(subset, r):
                    sign = (-1) ** (size - r)
                    effect = effect + sign * (marginal_mean(sub) if sub else grand)
            weight = n_total / np.prod([levels[i] for i in subset])
            ss = float(weight * (np.broadcast_to(
                effect, levels) ** 2).sum() / np.prod(
                    [levels[i] for i in range(k) if i not in subset]))
            df = int(np.prod([levels[i] - 1 for i in subset]))
            F = (ss / df) / ms_error if ms_error > 0 else 0.0
            rows.append(AnovaRow(
                effect=" x ".join(factor_names[i] for i in subset),
                df_effect=df, df_error=df_error, F=F,
                p=f_sf(F, df, df_error) if ms_error > 0 else 1.0,
                scheme=scheme,
            ))
    return rows


def anova_from_cells(cell_values: dict, factor_names: list[str],
                     scheme: str = "BY_PARTICIPANT") -> list[AnovaRow]:
    """Front-end: ``cell_values`` maps factor-level tuples to replicate lists.

    The design must be fully crossed with equal replicate counts.
    """
    k = len(factor_names)
    levels = [sorted({key[i] for key in cell_values}) for i in range(k)]
    expected = list(product(*levels))
    missing = [c for c in expected if c not in cell_values]
    if missing:
        raise StatsError(f"missing cells: {missing}")
    counts = {len(v) for v in cell_values.values()}
    if len(counts) != 1:
        raise StatsError(f"unbalanced replicate counts: {sorted(counts)}")
    reps = counts.pop()
    cells = np.empty([len(lv) for lv in levels] + [reps])
    for key, values in cell_values.items():
        idx = tuple(levels[i].index(key[i]) for i in range(k))
        cells[idx] = sorted(values)  # fixed order for determinism
    return anova(cells, list(factor_names), scheme)


_FACTOR_GETTERS = {
    "object_type": lambda r: r.object_type,
    "simp_type": lambda r: r.simp_type,
    "simp_level": lambda r: r.simp_level,
}


def aggregate_human(responses: list[HumanResponse], task: str,
                    factor_keys: list[str], scheme: str = "BY_PARTICIPANT",
                    include_unsimplified: bool = True) -> dict:
    """Cell replicate lists for ANOVA: responses averaged per unit within
    each factor cell (units = participants or objects by scheme)."""
    unit_of = (lambda r: r.participant) if scheme == "BY_PARTICIPANT" else (lambda r: r.object)
    acc: dict[tuple, dict[str, list[float]]] = {}
    for r in responses:
        if r.task != task:
            continue
        if not include_unsimplified and r.simp_level == 0:
            continue
        key = tuple(_FACTOR_GETTERS[k](r) for k in factor_keys)
        acc.setdefault(key, {}).setdefault(unit_of(r), []).append(float(r.value))
    return {
        key: [float(np.mean(v)) for _, v in sorted(units.items())]
        for key, units in acc.items()
    }


def anova_report(responses: list[HumanResponse]) -> list[AnovaRow]:
    """The study's standard analyses under both averaging schemes:

    - naming: 2-way (object type x simp level) averaged over simp type, and
      3-way (simp type x level x object type) excluding unsimplified trials
    - ratings: 3-way excluding unsimplified trials
    - preferences: 2-way (object type x simp level) on percent-Qslim

    Analyses whose design is not balanced are skipped.
    """
    rows: list[AnovaRow] = []
    naming = [r for r in responses if r.task == "NAMING"]
    cleaned = clean_naming(naming)[0] if naming else []

    def run(task_rows, task, factors, scheme, include_unsimplified, prefix):
        try:
            cells = aggregate_human(task_rows, task, factors, scheme,
                                    include_unsimplified)
            for row in anova_from_cells(cells, factors, scheme):
                rows.append(AnovaRow(f"{prefix}: {row.effect}", row.df_effect,
                                     row.df_error, row.F, row.p, scheme))
        except StatsError:
            pass  # unbalanced or degenerate design for this analysis

    for scheme in SCHEMES:
        run(cleaned, "NAMING", ["object_type", "simp_level"], scheme, True,
            "naming 2-way")
        run(cleaned, "NAMING", ["simp_type", "simp_level", "object_type"],
            scheme, False, "naming 3-way")
        run(responses, "RATING", ["simp_type", "simp_level", "object_type"],
            scheme, False, "rating 3-way")
        try:
            rates = preference_rates(responses, scheme)
            cells = {cond: sorted(units.values()) for cond, units in rates.items()}
            for row in anova_from_cells(cells, ["object_type", "simp_level"], scheme):
                rows.append(AnovaRow(f"preference 2-way: {row.effect}",
                                     row.df_effect, row.df_error, row.F, row.p,
                                     scheme))
        except StatsError:
            pass
    return rows


# ---------------------------------------------------------------------------
# preference rates


def preference_rates(responses: list[HumanResponse],
                     scheme: str = "BY_PARTICIPANT") -> dict:
    """Percent-Qslim per (object_type, simp_level) condition.

    Returns {condition: {unit: percent}} where units are participants or
    objects depending on the scheme.
    """
    prefs = [r for r in responses if r.task == "PREFERENCE"]
    if not prefs:
        raise StatsError("no preference responses")
    unit_of = (lambda r: r.participant) if scheme == "BY_PARTICIPANT" else (lambda r: r.object)
    tallies: dict[tuple[str, int], dict[str, list[int]]] = {}
    for r in prefs:
        cond = (r.object_type, r.simp_level)
        tallies.setdefault(cond, {}).setdefault(unit_of(r), []).append(
            1 if r.value == "QSLIM" else 0)
    return {
        cond: {unit: 100.0 * sum(v) / len(v) for unit, v in sorted(units.items())}
        for cond, units in sorted(tallies.items())
    }


# ---------------------------------------------------------------------------
# human.csv I/O

HUMAN_FIELDS = ["participant", "object", "object_type", "simp_type",
                "simp_level", "task", "value", "spoiled", "error"]


def write_human_csv(responses: list[HumanResponse], path) -> None:
    with open(os.fspath(path), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=HUMAN_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in responses:
            w.writerow({
                "participant": r.participant, "object": r.object,
                "object_type": r.object_type, "simp_type": r.simp_type,
                "simp_level": r.simp_level, "task": r.task, "value": r.value,
                "spoiled": int(r.spoiled), "error": int(r.error),
            })


def read_human_csv(path) -> list[HumanResponse]:
    out = []
    with open(os.fspath(path), newline="") as fh:
        for row in csv.DictReader(fh):
            task = row["task"]
            value = row["value"] if task == "PREFERENCE" else float(row["value"])
            out.append(HumanResponse(
                participant=row["participant"], object=row["object"],
                object_type=row["object_type"], simp_type=row["simp_type"],
                simp_level=int(row["simp_level"]), task=task, value=value,
                spoiled=bool(int(row.get("spoiled") or 0)),
                error=bool(int(row.get("error") or 0)),
            ))
    return out


# ---------------------------------------------------------------------------
# correlation report

_PAIR_OF = {("QSLIM", 50): "s,q5", ("QSLIM", 80): "s,q8",
            ("VCLUST", 50): "s,v5", ("VCLUST", 80): "s,v8"}
SUBSETS = ("all", "animal", "artifact")


def _mean_by(rows):
    acc: dict = {}
    for k, v in rows:
        acc.setdefault(k, []).append(v)
    return {k: float(np.mean(v)) for k, v in acc.items()}


def human_summaries(responses: list[HumanResponse]):
    """Object-level human measures keyed for joining with PairMeasures.

    ratings: (object, pair) -> mean rating over participants
    naming:  (object, pair) -> mean cleaned naming time of the simplified member
    preference: (object, level) -> percent of participants choosing Qslim
    object_types: object -> type
    """
    object_types = {r.object: r.object_type for r in responses}
    ratings = _mean_by(
        ((r.object, _PAIR_OF[(r.simp_type, r.simp_level)]), float(r.value))
        for r in responses if r.task == "RATING" and r.simp_level != 0)
    naming_all = [r for r in responses if r.task == "NAMING"]
    naming = {}
    if naming_all:
        cleaned, _ = clean_naming(naming_all)
        naming = _mean_by(
            ((r.object, _PAIR_OF[(r.simp_type, r.simp_level)]), float(r.value))
            for r in cleaned if r.simp_level != 0)
    preference = {}
    for r in responses:
        if r.task == "PREFERENCE":
            preference.setdefault((r.object, r.simp_level), []).append(
                1 if r.value == "QSLIM" else 0)
    preference = {k: 100.0 * sum(v) / len(v) for k, v in preference.items()}
    return {"ratings": ratings, "naming": naming, "preference": preference,
            "object_types": object_types}


def correlate_report(measures: list[PairMeasures],
                     predictions: list[PreferencePrediction],
                     responses: list[HumanResponse]) -> list[CorrelationRow]:
    """Correlations of automatic measures with human measures.

    Direct rows pair each measure with ratings and naming times within a
    simplification type (both levels pooled, two points per object).
    Difference rows pair the p5/p8 predictors with preference rates and
    with naming-time and rating differences across simplification type.
    Joins that fail are reported together in one error.
    """
    summaries = human_summaries(responses)
    pm_by_key = {(m.object, m.pair): m for m in measures}
    pred_by_key = {(p.object, p.measure): p for p in predictions}
    otype = {m.object: m.object_type for m in measures}
    unmatched = sorted(
        {k[0] for k in summaries["ratings"]} | {k[0] for k in summaries["naming"]}
        | {k[0] for k in summaries["preference"]}) if measures else []
    unmatched = [o for o in unmatched if o not in otype]
    if unmatched:
        raise StatsError(f"human responses for unknown objects: {unmatched}")

    def in_subset(obj, subset):
        return subset == "all" or otype[obj] == subset

    rows = []
    # direct rows (Table-5 layout)
    for variable in ("naming", "rating"):
        human = summaries["naming" if variable == "naming" else "ratings"]
        for measure in MEASURE_NAMES:
            for subset in SUBSETS:
                for simp_type in ("QSLIM", "VCLUST"):
                    xs, ys = [], []
                    for (obj, pair), hval in sorted(human.items()):
                        stype = "QSLIM" if pair in ("s,q5", "s,q8") else "VCLUST"
                        if stype != simp_type or not in_subset(obj, subset):
                            continue
                        pm = pm_by_key.get((obj, pair))
                        if pm is None:
                            raise StatsError(f"no measures for {(obj, pair)}")
                        xs.append(pm.value(measure))
                        ys.append(hval)
                    if len(xs) >= 3:
                        r, p, n = pearson(xs, ys)
                        rows.append(CorrelationRow(measure, variable, subset,
                                                   simp_type, r, n, p))
    # difference rows (Table-7 layout)
    diff_sources = {
        "preference": summaries["preference"],
        "naming_diff": _pair_differences(summaries["naming"]),
        "rating_diff": _pair_differences(summaries["ratings"]),
    }
    for variable, human in diff_sources.items():
        for measure in MEASURE_NAMES:
            for subset in SUBSETS:
                xs, ys = [], []
                for (obj, level), hval in sorted(human.items()):
                    if not in_subset(obj, subset):
                        continue
                    pred = pred_by_key.get((obj, measure))
                    if pred is None:
                        raise StatsError(f"no prediction for {(obj, measure)}")
                    xs.append(pred.p5 if level == 50 else pred.p8)
                    ys.append(hval)
                if len(xs) >= 3:
                    r, p, n = pearson(xs, ys)
                    rows.append(CorrelationRow(measure, variable, subset, "", r, n, p))
    return rows


def _pair_differences(human_by_pair):
    """(object, level) -> value(q) - value(v) for per-pair human means."""
    out = {}
    for level, (qpair, vpair) in ((50, ("s,q5", "s,v5")), (80, ("s,q8", "s,v8"))):
        for (obj, pair), qval in human_by_pair.items():
            if pair != qpair:
                continue
            vval = human_by_pair.get((obj, vpair))
            if vval is not None:
                out[(obj, level)] = qval - vval
    return out


# ---------------------------------------------------------------------------
# report rendering

CORRELATION_FIELDS = ["measure", "variable", "subset", "simp_type", "r", "n", "p"]


def write_correlations_csv(rows: list[CorrelationRow], path) -> None:
    with open(os.fspath(path), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CORRELATION_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({"measure": row.measure, "variable": row.variable,
                        "subset": row.subset, "simp_type": row.simp_type,
                        "r": f"{row.r:.9g}", "n": row.n, "p": f"{row.p:.9g}"})


def format_correlation_table(rows: list[CorrelationRow]) -> str:
    """Text tables (direct and difference panels), one line per measure.

    ``**`` marks p < 0.05 and ``*`` marks p < 0.1.
    """
    direct = [r for r in rows if r.variable in ("naming", "rating")]
    diffs = [r for r in rows if r.variable not in ("naming", "rating")]
    out = []

    def fmt(r):
        return f"{r.r:+.2f}{r.annotation}".rjust(8)

    if direct:
        cols = [(v, s, st) for v in ("naming", "rating") for s in SUBSETS
                for st in ("QSLIM", "VCLUST")]
        out.append("Correlations of naming times and ratings to automatic measures")
        header = "measure".ljust(10) + "".join(
            f"{v[:4]}/{s[:4]}/{st[:2]}".rjust(16) for v, s, st in cols)
        out.append(header)
        for m in MEASURE_NAMES:
            by = {(r.variable, r.subset, r.simp_type): r for r in direct if r.measure == m}
            out.append(m.ljust(10) + "".join(
                (fmt(by[c]).rjust(16) if c in by else " " * 16) for c in cols))
        out.append("")
    if diffs:
        cols = [(v, s) for v in ("naming_diff", "rating_diff", "preference")
                for s in SUBSETS]
        out.append("Correlations of preferences and measure differences")
        out.append("measure".ljust(10) + "".join(
            f"{v[:6]}/{s[:4]}".rjust(16) for v, s in cols))
        for m in MEASURE_NAMES:
            by = {(r.variable, r.subset): r for r in diffs if r.measure == m}
            out.append(m.ljust(10) + "".join(
                (fmt(by[c]).rjust(16) if c in by else " " * 16) for c in cols))
        out.append("")
    out.append("** p < 0.05, * p < 0.1")
    return "\n".join(out) + "\n"
