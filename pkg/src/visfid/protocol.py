"""Trial sequencing, counterbalancing, and session persistence for the
naming / rating / preference tasks."""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .corpus import Corpus
from .stats import HumanResponse

SCHEMA_VERSION = "visfid-protocol/1"

FIXATION_MS = 750
INTER_TRIAL_DELAY_MS = 250

TASK_ORDER = ("NAMING", "RATING", "PREFERENCE")
PRACTICE_COUNTS = {"NAMING": 8, "RATING": 4, "PREFERENCE": 4}

# six experimental conditions of the naming task, in rotation order
NAMING_CONDITIONS = (
    ("QSLIM", 0), ("QSLIM", 50), ("QSLIM", 80),
    ("VCLUST", 0), ("VCLUST", 50), ("VCLUST", 80),
)

_VERSION_OF = {("QSLIM", 0): "s", ("VCLUST", 0): "s",
               ("QSLIM", 50): "q5", ("QSLIM", 80): "q8",
               ("VCLUST", 50): "v5", ("VCLUST", 80): "v8"}


class ProtocolError(Exception):
    pass


@dataclass(frozen=True)
class Trial:
    trial_id: str
    task: str
    practice: bool
    object: str
    object_type: str
    layout: str              # single | pair
    versions: tuple          # (version,) or (left_version, right_version)
    simp_type: str           # QSLIM | VCLUST | NONE (naming/rating trials)
    simp_level: int
    condition: str = ""      # raw counterbalancing label, e.g. "QSLIM-0"
    fixation_ms: int = FIXATION_MS
    delay_ms: int = INTER_TRIAL_DELAY_MS

    def stimulus_names(self):
        if self.layout == "single":
            return [f"{self.object}_{self.versions[0]}"]
        return [f"{self.object}_pair_{self.versions[0]}_{self.versions[1]}"]

    def to_payload(self):
        d = asdict(self)
        d["versions"] = list(self.versions)
        d["stimuli"] = self.stimulus_names()
        return d


@dataclass(frozen=True)
class TrialPlan:
    task: str
    participant_index: int
    seed: int
    trials: tuple[Trial, ...]

    @property
    def real_trials(self):
        return [t for t in self.trials if not t.practice]


def _check_corpus(corpus: Corpus):
    n = len(corpus.entries)
    animals = [e for e in corpus.entries if e.object_type == "animal"]
    artifacts = [e for e in corpus.entries if e.object_type == "artifact"]
    if n < 6 or n % 6 != 0 or len(animals) != len(artifacts):
        raise ProtocolError(
            f"corpus not partitionable: {n} objects "
            f"({len(animals)} animal / {len(artifacts)} artifact); "
            "need a multiple of 6 with balanced types")
    return animals, artifacts


def naming_groups(corpus: Corpus) -> list[list]:
    """Six fixed stimulus groups with types balanced round-robin."""
    animals, artifacts = _check_corpus(corpus)
    groups: list[list] = [[] for _ in range(6)]
    for i, e in enumerate(sorted(animals, key=lambda e: e.name)):
        groups[i % 6].append(e)
    for i, e in enumerate(sorted(artifacts, key=lambda e: e.name)):
        groups[(i + 3) % 6].append(e)  # offset keeps group sizes equal
    return groups


def build_naming_plan(participant_idx: int, corpus: Corpus, seed: int = 0) -> TrialPlan:
    """One trial per object; group g sees condition (g + participant) mod 6,
    so six consecutive participants cover every (stimulus, condition) pair."""
    if participant_idx < 0:
        raise ProtocolError("participant index must be >= 0")
    groups = naming_groups(corpus)
    trials = []
    for g, members in enumerate(groups):
        simp_type, level = NAMING_CONDITIONS[(g + participant_idx) % 6]
        for e in members:
            trials.append((e, simp_type, level))
    rng = np.random.default_rng((seed, participant_idx, 0))
    order = rng.permutation(len(trials))
    real = []
    for rank, idx in enumerate(order):
        e, simp_type, level = trials[idx]
        real.append(Trial(
            trial_id=f"naming-{rank:03d}", task="NAMING", practice=False,
            object=e.name, object_type=e.object_type, layout="single",
            versions=(_VERSION_OF[(simp_type, level)],),
            simp_type=simp_type if level else "NONE", simp_level=level,
            condition=f"{simp_type}-{level}"))
    practice = []
    for k in range(PRACTICE_COUNTS["NAMING"]):
        e, simp_type, level = trials[int(order[k % len(order)])]
        practice.append(Trial(
            trial_id=f"naming-practice-{k:02d}", task="NAMING", practice=True,
            object=e.name, object_type=e.object_type, layout="single",
            versions=(_VERSION_OF[(simp_type, level)],),
            simp_type=simp_type if level else "NONE", simp_level=level))
    return TrialPlan("NAMING", participant_idx, seed, tuple(practice + real))


_RATING_PAIRS = (("QSLIM", 50, "q5"), ("QSLIM", 80, "q8"),
                 ("VCLUST", 50, "v5"), ("VCLUST", 80, "v8"))


def build_rating_plan(participant_idx: int, corpus: Corpus, seed: int = 0) -> TrialPlan:
    """Every (object, pair) once, seed-shuffled, standard on the left."""
    combos = [(e, st, lv, ver) for e in corpus.entries for st, lv, ver in _RATING_PAIRS]
    rng = np.random.default_rng((seed, participant_idx, 1))
    order = rng.permutation(len(combos))
    real = []
    for rank, idx in enumerate(order):
        e, simp_type, level, ver = combos[idx]
        real.append(Trial(
            trial_id=f"rating-{rank:03d}", task="RATING", practice=False,
            object=e.name, object_type=e.object_type, layout="pair",
            versions=("s", ver), simp_type=simp_type, simp_level=level))
    practice = []
    for k in range(PRACTICE_COUNTS["RATING"]):
        e, simp_type, level, ver = combos[int(order[k])]
        practice.append(Trial(
            trial_id=f"rating-practice-{k:02d}", task="RATING", practice=True,
            object=e.name, object_type=e.object_type, layout="pair",
            versions=("s", ver), simp_type=simp_type, simp_level=level))
    return TrialPlan("RATING", participant_idx, seed, tuple(practice + real))


def build_preference_plan(participant_idx: int, corpus: Corpus, seed: int = 0) -> TrialPlan:
    """Both simplification types compared at the same level; the Qslim member
    appears on the left in exactly half the trials, evenly distributed."""
    combos = [(e, lv) for e in corpus.entries for lv in (50, 80)]
    rng = np.random.default_rng((seed, participant_idx, 2))
    order = rng.permutation(len(combos))
    real = []
    for rank, idx in enumerate(order):
        e, level = combos[idx]
        qver, vver = ("q5", "v5") if level == 50 else ("q8", "v8")
        qslim_left = rank % 2 == 0  # even spread through the trial sequence
        versions = (qver, vver) if qslim_left else (vver, qver)
        real.append(Trial(
            trial_id=f"preference-{rank:03d}", task="PREFERENCE", practice=False,
            object=e.name, object_type=e.object_type, layout="pair",
            versions=versions, simp_type="QSLIM" if qslim_left else "VCLUST",
            simp_level=level))
    practice = []
    for k in range(PRACTICE_COUNTS["PREFERENCE"]):
        e, level = combos[int(order[k])]
        qver, vver = ("q5", "v5") if level == 50 else ("q8", "v8")
        practice.append(Trial(
            trial_id=f"preference-practice-{k:02d}", task="PREFERENCE", practice=True,
            object=e.name, object_type=e.object_type, layout="pair",
            versions=(qver, vver) if k % 2 == 0 else (vver, qver),
            simp_type="QSLIM" if k % 2 == 0 else "VCLUST", simp_level=level))
    return TrialPlan("PREFERENCE", participant_idx, seed, tuple(practice + real))


_PLAN_BUILDERS = {"NAMING": build_naming_plan, "RATING": build_rating_plan,
                  "PREFERENCE": build_preference_plan}


def build_plans(participant_idx: int, corpus: Corpus, seed: int = 0):
    return {task: _PLAN_BUILDERS[task](participant_idx, corpus, seed)
            for task in TASK_ORDER}


# ---------------------------------------------------------------------------
# session state and append-only persistence


@dataclass
class SessionState:
    session_id: str
    participant_index: int
    seed: int
    plans: dict = field(repr=False, default=None)
    task_index: int = 0
    trial_index: int = 0
    responses: list = field(default_factory=list)  # (trial_id, payload, server_ts)

    @property
    def current_task(self):
        if self.task_index >= len(TASK_ORDER):
            return None
        return TASK_ORDER[self.task_index]

    def current_trial(self):
        task = self.current_task
        if task is None:
            return None
        return self.plans[task].trials[self.trial_index]

    @property
    def complete(self):
        return self.current_task is None


def _validate_payload(trial: Trial, payload: dict):
    if not isinstance(payload, dict):
        raise ProtocolError("response payload must be an object")
    if trial.task == "NAMING":
        if not isinstance(payload.get("name"), str) or not payload["name"].strip():
            raise ProtocolError("naming response needs a non-empty 'name'")
        lat = payload.get("latency_ms")
        if not isinstance(lat, (int, float)) or lat <= 0:
            raise ProtocolError("naming response needs a positive 'latency_ms'")
    elif trial.task == "RATING":
        rating = payload.get("rating")
        if not isinstance(rating, int) or not (1 <= rating <= 7):
            raise ProtocolError(f"rating must be an integer in [1, 7], got {rating!r}")
    elif trial.task == "PREFERENCE":
        if payload.get("choice") not in ("left", "right"):
            raise ProtocolError("preference response needs choice 'left' or 'right'")


class SessionStore:
    """Append-only line-delimited session records under a directory.

    One ``<session_id>.jsonl`` file per session: a header line followed by
    one line per accepted response.  Stored responses are never mutated.
    """

    def __init__(self, corpus: Corpus, store_dir: str | os.PathLike):
        self.corpus = corpus
        self.store_dir = os.fspath(store_dir)
        os.makedirs(self.store_dir, exist_ok=True)
        self._sessions: dict[str, SessionState] = {}
        self._load_existing()

    def _path(self, session_id):
        return os.path.join(self.store_dir, f"{session_id}.jsonl")

    def _load_existing(self):
        for fn in sorted(os.listdir(self.store_dir)):
            if not fn.endswith(".jsonl"):
                continue
            with open(os.path.join(self.store_dir, fn)) as fh:
                lines = [json.loads(line) for line in fh if line.strip()]
            if not lines or lines[0].get("kind") != "session":
                continue
            head = lines[0]
            state = SessionState(
                session_id=head["session_id"],
                participant_index=head["participant_index"], seed=head["seed"],
                plans=build_plans(head["participant_index"], self.corpus, head["seed"]))
            for rec in lines[1:]:
                self._apply(state, rec["trial_id"], rec["payload"], rec["server_ts"],
                            persist=False)
            self._sessions[state.session_id] = state

    def create_session(self, participant_index: int, seed: int = 0) -> SessionState:
        session_id = f"p{participant_index:03d}-s{seed}-{len(self._sessions):03d}"
        if session_id in self._sessions:
            raise ProtocolError(f"session {session_id} already exists")
        state = SessionState(session_id=session_id,
                             participant_index=participant_index, seed=seed,
                             plans=build_plans(participant_index, self.corpus, seed))
        with open(self._path(session_id), "w") as fh:
            fh.write(json.dumps({
                "kind": "session", "schema": SCHEMA_VERSION,
                "session_id": session_id, "participant_index": participant_index,
                "seed": seed, "created_ts": time.time(),
                "timing_deviation": "typed-name onset replaces voice-key timing",
            }) + "\n")
        self._sessions[session_id] = state
        return state

    def get(self, session_id: str) -> SessionState:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise ProtocolError(f"unknown session {session_id!r}") from None

    def sessions(self):
        return list(self._sessions.values())

    def _apply(self, state: SessionState, trial_id: str, payload: dict,
               server_ts: float, persist: bool):
        trial = state.current_trial()
        if trial is None:
            raise ProtocolError("session already complete")
        if any(t == trial_id for t, _, _ in state.responses):
            raise ProtocolError(f"duplicate submission for trial {trial_id}")
        if trial_id != trial.trial_id:
            raise ProtocolError(
                f"out-of-order trial: expected {trial.trial_id}, got {trial_id}")
        _validate_payload(trial, payload)
        if persist:
            with open(self._path(state.session_id), "a") as fh:
                fh.write(json.dumps({"kind": "response", "trial_id": trial_id,
                                     "payload": payload, "server_ts": server_ts}) + "\n")
        state.responses.append((trial_id, payload, server_ts))
        state.trial_index += 1
        task = state.current_task
        if state.trial_index >= len(state.plans[task].trials):
            state.task_index += 1
            state.trial_index = 0

    def record_response(self, session_id: str, trial_id: str, payload: dict) -> SessionState:
        state = self.get(session_id)
        self._apply(state, trial_id, payload, time.time(), persist=True)
        return state

    def export_responses(self, session_id: str | None = None) -> list[HumanResponse]:
        """Flatten stored responses (practice excluded) to HumanResponse rows."""
        states = ([self.get(session_id)] if session_id is not None
                  else sorted(self._sessions.values(), key=lambda s: s.session_id))
        rows = []
        for state in states:
            trial_by_id = {t.trial_id: t for plan in state.plans.values()
                           for t in plan.trials}
            participant = f"P{state.participant_index:03d}"
            for trial_id, payload, _ts in state.responses:
                trial = trial_by_id[trial_id]
                if trial.practice:
                    continue
                if trial.task == "NAMING":
                    correct = payload["name"].strip().lower() == trial.object.lower()
                    rows.append(HumanResponse(
                        participant=participant, object=trial.object,
                        object_type=trial.object_type, simp_type=trial.simp_type,
                        simp_level=trial.simp_level, task="NAMING",
                        value=float(payload["latency_ms"]),
                        spoiled=bool(payload.get("spoiled", False)),
                        error=not correct))
                elif trial.task == "RATING":
                    rows.append(HumanResponse(
                        participant=participant, object=trial.object,
                        object_type=trial.object_type, simp_type=trial.simp_type,
                        simp_level=trial.simp_level, task="RATING",
                        value=float(payload["rating"])))
                else:
                    chose_left = payload["choice"] == "left"
                    qslim_left = trial.versions[0].startswith("q")
                    chosen = "QSLIM" if chose_left == qslim_left else "VCLUST"
                    rows.append(HumanResponse(
                        participant=participant, object=trial.object,
                        object_type=trial.object_type, simp_type=chosen,
                        simp_level=trial.simp_level, task="PREFERENCE",
                        value=chosen))
        return rows
