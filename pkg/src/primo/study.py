"""Experiment apparatus: counterbalanced schedules, trial generation, the
clip gate, deterministic event-log replay with timing metrics, and the two
awareness probes (Q1 location, Q2 layout).

Event logs are JSON lines, one ``{"t": <int ms>, "e": <name>, "data": {...}}``
record per line with that exact field order, so files are byte-stable golden
artifacts.  A log written by any producer (the browser viewer, the oracle
agent, a human session) is evaluated by exactly one replay implementation,
:func:`replay_events`.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import (
    UNIT_CUBE,
    Plane1D,
    Ray,
    Similarity,
    Vec3,
    locate_point,
    octant_aabb,
    path_to_aabb,
)
from .navigation import (
    AimResult,
    Display,
    NavConfig,
    NavState,
    Style,
    aim,
    ascend,
    confirm,
    new_session,
    reveal_defect,
    set_clip_height,
    tick,
)
from .object_model import (
    DefectRegion,
    LatticeSpec,
    TriangleMesh,
    generate_lattice,
    place_defects,
)

#: Events a producer may write; gate/reveal/reject are emitted by the replay
#: harness itself and are skipped when present in input.
INPUT_EVENTS = ("start", "aim", "confirm", "ascend", "clip", "tick", "answer")
HARNESS_EVENTS = ("gate", "reveal", "reject")

#: Object used for seed-generated trials: geometry is condition-independent,
#: only the defect layout varies with the seed.
TRIAL_LATTICE = LatticeSpec(cells_per_axis=4, strut_thickness=0.05)
DEFECTS_PER_OBJECT = 4


class Measure(str, enum.Enum):
    TIME = "time"
    AWARENESS = "awareness"


class Phase(str, enum.Enum):
    TRAINING = "training"
    MAIN = "main"


@dataclass(frozen=True)
class Condition:
    display: Display
    style: Style


@dataclass(frozen=True)
class ParticipantSchedule:
    participant: int
    condition_order: Tuple[Condition, Condition, Condition, Condition]


@dataclass(frozen=True)
class TrialSpec:
    object_seed: int
    condition: Condition
    defect_index: int
    measure: Measure
    phase: Phase


@dataclass(frozen=True)
class Event:
    t: int
    e: str
    data: Dict


@dataclass(frozen=True)
class TrialMetrics:
    clipping_ms: int
    navigation_ms: int
    total_ms: int


@dataclass(frozen=True)
class Question:
    kind: str  # "q1_location" | "q2_object"
    choices: Tuple[Tuple[Vec3, ...], ...]
    correct_index: int


@dataclass(frozen=True)
class ReplayOutcome:
    metrics: Optional[TrialMetrics]
    completed: bool
    final_state: NavState
    rejections: int
    gate_t: Optional[int]
    reveal_t: Optional[int]
    annotated: Tuple[Event, ...]
    answers: Tuple[Event, ...]


class ReplayError(ValueError):
    """Malformed event log; carries the 0-based entry index."""

    def __init__(self, index: int, message: str):
        self.index = index
        super().__init__(f"event {index}: {message}")


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from the given parts (sha-256 of the joined text),
    so any single trial can be regenerated in isolation."""
    text = ":".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


# ---------------------------------------------------------------------------
# schedules and trials
# ---------------------------------------------------------------------------

def build_schedule(n_participants: int) -> List[ParticipantSchedule]:
    """Counterbalanced condition orders, display modes blocked together.

    Participant index modulo 4 selects the order group: which display mode
    comes first and which style comes first inside each display block.
    """
    if n_participants <= 0 or n_participants % 4 != 0:
        raise ValueError("participant count must be a positive multiple of 4")
    out = []
    for participant in range(n_participants):
        group = participant % 4
        first_display = Display.SELECTION if group < 2 else Display.EVERYTHING
        second_display = Display.EVERYTHING if group < 2 else Display.SELECTION
        first_style = Style.STRUCTURED if group % 2 == 0 else Style.UNSTRUCTURED
        second_style = Style.UNSTRUCTURED if group % 2 == 0 else Style.STRUCTURED
        order = (
            Condition(first_display, first_style),
            Condition(first_display, second_style),
            Condition(second_display, first_style),
            Condition(second_display, second_style),
        )
        out.append(ParticipantSchedule(participant, order))
    return out


def build_trials(schedule: ParticipantSchedule, master_seed: int) -> List[TrialSpec]:
    """The 80 trials of one participant: per condition, one training object
    (2 timed defects, 2 awareness defects) then two timed objects and two
    awareness objects with 4 defects each."""
    trials = []
    for position, condition in enumerate(schedule.condition_order):
        def seed_for(obj_ordinal: int) -> int:
            return derive_seed(
                master_seed,
                schedule.participant,
                condition.display.value,
                condition.style.value,
                position,
                obj_ordinal,
            )

        training_seed = seed_for(0)
        for defect_index in range(DEFECTS_PER_OBJECT):
            measure = Measure.TIME if defect_index < 2 else Measure.AWARENESS
            trials.append(
                TrialSpec(training_seed, condition, defect_index, measure, Phase.TRAINING)
            )
        for obj_ordinal, measure in ((1, Measure.TIME), (2, Measure.TIME),
                                     (3, Measure.AWARENESS), (4, Measure.AWARENESS)):
            seed = seed_for(obj_ordinal)
            for defect_index in range(DEFECTS_PER_OBJECT):
                trials.append(TrialSpec(seed, condition, defect_index, measure, Phase.MAIN))
    return trials


def object_for_trial(trial: TrialSpec, config: NavConfig) -> Tuple[TriangleMesh, List[DefectRegion]]:
    """Deterministic scene content for a trial: the standard lattice plus a
    seed-placed defect layout at the configured depth."""
    mesh = generate_lattice(TRIAL_LATTICE)
    defects = place_defects(trial.object_seed, config.max_depth, DEFECTS_PER_OBJECT)
    return mesh, defects


# ---------------------------------------------------------------------------
# gating and replay
# ---------------------------------------------------------------------------

def clip_gate(clip: Plane1D, defect: DefectRegion, transform: Similarity) -> bool:
    """True when the plane cuts the defect sphere in world space (boundary
    inclusive): |h - world_center_y| <= world_radius."""
    world_center = transform.apply(defect.center)
    world_radius = transform.scale * defect.radius
    return abs(clip.height - world_center.y) <= world_radius


def event_to_json(event: Event) -> str:
    return json.dumps({"t": event.t, "e": event.e, "data": event.data}, separators=(",", ":"))


def serialize_events(events: Sequence[Event]) -> str:
    return "".join(event_to_json(e) + "\n" for e in events)


def parse_event_log(text: str) -> List[Event]:
    """Parse JSONL into events, validating shape (not semantics)."""
    out = []
    for index, line in enumerate(s for s in text.splitlines() if s.strip()):
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as err:
            raise ReplayError(index, f"bad JSON: {err.msg}") from None
        if not isinstance(raw, dict) or set(raw) != {"t", "e", "data"}:
            raise ReplayError(index, "record must have exactly t, e, data")
        t, e, data = raw["t"], raw["e"], raw["data"]
        if not isinstance(t, int) or isinstance(t, bool):
            raise ReplayError(index, "t must be an integer millisecond count")
        if e not in INPUT_EVENTS and e not in HARNESS_EVENTS:
            raise ReplayError(index, f"unknown event {e!r}")
        if not isinstance(data, dict):
            raise ReplayError(index, "data must be an object")
        out.append(Event(t, e, data))
    return out


def _require_numbers(data: Dict, keys: Sequence[str], index: int) -> List[float]:
    vals = []
    for k in keys:
        v = data.get(k)
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            raise ReplayError(index, f"field {k!r} must be a finite number")
        vals.append(float(v))
    return vals


def replay_events(
    mesh: TriangleMesh,
    defects: Sequence[DefectRegion],
    target: DefectRegion,
    events: Sequence[Event],
    config: NavConfig,
) -> ReplayOutcome:
    """Deterministically re-run a logged session against the gating rules.

    The clip gate latches at the first event after which the plane cuts the
    target sphere; confirms before that are rejected.  The trial completes
    at the first event after which the target defect is revealed (max depth
    reached with its sphere inside the focus).  Harness events found in the
    input are skipped, so replaying an annotated log reproduces it.
    """
    if not events:
        raise ReplayError(0, "empty log")
    if events[0].e != "start":
        raise ReplayError(0, "log must begin with a start event")

    state = new_session(config, mesh, defects)
    t0 = events[0].t
    prev_t = t0
    annotated: List[Event] = [events[0]]
    answers: List[Event] = []
    gate_t: Optional[int] = None
    reveal_t: Optional[int] = None
    rejections = 0

    def bookkeeping(t: int):
        nonlocal gate_t, reveal_t
        if gate_t is None and clip_gate(state.clip, target, state.transform):
            gate_t = t
            annotated.append(Event(t, "gate", {}))
        if gate_t is not None and reveal_t is None:
            rid = reveal_defect(state, defects)
            if rid == target.id:
                reveal_t = t
                annotated.append(Event(t, "reveal", {"id": rid}))

    def reject(t: int, reason: str):
        nonlocal rejections
        rejections += 1
        annotated.append(Event(t, "reject", {"reason": reason}))

    bookkeeping(t0)

    for index, ev in enumerate(events[1:], start=1):
        if ev.t < prev_t:
            raise ReplayError(index, "timestamps must be non-decreasing")
        prev_t = ev.t
        if ev.e in HARNESS_EVENTS:
            continue
        if ev.e == "start":
            raise ReplayError(index, "duplicate start event")

        if ev.e == "clip":
            (h,) = _require_numbers(ev.data, ("h",), index)
            state = set_clip_height(state, h)
            annotated.append(ev)
        elif ev.e == "tick":
            (dt,) = _require_numbers(ev.data, ("dt_ms",), index)
            if dt < 0:
                raise ReplayError(index, "dt_ms must be non-negative")
            state = tick(state, dt)
            annotated.append(ev)
        elif ev.e == "aim":
            ox, oy, oz, dx, dy, dz = _require_numbers(
                ev.data, ("ox", "oy", "oz", "dx", "dy", "dz"), index
            )
            if dx == 0.0 and dy == 0.0 and dz == 0.0:
                raise ReplayError(index, "aim direction must be nonzero")
            annotated.append(ev)
            if state.animation is not None:
                reject(ev.t, "animating")
            else:
                state, result = aim(state, Ray(Vec3(ox, oy, oz), Vec3(dx, dy, dz)))
                if not result.valid:
                    reject(ev.t, "miss")
        elif ev.e == "confirm":
            annotated.append(ev)
            if state.animation is not None:
                reject(ev.t, "animating")
            elif gate_t is None:
                reject(ev.t, "gate")
            else:
                state, accepted = confirm(state)
                if not accepted:
                    reject(ev.t, "invalid")
        elif ev.e == "ascend":
            annotated.append(ev)
            if state.animation is not None:
                reject(ev.t, "animating")
            else:
                state, accepted = ascend(state)
                if not accepted:
                    reject(ev.t, "root")
        elif ev.e == "answer":
            if not isinstance(ev.data.get("kind"), str):
                raise ReplayError(index, "answer needs a kind")
            choice = ev.data.get("choice")
            if not isinstance(choice, int) or isinstance(choice, bool):
                raise ReplayError(index, "answer choice must be an integer")
            annotated.append(ev)
            answers.append(ev)
        else:  # pragma: no cover - parse_event_log filters unknown names
            raise ReplayError(index, f"unknown event {ev.e!r}")

        bookkeeping(ev.t)

    metrics = None
    if reveal_t is not None:
        metrics = TrialMetrics(
            clipping_ms=gate_t - t0,
            navigation_ms=reveal_t - gate_t,
            total_ms=reveal_t - t0,
        )
    return ReplayOutcome(
        metrics=metrics,
        completed=reveal_t is not None,
        final_state=state,
        rejections=rejections,
        gate_t=gate_t,
        reveal_t=reveal_t,
        annotated=tuple(annotated),
        answers=tuple(answers),
    )


def run_trial(trial: TrialSpec, events: Sequence[Event], config: NavConfig) -> ReplayOutcome:
    """Replay one trial of the study: scene content is derived from the
    trial's seed, the target is its defect index."""
    mesh, defects = object_for_trial(trial, config)
    return replay_events(mesh, defects, defects[trial.defect_index], events, config)


# ---------------------------------------------------------------------------
# the oracle agent
# ---------------------------------------------------------------------------

def oracle_agent_log(
    mesh: TriangleMesh,
    defects: Sequence[DefectRegion],
    target: DefectRegion,
    config: NavConfig,
) -> List[Event]:
    """Event log of an ideal operator.

    The agent drops the clip plane exactly onto the target's center height
    (satisfying the gate with zero slack), then descends to max depth.
    STRUCTURED aims once per level at the child octant on the target's
    path; UNSTRUCTURED aims once, straight down through the clip cap of the
    target sphere, and rides the retained cursor down with bare confirms.
    Every descent is followed by a tick that completes the animation.
    """
    state = new_session(config, mesh, defects)
    events: List[Event] = [Event(0, "start", {})]
    t = 700
    h = target.center.y  # identity transform at depth 0: world y = object y
    events.append(Event(t, "clip", {"h": h}))
    state = set_clip_height(state, h)

    def emit_aim(ray: Ray, when: int):
        nonlocal state
        state, result = aim(state, ray)
        if not result.valid:
            raise RuntimeError("oracle aim missed; scene violates its own invariants")
        events.append(
            Event(
                when,
                "aim",
                {
                    "ox": ray.origin.x, "oy": ray.origin.y, "oz": ray.origin.z,
                    "dx": ray.direction.x, "dy": ray.direction.y, "dz": ray.direction.z,
                },
            )
        )

    down = Vec3(0.0, -1.0, 0.0)
    if config.style is Style.UNSTRUCTURED:
        t += 300
        emit_aim(Ray(Vec3(target.center.x, 2.0, target.center.z), down), t)

    for level in range(config.max_depth):
        t += 300
        if config.style is Style.STRUCTURED:
            child_obj = octant_aabb(state.focus, target.cell_path[level])
            origin = state.transform.apply(child_obj.center)
            emit_aim(Ray(origin, down), t)
            t += 300
        events.append(Event(t, "confirm", {}))
        state, accepted = confirm(state)
        if not accepted:
            raise RuntimeError("oracle confirm rejected; scene violates its own invariants")
        t += int(config.animation_ms)
        events.append(Event(t, "tick", {"dt_ms": int(config.animation_ms)}))
        state = tick(state, int(config.animation_ms))
    return events


# ---------------------------------------------------------------------------
# awareness probes
# ---------------------------------------------------------------------------

def _cell_center(cell_indices: Tuple[int, int, int], depth: int) -> Vec3:
    m = 1 << depth
    return Vec3(
        (cell_indices[0] + 0.5) / m,
        (cell_indices[1] + 0.5) / m,
        (cell_indices[2] + 0.5) / m,
    )


def _random_cell_center(rng: np.random.Generator, depth: int, octant: Optional[int] = None) -> Vec3:
    """Center of a random depth-``depth`` cell, optionally confined to one
    top-level octant."""
    m = 1 << depth
    half = m >> 1
    idx = []
    for axis in range(3):
        if octant is None:
            idx.append(int(rng.integers(0, m)))
        else:
            base = half if (octant >> axis) & 1 else 0
            idx.append(base + int(rng.integers(0, max(half, 1))))
    return _cell_center((idx[0], idx[1], idx[2]), depth)


def make_q1(state: NavState, seed: int) -> Question:
    """Four-choice location probe for the current focus.

    The correct choice is the focus center; the distractors are (a) the
    center mirrored across a random principal midplane, (b) a different
    same-depth cell within the same top-level octant (when one exists),
    (c) a cell in a different top-level octant, all pairwise distinct.
    """
    depth = state.depth
    if depth < 1:
        raise ValueError("q1 needs depth >= 1")
    rng = np.random.default_rng(seed)
    correct = state.focus.center
    top_octant = locate_point(UNIT_CUBE, 1, correct)[0]

    distractors: List[Vec3] = []

    def push(candidate: Vec3):
        if candidate != correct and candidate not in distractors:
            distractors.append(candidate)

    # mirrored center
    for _ in range(8):
        axis = int(rng.integers(0, 3))
        mirrored = Vec3(*(1.0 - c if a == axis else c for a, c in enumerate(correct)))
        if mirrored != correct:
            push(mirrored)
            break

    # same top-level octant, different cell (possible only at depth >= 2;
    # at depth 1 the octant holds a single cell, so fall through to random)
    if depth >= 2:
        for _ in range(64):
            if len(distractors) >= 2:
                break
            push(_random_cell_center(rng, depth, top_octant))

    # different top-level octant
    while len(distractors) < 3:
        other = int(rng.integers(0, 8))
        if other == top_octant:
            continue
        push(_random_cell_center(rng, depth, other))

    order = [int(v) for v in rng.permutation(4)]
    pool = [correct] + distractors[:3]
    choices = tuple((pool[i],) for i in order)
    return Question("q1_location", choices, order.index(0))


def make_q2(defects: Sequence[DefectRegion], seed: int) -> Question:
    """Four-choice layout probe: which picture shows the defect layout.

    Distractors relocate at least two of the four defects to different
    lowest-level cells; all four choices are pairwise distinct.
    """
    if len(defects) != 4:
        raise ValueError("q2 needs exactly 4 defects")
    rng = np.random.default_rng(seed)
    depth = len(defects[0].cell_path)
    truth = tuple(sorted((d.center for d in defects)))

    layouts = {truth}
    distractors: List[Tuple[Vec3, ...]] = []
    while len(distractors) < 3:
        centers = [d.center for d in defects]
        n_moves = int(rng.integers(2, 5))
        which = [int(v) for v in rng.permutation(4)[:n_moves]]
        for pos in which:
            for _ in range(256):
                candidate = _random_cell_center(rng, depth)
                if candidate not in centers:
                    centers[pos] = candidate
                    break
        layout = tuple(sorted(centers))
        if layout not in layouts:
            layouts.add(layout)
            distractors.append(layout)

    order = [int(v) for v in rng.permutation(4)]
    pool = [truth] + distractors
    choices = tuple(pool[i] for i in order)
    return Question("q2_object", choices, order.index(0))


def score_answer(q: Question, picked: int) -> bool:
    if not 0 <= picked < len(q.choices):
        raise ValueError(f"choice {picked} out of range")
    return picked == q.correct_index
