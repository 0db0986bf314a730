"""Synthetic entity-tracking reading tasks with gold coreference.

A passage is a sequence of simple statements about people moving around,
picking things up, and dropping them.  Three question types:

* ``one-fact``: "where is X ?" asks for X's latest location.
* ``two-facts``: "where is the O ?" asks for the location of O's current
  holder, so answering requires joining the pickup statement with the
  holder's latest move.
* ``three-facts``: "where was the O before the Y ?" asks for the location
  the object occupied immediately before its final visit to Y.

Instances are satisfiable by construction: the events a question needs are
scripted into randomly chosen statement slots and the remaining slots are
filled with distractors that never touch the queried object.  The answer is
computed by replaying the structured event list; ``oracle_answer`` checks it
by re-parsing the surface tokens from scratch (resolving pronouns to the
most recent name) and replaying independently.

With ``pronoun_rate > 0`` a statement whose actor repeats the previous
statement's actor may have its subject replaced by ``he``/``she``; the gold
clusters always group every subject position (name or pronoun) by the
underlying person.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Candidate, RCInstance
from .errors import RangeError, SpecError

PEOPLE_GENDER = {
    "Mary": "she",
    "John": "he",
    "Sandra": "she",
    "Daniel": "he",
    "Fred": "he",
    "Julie": "she",
    "Bill": "he",
    "Jessica": "she",
}
PEOPLE = tuple(PEOPLE_GENDER)
LOCATIONS = ("bathroom", "bedroom", "garden", "hallway", "kitchen", "office", "park", "school")
OBJECTS = ("apple", "football", "milk", "suitcase")
PRONOUNS = ("he", "she")

MOVE_VERBS = ("went", "travelled", "journeyed", "moved")
GET_VERBS = ("got", "took", "grabbed")
DROP_VERBS = ("dropped", "left", "discarded")

TASKS = ("one-fact", "two-facts", "three-facts")
_MIN_STATEMENTS = {"one-fact": 1, "two-facts": 2, "three-facts": 3}


@dataclass
class GenSpec:
    task: str = "two-facts"
    num_statements: int = 12
    num_people: int = 4
    num_locations: int = 6
    num_objects: int = 3
    pronoun_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.task not in TASKS:
            raise SpecError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.num_statements < _MIN_STATEMENTS[self.task]:
            raise SpecError(
                f"{self.task} needs at least {_MIN_STATEMENTS[self.task]} statements"
            )
        if not 1 <= self.num_people <= len(PEOPLE):
            raise SpecError(f"num_people must be in [1, {len(PEOPLE)}]")
        if not 2 <= self.num_locations <= len(LOCATIONS):
            raise SpecError(f"num_locations must be in [2, {len(LOCATIONS)}]")
        if not 1 <= self.num_objects <= len(OBJECTS):
            raise SpecError(f"num_objects must be in [1, {len(OBJECTS)}]")
        if not 0.0 <= self.pronoun_rate <= 1.0:
            raise SpecError("pronoun_rate must be in [0, 1]")

    @classmethod
    def from_mapping(cls, m: dict[str, str]) -> "GenSpec":
        kwargs: dict = {}
        casts = {
            "task": str,
            "num_statements": int,
            "num_people": int,
            "num_locations": int,
            "num_objects": int,
            "pronoun_rate": float,
            "seed": int,
        }
        for key, value in m.items():
            if key not in casts:
                raise SpecError(f"unknown generation key {key!r}")
            try:
                kwargs[key] = casts[key](value)
            except ValueError as e:
                raise SpecError(f"bad value for {key!r}: {value!r}") from e
        return cls(**kwargs)


def _pick(rng: np.random.Generator, seq):
    return seq[int(rng.integers(len(seq)))]


def _sample(rng: np.random.Generator, seq, k: int) -> list:
    idx = rng.permutation(len(seq))[:k]
    return [seq[int(i)] for i in idx]


class _World:
    """Minimal state needed while placing events: locations and holdings."""

    def __init__(self):
        self.person_loc: dict[str, str] = {}
        self.holder: dict[str, Optional[str]] = {}
        self.object_loc: dict[str, Optional[str]] = {}

    def apply(self, event: tuple) -> None:
        kind, actor, arg = event
        if kind == "move":
            self.person_loc[actor] = arg
        elif kind == "get":
            self.holder[arg] = actor
        elif kind == "drop":
            self.object_loc[arg] = self.person_loc[actor]
            self.holder[arg] = None


def _replay_answer(task: str, events: list[tuple], person: str, obj: Optional[str]):
    """Answer (and for three-facts the pivot location) from structured events."""
    loc: dict[str, str] = {}
    holder: dict[str, Optional[str]] = {}
    dropped: dict[str, Optional[str]] = {}
    traj: dict[str, list[str]] = {}
    for kind, actor, arg in events:
        if kind == "move":
            loc[actor] = arg
            for o, h in holder.items():
                if h == actor:
                    traj.setdefault(o, []).append(arg)
        elif kind == "get":
            holder[arg] = actor
            if actor in loc:
                traj.setdefault(arg, []).append(loc[actor])
        elif kind == "drop":
            dropped[arg] = loc.get(actor)
            holder[arg] = None
    if task == "one-fact":
        return loc.get(person), None
    if task == "two-facts":
        h = holder.get(obj)
        return (loc.get(h) if h is not None else dropped.get(obj)), None
    t = traj.get(obj, [])
    if len(t) < 2:
        return None, None
    return t[-2], t[-1]


def _distractor(rng: np.random.Generator, world: _World, people, locations, free_objects):
    """An event that cannot affect the queried object's answerability."""
    actor = _pick(rng, people)
    choices = ["move"]
    gettable = [o for o in free_objects if world.holder.get(o) is None]
    if gettable:
        choices.append("get")
    held = [o for o in free_objects if world.holder.get(o) == actor]
    if held and actor in world.person_loc:
        choices.append("drop")
    kind = _pick(rng, choices)
    if kind == "move":
        dests = [l for l in locations if l != world.person_loc.get(actor)]
        return ("move", actor, _pick(rng, dests))
    if kind == "get":
        return ("get", actor, _pick(rng, gettable))
    return ("drop", actor, _pick(rng, held))


def _render(event: tuple, rng: np.random.Generator) -> list[str]:
    kind, actor, arg = event
    if kind == "move":
        return [actor, _pick(rng, MOVE_VERBS), "to", "the", arg, "."]
    if kind == "get":
        return [actor, _pick(rng, GET_VERBS), "the", arg, "."]
    return [actor, _pick(rng, DROP_VERBS), "the", arg, "."]


def generate_instance(spec: GenSpec, index: int) -> RCInstance:
    rng = np.random.default_rng([spec.seed, index])
    people = _sample(rng, PEOPLE, spec.num_people)
    locations = _sample(rng, LOCATIONS, spec.num_locations)
    objects = _sample(rng, OBJECTS, spec.num_objects)

    person = _pick(rng, people)
    obj = _pick(rng, objects) if spec.task != "one-fact" else None
    free_objects = [o for o in objects if o != obj]

    n_required = _MIN_STATEMENTS[spec.task]
    required_slots = sorted(int(i) for i in rng.permutation(spec.num_statements)[:n_required])

    world = _World()
    events: list[tuple] = []
    next_required = 0
    for slot in range(spec.num_statements):
        if next_required < n_required and slot == required_slots[next_required]:
            if spec.task == "one-fact" or next_required > 0:
                dests = [l for l in locations if l != world.person_loc.get(person)]
                event = ("move", person, _pick(rng, dests))
            else:
                event = ("get", person, obj)
            next_required += 1
        else:
            event = _distractor(rng, world, people, locations, free_objects)
        world.apply(event)
        events.append(event)

    answer, pivot = _replay_answer(spec.task, events, person, obj)
    if answer is None:
        raise SpecError("internal: scripted events failed to determine an answer")

    statements = [_render(e, rng) for e in events]
    actors = [e[1] for e in events]
    for i in range(1, len(statements)):
        if actors[i] == actors[i - 1] and rng.random() < spec.pronoun_rate:
            statements[i][0] = PEOPLE_GENDER[actors[i]]

    passage: list[str] = []
    subject_positions: dict[str, list[int]] = {}
    for actor, stmt in zip(actors, statements):
        subject_positions.setdefault(actor, []).append(len(passage))
        passage.extend(stmt)

    clusters = [
        [(p, p + 1) for p in subject_positions[a]]
        for a in sorted(subject_positions, key=lambda a: subject_positions[a][0])
    ]

    if spec.task == "one-fact":
        question = ["where", "is", person, "?"]
        head, relation = person, "where_is"
    elif spec.task == "two-facts":
        question = ["where", "is", "the", obj, "?"]
        head, relation = obj, "where_is"
    else:
        question = ["where", "was", "the", obj, "before", "the", pivot, "?"]
        head, relation = obj, "where_was_before"

    candidates = []
    for loc_name in sorted(locations):
        positions = [(t, t + 1) for t, tok in enumerate(passage) if tok == loc_name]
        candidates.append(Candidate(loc_name, positions))

    return RCInstance(
        id=f"{spec.task}-{spec.seed}-{index}",
        passage_tokens=passage,
        question_tokens=question,
        answer=answer,
        candidates=candidates,
        clusters=clusters,
        head_entity=head,
        relation=relation,
    )


def generate(spec: GenSpec, n: int) -> list[RCInstance]:
    return [generate_instance(spec, i) for i in range(n)]


def split_instances(
    instances: list[RCInstance], fractions: tuple[float, float, float], seed: int
) -> tuple[list[RCInstance], list[RCInstance], list[RCInstance]]:
    """Deterministic shuffled train/dev/test split; fractions must sum to 1."""
    if any(f < 0 for f in fractions):
        raise RangeError("split fractions must be nonnegative")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise RangeError(f"split fractions must sum to 1, got {sum(fractions)}")
    order = np.random.default_rng(seed).permutation(len(instances))
    shuffled = [instances[int(i)] for i in order]
    n_train = int(round(fractions[0] * len(instances)))
    n_dev = int(round(fractions[1] * len(instances)))
    return (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_dev],
        shuffled[n_train + n_dev :],
    )


# ---------------------------------------------------------------------------
# independent checker: re-parse the surface tokens and replay from scratch


def _parse_statements(tokens: list[str]) -> Optional[list[tuple]]:
    stmts: list[list[str]] = []
    cur: list[str] = []
    for tok in tokens:
        if tok == ".":
            if cur:
                stmts.append(cur)
            cur = []
        else:
            cur.append(tok)
    if cur:
        return None  # trailing tokens without a period
    events: list[tuple] = []
    last_actor: Optional[str] = None
    for st in stmts:
        if len(st) < 2:
            return None
        subj = st[0]
        if subj in PRONOUNS:
            if last_actor is None:
                return None
            actor = last_actor
        elif subj in PEOPLE_GENDER:
            actor = subj
        else:
            return None
        last_actor = actor
        verb = st[1]
        if verb in MOVE_VERBS and len(st) == 5 and st[2] == "to" and st[3] == "the":
            events.append(("move", actor, st[4]))
        elif verb in GET_VERBS and len(st) == 4 and st[2] == "the":
            events.append(("get", actor, st[3]))
        elif verb in DROP_VERBS and len(st) == 4 and st[2] == "the":
            events.append(("drop", actor, st[3]))
        else:
            return None
    return events


def oracle_answer(passage_tokens: list[str], question_tokens: list[str]) -> Optional[str]:
    """Answer by re-parsing the passage; None when it cannot be determined."""
    events = _parse_statements(passage_tokens)
    if events is None:
        return None

    person_loc: dict[str, str] = {}
    holding: dict[str, str] = {}
    resting: dict[str, Optional[str]] = {}
    visits: dict[str, list[str]] = {}
    for kind, actor, arg in events:
        if kind == "move":
            person_loc[actor] = arg
            for o, h in list(holding.items()):
                if h == actor:
                    visits.setdefault(o, []).append(arg)
        elif kind == "get":
            holding[arg] = actor
            resting.pop(arg, None)
            if actor in person_loc:
                visits.setdefault(arg, []).append(person_loc[actor])
        else:
            resting[arg] = person_loc.get(actor)
            holding.pop(arg, None)

    q = question_tokens
    if len(q) == 4 and q[:2] == ["where", "is"] and q[3] == "?":
        return person_loc.get(q[2])
    if len(q) == 5 and q[:3] == ["where", "is", "the"] and q[4] == "?":
        o = q[3]
        if o in holding:
            return person_loc.get(holding[o])
        return resting.get(o)
    if (
        len(q) == 8
        and q[:3] == ["where", "was", "the"]
        and q[4:6] == ["before", "the"]
        and q[7] == "?"
    ):
        o, pivot = q[3], q[6]
        t = visits.get(o, [])
        for j in range(len(t) - 1, 0, -1):
            if t[j] == pivot:
                return t[j - 1]
        return None
    return None
