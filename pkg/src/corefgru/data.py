"""On-disk formats: the JSONL instance schema and flat key=value configs.

One instance per line.  Spans are 0-based half-open ``[start, end)`` over
passage tokens; ``clusters`` lists the coreference annotation as one span
list per entity; each candidate answer carries every passage position where
it is mentioned.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

Span = tuple[int, int]


@dataclass
class Candidate:
    text: str
    positions: list[Span] = field(default_factory=list)


@dataclass
class RCInstance:
    id: str
    passage_tokens: list[str]
    question_tokens: list[str]
    answer: str
    candidates: list[Candidate]
    clusters: list[list[Span]]
    head_entity: str = ""
    relation: str = ""

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "passage_tokens": list(self.passage_tokens),
            "question_tokens": list(self.question_tokens),
            "answer": self.answer,
            "candidates": [
                {"text": c.text, "positions": [list(p) for p in c.positions]}
                for c in self.candidates
            ],
            "clusters": [[list(s) for s in spans] for spans in self.clusters],
            "head_entity": self.head_entity,
            "relation": self.relation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RCInstance":
        required = ("id", "passage_tokens", "question_tokens", "answer", "candidates", "clusters")
        for key in required:
            if key not in d:
                raise ValueError(f"instance missing required key {key!r}")
        return cls(
            id=str(d["id"]),
            passage_tokens=[str(t) for t in d["passage_tokens"]],
            question_tokens=[str(t) for t in d["question_tokens"]],
            answer=str(d["answer"]),
            candidates=[
                Candidate(str(c["text"]), [(int(s), int(e)) for s, e in c.get("positions", [])])
                for c in d["candidates"]
            ],
            clusters=[[(int(s), int(e)) for s, e in spans] for spans in d["clusters"]],
            head_entity=str(d.get("head_entity", "")),
            relation=str(d.get("relation", "")),
        )


def write_jsonl(path: Union[str, Path], instances: list[RCInstance]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for inst in instances:
            f.write(json.dumps(inst.to_dict(), ensure_ascii=False) + "\n")


def read_jsonl(path: Union[str, Path]) -> list[RCInstance]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{lineno}: not valid JSON: {e}") from e
            try:
                out.append(RCInstance.from_dict(d))
            except (ValueError, KeyError, TypeError) as e:
                raise ValueError(f"{path}:{lineno}: bad instance: {e}") from e
    return out


def parse_config_text(text: str) -> dict[str, str]:
    """Flat ``key = value`` lines; '#' starts a comment; blanks ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def read_config(path: Union[str, Path]) -> dict[str, str]:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def write_config(path: Union[str, Path], mapping: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for key, value in mapping.items():
            f.write(f"{key} = {value}\n")
