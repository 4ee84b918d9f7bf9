"""Operator instructions -> task tuples, via a strict deterministic grammar.

Grammar (EBNF):

    command   := clause ("and" clause)*
    clause    := [verb] target [priority]
    verb      := "patrol" | "inspect" | "scan"            -> patrol
               | "track" | "follow" | "monitor"           -> tracking
    target    := "(" number "," number ")"                  coordinates
               | entity-word                                density hotspot
               | [prep] place-name                          lexicon lookup
    priority  := "urgent" | ("high"|"normal"|"low") "priority"

Entity-word targets ("crowd", "vehicles", ...) resolve to the densest
cluster of that entity kind and fix the task type themselves: crowds are a
wide-area patrol subject, vehicles a tracking subject. Inputs outside the
grammar fail loudly with the offending clause; a swarm controller must not
invent coordinates.
"""

from __future__ import annotations

import json
import re
import subprocess
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import WorldMap, is_obstacle
from .tasks import DEFAULT_SIGMA, TASK_TYPES

VERB_CLASS = {
    "patrol": "patrol",
    "inspect": "patrol",
    "scan": "patrol",
    "track": "tracking",
    "follow": "tracking",
    "monitor": "tracking",
}

# Entity-class targets imply both the lookup kind and the task type.
ENTITY_WORDS = {
    "crowd": ("pedestrian", "patrol"),
    "crowds": ("pedestrian", "patrol"),
    "pedestrians": ("pedestrian", "patrol"),
    "people": ("pedestrian", "patrol"),
    "vehicles": ("vehicle", "tracking"),
    "cars": ("vehicle", "tracking"),
    "traffic": ("vehicle", "tracking"),
}

PRIORITY_WEIGHTS = {"high": 5.0, "normal": 3.0, "low": 1.0}

_FILLER = {
    "the", "a", "at", "near", "around", "in", "on", "to", "of",
    "area", "zone", "target", "targets",
}
_COORD_RE = re.compile(r"\(\s*(-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?)\s*\)")

# Entity density is binned at this granularity for hotspot queries.
HOTSPOT_BIN = 10.0


class ParseError(ValueError):
    """Instruction (or one clause of it) outside the grammar."""

    def __init__(self, clause: str, reason: str):
        self.clause = clause
        self.reason = reason
        super().__init__(f"cannot parse {clause!r}: {reason}")


@dataclass(frozen=True)
class Instruction:
    raw_text: str
    issued_at: int = 0

    def __post_init__(self) -> None:
        if not self.raw_text.strip():
            raise ParseError("", "empty instruction")


@dataclass(frozen=True)
class TaskDraft:
    x: float
    y: float
    w: float
    sigma: float
    task_type: str

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "sigma": self.sigma, "type": self.task_type}


@dataclass(frozen=True)
class ParsedCommand:
    tasks: tuple[TaskDraft, ...]
    confidence: str  # "exact" | "fuzzy" (fuzzy: coordinates derived from world state)


def load_lexicon(source) -> dict:
    """Place-name table: name -> (x, y) point or (x0, y0, x1, y1) box."""
    if isinstance(source, (str, Path)):
        doc = json.loads(Path(source).read_text(encoding="utf-8"))
    else:
        doc = dict(source)
    lex = {}
    for name, val in doc.items():
        vals = [float(v) for v in val]
        if len(vals) not in (2, 4):
            raise ValueError(f"lexicon entry {name!r}: need [x, y] or [x0, y0, x1, y1]")
        lex[name.lower().replace(" ", "_")] = tuple(vals)
    return lex


def default_lexicon() -> dict:
    from importlib.resources import files

    return load_lexicon(json.loads(files("fieldswarm.data").joinpath("lexicon.json").read_text()))


def lexicon_point(entry: tuple) -> tuple[float, float]:
    if len(entry) == 2:
        return entry
    x0, y0, x1, y1 = entry
    return ((x0 + x1) / 2.0, (y0 + y1) / 2.0)


def hotspot_centroid(world: WorldMap, kind: str) -> tuple[float, float]:
    """Centroid of the densest cluster of entities of one kind.

    Entities are binned on a HOTSPOT_BIN grid; the fullest bin wins (ties to
    the lower (bin_y, bin_x)), and the centroid averages the members of that
    bin's 3x3 neighborhood.
    """
    members = [(e.x, e.y) for e in world.entities if e.kind == kind]
    if not members:
        raise ValueError(f"no entities of kind {kind!r} in the world")
    bins: dict[tuple[int, int], int] = {}
    for x, y in members:
        key = (int(y // HOTSPOT_BIN), int(x // HOTSPOT_BIN))
        bins[key] = bins.get(key, 0) + 1
    best = min(bins.items(), key=lambda kv: (-kv[1], kv[0]))[0]
    by, bx = best
    near = [
        (x, y)
        for x, y in members
        if abs(int(y // HOTSPOT_BIN) - by) <= 1 and abs(int(x // HOTSPOT_BIN) - bx) <= 1
    ]
    xs = np.array([p[0] for p in near])
    ys = np.array([p[1] for p in near])
    return float(xs.mean()), float(ys.mean())


def _extract_priority(tokens: list[str], clause: str) -> tuple[list[str], float]:
    out = list(tokens)
    if "urgent" in out:
        out.remove("urgent")
        return out, PRIORITY_WEIGHTS["high"]
    if "urgently" in out:
        out.remove("urgently")
        return out, PRIORITY_WEIGHTS["high"]
    if "priority" in out:
        i = out.index("priority")
        if i == 0:
            raise ParseError(clause, "dangling 'priority' with no level word")
        level = out[i - 1]
        if level not in PRIORITY_WEIGHTS:
            raise ParseError(clause, f"unknown priority level {level!r}")
        del out[i - 1 : i + 1]
        return out, PRIORITY_WEIGHTS[level]
    return out, PRIORITY_WEIGHTS["normal"]


def _parse_clause(
    clause: str, world: WorldMap | None, lexicon: dict
) -> tuple[TaskDraft, bool]:
    """Returns (draft, used_world_state)."""
    text = clause.strip()
    if not text:
        raise ParseError(clause, "empty clause")

    coord = _COORD_RE.search(text)
    stripped = _COORD_RE.sub(" ", text)
    tokens = re.findall(r"[a-z_']+", stripped.lower())
    tokens = [t for t in tokens if t not in ("please", "'")]

    tokens, weight = _extract_priority(tokens, clause)

    verb_type = None
    for i, tok in enumerate(tokens):
        if tok in VERB_CLASS:
            verb_type = VERB_CLASS[tok]
            del tokens[i]
            break

    entity = None
    for i, tok in enumerate(tokens):
        if tok in ENTITY_WORDS:
            entity = ENTITY_WORDS[tok]
            del tokens[i]
            break

    rest = [t for t in tokens if t not in _FILLER]

    # Location precedence: explicit coordinates, then a named place, then an
    # entity-density hotspot. An entity word always pins the task type (the
    # subject decides which sensor suite applies); otherwise the verb does.
    task_type = entity[1] if entity is not None else verb_type
    if coord is not None:
        if rest:
            raise ParseError(clause, f"unrecognized words {rest!r}")
        x, y = float(coord.group(1)), float(coord.group(2))
        if task_type is None:
            raise ParseError(clause, "coordinates given but no verb fixes the task type")
        used_world = False
    elif rest:
        name = "_".join(rest)
        if name not in lexicon:
            raise ParseError(clause, f"unknown place {' '.join(rest)!r}")
        x, y = lexicon_point(lexicon[name])
        if task_type is None:
            raise ParseError(clause, "place target needs a verb to fix the task type")
        used_world = False
    elif entity is not None:
        if world is None:
            raise ParseError(clause, "entity target needs a world to locate the hotspot")
        kind = entity[0]
        try:
            x, y = hotspot_centroid(world, kind)
        except ValueError as exc:
            raise ParseError(clause, str(exc)) from exc
        used_world = True
    else:
        raise ParseError(clause, "no target location found")

    draft = TaskDraft(x=x, y=y, w=weight, sigma=DEFAULT_SIGMA, task_type=task_type)
    if world is not None:
        if not world.in_domain(x, y):
            raise ParseError(clause, f"target ({x}, {y}) is outside the map")
        if is_obstacle(world, x, y):
            raise ParseError(clause, f"target ({x}, {y}) is inside a building")
    return draft, used_world


def parse_instruction(
    instr: Instruction | str, world: WorldMap | None = None, lexicon: dict | None = None
) -> ParsedCommand:
    """Parse one operator instruction into validated task drafts.

    Deterministic and total: every input yields drafts or a ParseError
    naming the failed clause. The conjunction "and" chains clauses.
    """
    text = instr.raw_text if isinstance(instr, Instruction) else instr
    if not text or not text.strip():
        raise ParseError(text or "", "empty instruction")
    lexicon = lexicon if lexicon is not None else {}
    clauses = re.split(r"\band\b", text.lower())
    drafts = []
    fuzzy = False
    for clause in clauses:
        draft, used_world = _parse_clause(clause, world, lexicon)
        drafts.append(draft)
        fuzzy = fuzzy or used_world
    return ParsedCommand(tasks=tuple(drafts), confidence="fuzzy" if fuzzy else "exact")


def canonical_text(draft: TaskDraft) -> str:
    """Render a draft back to grammar text; re-parsing yields the same draft."""
    verb = "patrol" if draft.task_type == "patrol" else "track"
    tier = min(PRIORITY_WEIGHTS.items(), key=lambda kv: abs(kv[1] - draft.w))[0]
    return f"{verb} at ({draft.x!r}, {draft.y!r}) {tier} priority"


# ---------------------------------------------------------------------- #
# external-parser plug point


def validate_parsed_payload(doc: dict, world: WorldMap | None = None) -> ParsedCommand:
    """Validate an external parser's JSON reply against the same rules the
    grammar output obeys."""
    if not isinstance(doc, dict) or "tasks" not in doc:
        raise ParseError(str(doc)[:80], "reply must be an object with a 'tasks' list")
    confidence = doc.get("confidence", "exact")
    if confidence not in ("exact", "fuzzy"):
        raise ParseError(str(doc)[:80], f"bad confidence {confidence!r}")
    drafts = []
    for i, t in enumerate(doc["tasks"]):
        try:
            draft = TaskDraft(
                x=float(t["x"]),
                y=float(t["y"]),
                w=float(t["w"]),
                sigma=float(t.get("sigma", DEFAULT_SIGMA)),
                task_type=str(t["type"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"tasks[{i}]", f"malformed draft: {exc}") from exc
        if draft.task_type not in TASK_TYPES:
            raise ParseError(f"tasks[{i}]", f"unknown type {draft.task_type!r}")
        if draft.w < 0 or draft.sigma <= 0:
            raise ParseError(f"tasks[{i}]", "weight must be >= 0 and sigma > 0")
        if world is not None and (
            not world.in_domain(draft.x, draft.y) or is_obstacle(world, draft.x, draft.y)
        ):
            raise ParseError(f"tasks[{i}]", "target is masked or outside the map")
        drafts.append(draft)
    return ParsedCommand(tasks=tuple(drafts), confidence=confidence)


class SubprocessParser:
    """Adapter for an external parser process: writes {"text": ...} as one
    JSON line on stdin, reads one ParsedCommand JSON line from stdout."""

    def __init__(self, argv: list[str], timeout: float = 30.0):
        self.argv = list(argv)
        self.timeout = timeout

    def parse(self, text: str, world: WorldMap | None = None) -> ParsedCommand:
        proc = subprocess.run(
            self.argv,
            input=json.dumps({"text": text}) + "\n",
            capture_output=True,
            text=True,
            timeout=self.timeout,
        )
        if proc.returncode != 0:
            raise ParseError(text, f"external parser failed: {proc.stderr.strip()[:200]}")
        try:
            doc = json.loads(proc.stdout.strip().splitlines()[-1])
        except (json.JSONDecodeError, IndexError) as exc:
            raise ParseError(text, f"external parser returned non-JSON: {exc}") from exc
        return validate_parsed_payload(doc, world)


# ---------------------------------------------------------------------- #
# gold corpus


def load_corpus(path=None) -> list[dict]:
    """Gold corpus: one JSON object per line with 'text' and 'gold' tuple."""
    if path is None:
        from importlib.resources import files

        raw = files("fieldswarm.data").joinpath("corpus.jsonl").read_text()
    else:
        raw = Path(path).read_text(encoding="utf-8")
    return [json.loads(line) for line in raw.splitlines() if line.strip()]


def evaluate_corpus(
    corpus: list[dict], lexicon: dict | None = None, parser=None
) -> list[tuple[dict, dict | None]]:
    """Run a parser over the corpus; pair each gold tuple with the parse
    (first draft) or None on failure."""
    lexicon = lexicon if lexicon is not None else default_lexicon()
    results = []
    for item in corpus:
        try:
            if parser is None:
                cmd = parse_instruction(item["text"], world=None, lexicon=lexicon)
            else:
                cmd = parser.parse(item["text"])
            results.append((item["gold"], cmd.tasks[0].to_dict() if cmd.tasks else None))
        except ParseError:
            results.append((item["gold"], None))
    return results
