"""Instruction grammar, hotspot queries, corpus, and the external plug point."""

import json
import sys

import numpy as np
import pytest

from fieldswarm.geometry import Entity, WorldMap
from fieldswarm.metrics import parsing_accuracy
from fieldswarm.parsing import (
    HOTSPOT_BIN,
    Instruction,
    ParseError,
    SubprocessParser,
    canonical_text,
    default_lexicon,
    evaluate_corpus,
    hotspot_centroid,
    load_corpus,
    parse_instruction,
    validate_parsed_payload,
)


def world_with_entities(entities, w=1000, h=1000):
    return WorldMap(
        width=w,
        height=h,
        cell_size=1.0,
        obstacle_mask=np.zeros((w, h), dtype=bool),
        entities=tuple(entities),
    )


LEX = {"market_square": (620.0, 180.0), "old_harbor": (120.0, 420.0)}


class TestGrammar:
    def test_coordinates_with_priority(self):
        cmd = parse_instruction("patrol at (300, 400) high priority", lexicon=LEX)
        (d,) = cmd.tasks
        assert (d.x, d.y, d.w, d.task_type) == (300.0, 400.0, 5.0, "patrol")
        assert d.sigma == 25.0
        assert cmd.confidence == "exact"

    def test_place_lookup(self):
        cmd = parse_instruction("track vehicles near market square", lexicon=LEX)
        (d,) = cmd.tasks
        assert (d.x, d.y, d.w, d.task_type) == (620.0, 180.0, 3.0, "tracking")

    def test_crowd_and_vehicles_two_drafts(self):
        rng = np.random.default_rng(4)
        peds = [
            Entity(id=f"p{i}", kind="pedestrian", x=100.0 + float(rng.uniform(-3, 3)),
                   y=100.0 + float(rng.uniform(-3, 3)), vx=0, vy=0)
            for i in range(12)
        ]
        cars = [
            Entity(id=f"v{i}", kind="vehicle", x=700.0 + float(rng.uniform(-3, 3)),
                   y=300.0 + float(rng.uniform(-3, 3)), vx=0, vy=0)
            for i in range(9)
        ]
        world = world_with_entities(peds + cars)
        cmd = parse_instruction("Please inspect the crowd and vehicles", world=world)
        assert len(cmd.tasks) == 2
        first, second = cmd.tasks
        assert first.task_type == "patrol"
        assert abs(first.x - 100.0) < 5 and abs(first.y - 100.0) < 5
        assert second.task_type == "tracking"
        assert abs(second.x - 700.0) < 5 and abs(second.y - 300.0) < 5
        assert cmd.confidence == "fuzzy"

    def test_empty_instruction_rejected(self):
        with pytest.raises(ParseError):
            parse_instruction("", lexicon=LEX)
        with pytest.raises(ParseError):
            Instruction(raw_text="   ")

    def test_unknown_place_lists_clause(self):
        with pytest.raises(ParseError) as exc:
            parse_instruction("patrol near atlantis", lexicon=LEX)
        assert "atlantis" in str(exc.value)

    def test_gibberish_fails_loudly(self):
        with pytest.raises(ParseError):
            parse_instruction("frobnicate the bazzle", lexicon=LEX)

    def test_no_silent_default_task(self):
        with pytest.raises(ParseError):
            parse_instruction("high priority", lexicon=LEX)

    def test_target_on_obstacle_rejected(self):
        mask = np.zeros((100, 100), dtype=bool)
        mask[30, 40] = True
        world = WorldMap(width=100, height=100, cell_size=1.0, obstacle_mask=mask)
        with pytest.raises(ParseError, match="building"):
            parse_instruction("patrol at (30.5, 40.5)", world=world, lexicon=LEX)

    def test_conjunction_priorities_are_per_clause(self):
        cmd = parse_instruction(
            "patrol at (10, 10) and track at (20, 20) high priority", lexicon=LEX
        )
        assert cmd.tasks[0].w == 3.0
        assert cmd.tasks[1].w == 5.0

    def test_round_trip_canonical_text(self):
        for text in (
            "patrol at (300, 400) high priority",
            "track at (12.5, 977.25) low priority",
            "scan at (640, 220)",
        ):
            cmd = parse_instruction(text, lexicon=LEX)
            again = parse_instruction(canonical_text(cmd.tasks[0]), lexicon=LEX)
            assert again.tasks[0] == cmd.tasks[0]

    def test_deterministic(self):
        a = parse_instruction("inspect at (5, 6) low priority", lexicon=LEX)
        b = parse_instruction("inspect at (5, 6) low priority", lexicon=LEX)
        assert a == b


class TestHotspot:
    def test_singleton(self):
        world = world_with_entities(
            [Entity(id="p0", kind="pedestrian", x=100.0, y=100.0, vx=0, vy=0)]
        )
        assert hotspot_centroid(world, "pedestrian") == (100.0, 100.0)

    def test_two_equal_clusters_lower_yx_wins(self):
        ents = []
        # cluster A at bin (y=2, x=2)*10, cluster B at bin (y=8, x=8)*10, equal size
        for i in range(5):
            ents.append(Entity(id=f"a{i}", kind="pedestrian", x=25.0 + i * 0.1, y=25.0, vx=0, vy=0))
            ents.append(Entity(id=f"b{i}", kind="pedestrian", x=85.0 + i * 0.1, y=85.0, vx=0, vy=0))
        world = world_with_entities(ents, 100, 100)
        x, y = hotspot_centroid(world, "pedestrian")
        assert y < 30 and x < 30

    def test_matches_exhaustive_bin_scan(self):
        rng = np.random.default_rng(17)
        ents = [
            Entity(
                id=f"e{i}",
                kind="vehicle",
                x=float(rng.uniform(1, 499)),
                y=float(rng.uniform(1, 499)),
                vx=0,
                vy=0,
            )
            for i in range(200)
        ]
        world = world_with_entities(ents, 500, 500)
        got = hotspot_centroid(world, "vehicle")

        # Exhaustive oracle: scan every bin, then average the 3x3 members.
        pts = [(e.x, e.y) for e in ents]
        counts = {}
        for x, y in pts:
            counts[(int(y // HOTSPOT_BIN), int(x // HOTSPOT_BIN))] = (
                counts.get((int(y // HOTSPOT_BIN), int(x // HOTSPOT_BIN)), 0) + 1
            )
        best = None
        for key in sorted(counts):
            if best is None or counts[key] > counts[best]:
                best = key
        near = [
            (x, y)
            for x, y in pts
            if abs(int(y // HOTSPOT_BIN) - best[0]) <= 1
            and abs(int(x // HOTSPOT_BIN) - best[1]) <= 1
        ]
        exp = (sum(p[0] for p in near) / len(near), sum(p[1] for p in near) / len(near))
        assert got == pytest.approx(exp, abs=1e-12)

    def test_no_entities_of_kind(self):
        world = world_with_entities([])
        with pytest.raises(ValueError):
            hotspot_centroid(world, "pedestrian")


class TestCorpus:
    def test_shipped_corpus_parses_perfectly(self):
        corpus = load_corpus()
        assert len(corpus) == 50
        results = evaluate_corpus(corpus)
        assert parsing_accuracy(results) == 1.0

    def test_shuffled_corpus_same_accuracy(self):
        corpus = load_corpus()
        rng = np.random.default_rng(3)
        shuffled = list(corpus)
        rng.shuffle(shuffled)
        assert parsing_accuracy(evaluate_corpus(shuffled)) == 1.0

    def test_default_lexicon_loads(self):
        lex = default_lexicon()
        assert "market_square" in lex


class TestExternalParser:
    def test_validate_payload_accepts_good_reply(self):
        cmd = validate_parsed_payload(
            {"tasks": [{"x": 5.0, "y": 6.0, "w": 3.0, "sigma": 25.0, "type": "patrol"}]}
        )
        assert cmd.tasks[0].x == 5.0
        assert cmd.confidence == "exact"

    def test_validate_payload_rejects_bad_type(self):
        with pytest.raises(ParseError):
            validate_parsed_payload(
                {"tasks": [{"x": 5.0, "y": 6.0, "w": 3.0, "type": "bomber"}]}
            )

    def test_validate_payload_rejects_masked_target(self):
        mask = np.zeros((10, 10), dtype=bool)
        mask[5, 5] = True
        world = WorldMap(width=10, height=10, cell_size=1.0, obstacle_mask=mask)
        with pytest.raises(ParseError):
            validate_parsed_payload(
                {"tasks": [{"x": 5.5, "y": 5.5, "w": 3.0, "type": "patrol"}]}, world
            )

    def test_subprocess_round_trip(self, tmp_path):
        script = tmp_path / "echo_parser.py"
        script.write_text(
            "import sys, json\n"
            "req = json.loads(sys.stdin.readline())\n"
            "print(json.dumps({'tasks': [{'x': 1.0, 'y': 2.0, 'w': 3.0,"
            " 'sigma': 25.0, 'type': 'patrol'}], 'confidence': 'exact'}))\n"
        )
        parser = SubprocessParser([sys.executable, str(script)])
        cmd = parser.parse("whatever the backend understands")
        assert cmd.tasks[0].to_dict()["x"] == 1.0

    def test_subprocess_bad_reply_raises(self, tmp_path):
        script = tmp_path / "bad_parser.py"
        script.write_text("print('not json')\n")
        parser = SubprocessParser([sys.executable, str(script)])
        with pytest.raises(ParseError):
            parser.parse("anything")
