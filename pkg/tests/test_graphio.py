import json

import pytest

from packcount.graphio import Instance, instance_digest, load_instance, max_degree, parse_instance, serialize_instance
from packcount.testing import DATA_DIR, load_fixture, path_instance, random_instance, star_instance
from packcount.utils import ParseError


class TestParse:
    def test_valid(self):
        inst = parse_instance('{"n": 3, "q": 2, "edges": [[2, 1], [0, 1]], "lists": [[5, 1], [0, 1], [2, 3]]}')
        assert inst.n == 3
        assert inst.q == 2
        assert inst.m == 2
        assert inst.edges == ((0, 1), (1, 2))
        assert inst.lists == ((1, 5), (0, 1), (2, 3))
        assert inst.neighbors == ((1,), (0, 2), (1,))
        assert inst.degrees == (1, 2, 1)
        assert max_degree(inst) == 2
        assert inst.color(0, 1) == 5
        assert inst.color_index[0] == {1: 0, 5: 1}

    @pytest.mark.parametrize(
        "doc, match",
        [
            ({"n": 2, "q": 2, "edges": [[0, 1], [1, 0]], "lists": [[0, 1], [0, 1]]}, "Duplicate edge"),
            ({"n": 2, "q": 2, "edges": [[1, 1]], "lists": [[0, 1], [0, 1]]}, "Self-loops"),
            ({"n": 2, "q": 2, "edges": [[0, 2]], "lists": [[0, 1], [0, 1]]}, "outside"),
            ({"n": 2, "q": 2, "edges": [], "lists": [[0, 1], [0, 1, 2]]}, "expected q=2"),
            ({"n": 2, "q": 2, "edges": [], "lists": [[0, 0], [0, 1]]}, "duplicate colors"),
            ({"n": 2, "q": 2, "edges": [], "lists": [[0, 1]]}, "Expected 2 lists"),
            ({"n": 2, "q": 2, "edges": [[0, 1, 1]], "lists": [[0, 1], [0, 1]]}, "pairs"),
            ({"n": 0, "q": 2, "edges": [], "lists": []}, "Malformed"),
            ({"n": 1, "q": "2", "edges": [], "lists": [[0, 1]]}, "Malformed"),
            ({"n": 1, "q": 2, "edges": [], "lists": [[-1, 1]]}, "Malformed"),
            ({"n": 1, "q": 2, "edges": [], "lists": [[0, 1]], "extra": 1}, "Malformed"),
        ],
    )
    def test_invalid(self, doc, match):
        with pytest.raises(ParseError, match=match):
            parse_instance(json.dumps(doc))

    def test_not_json(self):
        with pytest.raises(ParseError, match="Malformed"):
            parse_instance("{n: 1")

    def test_direct_construction(self):
        with pytest.raises(ParseError, match="n >= 1"):
            Instance(0, 1, (), ())
        inst = Instance(2, 1, [[1, 0]], [[3], [3]])
        assert inst.edges == ((0, 1),)
        assert inst.lists == ((3,), (3,))


class TestSerialize:
    def test_canonical(self):
        a = parse_instance('{"n": 2, "q": 2, "edges": [[1, 0]], "lists": [[3, 1], [2, 0]]}')
        b = parse_instance('{"lists": [[1, 3], [0, 2]], "edges": [[0, 1]], "q": 2, "n": 2}')
        assert serialize_instance(a) == serialize_instance(b)
        assert instance_digest(a) == instance_digest(b)
        assert parse_instance(serialize_instance(a)) == a

    def test_digest_differs(self):
        assert instance_digest(path_instance(3, 3)) != instance_digest(star_instance(2, 3))

    def test_with_edges(self, path3_q5):
        g = path3_q5.with_edges(path3_q5.edges[:1])
        assert g.m == 1
        assert g.lists == path3_q5.lists
        assert g.max_degree == 1


class TestLoad:
    def test_fixtures(self):
        for f in sorted(DATA_DIR.glob("*.json")):
            inst = load_instance(f)
            assert inst.n >= 1

    def test_single_vertex(self, single_vertex):
        assert single_vertex.n == 1
        assert single_vertex.max_degree == 0
        assert single_vertex.lists == ((1, 2, 3),)

    def test_missing(self, tmp_path):
        with pytest.raises(ParseError, match="Could not read"):
            load_instance(tmp_path / "nope.json")

    def test_star(self):
        inst = load_fixture("star2_q5")
        assert inst.max_degree == 2
        assert inst.neighbors[0] == (1, 2)


def _corrupt(doc, kind, rng):
    doc = json.loads(json.dumps(doc))
    v = int(rng.integers(doc["n"]))
    if kind == "self-loop":
        doc["edges"].append([v, v])
    elif kind == "out-of-range":
        doc["edges"].append([v, doc["n"] + int(rng.integers(3))])
    elif kind == "duplicate-edge":
        u, w = doc["edges"][int(rng.integers(len(doc["edges"])))]
        doc["edges"].append([w, u])
    elif kind == "short-list":
        doc["lists"][v].pop()
    elif kind == "repeated-color":
        doc["lists"][v][-1] = doc["lists"][v][0]
    elif kind == "negative-color":
        doc["lists"][v][0] = -1 - int(rng.integers(5))
    elif kind == "missing-list":
        doc["lists"].pop()
    elif kind == "missing-key":
        del doc[str(rng.choice(["n", "q", "edges", "lists"]))]
    elif kind == "string-size":
        doc["q"] = str(doc["q"])
    return doc


class TestRandomized:
    def test_round_trip(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 9))
            q = int(rng.integers(1, 6))
            inst = random_instance(n, q, rng, p=float(rng.random()), palette=q + int(rng.integers(0, 5)))
            assert parse_instance(serialize_instance(inst)) == inst

    def test_shuffled_document(self, rng):
        for _ in range(100):
            inst = random_instance(int(rng.integers(2, 8)), 3, rng, p=0.5, palette=6)
            doc = json.loads(serialize_instance(inst))
            edges = [e[::-1] if rng.random() < 0.5 else e for e in doc["edges"]]
            doc["edges"] = [edges[k] for k in rng.permutation(len(edges))]
            doc["lists"] = [[lst[k] for k in rng.permutation(len(lst))] for lst in doc["lists"]]
            assert parse_instance(json.dumps(doc)) == inst

    def test_corruptions(self, rng):
        kinds = ["self-loop", "out-of-range", "short-list", "repeated-color", "negative-color", "missing-list", "missing-key", "string-size"]
        seen = set()
        for _ in range(300):
            inst = random_instance(int(rng.integers(2, 7)), int(rng.integers(2, 5)), rng, p=0.5)
            doc = json.loads(serialize_instance(inst))
            allowed = kinds + (["duplicate-edge"] if doc["edges"] else [])
            kind = str(rng.choice(allowed))
            seen.add(kind)
            with pytest.raises(ParseError):
                parse_instance(json.dumps(_corrupt(doc, kind, rng)))
        assert seen >= set(kinds)
