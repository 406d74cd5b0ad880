import random

import pytest

from helpers import closure_reachable, random_label
from ontoforge.errors import DuplicateCurie, InvalidLabel
from ontoforge.model import (
    Curie,
    OntologyGraph,
    Relationship,
    SymbolTable,
    TermObject,
    build_graph,
    curie_fallback_symbol,
    is_genus_differentia,
    is_more_general,
    register_term,
    to_symbol,
)


class TestToSymbol:
    def test_mitral_cell(self):
        assert to_symbol("mitral cell") == "MitralCell"

    def test_single_token(self):
        assert to_symbol("interneuron") == "Interneuron"

    def test_long_label(self):
        assert to_symbol("olfactory bulb mitral cell layer") == "OlfactoryBulbMitralCellLayer"

    def test_leading_digit_gets_prefix(self):
        # case is preserved beyond the first letter of each token, so the
        # acronym stays upper
        assert to_symbol("5-HT receptor") == "N5HTReceptor"
        assert to_symbol("2,3-dioxygenase") == "N23Dioxygenase"

    def test_punctuation_dropped(self):
        assert to_symbol("beta-2 (adrenergic) receptor") == "Beta2AdrenergicReceptor"

    def test_empty_label_rejected(self):
        with pytest.raises(InvalidLabel):
            to_symbol("   ")
        with pytest.raises(InvalidLabel):
            to_symbol("!!!")

    def test_idempotent_on_own_output(self):
        rng = random.Random(0xA11CE)
        for _ in range(500):
            label = random_label(rng)
            symbol = to_symbol(label)
            assert to_symbol(symbol) == symbol


class TestSymbolTable:
    def test_register_table1(self):
        table = SymbolTable()
        assert register_term(table, Curie.parse("CL:1001502"), "mitral cell") == "MitralCell"

    def test_collision_gets_suffix(self):
        table = SymbolTable()
        register_term(table, Curie.parse("CL:1001502"), "mitral cell")
        symbol = register_term(table, Curie.parse("XX:0000001"), "mitral cell")
        assert symbol == "MitralCell2"
        assert table.collisions == [(Curie.parse("XX:0000001"), "MitralCell2")]

    def test_third_collision(self):
        table = SymbolTable()
        for i, prefix in enumerate(["AA", "BB", "CC"]):
            symbol = register_term(table, Curie(prefix, "1"), "mitral cell")
        assert symbol == "MitralCell3"

    def test_duplicate_curie_rejected(self):
        table = SymbolTable()
        register_term(table, Curie.parse("CL:1001502"), "mitral cell")
        with pytest.raises(DuplicateCurie):
            register_term(table, Curie.parse("CL:1001502"), "mitral cell")

    def test_bijection_over_random_sequences(self):
        rng = random.Random(7)
        for _ in range(50):
            table = SymbolTable()
            for i in range(rng.randint(1, 40)):
                register_term(table, Curie("T", str(i)), random_label(rng))
            assert len(table.forward) == len(table.reverse)
            for curie, symbol in table.forward.items():
                assert table.reverse[symbol] == curie

    def test_fallback_symbol(self):
        assert curie_fallback_symbol(Curie.parse("UBERON:0004186")) == "Curie_UBERON_0004186"


class TestCurie:
    def test_parse_and_render(self):
        curie = Curie.parse("CL:1001502")
        assert (curie.prefix, curie.local_id) == ("CL", "1001502")
        assert str(curie) == "CL:1001502"

    def test_rejects_no_colon(self):
        with pytest.raises(ValueError):
            Curie.parse("CL1001502")

    def test_rejects_empty_parts(self):
        with pytest.raises(ValueError):
            Curie.parse(":123")


class TestTermObject:
    def test_duplicate_relationships_rejected(self):
        rel = Relationship("SubClassOf", "Interneuron")
        with pytest.raises(ValueError):
            TermObject(id="X", label="x", relationships=(rel, rel))

    def test_genus_differentia_check(self):
        good = (
            Relationship("SubClassOf", "Aminoaciduria"),
            Relationship("HasUrineMetabolite", "Proline"),
        )
        assert is_genus_differentia(good)
        assert not is_genus_differentia(good[1:])
        assert not is_genus_differentia(good + (Relationship("SubClassOf", "Other"),))


def term(id_, rels):
    return TermObject(
        id=id_, label=id_.lower(), relationships=tuple(Relationship(p, t) for p, t in rels)
    )


class TestBuildGraph:
    def test_empty(self):
        graph = build_graph([])
        assert graph.nodes == set() and graph.edges == set()

    def test_single_edge(self):
        graph = build_graph([term("X", [("SubClassOf", "B")])])
        assert graph.nodes == {"X", "B"}
        assert graph.edges == {("X", "SubClassOf", "B")}

    def test_table1_edges(self):
        mitral = TermObject(
            id="MitralCell",
            label="mitral cell",
            relationships=(
                Relationship("SubClassOf", "Interneuron"),
                Relationship("HasSomaLocation", "OlfactoryBulbMitralCellLayer"),
            ),
        )
        graph = build_graph([mitral])
        assert graph.edges == {
            ("MitralCell", "SubClassOf", "Interneuron"),
            ("MitralCell", "HasSomaLocation", "OlfactoryBulbMitralCellLayer"),
        }

    def test_edge_count_matches_dedup(self):
        rng = random.Random(3)
        for _ in range(30):
            terms = []
            expected = set()
            for i in range(rng.randint(1, 10)):
                rels = set()
                for _ in range(rng.randint(0, 4)):
                    rels.add((rng.choice(["SubClassOf", "PartOf"]), f"T{rng.randint(0, 5)}"))
                terms.append(term(f"S{i}", sorted(rels)))
                expected |= {(f"S{i}", p, t) for p, t in rels}
            assert build_graph(terms).edges == expected


class TestIsMoreGeneral:
    def graph(self, edges):
        g = OntologyGraph()
        for s, p, o in edges:
            g.add_edge(s, p, o)
        return g

    def test_two_hop_subclass(self):
        g = self.graph([("X", "SubClassOf", "B"), ("B", "SubClassOf", "A")])
        assert is_more_general(g, "X", "SubClassOf", "A")

    def test_no_zero_length_path(self):
        g = self.graph([("X", "SubClassOf", "B"), ("B", "SubClassOf", "A")])
        assert not is_more_general(g, "X", "SubClassOf", "X")

    def test_mixed_label_path(self):
        g = self.graph([("X", "PartOf", "B"), ("B", "SubClassOf", "C")])
        assert is_more_general(g, "X", "PartOf", "C")

    def test_other_predicates_not_traversed(self):
        g = self.graph([("X", "HasPart", "B"), ("B", "SubClassOf", "C")])
        assert not is_more_general(g, "X", "PartOf", "C")

    def test_cycle_allows_self_reachability(self):
        g = self.graph([("X", "SubClassOf", "B"), ("B", "SubClassOf", "X")])
        assert is_more_general(g, "X", "SubClassOf", "X")

    def test_missing_nodes_false(self):
        g = self.graph([("X", "SubClassOf", "B")])
        assert not is_more_general(g, "Q", "SubClassOf", "B")
        assert not is_more_general(g, "X", "SubClassOf", "Q")

    def test_matches_matrix_closure_oracle(self):
        rng = random.Random(0xBEEF)
        predicates = ["SubClassOf", "PartOf", "HasPart"]
        for _ in range(200):
            n = rng.randint(2, 8)
            nodes = [f"N{i}" for i in range(n)]
            edges = set()
            for _ in range(rng.randint(1, 2 * n)):
                edges.add((rng.choice(nodes), rng.choice(predicates), rng.choice(nodes)))
            g = self.graph(sorted(edges))
            for _ in range(10):
                s, p, t = rng.choice(nodes), rng.choice(predicates), rng.choice(nodes)
                expected = closure_reachable(sorted(edges), {"SubClassOf", p}, s, t)
                assert is_more_general(g, s, p, t) == expected
