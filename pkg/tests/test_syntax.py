import math
import random
from collections import Counter

import pytest

from revlens.syntax import (
    ConlluParseError,
    DependencyGraph,
    parse_conllu,
    syntactic_diversity,
    wl_kernel,
)

TWO_TOKEN_BLOCK = "1\tword1\tword1\tNOUN\t_\t_\t2\tnsubj\t_\t_\n2\tword2\tword2\tVERB\t_\t_\t0\troot\t_\t_\n"


def graph(nodes, edges, sentence_id=1):
    return DependencyGraph(sentence_id, tuple(nodes), tuple(edges))


def single_node(tag, sentence_id=1):
    return graph([(1, tag)], [(0, 1, "root")], sentence_id)


def chain(tags, relation="dep", sentence_id=1):
    nodes = [(i + 1, t) for i, t in enumerate(tags)]
    edges = [(0, 1, "root")] + [(i, i + 1, relation) for i in range(1, len(tags))]
    return graph(nodes, edges, sentence_id)


class TestParseConllu:
    def test_empty_input(self):
        assert parse_conllu("") == []

    def test_two_token_sentence(self):
        graphs = parse_conllu(TWO_TOKEN_BLOCK)
        assert len(graphs) == 1
        g = graphs[0]
        assert g.nodes == ((1, "NOUN"), (2, "VERB"))
        assert (0, 2, "root") in g.edges and (2, 1, "nsubj") in g.edges
        assert g.warnings == ()

    def test_nine_columns_is_error_with_line(self):
        bad = "1\tw\tw\tNOUN\t_\t_\t0\troot\t_\n"
        with pytest.raises(ConlluParseError) as err:
            parse_conllu(bad)
        assert err.value.line_no == 1

    def test_non_integer_head(self):
        bad = "1\tw\tw\tNOUN\t_\t_\tX\troot\t_\t_\n"
        with pytest.raises(ConlluParseError):
            parse_conllu(bad)

    def test_comments_and_mwt_skipped(self):
        text = (
            "# sent_id = 1\n"
            "1-2\twx\t_\t_\t_\t_\t_\t_\t_\t_\n"
            + TWO_TOKEN_BLOCK
            + "3.1\tgap\t_\tX\t_\t_\t_\t_\t_\t_\n"
        )
        graphs = parse_conllu(text)
        assert len(graphs) == 1
        assert [tag for _, tag in graphs[0].nodes] == ["NOUN", "VERB"]

    def test_multiple_roots_warn_not_raise(self):
        text = (
            "1\ta\ta\tNOUN\t_\t_\t0\troot\t_\t_\n"
            "2\tb\tb\tVERB\t_\t_\t0\troot\t_\t_\n"
        )
        graphs = parse_conllu(text)
        assert len(graphs) == 1
        assert any("root" in w for w in graphs[0].warnings)

    def test_blank_line_separates_blocks(self):
        graphs = parse_conllu(TWO_TOKEN_BLOCK + "\n" + TWO_TOKEN_BLOCK)
        assert [g.sentence_id for g in graphs] == [1, 2]


class TestWlKernel:
    def test_self_similarity_is_one(self):
        g = chain(["NOUN", "VERB", "ADJ"], "amod")
        for h in (0, 1, 3):
            k = wl_kernel(g, g, h)
            assert k > 0
            assert k / math.sqrt(k * k) == 1.0

    def test_disjoint_labels_zero_at_h0(self):
        assert wl_kernel(single_node("NOUN"), single_node("VERB"), 0) == 0.0

    def test_two_node_chains_hand_unrolled(self):
        g1 = chain(["NOUN", "VERB"], "nsubj", 1)
        g2 = chain(["NOUN", "VERB"], "nsubj", 2)
        # round 0: both histograms {NOUN:1, VERB:1} -> dot 2
        # round 1: relabeled pairs identical across graphs -> dot 2
        assert wl_kernel(g1, g2, 1) == 4.0
        assert wl_kernel(g1, g2, 0) == 2.0

    def test_symmetry_random_graphs(self):
        rng = random.Random(23)
        for _ in range(40):
            g1, g2 = _random_graph(rng, 1), _random_graph(rng, 2)
            h = rng.randint(0, 3)
            assert wl_kernel(g1, g2, h) == wl_kernel(g2, g1, h)

    def test_relation_label_matters(self):
        g1 = chain(["NOUN", "VERB"], "nsubj")
        g2 = chain(["NOUN", "VERB"], "obj", 2)
        assert wl_kernel(g1, g2, 1) == 2.0  # round 0 matches, round 1 diverges

    def test_matches_independent_reimplementation(self):
        rng = random.Random(31)
        for _ in range(60):
            g1, g2 = _random_graph(rng, 1), _random_graph(rng, 2)
            h = rng.randint(0, 3)
            assert wl_kernel(g1, g2, h) == _wl_reference(g1, g2, h)


def _random_graph(rng, sentence_id):
    n = rng.randint(1, 6)
    tags = [rng.choice(["NOUN", "VERB", "ADJ", "ADV"]) for _ in range(n)]
    nodes = [(i + 1, t) for i, t in enumerate(tags)]
    edges = [(0, 1, "root")]
    for i in range(2, n + 1):
        head = rng.randint(1, i - 1)
        edges.append((head, i, rng.choice(["nsubj", "obj", "amod"])))
    return graph(nodes, edges, sentence_id)


def _wl_reference(g1, g2, h):
    """Independent WL implementation: tuple labels, no hashing."""

    def histograms(g):
        adjacency = {i: [] for i, _ in g.nodes}
        for head, dep, rel in g.edges:
            if head == 0:
                continue
            adjacency[dep].append((head, rel))
            adjacency[head].append((dep, rel))
        labels = {i: tag for i, tag in g.nodes}
        hists = [Counter(labels.values())]
        for _ in range(h):
            labels = {
                i: (labels[i], tuple(sorted((labels[j], rel) for j, rel in adjacency[i])))
                for i in labels
            }
            hists.append(Counter(labels.values()))
        return hists

    h1, h2 = histograms(g1), histograms(g2)
    total = 0
    for c1, c2 in zip(h1, h2):
        total += sum(c1[k] * c2.get(k, 0) for k in c1)
    return float(total)


class TestSyntacticDiversity:
    def test_identical_graphs_zero(self):
        g = chain(["NOUN", "VERB", "ADJ"])
        value = syntactic_diversity([g, g, g], 2)
        assert value.value == 0.0 and not value.degenerate

    def test_disjoint_labels_one(self):
        value = syntactic_diversity([single_node("NOUN", 1), single_node("VERB", 2)], 0)
        assert value.value == 1.0

    def test_two_identical_one_disjoint(self):
        graphs = [single_node("NOUN", 1), single_node("NOUN", 2), single_node("VERB", 3)]
        value = syntactic_diversity(graphs, 0)
        assert abs(value.value - 2 / 3) < 1e-15

    def test_single_graph_degenerate(self):
        value = syntactic_diversity([single_node("NOUN")], 3)
        assert value == (0.0, True)

    def test_permutation_invariance(self):
        rng = random.Random(37)
        graphs = [_random_graph(rng, i) for i in range(5)]
        base = syntactic_diversity(graphs, 2).value
        for _ in range(5):
            shuffled = graphs[:]
            rng.shuffle(shuffled)
            assert syntactic_diversity(shuffled, 2).value == base

    def test_all_equal_stays_zero_with_duplicate(self):
        g = chain(["NOUN", "VERB"])
        assert syntactic_diversity([g, g], 1).value == 0.0
        assert syntactic_diversity([g, g, g], 1).value == 0.0

    def test_pairwise_enumeration_oracle(self):
        rng = random.Random(41)
        for _ in range(30):
            graphs = [_random_graph(rng, i) for i in range(rng.randint(2, 6))]
            h = rng.randint(0, 2)
            n = len(graphs)
            total = 0.0
            for i in range(n):
                for j in range(n):
                    if i == j:
                        continue
                    k_ij = wl_kernel(graphs[i], graphs[j], h)
                    k_ii = wl_kernel(graphs[i], graphs[i], h)
                    k_jj = wl_kernel(graphs[j], graphs[j], h)
                    total += 1 - k_ij / math.sqrt(k_ii * k_jj)
            want = min(1.0, max(0.0, total / (n * (n - 1))))
            assert abs(syntactic_diversity(graphs, h).value - want) < 1e-12
