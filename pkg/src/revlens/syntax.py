"""Syntactic diversity from dependency graphs.

A CoNLL-U reader produces per-sentence dependency graphs (nodes carry UPOS
tags, edges carry relation labels); a Weisfeiler-Lehman subtree kernel
scores structural similarity between graphs; essay-level diversity is the
mean pairwise normalized kernel distance.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .metrics_base import MetricValue


class ConlluParseError(Exception):
    def __init__(self, message: str, line_no: int):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


@dataclass(frozen=True)
class DependencyGraph:
    sentence_id: int
    nodes: tuple[tuple[int, str], ...]          # (1-based index, pos tag)
    edges: tuple[tuple[int, int, str], ...]     # (head, dependent, relation); head 0 = root
    warnings: tuple[str, ...] = field(default=())

    def n_nodes(self) -> int:
        return len(self.nodes)


def parse_conllu(text: str) -> list[DependencyGraph]:
    """Parse CoNLL-U text into one graph per sentence block.

    Comment lines are skipped, as are multiword-token ranges and empty
    nodes (ids containing '-' or '.'). A block with zero or multiple
    head-0 edges is returned with a structural warning rather than
    rejected.
    """
    graphs: list[DependencyGraph] = []
    nodes: list[tuple[int, str]] = []
    edges: list[tuple[int, int, str]] = []

    def close_block():
        if not nodes:
            return
        roots = sum(1 for h, _, _ in edges if h == 0)
        warnings = ()
        if roots == 0:
            warnings = ("no root edge",)
        elif roots > 1:
            warnings = (f"{roots} root edges",)
        expected = list(range(1, len(nodes) + 1))
        if [i for i, _ in nodes] != expected:
            warnings = warnings + ("non-consecutive token ids",)
        graphs.append(
            DependencyGraph(len(graphs) + 1, tuple(nodes), tuple(edges), warnings)
        )
        nodes.clear()
        edges.clear()

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            close_block()
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluParseError(f"expected 10 tab-separated columns, got {len(cols)}", line_no)
        token_id = cols[0]
        if "-" in token_id or "." in token_id:
            continue
        try:
            idx = int(token_id)
        except ValueError:
            raise ConlluParseError(f"non-integer token id {token_id!r}", line_no)
        try:
            head = int(cols[6])
        except ValueError:
            raise ConlluParseError(f"non-integer HEAD {cols[6]!r}", line_no)
        nodes.append((idx, cols[3]))
        edges.append((head, idx, cols[7]))
    close_block()
    return graphs


def _compress(label: str, neighborhood: Sequence[str]) -> str:
    payload = label + "|" + ",".join(sorted(neighborhood))
    return hashlib.md5(payload.encode("utf-8")).hexdigest()


def wl_histograms(graph: DependencyGraph, iterations: int) -> list[Counter]:
    """Label-count histograms for refinement rounds 0..iterations.

    Refinement treats edges as undirected and appends the relation string
    to each neighbor label; head-0 edges connect to the virtual root and
    contribute no neighbor.
    """
    index_of = {idx: k for k, (idx, _) in enumerate(graph.nodes)}
    labels = [tag for _, tag in graph.nodes]
    neighbors: list[list[tuple[int, str]]] = [[] for _ in graph.nodes]
    for head, dep, rel in graph.edges:
        if head == 0:
            continue
        if head in index_of and dep in index_of:
            neighbors[index_of[dep]].append((index_of[head], rel))
            neighbors[index_of[head]].append((index_of[dep], rel))
    histograms = [Counter(labels)]
    for _ in range(iterations):
        labels = [
            _compress(labels[k], [f"{labels[j]}~{rel}" for j, rel in neighbors[k]])
            for k in range(len(labels))
        ]
        histograms.append(Counter(labels))
    return histograms


def _histogram_dot(h1: Sequence[Counter], h2: Sequence[Counter]) -> int:
    total = 0
    for c1, c2 in zip(h1, h2):
        if len(c2) < len(c1):
            c1, c2 = c2, c1
        total += sum(count * c2[label] for label, count in c1.items())
    return total


def wl_kernel(g1: DependencyGraph, g2: DependencyGraph, iterations: int = 3) -> float:
    """Weisfeiler-Lehman subtree kernel: summed histogram inner products
    over refinement rounds 0..iterations."""
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    return float(_histogram_dot(wl_histograms(g1, iterations), wl_histograms(g2, iterations)))


def syntactic_diversity(graphs: Sequence[DependencyGraph], iterations: int = 3) -> MetricValue:
    """Mean pairwise normalized WL kernel distance over ordered pairs,
    clamped to [0, 1]. Fewer than two graphs is degenerate (0.0)."""
    n = len(graphs)
    if n < 2:
        return MetricValue(0.0, degenerate=True)
    hists = [wl_histograms(g, iterations) for g in graphs]
    self_dots = [_histogram_dot(h, h) for h in hists]
    terms = []
    for i in range(n):
        for j in range(i + 1, n):
            k_ij = _histogram_dot(hists[i], hists[j])
            terms.append(2.0 * (1.0 - k_ij / math.sqrt(self_dots[i] * self_dots[j])))
    # fsum is exactly rounded, so the result is independent of pair order.
    value = math.fsum(terms) / (n * (n - 1))
    return MetricValue(max(0.0, min(1.0, value)))
