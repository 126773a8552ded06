#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Directed weighted networks and their portable serializations.

Key Responsibilities:
- `NetworkGraph`, shared by Granger networks (weight = p-value, bands are
  significance levels) and FEVD networks (weight = percent share, bands
  are magnitude thresholds).
- `threshold_network`: edges j -> i for every off-diagonal share of a
  connectedness table at or above the smallest threshold.
- DOT and JSON writers with deterministic ordering, a JSON reader, and
  networkx-based summaries (edge counts per group pair, degree ranking).

Bidirectional pairs stay two directed edges; renderers may merge them.
"""

from collections import OrderedDict
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import networkx as nx
import pandas as pd

from config import DEFAULT_THRESHOLDS, DOT_BAND_STYLES, DOT_GROUP_COLORS, WEIGHT_SEMANTICS
from errors import ExportError
from fevd import ConnectednessTable
from utils import dump_json, logger, parse_json_content

KINDS = ("granger", "fevd")


@dataclass(frozen=True)
class Node:
    name: str
    group: str


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    weight: float
    band: str


@dataclass(frozen=True)
class NetworkGraph:
    """Nodes keep their given order; edges are kept sorted by (source, target).

    `bands` is ordered strongest first. `cutoffs` holds the significance
    levels (granger) or magnitude thresholds (fevd) the graph was built with.
    """

    kind: str
    nodes: Tuple[Node, ...]
    edges: Tuple[Edge, ...] = ()
    bands: Tuple[str, ...] = ()
    cutoffs: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ExportError(f"unknown network kind '{self.kind}'")
        nodes = tuple(self.nodes)
        names = [n.name for n in nodes]
        if len(set(names)) != len(names):
            raise ExportError("duplicate node names")
        known = set(names)
        edges = tuple(sorted(self.edges, key=lambda e: (e.source, e.target)))
        seen = set()
        for e in edges:
            if e.source not in known or e.target not in known:
                raise ExportError(f"edge {e.source}->{e.target} references an unknown node")
            if e.source == e.target:
                raise ExportError(f"self-loop on {e.source}")
            if (e.source, e.target) in seen:
                raise ExportError(f"duplicate edge {e.source}->{e.target}")
            seen.add((e.source, e.target))
            if self.bands and e.band not in self.bands:
                raise ExportError(f"edge {e.source}->{e.target} has unknown band '{e.band}'")
        if self.cutoffs and edges:
            if self.kind == "fevd" and min(e.weight for e in edges) < min(self.cutoffs):
                raise ExportError("fevd edge below the minimum threshold")
            if self.kind == "granger" and max(e.weight for e in edges) > max(self.cutoffs):
                raise ExportError("granger edge above the largest significance level")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "bands", tuple(self.bands))
        object.__setattr__(self, "cutoffs", tuple(float(c) for c in self.cutoffs))

    @property
    def weight_semantics(self) -> str:
        return WEIGHT_SEMANTICS[self.kind]

    def groups(self) -> List[str]:
        """Group labels in node order of first appearance."""
        return list(OrderedDict.fromkeys(n.group for n in self.nodes))

    def edge_set(self):
        return {(e.source, e.target) for e in self.edges}


# --- Construction ---


def threshold_bands(thresholds: Sequence[float]) -> List[str]:
    """Band labels weakest first: (5, 15) -> ["5-15", ">=15"]."""
    labels = [f"{lo:g}-{hi:g}" for lo, hi in zip(thresholds, thresholds[1:])]
    labels.append(f">={thresholds[-1]:g}")
    return labels


def threshold_network(
    table: ConnectednessTable, thresholds: Sequence[float] = DEFAULT_THRESHOLDS
) -> NetworkGraph:
    """Edge j -> i for every off-diagonal sgvd(i, j) >= min(thresholds).

    The band is the highest threshold the share meets (>= comparison).
    """
    thresholds = [float(t) for t in thresholds]
    if not thresholds or any(t <= 0 for t in thresholds):
        raise ExportError("thresholds must be positive")
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ExportError("thresholds must be increasing")
    labels = threshold_bands(thresholds)

    names = table.names
    edges = []
    for i, target in enumerate(names):
        for j, source in enumerate(names):
            if i == j:
                continue
            share = float(table.sgvd[i, j])
            met = [k for k, t in enumerate(thresholds) if share >= t]
            if met:
                edges.append(Edge(source, target, share, labels[met[-1]]))
    nodes = tuple(Node(n, table.partition.label(n)) for n in names)
    graph = NetworkGraph("fevd", nodes, tuple(edges), tuple(reversed(labels)), tuple(thresholds))
    logger.info("FEVD network (h=%d): %d edge(s) at thresholds %s", table.h, len(edges), thresholds)
    return graph


# --- networkx view and summaries ---


def to_networkx(g: NetworkGraph) -> nx.DiGraph:
    graph = nx.DiGraph(kind=g.kind)
    for node in g.nodes:
        graph.add_node(node.name, group=node.group)
    for e in g.edges:
        graph.add_edge(e.source, e.target, weight=e.weight, band=e.band)
    return graph


def group_edge_counts(g: NetworkGraph) -> pd.DataFrame:
    """Edge counts per (source group, target group), one column per band plus total."""
    graph = to_networkx(g)
    groups = g.groups()
    bands = list(g.bands) or sorted({e.band for e in g.edges})
    counts = {(s, t): dict.fromkeys(bands, 0) for s in groups for t in groups}
    for source, target, data in graph.edges(data=True):
        key = (graph.nodes[source]["group"], graph.nodes[target]["group"])
        counts[key][data["band"]] = counts[key].get(data["band"], 0) + 1
    rows = []
    for (s, t), per_band in counts.items():
        rows.append({"source_group": s, "target_group": t, **per_band, "total": sum(per_band.values())})
    return pd.DataFrame(rows, columns=["source_group", "target_group", *bands, "total"])


def node_degrees(g: NetworkGraph) -> pd.DataFrame:
    """In/out/total degree per node, most connected first (ties by name)."""
    graph = to_networkx(g)
    rows = [
        {
            "node": name,
            "group": graph.nodes[name]["group"],
            "in": graph.in_degree(name),
            "out": graph.out_degree(name),
            "total": graph.degree(name),
        }
        for name in graph.nodes
    ]
    frame = pd.DataFrame(rows, columns=["node", "group", "in", "out", "total"])
    frame = frame.sort_values(["total", "node"], ascending=[False, True], kind="mergesort")
    return frame.reset_index(drop=True)


# --- DOT ---


def _quote(text: str) -> str:
    return '"' + str(text).replace("\\", "\\\\").replace('"', '\\"') + '"'


def _weight_label(g: NetworkGraph, weight: float) -> str:
    return f"{weight:.3f}" if g.kind == "granger" else f"{weight:.2f}"


def to_dot(g: NetworkGraph, style: Optional[dict] = None) -> str:
    """DOT digraph; nodes and edges sorted lexicographically.

    `style` may override "band_styles" (list of attribute dicts, strongest
    band first) and "group_colors" (list of fill colors).
    """
    style = style or {}
    band_styles = style.get("band_styles", DOT_BAND_STYLES)
    group_colors = style.get("group_colors", DOT_GROUP_COLORS)
    colors = {group: group_colors[k % len(group_colors)] for k, group in enumerate(g.groups())}
    rank = {band: k for k, band in enumerate(g.bands)}

    lines = [
        "digraph G {",
        f"  // kind: {g.kind}; weight: {g.weight_semantics}",
        "  node [shape=ellipse, style=filled];",
    ]
    for node in sorted(g.nodes, key=lambda n: n.name):
        lines.append(f"  {_quote(node.name)} [group={_quote(node.group)}, fillcolor={_quote(colors[node.group])}];")
    for e in g.edges:
        attrs = {"label": _weight_label(g, e.weight), "band": e.band}
        attrs.update(band_styles[min(rank.get(e.band, len(band_styles) - 1), len(band_styles) - 1)])
        rendered = ", ".join(f"{k}={_quote(v)}" for k, v in attrs.items())
        lines.append(f"  {_quote(e.source)} -> {_quote(e.target)} [{rendered}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


# --- JSON ---


def to_json(g: NetworkGraph) -> str:
    """{kind, weight_semantics, bands, cutoffs, nodes: [{id, group}], edges: [...]}; full-precision weights."""
    payload = {
        "kind": g.kind,
        "weight_semantics": g.weight_semantics,
        "bands": list(g.bands),
        "cutoffs": list(g.cutoffs),
        "nodes": [{"id": n.name, "group": n.group} for n in g.nodes],
        "edges": [
            {"source": e.source, "target": e.target, "weight": e.weight, "band": e.band} for e in g.edges
        ],
    }
    return dump_json(payload)


def from_json(text: str) -> NetworkGraph:
    try:
        data = parse_json_content(text)
        nodes = tuple(Node(n["id"], n["group"]) for n in data["nodes"])
        edges = tuple(Edge(e["source"], e["target"], float(e["weight"]), e["band"]) for e in data["edges"])
        return NetworkGraph(
            data["kind"], nodes, edges, tuple(data.get("bands", ())), tuple(data.get("cutoffs", ()))
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ExportError(f"malformed network JSON ({e})") from e
