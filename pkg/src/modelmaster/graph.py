"""Cell dependency graph and cell classification."""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx

from . import model as m


def references(expr) -> list:
    """Every address an expression reads, ranges expanded, in first-use order."""
    out = []
    for node in m.walk(expr):
        if isinstance(node, m.CellRef):
            out.append(node.addr)
        elif isinstance(node, m.CellRange):
            out.extend(node.cells())
    return list(dict.fromkeys(out))


@dataclass
class DependencyGraph:
    graph: nx.DiGraph            # edge u -> v: v's formula reads u
    cellmap: m.CellMap

    @property
    def nodes(self) -> set:
        return set(self.graph.nodes)

    @property
    def edges(self) -> set:
        return set(self.graph.edges)

    def dependents(self, addr) -> list:
        return sorted(self.graph.successors(addr)) if addr in self.graph else []

    def precedents(self, addr) -> list:
        return sorted(self.graph.predecessors(addr)) if addr in self.graph else []

    def is_formula(self, addr) -> bool:
        entry = self.cellmap.cells.get(addr)
        return entry is not None and isinstance(entry.content, m.Formula)

    @property
    def inputs(self) -> list:
        """Non-formula cells (present or blank) that some formula reads."""
        return sorted(a for a in self.graph if not self.is_formula(a) and self.graph.out_degree(a) > 0)

    @property
    def outputs(self) -> list:
        """Formula cells nothing else reads."""
        return sorted(a for a in self.graph if self.is_formula(a) and self.graph.out_degree(a) == 0)

    @property
    def static(self) -> list:
        return sorted(a for a in self.graph
                      if self.graph.in_degree(a) == 0 and self.graph.out_degree(a) == 0
                      and not self.is_formula(a))

    @property
    def missing(self) -> list:
        """Addresses read by formulas but absent from the cellmap."""
        return sorted(a for a in self.graph if a not in self.cellmap.cells)

    @property
    def cycles(self) -> list:
        found = []
        for comp in nx.strongly_connected_components(self.graph):
            if len(comp) > 1 or any(self.graph.has_edge(a, a) for a in comp):
                found.append(sorted(comp))
        return sorted(found)

    def evaluation_order(self) -> list:
        """Formula cells, dependencies first, ties broken row-major."""
        sub = self.graph.subgraph(a for a in self.graph if self.is_formula(a))
        return list(nx.lexicographical_topological_sort(sub))


def build_dependency_graph(cm: m.CellMap) -> DependencyGraph:
    g = nx.DiGraph()
    g.add_nodes_from(cm.cells)
    for addr, entry in cm.cells.items():
        if isinstance(entry.content, m.Formula):
            for ref in references(entry.content.expr):
                g.add_edge(ref, addr)
    return DependencyGraph(g, cm)
