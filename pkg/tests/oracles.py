"""Independent reference implementations used by several test modules."""

import networkx as nx

from syndcim.adder_tree import rca_delay


def dag_longest_path(tree, cells) -> float:
    """Longest port-weighted path of a CSA tree computed on a networkx DAG, plus the RCA segment."""
    g = nx.DiGraph()
    g.add_node("__src__")
    for c in tree.cells:
        model = cells[c.kind]
        for ip, inet in c.inputs:
            g.add_edge("__src__", inet, w=0.0)
            for op, onet in c.outputs:
                d = model.delay(ip, op)
                if d is None:
                    continue
                prev = g.get_edge_data(inet, onet, {"w": float("-inf")})["w"]
                g.add_edge(inet, onet, w=max(prev, d))
    ends = {n for r in tree.rows for n in r}
    dist = {"__src__": 0.0}
    for n in nx.topological_sort(g):
        if n not in dist:
            continue
        for _, m, data in g.out_edges(n, data=True):
            dist[m] = max(dist.get(m, float("-inf")), dist[n] + data["w"])
    worst = max((dist.get(n, 0.0) for n in ends), default=0.0)
    return worst + rca_delay(tree.out_width, cells)


def brute_pareto(objs):
    """O(n^2) non-dominated subset (indices), all objectives minimized."""
    keep = []
    for i, a in enumerate(objs):
        dominated = False
        for j, b in enumerate(objs):
            if j != i and all(x <= y for x, y in zip(b, a)) and any(x < y for x, y in zip(b, a)):
                dominated = True
                break
        if not dominated:
            keep.append(i)
    return keep
