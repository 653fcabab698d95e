"""Shortest-augmenting-path maximum flow, kept apart from the engine's push-relabel."""

from __future__ import annotations

from collections import deque
from fractions import Fraction


def edmonds_karp(source_caps: dict, sink_caps: dict, edges) -> Fraction:
    """Maximum flow of the bipartite network source -> left -> right -> sink (inner edges unbounded)."""
    src, snk = ("src",), ("snk",)
    cap: dict = {}

    def add(u, v, c):
        cap.setdefault(u, {})
        cap.setdefault(v, {})
        cap[u][v] = cap[u].get(v, 0) + c
        cap[v].setdefault(u, 0)

    total = sum(source_caps.values(), Fraction(0))
    for s, c in source_caps.items():
        add(src, ("L", s), c)
    for t, c in sink_caps.items():
        add(("R", t), snk, c)
    for s, t in edges:
        if s in source_caps and t in sink_caps:
            add(("L", s), ("R", t), total)  # never binding, so as good as infinite
    if src not in cap or snk not in cap:
        return Fraction(0)
    value = Fraction(0)
    while True:
        parent = {src: None}
        queue = deque([src])
        while queue and snk not in parent:
            u = queue.popleft()
            for v, c in cap[u].items():
                if c > 0 and v not in parent:
                    parent[v] = u
                    queue.append(v)
        if snk not in parent:
            return value
        path = []
        v = snk
        while parent[v] is not None:
            path.append((parent[v], v))
            v = parent[v]
        delta = min(cap[u][v] for u, v in path)
        for u, v in path:
            cap[u][v] -= delta
            cap[v][u] += delta
        value += delta
