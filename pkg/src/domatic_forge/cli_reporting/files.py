"""Plain-text file formats for graphs, colorings, vertex sets, and edge
colorings.  Every writer is deterministic and every reader re-validates the
invariants of the value it builds."""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import numpy as np

from ..colorings import EdgeColoring, VertexColoring
from ..measured_graph import MeasuredGraph, _as_mask, build_from_generators


class _Tokens:
    """Whitespace token stream over a text file, tolerant of line wrapping."""

    def __init__(self, text: str, path):
        self.items = text.split()
        self.pos = 0
        self.path = path

    def next(self) -> str:
        if self.pos >= len(self.items):
            raise ValueError(f"{self.path}: unexpected end of file")
        tok = self.items[self.pos]
        self.pos += 1
        return tok

    def expect(self, word: str):
        tok = self.next()
        if tok != word:
            raise ValueError(f"{self.path}: expected {word!r}, found {tok!r}")

    def integer(self) -> int:
        tok = self.next()
        try:
            return int(tok)
        except ValueError:
            raise ValueError(f"{self.path}: expected an integer, found {tok!r}") from None

    def done(self):
        if self.pos != len(self.items):
            raise ValueError(f"{self.path}: trailing content after {self.pos} tokens")


def _fraction(tok: str, path) -> Fraction:
    num, sep, den = tok.partition("/")
    if not sep:
        raise ValueError(f"{path}: weight {tok!r} is not of the form num/den")
    try:
        return Fraction(int(num), int(den))
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"{path}: bad weight {tok!r}") from None


def write_graph(path, g: MeasuredGraph):
    lines = [f"vertices {g.vertex_count} generators {len(g.generators)}"]
    for w in g.weights:
        lines.append(f"weight {w.numerator}/{w.denominator}")
    for perm in g.generators:
        lines.append("perm")
        lines.append(" ".join(str(int(x)) for x in perm))
    Path(path).write_text("\n".join(lines) + "\n")


def read_graph(path) -> MeasuredGraph:
    toks = _Tokens(Path(path).read_text(), path)
    toks.expect("vertices")
    n = toks.integer()
    toks.expect("generators")
    gcount = toks.integer()
    weights = []
    for _ in range(n):
        toks.expect("weight")
        weights.append(_fraction(toks.next(), path))
    perms = []
    for _ in range(gcount):
        toks.expect("perm")
        perms.append(np.array([toks.integer() for _ in range(n)], dtype=np.int64))
    toks.done()
    return build_from_generators(weights, perms)


def write_coloring(path, f: VertexColoring):
    palette = "none" if f.palette is None else str(f.palette)
    body = " ".join(str(int(c)) for c in f.colors)
    Path(path).write_text(f"coloring {len(f.colors)} palette {palette}\n{body}\n")


def read_coloring(path) -> VertexColoring:
    toks = _Tokens(Path(path).read_text(), path)
    toks.expect("coloring")
    n = toks.integer()
    toks.expect("palette")
    tok = toks.next()
    palette = None if tok == "none" else int(tok)
    colors = np.array([toks.integer() for _ in range(n)], dtype=np.int64)
    toks.done()
    return VertexColoring(colors, palette)


def write_vertex_set(path, g: MeasuredGraph, vertices):
    idx = np.flatnonzero(_as_mask(g, vertices))
    body = " ".join(str(int(v)) for v in idx)
    text = f"vertexset {g.vertex_count} size {len(idx)}\n"
    Path(path).write_text(text + body + "\n" if len(idx) else text)


def read_vertex_set(path):
    """Returns (declared vertex count, sorted index array)."""
    toks = _Tokens(Path(path).read_text(), path)
    toks.expect("vertexset")
    n = toks.integer()
    toks.expect("size")
    size = toks.integer()
    idx = np.array(sorted(toks.integer() for _ in range(size)), dtype=np.int64)
    toks.done()
    if len(idx) and (idx[0] < 0 or idx[-1] >= n):
        raise ValueError(f"{path}: vertex index outside 0..{n - 1}")
    if len(np.unique(idx)) != len(idx):
        raise ValueError(f"{path}: duplicate vertex in set")
    return n, idx


def write_edge_coloring(path, ec: EdgeColoring):
    lines = [f"edgecoloring {len(ec.edges)} vertices {ec.vertex_count} "
             f"proper {int(ec.proper)}"]
    for (u, v), c in zip(ec.edges, ec.colors):
        lines.append(f"{int(u)} {int(v)} {int(c)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_coloring(path) -> EdgeColoring:
    toks = _Tokens(Path(path).read_text(), path)
    toks.expect("edgecoloring")
    m = toks.integer()
    toks.expect("vertices")
    n = toks.integer()
    toks.expect("proper")
    proper = bool(toks.integer())
    rows = [(toks.integer(), toks.integer(), toks.integer()) for _ in range(m)]
    toks.done()
    edges = np.array([(u, v) for u, v, _ in rows], dtype=np.int64).reshape(-1, 2)
    colors = np.array([c for _, _, c in rows], dtype=np.int64)
    if len(edges) and (edges.min() < 0 or edges.max() >= n):
        raise ValueError(f"{path}: edge endpoint outside 0..{n - 1}")
    return EdgeColoring(edges, colors, proper, n)
