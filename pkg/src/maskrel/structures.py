"""Coherent system designs as min/max expression trees.

A structure is written in a small DSL, e.g. ``max(min(1,2), min(1,3), min(2,3))``
for the 2-out-of-3 system. ``series`` and ``parallel`` are accepted as aliases
for ``min`` and ``max``. Component indices are 1-based everywhere in this module.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Sequence, Union

import numpy as np

__all__ = [
    "Leaf",
    "Min",
    "Max",
    "StructureNode",
    "SystemStructure",
    "StructureError",
    "parse_structure",
    "series",
    "parallel",
    "eval_lifetime",
    "minimal_cut_sets",
    "classify_components",
    "masked_candidate_set",
    "UNCENSORED",
    "RIGHT_CENSORED",
    "LEFT_CENSORED",
]

UNCENSORED = 1
RIGHT_CENSORED = 2
LEFT_CENSORED = 3

# brute-force cut enumeration visits 2**m subsets
MAX_COMPONENTS = 20


class StructureError(ValueError):
    """Malformed or non-coherent structure, or inconsistent lifetimes."""


@dataclass(frozen=True)
class Leaf:
    index: int

    def __str__(self):
        return str(self.index)


@dataclass(frozen=True)
class Min:
    children: tuple

    def __str__(self):
        return "min(" + ", ".join(str(c) for c in self.children) + ")"


@dataclass(frozen=True)
class Max:
    children: tuple

    def __str__(self):
        return "max(" + ", ".join(str(c) for c in self.children) + ")"


StructureNode = Union[Leaf, Min, Max]


def _fold(node: StructureNode, x: np.ndarray) -> np.ndarray:
    # x has components on the last axis
    if isinstance(node, Leaf):
        return x[..., node.index - 1]
    values = [_fold(child, x) for child in node.children]
    op = np.minimum if isinstance(node, Min) else np.maximum
    out = values[0]
    for v in values[1:]:
        out = op(out, v)
    return out


def _leaves(node: StructureNode) -> set[int]:
    if isinstance(node, Leaf):
        return {node.index}
    out: set[int] = set()
    for child in node.children:
        out |= _leaves(child)
    return out


@dataclass(frozen=True)
class SystemStructure:
    """A coherent system: an expression tree over components ``1..m``."""

    root: StructureNode
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise StructureError("a structure needs at least one component")
        if self.m > MAX_COMPONENTS:
            raise StructureError(f"at most {MAX_COMPONENTS} components are supported")
        _check_node(self.root)
        used = _leaves(self.root)
        expected = set(range(1, self.m + 1))
        if used - expected:
            raise StructureError(f"leaf indices out of range 1..{self.m}: {sorted(used - expected)}")
        if expected - used:
            raise StructureError(f"components never referenced: {sorted(expected - used)}")

    @classmethod
    def parse(cls, text: str, m: int | None = None) -> "SystemStructure":
        return parse_structure(text, m)

    def __str__(self):
        return str(self.root)

    @cached_property
    def cut_sets(self) -> tuple[tuple[int, ...], ...]:
        return tuple(minimal_cut_sets(self))

    def lifetime(self, x) -> np.ndarray:
        return eval_lifetime(self, x)


def _check_node(node):
    if isinstance(node, Leaf):
        if not isinstance(node.index, (int, np.integer)):
            raise StructureError(f"leaf index must be an integer, got {node.index!r}")
        return
    if not isinstance(node, (Min, Max)):
        raise StructureError(f"unknown node type {type(node).__name__}")
    if len(node.children) < 2:
        raise StructureError("min/max nodes need at least two children")
    for child in node.children:
        _check_node(child)


_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_]+)|(.))")
_OPS = {"min": Min, "series": Min, "max": Max, "parallel": Max}


def _tokenize(text: str) -> list[str]:
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if match is None:
            break
        tok = match.group(1) or match.group(2) or match.group(3)
        if tok is not None and not tok.isspace():
            tokens.append(tok)
        pos = match.end()
    return tokens


def parse_structure(text: str, m: int | None = None) -> SystemStructure:
    """Parse the structure DSL.

    Parameters
    ----------
    text : str
        Expression such as ``min(max(1,2), max(min(3,4),5))``.
    m : int, optional
        Number of components. Defaults to the largest leaf index.

    Raises
    ------
    StructureError
        On syntax errors or when the leaves do not cover ``1..m``.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise StructureError("empty structure expression")
    pos = 0

    def expect(tok):
        nonlocal pos
        if pos >= len(tokens) or tokens[pos] != tok:
            found = tokens[pos] if pos < len(tokens) else "end of input"
            raise StructureError(f"expected {tok!r}, found {found!r}")
        pos += 1

    def node():
        nonlocal pos
        if pos >= len(tokens):
            raise StructureError("unexpected end of input")
        tok = tokens[pos]
        pos += 1
        if tok.isdigit():
            index = int(tok)
            if index < 1:
                raise StructureError("component indices start at 1")
            return Leaf(index)
        op = _OPS.get(tok.lower())
        if op is None:
            raise StructureError(f"unknown token {tok!r}")
        expect("(")
        children = [node()]
        while pos < len(tokens) and tokens[pos] == ",":
            pos += 1
            children.append(node())
        expect(")")
        return op(tuple(children))

    root = node()
    if pos != len(tokens):
        raise StructureError(f"trailing input starting at {tokens[pos]!r}")
    if m is None:
        m = max(_leaves(root))
    return SystemStructure(root, m)


def series(m: int) -> SystemStructure:
    if m == 1:
        return SystemStructure(Leaf(1), 1)
    return SystemStructure(Min(tuple(Leaf(j) for j in range(1, m + 1))), m)


def parallel(m: int) -> SystemStructure:
    if m == 1:
        return SystemStructure(Leaf(1), 1)
    return SystemStructure(Max(tuple(Leaf(j) for j in range(1, m + 1))), m)


def eval_lifetime(s: SystemStructure, x):
    """System lifetime for component lifetimes ``x``.

    ``x`` may be a single vector of length ``m`` or an array whose last axis
    has length ``m`` (one system per row).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != s.m:
        raise StructureError(f"expected {s.m} component lifetimes, got shape {x.shape}")
    out = _fold(s.root, x)
    return float(out) if out.ndim == 0 else out


def minimal_cut_sets(s: SystemStructure) -> list[tuple[int, ...]]:
    """All minimal cut sets, sorted by size and then lexicographically.

    Brute force over every subset of components, so the cost grows as
    ``2**m``; structures are capped at 20 components.
    """
    found: list[tuple[int, ...]] = []
    found_sets: list[frozenset] = []
    for size in range(1, s.m + 1):
        candidates = [c for c in combinations(range(1, s.m + 1), size)
                      if not any(f <= set(c) for f in found_sets)]
        if not candidates:
            continue
        x = np.full((len(candidates), s.m), np.inf)
        for row, c in enumerate(candidates):
            x[row, np.asarray(c) - 1] = 0.0
        failed = _fold(s.root, x) == 0.0
        for c, is_cut in zip(candidates, failed):
            if is_cut:
                found.append(c)
                found_sets.append(frozenset(c))
    return found


def _failing_cuts(s: SystemStructure, x: np.ndarray, t: float):
    return [c for c in s.cut_sets if max(x[j - 1] for j in c) == t]


def classify_components(s: SystemStructure, x) -> tuple[float, np.ndarray]:
    """System lifetime and censoring code of every component.

    Returns ``(T, delta)`` where ``delta[j-1]`` is 1 when component ``j``
    caused the failure, 2 when it was still working at ``T`` and 3 when it had
    already failed. On ties at ``T`` the smallest index belonging to a failing
    cut is the cause; other tied components are coded 3.
    """
    x = np.asarray(x, dtype=float)
    t = eval_lifetime(s, x)
    delta = np.where(x > t, RIGHT_CENSORED, LEFT_CENSORED).astype(int)
    tied = np.flatnonzero(x == t) + 1
    if len(tied) == 1:
        cause = int(tied[0])
    else:
        in_failing = set().union(*_failing_cuts(s, x, t))
        cause = next((int(j) for j in tied if j in in_failing), int(tied[0]))
    delta[cause - 1] = UNCENSORED
    return t, delta


def masked_candidate_set(s: SystemStructure, x, delta: Sequence[int] | None = None) -> tuple[int, ...]:
    """The minimal cut set that caused the failure.

    These are the components whose status gets hidden when the system is
    masked. Components that died before ``T`` outside this cut stay observed
    as left-censored. When several minimal cuts complete at ``T`` the smallest
    one containing the cause wins, ties broken lexicographically.

    Raises
    ------
    StructureError
        If no minimal cut set completes exactly at the system lifetime.
    """
    x = np.asarray(x, dtype=float)
    if delta is None:
        t, delta = classify_components(s, x)
    else:
        t = eval_lifetime(s, x)
    cause = int(np.flatnonzero(np.asarray(delta) == UNCENSORED)[0]) + 1
    # cut_sets is already ordered by size then lexicographically
    for c in _failing_cuts(s, x, t):
        if cause in c:
            return c
    raise StructureError("no minimal cut set fails at the system lifetime")
