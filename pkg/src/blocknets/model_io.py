"""Block-set definition, ingestion, validation and degree conventions.

A block set is the complete model definition: a list of blocks (small
multigraphs with a hook, or small directed multigraphs with two poles),
their selection probabilities, and the linear attachment parameters
chi and rho giving vertex weights w(k) = chi*k + rho.

Numbers may be given as integers, as exact fraction strings "a/b", or as
decimals.  When every parameter is exact the whole model is analyzed in
rational arithmetic and reported values are exact; any decimal input
switches the model to binary64 arithmetic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from fractions import Fraction
from importlib import resources
from typing import Mapping, Sequence, Union

Num = Union[Fraction, float]

HOOKING = "hooking"
BIPOLAR = "bipolar"

PROB_SUM_TOL = 1e-9


class BlockSetError(ValueError):
    """Invalid block-set input.  Carries the violated rule id and block name."""

    def __init__(self, rule: str, message: str, block: str | None = None):
        self.rule = rule
        self.block = block
        where = f" [block {block!r}]" if block else ""
        super().__init__(f"{rule}{where}: {message}")


class InternalConsistencyError(RuntimeError):
    """Two independent constructions of the same quantity disagree."""


def parse_number(value) -> tuple[Num, bool]:
    """Parse a JSON scalar into (number, is_exact).

    Integers and "a/b" strings are exact rationals; floats are inexact.
    """
    if isinstance(value, bool):
        raise BlockSetError("schema", f"expected a number, got {value!r}")
    if isinstance(value, int):
        return Fraction(value), True
    if isinstance(value, float):
        return value, False
    if isinstance(value, str):
        try:
            return Fraction(value), True
        except (ValueError, ZeroDivisionError) as exc:
            raise BlockSetError("schema", f"bad numeric string {value!r}: {exc}")
    raise BlockSetError("schema", f"expected a number, got {type(value).__name__}")


def format_number(x: Num):
    """JSON-friendly form: exact rationals as 'a/b' strings (ints stay ints)."""
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else str(x)
    return float(x)


def as_float(x: Num) -> float:
    return float(x)


@dataclass(frozen=True)
class Block:
    """One growth unit: a connected multigraph with a hook, or a connected
    directed multigraph with a unique source (north) and sink (south).

    Edges are stored with multiplicity; for bipolar blocks each pair is an
    ordered arc (tail, head).  A self-loop contributes 2 to an undirected
    degree and 1 to each of outdegree and indegree.
    """

    name: str
    kind: str
    vertices: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    probability: Num
    hook: str | None = None
    north: str | None = None
    south: str | None = None

    def degree(self, v: str) -> int:
        """Undirected degree of v (self-loops count twice)."""
        if v not in self.vertices:
            raise BlockSetError("unknown-vertex", f"no vertex {v!r}", self.name)
        d = 0
        for a, b in self.edges:
            if a == v:
                d += 1
            if b == v:
                d += 1
        return d

    def outdegree(self, v: str) -> int:
        if v not in self.vertices:
            raise BlockSetError("unknown-vertex", f"no vertex {v!r}", self.name)
        return sum(1 for a, _ in self.edges if a == v)

    def indegree(self, v: str) -> int:
        if v not in self.vertices:
            raise BlockSetError("unknown-vertex", f"no vertex {v!r}", self.name)
        return sum(1 for _, b in self.edges if b == v)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def new_vertices(self) -> tuple[str, ...]:
        """Vertices that enter the network when this block is attached
        (everything except the hook, or except both poles)."""
        if self.kind == HOOKING:
            return tuple(v for v in self.vertices if v != self.hook)
        return tuple(v for v in self.vertices if v not in (self.north, self.south))

    def latch_increment(self) -> int:
        """How much the latch's tracked degree grows on attachment."""
        if self.kind == HOOKING:
            return self.degree(self.hook)
        return self.outdegree(self.north) - 1


@dataclass(frozen=True)
class BlockSet:
    """A validated model: blocks, probabilities, and attachment weights."""

    kind: str
    blocks: tuple[Block, ...]
    chi: Num
    rho: Num
    r: int
    initial_block: Union[int, str] = 0  # index, or "random"
    exact: bool = True

    def w(self, k: int) -> Num:
        """Attachment weight of a vertex with (out)degree k."""
        return self.chi * k + self.rho

    @property
    def probabilities(self) -> tuple[Num, ...]:
        return tuple(b.probability for b in self.blocks)

    def block_named(self, name: str) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def to_dict(self) -> dict:
        """Canonical JSON-ready form; parse(serialize(bs)) == bs."""
        doc = {
            "kind": self.kind,
            "chi": format_number(self.chi),
            "rho": format_number(self.rho),
            "r": self.r,
            "initial_block": self.initial_block,
            "blocks": [],
        }
        for b in self.blocks:
            entry = {
                "name": b.name,
                "probability": format_number(b.probability),
                "vertices": list(b.vertices),
                "edges": [list(e) for e in b.edges],
            }
            if self.kind == HOOKING:
                entry["hook"] = b.hook
            else:
                entry["north"] = b.north
                entry["south"] = b.south
            doc["blocks"].append(entry)
        return doc

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def _check_connected(block: Block) -> None:
    """Underlying undirected multigraph must be connected."""
    if not block.vertices:
        raise BlockSetError("schema", "no vertices", block.name)
    adj: dict[str, set[str]] = {v: set() for v in block.vertices}
    for a, b in block.edges:
        adj[a].add(b)
        adj[b].add(a)
    seen = {block.vertices[0]}
    stack = [block.vertices[0]]
    while stack:
        for u in adj[stack.pop()]:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    if len(seen) != len(block.vertices):
        raise BlockSetError("connectivity", "block is not connected", block.name)


def _validate_block(block: Block) -> None:
    if len(block.vertices) != len(set(block.vertices)):
        raise BlockSetError("schema", "duplicate vertex ids", block.name)
    if len(block.vertices) < 2:
        raise BlockSetError("schema", "a block needs at least 2 vertices", block.name)
    for a, b in block.edges:
        if a not in block.vertices or b not in block.vertices:
            raise BlockSetError(
                "edge-endpoint", f"edge ({a!r},{b!r}) uses an unlisted vertex", block.name
            )
    if not (0 < block.probability <= 1):
        raise BlockSetError("param-domain", "probability must lie in (0,1]", block.name)
    _check_connected(block)

    if block.kind == HOOKING:
        if block.hook is None or block.hook not in block.vertices:
            raise BlockSetError("schema", "hook must be a listed vertex", block.name)
    else:
        if block.north is None or block.north not in block.vertices:
            raise BlockSetError("schema", "north pole must be a listed vertex", block.name)
        if block.south is None or block.south not in block.vertices:
            raise BlockSetError("schema", "south pole must be a listed vertex", block.name)
        if block.north == block.south:
            raise BlockSetError("pole-count", "poles must be distinct", block.name)
        sources = [v for v in block.vertices if block.indegree(v) == 0]
        sinks = [v for v in block.vertices if block.outdegree(v) == 0]
        if sources != [block.north]:
            raise BlockSetError(
                "pole-count",
                f"the north pole must be the unique source (sources: {sources})",
                block.name,
            )
        if set(sinks) != {block.south}:
            raise BlockSetError(
                "pole-count",
                f"the south pole must be the unique sink (sinks: {sinks})",
                block.name,
            )
        for a, b in block.edges:
            if a == b and a in (block.north, block.south):
                raise BlockSetError(
                    "pole-count", "self-loops are not allowed on poles", block.name
                )


def validate_blockset(bs: BlockSet) -> BlockSet:
    if bs.kind not in (HOOKING, BIPOLAR):
        raise BlockSetError("schema", f"kind must be 'hooking' or 'bipolar', got {bs.kind!r}")
    if not bs.blocks:
        raise BlockSetError("schema", "at least one block is required")
    names = [b.name for b in bs.blocks]
    if len(names) != len(set(names)):
        raise BlockSetError("schema", "duplicate block names")
    for b in bs.blocks:
        if b.kind != bs.kind:
            raise BlockSetError("schema", "block kind does not match set kind", b.name)
        _validate_block(b)
    total = sum(float(b.probability) for b in bs.blocks)
    if abs(total - 1.0) > PROB_SUM_TOL:
        raise BlockSetError("prob-sum", f"probabilities sum to {total!r}, expected 1")
    if not (float(bs.chi) >= 0 and float(bs.chi) + float(bs.rho) > 0):
        raise BlockSetError(
            "param-domain", f"need chi >= 0 and chi + rho > 0 (chi={bs.chi}, rho={bs.rho})"
        )
    if bs.r < 1:
        raise BlockSetError("param-domain", f"r must be >= 1, got {bs.r}")
    if bs.initial_block != "random":
        if not isinstance(bs.initial_block, int) or not (0 <= bs.initial_block < len(bs.blocks)):
            raise BlockSetError("param-domain", f"bad initial_block {bs.initial_block!r}")
    return bs


def blockset_from_dict(doc: Mapping) -> BlockSet:
    """Build and validate a BlockSet from a parsed JSON document."""
    if not isinstance(doc, Mapping):
        raise BlockSetError("schema", "top-level JSON value must be an object")
    try:
        kind = doc["kind"]
        blocks_doc = doc["blocks"]
    except KeyError as exc:
        raise BlockSetError("schema", f"missing required field {exc}")
    if kind not in (HOOKING, BIPOLAR):
        raise BlockSetError("schema", f"kind must be 'hooking' or 'bipolar', got {kind!r}")

    chi, chi_exact = parse_number(doc.get("chi", 0))
    rho, rho_exact = parse_number(doc.get("rho", 1))
    exact = chi_exact and rho_exact

    blocks = []
    if not isinstance(blocks_doc, Sequence) or isinstance(blocks_doc, (str, bytes)):
        raise BlockSetError("schema", "'blocks' must be a list")
    for i, bdoc in enumerate(blocks_doc):
        name = bdoc.get("name", f"block{i}")
        try:
            prob, prob_exact = parse_number(bdoc["probability"])
            vertices = tuple(str(v) for v in bdoc["vertices"])
            edges = tuple((str(a), str(b)) for a, b in bdoc["edges"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BlockSetError("schema", f"bad block entry: {exc!r}", name)
        exact = exact and prob_exact
        blocks.append(
            Block(
                name=str(name),
                kind=kind,
                vertices=vertices,
                edges=edges,
                probability=prob,
                hook=bdoc.get("hook"),
                north=bdoc.get("north"),
                south=bdoc.get("south"),
            )
        )

    r = doc.get("r", 3)
    if not isinstance(r, int):
        raise BlockSetError("schema", f"r must be an integer, got {r!r}")
    initial = doc.get("initial_block", 0)

    # Exact mode additionally needs the probabilities to sum to 1 exactly,
    # otherwise rational identities (e.g. the g-mass summing to 1) would fail.
    if exact and sum(b.probability for b in blocks) != 1:
        exact = False
    if not exact:
        chi, rho = float(chi), float(rho)
        blocks = [replace(b, probability=float(b.probability)) for b in blocks]

    bs = BlockSet(
        kind=kind,
        blocks=tuple(blocks),
        chi=chi,
        rho=rho,
        r=r,
        initial_block=initial,
        exact=exact,
    )
    return validate_blockset(bs)


def parse_blockset(text: str) -> BlockSet:
    """Parse a UTF-8 JSON document into a validated BlockSet."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BlockSetError("schema", f"invalid JSON: {exc}")
    return blockset_from_dict(doc)


def load_blockset(path) -> BlockSet:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_blockset(fh.read())


def load_example(name: str) -> BlockSet:
    """Load one of the bundled example block sets: fig1, fig3 or k2."""
    fname = name if name.endswith(".json") else f"{name}.json"
    data = resources.files("blocknets.data").joinpath(fname).read_text("utf-8")
    return parse_blockset(data)


def degree_of(block: Block, v: str) -> int:
    """Tracked degree of v in its block: undirected degree for hooking
    blocks, outdegree for bipolar blocks."""
    if block.kind == HOOKING:
        return block.degree(v)
    return block.outdegree(v)


def reverse_bipolar(bs: BlockSet) -> BlockSet:
    """Reverse every arc and swap the poles of each block.

    Analyzing the outdegrees of the reversed model is the same as analyzing
    the indegrees of the original.
    """
    if bs.kind != BIPOLAR:
        raise BlockSetError("param-domain", "reverse_bipolar needs a bipolar block set")
    blocks = tuple(
        replace(
            b,
            edges=tuple((y, x) for x, y in b.edges),
            north=b.south,
            south=b.north,
        )
        for b in bs.blocks
    )
    return validate_blockset(replace(bs, blocks=blocks))
