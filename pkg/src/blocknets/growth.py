"""Network growth simulation.

Two modes share one random stream and one decision procedure, so they
produce identical census trajectories from the same seed:

* census mode tracks only the degree census (one int64 counter per degree
  value, exact also above the tracked range) plus the master vertex's
  degree and the running total attachment weight;
* graph mode additionally materializes the multigraph, choosing a concrete
  vertex inside the selected degree class (and a concrete out-arc for
  bipolar networks) with the variates census mode draws and discards.

Per step the stream supplies one row of uniforms: class, intra-class
index, block, and (bipolar) arc index.  When the initial block is chosen
at random, a single extra uniform is drawn before the step loop.
Replicate streams are derived as ``SeedSequence((seed, replicate))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _kernels
from .model_io import BIPOLAR, HOOKING, Block, BlockSet, degree_of
from .profile import essential_degrees

CHUNK_ROWS = 4096
SPOT_CHECK_INTERVAL = 1 << 16
DEFAULT_MAX_VERTICES = 10_000_000

GRAPH = "graph"
CENSUS = "census"


class ResourceLimitError(RuntimeError):
    """The simulated network outgrew the configured vertex budget."""


def backend_name() -> str:
    return _kernels.backend_name()


@dataclass
class _Tables:
    """Per-model constants consumed by the step kernels."""

    kind: str
    chi: float
    rho: float
    block_p: np.ndarray  # float64[m]
    block_d: np.ndarray  # int64[m], latch degree increment
    block_s: np.ndarray  # float64[m], total-activity increment
    block_nv: np.ndarray  # int64[m], new vertices per attachment
    nd_flat: np.ndarray  # int64, new-vertex degrees, all blocks concatenated
    nd_off: np.ndarray  # int64[m+1]
    ncols: int


def _build_tables(bs: BlockSet) -> _Tables:
    m = len(bs.blocks)
    block_p = np.array([float(b.probability) for b in bs.blocks], dtype=np.float64)
    block_d = np.array([b.latch_increment() for b in bs.blocks], dtype=np.int64)
    block_nv = np.array([len(b.new_vertices()) for b in bs.blocks], dtype=np.int64)
    chi, rho = float(bs.chi), float(bs.rho)
    degs: list[int] = []
    off = [0]
    s = np.empty(m, dtype=np.float64)
    for i, b in enumerate(bs.blocks):
        new_degs = [degree_of(b, v) for v in b.new_vertices()]
        degs.extend(new_degs)
        off.append(len(degs))
        # activity gained per attachment: full weight of each new vertex
        # plus chi * (latch increment) for the relabelled latch
        s[i] = chi * int(block_d[i])
        for c in new_degs:
            s[i] += chi * c + rho
    return _Tables(
        kind=bs.kind,
        chi=chi,
        rho=rho,
        block_p=block_p,
        block_d=block_d,
        block_s=s,
        block_nv=block_nv,
        nd_flat=np.array(degs, dtype=np.int64),
        nd_off=np.array(off, dtype=np.int64),
        ncols=4 if bs.kind == BIPOLAR else 3,
    )


class _Stream:
    """Chunk-buffered uniform stream with a documented draw order.

    Both modes pull whole (CHUNK_ROWS x ncols) blocks from the generator
    and consume them row by row, so their stream positions always agree.
    """

    def __init__(self, seed, ncols: int):
        if isinstance(seed, np.random.SeedSequence):
            ss = seed
        else:
            ss = np.random.SeedSequence(seed)
        self.gen = np.random.Generator(np.random.PCG64(ss))
        self.ncols = ncols
        self._buf = np.empty((0, ncols))
        self._pos = 0

    def initial_uniform(self) -> float:
        """The single pre-loop draw for a random initial block."""
        return float(self.gen.random())

    def _refill(self) -> None:
        self._buf = self.gen.random((CHUNK_ROWS, self.ncols))
        self._pos = 0

    def take(self, max_rows: int) -> np.ndarray:
        """A view of up to max_rows consecutive unconsumed rows."""
        if self._pos >= self._buf.shape[0]:
            self._refill()
        end = min(self._buf.shape[0], self._pos + max_rows)
        view = self._buf[self._pos : end]
        self._pos = end
        return view

    def row(self) -> np.ndarray:
        return self.take(1)[0]


@dataclass
class _GraphData:
    """Materialized multigraph (graph mode only)."""

    kind: str
    next_id: int = 0
    master: int = 0
    master_sink: Optional[int] = None
    deg: dict = field(default_factory=dict)  # vertex -> tracked degree
    adj: dict = field(default_factory=dict)  # hooking: v -> {u: multiplicity}
    out_adj: dict = field(default_factory=dict)  # bipolar: v -> [heads]
    in_deg: dict = field(default_factory=dict)  # bipolar only
    members: dict = field(default_factory=dict)  # degree -> [non-master vertices]
    mpos: dict = field(default_factory=dict)  # vertex -> index in its class list

    def new_vertex(self) -> int:
        vid = self.next_id
        self.next_id += 1
        return vid

    def class_add(self, v: int, c: int) -> None:
        lst = self.members.setdefault(c, [])
        self.mpos[v] = len(lst)
        lst.append(v)

    def class_move(self, v: int, old: int, new: int) -> None:
        lst = self.members[old]
        i = self.mpos[v]
        last = lst[-1]
        lst[i] = last
        self.mpos[last] = i
        lst.pop()
        self.class_add(v, new)

    def add_edge(self, x: int, y: int) -> None:
        if self.kind == HOOKING:
            self.adj.setdefault(x, {})[y] = self.adj.setdefault(x, {}).get(y, 0) + 1
            if x != y:
                self.adj.setdefault(y, {})[x] = self.adj.setdefault(y, {}).get(x, 0) + 1
        else:
            self.out_adj.setdefault(x, []).append(y)
            self.in_deg[y] = self.in_deg.get(y, 0) + 1

    def recount_degree(self, v: int) -> int:
        if self.kind == HOOKING:
            nbrs = self.adj.get(v, {})
            return sum(m for u, m in nbrs.items() if u != v) + 2 * nbrs.get(v, 0)
        return len(self.out_adj.get(v, []))


@dataclass
class GrowthState:
    """Evolving simulation state; mutated in place by grow_step."""

    bs: BlockSet
    mode: str
    step: int
    counts: np.ndarray  # int64, counts[k] = non-master vertices of degree k
    max_deg: int
    master_degree: int
    total_activity: float
    n_vertices: int
    tables: _Tables
    stream: _Stream
    graph: Optional[_GraphData] = None
    track: Optional[tuple[int, ...]] = None
    trajectory_x: Optional[np.ndarray] = None
    trajectory_star: Optional[np.ndarray] = None
    max_vertices: int = DEFAULT_MAX_VERTICES
    backend: Optional[str] = None

    @property
    def kind(self) -> str:
        return self.bs.kind

    def census(self) -> dict[int, int]:
        """Degree census of the non-master vertices as a plain dict."""
        return {
            k: int(self.counts[k])
            for k in range(1, self.max_deg + 1)
            if self.counts[k]
        }

    def recount_total_activity(self) -> float:
        t = self.tables
        total = t.chi * self.master_degree + t.rho
        for k in range(1, self.max_deg + 1):
            total += (t.chi * k + t.rho) * int(self.counts[k])
        return total


def _census_counts_of_block(block: Block, exclude: Iterable[str]) -> dict[int, int]:
    out: dict[int, int] = {}
    skip = set(exclude)
    for v in block.vertices:
        if v in skip:
            continue
        c = degree_of(block, v)
        out[c] = out.get(c, 0) + 1
    return out


def init_state(
    bs: BlockSet,
    mode: str = CENSUS,
    seed=0,
    max_vertices: int = DEFAULT_MAX_VERTICES,
    backend: Optional[str] = None,
) -> GrowthState:
    """State holding a copy of the initial block, master vertices marked and
    excluded from the census."""
    if mode not in (GRAPH, CENSUS):
        raise ValueError(f"mode must be 'graph' or 'census', got {mode!r}")
    tables = _build_tables(bs)
    stream = _Stream(seed, tables.ncols)

    if bs.initial_block == "random":
        u = stream.initial_uniform()
        b0 = len(bs.blocks) - 1
        accp = 0.0
        for i in range(len(bs.blocks)):
            accp += tables.block_p[i]
            if u < accp:
                b0 = i
                break
    else:
        b0 = int(bs.initial_block)
    block = bs.blocks[b0]

    if bs.kind == HOOKING:
        excluded = [block.hook]
        master_degree = block.degree(block.hook)
    else:
        excluded = [block.north, block.south]
        master_degree = block.outdegree(block.north)

    census = _census_counts_of_block(block, excluded)
    max_deg = max(census) if census else 0
    counts = np.zeros(max(64, max_deg + 2), dtype=np.int64)
    for k, c in census.items():
        counts[k] = c

    total = tables.chi * master_degree + tables.rho
    for k in range(1, max_deg + 1):
        total += (tables.chi * k + tables.rho) * int(counts[k])

    graph = None
    if mode == GRAPH:
        graph = _GraphData(kind=bs.kind)
        vmap = {v: graph.new_vertex() for v in block.vertices}
        for x, y in block.edges:
            graph.add_edge(vmap[x], vmap[y])
        for v in block.vertices:
            vid = vmap[v]
            graph.deg[vid] = degree_of(block, v)
            if bs.kind == BIPOLAR:
                graph.in_deg.setdefault(vid, 0)
        if bs.kind == HOOKING:
            graph.master = vmap[block.hook]
        else:
            graph.master = vmap[block.north]
            graph.master_sink = vmap[block.south]
        skip = {graph.master, graph.master_sink}
        for v in block.vertices:
            vid = vmap[v]
            if vid not in skip:
                graph.class_add(vid, graph.deg[vid])

    return GrowthState(
        bs=bs,
        mode=mode,
        step=0,
        counts=counts,
        max_deg=max_deg,
        master_degree=master_degree,
        total_activity=total,
        n_vertices=len(block.vertices),
        tables=tables,
        stream=stream,
        graph=graph,
        max_vertices=max_vertices,
        backend=backend,
    )


def _select_class(counts, max_deg: int, chi: float, rho: float, total: float, u0: float) -> int:
    """Degree class of the latch: -1 means the master vertex's own class.

    The scan order (ascending degree, master last) and arithmetic match the
    census kernel exactly; this is what couples the two modes.
    """
    target = u0 * total
    acc = 0.0
    for k in range(1, max_deg + 1):
        acc += (chi * k + rho) * counts[k]
        if target < acc:
            return k
    return -1


def _select_block(block_p, ub: float) -> int:
    b = block_p.shape[0] - 1
    accp = 0.0
    for i in range(block_p.shape[0]):
        accp += block_p[i]
        if ub < accp:
            return i
    return b


def _ensure_capacity(state: GrowthState, need: int) -> None:
    if need >= state.counts.shape[0]:
        grown = np.zeros(max(need + 1, 2 * state.counts.shape[0]), dtype=np.int64)
        grown[: state.counts.shape[0]] = state.counts
        state.counts = grown


def _apply_census_update(state: GrowthState, cls: int, b: int) -> None:
    t = state.tables
    d = int(t.block_d[b])
    lo, hi = int(t.nd_off[b]), int(t.nd_off[b + 1])
    need = max([cls + d if cls != -1 else 0] + [int(t.nd_flat[x]) for x in range(lo, hi)])
    _ensure_capacity(state, need)
    if cls == -1:
        state.master_degree += d
    elif d > 0:
        state.counts[cls] -= 1
        state.counts[cls + d] += 1
        if cls + d > state.max_deg:
            state.max_deg = cls + d
    for x in range(lo, hi):
        c = int(t.nd_flat[x])
        state.counts[c] += 1
        if c > state.max_deg:
            state.max_deg = c
    state.n_vertices += int(t.block_nv[b])
    state.total_activity += float(t.block_s[b])
    state.step += 1
    if state.n_vertices > state.max_vertices:
        raise ResourceLimitError(
            f"vertex count {state.n_vertices} exceeds limit {state.max_vertices} "
            f"at step {state.step}"
        )


def _apply_graph_step(state: GrowthState, latch: int, b: int, arc_index: int) -> None:
    """Attach block b at the given latch vertex (graph mode)."""
    g = state.graph
    block = state.bs.blocks[b]
    d = int(state.tables.block_d[b])
    old = g.deg[latch]

    if state.kind == HOOKING:
        vmap = {block.hook: latch}
    else:
        arcs = g.out_adj[latch]
        head = arcs[arc_index]
        last = arcs.pop()
        if arc_index < len(arcs):
            arcs[arc_index] = last
        g.in_deg[head] -= 1
        vmap = {block.north: latch, block.south: head}

    for v in block.new_vertices():
        vid = g.new_vertex()
        vmap[v] = vid
        c = degree_of(block, v)
        g.deg[vid] = c
        if state.kind == BIPOLAR:
            g.in_deg.setdefault(vid, 0)
        g.class_add(vid, c)
    for x, y in block.edges:
        g.add_edge(vmap[x], vmap[y])

    g.deg[latch] = old + d
    if latch != g.master and d > 0:
        g.class_move(latch, old, old + d)

    cls = -1 if latch == g.master else old
    _apply_census_update(state, cls, b)

    if state.step % SPOT_CHECK_INTERVAL == 0:
        _spot_check(state)


def _spot_check(state: GrowthState) -> None:
    """Census must equal a recount from the adjacency structure."""
    g = state.graph
    recount: dict[int, int] = {}
    skip = {g.master, g.master_sink}
    for v, c in g.deg.items():
        if v in skip:
            continue
        recount[c] = recount.get(c, 0) + 1
    if recount != state.census():
        raise AssertionError(
            f"census diverged from the graph at step {state.step}: "
            f"{state.census()} vs recount {recount}"
        )


def grow_step(state: GrowthState) -> GrowthState:
    """Advance one step, consuming one row of the shared random stream."""
    t = state.tables
    row = state.stream.row()
    cls = _select_class(
        state.counts, state.max_deg, t.chi, t.rho, state.total_activity, row[0]
    )
    b = _select_block(t.block_p, row[2])

    if state.mode == CENSUS:
        _apply_census_update(state, cls, b)
        return state

    g = state.graph
    if cls == -1:
        latch = g.master
    else:
        members = g.members[cls]
        idx = min(int(row[1] * len(members)), len(members) - 1)
        latch = members[idx]
    arc_index = 0
    if state.kind == BIPOLAR:
        outd = g.deg[latch]
        arc_index = min(int(row[3] * outd), outd - 1)
    _apply_graph_step(state, latch, b, arc_index)
    return state


def grow_step_scripted(
    state: GrowthState, latch: int, block_index: int, arc_index: int = 0
) -> GrowthState:
    """Deterministic step with explicit choices (graph mode; consumes no
    randomness).  Intended for building reference networks in tests."""
    if state.mode != GRAPH:
        raise ValueError("scripted growth needs graph mode")
    _apply_graph_step(state, latch, block_index, arc_index)
    return state


def _simulate_census_fast(state: GrowthState, n: int) -> None:
    """Drive census mode through the chunked kernel."""
    t = state.tables
    record = state.trajectory_x is not None
    ess = (
        np.array(state.track, dtype=np.int64)
        if state.track is not None
        else np.empty(0, dtype=np.int64)
    )
    dummy_x = np.empty((0, ess.shape[0]), dtype=np.int64)
    dummy_star = np.empty(0, dtype=np.float64)
    state_i = np.array(
        [state.max_deg, state.master_degree, state.n_vertices], dtype=np.int64
    )
    state_f = np.array([state.total_activity], dtype=np.float64)

    remaining = n
    while remaining > 0:
        rows = state.stream.take(remaining)
        offset = 0
        while offset < rows.shape[0]:
            u = rows[offset:]
            if record:
                x_out = state.trajectory_x[state.step + 1 + offset :]
                star_out = state.trajectory_star[state.step + 1 + offset :]
            else:
                x_out, star_out = dummy_x, dummy_star
            done, status = _kernels.census_chunk(
                state.counts,
                state_i,
                state_f,
                t.chi,
                t.rho,
                t.block_p,
                t.block_d,
                t.block_s,
                t.block_nv,
                t.nd_flat,
                t.nd_off,
                u,
                ess,
                x_out,
                star_out,
                record,
                backend=state.backend,
            )
            offset += done
            if status == _kernels.STATUS_GROW:
                state.counts = np.concatenate(
                    [state.counts, np.zeros(state.counts.shape[0], dtype=np.int64)]
                )
            if int(state_i[2]) > state.max_vertices:
                raise ResourceLimitError(
                    f"vertex count {int(state_i[2])} exceeds limit "
                    f"{state.max_vertices}"
                )
        state.step += rows.shape[0]
        remaining -= rows.shape[0]

    state.max_deg = int(state_i[0])
    state.master_degree = int(state_i[1])
    state.n_vertices = int(state_i[2])
    state.total_activity = float(state_f[0])


def census_vector(state: GrowthState, essential: Sequence[int]) -> tuple[np.ndarray, float]:
    """Counts of the tracked degree classes plus the aggregate attachment
    weight carried by everything else (overflow degrees and the master)."""
    x = np.array([int(state.counts[k]) if k <= state.max_deg else 0 for k in essential])
    t = state.tables
    star = state.total_activity - (t.chi * state.master_degree + t.rho)
    for k, xi in zip(essential, x):
        star -= (t.chi * k + t.rho) * int(xi)
    return x, star


def simulate(
    bs: BlockSet,
    n: int,
    mode: str = CENSUS,
    seed=0,
    record: bool = False,
    track: Optional[Sequence[int]] = None,
    max_vertices: int = DEFAULT_MAX_VERTICES,
    backend: Optional[str] = None,
) -> GrowthState:
    """Run n growth steps; deterministic given (bs, n, mode, seed).

    With record=True the census vector of the tracked classes (by default
    the model's r essential degrees) is stored after every step.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    state = init_state(bs, mode, seed, max_vertices=max_vertices, backend=backend)
    if record:
        ess = tuple(track) if track is not None else essential_degrees(bs, bs.r)
        state.track = ess
        state.trajectory_x = np.zeros((n + 1, len(ess)), dtype=np.int64)
        state.trajectory_star = np.zeros(n + 1, dtype=np.float64)
        x0, star0 = census_vector(state, ess)
        state.trajectory_x[0] = x0
        state.trajectory_star[0] = star0

    if mode == CENSUS:
        _simulate_census_fast(state, n)
        return state

    for _ in range(n):
        grow_step(state)
        if record:
            x, star = census_vector(state, state.track)
            state.trajectory_x[state.step] = x
            state.trajectory_star[state.step] = star
    return state


def write_trajectory_csv(path, state: GrowthState) -> None:
    """CSV with columns step,k<1>,...,k<r>,star_activity."""
    if state.trajectory_x is None:
        raise ValueError("simulate with record=True before exporting a trajectory")
    ess = state.track
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("step," + ",".join(f"k{k}" for k in ess) + ",star_activity\n")
        for i in range(state.trajectory_x.shape[0]):
            row = ",".join(str(int(x)) for x in state.trajectory_x[i])
            fh.write(f"{i},{row},{state.trajectory_star[i]:.12g}\n")


def export_dot(state: GrowthState) -> str:
    """DOT rendering of a graph-mode state (multi-edges repeated)."""
    g = state.graph
    if g is None:
        raise ValueError("DOT export needs graph mode")
    lines = []
    if state.kind == HOOKING:
        lines.append("graph G {")
        for v in sorted(g.deg):
            label = ' [label="H"]' if v == g.master else ""
            lines.append(f"  v{v}{label};")
        for v in sorted(g.adj):
            for u, mult in sorted(g.adj[v].items()):
                if u < v:
                    continue
                for _ in range(mult):
                    lines.append(f"  v{v} -- v{u};")
    else:
        lines.append("digraph G {")
        for v in sorted(g.deg):
            label = ""
            if v == g.master:
                label = ' [label="N"]'
            elif v == g.master_sink:
                label = ' [label="S"]'
            lines.append(f"  v{v}{label};")
        for v in sorted(g.out_adj):
            for u in sorted(g.out_adj[v]):
                lines.append(f"  v{v} -> v{u};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_edge_list(state: GrowthState) -> str:
    """Plain text edge list of a graph-mode state, one edge per line."""
    g = state.graph
    if g is None:
        raise ValueError("edge-list export needs graph mode")
    lines = []
    if state.kind == HOOKING:
        for v in sorted(g.adj):
            for u, mult in sorted(g.adj[v].items()):
                if u < v:
                    continue
                for _ in range(mult):
                    lines.append(f"{v} {u}")
    else:
        for v in sorted(g.out_adj):
            for u in sorted(g.out_adj[v]):
                lines.append(f"{v} {u}")
    return "\n".join(lines) + "\n"
