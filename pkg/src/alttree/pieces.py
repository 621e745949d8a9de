"""Schreier graphs of the action: over tree levels and over Gray segments.

The full generating family splits points over a Gray segment into moves of
two shapes, independent of any finite generating choice:

* set the first letter to any other value (even permutations of 5+ letters
  are transitive), and
* set the visible pair -- the letter at the word's first star and the one
  right after it -- to any other value with nonzero first entry.

A *piece* is the connected component of a point over a finite Gray-line
window under those moves.  Vertices are (fiber, letter assignment) states
over the window's visible positions; everything is reachable, exact and
finite.  Pieces get canonical byte codes (deterministic BFS in fixed label
order); code equality is exactly pointed label-preserving isomorphism of
the underlying labelled graphs.

The module also computes marginal subpieces, branch counts, quasi-level
detection, and the separation constant ``n0``: the piece radius at which
every point within graph distance R of a basepoint is distinguished from
it by its piece.
"""

from __future__ import annotations

import hashlib
from array import array
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .core import AGen, Config, ResourceCap
from .points import (
    OMEGA,
    GrayWord,
    TildePoint,
    ZeroPair,
    first_star,
    gray_projection,
    gray_segment,
    visible_positions,
    with_letters,
)

__all__ = [
    "LevelGraph",
    "level_graph",
    "GrayPiece",
    "gray_piece",
    "piece_over",
    "marginals",
    "branch_report",
    "segment_roots",
    "is_quasi_level",
    "find_n0",
    "SEPARATION_RADIUS",
    "piece_code",
    "schreier_ball",
    "schreier_neighbors",
    "descriptor_labels",
    "piece_to_dot",
    "piece_to_json",
    "level_to_dot",
    "level_to_json",
]

# Audited outcome of ``find_n0`` at radius 8 over the default seeded corpus
# (12 basepoints, salt "n0"; 11 distinct balls, 16276 coded vertices): pieces
# of radius 6 separate every pair of distinct points in every ball, radius 5
# does not.  Downstream constructions size their windows from this constant
# instead of re-running the search; the slow acceptance check recomputes it.
SEPARATION_RADIUS = 6


# ---------------------------------------------------------------------------
# level graphs


@dataclass
class LevelGraph:
    """Action of the named generators on all words of a fixed length."""

    d: int
    n: int
    names: tuple[str, ...]
    adj: dict[str, tuple[int, ...]]

    def word_of(self, i: int) -> tuple[int, ...]:
        out = []
        for _ in range(self.n):
            out.append(i % self.d)
            i //= self.d
        return tuple(reversed(out))

    def index_of(self, w: tuple[int, ...]) -> int:
        i = 0
        for x in w:
            i = i * self.d + x
        return i

    @property
    def size(self) -> int:
        return self.d**self.n

    def is_connected(self) -> bool:
        seen = bytearray(self.size)
        stack = [0]
        seen[0] = 1
        count = 1
        rows = list(self.adj.values())
        inv = []
        for row in rows:
            back = [0] * self.size
            for i, j in enumerate(row):
                back[j] = i
            inv.append(tuple(back))
        while stack:
            v = stack.pop()
            for row in rows + inv:
                w = row[v]
                if not seen[w]:
                    seen[w] = 1
                    count += 1
                    stack.append(w)
        return count == self.size

    def automorphism_count(self) -> int:
        """Label-preserving graph automorphisms (they are determined by the
        image of one vertex, since the labelled moves are deterministic)."""
        base = self._trace(0)
        return sum(1 for v in range(self.size) if self._trace(v) == base)

    def _trace(self, start: int) -> bytes:
        order = {start: 0}
        queue = deque([start])
        rows = [self.adj[name] for name in self.names]
        out = []
        while queue:
            v = queue.popleft()
            row_out = []
            for row in rows:
                w = row[v]
                if w not in order:
                    order[w] = len(order)
                    queue.append(w)
                row_out.append(order[w])
            out.append(tuple(row_out))
        return repr(out).encode()


def level_graph(cfg: Config, n: int, cap: int = 6) -> LevelGraph:
    if n < 1:
        raise ValueError("level must be positive")
    if n > cap:
        raise ResourceCap(f"level graphs are capped at n={cap}")
    d = cfg.d
    size = d**n
    adj = {}
    for name, g in cfg.gens:
        row = []
        for i in range(size):
            w = []
            k = i
            for _ in range(n):
                w.append(k % d)
                k //= d
            w.reverse()
            img = g.apply(tuple(w))
            j = 0
            for x in img:
                j = j * d + x
            row.append(j)
        adj[name] = tuple(row)
    return LevelGraph(d, n, tuple(name for name, _ in cfg.gens), adj)


# ---------------------------------------------------------------------------
# move labels


def descriptor_labels(d: int) -> tuple[tuple, ...]:
    """The full-family move labels, in canonical order: first-letter moves
    ("A", c), then visible-pair moves ("B", u, v) with u nonzero."""
    labs: list[tuple] = [("A", c) for c in range(d)]
    for u in range(1, d):
        for v in range(d):
            labs.append(("B", u, v))
    return tuple(labs)


def _a_neighbor_index(k: int) -> int:
    # line edge (m, m+1) is a first-bit edge iff m is odd
    return k + 1 if k % 2 == 1 else k - 1


def _b_neighbor_index(k: int) -> int:
    return k + 1 if k % 2 == 0 else k - 1


# ---------------------------------------------------------------------------
# pieces


@dataclass
class GrayPiece:
    """Connected component of a point over a Gray-line window.

    ``verts[i] = (fiber, letters)`` where ``letters`` assigns values to the
    window's finite visible positions (``slots``) plus, for eventually-zero
    windows, two trailing virtual slots for the formal pair.  ``adj[i]`` has
    one entry per descriptor label: the target vertex index or -1."""

    d: int
    lo: int
    hi: int
    segment: tuple[GrayWord, ...]
    slots: tuple[int, ...]
    has_pair: bool
    verts: list[tuple[int, tuple[int, ...]]]
    adj: list[tuple[int, ...]]
    basepoint: int
    origin: TildePoint
    _codes: dict = field(default_factory=dict, repr=False)
    _points: list | None = field(default=None, repr=False)
    _pair_slots: list = field(default_factory=list, repr=False)
    _index: dict | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.verts)

    @property
    def length(self) -> int:
        return len(self.segment)

    def fiber(self, i: int) -> int:
        return self.verts[i][0]

    def annotation(self, i: int, relative_to: int | None = None) -> tuple:
        k, letters = self.verts[i]
        base = self.verts[relative_to if relative_to is not None else self.basepoint][0]
        iu, iv = self._pair_slots[k - self.lo]
        return (k - base, letters[0], letters[iu], letters[iv])

    # -- construction ------------------------------------------------------

    @staticmethod
    def build(p: TildePoint, lo: int, hi: int, cap: int = 2_000_000) -> "GrayPiece":
        d = p.d
        center = gray_projection(p)
        seg = gray_segment(center, lo, hi)
        finite_slots, has_pair = visible_positions(seg)
        slots = tuple(finite_slots)
        nslots = len(slots) + (2 if has_pair else 0)
        slot_index = {pos: i for i, pos in enumerate(slots)}
        pair_slots = []
        stars = []
        for w in seg:
            j = first_star(w)
            stars.append(j)
            if j is OMEGA:
                pair_slots.append((len(slots), len(slots) + 1))
            else:
                pair_slots.append((slot_index[j], slot_index[j + 1]))
        base_letters = [p.letter(pos) for pos in slots]
        if has_pair:
            if not isinstance(p.tail, ZeroPair):
                raise AssertionError("window shows formal positions but the point has none")
            base_letters += [p.tail.a, p.tail.b]
        base_letters = tuple(base_letters)
        for i, pos in enumerate(slots):
            if (base_letters[i] != 0) != bool(seg[-lo].bit(pos)):
                raise AssertionError("basepoint letters disagree with its Gray word")

        # Hot loop: pieces can run to thousands of states and the n0 search
        # codes balls of thousands of points, so the successor tables below
        # avoid per-move function calls and list round-trips.  Row order must
        # stay aligned with descriptor_labels: A-moves by letter, then
        # B-moves by (u, v).
        a_step = []  # fiber reached when the first letter changes zeroness
        b_step = []  # fiber reached when the pair's second entry changes zeroness
        for k in range(lo, hi + 1):
            k2 = _a_neighbor_index(k)
            a_step.append(k2 if lo <= k2 <= hi else None)
            k2 = _b_neighbor_index(k)
            b_step.append(k2 if lo <= k2 <= hi else None)

        verts: list[tuple[int, tuple[int, ...]]] = [(0, base_letters)]
        index = {verts[0]: 0}
        index_get = index.get
        adj: list[tuple[int, ...]] = []
        queue = deque([0])
        while queue:
            vi = queue.popleft()
            k, letters = verts[vi]
            iu, iv = pair_slots[k - lo]
            u, v = letters[iu], letters[iv]
            x1 = letters[0]
            x1_nonzero = x1 != 0
            v_nonzero = v != 0
            ka = a_step[k - lo]
            kb = b_step[k - lo]
            tail1 = letters[1:]
            head = letters[:iu]
            mid = letters[iu + 1 : iv]
            rest = letters[iv + 1 :]
            row = []
            append = row.append
            for c in range(d):
                if c == x1:
                    append(-1)
                    continue
                if (c != 0) == x1_nonzero:
                    k2 = k
                elif ka is None:
                    append(-1)
                    continue
                else:
                    k2 = ka
                state = (k2, (c,) + tail1)
                ti = index_get(state)
                if ti is None:
                    ti = len(verts)
                    index[state] = ti
                    verts.append(state)
                    queue.append(ti)
                    if ti > cap:
                        raise ResourceCap(f"piece exceeded {cap} vertices")
                append(ti)
            for u2 in range(1, d):
                mid_u2 = head + (u2,) + mid
                for v2 in range(d):
                    if u2 == u and v2 == v:
                        append(-1)
                        continue
                    if (v2 != 0) == v_nonzero:
                        k2 = k
                    elif kb is None:
                        append(-1)
                        continue
                    else:
                        k2 = kb
                    state = (k2, mid_u2 + (v2,) + rest)
                    ti = index_get(state)
                    if ti is None:
                        ti = len(verts)
                        index[state] = ti
                        verts.append(state)
                        queue.append(ti)
                        if ti > cap:
                            raise ResourceCap(f"piece exceeded {cap} vertices")
                    append(ti)
            adj.append(tuple(row))
        piece = GrayPiece(
            d=d,
            lo=lo,
            hi=hi,
            segment=seg,
            slots=slots,
            has_pair=has_pair,
            verts=verts,
            adj=adj,
            basepoint=0,
            origin=p,
        )
        piece._pair_slots = pair_slots
        return piece

    # -- materialization ---------------------------------------------------

    def point_of(self, i: int) -> TildePoint:
        if self._points is None:
            self._points = [None] * len(self.verts)
        cached = self._points[i]
        if cached is not None:
            return cached
        k, letters = self.verts[i]
        changes = {pos: letters[j] for j, pos in enumerate(self.slots)}
        pair = (letters[-2], letters[-1]) if self.has_pair else None
        pt = with_letters(self.origin, changes, pair=pair)
        self._points[i] = pt
        return pt

    def points(self) -> list[TildePoint]:
        return [self.point_of(i) for i in range(self.size)]

    def locate(self, q: TildePoint) -> int:
        """Vertex index of a point lying over this piece's window."""
        if self._index is None:
            self._index = {state: i for i, state in enumerate(self.verts)}
        gw = gray_projection(q)
        k = self.segment.index(gw) + self.lo
        letters = [q.letter(pos) for pos in self.slots]
        if self.has_pair:
            letters += [q.tail.a, q.tail.b]
        return self._index[(k, tuple(letters))]

    def s0_edges(self, cfg: Config) -> list[tuple[int, str, int]]:
        """Edges induced by the named generators (and their inverses, named
        with a trailing '-'); -1 targets mean the generator leaves the piece."""
        out = []
        for name, word in cfg.symmetric_gens():
            g = word[0]
            for i in range(self.size):
                k, letters = self.verts[i]
                iu, iv = self._pair_slots[k - self.lo]
                if isinstance(g, AGen):
                    c = g.pi(letters[0])
                    lab = ("A", c) if c != letters[0] else None
                else:
                    u, v = letters[iu], letters[iv]
                    u2 = g.rho(u)
                    v2 = g.sigma(u)(v)
                    lab = ("B", u2, v2) if (u2, v2) != (u, v) else None
                if lab is None:
                    out.append((i, name, i))
                else:
                    ti = self.adj[i][_label_id(self.d, lab)]
                    out.append((i, name, ti))
        return out

    # -- codes -------------------------------------------------------------

    def code(self, base: int | None = None, with_fibers: bool = True) -> bytes:
        if base is None:
            base = self.basepoint
        key = (base, with_fibers, self.lo, self.hi)
        got = self._codes.get(key)
        if got is None:
            got = _trace_code(self, base, self.lo, self.hi, with_fibers)
            self._codes[key] = got
        return got

    def code_within(self, start: int, lo: int, hi: int, with_fibers: bool = True) -> bytes:
        """Code of the subpiece of ``start`` over the fiber window [lo, hi]."""
        return _trace_code(self, start, lo, hi, with_fibers)

    def component_within(self, start: int, lo: int, hi: int) -> list[int]:
        seen = {start}
        stack = [start]
        while stack:
            v = stack.pop()
            for t in self.adj[v]:
                if t >= 0 and t not in seen and lo <= self.verts[t][0] <= hi:
                    seen.add(t)
                    stack.append(t)
        return sorted(seen)

    def ball(self, radius: int, start: int | None = None) -> list[int]:
        start = self.basepoint if start is None else start
        dist = {start: 0}
        queue = deque([start])
        while queue:
            v = queue.popleft()
            if dist[v] == radius:
                continue
            for t in self.adj[v]:
                if t >= 0 and t not in dist:
                    dist[t] = dist[v] + 1
                    queue.append(t)
        return sorted(dist)


def _label_id(d: int, lab: tuple) -> int:
    if lab[0] == "A":
        return lab[1]
    _, u, v = lab
    return d + (u - 1) * d + v


def _trace_code(piece: GrayPiece, start: int, lo: int, hi: int, with_fibers: bool) -> bytes:
    """Digest of the breadth-first trace of the sub-piece of ``start`` over
    the fiber window [lo, hi].

    Each visited vertex contributes its annotation (fiber offset, first
    letter, visible pair) followed by the breadth-first renumbering of its
    target row, so the digest is a canonical form: two pieces get the same
    digest exactly when they are isomorphic as pointed labelled graphs
    (every label has at most one target, so the traversal order is forced).
    Rows are hashed as fixed-width int32 words; hashing keeps codes at 32
    bytes however large the piece grows."""
    verts = piece.verts
    adj = piece.adj
    pair_slots = piece._pair_slots
    plo = piece.lo
    base_fiber = verts[start][0]
    order = {start: 0}
    order_get = order.get
    queue = deque([start])
    h = hashlib.sha256()
    update = h.update
    while queue:
        vi = queue.popleft()
        k, letters = verts[vi]
        iu, iv = pair_slots[k - plo]
        row = [k - base_fiber if with_fibers else 0, letters[0], letters[iu], letters[iv]]
        for t in adj[vi]:
            if t < 0 or not lo <= verts[t][0] <= hi:
                row.append(-1)
                continue
            got = order_get(t)
            if got is None:
                got = len(order)
                order[t] = got
                queue.append(t)
            row.append(got)
        update(array("i", row).tobytes())
    return h.digest()


def gray_piece(p: TildePoint, n: int, cap_length: int = 17) -> GrayPiece:
    """The central piece of radius ``n`` (segment length 2n+1) around ``p``."""
    if n < 0:
        raise ValueError("radius must be nonnegative")
    if 2 * n + 1 > cap_length:
        raise ResourceCap(f"piece length {2 * n + 1} exceeds the cap {cap_length}")
    return GrayPiece.build(p, -n, n)


def piece_over(p: TildePoint, lo: int, hi: int) -> GrayPiece:
    return GrayPiece.build(p, lo, hi)


# ---------------------------------------------------------------------------
# marginals, branches, quasi-levels


def marginals(piece: GrayPiece) -> tuple[GrayPiece, GrayPiece, GrayPiece]:
    """(left, right, core) marginal pieces of a central radius-n piece:
    the components of the basepoint over the windows [-n, n-2], [-n+2, n]
    and [-n+2, n-2]."""
    n = piece.hi
    if piece.lo != -n or n < 2:
        raise ValueError("marginals expect a central piece of radius >= 2")
    p = piece.origin
    return (
        GrayPiece.build(p, -n, n - 2),
        GrayPiece.build(p, -n + 2, n),
        GrayPiece.build(p, -n + 2, n - 2),
    )


def branch_report(piece: GrayPiece) -> dict:
    """Branch structure of a central piece: does the left (right) marginal
    spill outside the core component over the core window?"""
    n = piece.hi
    if piece.lo != -n or n < 2:
        raise ValueError("branch analysis expects a central piece of radius >= 2")
    base = piece.basepoint
    core = set(piece.component_within(base, -n + 2, n - 2))
    out = {}
    for side, (wlo, whi) in (("left", (-n, n - 2)), ("right", (-n + 2, n))):
        marg = set(piece.component_within(base, wlo, whi))
        over_core = {v for v in marg if -n + 2 <= piece.verts[v][0] <= n - 2}
        comps = 0
        seen: set[int] = set()
        for v in sorted(over_core):
            if v in seen:
                continue
            comps += 1
            stack = [v]
            seen.add(v)
            while stack:
                x = stack.pop()
                for t in piece.adj[x]:
                    if (
                        t >= 0
                        and t in over_core
                        and t not in seen
                        and -n + 2 <= piece.verts[t][0] <= n - 2
                    ):
                        seen.add(t)
                        stack.append(t)
        out[side] = {
            "components": comps,
            "branches": bool(over_core - core),
        }
    out["bi_branching"] = out["left"]["branches"] and out["right"]["branches"]
    return out


def segment_roots(segment: tuple[GrayWord, ...]) -> tuple[list[int], list[int], object]:
    """Indices (into the segment) of roots and anti-roots, plus the root
    depth.  The root is the word whose first star sits deepest; anti-roots
    sit exactly one position higher.  Windows rooted at the formal position
    have no anti-roots."""
    stars = [first_star(w) for w in segment]
    jmax = stars[0]
    for j in stars[1:]:
        if _pos_lt(jmax, j):
            jmax = j
    roots = [i for i, j in enumerate(stars) if j == jmax]
    if jmax is OMEGA:
        return roots, [], OMEGA
    anti = [i for i, j in enumerate(stars) if j == jmax - 1]
    return roots, anti, jmax


def _pos_lt(a, b) -> bool:
    if a is OMEGA:
        return False
    if b is OMEGA:
        return True
    return a < b


def is_quasi_level(piece: GrayPiece) -> int | None:
    """Depth of the quasi-level, or None.

    A central piece is a quasi-level when the segment's roots sit among the
    two extreme positions of one side, at least one anti-root exists, and
    all anti-roots sit among the two extreme positions of the other side."""
    seg = piece.segment
    roots, anti, jmax = segment_roots(seg)
    if jmax is OMEGA or not anti:
        return None
    last = len(seg) - 1
    left = {0, 1}
    right = {last - 1, last}
    if set(roots) <= left and set(anti) <= right:
        return jmax
    if set(roots) <= right and set(anti) <= left:
        return jmax
    return None


# ---------------------------------------------------------------------------
# the separation constant


def schreier_neighbors(q: TildePoint) -> list[TildePoint]:
    """All points one move away from ``q``: any first-letter change, or any
    change of the visible pair (the first nonzero letter and its follower,
    the formal pair for all-zero points)."""
    d = q.d
    out = []
    x1 = q.letter(1)
    for c in range(d):
        if c != x1:
            out.append(with_letters(q, {1: c}))
    j = None
    horizon = len(q.prefix) + (1 if isinstance(q.tail, ZeroPair) else len(q.tail.word))
    for i in range(1, horizon + 1):
        if q.letter(i) != 0:
            j = i
            break
    if j is None:
        u0, v0 = q.tail.a, q.tail.b
        for u in range(1, d):
            for v in range(d):
                if (u, v) != (u0, v0):
                    out.append(with_letters(q, {}, pair=(u, v)))
    else:
        u0, v0 = q.letter(j), q.letter(j + 1)
        for u in range(1, d):
            for v in range(d):
                if (u, v) != (u0, v0):
                    out.append(with_letters(q, {j: u, j + 1: v}))
    return out


def schreier_ball(p: TildePoint, radius: int) -> list[TildePoint]:
    """Points within graph distance ``radius`` of ``p``, breadth-first."""
    dist = {p: 0}
    order = [p]
    queue = deque([p])
    while queue:
        q = queue.popleft()
        if dist[q] == radius:
            continue
        for t in schreier_neighbors(q):
            if t not in dist:
                dist[t] = dist[q] + 1
                order.append(t)
                queue.append(t)
    return order


def _fused_prep(p: TildePoint, lo: int, hi: int):
    """Window data shared by the fused code paths: pair-slot indices per
    fiber and the basepoint's letters at the window's slots."""
    if not lo <= 0 <= hi:
        raise ValueError("the window must contain the basepoint fiber")
    seg = gray_segment(gray_projection(p), lo, hi)
    slots, has_pair = visible_positions(seg)
    slot_index = {pos: i for i, pos in enumerate(slots)}
    pair_slots = []
    for w in seg:
        j = first_star(w)
        if j is OMEGA:
            pair_slots.append((len(slots), len(slots) + 1))
        else:
            pair_slots.append((slot_index[j], slot_index[j + 1]))
    base_letters = [p.letter(pos) for pos in slots]
    if has_pair:
        if not isinstance(p.tail, ZeroPair):
            raise AssertionError("window shows formal positions but the point has none")
        base_letters += [p.tail.a, p.tail.b]
    return pair_slots, base_letters


def _fused_code(p: TildePoint, lo: int, hi: int, cap: int = 2_000_000) -> bytes:
    """Digest of GrayPiece.build(p, lo, hi).code() without building the piece.

    The trace in _trace_code renumbers vertices by a breadth-first walk from
    the basepoint in label order -- exactly the order in which build discovers
    them -- so over the full window from the basepoint the renumbering is the
    identity and the rows can be streamed out of one BFS.  Byte-for-byte
    equality with the two-pass route is pinned by a test.  Narrow windows
    (small pieces) run the scalar loop; wide ones the vectorised layer walk;
    windows too wide to pack states into machine ints fall back to the
    two-pass route."""
    pair_slots, base_letters = _fused_prep(p, lo, hi)
    span = hi - lo + 1
    if 3 * len(base_letters) + span.bit_length() > 62:
        return GrayPiece.build(p, lo, hi).code()
    if span <= 9:
        return _fused_code_py(p, lo, hi, cap, pair_slots, base_letters)
    return _fused_code_np(p, lo, hi, cap, pair_slots, base_letters)


def _fused_code_py(p: TildePoint, lo: int, hi: int, cap, pair_slots, base_letters) -> bytes:
    # States are packed into single ints -- three bits per slot letter, the
    # fiber offset above -- so successor states are a couple of shifts and
    # masks and the visited table hashes machine ints.
    d = p.d
    nslots = len(base_letters)
    shift = 3 * nslots
    span = hi - lo + 1
    fiber_info = []  # per fiber offset: (siu, siv, clear pair mask)
    a_sh = []  # pre-shifted fiber part of the A-step target, or None
    b_sh = []
    for ko in range(span):
        iu, iv = pair_slots[ko]
        siu, siv = 3 * iu, 3 * iv
        fiber_info.append((siu, siv, ~((7 << siu) | (7 << siv))))
        k2 = _a_neighbor_index(ko + lo)
        a_sh.append((k2 - lo) << shift if lo <= k2 <= hi else None)
        k2 = _b_neighbor_index(ko + lo)
        b_sh.append((k2 - lo) << shift if lo <= k2 <= hi else None)

    packed0 = 0
    for i, x in enumerate(base_letters):
        packed0 |= x << (3 * i)
    start = ((0 - lo) << shift) | packed0
    index = {start: 0}
    index_get = index.get
    queue = deque([start])
    h = hashlib.sha256()
    update = h.update
    while queue:
        st = queue.popleft()
        ko = st >> shift
        packed = st ^ (ko << shift)
        siu, siv, clear_mask = fiber_info[ko]
        x1 = packed & 7
        u = (packed >> siu) & 7
        v = (packed >> siv) & 7
        x1_nonzero = x1 != 0
        v_nonzero = v != 0
        same_sh = ko << shift
        ka = a_sh[ko]
        kb = b_sh[ko]
        row = [ko + lo, x1, u, v]
        append = row.append
        for c in range(d):
            if c == x1:
                append(-1)
                continue
            if (c != 0) == x1_nonzero:
                hs = same_sh
            elif ka is None:
                append(-1)
                continue
            else:
                hs = ka
            st2 = hs | (packed ^ (x1 ^ c))
            ti = index_get(st2)
            if ti is None:
                ti = len(index)
                index[st2] = ti
                queue.append(st2)
                if ti > cap:
                    raise ResourceCap(f"piece exceeded {cap} vertices")
            append(ti)
        base_uv = packed & clear_mask
        for u2 in range(1, d):
            part = base_uv | (u2 << siu)
            for v2 in range(d):
                if u2 == u and v2 == v:
                    append(-1)
                    continue
                if (v2 != 0) == v_nonzero:
                    hs = same_sh
                elif kb is None:
                    append(-1)
                    continue
                else:
                    hs = kb
                st2 = hs | part | (v2 << siv)
                ti = index_get(st2)
                if ti is None:
                    ti = len(index)
                    index[st2] = ti
                    queue.append(st2)
                    if ti > cap:
                        raise ResourceCap(f"piece exceeded {cap} vertices")
                append(ti)
        update(array("i", row).tobytes())
    return h.digest()


def _fused_code_np(p: TildePoint, lo: int, hi: int, cap, pair_slots, base_letters) -> bytes:
    # Vectorised twin of _fused_code_py: one breadth-first layer at a time,
    # successor states by array arithmetic, rows hashed as one int32 block
    # per layer.  Vertex numbering matches the scalar walk because edge
    # targets are laid out parent-major, label-minor before the
    # first-occurrence scan.
    d = p.d
    nslots = len(base_letters)
    shift = 3 * nslots
    span = hi - lo + 1

    siu_f = np.empty(span, dtype=np.int64)
    siv_f = np.empty(span, dtype=np.int64)
    clear_f = np.empty(span, dtype=np.int64)
    a_f = np.empty(span, dtype=np.int64)  # A-step target fiber offset, or -1
    b_f = np.empty(span, dtype=np.int64)
    for ko in range(span):
        iu, iv = pair_slots[ko]
        siu_f[ko] = 3 * iu
        siv_f[ko] = 3 * iv
        clear_f[ko] = ~((7 << (3 * iu)) | (7 << (3 * iv)))
        k2 = _a_neighbor_index(ko + lo)
        a_f[ko] = k2 - lo if lo <= k2 <= hi else -1
        k2 = _b_neighbor_index(ko + lo)
        b_f[ko] = k2 - lo if lo <= k2 <= hi else -1

    packed0 = 0
    for i, x in enumerate(base_letters):
        packed0 |= x << (3 * i)
    first = ((0 - lo) << shift) | packed0

    vis_sorted = np.array([first], dtype=np.int64)
    vis_ids = np.array([0], dtype=np.int64)
    layer = np.array([first], dtype=np.int64)  # current layer, in id order
    next_id = 1
    h = hashlib.sha256()
    low_mask = (1 << shift) - 1

    while layer.size:
        n = layer.size
        ko = layer >> shift
        low = layer & low_mask
        x1 = low & 7
        siu = siu_f[ko]
        siv = siv_f[ko]
        u = (layer >> siu) & 7
        v = (layer >> siv) & 7
        x1_nonzero = x1 != 0
        v_nonzero = v != 0
        ka = a_f[ko]
        kb = b_f[ko]
        cols = []
        for c in range(d):
            flip = (c != 0) != x1_nonzero
            tgt = np.where(flip, ka, ko)
            valid = (x1 != c) & (tgt >= 0)
            succ = (tgt << shift) | (low ^ (x1 ^ c))
            cols.append(np.where(valid, succ, -1))
        base_uv = low & clear_f[ko]
        for u2 in range(1, d):
            part = base_uv | (u2 << siu)
            for v2 in range(d):
                flip = (v2 != 0) != v_nonzero
                tgt = np.where(flip, kb, ko)
                valid = ~((u == u2) & (v == v2)) & (tgt >= 0)
                succ = (tgt << shift) | part | (v2 << siv)
                cols.append(np.where(valid, succ, -1))
        edges = np.stack(cols, axis=1)  # (n, d + (d-1)*d); -1 marks no edge
        flat = edges.ravel()

        pos = np.minimum(np.searchsorted(vis_sorted, flat), vis_sorted.size - 1)
        known = vis_sorted[pos] == flat
        fresh = flat[(~known) & (flat >= 0)]
        if fresh.size:
            uq, at = np.unique(fresh, return_index=True)
            discovered = uq[np.argsort(at, kind="stable")]
            ids_new = np.arange(next_id, next_id + discovered.size, dtype=np.int64)
            next_id += discovered.size
            if next_id > cap:
                raise ResourceCap(f"piece exceeded {cap} vertices")
            vis_sorted = np.concatenate([vis_sorted, discovered])
            vis_ids = np.concatenate([vis_ids, ids_new])
            order = np.argsort(vis_sorted, kind="stable")
            vis_sorted = vis_sorted[order]
            vis_ids = vis_ids[order]
            layer = discovered
        else:
            layer = fresh

        pos = np.minimum(np.searchsorted(vis_sorted, flat), vis_sorted.size - 1)
        tgt_ids = np.where(flat >= 0, vis_ids[pos], -1)
        nlabels = edges.shape[1]
        rows = np.empty((n, 4 + nlabels), dtype=np.int32)
        rows[:, 0] = ko + lo
        rows[:, 1] = x1
        rows[:, 2] = u
        rows[:, 3] = v
        rows[:, 4:] = tgt_ids.reshape(n, nlabels)
        h.update(rows.tobytes())
    return h.digest()


def piece_code(q: TildePoint, lo: int, hi: int, memo: dict | None = None) -> bytes:
    """Code of the piece of ``q`` over [lo, hi], optionally memoised.

    A piece is determined by the window's Gray words together with the
    letters of ``q`` at the window's visible positions (plus the formal pair
    when the window shows it) -- nothing else about ``q`` enters the build.
    That tuple keys the memo, so points that differ only at positions the
    window cannot see share one build."""
    if memo is None:
        return _fused_code(q, lo, hi)
    seg = gray_segment(gray_projection(q), lo, hi)
    slots, has_pair = visible_positions(seg)
    letters = tuple(q.letter(i) for i in slots)
    pair = (q.tail.a, q.tail.b) if has_pair else None
    shape = tuple((w.prefix, w.period, w.star2) for w in seg)
    key = hashlib.sha256(repr((shape, lo, hi, letters, pair)).encode()).digest()
    code = memo.get(key)
    if code is None:
        if len(memo) > 1_000_000:
            memo.clear()
        code = _fused_code(q, lo, hi)
        memo[key] = code
    return code


def _ball_separation_radius(
    p: TildePoint, radius: int, bound: int, start: int, memo: dict | None = None
) -> tuple[int, tuple | None]:
    """Least n >= start at which all points within graph distance ``radius``
    of ``p`` get pairwise distinct radius-n piece codes.  Distinctness is
    monotone in n, so only still-colliding groups are re-coded as n grows.
    Returns (n, None) or (bound, counterexample pair) when the bound runs out."""
    n = start
    groups = [schreier_ball(p, radius)]
    while True:
        buckets: dict[bytes, list[TildePoint]] = {}
        for group in groups:
            for q in group:
                buckets.setdefault(piece_code(q, -n, n, memo), []).append(q)
        groups = [g for g in buckets.values() if len(g) > 1]
        if not groups:
            return n, None
        if n >= bound:
            return n, (repr(groups[0][0]), repr(groups[0][1]))
        n += 1


# ---------------------------------------------------------------------------
# exports


def _gray_word_json(gw: GrayWord) -> dict:
    return {"prefix": list(gw.prefix), "period": None if gw.period is None else list(gw.period), "star2": gw.star2}


def piece_to_json(piece: GrayPiece, cfg: Config) -> dict:
    return {
        "d": piece.d,
        "window": [piece.lo, piece.hi],
        "segment": [_gray_word_json(w) for w in piece.segment],
        "basepoint": piece.basepoint,
        "vertices": [
            {"point": repr(piece.point_of(i))[1:-1], "fiber": piece.fiber(i)}
            for i in range(piece.size)
        ],
        "edges": [
            {"source": i, "label": name, "target": j}
            for i, name, j in piece.s0_edges(cfg)
        ],
    }


def piece_to_dot(piece: GrayPiece, cfg: Config) -> str:
    lines = ["graph piece {"]
    for i in range(piece.size):
        shape = ', shape=doublecircle, style=bold' if i == piece.basepoint else ""
        lines.append(f'  v{i} [label="{repr(piece.point_of(i))[1:-1]} @{piece.fiber(i)}"{shape}];')
    seen = set()
    for i, name, j in piece.s0_edges(cfg):
        if j < 0:
            continue
        key = (min(i, j), max(i, j), name.rstrip("-"))
        if key in seen:
            continue
        seen.add(key)
        lines.append(f'  v{key[0]} -- v{key[1]} [label="{key[2]}"];')
    lines.append("}")
    return "\n".join(lines)


def level_to_json(lg: LevelGraph) -> dict:
    return {
        "d": lg.d,
        "n": lg.n,
        "vertices": ["".join(map(str, lg.word_of(i))) for i in range(lg.size)],
        "edges": {name: list(row) for name, row in lg.adj.items()},
    }


def level_to_dot(lg: LevelGraph) -> str:
    lines = ["graph level {"]
    for i in range(lg.size):
        lines.append(f'  v{i} [label="{"".join(map(str, lg.word_of(i)))}"];')
    seen = set()
    for name, row in lg.adj.items():
        for i, j in enumerate(row):
            key = (min(i, j), max(i, j), name)
            if key in seen:
                continue
            seen.add(key)
            lines.append(f'  v{key[0]} -- v{key[1]} [label="{name}"];')
    lines.append("}")
    return "\n".join(lines)


def find_n0(
    cfg: Config,
    points: list[TildePoint],
    radius: int = 8,
    search_bound: int = 20,
) -> dict:
    """Smallest piece radius n such that around every sampled basepoint all
    distinct points within graph distance ``radius`` have pairwise distinct
    central pieces of radius n.  The replay pass rechecks every ball at the
    final value in one sweep (codes are pure functions of the point, so the
    shared memo changes nothing about what is compared)."""
    del cfg  # the corpus is already sampled; kept for interface symmetry
    uniq = list(dict.fromkeys(points))
    memo: dict[bytes, bytes] = {}
    n0 = 1
    for p in uniq:
        n, witness = _ball_separation_radius(p, radius, search_bound, start=1, memo=memo)
        if witness is not None:
            return {
                "ok": False,
                "n0": None,
                "search_bound": search_bound,
                "radius": radius,
                "counterexample": {"basepoint": repr(p), "pair": witness},
            }
        n0 = max(n0, n)
    collisions = 0
    pairs_checked = 0
    vertices = 0
    for p in uniq:
        ball = schreier_ball(p, radius)
        seen: dict[bytes, TildePoint] = {}
        for q in ball:
            code = piece_code(q, -n0, n0, memo)
            if code in seen:
                collisions += 1
            seen[code] = q
        pairs_checked += len(ball) * (len(ball) - 1) // 2
        vertices += len(ball)
    return {
        "ok": collisions == 0,
        "n0": n0,
        "search_bound": search_bound,
        "radius": radius,
        "balls": len(uniq),
        "vertices": vertices,
        "pairs_checked": pairs_checked,
        "replay_collisions": collisions,
    }
