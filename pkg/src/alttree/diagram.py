"""Stationary path-space model of the boundary-with-doubled-rays.

Points are encoded as infinite edge paths in a layered graph whose
level-n vertex records two things about a sequence: whether letter n+1
is zero, and the next visible data — the first nonzero letter after
position n together with the letter that follows it.  Vertices are
``(a, b, flag)`` with ``a`` nonzero; ``flag`` is 1 ("*") when letter
n+1 is nonzero and 0 when it is zero.  Every level uses the same vertex
set and the same edge rule, and the walk from a deep vertex back toward
the top is deterministic, so a finite path is pinned down by its label
word plus its end vertex alone.

The module provides the finite-path type, encode/decode between points
and paths, a clopen-set algebra over antichains of path prefixes, exact
images of cylinders under group words, tower/prefix-exchange
machinery, and the audits used by the verification suites (uniform
non-exchange counts per tower, pointwise-fixed witness cylinders).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

from .core import (
    BGen,
    Gen,
    ResourceCap,
    Word,
    apply_word,
    as_nucleus,
    is_identity,
    reduce_word,
    root_perm,
    section_word,
    word_to_json,
)
from .points import (
    Periodic,
    TildePoint,
    ZeroPair,
    act,
    periodic_point,
    zero_pair_point,
)

__all__ = [
    "PathPrefix",
    "ClopenSet",
    "vertices",
    "out_edges",
    "source_vertex",
    "vertex_text",
    "parse_vertex",
    "path",
    "parse_path",
    "encode",
    "decode",
    "cylinder_member",
    "cylinder_semantics",
    "clopen",
    "full_space",
    "empty_set",
    "image_of_cylinder",
    "image_of_clopen",
    "tower",
    "tau_apply",
    "H_n_structure",
    "transfer_matrix",
    "path_counts",
    "is_identity_on_vertex",
    "bounded_type_audit",
    "nontrivial_section_words",
    "contraction_depth",
    "regularity_check",
    "roundtrip_audit",
    "full_connectivity_steps",
    "diagram_to_json",
    "diagram_to_dot",
]


# ---------------------------------------------------------------------------
# vertices and edges

Vertex = tuple  # (a, b, flag) with 1 <= a < d, 0 <= b < d, flag in {0, 1}


@lru_cache(maxsize=None)
def vertices(d: int) -> tuple[Vertex, ...]:
    """All level vertices, in sorted order: 2*(d-1)*d of them."""
    return tuple(
        (a, b, f) for a in range(1, d) for b in range(d) for f in (0, 1)
    )


@lru_cache(maxsize=None)
def out_edges(d: int, v: Vertex | None) -> tuple[tuple[int, Vertex], ...]:
    """Edges one level down from ``v`` as ``(label, target)`` pairs.

    ``v None`` is the top vertex: it reaches every level-1 vertex once
    per letter.  A 0-flagged vertex only extends the zero run (label 0,
    same pair, either flag).  A *-flagged vertex consumes its first
    visible letter ``a`` as the label: with ``b`` nonzero the next
    visible data starts at ``b``, with ``b`` zero a fresh zero run
    starts and the following visible pair is unconstrained.
    """
    if v is None:
        return tuple((lab, u) for u in vertices(d) for lab in range(d))
    a, b, flag = v
    if not flag:
        return ((0, (a, b, 0)), (0, (a, b, 1)))
    if b != 0:
        return tuple((a, (b, c, 1)) for c in range(d))
    return tuple((a, (c, e, 0)) for c in range(1, d) for e in range(d))


def source_vertex(d: int, v: Vertex, label: int) -> Vertex:
    """The unique vertex one level up with an edge labelled ``label`` into
    ``v``.  Every (vertex, label) pair has exactly one source, which is
    why a label word plus an end vertex determines a whole path."""
    a, b, flag = v
    if label == 0:
        return (a, b, 0)
    if flag:
        return (label, a, 1)
    return (label, 0, 1)


def vertex_text(v: Vertex | None) -> str:
    if v is None:
        return "top"
    a, b, flag = v
    return f"{a}{b}{'*' if flag else '0'}"


def parse_vertex(text: str) -> Vertex | None:
    if text == "top":
        return None
    if len(text) != 3 or not text[:2].isdigit() or text[2] not in "*0":
        raise ValueError(f"bad vertex text: {text!r}")
    return (int(text[0]), int(text[1]), 1 if text[2] == "*" else 0)


# ---------------------------------------------------------------------------
# finite paths


@lru_cache(maxsize=None)
def _chain(d: int, labels: tuple, end: Vertex) -> tuple[Vertex, ...]:
    """Vertices at levels 1..n along the unique path reading ``labels``
    into ``end``: walk backwards, one deterministic step per label."""
    out = [end]
    for k in range(len(labels) - 1, 0, -1):
        out.append(source_vertex(d, out[-1], labels[k]))
    out.reverse()
    return tuple(out)


@dataclass(frozen=True)
class PathPrefix:
    """A finite path from the top: label word plus end vertex.

    ``end`` is None exactly for the empty path (the whole space).  Any
    label word over 0..d-1 combined with any vertex names a valid,
    nonempty cylinder.
    """

    d: int
    labels: tuple[int, ...]
    end: Vertex | None

    def __post_init__(self):
        if any(not 0 <= x < self.d for x in self.labels):
            raise ValueError("label out of range")
        if self.end is None:
            if self.labels:
                raise ValueError("nonempty label word needs an end vertex")
        else:
            a, b, flag = self.end
            if not (1 <= a < self.d and 0 <= b < self.d and flag in (0, 1)):
                raise ValueError(f"bad vertex: {self.end}")
            if not self.labels:
                raise ValueError("empty label word must end at the top")

    @property
    def depth(self) -> int:
        return len(self.labels)

    def chain(self) -> tuple[Vertex, ...]:
        """Vertices at levels 1..depth (empty for the top path)."""
        if self.end is None:
            return ()
        return _chain(self.d, self.labels, self.end)

    def children(self) -> tuple["PathPrefix", ...]:
        return tuple(
            PathPrefix(self.d, self.labels + (lab,), u)
            for lab, u in out_edges(self.d, self.end)
        )

    def parent(self) -> "PathPrefix":
        if self.end is None:
            raise ValueError("the top path has no parent")
        ch = self.chain()
        return PathPrefix(
            self.d, self.labels[:-1], ch[-2] if len(ch) >= 2 else None
        )

    def text(self) -> str:
        return "".join(map(str, self.labels)) + "@" + vertex_text(self.end)

    def __repr__(self):
        return f"<path {self.text()}>"


def path(d: int, labels, end) -> PathPrefix:
    labels = tuple(labels)
    if isinstance(end, str):
        end = parse_vertex(end)
    return PathPrefix(d, labels, end)


def parse_path(text: str, d: int) -> PathPrefix:
    head, sep, tail = text.partition("@")
    if not sep:
        raise ValueError(f"bad path text: {text!r}")
    return PathPrefix(d, tuple(int(c) for c in head), parse_vertex(tail))


def _sort_key(p: PathPrefix):
    return (len(p.labels), p.labels, p.end or (0, 0, 0))


# ---------------------------------------------------------------------------
# encoding points as paths


def _letters_fast(p: TildePoint, n: int) -> tuple[int, ...]:
    pre = p.prefix
    if len(pre) >= n:
        return pre[:n]
    if isinstance(p.tail, ZeroPair):
        return pre + (0,) * (n - len(pre))
    per = p.tail.word
    q, r = divmod(n - len(pre), len(per))
    return pre + per * q + per[:r]


def _next_visible(p: TildePoint, n: int) -> tuple[int, int]:
    """First nonzero letter strictly after position ``n`` and its
    follower; doubled points fall back to the formal pair."""
    pre = p.prefix
    if isinstance(p.tail, ZeroPair):
        for i in range(n, len(pre)):
            if pre[i] != 0:
                return pre[i], (pre[i + 1] if i + 1 < len(pre) else 0)
        return p.tail.a, p.tail.b
    # a periodic tail shows a nonzero letter within one period
    for pos in range(n + 1, len(pre) + 2 * len(p.tail.word) + n + 2):
        x = p.letter(pos)
        if x != 0:
            return x, p.letter(pos + 1)
    raise AssertionError("periodic tail with no nonzero letter")


def encode(p: TildePoint, depth: int) -> PathPrefix:
    """The depth-``depth`` path of ``p``: its first letters as labels,
    plus the vertex recording zero-ness of the next letter and the next
    visible pair."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if depth == 0:
        return PathPrefix(p.d, (), None)
    labels = _letters_fast(p, depth)
    a, b = _next_visible(p, depth)
    flag = 1 if p.letter(depth + 1) != 0 else 0
    return PathPrefix(p.d, labels, (a, b, flag))


def decode(eta: PathPrefix, tail: TildePoint | None = None) -> TildePoint:
    """A point whose depth-n path is ``eta``.

    Without a tail the canonical continuation is used: a *-flagged end
    repeats its visible pair forever, a 0-flagged end becomes the
    doubled point carrying the pair formally.  An explicit ``tail`` is
    grafted after the labels and must be consistent with the end vertex
    (ValueError otherwise).
    """
    d, labels, end = eta.d, eta.labels, eta.end
    if tail is None:
        if end is None:
            return zero_pair_point(d, (), 1, 0)
        a, b, flag = end
        if flag:
            return periodic_point(d, labels, (a, b))
        return zero_pair_point(d, labels, a, b)
    if tail.d != d:
        raise ValueError("degree mismatch")
    if isinstance(tail.tail, ZeroPair):
        q = zero_pair_point(d, labels + tail.prefix, tail.tail.a, tail.tail.b)
    else:
        q = periodic_point(d, labels + tail.prefix, tail.tail.word)
    if encode(q, len(labels)) != eta:
        raise ValueError("tail inconsistent with the end vertex")
    return q


def cylinder_member(eta: PathPrefix, p: TildePoint) -> bool:
    """Membership of ``p`` in the cylinder of ``eta``, decided from the
    sequence itself: the labels must be the first letters, a *-flagged
    end pins letters n+1 and n+2, and a 0-flagged end demands a zero at
    n+1 with visible data (a, b) further on (formal pair included)."""
    if p.d != eta.d:
        return False
    if eta.end is None:
        return True
    n = len(eta.labels)
    if _letters_fast(p, n) != eta.labels:
        return False
    a, b, flag = eta.end
    if flag:
        return p.letter(n + 1) == a and p.letter(n + 2) == b
    if p.letter(n + 1) != 0:
        return False
    # scan the zero run: the first nonzero letter must be a, followed by b
    pos = n + 2
    if isinstance(p.tail, Periodic):
        bound = max(len(p.prefix), n + 1) + 2 * len(p.tail.word)
    else:
        bound = len(p.prefix)
    while pos <= bound:
        x = p.letter(pos)
        if x != 0:
            return x == a and p.letter(pos + 1) == b
        pos += 1
    if isinstance(p.tail, Periodic):
        raise AssertionError("periodic tail with no nonzero letter")
    return p.tail.a == a and p.tail.b == b


def cylinder_semantics(eta: PathPrefix):
    """The cylinder of ``eta`` as a predicate on points."""
    return lambda p: cylinder_member(eta, p)


# ---------------------------------------------------------------------------
# clopen sets: antichains of path prefixes


def _contains(big: PathPrefix, small: PathPrefix) -> bool:
    nb = len(big.labels)
    if nb > len(small.labels) or small.labels[:nb] != big.labels:
        return False
    if big.end is None:
        return True
    return small.chain()[nb - 1] == big.end


def _covered_by(p: PathPrefix, keys: set) -> bool:
    """Does some cylinder whose (labels, end) key is listed contain ``p``?

    Containment between path cylinders is prefix containment, so it is
    enough to walk ``p``'s ancestor chain and look each ancestor up --
    O(depth) hash probes instead of a scan of the whole family."""
    if ((), None) in keys:
        return True
    ch = p.chain()
    labels = p.labels
    for k in range(1, len(labels) + 1):
        if (labels[:k], ch[k - 1]) in keys:
            return True
    return False


@dataclass(frozen=True)
class ClopenSet:
    """A finite union of cylinders in maximal-antichain normal form.

    Build these with :func:`clopen` (or the set operations); equality of
    normal forms is equality of the sets they denote.
    """

    d: int
    cylinders: tuple[PathPrefix, ...]

    def is_empty(self) -> bool:
        return not self.cylinders

    def member(self, p: TildePoint) -> bool:
        return any(cylinder_member(c, p) for c in self.cylinders)

    def union(self, other: "ClopenSet") -> "ClopenSet":
        self._check(other)
        return clopen(self.d, self.cylinders + other.cylinders)

    def intersect(self, other: "ClopenSet") -> "ClopenSet":
        # two path cylinders meet exactly when one contains the other, so
        # the intersection keeps each side's cylinders covered by the other
        self._check(other)
        keys_self = {(p.labels, p.end) for p in self.cylinders}
        keys_other = {(q.labels, q.end) for q in other.cylinders}
        out = [p for p in self.cylinders if _covered_by(p, keys_other)]
        out += [q for q in other.cylinders if _covered_by(q, keys_self)]
        return clopen(self.d, out)

    def complement(self) -> "ClopenSet":
        d = self.d
        if not self.cylinders:
            return full_space(d)
        if any(c.end is None for c in self.cylinders):
            return empty_set(d)
        members = {(c.labels, c.end) for c in self.cylinders}
        ancestors = set()
        for c in self.cylinders:
            ch = c.chain()
            for k in range(len(c.labels)):
                ancestors.add((c.labels[:k], ch[k - 1] if k else None))
        out: list[PathPrefix] = []
        stack: list[tuple[tuple, Vertex | None]] = [((), None)]
        while stack:
            labels, end = stack.pop()
            for lab, u in out_edges(d, end):
                key = (labels + (lab,), u)
                if key in members:
                    continue
                if key in ancestors:
                    stack.append(key)
                else:
                    out.append(PathPrefix(d, key[0], key[1]))
        return clopen(d, out)

    def is_disjoint(self, other: "ClopenSet") -> bool:
        self._check(other)
        keys_other = {(q.labels, q.end) for q in other.cylinders}
        if any(_covered_by(p, keys_other) for p in self.cylinders):
            return False
        keys_self = {(p.labels, p.end) for p in self.cylinders}
        return not any(_covered_by(q, keys_self) for q in other.cylinders)

    def equals(self, other: "ClopenSet") -> bool:
        return self == other

    def refine_to_depth(self, depth: int, cap: int = 500_000) -> frozenset:
        """The same set written as raw cylinders all at the given depth
        (a frozenset of paths, not a normalized ClopenSet).  Exponential
        in depth; meant for small cross-checks only."""
        out: list[PathPrefix] = []
        stack = list(self.cylinders)
        while stack:
            c = stack.pop()
            if len(c.labels) > depth:
                raise ValueError("set already finer than the target depth")
            if len(c.labels) == depth:
                out.append(c)
            else:
                stack.extend(c.children())
            if len(out) + len(stack) > cap:
                raise ResourceCap("refinement exceeded the cylinder cap")
        return frozenset(out)

    def texts(self) -> list[str]:
        return [c.text() for c in self.cylinders]

    def _check(self, other: "ClopenSet") -> None:
        if self.d != other.d:
            raise ValueError("clopen sets over different degrees")

    def __repr__(self):
        inner = ", ".join(self.texts()) or "empty"
        return f"<clopen {{{inner}}}>"


def clopen(d: int, paths) -> ClopenSet:
    """Normal form: drop covered cylinders, then merge every complete
    family of siblings into its parent until nothing merges."""
    ps = set(paths)
    keys = {(p.labels, p.end) for p in ps}
    kept = set()
    for p in ps:
        if p.end is not None and ((), None) in keys:
            continue
        ch = p.chain()
        if any((p.labels[:k], ch[k - 1]) in keys for k in range(1, len(p.labels))):
            continue  # a proper ancestor is already present
        kept.add(p)
    ps = kept
    while True:
        groups: dict[tuple, set[PathPrefix]] = {}
        for p in ps:
            if p.end is None:
                continue
            ch = p.chain()
            parent = (p.labels[:-1], ch[-2] if len(ch) >= 2 else None)
            groups.setdefault(parent, set()).add(p)
        merged = False
        for (labels, end), members in groups.items():
            need = set(out_edges(d, end))
            have = {(m.labels[-1], m.end) for m in members}
            if have == need:
                ps -= members
                ps.add(PathPrefix(d, labels, end))
                merged = True
        if not merged:
            break
    return ClopenSet(d, tuple(sorted(ps, key=_sort_key)))


def full_space(d: int) -> ClopenSet:
    return ClopenSet(d, (PathPrefix(d, (), None),))


def empty_set(d: int) -> ClopenSet:
    return ClopenSet(d, ())


# ---------------------------------------------------------------------------
# images of cylinders under group words


def image_of_cylinder(word: Word, eta: PathPrefix, _depth_cap: int = 64) -> ClopenSet:
    """The exact image of the cylinder of ``eta`` under the word.

    If the section at the label word acts trivially the image is the
    single path with relettered labels and the same end.  A section
    equal to one recursion generator moves every member's visible pair
    the same way, so only the end vertex is relabelled.  Anything else
    is pushed one level down and recursed; shrinking sections make this
    bottom out.
    """
    d = eta.d
    word = reduce_word(word)
    sec = section_word(word, eta.labels)
    if is_identity(sec, d):
        return ClopenSet(
            d, (PathPrefix(d, apply_word(word, eta.labels), eta.end),)
        )
    if eta.end is not None:
        nuc = as_nucleus(sec, d)
        if isinstance(nuc, BGen):
            a, b, flag = eta.end
            v2 = (nuc.rho(a), nuc.sigma(a)(b), flag)
            return ClopenSet(
                d, (PathPrefix(d, apply_word(word, eta.labels), v2),)
            )
    if _depth_cap <= 0:
        raise ResourceCap("image recursion exceeded the depth cap")
    pieces: list[PathPrefix] = []
    for child in eta.children():
        pieces.extend(image_of_cylinder(word, child, _depth_cap - 1).cylinders)
    return clopen(d, pieces)


def image_of_clopen(word: Word, C: ClopenSet) -> ClopenSet:
    out: list[PathPrefix] = []
    for c in C.cylinders:
        out.extend(image_of_cylinder(word, c).cylinders)
    return clopen(C.d, out)


# ---------------------------------------------------------------------------
# towers and prefix exchanges


def tower(d: int, v: Vertex, n: int, cap: int = 200_000) -> tuple[PathPrefix, ...]:
    """All depth-``n`` paths ending at ``v`` — one per label word."""
    if d**n > cap:
        raise ResourceCap(f"tower would hold {d ** n} paths")
    return tuple(
        PathPrefix(d, labels, v)
        for labels in itertools.product(range(d), repeat=n)
    )


def tau_apply(gamma: PathPrefix, gamma2: PathPrefix, p: TildePoint) -> TildePoint:
    """Exchange the prefix ``gamma`` of ``p`` for ``gamma2``, keeping the
    tail.  Both paths must end at the same vertex and ``p`` must lie in
    the cylinder of ``gamma``."""
    if gamma.d != gamma2.d or gamma.end != gamma2.end:
        raise ValueError("prefix exchange needs a common end vertex")
    if not cylinder_member(gamma, p):
        raise ValueError("point outside the source cylinder")
    n = len(gamma.labels)
    rest = p.prefix[n:]
    if isinstance(p.tail, ZeroPair):
        return zero_pair_point(p.d, gamma2.labels + rest, p.tail.a, p.tail.b)
    per = p.tail.word
    k = max(0, n - len(p.prefix)) % len(per)
    return periodic_point(p.d, gamma2.labels + rest, per[k:] + per[:k])


def path_counts(d: int, n: int) -> dict[Vertex, int]:
    """Paths from the top to each level-``n`` vertex, by dynamic
    programming over the level rule."""
    if n < 1:
        raise ValueError("levels start at 1")
    counts = {v: d for v in vertices(d)}
    for _ in range(n - 1):
        nxt = dict.fromkeys(vertices(d), 0)
        for v, c in counts.items():
            for _lab, u in out_edges(d, v):
                nxt[u] += c
        counts = nxt
    return counts


def H_n_structure(d: int, n: int) -> dict[Vertex, int]:
    """Per level-``n`` vertex, the degree of the finite symmetric factor
    acting on its tower — i.e. the number of paths into it."""
    return path_counts(d, n)


def transfer_matrix(d: int) -> dict[tuple[Vertex, Vertex], int]:
    """Edge multiplicities (source, target) -> count, for cross-checking
    path counts by matrix products."""
    out: dict[tuple[Vertex, Vertex], int] = {}
    for v in vertices(d):
        for _lab, u in out_edges(d, v):
            out[(v, u)] = out.get((v, u), 0) + 1
    return out


def full_connectivity_steps(d: int, bound: int = 8) -> int:
    """The least k with a length-k path between every ordered vertex
    pair.  Starred vertices already see everything in two steps; the
    zero-flagged ones only fan out after leaving their zero run, which
    costs one more level."""
    reach = {v: {u for _l, u in out_edges(d, v)} for v in vertices(d)}
    cur = {v: {v} for v in vertices(d)}
    for k in range(1, bound + 1):
        cur = {v: {w for u in cur[v] for w in reach[u]} for v in cur}
        if all(len(s) == len(vertices(d)) for s in cur.values()):
            return k
    raise ResourceCap(f"not fully connected within {bound} steps")


# ---------------------------------------------------------------------------
# pointwise-trivial sections over a vertex

_IOV_CACHE: dict[tuple, bool] = {}


def is_identity_on_vertex(word: Word, v: Vertex | None, d: int | None = None) -> bool:
    """Does the word act as the identity on every tail compatible with
    ``v`` (formal-pair tails included)?

    The tails of a vertex split along its out-edges, so the word is
    trivial on the vertex iff its root fixes every edge label and every
    section is trivial on the matching target.  Cycles in that
    unfolding mean the demands repeat forever without a violation, so
    they count as success; a visited cycle therefore returns True.
    """
    word = reduce_word(word)
    if not word:
        return True
    if d is None:
        d = word[0].d
    ok, _tainted = _iov(word, v, d, set())
    return ok


def _iov(word: Word, v, d: int, inprog: set) -> tuple[bool, bool]:
    if not word:
        return True, False
    key = (word, v)
    cached = _IOV_CACHE.get(key)
    if cached is not None:
        return cached, False
    if key in inprog:
        return True, True
    inprog.add(key)
    ok, tainted = True, False
    rp = root_perm(word)
    for lab, u in out_edges(d, v):
        if rp(lab) != lab:
            ok = False
            break
        sub_ok, sub_taint = _iov(section_word(word, (lab,)), u, d, inprog)
        tainted = tainted or sub_taint
        if not sub_ok:
            ok = False
            break
    inprog.discard(key)
    # a False is a hard witness; a True that leaned on an in-progress
    # assumption is only valid for the call that made the assumption
    if not ok or not tainted:
        _IOV_CACHE[key] = ok
        tainted = False
    return ok, tainted


# ---------------------------------------------------------------------------
# audits


def nontrivial_section_words(word: Word, d: int, level: int, cap: int = 100_000) -> list[tuple]:
    """Label words of the given length at which the word has a
    nontrivial section.  Grown level by level, so the cost tracks the
    number of bad words rather than the full level size."""
    word = reduce_word(word)
    live: dict[tuple, Word] = {}
    if word and not is_identity(word, d):
        live[()] = word
    for _ in range(level):
        nxt: dict[tuple, Word] = {}
        for w, s in live.items():
            for x in range(d):
                t = section_word(s, (x,))
                if t and not is_identity(t, d):
                    nxt[w + (x,)] = t
                if len(nxt) > cap:
                    raise ResourceCap("too many nontrivial-section words")
        live = nxt
    return sorted(live)


def bounded_type_audit(gen: Gen, max_level: int, d: int | None = None) -> dict:
    """Per level and per vertex, how many cylinders of that tower the
    generator fails to act on as a plain prefix exchange; plus the
    doubled points at the all-zero ray whose neighbourhoods never
    settle.  The report records the observed uniform bound and the level
    from which the per-level maximum is constant."""
    if d is None:
        d = gen.d
    word: Word = (gen,)
    levels: dict[int, dict] = {}
    for n in range(1, max_level + 1):
        bad = nontrivial_section_words(word, d, n)
        per_vertex = dict.fromkeys(vertices(d), 0)
        for w in bad:
            s = section_word(word, w)
            for v in vertices(d):
                if not is_identity_on_vertex(s, v, d):
                    per_vertex[v] += 1
        levels[n] = {
            "bad_words": ["".join(map(str, w)) for w in bad],
            "per_vertex": {vertex_text(v): c for v, c in per_vertex.items()},
            "max": max(per_vertex.values(), default=0),
        }
    maxima = [levels[n]["max"] for n in range(1, max_level + 1)]
    bound = max(maxima, default=0)
    settle = max_level
    while settle > 1 and levels[settle - 1]["max"] == levels[max_level]["max"]:
        settle -= 1
    # sections along the zero ray, up to their eventual cycle: a doubled
    # point there is exceptional iff no depth ever acts as a plain
    # prefix exchange around it
    ray_sections: list[Word] = []
    s: Word = word
    while s not in ray_sections:
        ray_sections.append(s)
        s = section_word(s, (0,))
    exceptional = []
    for a in range(1, d):
        for b in range(d):
            p = zero_pair_point(d, (), a, b)
            germ = all(
                not is_identity_on_vertex(t, (a, b, 0), d) for t in ray_sections
            )
            if germ:
                exceptional.append(
                    {"point": repr(p)[1:-1], "moved": act(word, p) != p}
                )
    return {
        "generator": word_to_json(word)[0],
        "max_level": max_level,
        "levels": levels,
        "uniform_bound": bound,
        "constant_from_level": settle,
        "exceptional_points": exceptional,
    }


def contraction_depth(word: Word, d: int | None = None, bound: int = 64) -> int:
    """The first positive level at which every section of the word
    collapses to a single generator (or the identity); identity words
    report 0.  Sections of single generators stay that way, so the
    property is stable once reached.  Level 0 never counts for a
    nontrivial word: the word itself being a generator says nothing
    about a level of the tree having absorbed its action."""
    word = reduce_word(word)
    if d is None:
        d = word[0].d if word else 5
    if is_identity(word, d):
        return 0
    live = {word}
    for n in range(1, bound + 1):
        live = {
            reduce_word(section_word(w, (x,))) for w in live for x in range(d)
        }
        if all(as_nucleus(w, d) is not None for w in live):
            return n
    raise ResourceCap(f"sections did not collapse within {bound} levels")


def regularity_check(word: Word, p: TildePoint, bound: int = 64) -> dict:
    """For a word fixing ``p``: the first depth whose cylinder around
    ``p`` is fixed pointwise, with the witness path and its section.

    The fixed cylinder is re-verified through the image machinery.  A
    ValueError signals that the word does not fix the point at all.
    """
    d = p.d
    word = reduce_word(word)
    if act(word, p) != p:
        raise ValueError("the word does not fix the point")
    for n in range(bound + 1):
        eta = encode(p, n)
        sec = section_word(word, eta.labels)
        if not is_identity_on_vertex(sec, eta.end, d):
            continue
        image = image_of_cylinder(word, eta)
        if image != ClopenSet(d, (eta,)):
            raise AssertionError("pointwise-trivial section with a moving image")
        nuc = as_nucleus(sec, d)
        kind = (
            "identity"
            if is_identity(sec, d)
            else "pair-recursion"
            if isinstance(nuc, BGen)
            else "first-letter"
            if nuc is not None
            else "word"
        )
        return {
            "depth": n,
            "cylinder": eta.text(),
            "section": word_to_json(sec),
            "section_kind": kind,
            "verified": True,
        }
    raise ResourceCap(f"no pointwise-fixed cylinder within depth {bound}")


# ---------------------------------------------------------------------------
# exhaustive encode/decode audit


def roundtrip_audit(d: int, max_depth: int, cap: int = 40_000_000) -> dict:
    """Check encode(decode(path)) == path for every path of every depth
    up to ``max_depth``; returns the number checked and any failures."""
    total = sum(2 * (d - 1) * d * d**n for n in range(1, max_depth + 1)) + 1
    if total > cap:
        raise ResourceCap(f"{total} paths exceed the audit cap")
    checked, failures = 0, []
    top = PathPrefix(d, (), None)
    if encode(decode(top), 0) != top:
        failures.append(top.text())
    checked += 1
    for v in vertices(d):
        for n in range(1, max_depth + 1):
            for labels in itertools.product(range(d), repeat=n):
                eta = PathPrefix(d, labels, v)
                if encode(decode(eta), n) != eta:
                    failures.append(eta.text())
                checked += 1
    return {
        "max_depth": max_depth,
        "checked": checked,
        "failures": failures,
        "ok": not failures,
    }


# ---------------------------------------------------------------------------
# export


def diagram_to_json(d: int, levels: int = 3) -> dict:
    return {
        "d": d,
        "levels": levels,
        "vertices": [vertex_text(v) for v in vertices(d)],
        "top_edges": [
            {"label": lab, "to": vertex_text(u)} for lab, u in out_edges(d, None)
        ],
        "level_edges": [
            {"from": vertex_text(v), "label": lab, "to": vertex_text(u)}
            for v in vertices(d)
            for lab, u in out_edges(d, v)
        ],
    }


def diagram_to_dot(d: int, levels: int = 3) -> str:
    lines = [
        "digraph pathspace {",
        "  rankdir=TB;",
        '  node [shape=box, fontname="monospace"];',
        '  "L0_top" [label="top"];',
        "  { rank=same; \"L0_top\" }",
    ]
    for n in range(1, levels + 1):
        names = [f'"L{n}_{vertex_text(v)}"' for v in vertices(d)]
        for v in vertices(d):
            lines.append(
                f'  "L{n}_{vertex_text(v)}" [label="{vertex_text(v)}"];'
            )
        lines.append("  { rank=same; " + "; ".join(names) + " }")
    for lab, u in out_edges(d, None):
        lines.append(f'  "L0_top" -> "L1_{vertex_text(u)}" [label="{lab}"];')
    for n in range(1, levels):
        for v in vertices(d):
            for lab, u in out_edges(d, v):
                lines.append(
                    f'  "L{n}_{vertex_text(v)}" -> "L{n + 1}_{vertex_text(u)}"'
                    f' [label="{lab}"];'
                )
    lines.append("}")
    return "\n".join(lines)
