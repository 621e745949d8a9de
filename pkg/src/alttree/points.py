"""The point space the group acts on, and its Gray-code projection.

Points are infinite letter sequences over {0..d-1} that either

* contain infinitely many nonzero letters -- stored as an eventually
  periodic sequence ``prefix . (period)^inf`` (exactly the eventually
  periodic ones are representable; that is the sampling corpus), or

* are eventually zero.  Those sequences form a single dense orbit and are
  *doubled*: each carries a formal pair of letters ``(a, b)``, ``a != 0``,
  living at the positions ``omega`` and ``omega + 1`` past all finite
  positions.  Stored as ``prefix . 0^inf [a b]`` with the all-zero tail
  implicit.

The action of a word on a point is computed exactly by streaming letters
through sections and detecting the section-state cycle; on the doubled
points the stable section value (always a single recursion generator or
the identity) acts on the formal pair the same way it would act on a
two-letter word.

The Gray projection forgets everything about a letter except whether it
is zero.  Its image is the set of "Gray words"; each Gray word has
exactly two line neighbors: flip the first bit (an ``A`` move), or flip
the bit right after the first star (a ``B`` move).  Positions are
1-based; ``OMEGA``/``OMEGA1`` stand for the two formal positions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .core import (
    AGen,
    BGen,
    Gen,
    ResourceCap,
    Word,
    as_nucleus,
    apply_word,
    equals,
    is_identity_gen,
    reduce_word,
    section_word,
)

__all__ = [
    "OMEGA",
    "OMEGA1",
    "pos_sort_key",
    "Periodic",
    "ZeroPair",
    "TildePoint",
    "periodic_point",
    "zero_pair_point",
    "parse_point",
    "format_point",
    "act",
    "section_at_zero_ray",
    "GrayWord",
    "gray_word",
    "gray_projection",
    "first_star",
    "gray_neighbors",
    "gray_segment",
    "visible_positions",
]


# ---------------------------------------------------------------------------
# positions


@dataclass(frozen=True)
class _InfPos:
    offset: int

    def __repr__(self):
        return "OMEGA" if self.offset == 0 else "OMEGA+1"


OMEGA = _InfPos(0)
OMEGA1 = _InfPos(1)

Position = int | _InfPos


def pos_sort_key(pos: Position):
    if isinstance(pos, _InfPos):
        return (1, pos.offset)
    return (0, pos)


def pos_after(pos: Position) -> Position:
    if pos is OMEGA:
        return OMEGA1
    if isinstance(pos, _InfPos):
        raise ValueError("no position after omega+1")
    return pos + 1


# ---------------------------------------------------------------------------
# points


@dataclass(frozen=True)
class Periodic:
    word: tuple[int, ...]


@dataclass(frozen=True)
class ZeroPair:
    a: int
    b: int


@dataclass(frozen=True)
class TildePoint:
    """A point in canonical form; equality/hashing is structural."""

    d: int
    prefix: tuple[int, ...]
    tail: Periodic | ZeroPair

    def letter(self, pos: int) -> int:
        """The letter at a finite 1-based position."""
        if pos < 1:
            raise ValueError("positions are 1-based")
        i = pos - 1
        if i < len(self.prefix):
            return self.prefix[i]
        if isinstance(self.tail, ZeroPair):
            return 0
        per = self.tail.word
        return per[(i - len(self.prefix)) % len(per)]

    def letters(self, n: int) -> tuple[int, ...]:
        return tuple(self.letter(i) for i in range(1, n + 1))

    def pair(self) -> tuple[int, int] | None:
        return (self.tail.a, self.tail.b) if isinstance(self.tail, ZeroPair) else None

    def __repr__(self):
        return f"<{format_point(self)}>"


def _primitive(word: tuple[int, ...]) -> tuple[int, ...]:
    n = len(word)
    for L in range(1, n + 1):
        if n % L == 0 and word == word[:L] * (n // L):
            return word[:L]
    return word


def periodic_point(d: int, prefix, period) -> TildePoint:
    prefix = tuple(prefix)
    period = _primitive(tuple(period))
    if not period or all(x == 0 for x in period):
        raise ValueError("period must contain a nonzero letter")
    for x in prefix + period:
        if not 0 <= x < d:
            raise ValueError(f"letter out of range: {x}")
    # pull the period back over the prefix as far as it matches
    prefix = list(prefix)
    period = list(period)
    while prefix and prefix[-1] == period[-1]:
        prefix.pop()
        period.insert(0, period.pop())
    return TildePoint(d, tuple(prefix), Periodic(tuple(period)))


def zero_pair_point(d: int, prefix, a: int, b: int) -> TildePoint:
    prefix = tuple(prefix)
    if not 1 <= a < d:
        raise ValueError("the first formal letter must be nonzero")
    if not 0 <= b < d:
        raise ValueError(f"letter out of range: {b}")
    for x in prefix:
        if not 0 <= x < d:
            raise ValueError(f"letter out of range: {x}")
    while prefix and prefix[-1] == 0:
        prefix = prefix[:-1]
    return TildePoint(d, prefix, ZeroPair(a, b))


def _expand(p: TildePoint, m: int):
    """First ``m`` letters plus the residual tail descriptor at depth m."""
    letters = p.letters(m)
    if isinstance(p.tail, ZeroPair):
        return letters, p.tail
    per = p.tail.word
    k = max(0, m - len(p.prefix)) % len(per)
    return letters, Periodic(per[k:] + per[:k])


def with_letters(p: TildePoint, changes: dict[int, int], pair: tuple[int, int] | None = None) -> TildePoint:
    """Copy of ``p`` with finite letters (and/or the formal pair) replaced."""
    m = max([len(p.prefix)] + [pos for pos in changes])
    letters, tail = _expand(p, m)
    buf = list(letters)
    for pos, val in changes.items():
        buf[pos - 1] = val
    if isinstance(tail, ZeroPair):
        a, b = pair if pair is not None else (tail.a, tail.b)
        return zero_pair_point(p.d, buf, a, b)
    if pair is not None:
        raise ValueError("only doubled points carry a formal pair")
    return periodic_point(p.d, buf, tail.word)


# --- text form: "13(20)" = 1 3 2 0 2 0 ...;  "2[14]" = 2 0 0 ... [1 4]

_POINT_RE = re.compile(r"^(\d*)(?:\((\d+)\)|\[(\d\d)\])$")


def format_point(p: TildePoint) -> str:
    head = "".join(map(str, p.prefix))
    if isinstance(p.tail, ZeroPair):
        return f"{head}[{p.tail.a}{p.tail.b}]"
    return f"{head}({''.join(map(str, p.tail.word))})"


def parse_point(text: str, d: int) -> TildePoint:
    if d > 10:
        raise ValueError("digit notation supports degrees up to 10")
    m = _POINT_RE.match(text.strip())
    if not m:
        raise ValueError(f"cannot parse point {text!r}")
    prefix = tuple(int(c) for c in m.group(1))
    if m.group(2) is not None:
        return periodic_point(d, prefix, tuple(int(c) for c in m.group(2)))
    a, b = int(m.group(3)[0]), int(m.group(3)[1])
    return zero_pair_point(d, prefix, a, b)


# ---------------------------------------------------------------------------
# the action


_STATE_CAP = 10_000


def act(word: Word, p: TildePoint) -> TildePoint:
    """Exact image of a point under a word."""
    word = reduce_word(word)
    if not word:
        return p
    d = p.d
    out = []
    w = word
    for x in p.prefix:
        out.append(apply_word(w, (x,))[0])
        w = section_word(w, (x,))
    if isinstance(p.tail, Periodic):
        per = p.tail.word
        seen: dict = {}
        ys: list[int] = []
        idx = 0
        while (w, idx) not in seen:
            seen[(w, idx)] = len(ys)
            ys.append(apply_word(w, (per[idx],))[0])
            w = section_word(w, (per[idx],))
            idx = (idx + 1) % len(per)
            if len(ys) > _STATE_CAP:
                raise ResourceCap("section state space too large while acting on a periodic point")
        start = seen[(w, idx)]
        return periodic_point(d, tuple(out) + tuple(ys[:start]), tuple(ys[start:]))
    # doubled point: stream zeros until the section word repeats
    seen = {}
    ys = []
    while w not in seen:
        seen[w] = len(ys)
        ys.append(apply_word(w, (0,))[0])
        w = section_word(w, (0,))
        if len(ys) > _STATE_CAP:
            raise ResourceCap("section state space too large while acting on a doubled point")
    start = seen[w]
    cycle_out = ys[start:]
    if any(y != 0 for y in cycle_out):
        raise AssertionError("the eventually-zero orbit was not preserved; generator invariants are broken")
    stable = as_nucleus(w, d)
    if stable is None or (isinstance(stable, AGen) and not stable.pi.is_identity() and stable.pi(0) != 0):
        raise AssertionError("section did not stabilize to a recursion element on the zero ray")
    a, b = stable.apply((p.tail.a, p.tail.b))
    return zero_pair_point(d, tuple(out) + tuple(ys[:start]), a, b)


def section_at_zero_ray(word: Word, prefix: tuple[int, ...], d: int, cap: int = 64) -> Gen:
    """The stable section of ``word`` along ``prefix . 0^inf``.

    Always a single recursion generator or the identity; the stabilization
    depth is bounded by the section-state count (cap with diagnostic)."""
    w = section_word(reduce_word(word), prefix)
    seen = {}
    chain = []
    while w not in seen:
        seen[w] = len(chain)
        chain.append(w)
        w = section_word(w, (0,))
        if len(chain) > cap:
            raise ResourceCap(f"zero-ray section did not cycle within {cap} steps")
    cycle = chain[seen[w]:]
    for other in cycle[1:]:
        if not equals(cycle[0], other, d):
            raise AssertionError("zero-ray sections cycle through distinct elements")
    g = as_nucleus(cycle[0], d)
    if g is None:
        raise AssertionError("zero-ray section is not a single generator")
    return g


# ---------------------------------------------------------------------------
# Gray words


@dataclass(frozen=True)
class GrayWord:
    """A 0/1 sequence in canonical form.  ``period is None`` marks the
    eventually-zero kind, whose bit at ``OMEGA`` is always a star and whose
    bit at ``OMEGA1`` is ``star2``."""

    prefix: tuple[int, ...]
    period: tuple[int, ...] | None
    star2: bool | None

    def bit(self, pos: Position) -> int:
        if pos is OMEGA or pos is OMEGA1:
            if self.period is not None:
                raise ValueError("this Gray word has no formal positions")
            return 1 if (pos is OMEGA or self.star2) else 0
        i = pos - 1
        if i < len(self.prefix):
            return self.prefix[i]
        if self.period is None:
            return 0
        return self.period[(i - len(self.prefix)) % len(self.period)]

    def __repr__(self):
        head = "".join("*" if b else "0" for b in self.prefix)
        if self.period is None:
            return f"|{head}[*{'*' if self.star2 else '0'}]|"
        return f"|{head}({''.join('*' if b else '0' for b in self.period)})|"


def gray_word(prefix, period=None, star2=None) -> GrayWord:
    prefix = tuple(int(bool(x)) for x in prefix)
    if period is None:
        if star2 is None:
            raise ValueError("eventually-zero Gray words need the second formal bit")
        while prefix and prefix[-1] == 0:
            prefix = prefix[:-1]
        return GrayWord(prefix, None, bool(star2))
    if star2 is not None:
        raise ValueError("periodic Gray words have no formal bits")
    period = _primitive(tuple(int(bool(x)) for x in period))
    if all(b == 0 for b in period):
        raise ValueError("period must contain a star")
    prefix = list(prefix)
    period = list(period)
    while prefix and prefix[-1] == period[-1]:
        prefix.pop()
        period.insert(0, period.pop())
    return GrayWord(tuple(prefix), tuple(period), None)


def gray_projection(p: TildePoint) -> GrayWord:
    if isinstance(p.tail, ZeroPair):
        return gray_word([x != 0 for x in p.prefix], star2=p.tail.b != 0)
    return gray_word([x != 0 for x in p.prefix], [x != 0 for x in p.tail.word])


def first_star(gw: GrayWord) -> Position:
    for i, b in enumerate(gw.prefix):
        if b:
            return i + 1
    if gw.period is None:
        return OMEGA
    n = len(gw.prefix)
    for i, b in enumerate(gw.period):
        if b:
            return n + i + 1
    raise AssertionError("canonical Gray word without a star")


def _flip(gw: GrayWord, pos: int) -> GrayWord:
    """Flip a finite bit, expanding the representation as needed."""
    prefix = list(gw.prefix)
    period = list(gw.period) if gw.period is not None else None
    while len(prefix) < pos:
        if period is None:
            prefix.append(0)
        else:
            prefix.append(period[0])
            period.append(period.pop(0))
    prefix[pos - 1] ^= 1
    if period is None:
        return gray_word(prefix, star2=gw.star2)
    return gray_word(prefix, period)


def gray_neighbors(gw: GrayWord) -> tuple[GrayWord, GrayWord]:
    """(first-bit flip, after-first-star flip)."""
    a = _flip(gw, 1)
    j = first_star(gw)
    if j is OMEGA:
        b = gray_word(gw.prefix, star2=not gw.star2)
    else:
        b = _flip(gw, j + 1)
    return a, b


def gray_segment(center: GrayWord, lo: int, hi: int) -> tuple[GrayWord, ...]:
    """Line segment ``lo..hi`` around ``center`` at index 0.

    The first-bit neighbor of the center sits at index -1; the line edge
    between indices (k, k+1) is a first-bit edge for odd k and an
    after-the-star edge for even k."""
    if not lo <= 0 <= hi:
        raise ValueError("the window must contain index 0")
    words = {0: center}
    for k in range(0, lo, -1):
        a, b = gray_neighbors(words[k])
        words[k - 1] = a if (k - 1) % 2 == 1 else b
    for k in range(0, hi):
        a, b = gray_neighbors(words[k])
        words[k + 1] = a if k % 2 == 1 else b
    seg = tuple(words[k] for k in range(lo, hi + 1))
    if len(set(seg)) != len(seg):
        raise AssertionError("Gray line revisited a word; the line structure is broken")
    return seg


def visible_positions(segment) -> tuple[tuple[int, ...], bool]:
    """Finite positions whose bit some segment word exposes (the first bit,
    each word's first star and its follower), plus an at-infinity flag."""
    finite = {1}
    has_inf = False
    for gw in segment:
        j = first_star(gw)
        if j is OMEGA:
            has_inf = True
        else:
            finite.add(j)
            finite.add(j + 1)
    return tuple(sorted(finite)), has_inf
