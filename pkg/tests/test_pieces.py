"""Piece machinery against an independent enumeration oracle.

The oracle never touches the BFS code: it enumerates every letter
assignment consistent with the segment's bit patterns, declares two
assignments adjacent purely from their letter-difference pattern (first
letter only, or within a word's visible pair), and takes the component of
the basepoint.  Fibers never enter the edge rule; the line structure is
recovered, not assumed.
"""

import itertools
import random

import pytest

from alttree.core import Config, ResourceCap
from alttree.corpus import rng_for, sample_points
from alttree.pieces import (
    SEPARATION_RADIUS,
    GrayPiece,
    branch_report,
    descriptor_labels,
    find_n0,
    gray_piece,
    piece_code,
    is_quasi_level,
    level_graph,
    level_to_dot,
    level_to_json,
    marginals,
    piece_over,
    piece_to_dot,
    piece_to_json,
    segment_roots,
)
from alttree.points import (
    OMEGA,
    OMEGA1,
    ZeroPair,
    act,
    first_star,
    gray_projection,
    gray_segment,
    parse_point,
    visible_positions,
    with_letters,
)

CFG = Config.default()


# ---------------------------------------------------------------------------
# level graphs


def test_level_graph_counts_and_connectivity():
    for n in (1, 2, 3):
        lg = level_graph(CFG, n)
        assert lg.size == 5**n
        assert lg.is_connected()


def test_level_graph_edges_match_generators():
    lg = level_graph(CFG, 2)
    rng = random.Random(7)
    for _ in range(50):
        i = rng.randrange(lg.size)
        name, g = CFG.gens[rng.randrange(len(CFG.gens))]
        assert lg.word_of(lg.adj[name][i]) == g.apply(lg.word_of(i))


def test_level_graph_rigidity():
    for n in (1, 2, 3):
        assert level_graph(CFG, n).automorphism_count() == 1


def test_level_graph_cap():
    with pytest.raises(ResourceCap):
        level_graph(CFG, 7)


def test_level_graph_exports():
    lg = level_graph(CFG, 1)
    dot = level_to_dot(lg)
    assert dot.startswith("graph") and dot.count("v0") >= 1
    js = level_to_json(lg)
    assert js["vertices"][0] == "0" and len(js["edges"]) == len(CFG.gens)


# ---------------------------------------------------------------------------
# the enumeration oracle


def _letter_at(p, pos):
    if pos is OMEGA:
        return p.tail.a
    if pos is OMEGA1:
        return p.tail.b
    return p.letter(pos)


def _enumerate_candidates(p, lo, hi):
    """All states over the window: (fiber-offset, letters over slots [+pair]),
    each consistent with its word's bit pattern."""
    d = p.d
    seg = gray_segment(gray_projection(p), lo, hi)
    slots, has_inf = visible_positions(seg)
    states = []
    for idx, w in enumerate(seg):
        per_slot = []
        for pos in slots:
            per_slot.append((0,) if w.bit(pos) == 0 else tuple(range(1, d)))
        if has_inf:
            bs = tuple(range(1, d)) if w.star2 else (0,)
            per_slot.append(tuple(range(1, d)))
            per_slot.append(bs)
        for vals in itertools.product(*per_slot):
            states.append((idx + lo, vals))
    return seg, slots, states


def _oracle_edge_types(seg, slots, lo, sa, sb):
    """Edge types between two enumerated states, from letters alone."""
    ka, la = sa
    kb, lb = sb
    diff = {i for i, (x, y) in enumerate(zip(la, lb)) if x != y}
    if not diff:
        return set()
    nfin = len(slots)
    types = set()
    if diff == {0}:
        types.add("A")
    j = first_star(seg[ka - lo])
    if j is OMEGA:
        pair_idx = {nfin, nfin + 1}
        if diff <= pair_idx:
            types.add("B")
    else:
        iu = slots.index(j)
        iv = slots.index(j + 1)
        if diff <= {iu, iv} and la[iu] != 0 and lb[iu] != 0:
            # the move must keep the star: check the other side agrees on j
            if first_star(seg[kb - lo]) == j:
                types.add("B")
    return types


def _oracle_component(p, lo, hi):
    seg, slots, states = _enumerate_candidates(p, lo, hi)
    has_inf = any(first_star(w) is OMEGA for w in seg)
    base = None
    for k, vals in states:
        if k == 0:
            letters = [_letter_at(p, pos) for pos in slots]
            if has_inf:
                letters += [p.tail.a, p.tail.b]
            if tuple(letters) == vals:
                base = (k, vals)
    assert base is not None
    adj = {s: [] for s in states}
    edge_types = {}
    for sa, sb in itertools.combinations(states, 2):
        if abs(sa[0] - sb[0]) > 1:
            continue
        types = _oracle_edge_types(seg, slots, lo, sa, sb)
        if types:
            adj[sa].append(sb)
            adj[sb].append(sa)
            edge_types[frozenset((sa, sb))] = types
    comp = {base}
    stack = [base]
    while stack:
        s = stack.pop()
        for t in adj[s]:
            if t not in comp:
                comp.add(t)
                stack.append(t)
    return seg, slots, comp, edge_types, base


def _piece_state(piece, i):
    k, letters = piece.verts[i]
    return (k, letters)


def _piece_edge_types(piece):
    out = {}
    for i, row in enumerate(piece.adj):
        for lab, t in zip(descriptor_labels(piece.d), row):
            if t < 0:
                continue
            key = frozenset((_piece_state(piece, i), _piece_state(piece, t)))
            out.setdefault(key, set()).add(lab[0])
    return out


def _compare_with_oracle(p, lo, hi):
    piece = piece_over(p, lo, hi)
    seg, slots, comp, oracle_types, base = _oracle_component(p, lo, hi)
    assert set(piece.segment) == set(seg)
    piece_states = {_piece_state(piece, i) for i in range(piece.size)}
    assert piece_states == comp
    ptypes = _piece_edge_types(piece)
    otypes = {
        key: types
        for key, types in oracle_types.items()
        if all(s in comp for s in key)
    }
    assert ptypes == otypes
    assert _piece_state(piece, piece.basepoint) == base
    return piece, comp


def test_piece_matches_enumeration_oracle_periodic():
    p = parse_point("1(3)", 5)
    piece, comp = _compare_with_oracle(p, -2, 2)
    # for this window every consistent assignment is reachable
    _, _, states = _enumerate_candidates(p, -2, 2)
    assert len(comp) == len(states)
    assert piece.size == len(states)


def test_piece_matches_enumeration_oracle_samples():
    pts = sample_points(CFG, 40, salt="piece-oracle", max_prefix=4, max_period=2)
    periodic = [p for p in pts if not isinstance(p.tail, ZeroPair)]
    doubled = [p for p in pts if isinstance(p.tail, ZeroPair)]
    for p in periodic[:3]:
        _compare_with_oracle(p, -1, 1)
    _compare_with_oracle(periodic[3], -1, 2)
    for p in doubled[:2]:
        _compare_with_oracle(p, -1, 1)


def test_piece_matches_enumeration_oracle_near_formal_root():
    # exercise windows whose segment contains the all-zero word
    p = parse_point("[23]", 5)
    _compare_with_oracle(p, -1, 1)
    q = parse_point("[40]", 5)
    _compare_with_oracle(q, -2, 1)


# ---------------------------------------------------------------------------
# pieces against the actual group action


def test_piece_edges_match_group_action():
    pts = sample_points(CFG, 8, salt="piece-action", max_prefix=4, max_period=2)
    names = dict(CFG.symmetric_gens())
    for p in pts:
        piece = gray_piece(p, 2)
        words = set(piece.segment)
        for i, name, j in piece.s0_edges(CFG):
            img = act(names[name], piece.point_of(i))
            if j >= 0:
                assert img == piece.point_of(j)
            else:
                assert gray_projection(img) not in words


def test_piece_edge_projection_types():
    from alttree.core import AGen

    pts = sample_points(CFG, 8, salt="piece-types", max_prefix=4, max_period=2)
    for p in pts:
        piece = gray_piece(p, 2)
        for i, name, j in piece.s0_edges(CFG):
            if j < 0 or j == i:
                continue
            ka, kb = piece.fiber(i), piece.fiber(j)
            assert abs(ka - kb) <= 1
            if ka == kb:
                continue
            g = CFG.gen(name.rstrip("-"))
            if isinstance(g, AGen):
                assert min(ka, kb) % 2 == 1
            else:
                assert min(ka, kb) % 2 == 0


def test_s0_reaches_every_piece_vertex():
    """The named generators alone connect each piece: the finite generating
    set is a faithful proxy for the full move family."""
    pts = sample_points(CFG, 10, salt="piece-audit", max_prefix=4, max_period=2)
    for p in pts:
        piece = gray_piece(p, 2)
        nbrs = {i: set() for i in range(piece.size)}
        for i, _, j in piece.s0_edges(CFG):
            if j >= 0:
                nbrs[i].add(j)
                nbrs[j].add(i)
        seen = {piece.basepoint}
        stack = [piece.basepoint]
        while stack:
            v = stack.pop()
            for w in nbrs[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        assert len(seen) == piece.size


def test_projection_interval_and_basepoint():
    pts = sample_points(CFG, 12, salt="piece-shape", max_prefix=4, max_period=2)
    for p in pts:
        piece = gray_piece(p, 2)
        assert piece.point_of(piece.basepoint) == p
        fibers = {piece.fiber(i) for i in range(piece.size)}
        assert 0 in fibers
        assert fibers == set(range(min(fibers), max(fibers) + 1))


def test_single_word_window():
    p = parse_point("2(13)", 5)
    piece = gray_piece(p, 0)
    assert piece.length == 1
    assert all(piece.fiber(i) == 0 for i in range(piece.size))


# ---------------------------------------------------------------------------
# codes


def test_code_translate_invariance():
    """Bits beyond the visible window can change freely for periodic-tail
    points without moving the piece's isomorphism class; for doubled points
    the star structure is global, so only value changes on already-nonzero
    deep letters are safe."""
    rng = rng_for(CFG, "translate")
    pts = sample_points(CFG, 14, salt="translate", max_prefix=3, max_period=2)
    for p in pts:
        piece = gray_piece(p, 2)
        deep = max(piece.slots) + 2
        if isinstance(p.tail, ZeroPair):
            nz = [pos for pos in range(deep, deep + 6) if p.letter(pos) != 0]
            if not nz:
                continue
            pos = nz[0]
            val = p.letter(pos) % 4 + 1
            q = with_letters(p, {pos: val})
        else:
            q = with_letters(p, {deep: rng.randrange(1, 5), deep + 3: rng.randrange(0, 5)})
        other = gray_piece(q, 2)
        assert other.code() == piece.code()
        assert other.size == piece.size


def test_codes_separate_basepoint_classes():
    """Points whose basepoint shows a different first-letter zeroness or a
    different visible pair get different codes."""
    pts = sample_points(CFG, 30, salt="classes", max_prefix=4, max_period=2)

    def klass(p):
        gw = gray_projection(p)
        j = first_star(gw)
        if j is OMEGA:
            u, v = p.tail.a, p.tail.b
        else:
            u, v = p.letter(j), _letter_at(p, j + 1)
        return (p.letter(1) != 0, u, v)

    seen = {}
    for p in pts:
        piece = gray_piece(p, 1)
        seen.setdefault(klass(p), []).append(piece.code())
    classes = list(seen)
    for i in range(len(classes)):
        for k in range(i + 1, len(classes)):
            for ca in seen[classes[i]]:
                for cb in seen[classes[k]]:
                    assert ca != cb


def test_code_equality_is_pointed_iso():
    """Equal codes must come with identical local data along the BFS; spot
    check that rebuilding a piece around any of its own vertices, over the
    recentered window, reproduces the code from that vertex."""
    pts = sample_points(CFG, 5, salt="recenter", max_prefix=3, max_period=2)
    rng = rng_for(CFG, "recenter")
    for p in pts:
        piece = gray_piece(p, 2)
        v = rng.randrange(piece.size)
        k = piece.fiber(v)
        q = piece.point_of(v)
        other = piece_over(q, piece.lo - k, piece.hi - k)
        assert other.code() == piece.code(base=v)


def test_no_nontrivial_automorphisms_sampled():
    pts = sample_points(CFG, 12, salt="rigidity", max_prefix=3, max_period=2)
    for p in pts[:6]:
        piece = gray_piece(p, 1)
        codes = {piece.code(base=v, with_fibers=False) for v in range(piece.size)}
        assert len(codes) == piece.size


# ---------------------------------------------------------------------------
# marginals, branches, quasi-levels


def test_marginal_shapes_and_containment():
    p = parse_point("14(2)", 5)
    piece = gray_piece(p, 2)
    left, right, core = marginals(piece)
    assert left.length == 3 and right.length == 3 and core.length == 1
    pts_l = set(map(repr, left.points()))
    pts_r = set(map(repr, right.points()))
    pts_c = set(map(repr, core.points()))
    assert pts_c <= pts_l and pts_c <= pts_r
    with pytest.raises(ValueError):
        marginals(piece_over(p, -1, 2))
    with pytest.raises(ValueError):
        marginals(gray_piece(p, 1))


def test_marginal_determinism_sampled():
    """The central code is a function of the two marginal codes."""
    pts = sample_points(CFG, 150, salt="marginals", max_prefix=4, max_period=2)
    rng = rng_for(CFG, "marginals-extra")
    groups = {}
    for p in pts:
        piece = gray_piece(p, 3)
        # engineered collisions: a deep translate lands in the same class
        deep = max(piece.slots) + 2
        q = with_letters(p, {deep: rng.randrange(1, 5)})
        for point in (p, q):
            c = gray_piece(point, 3)
            left, right, _ = marginals(c)
            groups.setdefault((left.code(), right.code()), set()).add(c.code())
    assert groups
    collisions = sum(1 for members in groups.values() if len(members) > 1)
    assert collisions == 0
    assert any(True for _ in groups)


def test_root_preimage_connected():
    pts = sample_points(CFG, 25, salt="roots", max_prefix=4, max_period=2)
    for p in pts:
        piece = gray_piece(p, 2)
        roots, _, _ = segment_roots(piece.segment)
        for ridx in roots:
            fiber = piece.lo + ridx
            over = [i for i in range(piece.size) if piece.fiber(i) == fiber]
            if not over:
                continue
            seen = {over[0]}
            stack = [over[0]]
            while stack:
                v = stack.pop()
                for t in piece.adj[v]:
                    if t >= 0 and piece.fiber(t) == fiber and t not in seen:
                        seen.add(t)
                        stack.append(t)
            assert len(seen) == len(over)


def _b_visible(word):
    j = first_star(word)
    if j is OMEGA:
        return {OMEGA, OMEGA1}
    return {j, j + 1}


def _visible(word):
    return {1} | _b_visible(word)


def test_branching_visibility_criterion():
    """Branching on a side is equivalent to: some position is pair-visible
    among the words the side loses, invisible over the core words, and
    carries a nonzero letter at the basepoint."""
    pts = sample_points(CFG, 60, salt="branches", max_prefix=5, max_period=2)
    bi_seen = 0
    for p in pts:
        piece = gray_piece(p, 2)
        rep = branch_report(piece)
        seg = piece.segment
        core_vis = set()
        for w in seg[2:-2]:
            core_vis |= _visible(w)
        for side, outer in (("left", seg[:2]), ("right", seg[-2:])):
            outer_vis = set()
            for w in outer:
                outer_vis |= _b_visible(w)
            qs = outer_vis - core_vis
            predicted = any(_letter_at(p, q) != 0 for q in qs)
            assert predicted == rep[side]["branches"], (repr(p), side, sorted(qs, key=str))
        if rep["bi_branching"]:
            bi_seen += 1
            assert is_quasi_level(piece) is not None
    assert bi_seen >= 1


def test_quasi_level_examples():
    # roots deep on the left, anti-roots shallow on the right
    p = parse_point("00041(2)", 5)
    piece = gray_piece(p, 2)
    roots, anti, j = segment_roots(piece.segment)
    if is_quasi_level(piece) is not None:
        assert anti
    # a window rooted at the formal position is never a quasi-level
    q = parse_point("[12]", 5)
    deep = gray_piece(q, 1)
    assert is_quasi_level(deep) is None or first_star(deep.segment[0]) is not OMEGA


# ---------------------------------------------------------------------------
# exports and the separation constant


def test_piece_exports():
    p = parse_point("1(3)", 5)
    piece = gray_piece(p, 1)
    js = piece_to_json(piece, CFG)
    assert js["window"] == [-1, 1]
    assert len(js["vertices"]) == piece.size
    dot = piece_to_dot(piece, CFG)
    assert "doublecircle" in dot


def test_find_n0_small():
    pts = sample_points(CFG, 15, salt="n0-small", max_prefix=3, max_period=2)
    rep2 = find_n0(CFG, pts, radius=2, search_bound=12)
    assert rep2["ok"], rep2
    rep1 = find_n0(CFG, pts, radius=1, search_bound=12)
    assert rep1["ok"] and rep1["n0"] <= rep2["n0"]
    assert rep2["replay_collisions"] == 0


def test_separation_radius_constant():
    # The frozen constant comes from the radius-8 audit over the full default
    # corpus (too slow for this suite; the acceptance run repeats it).  Here:
    # the value is pinned, and a cheaper radius-4 search over a sub-corpus
    # must not need more than the frozen radius.
    assert SEPARATION_RADIUS == 6
    pts = sample_points(CFG, 6, salt="n0", max_prefix=4, max_period=2)
    rep = find_n0(CFG, pts, radius=4, search_bound=SEPARATION_RADIUS)
    assert rep["ok"], rep
    assert rep["n0"] <= SEPARATION_RADIUS


def test_piece_code_matches_two_pass_build():
    # piece_code streams the BFS straight into the hash; the two-pass route
    # materialises the graph and canonicalises it afterwards.  They must agree
    # byte for byte on every window shape, including ones wide enough to take
    # the vectorised branch and ones with only a virtual pair in view.
    rng = random.Random(0xF15E)
    pts = sample_points(CFG, 12, salt="fused", max_prefix=4, max_period=3)
    pts.append(parse_point("000[34]", 5))
    for p in pts:
        for _ in range(3):
            n = rng.randint(1, 5)
            lo, hi = -rng.randint(0, n), rng.randint(0, n)
            assert piece_code(p, lo, hi) == GrayPiece.build(p, lo, hi).code()
