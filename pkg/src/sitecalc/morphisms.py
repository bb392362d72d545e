"""Functor-level decision procedures: morphisms and comorphisms of sites,
continuity, cofinality, the denseness ladder, property classifiers for the
induced geometric morphisms, and the three factorizations.

Every verdict carries a replayable witness: counterexamples name the
quantifier instance that fails, positive answers record what was checked.
All "there exists a covering family such that" searches iterate over stored
sieves; where a clause quantifies over arbitrary families of sieves, a
restriction argument (see the decisions ledger) collapses the search to
least-covering or principal sieves without losing completeness.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

from .fincat import (
    FinCategory,
    FinFunctor,
    SizeGuardError,
    _UnionFind,
    full_subcategory,
    identity_functor,
    quotient_by_functor_congruence,
)
from .sieves import (
    all_sieve_masks,
    bits,
    generate_mask,
    mask_of,
    maximal_sieve_mask,
    preimage_mask,
)
from .topology import (
    GrothendieckTopology,
    closure_mask,
    coinduced_topology,
    induced_topology,
    smallest_comorphism_topology,
    validate_topology,
)
from . import presheaf as ps


@dataclass(frozen=True)
class SiteFunctor:
    functor: FinFunctor
    source_topology: GrothendieckTopology
    target_topology: GrothendieckTopology

    def __post_init__(self):
        if self.source_topology.cat != self.functor.source:
            raise ValueError("source topology lives on the wrong category")
        if self.target_topology.cat != self.functor.target:
            raise ValueError("target topology lives on the wrong category")

    @property
    def F(self) -> FinFunctor:
        return self.functor

    @property
    def J(self) -> GrothendieckTopology:
        return self.source_topology

    @property
    def K(self) -> GrothendieckTopology:
        return self.target_topology


@dataclass(frozen=True)
class Verdict:
    holds: bool
    witness: dict

    def __bool__(self) -> bool:
        return self.holds


def _yes(kind: str, **data) -> Verdict:
    return Verdict(True, {"kind": kind, "holds": True, **data})


def _no(kind: str, **data) -> Verdict:
    return Verdict(False, {"kind": kind, "holds": False, **data})


# ---------------------------------------------------------------------------
# cover preservation / reflection / lifting

def is_cover_preserving(sf: SiteFunctor) -> Verdict:
    F, J, K = sf.F, sf.J, sf.K
    for c in F.source.objects:
        for s in J.covers[c]:
            image = mask_of(F.on_arr(f) for f in bits(s))
            if not K.covers_family(F.on_obj(c), image):
                return _no("cover-preserving", object=c, sieve=s)
    return _yes("cover-preserving")


def is_cover_reflecting(sf: SiteFunctor) -> Verdict:
    F, J, K = sf.F, sf.J, sf.K
    for c in F.source.objects:
        for s in all_sieve_masks(F.source, c):
            if s in J.covers[c]:
                continue
            image = mask_of(F.on_arr(f) for f in bits(s))
            if K.covers_family(F.on_obj(c), image):
                return _no("cover-reflecting", object=c, sieve=s)
    return _yes("cover-reflecting")


def is_comorphism_of_sites(sf: SiteFunctor) -> Verdict:
    """Covering-lifting property: the full preimage of every covering sieve
    on an image object must cover (any lift R sits inside the preimage)."""
    F, J, K = sf.F, sf.J, sf.K
    for d in F.source.objects:
        for s in K.covers[F.on_obj(d)]:
            lifted = preimage_mask(F, s, d)
            if not J.is_covering(d, lifted):
                return _no("covering-lifting", object=d, sieve=s, preimage=lifted)
    return _yes("covering-lifting")


# ---------------------------------------------------------------------------
# morphisms of sites: the four clauses, each reduced to "this sieve covers"

def is_morphism_of_sites(sf: SiteFunctor) -> Verdict:
    F, J, K = sf.F, sf.J, sf.K
    C, D = F.source, F.target

    cp = is_cover_preserving(sf)
    if not cp:
        return _no("morphism-of-sites", clause="i",
                   object=cp.witness["object"], sieve=cp.witness["sieve"])

    for d in D.objects:
        good = mask_of(
            g for g in D.arrows_into(d)
            if any(D.hom(D.dom[g], F.on_obj(c1)) for c1 in C.objects))
        if not K.is_covering(d, good):
            return _no("morphism-of-sites", clause="ii", object=d, sieve=good)

    for c1, c2 in itertools.product(C.objects, repeat=2):
        for d in D.objects:
            for g1 in D.hom(d, F.on_obj(c1)):
                for g2 in D.hom(d, F.on_obj(c2)):
                    good = 0
                    for gp in D.arrows_into(d):
                        e = D.dom[gp]
                        if any(
                            D.compose(F.on_arr(f1), h) == D.compose(g1, gp)
                            and D.compose(F.on_arr(f2), h) == D.compose(g2, gp)
                            for cc in C.objects
                            for h in D.hom(e, F.on_obj(cc))
                            for f1 in C.hom(cc, c1)
                            for f2 in C.hom(cc, c2)
                        ):
                            good |= 1 << gp
                    if not K.is_covering(d, good):
                        return _no("morphism-of-sites", clause="iii",
                                   instance={"d": d, "g1": g1, "g2": g2}, sieve=good)

    for c1, c2 in itertools.product(C.objects, repeat=2):
        for f1 in C.hom(c1, c2):
            for f2 in C.hom(c1, c2):
                if f1 == f2:
                    continue
                for d in D.objects:
                    for g in D.hom(d, F.on_obj(c1)):
                        if D.compose(F.on_arr(f1), g) != D.compose(F.on_arr(f2), g):
                            continue
                        good = 0
                        for gp in D.arrows_into(d):
                            e = D.dom[gp]
                            if any(
                                D.compose(F.on_arr(k), h) == D.compose(g, gp)
                                for cc in C.objects
                                for k in C.hom(cc, c1)
                                if C.compose(f1, k) == C.compose(f2, k)
                                for h in D.hom(e, F.on_obj(cc))
                            ):
                                good |= 1 << gp
                        if not K.is_covering(d, good):
                            return _no("morphism-of-sites", clause="iv",
                                       instance={"f1": f1, "f2": f2, "g": g, "d": d},
                                       sieve=good)
    return _yes("morphism-of-sites")


# ---------------------------------------------------------------------------
# connected-component machinery shared by continuity / cofinality / locally
# connected checks

def sieve_diagram(cat: FinCategory, mask: int) -> tuple[list[int], list[tuple[int, int, int]]]:
    """The diagram of a sieve: vertices are its member arrows (by their
    domains), edges (i, j, t) are the factorizations members[j]∘t = members[i]."""
    members = sorted(bits(mask))
    pos = {f: i for i, f in enumerate(members)}
    edges = [(pos[f], pos[g], t)
             for f in members for g in members
             for t in cat.hom(cat.dom[f], cat.dom[g])
             if cat.comp[(g, t)] == f]
    return members, edges


def comma_components(cat: FinCategory, e: int,
                     vertices: Sequence[int],
                     edges: Sequence[tuple[int, int, int]]) -> dict[tuple[int, int], int]:
    """Connected components of (e ↓ D), for a diagram D in cat presented by
    vertex objects and edges (i, j, arrow D(i) -> D(j)).  Keys are pairs
    (vertex index, arrow e -> D(i))."""
    nodes = [(i, u) for i, v in enumerate(vertices) for u in cat.hom(e, v)]
    idx = {n: k for k, n in enumerate(nodes)}
    uf = _UnionFind(len(nodes))
    for (i, j, t) in edges:
        for u in cat.hom(e, vertices[i]):
            uf.union(idx[(i, u)], idx[(j, cat.compose(t, u))])
    return {n: uf.find(idx[n]) for n in nodes}


def is_continuous(sf: SiteFunctor) -> Verdict:
    """Finitary continuity criterion: cover-preserving, plus local connection
    of every commuting square over the image diagram of a covering sieve."""
    F, J, K = sf.F, sf.J, sf.K
    C, D = F.source, F.target
    cp = is_cover_preserving(sf)
    if not cp:
        return _no("continuous", clause="cover-preserving",
                   object=cp.witness["object"], sieve=cp.witness["sieve"])
    for c in C.objects:
        for s in J.covers[c]:
            members, raw_edges = sieve_diagram(C, s)
            vertices = [F.on_obj(C.dom[f]) for f in members]
            edges = [(i, j, F.on_arr(t)) for (i, j, t) in raw_edges]
            cache: dict[int, dict] = {}
            for i1, f in enumerate(members):
                for i2, g in enumerate(members):
                    for d in D.objects:
                        for w in D.hom(d, vertices[i1]):
                            for z in D.hom(d, vertices[i2]):
                                if D.compose(F.on_arr(f), w) != D.compose(F.on_arr(g), z):
                                    continue
                                good = 0
                                for alpha in D.arrows_into(d):
                                    e = D.dom[alpha]
                                    if e not in cache:
                                        cache[e] = comma_components(D, e, vertices, edges)
                                    labels = cache[e]
                                    if labels[(i1, D.compose(w, alpha))] == \
                                            labels[(i2, D.compose(z, alpha))]:
                                        good |= 1 << alpha
                                if not K.is_covering(d, good):
                                    return _no("continuous", clause="connection",
                                               object=c, sieve=s,
                                               instance={"f": f, "g": g, "d": d,
                                                         "w": w, "z": z},
                                               found=good)
    return _yes("continuous")


def continuity_oracle(sf: SiteFunctor) -> bool:
    """Independent route: for each covering sieve S on c the comparison
    colim(y∘D^F_S) -> y(F(c)) must be K-bicovering."""
    F, J, K = sf.F, sf.J, sf.K
    C, D = F.source, F.target
    for c in C.objects:
        for s in J.covers[c]:
            members, raw_edges = sieve_diagram(C, s)
            if not members:
                # empty diagram: comparison is 0 -> y(F(c))
                empty = ps.FinPresheaf(D, (0,) * D.n_objects,
                                       tuple(() for _ in D.arrows))
                comparison = ps.PresheafMorphism(
                    empty, ps.yoneda(D, F.on_obj(c)), tuple(() for _ in D.objects))
                if not ps.is_bicovering(comparison, K):
                    return False
                continue
            shape = _diagram_shape(len(members), raw_edges, C, members)
            diagram = [ps.yoneda(D, F.on_obj(C.dom[f])) for f in members]
            arrows = []
            for (i, j, t) in raw_edges:
                comps = []
                for e in D.objects:
                    comps.append(tuple(
                        ps.yoneda_element(D, F.on_obj(C.dom[members[j]]),
                                          D.compose(F.on_arr(t), u))
                        for u in D.hom(e, F.on_obj(C.dom[members[i]]))))
                arrows.append(ps.PresheafMorphism(diagram[i], diagram[j], tuple(comps)))
            colim, legs = ps.colimit_presheaf(shape, diagram, arrows)
            target = ps.yoneda(D, F.on_obj(c))
            comps = [[0] * colim.sizes[e] for e in D.objects]
            for i, f in enumerate(members):
                for e in D.objects:
                    for u_idx, u in enumerate(D.hom(e, F.on_obj(C.dom[f]))):
                        comps[e][legs[i][e][u_idx]] = ps.yoneda_element(
                            D, F.on_obj(c), D.compose(F.on_arr(f), u))
            comparison = ps.PresheafMorphism(
                colim, target, tuple(tuple(row) for row in comps))
            if not ps.is_bicovering(comparison, K):
                return False
    return True


def _diagram_shape(n: int, edges: Sequence[tuple[int, int, int]],
                   cat: FinCategory, members: Sequence[int]) -> FinCategory:
    """Shape category of a sieve diagram (used only to drive colimits, where
    just the underlying graph with identities matters)."""
    arrow_data = list(edges)
    arr_index = {a: i for i, a in enumerate(arrow_data)}
    dom = tuple(a[0] for a in arrow_data)
    cod = tuple(a[1] for a in arrow_data)
    identities = tuple(arr_index[(i, i, cat.identity[cat.dom[members[i]]])]
                       for i in range(n))
    comp = {}
    for j, (s2, t2, u2) in enumerate(arrow_data):
        for i, (s1, t1, u1) in enumerate(arrow_data):
            if t1 == s2:
                comp[(j, i)] = arr_index[(s1, t2, cat.comp[(u2, u1)])]
    return FinCategory(n, dom, cod, identities, comp)


# ---------------------------------------------------------------------------
# relative cofinality

def is_J_cofinal(F: FinFunctor, J: GrothendieckTopology) -> Verdict:
    """The two clauses of J-cofinality: local existence of factorizations and
    local connection of pairs, via components of (c ↓ F)."""
    A, C = F.source, F.target
    vertices = [F.on_obj(a) for a in A.objects]
    edges = [(A.dom[u], A.cod[u], F.on_arr(u)) for u in A.arrows]
    for c in C.objects:
        good = mask_of(f for f in C.arrows_into(c)
                       if any(C.hom(C.dom[f], v) for v in vertices))
        if not J.is_covering(c, good):
            return _no("cofinal", clause="i", object=c, sieve=good)
    cache: dict[int, dict] = {}
    for c in C.objects:
        for a in A.objects:
            for x in C.hom(c, F.on_obj(a)):
                for b in A.objects:
                    for x2 in C.hom(c, F.on_obj(b)):
                        good = 0
                        for f in C.arrows_into(c):
                            e = C.dom[f]
                            if e not in cache:
                                cache[e] = comma_components(C, e, vertices, edges)
                            labels = cache[e]
                            if labels[(a, C.compose(x, f))] == labels[(b, C.compose(x2, f))]:
                                good |= 1 << f
                        if not J.is_covering(c, good):
                            return _no("cofinal", clause="ii",
                                       instance={"c": c, "a": a, "x": x,
                                                 "b": b, "x2": x2},
                                       sieve=good)
    return _yes("cofinal")


def cocone_is_sheaf_colimit(D: FinFunctor, vertex: int, legs,
                            J: GrothendieckTopology) -> Verdict:
    """Is the cocone sent by l to a colimit cocone in the sheaf topos."""
    A, C = D.source, D.target
    for i in A.objects:
        f = legs[i]
        if C.dom[f] != D.on_obj(i) or C.cod[f] != vertex:
            raise ValueError(f"leg at {i} is not an arrow D({i}) -> vertex")
    for u in A.arrows:
        if C.compose(legs[A.cod[u]], D.on_arr(u)) != legs[A.dom[u]]:
            raise ValueError("legs do not form a cocone")

    for c in C.objects:
        for y in C.hom(c, vertex):
            good = mask_of(
                f for f in C.arrows_into(c)
                if any(C.compose(y, f) == C.compose(legs[a], yi)
                       for a in A.objects
                       for yi in C.hom(C.dom[f], D.on_obj(a))))
            if not J.is_covering(c, good):
                return _no("sheaf-colimit", clause="i",
                           instance={"c": c, "y": y}, sieve=good)

    vertices = [D.on_obj(a) for a in A.objects]
    edges = [(A.dom[u], A.cod[u], D.on_arr(u)) for u in A.arrows]
    cache: dict[int, dict] = {}
    for c in C.objects:
        for a in A.objects:
            for x in C.hom(c, D.on_obj(a)):
                for b in A.objects:
                    for x2 in C.hom(c, D.on_obj(b)):
                        if C.compose(legs[a], x) != C.compose(legs[b], x2):
                            continue
                        good = 0
                        for f in C.arrows_into(c):
                            e = C.dom[f]
                            if e not in cache:
                                cache[e] = comma_components(C, e, vertices, edges)
                            labels = cache[e]
                            if labels[(a, C.compose(x, f))] == labels[(b, C.compose(x2, f))]:
                                good |= 1 << f
                        if not J.is_covering(c, good):
                            return _no("sheaf-colimit", clause="ii",
                                       instance={"c": c, "a": a, "x": x,
                                                 "b": b, "x2": x2},
                                       sieve=good)
    return _yes("sheaf-colimit")


def cocone_sheaf_colimit_oracle(D: FinFunctor, vertex: int, legs,
                                J: GrothendieckTopology) -> bool:
    """Oracle: compare colim(y∘D) -> y(vertex) with the bicovering test."""
    A, C = D.source, D.target
    colim, colim_legs = ps.colimit_of_representables(D)
    target = ps.yoneda(C, vertex)
    comps = [[0] * colim.sizes[e] for e in C.objects]
    for a in A.objects:
        for e in C.objects:
            for u_idx, u in enumerate(C.hom(e, D.on_obj(a))):
                comps[e][colim_legs[a][e][u_idx]] = ps.yoneda_element(
                    C, vertex, C.compose(legs[a], u))
    comparison = ps.PresheafMorphism(colim, target,
                                     tuple(tuple(row) for row in comps))
    return ps.is_bicovering(comparison, J)


# ---------------------------------------------------------------------------
# local faithfulness / fullness / denseness

def local_property_tests(sf: SiteFunctor) -> dict[str, Verdict]:
    F, J, K = sf.F, sf.J, sf.K
    C, D = F.source, F.target
    out: dict[str, Verdict] = {}

    def faithful(local_target: bool) -> Verdict:
        kind = "JK-faithful" if local_target else "J-faithful"
        for a in C.objects:
            for b in C.objects:
                for h in C.hom(a, b):
                    for k in C.hom(a, b):
                        if h == k:
                            continue
                        if local_target:
                            eq = _target_locally_equal(sf, F.on_arr(h), F.on_arr(k))
                        else:
                            eq = F.on_arr(h) == F.on_arr(k)
                        if eq and not _source_locally_equal(sf, h, k):
                            return _no(kind, instance={"h": h, "k": k})
        return _yes(kind)

    def full(local_target: bool) -> Verdict:
        kind = "JK-full" if local_target else "J-full"
        for x in C.objects:
            for y in C.objects:
                for g in D.hom(F.on_obj(x), F.on_obj(y)):
                    good = 0
                    for f in C.arrows_into(x):
                        gf = D.compose(g, F.on_arr(f))
                        hit = any(
                            (_target_locally_equal(sf, gf, F.on_arr(k))
                             if local_target else gf == F.on_arr(k))
                            for k in C.hom(C.dom[f], y))
                        if hit:
                            good |= 1 << f
                    if not J.is_covering(x, good):
                        return _no(kind, instance={"x": x, "y": y, "g": g}, sieve=good)
        return _yes(kind)

    out["J_faithful"] = faithful(False)
    out["JK_faithful"] = faithful(True)
    out["J_full"] = full(False)
    out["JK_full"] = full(True)

    image = F.image_objects
    k_dense = _yes("K-dense")
    for d in D.objects:
        base = mask_of(u for u in D.arrows_into(d) if D.dom[u] in image)
        if not K.is_covering(d, generate_mask(D, base)):
            k_dense = _no("K-dense", object=d, sieve=generate_mask(D, base))
            break
    out["K_dense"] = k_dense
    return out


def _source_locally_equal(sf: SiteFunctor, h: int, k: int) -> bool:
    C = sf.F.source
    agree = mask_of(f for f in C.arrows_into(C.dom[h])
                    if C.compose(h, f) == C.compose(k, f))
    return sf.J.is_covering(C.dom[h], agree)


def _target_locally_equal(sf: SiteFunctor, h: int, k: int) -> bool:
    D = sf.F.target
    agree = mask_of(f for f in D.arrows_into(D.dom[h])
                    if D.compose(h, f) == D.compose(k, f))
    return sf.K.is_covering(D.dom[h], agree)


# ---------------------------------------------------------------------------
# denseness ladder

def is_dense_morphism(sf: SiteFunctor) -> Verdict:
    """Dense morphism of sites: cover-reflecting both ways, K-dense, and
    strictly J-full."""
    mos = is_morphism_of_sites(sf)
    if not mos:
        raise ValueError(f"not a morphism of sites: {mos.witness}")
    cp = is_cover_preserving(sf)
    cr = is_cover_reflecting(sf)
    if not cp:
        return _no("dense", clause="i", witness=cp.witness)
    if not cr:
        return _no("dense", clause="i", witness=cr.witness)
    props = local_property_tests(sf)
    if not props["K_dense"]:
        return _no("dense", clause="ii", witness=props["K_dense"].witness)
    if not props["J_full"]:
        return _no("dense", clause="iii", witness=props["J_full"].witness)
    return _yes("dense")


def _coherent_families(D: FinCategory, K: GrothendieckTopology,
                       carrier_obj: int, members: Sequence[int], d: int):
    """Families (g_h: dom h -> d)_{h in members} with g_{h∘z} ≡_K g_h∘z,
    i.e. locally matching families of y(d) over the given sieve members."""
    yd = ps.yoneda(D, d)
    fams = ps._locally_matching_families(yd, K, carrier_obj, list(members))
    hom_lists = {h: D.hom(D.dom[h], d) for h in members}
    return [{h: hom_lists[h][fam[i]] for i, h in enumerate(members)} for fam in fams]


def _weakly_dense_clause_ii(sf: SiteFunctor) -> Verdict:
    """Every d is covered by arrows presenting maps from sheafified images:
    the realizable g_f arrows, collected over S_min ∪ ⟨f⟩ carriers (complete
    by the restriction argument), must generate a covering sieve."""
    F, J, K = sf.F, sf.J, sf.K
    C, D = F.source, F.target
    for d in D.objects:
        realized = 0
        for c in C.objects:
            e0 = F.on_obj(c)
            for f0 in D.arrows_into(e0):
                carrier = K.min_cover[e0] | D.principal_sieves[f0]
                members = sorted(bits(carrier))
                slot = members.index(f0)
                yd = ps.yoneda(D, d)
                for fam in ps._locally_matching_families(yd, K, e0, members):
                    realized |= 1 << D.hom(D.dom[f0], d)[fam[slot]]
        if not K.is_covering(d, generate_mask(D, realized)):
            return _no("weakly-dense", clause="ii", object=d,
                       sieve=generate_mask(D, realized))
    return _yes("weakly-dense-ii")


def is_weakly_dense(sf: SiteFunctor) -> Verdict:
    """Weakly dense morphism of sites; equivalent to the induced geometric
    morphism being an equivalence."""
    mos = is_morphism_of_sites(sf)
    if not mos:
        raise ValueError(f"not a morphism of sites: {mos.witness}")
    F, J, K = sf.F, sf.J, sf.K
    C, D = F.source, F.target

    cr = is_cover_reflecting(sf)
    if not cr:
        return _no("weakly-dense", clause="i", witness=cr.witness)

    ii = _weakly_dense_clause_ii(sf)
    if not ii:
        return ii

    # clause (iii): exhaustive over covering sieves U and coherent families
    for x in C.objects:
        for y in C.objects:
            fx, fy = F.on_obj(x), F.on_obj(y)
            for u_mask in K.covers[fx]:
                members = sorted(bits(u_mask))
                for g in _coherent_families(D, K, fx, members, fy):
                    ok = 0
                    for f in C.arrows_into(x):
                        dom_f = C.dom[f]
                        found = False
                        for k in C.hom(dom_f, y):
                            valid = True
                            for h in members:
                                for e in D.objects:
                                    for w in D.hom(e, F.on_obj(dom_f)):
                                        fw = D.compose(F.on_arr(f), w)
                                        for z in D.hom(e, D.dom[h]):
                                            if fw != D.compose(h, z):
                                                continue
                                            if not _target_locally_equal(
                                                    sf, D.compose(g[h], z),
                                                    D.compose(F.on_arr(k), w)):
                                                valid = False
                                                break
                                        if not valid:
                                            break
                                    if not valid:
                                        break
                                if not valid:
                                    break
                            if valid:
                                found = True
                                break
                        if found:
                            ok |= 1 << f
                    if not J.is_covering(x, ok):
                        return _no("weakly-dense", clause="iii",
                                   instance={"x": x, "y": y, "sieve": u_mask,
                                             "family": {h: g[h] for h in members}},
                                   found=ok)
    return _yes("weakly-dense")


# ---------------------------------------------------------------------------
# classification of the geometric morphism induced by a morphism of sites

def closed_sieve_lifting(sf: SiteFunctor) -> Verdict:
    """Every K-closed sieve on an image object is the closure of the image
    of some sieve upstairs."""
    F, J, K = sf.F, sf.J, sf.K
    C, D = F.source, F.target
    for c in C.objects:
        fc = F.on_obj(c)
        liftable = {
            closure_mask(K, fc, generate_mask(D, mask_of(F.on_arr(f) for f in bits(r))))
            for r in all_sieve_masks(C, c)}
        for s in all_sieve_masks(D, fc):
            if closure_mask(K, fc, s) == s and s not in liftable:
                return _no("closed-sieve-lifting", object=c, sieve=s)
    return _yes("closed-sieve-lifting")


def _localic_condition(sf: SiteFunctor) -> Verdict:
    """Localic criterion: arrows presented by families over arbitrary sieves
    on image objects must cover every d; complete over principal sieves."""
    F, J, K = sf.F, sf.J, sf.K
    C, D = F.source, F.target
    for d in D.objects:
        realized = 0
        for c in C.objects:
            e0 = F.on_obj(c)
            for f0 in D.arrows_into(e0):
                members = sorted(bits(D.principal_sieves[f0]))
                slot = members.index(f0)
                yd = ps.yoneda(D, d)
                for fam in ps._locally_matching_families(yd, K, e0, members):
                    realized |= 1 << D.hom(D.dom[f0], d)[fam[slot]]
        if not K.is_covering(d, generate_mask(D, realized)):
            return _no("localic", object=d, sieve=generate_mask(D, realized))
    return _yes("localic")


@dataclass(frozen=True)
class MorphismClassification:
    surjection: Verdict
    inclusion: Verdict
    hyperconnected: Verdict
    localic: Verdict
    equivalence: Verdict
    essential_surjective_closed_image: Verdict | None = None
    locally_connected: Verdict | None = None
    terminally_connected: Verdict | None = None

    def __post_init__(self):
        if self.equivalence.holds:
            if not (self.surjection.holds and self.inclusion.holds
                    and self.hyperconnected.holds and self.localic.holds):
                raise AssertionError("equivalence without all component flags")
        if self.hyperconnected.holds and not self.surjection.holds:
            raise AssertionError("hyperconnected but not a surjection")

    def flags(self) -> dict[str, bool]:
        out = {
            "surjection": self.surjection.holds,
            "inclusion": self.inclusion.holds,
            "hyperconnected": self.hyperconnected.holds,
            "localic": self.localic.holds,
            "equivalence": self.equivalence.holds,
        }
        for name in ("essential_surjective_closed_image", "locally_connected",
                     "terminally_connected"):
            v = getattr(self, name)
            if v is not None:
                out[name] = v.holds
        return out


def classify_morphism(sf: SiteFunctor) -> MorphismClassification:
    mos = is_morphism_of_sites(sf)
    if not mos:
        raise ValueError(f"not a morphism of sites: {mos.witness}")
    surjection = is_cover_reflecting(sf)
    jf = induced_topology(sf.F, sf.K)
    f_r = SiteFunctor(sf.F, jf, sf.K)
    inclusion = is_weakly_dense(f_r)
    csl = closed_sieve_lifting(sf)
    if surjection and csl:
        hyperconnected = _yes("hyperconnected")
    else:
        bad = surjection if not surjection else csl
        hyperconnected = _no("hyperconnected", witness=bad.witness)
    localic = _localic_condition(sf)
    equivalence = is_weakly_dense(sf)
    ii = _weakly_dense_clause_ii(sf)
    if csl and ii:
        essential = _yes("essential-surjective-closed-image")
    else:
        bad = csl if not csl else ii
        essential = _no("essential-surjective-closed-image", witness=bad.witness)
    return MorphismClassification(surjection, inclusion, hyperconnected,
                                  localic, equivalence, essential)


@dataclass(frozen=True)
class SurjectionInclusionFactorization:
    induced: GrothendieckTopology          # J_F on the source
    surjection_leg: SiteFunctor            # F: (C, J_F) -> (D, K)
    inclusion_leg: SiteFunctor             # id: (C, J) -> (C, J_F)


def surjection_inclusion_factorization(sf: SiteFunctor) -> SurjectionInclusionFactorization:
    mos = is_morphism_of_sites(sf)
    if not mos:
        raise ValueError(f"not a morphism of sites: {mos.witness}")
    jf = induced_topology(sf.F, sf.K)
    return SurjectionInclusionFactorization(
        jf,
        SiteFunctor(sf.F, jf, sf.K),
        SiteFunctor(identity_functor(sf.F.source), sf.J, jf),
    )


# ---------------------------------------------------------------------------
# hyperconnected-localic factorization through C^s_K

@dataclass(frozen=True)
class HyperconnectedLocalicFactorization:
    cjs: ps.CJsResult                       # D^s_K with its data
    cjs_topology: GrothendieckTopology      # C^s_K
    sub_objects: tuple[int, ...]            # indices of D^s_F inside D^s_K
    sub_topology: GrothendieckTopology      # C^s_K restricted to D^s_F
    localic_leg: SiteFunctor                # F_s: (C, J) -> (D^s_F, ·)
    hyperconnected_leg: SiteFunctor         # i^s_F: (D^s_F, ·) -> (D^s_K, C^s_K)
    embedding: SiteFunctor                  # i^s_K∘F = i^s_F ∘ F_s: (C, J) -> (D^s_K, C^s_K)


def _cjs_sheaf_arrows(cjs: ps.CJsResult, K: GrothendieckTopology):
    """Per object of D^s_K its sheafified sieve carrier, and per arrow the
    induced sheaf morphism."""
    objs = cjs.objects
    carriers = []
    shs = []
    for (d, s) in objs:
        sub = ps.sieve_subpresheaf(K.cat, d, s)
        carrier, elems = sub.as_presheaf()
        carriers.append((carrier, elems))
        shs.append(ps.sheafify(carrier, K))
    arrow_maps = []
    for (i, j, rel) in cjs.arrow_decode:
        (ci, si), (cj, sj) = objs[i], objs[j]
        carrier_i, elems_i = carriers[i]
        carrier_j, elems_j = carriers[j]
        cat = K.cat
        idx_i = [{x: k for k, x in enumerate(
            [a for a in cat.hom(e, ci) if (si >> a) & 1])} for e in cat.objects]
        idx_j = [{y: k for k, y in enumerate(
            [a for a in cat.hom(e, cj) if (sj >> a) & 1])} for e in cat.objects]
        pairs = [frozenset((idx_i[cat.dom[x]][x], idx_j[cat.dom[y]][y])
                           for (x, y) in rel if cat.dom[x] == e) or frozenset()
                 for e in cat.objects]
        pairs = tuple(
            frozenset((idx_i[e][x], idx_j[e][y])
                      for (x, y) in rel if cat.dom[x] == e)
            for e in cat.objects)
        R = ps.FunctionalRelation(carrier_i, carrier_j, pairs)
        arrow_maps.append(ps.relation_to_arrow(K, R, shs[i], shs[j]))
    return shs, arrow_maps


def cjs_canonical_topology(cjs: ps.CJsResult, K: GrothendieckTopology) -> GrothendieckTopology:
    """C^s_K: a sieve covers (d, S) iff the corresponding sheaf arrows are
    jointly locally surjective onto a_K(S)."""
    shs, arrow_maps = _cjs_sheaf_arrows(cjs, K)
    cat = cjs.category
    covers = []
    for i in range(cat.n_objects):
        good = []
        for sigma in all_sieve_masks(cat, i):
            fam = [arrow_maps[a] for a in bits(sigma)]
            if ps.family_locally_surjective(K, fam, shs[i].sheaf):
                good.append(sigma)
        covers.append(frozenset(good))
    return validate_topology(cat, covers)


def hyperconnected_localic_factorization(sf: SiteFunctor) -> HyperconnectedLocalicFactorization:
    mos = is_morphism_of_sites(sf)
    if not mos:
        raise ValueError(f"not a morphism of sites: {mos.witness}")
    F, J, K = sf.F, sf.J, sf.K
    C, D = F.source, F.target
    cjs = ps.build_CJs(D, K)
    ctop = cjs_canonical_topology(cjs, K)

    obj_index = {o: i for i, o in enumerate(cjs.objects)}
    arr_index = {t: a for a, t in enumerate(cjs.arrow_decode)}

    def graph_rel(g: int, src: int, dst: int) -> int:
        """Arrow of D^s_K induced by g: d -> d' between maximal-sieve objects."""
        (d, s), (d2, s2) = cjs.objects[src], cjs.objects[dst]
        rel = frozenset(
            (x, y) for x in bits(s) for y in bits(s2)
            if D.dom[x] == D.dom[y]
            and K.is_covering(D.dom[x], mask_of(
                h for h in D.arrows_into(D.dom[x])
                if D.comp[(y, h)] == D.comp[(D.comp[(g, x)], h)])))
        return arr_index[(src, dst, rel)]

    # the canonical embedding i^s_K: D -> D^s_K on maximal sieves
    isk_obj = tuple(obj_index[(d, maximal_sieve_mask(D, d))] for d in D.objects)
    isk_arr = tuple(graph_rel(g, isk_obj[D.dom[g]], isk_obj[D.cod[g]])
                    for g in D.arrows)
    i_s_k = FinFunctor(D, cjs.category, isk_obj, isk_arr)

    sub_objects = tuple(i for i, (d, s) in enumerate(cjs.objects)
                        if d in F.image_objects)
    sub_cat, sub_incl = full_subcategory(cjs.category, sub_objects)
    sub_top = induced_topology(sub_incl, ctop)

    sub_index = {o: i for i, o in enumerate(sub_objects)}
    fs_obj = tuple(sub_index[isk_obj[F.on_obj(c)]] for c in C.objects)
    sub_arr_index = {f: i for i, f in enumerate(
        [a for a in cjs.category.arrows
         if cjs.category.dom[a] in sub_index and cjs.category.cod[a] in sub_index])}
    fs_arr = tuple(sub_arr_index[isk_arr[F.on_arr(u)]] for u in C.arrows)
    f_s = FinFunctor(C, sub_cat, fs_obj, fs_arr)

    localic_leg = SiteFunctor(f_s, J, sub_top)
    hyper_leg = SiteFunctor(sub_incl, sub_top, ctop)
    embedding = SiteFunctor(f_s.then(sub_incl), J, ctop)
    return HyperconnectedLocalicFactorization(
        cjs, ctop, sub_objects, sub_top, localic_leg, hyper_leg, embedding)


# ---------------------------------------------------------------------------
# comorphism-side classifiers

def _hom_presheaf(F: FinFunctor, c: int) -> ps.FinPresheaf:
    """Hom_C(F(-), c) as a presheaf on the source of F."""
    D, C = F.source, F.target
    sizes = tuple(len(C.hom(F.on_obj(d), c)) for d in D.objects)
    restrict = []
    for g in D.arrows:
        a, b = D.dom[g], D.cod[g]
        hom_b = C.hom(F.on_obj(b), c)
        hom_a = C.hom(F.on_obj(a), c)
        restrict.append(tuple(hom_a.index(C.compose(x, F.on_arr(g)))
                              for x in hom_b))
    return ps.FinPresheaf(D, sizes, tuple(restrict))


def comorphism_surjection(sf: SiteFunctor) -> Verdict:
    """C_F surjection iff the target topology equals the coinduced image of
    the source topology along F."""
    coind = coinduced_topology(sf.F, sf.source_topology)
    if coind.covers == sf.target_topology.covers:
        return _yes("comorphism-surjection")
    for c in sf.F.target.objects:
        diff = sf.target_topology.covers[c] ^ coind.covers[c]
        if diff:
            return _no("comorphism-surjection", object=c, sieve=min(diff))
    raise AssertionError("unreachable")


def _functional_relations_between(src_top: GrothendieckTopology,
                                  P: ps.FinPresheaf, Q: ps.FinPresheaf):
    """All src_top-functional relations P -> Q, via the bijection with sheaf
    arrows (complete, so no search bound is needed)."""
    shP, shQ = ps.sheafify(P, src_top), ps.sheafify(Q, src_top)
    for xi in ps.enumerate_presheaf_morphisms(shP.sheaf, shQ.sheaf):
        yield ps.arrow_to_relation(shP, shQ, xi)


def _inclusion_relation_condition(sf: SiteFunctor) -> Verdict:
    """For every functional relation between image-hom presheaves, the family
    of all arrow pairs compatible with it must realize it locally."""
    F = sf.F
    src_top = sf.source_topology
    D, C = F.source, F.target
    for c in C.objects:
        for c2 in C.objects:
            P, Q = _hom_presheaf(F, c), _hom_presheaf(F, c2)
            for R in _functional_relations_between(src_top, P, Q):
                pairs = []
                for z in C.objects:
                    for f in C.hom(z, c):
                        for g in C.hom(z, c2):
                            good = True
                            for e in D.objects:
                                for x in C.hom(F.on_obj(e), z):
                                    xi = C.hom(F.on_obj(e), c).index(C.compose(f, x))
                                    yi = C.hom(F.on_obj(e), c2).index(C.compose(g, x))
                                    if (xi, yi) not in R.pairs[e]:
                                        good = False
                                        break
                                if not good:
                                    break
                            if good:
                                pairs.append((f, g))
                gen = generate_mask(C, mask_of(f for (f, _) in pairs))
                for e in D.objects:
                    for x in C.hom(F.on_obj(e), c):
                        t_mask = mask_of(
                            t for t in D.arrows_into(e)
                            if (gen >> C.compose(x, F.on_arr(t))) & 1)
                        if not src_top.is_covering(e, t_mask):
                            return _no("comorphism-inclusion",
                                       clause="relation-family",
                                       instance={"c": c, "c2": c2, "e": e, "x": x})
    return _yes("comorphism-inclusion-relations")


def _chi_morphism(sf: SiteFunctor, d: int) -> tuple[ps.SheafificationResult,
                                                    ps.SheafificationResult,
                                                    ps.PresheafMorphism]:
    """The canonical arrow χ_d: l'(d) -> a(Hom_C(F(-), F(d))), as the
    sheafification of u -> F(u)."""
    F = sf.F
    src_top = sf.source_topology
    D, C = F.source, F.target
    yd = ps.yoneda(D, d)
    P = _hom_presheaf(F, F.on_obj(d))
    comps = []
    for e in D.objects:
        hom = C.hom(F.on_obj(e), F.on_obj(d))
        comps.append(tuple(hom.index(F.on_arr(u)) for u in D.hom(e, d)))
    chi0 = ps.PresheafMorphism(yd, P, tuple(comps))
    sh_yd = ps.sheafify(yd, src_top)
    sh_P = ps.sheafify(P, src_top)
    return sh_yd, sh_P, ps.sheafify_morphism(chi0, sh_yd, sh_P)


def _yoneda_sheaf_arrow(sf: SiteFunctor, g: int,
                        sh_src: ps.SheafificationResult,
                        sh_dst: ps.SheafificationResult) -> ps.PresheafMorphism:
    """a(y(g)) between sheafified representables of the source site."""
    D = sf.F.source
    d1, d2 = D.dom[g], D.cod[g]
    comps = []
    for e in D.objects:
        hom2 = D.hom(e, d2)
        comps.append(tuple(hom2.index(D.compose(g, u)) for u in D.hom(e, d1)))
    y_g = ps.PresheafMorphism(ps.yoneda(D, d1), ps.yoneda(D, d2), tuple(comps))
    return ps.sheafify_morphism(y_g, sh_src, sh_dst)


def _inclusion_arrow_splits(sf: SiteFunctor, g: int,
                              chi_cache: dict) -> bool:
    """Is there a relation (equivalently sheaf arrow a(P_{F(d')}) -> l'(d))
    splitting χ_{d'} over g: d' -> d."""
    D = sf.F.source
    src_top = sf.source_topology
    d1, d = D.dom[g], D.cod[g]
    if d1 not in chi_cache:
        chi_cache[d1] = _chi_morphism(sf, d1)
    sh_yd1, sh_P, chi = chi_cache[d1]
    sh_yd = ps.sheafify(ps.yoneda(D, d), src_top)
    target_arrow = _yoneda_sheaf_arrow(sf, g, sh_yd1, sh_yd)
    for xi in ps.enumerate_presheaf_morphisms(sh_P.sheaf, sh_yd.sheaf):
        if chi.then(xi).components == target_arrow.components:
            return True
    return False


def _comorphism_inclusion_general(sf: SiteFunctor) -> Verdict:
    rel = _inclusion_relation_condition(sf)
    if not rel:
        return rel
    F = sf.F
    D = F.source
    src_top = sf.source_topology
    chi_cache: dict = {}
    for d in D.objects:
        ok = mask_of(g for g in D.arrows_into(d)
                     if _inclusion_arrow_splits(sf, g, chi_cache))
        if not src_top.is_covering(d, generate_mask(D, ok)):
            return _no("comorphism-inclusion", clause="local-splitting", object=d)
    return _yes("comorphism-inclusion")


def _subsheaf_guard(sheaf: ps.FinPresheaf, limit: int = 16) -> None:
    if sum(sheaf.sizes) > limit:
        raise SizeGuardError(
            f"subsheaf enumeration over {sum(sheaf.sizes)} elements (limit {limit})")


def _comorphism_localic_general(sf: SiteFunctor) -> Verdict:
    """Localic criterion: arrows from subobjects of the a(P_{F(d')}) through
    which χ factors must cover every d."""
    F = sf.F
    D = F.source
    src_top = sf.source_topology
    chi_cache: dict = {}

    def arrow_ok(g: int) -> bool:
        d1, d = D.dom[g], D.cod[g]
        if d1 not in chi_cache:
            chi_cache[d1] = _chi_morphism(sf, d1)
        sh_yd1, sh_P, chi = chi_cache[d1]
        sh_yd = ps.sheafify(ps.yoneda(D, d), src_top)
        target_arrow = _yoneda_sheaf_arrow(sf, g, sh_yd1, sh_yd)
        _subsheaf_guard(sh_P.sheaf)
        for sub in ps.subpresheaves(sh_P.sheaf):
            if not all(chi.at(e, x) in sub.members[e]
                       for e in D.objects for x in range(sh_yd1.sheaf.sizes[e])):
                continue
            carrier, elems = sub.as_presheaf()
            sheaf_ok, _ = ps.is_sheaf(carrier, src_top)
            if not sheaf_ok:
                continue
            index = [{x: i for i, x in enumerate(elems[e])} for e in D.objects]
            chi_bar = ps.PresheafMorphism(sh_yd1.sheaf, carrier, tuple(
                tuple(index[e][chi.at(e, x)] for x in range(sh_yd1.sheaf.sizes[e]))
                for e in D.objects))
            for xi in ps.enumerate_presheaf_morphisms(carrier, sh_yd.sheaf):
                if chi_bar.then(xi).components == target_arrow.components:
                    return True
        return False

    props = local_property_tests(sf)
    if props["J_faithful"]:
        return _yes("comorphism-localic", via="K-faithful")
    for d in D.objects:
        ok = mask_of(g for g in D.arrows_into(d) if arrow_ok(g))
        if not src_top.is_covering(d, generate_mask(D, ok)):
            return _no("comorphism-localic", object=d)
    return _yes("comorphism-localic")


def _comorphism_hyperconnected(sf: SiteFunctor) -> Verdict:
    """Surjection condition plus: every functorial source-closed family of
    arrows F(d) -> c (a closed subpresheaf of the hom presheaf) is induced
    by some sieve on c."""
    surj = comorphism_surjection(sf)
    if not surj:
        return _no("comorphism-hyperconnected", witness=surj.witness)
    F = sf.F
    D, C = F.source, F.target
    src_top = sf.source_topology
    for c in C.objects:
        P = _hom_presheaf(F, c)
        if sum(P.sizes) > 16:
            raise SizeGuardError(
                f"{sum(P.sizes)} image arrows into {c} (limit 16)")
        sieves = all_sieve_masks(C, c)
        closed_families = [
            A.members for A in ps.subpresheaves(P)
            if ps.closure_cJ(A, src_top).members == A.members]
        for members in closed_families:
            hit = False
            for s in sieves:
                induced = tuple(
                    frozenset(
                        xi for xi, x in enumerate(C.hom(F.on_obj(d), c))
                        if src_top.is_covering(d, mask_of(
                            t for t in D.arrows_into(d)
                            if (s >> C.compose(x, F.on_arr(t))) & 1)))
                    for d in D.objects)
                if induced == members:
                    hit = True
                    break
            if not hit:
                return _no("comorphism-hyperconnected", object=c,
                           family=[sorted(m) for m in members])
    return _yes("comorphism-hyperconnected")


def classify_comorphism(sf: SiteFunctor) -> MorphismClassification:
    com = is_comorphism_of_sites(sf)
    if not com:
        raise ValueError(f"not a comorphism of sites: {com.witness}")
    props = local_property_tests(sf)
    continuous = is_continuous(sf)

    surjection = comorphism_surjection(sf)

    if continuous:
        if props["J_full"] and props["J_faithful"]:
            inclusion = _yes("comorphism-inclusion", via="K-full and K-faithful")
        else:
            bad = props["J_full"] if not props["J_full"] else props["J_faithful"]
            inclusion = _no("comorphism-inclusion", witness=bad.witness)
    elif props["J_full"] and props["J_faithful"]:
        inclusion = _yes("comorphism-inclusion", via="K-full and K-faithful")
    else:
        inclusion = _comorphism_inclusion_general(sf)

    localic = _comorphism_localic_general(sf)
    hyperconnected = _comorphism_hyperconnected(sf)

    # the bimorphism criterion without K-faithfulness is unsound (see the
    # decisions ledger); continuous comorphisms, bimorphisms included, are
    # decided by the full-faithful-dense criterion
    if continuous:
        if props["J_full"] and props["J_faithful"] and props["K_dense"]:
            equivalence = _yes("comorphism-equivalence",
                               via="continuous K-full K-faithful J-dense")
        else:
            bad = next(props[k] for k in ("J_full", "J_faithful", "K_dense")
                       if not props[k])
            equivalence = _no("comorphism-equivalence", witness=bad.witness)
    else:
        if hyperconnected and localic:
            equivalence = _yes("comorphism-equivalence", via="hyperconnected and localic")
        else:
            bad = hyperconnected if not hyperconnected else localic
            equivalence = _no("comorphism-equivalence", witness=bad.witness)

    return MorphismClassification(surjection, inclusion, hyperconnected,
                                  localic, equivalence)


# ---------------------------------------------------------------------------
# comorphism-side factorizations (for cover-preserving comorphisms)

@dataclass(frozen=True)
class ComorphismFactorizations:
    # surjection-inclusion: F = i ∘ F' through the full image subcategory
    image_topology: GrothendieckTopology
    surjection_leg: SiteFunctor          # F': (D, K) -> (C', M^i_J)
    inclusion_leg: SiteFunctor           # i: (C', M^i_J) -> (C, J)
    # hyperconnected-localic: F = F~ ∘ π through the functor-congruence quotient
    quotient_topology: GrothendieckTopology
    hyperconnected_leg: SiteFunctor      # π: (D, K) -> (E, L)
    localic_leg: SiteFunctor             # F~: (E, L) -> (C, J)


def comorphism_factorizations(sf: SiteFunctor) -> ComorphismFactorizations:
    com = is_comorphism_of_sites(sf)
    if not com:
        raise ValueError(f"not a comorphism of sites: {com.witness}")
    cp = is_cover_preserving(sf)
    if not cp:
        raise ValueError(f"comorphism factorizations need cover preservation: {cp.witness}")
    F = sf.F
    D, C = F.source, F.target
    K, J = sf.source_topology, sf.target_topology

    image_objects = sorted(F.image_objects)
    sub_cat, incl = full_subcategory(C, image_objects)
    j_prime = smallest_comorphism_topology(incl, J)
    obj_index = {c: i for i, c in enumerate(image_objects)}
    sub_arrows = [f for f in C.arrows
                  if C.dom[f] in obj_index and C.cod[f] in obj_index]
    arr_index = {f: i for i, f in enumerate(sub_arrows)}
    f_prime = FinFunctor(D, sub_cat,
                         tuple(obj_index[F.on_obj(d)] for d in D.objects),
                         tuple(arr_index[F.on_arr(g)] for g in D.arrows))

    quotient, projection, induced = quotient_by_functor_congruence(F)
    covers = []
    for c in quotient.objects:
        good = []
        for s in all_sieve_masks(quotient, c):
            inverse = mask_of(g for g in D.arrows_into(c)
                              if (s >> projection.on_arr(g)) & 1)
            if K.is_covering(c, inverse):
                good.append(s)
        covers.append(frozenset(good))
    L = validate_topology(quotient, covers)

    return ComorphismFactorizations(
        j_prime,
        SiteFunctor(f_prime, K, j_prime),
        SiteFunctor(incl, j_prime, J),
        L,
        SiteFunctor(projection, K, L),
        SiteFunctor(induced, L, J),
    )


# ---------------------------------------------------------------------------
# locally connected morphisms

def _ab_categories(F: FinFunctor, h: int, c: int, x: int):
    """The two elements-style categories attached to (h: d0 -> d1, c, x),
    their projections to the target, and the comparison functor between them.

    Returns (A objects, A edges, a-projection objects;
             B objects, B edges, b-projection objects; xi object map)."""
    C, D = F.source, F.target
    d0, d1 = D.dom[h], D.cod[h]

    a_objects = [(cp, y, f)
                 for cp in C.objects
                 for f in C.hom(cp, c)
                 for y in D.hom(F.on_obj(cp), d0)
                 if D.compose(x, F.on_arr(f)) == D.compose(h, y)]
    a_index = {o: i for i, o in enumerate(a_objects)}
    a_edges = []
    for i, (c1, y1, f1) in enumerate(a_objects):
        for j, (c2, y2, f2) in enumerate(a_objects):
            for t in C.hom(c1, c2):
                if C.compose(f2, t) == f1 and \
                        D.compose(y2, F.on_arr(t)) == y1:
                    a_edges.append((i, j, F.on_arr(t)))
    a_proj = [F.on_obj(o[0]) for o in a_objects]

    b_objects = [(d, z, g)
                 for d in D.objects
                 for g in D.hom(d, F.on_obj(c))
                 for z in D.hom(d, d0)
                 if D.compose(x, g) == D.compose(h, z)]
    b_index = {o: i for i, o in enumerate(b_objects)}
    b_edges = []
    for i, (e1, z1, g1) in enumerate(b_objects):
        for j, (e2, z2, g2) in enumerate(b_objects):
            for s in D.hom(e1, e2):
                if D.compose(g2, s) == g1 and D.compose(z2, s) == z1:
                    b_edges.append((i, j, s))
    b_proj = [o[0] for o in b_objects]

    xi_map = [b_index[(F.on_obj(cp), y, F.on_arr(f))] for (cp, y, f) in a_objects]
    return a_objects, a_edges, a_proj, b_objects, b_edges, b_proj, xi_map


def is_locally_connected_presheaf(F: FinFunctor) -> Verdict:
    """Local connectedness of the presheaf-topos morphism induced by F
    (trivial topologies): the two comparison conditions over the elements
    categories attached to every (h, c, x)."""
    C, D = F.source, F.target
    for h in D.arrows:
        for c in C.objects:
            for x in D.hom(F.on_obj(c), D.cod[h]):
                (a_objects, a_edges, a_proj,
                 b_objects, b_edges, b_proj, xi_map) = _ab_categories(F, h, c, x)
                b_labels: dict[int, dict] = {}
                a_labels: dict[int, dict] = {}

                def labels_b(d):
                    if d not in b_labels:
                        b_labels[d] = comma_components(D, d, b_proj, b_edges)
                    return b_labels[d]

                def labels_a(d):
                    if d not in a_labels:
                        a_labels[d] = comma_components(D, d, a_proj, a_edges)
                    return a_labels[d]

                for bi, (d, z, g) in enumerate(b_objects):
                    lab = labels_b(d)
                    ident = D.identity[d]
                    if not any(
                        lab[(bi, ident)] == lab[(xi_map[ai], s)]
                        for ai in range(len(a_objects))
                        for s in D.hom(d, a_proj[ai])
                    ):
                        return _no("locally-connected", clause="a",
                                   instance={"h": h, "c": c, "x": x,
                                             "b_object": (d, z, g)})

                for d in D.objects:
                    lab_b = labels_b(d)
                    lab_a = labels_a(d)
                    for ai in range(len(a_objects)):
                        for alpha in D.hom(d, a_proj[ai]):
                            for aj in range(len(a_objects)):
                                for beta in D.hom(d, a_proj[aj]):
                                    if lab_b[(xi_map[ai], alpha)] == lab_b[(xi_map[aj], beta)] \
                                            and lab_a[(ai, alpha)] != lab_a[(aj, beta)]:
                                        return _no("locally-connected", clause="b",
                                                   instance={"h": h, "c": c, "x": x,
                                                             "alpha": alpha, "beta": beta})
    return _yes("locally-connected")


def is_locally_connected_general(sf: SiteFunctor) -> Verdict:
    """Local connectedness of C_F for a continuous comorphism, with covering
    refinements in both clauses."""
    com = is_comorphism_of_sites(sf)
    if not com:
        raise ValueError(f"not a comorphism of sites: {com.witness}")
    cont = is_continuous(sf)
    if not cont:
        raise ValueError(f"not continuous: {cont.witness}")
    F = sf.F
    C, D = F.source, F.target
    K = sf.target_topology
    for h in D.arrows:
        for c in C.objects:
            for x in D.hom(F.on_obj(c), D.cod[h]):
                (a_objects, a_edges, a_proj,
                 b_objects, b_edges, b_proj, xi_map) = _ab_categories(F, h, c, x)
                b_labels: dict[int, dict] = {}
                a_labels: dict[int, dict] = {}

                def labels_b(d):
                    if d not in b_labels:
                        b_labels[d] = comma_components(D, d, b_proj, b_edges)
                    return b_labels[d]

                def labels_a(d):
                    if d not in a_labels:
                        a_labels[d] = comma_components(D, d, a_proj, a_edges)
                    return a_labels[d]

                for bi, (d, z, g) in enumerate(b_objects):
                    good = 0
                    for u in D.arrows_into(d):
                        e = D.dom[u]
                        lab = labels_b(e)
                        if any(
                            lab[(bi, u)] == lab[(xi_map[ai], s)]
                            for ai in range(len(a_objects))
                            for s in D.hom(e, a_proj[ai])
                        ):
                            good |= 1 << u
                    if not K.is_covering(d, good):
                        return _no("locally-connected", clause="a",
                                   instance={"h": h, "c": c, "x": x,
                                             "b_object": (d, z, g)}, sieve=good)

                for d in D.objects:
                    lab_b = labels_b(d)
                    for ai in range(len(a_objects)):
                        for alpha in D.hom(d, a_proj[ai]):
                            for aj in range(len(a_objects)):
                                for beta in D.hom(d, a_proj[aj]):
                                    if lab_b[(xi_map[ai], alpha)] != lab_b[(xi_map[aj], beta)]:
                                        continue
                                    good = 0
                                    for u in D.arrows_into(d):
                                        e = D.dom[u]
                                        lab_ae = labels_a(e)
                                        if lab_ae[(ai, D.compose(alpha, u))] == \
                                                lab_ae[(aj, D.compose(beta, u))]:
                                            good |= 1 << u
                                    if not K.is_covering(d, good):
                                        return _no("locally-connected", clause="b",
                                                   instance={"h": h, "c": c, "x": x,
                                                             "alpha": alpha, "beta": beta},
                                                   sieve=good)
    return _yes("locally-connected")


# ---------------------------------------------------------------------------
# comprehensive factorization and terminal connectedness

@dataclass(frozen=True)
class ComprehensiveFactorization:
    sheaf: ps.FinPresheaf                  # F_K = a_K(colim y∘F)
    elements: ps.ElementsResult            # ∫F_K with its projection to D
    topology: GrothendieckTopology         # M^{π}_K on ∫F_K
    lift: FinFunctor                       # ξ: C -> ∫F_K
    projection: FinFunctor                 # π: ∫F_K -> D
    cofinality: Verdict                    # ξ is M^{π}_K-cofinal


def comprehensive_factorization(F: FinFunctor, K: GrothendieckTopology) -> ComprehensiveFactorization:
    C, D = F.source, F.target
    colim, legs = ps.colimit_of_representables(F)
    sh = ps.sheafify(colim, K)
    el, topology = ps.elements_topology(sh.sheaf, K)

    obj_index = {o: i for i, o in enumerate(el.objects)}
    arr_index = {a: i for i, a in enumerate(el.arrow_decode)}

    def elt(c: int) -> int:
        fc = F.on_obj(c)
        ident_idx = ps.yoneda_element(D, fc, D.identity[fc])
        return sh.unit.at(fc, legs[c][fc][ident_idx])

    xi_obj = tuple(obj_index[(F.on_obj(c), elt(c))] for c in C.objects)
    xi_arr = tuple(arr_index[(F.on_arr(u), elt(C.cod[u]))] for u in C.arrows)
    xi = FinFunctor(C, el.category, xi_obj, xi_arr)
    for u in C.arrows:
        assert el.category.dom[xi_arr[u]] == xi_obj[C.dom[u]], \
            "comprehensive lift is not a functor"
    cof = is_J_cofinal(xi, topology)
    return ComprehensiveFactorization(sh.sheaf, el, topology, xi,
                                      el.projection, cof)


def is_terminally_connected(sf: SiteFunctor) -> Verdict:
    """Terminal connectedness of the (essential) morphism induced by a
    continuous comorphism: relative cofinality wrt the target topology."""
    com = is_comorphism_of_sites(sf)
    if not com:
        raise ValueError(f"not a comorphism of sites: {com.witness}")
    cont = is_continuous(sf)
    if not cont:
        raise ValueError(f"not continuous: {cont.witness}")
    return is_J_cofinal(sf.F, sf.target_topology)


# ---------------------------------------------------------------------------
# witness replay

def recheck_witness(sf: SiteFunctor, verdict: Verdict) -> bool:
    """Replay a verdict's witness against the definitions.

    Counterexample witnesses are re-verified directly from the recorded
    quantifier instance; positive certificates are replayed by re-running
    the corresponding checker.
    """
    w = verdict.witness
    kind = w["kind"]
    F, J, K = sf.F, sf.source_topology, sf.target_topology
    C, D = F.source, F.target
    if verdict.holds:
        runner = _POSITIVE_RUNNERS.get(kind)
        return runner is None or runner(sf).holds
    if kind == "cover-preserving":
        c, s = w["object"], w["sieve"]
        image = mask_of(F.on_arr(f) for f in bits(s))
        return J.is_covering(c, s) and not K.covers_family(F.on_obj(c), image)
    if kind == "cover-reflecting":
        c, s = w["object"], w["sieve"]
        image = mask_of(F.on_arr(f) for f in bits(s))
        return (not J.is_covering(c, s)) and K.covers_family(F.on_obj(c), image)
    if kind == "covering-lifting":
        d, s = w["object"], w["sieve"]
        return K.is_covering(F.on_obj(d), s) and \
            not J.is_covering(d, preimage_mask(F, s, d))
    if kind == "morphism-of-sites":
        if w["clause"] == "i":
            image = mask_of(F.on_arr(f) for f in bits(w["sieve"]))
            return J.is_covering(w["object"], w["sieve"]) and \
                not K.covers_family(F.on_obj(w["object"]), image)
        if w["clause"] == "ii":
            return not K.is_covering(w["object"], w["sieve"])
        return not K.is_covering(_witness_target_object(w), w["sieve"])
    if kind in ("dense", "weakly-dense"):
        return not is_dense_morphism(sf).holds if kind == "dense" \
            else not is_weakly_dense(sf).holds
    if kind == "closed-sieve-lifting":
        c, s = w["object"], w["sieve"]
        fc = F.on_obj(c)
        if closure_mask(K, fc, s) != s:
            return False
        return all(
            closure_mask(K, fc, generate_mask(D, mask_of(F.on_arr(f) for f in bits(r)))) != s
            for r in all_sieve_masks(C, c))
    if kind == "cofinal":
        return not is_J_cofinal(F, J).holds
    checker = _POSITIVE_RUNNERS.get(kind)
    if checker is not None:
        return not checker(sf).holds
    raise ValueError(f"no re-checker for witness kind {kind!r}")


def _witness_target_object(w: dict) -> int:
    inst = w["instance"]
    return inst.get("d", inst.get("object", 0))


_POSITIVE_RUNNERS: dict[str, Callable[[SiteFunctor], Verdict]] = {
    "cover-preserving": is_cover_preserving,
    "cover-reflecting": is_cover_reflecting,
    "covering-lifting": is_comorphism_of_sites,
    "morphism-of-sites": is_morphism_of_sites,
    "continuous": is_continuous,
    "dense": is_dense_morphism,
    "weakly-dense": is_weakly_dense,
    "closed-sieve-lifting": closed_sieve_lifting,
    "localic": _localic_condition,
    "comorphism-surjection": comorphism_surjection,
    "comorphism-hyperconnected": _comorphism_hyperconnected,
    "comorphism-localic": _comorphism_localic_general,
}
