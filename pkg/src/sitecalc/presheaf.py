"""Finite presheaves and their sheaf theory.

Presheaf sets are tagged finite enumerations (elements 0..n-1 per object)
and restriction maps are arrays.  Sheafification is computed twice, by two
genuinely different code paths: the primary locally-matching-families
quotient, carried by the least covering sieve of each object, and the
classical plus construction applied twice, built as a directed colimit over
all covering sieves with a union-find quotient.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

from .fincat import FinCategory, FinFunctor, SizeGuardError, _UnionFind
from .sieves import bits, generate_mask, mask_of, maximal_sieve_mask, pullback_mask
from .topology import GrothendieckTopology, closure_mask


@dataclass(frozen=True)
class FinPresheaf:
    cat: FinCategory
    sizes: tuple[int, ...]
    restrict: tuple[tuple[int, ...], ...]  # per arrow f: P(cod f) -> P(dom f)

    def __post_init__(self):
        cat = self.cat
        assert len(self.sizes) == cat.n_objects
        assert len(self.restrict) == cat.n_arrows
        for f in cat.arrows:
            assert len(self.restrict[f]) == self.sizes[cat.cod[f]]
            assert all(0 <= x < self.sizes[cat.dom[f]] for x in self.restrict[f])
        for c in cat.objects:
            i = cat.identity[c]
            if self.restrict[i] != tuple(range(self.sizes[c])):
                raise ValueError(f"restriction along id_{c} is not the identity")
        for (g, f), h in cat.comp.items():
            rf, rg, rh = self.restrict[f], self.restrict[g], self.restrict[h]
            if any(rf[rg[x]] != rh[x] for x in range(self.sizes[cat.cod[g]])):
                raise ValueError(f"contravariant functoriality fails at pair ({g}, {f})")

    def size(self, c: int) -> int:
        return self.sizes[c]

    def res(self, f: int, x: int) -> int:
        return self.restrict[f][x]


def constant_presheaf(cat: FinCategory, n: int) -> FinPresheaf:
    return FinPresheaf(cat, (n,) * cat.n_objects,
                       tuple(tuple(range(n)) for _ in cat.arrows))


def yoneda(cat: FinCategory, c: int) -> FinPresheaf:
    """y(c): e -> Hom(e, c), elements indexed by position in hom(e, c)."""
    index = {e: {h: i for i, h in enumerate(cat.hom(e, c))} for e in cat.objects}
    sizes = tuple(len(cat.hom(e, c)) for e in cat.objects)
    restrict = []
    for f in cat.arrows:
        a, b = cat.dom[f], cat.cod[f]
        restrict.append(tuple(index[a][cat.comp[(h, f)]] for h in cat.hom(b, c)))
    return FinPresheaf(cat, sizes, tuple(restrict))


def yoneda_element(cat: FinCategory, c: int, h: int) -> int:
    """Index of the arrow h in y(c)(dom h)."""
    return cat.hom(cat.dom[h], c).index(h)


def yoneda_arrow(cat: FinCategory, c: int, e: int, i: int) -> int:
    return cat.hom(e, c)[i]


@dataclass(frozen=True)
class PresheafMorphism:
    source: FinPresheaf
    target: FinPresheaf
    components: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        cat = self.source.cat
        for c in cat.objects:
            assert len(self.components[c]) == self.source.sizes[c]
        for f in cat.arrows:
            a, b = cat.dom[f], cat.cod[f]
            for x in range(self.source.sizes[b]):
                if self.target.res(f, self.components[b][x]) != \
                        self.components[a][self.source.res(f, x)]:
                    raise ValueError(f"naturality fails at arrow {f}, element {x}")

    def at(self, c: int, x: int) -> int:
        return self.components[c][x]

    def then(self, other: "PresheafMorphism") -> "PresheafMorphism":
        return PresheafMorphism(
            self.source, other.target,
            tuple(tuple(other.components[c][y] for y in self.components[c])
                  for c in self.source.cat.objects))

    def is_bijective(self) -> bool:
        return all(len(set(comp)) == self.target.sizes[c] == len(comp)
                   for c, comp in enumerate(self.components))


def identity_morphism(P: FinPresheaf) -> PresheafMorphism:
    return PresheafMorphism(P, P, tuple(tuple(range(n)) for n in P.sizes))


@dataclass(frozen=True)
class SubPresheaf:
    ambient: FinPresheaf
    members: tuple[frozenset[int], ...]

    def __post_init__(self):
        cat = self.ambient.cat
        for f in cat.arrows:
            a, b = cat.dom[f], cat.cod[f]
            for x in self.members[b]:
                if self.ambient.res(f, x) not in self.members[a]:
                    raise ValueError(f"not closed under restriction along arrow {f}")

    def as_presheaf(self) -> tuple[FinPresheaf, tuple[tuple[int, ...], ...]]:
        """Carrier presheaf plus the per-object element lists."""
        cat = self.ambient.cat
        elems = tuple(tuple(sorted(self.members[c])) for c in cat.objects)
        index = [{x: i for i, x in enumerate(elems[c])} for c in cat.objects]
        restrict = tuple(
            tuple(index[cat.dom[f]][self.ambient.res(f, x)] for x in elems[cat.cod[f]])
            for f in cat.arrows)
        return FinPresheaf(cat, tuple(len(e) for e in elems), restrict), elems


def sieve_subpresheaf(cat: FinCategory, c: int, mask: int) -> SubPresheaf:
    """A sieve on c as a subpresheaf of y(c)."""
    Y = yoneda(cat, c)
    members = tuple(
        frozenset(i for i, h in enumerate(cat.hom(e, c)) if (mask >> h) & 1)
        for e in cat.objects)
    return SubPresheaf(Y, members)


def closure_cJ(A: SubPresheaf, J: GrothendieckTopology) -> SubPresheaf:
    """c_J(A)(c) = {x in E(c) | {f | E(f)(x) in A(dom f)} is J-covering}."""
    E = A.ambient
    cat = E.cat
    members = []
    for c in cat.objects:
        good = set()
        for x in range(E.sizes[c]):
            s = mask_of(f for f in cat.arrows_into(c)
                        if E.res(f, x) in A.members[cat.dom[f]])
            if J.is_covering(c, s):
                good.add(x)
        members.append(frozenset(good))
    return SubPresheaf(E, tuple(members))


def elem_locally_equal(P: FinPresheaf, J: GrothendieckTopology, c: int, x: int, y: int) -> bool:
    if x == y:
        return True
    cat = P.cat
    agree = mask_of(f for f in cat.arrows_into(c) if P.res(f, x) == P.res(f, y))
    return J.is_covering(c, agree)


def is_locally_injective(alpha: PresheafMorphism, J: GrothendieckTopology) -> bool:
    F = alpha.source
    cat = F.cat
    for c in cat.objects:
        for x in range(F.sizes[c]):
            for x2 in range(x + 1, F.sizes[c]):
                if alpha.at(c, x) == alpha.at(c, x2):
                    if not elem_locally_equal(F, J, c, x, x2):
                        return False
    return True


def is_locally_surjective(alpha: PresheafMorphism, J: GrothendieckTopology) -> bool:
    G = alpha.target
    cat = G.cat
    images = [set(alpha.components[c]) for c in cat.objects]
    for c in cat.objects:
        for y in range(G.sizes[c]):
            s = mask_of(f for f in cat.arrows_into(c)
                        if G.res(f, y) in images[cat.dom[f]])
            if not J.is_covering(c, s):
                return False
    return True


def is_bicovering(alpha: PresheafMorphism, J: GrothendieckTopology) -> bool:
    return is_locally_injective(alpha, J) and is_locally_surjective(alpha, J)


# ---------------------------------------------------------------------------
# sheaf condition

def strict_matching_families(P: FinPresheaf, c: int, mask: int) -> list[dict[int, int]]:
    """Families (x_f)_{f in S} with x_{f∘z} = P(z)(x_f) exactly."""
    cat = P.cat
    members = sorted(bits(mask))
    position = {f: i for i, f in enumerate(members)}
    out: list[dict[int, int]] = []

    def extend(i: int, assign: dict[int, int]):
        if i == len(members):
            out.append(dict(assign))
            return
        f = members[i]
        forced = None
        for g, xg in assign.items():
            for z in cat.arrows_into(cat.dom[g]):
                if cat.comp[(g, z)] == f:
                    val = P.res(z, xg)
                    if forced is not None and forced != val:
                        return
                    forced = val
        candidates = [forced] if forced is not None else range(P.sizes[cat.dom[f]])
        for x in candidates:
            ok = True
            for z in cat.arrows_into(cat.dom[f]):
                fz = cat.comp[(f, z)]
                if fz == f:
                    if P.res(z, x) != x:
                        ok = False
                        break
                elif fz in assign and position[fz] < i and assign[fz] != P.res(z, x):
                    ok = False
                    break
            if ok:
                assign[f] = x
                extend(i + 1, assign)
                del assign[f]

    extend(0, {})
    return out


def is_sheaf(P: FinPresheaf, J: GrothendieckTopology) -> tuple[bool, dict | None]:
    """Unique amalgamation of every matching family over every covering
    sieve; returns a failing (sieve, family) witness otherwise."""
    cat = P.cat
    for c in cat.objects:
        for s in J.covers[c]:
            for fam in strict_matching_families(P, c, s):
                amalg = [x for x in range(P.sizes[c])
                         if all(P.res(f, x) == fam[f] for f in fam)]
                if len(amalg) != 1:
                    return False, {"object": c, "sieve": s, "family": fam,
                                   "amalgamations": amalg}
    return True, None


# ---------------------------------------------------------------------------
# sheafification, primary path: locally matching families over the least
# covering sieve, modulo pointwise local equality, lexicographic reps

@dataclass(frozen=True)
class SheafificationResult:
    presheaf: FinPresheaf
    topology: GrothendieckTopology
    sheaf: FinPresheaf
    unit: PresheafMorphism
    carrier: tuple[tuple[int, ...], ...]     # per object: arrows of the least covering sieve
    families: tuple[tuple[tuple[int, ...], ...], ...]  # per object: representative families
    _index: tuple[dict[tuple[int, ...], int], ...]

    def decode(self, c: int, elt: int) -> dict[int, int]:
        """The canonical locally matching family of an element."""
        return dict(zip(self.carrier[c], self.families[c][elt]))

    def element_of_family(self, c: int, family: dict[int, int]) -> int:
        key = tuple(family[f] for f in self.carrier[c])
        return self._index[c][key]


def _locally_matching_families(P: FinPresheaf, J: GrothendieckTopology,
                               c: int, members: Sequence[int]) -> list[tuple[int, ...]]:
    cat = P.cat
    position = {f: i for i, f in enumerate(members)}
    member_set = set(members)
    out: list[tuple[int, ...]] = []

    def extend(i: int, assign: list[int]):
        if i == len(members):
            out.append(tuple(assign))
            return
        f = members[i]
        for x in range(P.sizes[cat.dom[f]]):
            ok = True
            for z in cat.arrows_into(cat.dom[f]):
                fz = cat.comp[(f, z)]
                if fz == f:
                    if not elem_locally_equal(P, J, cat.dom[z], x, P.res(z, x)):
                        ok = False
                        break
                elif fz in member_set and position[fz] < i:
                    if not elem_locally_equal(P, J, cat.dom[z], assign[position[fz]], P.res(z, x)):
                        ok = False
                        break
            if ok:
                # constraints where f is the composite: x ≡ P(z)(x_g) for g∘z = f
                for j in range(i):
                    g = members[j]
                    for z in cat.arrows_into(cat.dom[g]):
                        if cat.comp[(g, z)] == f:
                            if not elem_locally_equal(P, J, cat.dom[f], x, P.res(z, assign[j])):
                                ok = False
                                break
                    if not ok:
                        break
            if ok:
                assign.append(x)
                extend(i + 1, assign)
                assign.pop()

    extend(0, [])
    return out


def sheafify(P: FinPresheaf, J: GrothendieckTopology) -> SheafificationResult:
    cat = P.cat
    carriers = tuple(tuple(sorted(bits(J.min_cover[c]))) for c in cat.objects)
    all_families = [
        _locally_matching_families(P, J, c, carriers[c]) for c in cat.objects]

    reps: list[tuple[tuple[int, ...], ...]] = []
    index: list[dict[tuple[int, ...], int]] = []
    for c in cat.objects:
        members = carriers[c]
        doms = [cat.dom[f] for f in members]
        classes: list[tuple[int, ...]] = []
        idx: dict[tuple[int, ...], int] = {}
        for fam in sorted(all_families[c]):
            if fam in idx:
                continue
            hit = None
            for k, rep in enumerate(classes):
                if all(elem_locally_equal(P, J, doms[i], fam[i], rep[i])
                       for i in range(len(members))):
                    hit = k
                    break
            if hit is None:
                hit = len(classes)
                classes.append(fam)  # sorted iteration makes reps lexicographic minima
            idx[fam] = hit
        reps.append(tuple(classes))
        index.append(idx)

    sizes = tuple(len(r) for r in reps)
    restrict = []
    for f in cat.arrows:
        a, b = cat.dom[f], cat.cod[f]
        row = []
        for fam in reps[b]:
            restricted = tuple(
                fam[carriers[b].index(cat.comp[(f, g)])] for g in carriers[a])
            row.append(index[a][restricted])
        restrict.append(tuple(row))
    sheaf = FinPresheaf(cat, sizes, tuple(restrict))

    unit_components = []
    for c in cat.objects:
        comp = []
        for x in range(P.sizes[c]):
            fam = tuple(P.res(f, x) for f in carriers[c])
            comp.append(index[c][fam])
        unit_components.append(tuple(comp))
    unit = PresheafMorphism(P, sheaf, tuple(unit_components))
    return SheafificationResult(P, J, sheaf, unit, carriers, tuple(reps), tuple(index))


def sheafify_morphism(alpha: PresheafMorphism, shP: SheafificationResult,
                      shQ: SheafificationResult) -> PresheafMorphism:
    """a_J(alpha) between the computed sheafifications."""
    cat = alpha.source.cat
    components = []
    for c in cat.objects:
        comp = []
        for fam in shP.families[c]:
            mapped = tuple(alpha.at(cat.dom[f], x)
                           for f, x in zip(shP.carrier[c], fam))
            comp.append(shQ._index[c][mapped])
        components.append(tuple(comp))
    return PresheafMorphism(shP.sheaf, shQ.sheaf, tuple(components))


# ---------------------------------------------------------------------------
# independent oracle: the plus construction, applied twice

def plus_construction(P: FinPresheaf, J: GrothendieckTopology) -> tuple[FinPresheaf, PresheafMorphism]:
    """P⁺(c): matching families over covering sieves, glued along restriction
    to smaller covering sieves (a filtered colimit, realized by union-find)."""
    cat = P.cat
    pairs: list[list[tuple[int, tuple[tuple[int, int], ...]]]] = []
    pair_index: list[dict[tuple[int, tuple[tuple[int, int], ...]], int]] = []
    for c in cat.objects:
        lst = []
        for s in sorted(J.covers[c]):
            for fam in strict_matching_families(P, c, s):
                lst.append((s, tuple(sorted(fam.items()))))
        pairs.append(lst)
        pair_index.append({p: i for i, p in enumerate(lst)})

    classes: list[list[int]] = []
    reps: list[dict[int, int]] = []
    for c in cat.objects:
        uf = _UnionFind(len(pairs[c]))
        for i, (s, fam_items) in enumerate(pairs[c]):
            fam = dict(fam_items)
            for t in J.covers[c]:
                if t & ~s == 0 and t != s:
                    restricted = tuple(sorted((f, fam[f]) for f in bits(t)))
                    uf.union(i, pair_index[c][(t, restricted)])
        roots = {}
        cls = []
        for i in range(len(pairs[c])):
            r = uf.find(i)
            if r not in roots:
                roots[r] = len(roots)
            cls.append(roots[r])
        classes.append(cls)
        reps.append(roots)

    sizes = tuple(len(reps[c]) for c in cat.objects)
    restrict = []
    for f in cat.arrows:
        a, b = cat.dom[f], cat.cod[f]
        row = [0] * sizes[b]
        for i, (s, fam_items) in enumerate(pairs[b]):
            fam = dict(fam_items)
            pb = pullback_mask(cat, s, f)
            restricted = tuple(sorted(
                (g, fam[cat.comp[(f, g)]]) for g in bits(pb)))
            row[classes[b][i]] = classes[a][pair_index[a][(pb, restricted)]]
        restrict.append(tuple(row))
    plus = FinPresheaf(cat, sizes, tuple(restrict))

    unit_components = []
    for c in cat.objects:
        top = maximal_sieve_mask(cat, c)
        comp = []
        for x in range(P.sizes[c]):
            fam = tuple(sorted((f, P.res(f, x)) for f in bits(top)))
            comp.append(classes[c][pair_index[c][(top, fam)]])
        unit_components.append(tuple(comp))
    return plus, PresheafMorphism(P, plus, tuple(unit_components))


def sheafify_plus_plus(P: FinPresheaf, J: GrothendieckTopology) -> tuple[FinPresheaf, PresheafMorphism]:
    plus, eta1 = plus_construction(P, J)
    plusplus, eta2 = plus_construction(plus, J)
    return plusplus, eta1.then(eta2)


def sheaf_comparison(P: FinPresheaf, J: GrothendieckTopology,
                     E1: FinPresheaf, eta1: PresheafMorphism,
                     E2: FinPresheaf, eta2: PresheafMorphism) -> PresheafMorphism:
    """The unique morphism E1 -> E2 under P, for two sheaf presentations of
    the same presheaf (units must be J-bicovering with sheaf targets).

    phi(e) is the unique v with {f | some x has eta1(x) = e·f and
    eta2(x) = v·f} covering; raises if existence or uniqueness fails.
    """
    cat = P.cat
    components = []
    for c in cat.objects:
        comp = []
        for e in range(E1.sizes[c]):
            found = []
            for v in range(E2.sizes[c]):
                s = 0
                for f in cat.arrows_into(c):
                    d = cat.dom[f]
                    ef = E1.res(f, e)
                    vf = E2.res(f, v)
                    if any(eta1.at(d, x) == ef and eta2.at(d, x) == vf
                           for x in range(P.sizes[d])):
                        s |= 1 << f
                if J.is_covering(c, s):
                    found.append(v)
            if len(found) != 1:
                raise ValueError(
                    f"sheaf comparison not uniquely defined at object {c}, element {e}: {found}")
            comp.append(found[0])
        components.append(tuple(comp))
    return PresheafMorphism(E1, E2, tuple(components))


# ---------------------------------------------------------------------------
# presheaf combinators

def product_presheaf(P: FinPresheaf, Q: FinPresheaf) -> FinPresheaf:
    cat = P.cat
    sizes = tuple(P.sizes[c] * Q.sizes[c] for c in cat.objects)
    restrict = []
    for f in cat.arrows:
        a, b = cat.dom[f], cat.cod[f]
        row = []
        for x in range(P.sizes[b]):
            for y in range(Q.sizes[b]):
                row.append(P.res(f, x) * Q.sizes[a] + Q.res(f, y))
        restrict.append(tuple(row))
    return FinPresheaf(cat, sizes, tuple(restrict))


def pair_elem(Q: FinPresheaf, c: int, x: int, y: int) -> int:
    return x * Q.sizes[c] + y


def unpair_elem(Q: FinPresheaf, c: int, z: int) -> tuple[int, int]:
    return divmod(z, Q.sizes[c])


def enumerate_presheaf_morphisms(P: FinPresheaf, Q: FinPresheaf) -> list[PresheafMorphism]:
    """All natural transformations P -> Q, by backtracking over objects."""
    cat = P.cat
    objs = list(cat.objects)
    out = []

    def extend(i: int, comps: dict[int, tuple[int, ...]]):
        if i == len(objs):
            out.append(PresheafMorphism(P, Q, tuple(comps[c] for c in objs)))
            return
        c = objs[i]
        for comp in itertools.product(range(Q.sizes[c]), repeat=P.sizes[c]):
            ok = True
            for f in cat.arrows:
                a, b = cat.dom[f], cat.cod[f]
                if b == c and a in comps:
                    if any(Q.res(f, comp[x]) != comps[a][P.res(f, x)]
                           for x in range(P.sizes[b])):
                        ok = False
                        break
                elif a == c and b in comps:
                    if any(Q.res(f, comps[b][x]) != comp[P.res(f, x)]
                           for x in range(P.sizes[b])):
                        ok = False
                        break
                elif a == c and b == c:
                    if any(Q.res(f, comp[x]) != comp[P.res(f, x)]
                           for x in range(P.sizes[b])):
                        ok = False
                        break
            if ok:
                comps[c] = comp
                extend(i + 1, comps)
                del comps[c]

    extend(0, {})
    return out


def subpresheaves(P: FinPresheaf) -> list[SubPresheaf]:
    """All subpresheaves (restriction-closed element selections)."""
    cat = P.cat
    out = []
    choices = [list(_subsets(range(P.sizes[c]))) for c in cat.objects]
    for combo in itertools.product(*choices):
        ok = True
        for f in cat.arrows:
            a, b = cat.dom[f], cat.cod[f]
            if any(P.res(f, x) not in combo[a] for x in combo[b]):
                ok = False
                break
        if ok:
            out.append(SubPresheaf(P, tuple(frozenset(m) for m in combo)))
    return out


def _subsets(xs):
    xs = list(xs)
    for k in range(len(xs) + 1):
        yield from (frozenset(c) for c in itertools.combinations(xs, k))


# ---------------------------------------------------------------------------
# J-functional relations

@dataclass(frozen=True)
class FunctionalRelation:
    source: FinPresheaf
    target: FinPresheaf
    pairs: tuple[frozenset[tuple[int, int]], ...]  # per object

    def holds(self, c: int, x: int, y: int) -> bool:
        return (x, y) in self.pairs[c]


def validate_functional_relation(R: FunctionalRelation,
                                 J: GrothendieckTopology) -> tuple[bool, dict | None]:
    P, Q = R.source, R.target
    cat = P.cat
    for c in cat.objects:
        for (x, y) in R.pairs[c]:
            for f in cat.arrows_into(c):
                if (P.res(f, x), Q.res(f, y)) not in R.pairs[cat.dom[f]]:
                    return False, {"clause": "functoriality", "object": c,
                                   "pair": (x, y), "arrow": f}
    for c in cat.objects:
        for x in range(P.sizes[c]):
            for y in range(Q.sizes[c]):
                if (x, y) in R.pairs[c]:
                    continue
                s = mask_of(f for f in cat.arrows_into(c)
                            if (P.res(f, x), Q.res(f, y)) in R.pairs[cat.dom[f]])
                if J.is_covering(c, s):
                    return False, {"clause": "i", "object": c, "pair": (x, y)}
    for c in cat.objects:
        for (x, y) in R.pairs[c]:
            for (x2, y2) in R.pairs[c]:
                if x == x2 and not elem_locally_equal(Q, J, c, y, y2):
                    return False, {"clause": "ii", "object": c, "pairs": ((x, y), (x2, y2))}
    for c in cat.objects:
        for x in range(P.sizes[c]):
            s = mask_of(f for f in cat.arrows_into(c)
                        if any((P.res(f, x), y) in R.pairs[cat.dom[f]]
                               for y in range(Q.sizes[cat.dom[f]])))
            if not J.is_covering(c, s):
                return False, {"clause": "iii", "object": c, "element": x}
    return True, None


def relation_closure(R: FunctionalRelation, J: GrothendieckTopology) -> FunctionalRelation:
    """J-closure: add every pair whose agreement sieve is covering."""
    P, Q = R.source, R.target
    cat = P.cat
    pairs = [set(p) for p in R.pairs]
    changed = True
    while changed:
        changed = False
        for c in cat.objects:
            for x in range(P.sizes[c]):
                for y in range(Q.sizes[c]):
                    if (x, y) in pairs[c]:
                        continue
                    s = mask_of(f for f in cat.arrows_into(c)
                                if (P.res(f, x), Q.res(f, y)) in pairs[cat.dom[f]])
                    if J.is_covering(c, s):
                        pairs[c].add((x, y))
                        changed = True
    return FunctionalRelation(P, Q, tuple(frozenset(p) for p in pairs))


def identity_relation(P: FinPresheaf, J: GrothendieckTopology) -> FunctionalRelation:
    cat = P.cat
    pairs = tuple(
        frozenset((x, y) for x in range(P.sizes[c]) for y in range(P.sizes[c])
                  if elem_locally_equal(P, J, c, x, y))
        for c in cat.objects)
    return FunctionalRelation(P, P, pairs)


def graph_relation(alpha: PresheafMorphism, J: GrothendieckTopology) -> FunctionalRelation:
    """J-closed graph of a presheaf morphism."""
    P, Q = alpha.source, alpha.target
    pairs = tuple(
        frozenset((x, y) for x in range(P.sizes[c]) for y in range(Q.sizes[c])
                  if elem_locally_equal(Q, J, c, alpha.at(c, x), y))
        for c in P.cat.objects)
    return FunctionalRelation(P, Q, pairs)


def compose_relations(J: GrothendieckTopology, S: FunctionalRelation,
                      R: FunctionalRelation) -> FunctionalRelation:
    """(S * R)(c) = {(x, z) | {f | some y links them through R then S} covers c}."""
    if R.target != S.source:
        raise ValueError("relations not composable")
    P, Q, Z = R.source, R.target, S.target
    cat = P.cat
    pairs = []
    for c in cat.objects:
        good = set()
        for x in range(P.sizes[c]):
            for z in range(Z.sizes[c]):
                s = mask_of(
                    f for f in cat.arrows_into(c)
                    if any((P.res(f, x), y) in R.pairs[cat.dom[f]]
                           and (y, Z.res(f, z)) in S.pairs[cat.dom[f]]
                           for y in range(Q.sizes[cat.dom[f]])))
                if J.is_covering(c, s):
                    good.add((x, z))
        pairs.append(frozenset(good))
    return FunctionalRelation(P, Z, tuple(pairs))


def arrow_to_relation(shP: SheafificationResult, shQ: SheafificationResult,
                      xi: PresheafMorphism) -> FunctionalRelation:
    """(x, y) in R_xi iff xi(eta_P(x)) = eta_Q(y)."""
    P, Q = shP.presheaf, shQ.presheaf
    cat = P.cat
    pairs = tuple(
        frozenset((x, y) for x in range(P.sizes[c]) for y in range(Q.sizes[c])
                  if xi.at(c, shP.unit.at(c, x)) == shQ.unit.at(c, y))
        for c in cat.objects)
    return FunctionalRelation(P, Q, pairs)


def relation_presheaf(R: FunctionalRelation) -> tuple[FinPresheaf, tuple[tuple[tuple[int, int], ...], ...]]:
    """The relation as a presheaf (requires functoriality)."""
    P, Q = R.source, R.target
    cat = P.cat
    elems = tuple(tuple(sorted(R.pairs[c])) for c in cat.objects)
    index = [{p: i for i, p in enumerate(elems[c])} for c in cat.objects]
    restrict = []
    for f in cat.arrows:
        a, b = cat.dom[f], cat.cod[f]
        restrict.append(tuple(
            index[a][(P.res(f, x), Q.res(f, y))] for (x, y) in elems[b]))
    return FinPresheaf(cat, tuple(len(e) for e in elems), tuple(restrict)), elems


def split_product_element(shP: SheafificationResult, shQ: SheafificationResult,
                          shPQ: SheafificationResult, c: int, elt: int) -> tuple[int, int]:
    """a_J(P×Q) ≅ a_J(P) × a_J(Q), on the canonical family representatives."""
    Q = shQ.presheaf
    fam = shPQ.families[c][elt]
    cat = shP.presheaf.cat
    doms = [cat.dom[f] for f in shPQ.carrier[c]]
    first = tuple(unpair_elem(Q, doms[i], z)[0] for i, z in enumerate(fam))
    second = tuple(unpair_elem(Q, doms[i], z)[1] for i, z in enumerate(fam))
    return shP._index[c][first], shQ._index[c][second]


def relation_to_arrow(J: GrothendieckTopology, R: FunctionalRelation,
                      shP: SheafificationResult, shQ: SheafificationResult) -> PresheafMorphism:
    """The sheaf arrow a_J(P) -> a_J(Q) whose graph is a_J(R)."""
    P, Q = R.source, R.target
    cat = P.cat
    PQ = product_presheaf(P, Q)
    shPQ = sheafify(PQ, J)
    carrier, elems = relation_presheaf(R)
    shR = sheafify(carrier, J)
    incl = PresheafMorphism(carrier, PQ, tuple(
        tuple(pair_elem(Q, c, x, y) for (x, y) in elems[c]) for c in cat.objects))
    a_incl = sheafify_morphism(incl, shR, shPQ)

    graph: list[dict[int, int]] = [dict() for _ in cat.objects]
    for c in cat.objects:
        for r in range(shR.sheaf.sizes[c]):
            u, v = split_product_element(shP, shQ, shPQ, c, a_incl.at(c, r))
            if u in graph[c] and graph[c][u] != v:
                raise ValueError(f"relation is not single-valued as a sheaf graph at {c}")
            graph[c][u] = v
    components = []
    for c in cat.objects:
        if len(graph[c]) != shP.sheaf.sizes[c]:
            raise ValueError(f"relation is not total as a sheaf graph at object {c}")
        components.append(tuple(graph[c][u] for u in range(shP.sheaf.sizes[c])))
    return PresheafMorphism(shP.sheaf, shQ.sheaf, tuple(components))


def relation_is_mono(R: FunctionalRelation, J: GrothendieckTopology) -> bool:
    P = R.source
    cat = P.cat
    for c in cat.objects:
        for (x, y) in R.pairs[c]:
            for (x2, y2) in R.pairs[c]:
                if y == y2 and not elem_locally_equal(P, J, c, x, x2):
                    return False
    return True


def relation_is_epi(R: FunctionalRelation, J: GrothendieckTopology) -> bool:
    P, Q = R.source, R.target
    cat = P.cat
    for c in cat.objects:
        for y in range(Q.sizes[c]):
            s = mask_of(f for f in cat.arrows_into(c)
                        if any((x, Q.res(f, y)) in R.pairs[cat.dom[f]]
                               for x in range(P.sizes[cat.dom[f]])))
            if not J.is_covering(c, s):
                return False
    return True


# ---------------------------------------------------------------------------
# the categories C_J and C_J^s

MAX_RELATION_PAIRS = 16


@dataclass(frozen=True)
class CJResult:
    site_cat: FinCategory
    topology: GrothendieckTopology
    category: FinCategory
    homs: tuple  # per (c, d): tuple of relations, each a frozenset of (f, g) arrow pairs
    arrow_decode: tuple  # per arrow of `category`: (c, d, relation)


def _arrow_pair_universe(cat: FinCategory, c: int, d: int) -> list[tuple[int, int]]:
    return [(f, g) for e in cat.objects
            for f in cat.hom(e, c) for g in cat.hom(e, d)]


def _is_CJ_relation(cat: FinCategory, J: GrothendieckTopology, c: int, d: int,
                    rel: frozenset[tuple[int, int]]) -> bool:
    # (i) precomposition closure
    for (f, g) in rel:
        for k in cat.arrows_into(cat.dom[f]):
            if (cat.comp[(f, k)], cat.comp[(g, k)]) not in rel:
                return False
    # (ii) J-closedness
    for e in cat.objects:
        for x in cat.hom(e, c):
            for y in cat.hom(e, d):
                if (x, y) in rel:
                    continue
                s = mask_of(h for h in cat.arrows_into(e)
                            if (cat.comp[(x, h)], cat.comp[(y, h)]) in rel)
                if J.is_covering(e, s):
                    return False
    # (iii) local single-valuedness
    for (x, y) in rel:
        for (x2, y2) in rel:
            if x == x2:
                e = cat.dom[x]
                s = mask_of(h for h in cat.arrows_into(e)
                            if cat.comp[(y, h)] == cat.comp[(y2, h)])
                if not J.is_covering(e, s):
                    return False
    # (iv) local totality
    for e in cat.objects:
        for x in cat.hom(e, c):
            s = mask_of(h for h in cat.arrows_into(e)
                        if any((cat.comp[(x, h)], y) in rel
                               for y in cat.hom(cat.dom[h], d)))
            if not J.is_covering(e, s):
                return False
    return True


def _compose_CJ(cat: FinCategory, J: GrothendieckTopology,
                S: frozenset[tuple[int, int]], R: frozenset[tuple[int, int]],
                c: int, d: int, a: int) -> frozenset[tuple[int, int]]:
    """S * R for R: c -> d and S: d -> a, on pairs of arrows."""
    out = set()
    for e in cat.objects:
        for x in cat.hom(e, c):
            for z in cat.hom(e, a):
                s = mask_of(
                    h for h in cat.arrows_into(e)
                    if any((cat.comp[(x, h)], y) in R and (y, cat.comp[(z, h)]) in S
                           for y in cat.hom(cat.dom[h], d)))
                if J.is_covering(e, s):
                    out.add((x, z))
    return frozenset(out)


def build_CJ(cat: FinCategory, J: GrothendieckTopology) -> CJResult:
    """The category C_J: same objects, arrows c -> d are the collections of
    arrow pairs that are precomposition-closed, locally closed, locally
    single-valued and locally total, composed by the * formula."""
    homs = {}
    for c in cat.objects:
        for d in cat.objects:
            universe = _arrow_pair_universe(cat, c, d)
            if len(universe) > MAX_RELATION_PAIRS:
                raise SizeGuardError(
                    f"hom({c},{d}) pair universe has {len(universe)} entries")
            rels = []
            for k in range(len(universe) + 1):
                for combo in itertools.combinations(universe, k):
                    rel = frozenset(combo)
                    if _is_CJ_relation(cat, J, c, d, rel):
                        rels.append(rel)
            homs[(c, d)] = tuple(sorted(rels, key=sorted))

    arrow_decode = [(c, d, rel)
                    for c in cat.objects for d in cat.objects
                    for rel in homs[(c, d)]]
    arr_index = {t: i for i, t in enumerate(arrow_decode)}
    dom = tuple(t[0] for t in arrow_decode)
    cod = tuple(t[1] for t in arrow_decode)
    identities = []
    for c in cat.objects:
        ident = frozenset(
            (f, g) for e in cat.objects
            for f in cat.hom(e, c) for g in cat.hom(e, c)
            if J.is_covering(e, mask_of(
                h for h in cat.arrows_into(e)
                if cat.comp[(f, h)] == cat.comp[(g, h)])))
        identities.append(arr_index[(c, c, ident)])
    comp = {}
    for j, (d2, a, S) in enumerate(arrow_decode):
        for i, (c, d, R) in enumerate(arrow_decode):
            if d == d2:
                comp[(j, i)] = arr_index[(c, a, _compose_CJ(cat, J, S, R, c, d, a))]
    from .fincat import validate_category
    category = validate_category(
        cat.n_objects, list(zip(dom, cod)), identities, comp)
    return CJResult(cat, J, category,
                    tuple(homs[(c, d)] for c in cat.objects for d in cat.objects),
                    tuple(arrow_decode))


@dataclass(frozen=True)
class CJsResult:
    site_cat: FinCategory
    topology: GrothendieckTopology
    category: FinCategory
    objects: tuple[tuple[int, int], ...]      # (object, closed sieve mask)
    arrow_decode: tuple  # per arrow: (src_idx, dst_idx, relation frozenset)


def closed_sieves(cat: FinCategory, J: GrothendieckTopology, c: int) -> list[int]:
    from .sieves import all_sieve_masks
    return [s for s in all_sieve_masks(cat, c) if closure_mask(J, c, s) == s]


def _is_CJs_relation(cat: FinCategory, J: GrothendieckTopology,
                     S: int, T: int, c: int, d: int,
                     rel: frozenset[tuple[int, int]]) -> bool:
    for (x, y) in rel:
        if not ((S >> x) & 1 and (T >> y) & 1):
            return False
        for k in cat.arrows_into(cat.dom[x]):
            if (cat.comp[(x, k)], cat.comp[(y, k)]) not in rel:
                return False
    for x in bits(S):
        for y in bits(T):
            if cat.dom[x] != cat.dom[y] or (x, y) in rel:
                continue
            e = cat.dom[x]
            s = mask_of(h for h in cat.arrows_into(e)
                        if (cat.comp[(x, h)], cat.comp[(y, h)]) in rel)
            if J.is_covering(e, s):
                return False
    for (x, y) in rel:
        for (x2, y2) in rel:
            if x == x2:
                e = cat.dom[x]
                s = mask_of(h for h in cat.arrows_into(e)
                            if cat.comp[(y, h)] == cat.comp[(y2, h)])
                if not J.is_covering(e, s):
                    return False
    for x in bits(S):
        e = cat.dom[x]
        s = mask_of(h for h in cat.arrows_into(e)
                    if any((cat.comp[(x, h)], y) in rel
                           for y in cat.hom(cat.dom[h], d) if (T >> y) & 1))
        if not J.is_covering(e, s):
            return False
    return True


def build_CJs(cat: FinCategory, J: GrothendieckTopology) -> CJsResult:
    """The category C_J^s on pairs (c, J-closed sieve on c)."""
    objects = [(c, s) for c in cat.objects for s in closed_sieves(cat, J, c)]
    homs = {}
    for i, (c, S) in enumerate(objects):
        for j, (d, T) in enumerate(objects):
            universe = [(x, y) for x in bits(S) for y in bits(T)
                        if cat.dom[x] == cat.dom[y]]
            if len(universe) > MAX_RELATION_PAIRS:
                raise SizeGuardError(
                    f"hom-set pair universe has {len(universe)} entries")
            rels = []
            for k in range(len(universe) + 1):
                for combo in itertools.combinations(universe, k):
                    rel = frozenset(combo)
                    if _is_CJs_relation(cat, J, S, T, c, d, rel):
                        rels.append(rel)
            homs[(i, j)] = tuple(sorted(rels, key=sorted))

    arrow_decode = [(i, j, rel)
                    for i in range(len(objects)) for j in range(len(objects))
                    for rel in homs[(i, j)]]
    arr_index = {t: a for a, t in enumerate(arrow_decode)}
    dom = tuple(t[0] for t in arrow_decode)
    cod = tuple(t[1] for t in arrow_decode)
    identities = []
    for i, (c, S) in enumerate(objects):
        ident = frozenset(
            (x, y) for x in bits(S) for y in bits(S)
            if cat.dom[x] == cat.dom[y]
            and J.is_covering(cat.dom[x], mask_of(
                h for h in cat.arrows_into(cat.dom[x])
                if cat.comp[(x, h)] == cat.comp[(y, h)])))
        identities.append(arr_index[(i, i, ident)])
    comp = {}
    for b, (j2, k, S2) in enumerate(arrow_decode):
        for a, (i, j, R) in enumerate(arrow_decode):
            if j == j2:
                c, d, e = objects[i][0], objects[j][0], objects[k][0]
                out = set()
                for x in bits(objects[i][1]):
                    for z in bits(objects[k][1]):
                        if cat.dom[x] != cat.dom[z]:
                            continue
                        s = mask_of(
                            h for h in cat.arrows_into(cat.dom[x])
                            if any((cat.comp[(x, h)], y) in R
                                   and (y, cat.comp[(z, h)]) in S2
                                   for y in bits(objects[j][1])
                                   if cat.dom[y] == cat.dom[h]))
                        if J.is_covering(cat.dom[x], s):
                            out.add((x, z))
                comp[(b, a)] = arr_index[(i, k, frozenset(out))]
    from .fincat import validate_category
    category = validate_category(
        len(objects), list(zip(dom, cod)), identities, comp)
    return CJsResult(cat, J, category, tuple(objects), tuple(arrow_decode))


# ---------------------------------------------------------------------------
# colimits and categories of elements

def colimit_presheaf(shape: FinCategory, diagram: Sequence[FinPresheaf],
                     arrows: Sequence[PresheafMorphism]) -> tuple[FinPresheaf, list[list[tuple[int, ...]]]]:
    """Pointwise colimit of a diagram of presheaves; also returns, per shape
    object, the per-object leg maps into the colimit."""
    cat = diagram[0].cat
    offsets = []
    sizes = []
    classes: list[list[int]] = []
    for c in cat.objects:
        offs = []
        total = 0
        for i in shape.objects:
            offs.append(total)
            total += diagram[i].sizes[c]
        uf = _UnionFind(total)
        for u in shape.arrows:
            i, j = shape.dom[u], shape.cod[u]
            for x in range(diagram[i].sizes[c]):
                uf.union(offs[i] + x, offs[j] + arrows[u].at(c, x))
        roots: dict[int, int] = {}
        cls = []
        for k in range(total):
            r = uf.find(k)
            if r not in roots:
                roots[r] = len(roots)
            cls.append(roots[r])
        offsets.append(offs)
        sizes.append(len(roots))
        classes.append(cls)

    restrict = []
    for f in cat.arrows:
        a, b = cat.dom[f], cat.cod[f]
        row = [0] * sizes[b]
        for i in shape.objects:
            for x in range(diagram[i].sizes[b]):
                row[classes[b][offsets[b][i] + x]] = \
                    classes[a][offsets[a][i] + diagram[i].res(f, x)]
        restrict.append(tuple(row))
    colim = FinPresheaf(cat, tuple(sizes), tuple(restrict))
    legs = [[tuple(classes[c][offsets[c][i] + x]
                   for x in range(diagram[i].sizes[c]))
             for c in cat.objects]
            for i in shape.objects]
    return colim, legs


def colimit_of_representables(F: FinFunctor) -> tuple[FinPresheaf, list[list[tuple[int, ...]]]]:
    """colim(y∘F), via the explicit connected-component description of the
    pointwise colimit: (c, x: c -> F(a)) up to zig-zag in (c ↓ F)."""
    A, C = F.source, F.target
    diagram = [yoneda(C, F.on_obj(a)) for a in A.objects]
    arrows = []
    for u in A.arrows:
        a, b = A.dom[u], A.cod[u]
        comps = []
        for c in C.objects:
            comps.append(tuple(
                yoneda_element(C, F.on_obj(b), C.compose(F.on_arr(u), h))
                for h in C.hom(c, F.on_obj(a))))
        arrows.append(PresheafMorphism(diagram[a], diagram[b], tuple(comps)))
    return colimit_presheaf(A, diagram, arrows)


@dataclass(frozen=True)
class ElementsResult:
    category: FinCategory
    projection: FinFunctor
    objects: tuple[tuple[int, int], ...]  # (c, x in P(c))
    arrow_decode: tuple[tuple[int, int], ...]  # (f in base, target element x)


def category_of_elements(P: FinPresheaf) -> ElementsResult:
    """∫P with its canonical projection, a discrete fibration."""
    cat = P.cat
    objects = [(c, x) for c in cat.objects for x in range(P.sizes[c])]
    obj_index = {o: i for i, o in enumerate(objects)}
    arrow_decode = [(f, x) for f in cat.arrows for x in range(P.sizes[cat.cod[f]])]
    arr_index = {a: i for i, a in enumerate(arrow_decode)}
    dom = tuple(obj_index[(cat.dom[f], P.res(f, x))] for (f, x) in arrow_decode)
    cod = tuple(obj_index[(cat.cod[f], x)] for (f, x) in arrow_decode)
    identities = tuple(arr_index[(cat.identity[c], x)] for (c, x) in objects)
    comp = {}
    for j, (f, x) in enumerate(arrow_decode):
        for i, (g, y) in enumerate(arrow_decode):
            if cat.cod[g] == cat.dom[f] and y == P.res(f, x):
                comp[(j, i)] = arr_index[(cat.comp[(f, g)], x)]
    category = FinCategory(len(objects), dom, cod, identities, comp)
    projection = FinFunctor(category, cat,
                            tuple(o[0] for o in objects),
                            tuple(a[0] for a in arrow_decode))
    return ElementsResult(category, projection, tuple(objects), tuple(arrow_decode))


def elements_topology(P: FinPresheaf, J: GrothendieckTopology) -> tuple[ElementsResult, GrothendieckTopology]:
    """J_P on ∫P: sieves sent by the projection to J-covering families."""
    from .sieves import all_sieve_masks
    from .topology import validate_topology
    el = category_of_elements(P)
    cat = el.category
    covers = []
    for i in range(cat.n_objects):
        c = el.objects[i][0]
        good = []
        for s in all_sieve_masks(cat, i):
            image = mask_of(el.projection.on_arr(f) for f in bits(s))
            if J.is_covering(c, generate_mask(J.cat, image)):
                good.append(s)
        covers.append(frozenset(good))
    return el, validate_topology(cat, covers)


def family_locally_surjective(J: GrothendieckTopology,
                              morphisms: Sequence[PresheafMorphism],
                              target: FinPresheaf) -> bool:
    """Joint local surjectivity onto the target (joint epi after a_J)."""
    cat = target.cat
    images = [set() for _ in cat.objects]
    for m in morphisms:
        for c in cat.objects:
            images[c].update(m.components[c])
    for c in cat.objects:
        for y in range(target.sizes[c]):
            s = mask_of(f for f in cat.arrows_into(c)
                        if target.res(f, y) in images[cat.dom[f]])
            if not J.is_covering(c, s):
                return False
    return True
