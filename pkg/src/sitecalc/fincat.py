"""Finite categories, functors, comma categories and fibration machinery.

Objects and arrows are dense small integers.  A category stores its full
composition table, so every downstream decision procedure is a finite loop
of table lookups.  Everything is immutable after construction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

MAX_ARROWS = 1 << 16


class SizeGuardError(Exception):
    """A construction exceeded the documented resource guard."""


class CategoryError(Exception):
    """Raised with the full list of violated category laws."""

    def __init__(self, violations: Sequence[str]):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


@dataclass(frozen=True)
class FinCategory:
    n_objects: int
    dom: tuple[int, ...]
    cod: tuple[int, ...]
    identity: tuple[int, ...]
    comp: Mapping[tuple[int, int], int]  # (g, f) -> g∘f, keyed on composable pairs

    @property
    def n_arrows(self) -> int:
        return len(self.dom)

    @property
    def objects(self) -> range:
        return range(self.n_objects)

    @property
    def arrows(self) -> range:
        return range(self.n_arrows)

    def compose(self, g: int, f: int) -> int:
        """g∘f, defined when cod(f) = dom(g)."""
        try:
            return self.comp[(g, f)]
        except KeyError:
            raise ValueError(f"arrows {g} and {f} are not composable") from None

    def is_identity(self, f: int) -> bool:
        return self.identity[self.dom[f]] == f

    @cached_property
    def _into(self) -> tuple[tuple[int, ...], ...]:
        buckets: list[list[int]] = [[] for _ in self.objects]
        for f in self.arrows:
            buckets[self.cod[f]].append(f)
        return tuple(tuple(b) for b in buckets)

    @cached_property
    def _out_of(self) -> tuple[tuple[int, ...], ...]:
        buckets: list[list[int]] = [[] for _ in self.objects]
        for f in self.arrows:
            buckets[self.dom[f]].append(f)
        return tuple(tuple(b) for b in buckets)

    def arrows_into(self, c: int) -> tuple[int, ...]:
        return self._into[c]

    def arrows_out_of(self, c: int) -> tuple[int, ...]:
        return self._out_of[c]

    @cached_property
    def _hom(self) -> dict[tuple[int, int], tuple[int, ...]]:
        table: dict[tuple[int, int], list[int]] = {
            (a, b): [] for a in self.objects for b in self.objects}
        for f in self.arrows:
            table[(self.dom[f], self.cod[f])].append(f)
        return {k: tuple(v) for k, v in table.items()}

    def hom(self, a: int, b: int) -> tuple[int, ...]:
        return self._hom[(a, b)]

    @cached_property
    def isomorphisms(self) -> frozenset[int]:
        isos = set()
        for f in self.arrows:
            a, b = self.dom[f], self.cod[f]
            for g in self.hom(b, a):
                if (self.comp[(g, f)] == self.identity[a]
                        and self.comp[(f, g)] == self.identity[b]):
                    isos.add(f)
                    break
        return frozenset(isos)

    def is_iso(self, f: int) -> bool:
        return f in self.isomorphisms

    @cached_property
    def principal_sieves(self) -> tuple[int, ...]:
        """Per arrow f, the bitmask of ⟨f⟩ = {f∘z | z composable}."""
        masks = []
        for f in self.arrows:
            mask = 1 << f
            for z in self._into[self.dom[f]]:
                mask |= 1 << self.comp[(f, z)]
            masks.append(mask)
        return tuple(masks)

    def opposite(self) -> "FinCategory":
        return FinCategory(
            n_objects=self.n_objects,
            dom=self.cod,
            cod=self.dom,
            identity=self.identity,
            comp={(g, f): h for (f, g), h in self.comp.items()},
        )


def validate_category(
    n_objects: int,
    arrows: Sequence[tuple[int, int]],
    identities: Sequence[int],
    composition: Mapping[tuple[int, int], int],
) -> FinCategory:
    """Check all category laws; return the category or raise CategoryError
    listing every violated law instance."""
    if len(arrows) > MAX_ARROWS:
        raise SizeGuardError(f"{len(arrows)} arrows exceeds the limit {MAX_ARROWS}")
    violations: list[str] = []
    n_arrows = len(arrows)
    dom = tuple(a for a, _ in arrows)
    cod = tuple(b for _, b in arrows)

    for f, (a, b) in enumerate(arrows):
        if not (0 <= a < n_objects and 0 <= b < n_objects):
            violations.append(f"arrow {f} has endpoints ({a}, {b}) outside [0, {n_objects})")
    if violations:
        raise CategoryError(violations)

    if len(identities) != n_objects:
        violations.append(f"expected {n_objects} identities, got {len(identities)}")
        raise CategoryError(violations)
    for c, i in enumerate(identities):
        if not (0 <= i < n_arrows) or dom[i] != c or cod[i] != c:
            violations.append(f"missing identity: identity of object {c} is not an arrow {c} -> {c}")

    for (g, f), h in composition.items():
        if not (0 <= f < n_arrows and 0 <= g < n_arrows and 0 <= h < n_arrows):
            violations.append(f"composition entry ({g}, {f}) = {h} mentions unknown arrows")
            continue
        if cod[f] != dom[g]:
            violations.append(f"composition outside hom-sets: ({g}, {f}) not composable")
            continue
        if dom[h] != dom[f] or cod[h] != cod[g]:
            violations.append(
                f"dom/cod mismatch: {g}∘{f} = {h} but {h}: {dom[h]} -> {cod[h]}, "
                f"expected {dom[f]} -> {cod[g]}")
    for g in range(n_arrows):
        for f in range(n_arrows):
            if cod[f] == dom[g] and (g, f) not in composition:
                violations.append(f"missing composite for composable pair ({g}, {f})")
    if violations:
        raise CategoryError(violations)

    comp = dict(composition)
    for f in range(n_arrows):
        if comp[(f, identities[dom[f]])] != f:
            violations.append(f"identity law broken: {f}∘id_{dom[f]} != {f}")
        if comp[(identities[cod[f]], f)] != f:
            violations.append(f"identity law broken: id_{cod[f]}∘{f} != {f}")
    for h in range(n_arrows):
        for g in range(n_arrows):
            if cod[g] != dom[h]:
                continue
            hg = comp[(h, g)]
            for f in range(n_arrows):
                if cod[f] != dom[g]:
                    continue
                if comp[(hg, f)] != comp[(h, comp[(g, f)])]:
                    violations.append(f"non-associative triple ({h}, {g}, {f})")
    if violations:
        raise CategoryError(violations)
    return FinCategory(n_objects, dom, cod, tuple(identities), comp)


def terminal_category() -> FinCategory:
    return validate_category(1, [(0, 0)], [0], {(0, 0): 0})


def discrete_category(n: int) -> FinCategory:
    return validate_category(n, [(c, c) for c in range(n)], list(range(n)),
                             {(c, c): c for c in range(n)})


def poset_category(n: int, le: Sequence[tuple[int, int]]) -> FinCategory:
    """Category of a preorder: one arrow a -> b per related pair.

    `le` lists the related pairs; reflexivity is added and transitivity
    closed automatically, so any relation gives its preorder closure.
    """
    rel = {(a, a) for a in range(n)} | set(le)
    changed = True
    while changed:
        changed = False
        for (a, b), (b2, c) in itertools.product(list(rel), list(rel)):
            if b == b2 and (a, c) not in rel:
                rel.add((a, c))
                changed = True
    pairs = sorted(rel)
    index = {p: i for i, p in enumerate(pairs)}
    comp = {}
    for j, (b, c) in enumerate(pairs):
        for i, (a, b2) in enumerate(pairs):
            if b2 == b:
                comp[(j, i)] = index[(a, c)]
    return validate_category(n, pairs, [index[(a, a)] for a in range(n)], comp)


def monoid_category(mult: Sequence[Sequence[int]], unit: int) -> FinCategory:
    """One-object category from a finite monoid multiplication table."""
    n = len(mult)
    comp = {(g, f): mult[g][f] for g in range(n) for f in range(n)}
    return validate_category(1, [(0, 0)] * n, [unit], comp)


@dataclass(frozen=True)
class FinFunctor:
    source: FinCategory
    target: FinCategory
    obj_map: tuple[int, ...]
    arr_map: tuple[int, ...]

    def __post_init__(self):
        src, tgt = self.source, self.target
        if len(self.obj_map) != src.n_objects or len(self.arr_map) != src.n_arrows:
            raise CategoryError(["functor maps have wrong length"])
        bad = []
        for f in src.arrows:
            ff = self.arr_map[f]
            if tgt.dom[ff] != self.obj_map[src.dom[f]] or tgt.cod[ff] != self.obj_map[src.cod[f]]:
                bad.append(f"functor breaks dom/cod at arrow {f}")
        for c in src.objects:
            if self.arr_map[src.identity[c]] != tgt.identity[self.obj_map[c]]:
                bad.append(f"functor breaks identity at object {c}")
        for (g, f), h in src.comp.items():
            if tgt.compose(self.arr_map[g], self.arr_map[f]) != self.arr_map[h]:
                bad.append(f"functor breaks composition at pair ({g}, {f})")
        if bad:
            raise CategoryError(bad)

    def on_obj(self, c: int) -> int:
        return self.obj_map[c]

    def on_arr(self, f: int) -> int:
        return self.arr_map[f]

    def then(self, other: "FinFunctor") -> "FinFunctor":
        """other ∘ self."""
        if self.target is not other.source and self.target != other.source:
            raise ValueError("functors not composable")
        return FinFunctor(self.source, other.target,
                          tuple(other.obj_map[c] for c in self.obj_map),
                          tuple(other.arr_map[f] for f in self.arr_map))

    @cached_property
    def image_objects(self) -> frozenset[int]:
        return frozenset(self.obj_map)

    def is_full(self) -> bool:
        for a in self.source.objects:
            for b in self.source.objects:
                image = {self.arr_map[f] for f in self.source.hom(a, b)}
                if set(self.target.hom(self.obj_map[a], self.obj_map[b])) - image:
                    return False
        return True

    def is_faithful(self) -> bool:
        for a in self.source.objects:
            for b in self.source.objects:
                hom = self.source.hom(a, b)
                if len({self.arr_map[f] for f in hom}) != len(hom):
                    return False
        return True


def identity_functor(cat: FinCategory) -> FinFunctor:
    return FinFunctor(cat, cat, tuple(cat.objects), tuple(cat.arrows))


@dataclass(frozen=True)
class CommaCategory:
    """(F ↓ G): objects are triples (a, b, α: F(a) -> G(b)), arrows are
    component pairs commuting with the α's."""
    category: FinCategory
    objects: tuple[tuple[int, int, int], ...]
    arrow_data: tuple[tuple[int, int, int, int], ...]  # (src_idx, dst_idx, u, v)
    left_projection: FinFunctor
    right_projection: FinFunctor

    def object_index(self, triple: tuple[int, int, int]) -> int:
        return self.objects.index(triple)


def comma(F: FinFunctor, G: FinFunctor, max_objects: int | None = None) -> CommaCategory:
    if F.target != G.target:
        raise ValueError("comma categories need functors with a common target")
    C = F.target
    A, B = F.source, G.source
    objects = [(a, b, alpha)
               for a in A.objects for b in B.objects
               for alpha in C.hom(F.on_obj(a), G.on_obj(b))]
    if max_objects is not None and len(objects) > max_objects:
        raise SizeGuardError(f"comma category has {len(objects)} objects (budget {max_objects})")
    obj_index = {o: i for i, o in enumerate(objects)}

    arrow_data = []
    for si, (a, b, alpha) in enumerate(objects):
        for u in A.arrows_out_of(a):
            for v in B.arrows_out_of(b):
                a2, b2 = A.cod[u], B.cod[v]
                for alpha2 in C.hom(F.on_obj(a2), G.on_obj(b2)):
                    if C.compose(G.on_arr(v), alpha) == C.compose(alpha2, F.on_arr(u)):
                        arrow_data.append((si, obj_index[(a2, b2, alpha2)], u, v))
    if len(arrow_data) > MAX_ARROWS:
        raise SizeGuardError(f"comma category has {len(arrow_data)} arrows")
    arr_index = {d: i for i, d in enumerate(arrow_data)}

    dom = tuple(d[0] for d in arrow_data)
    cod = tuple(d[1] for d in arrow_data)
    identities = tuple(
        arr_index[(i, i, A.identity[a], B.identity[b])]
        for i, (a, b, _) in enumerate(objects))
    comp_table = {}
    for j, (s2, t2, u2, v2) in enumerate(arrow_data):
        for i, (s1, t1, u1, v1) in enumerate(arrow_data):
            if t1 == s2:
                comp_table[(j, i)] = arr_index[(s1, t2, A.compose(u2, u1), B.compose(v2, v1))]
    cat = FinCategory(len(objects), dom, cod, identities, comp_table)
    left = FinFunctor(cat, A,
                      tuple(o[0] for o in objects),
                      tuple(d[2] for d in arrow_data))
    right = FinFunctor(cat, B,
                       tuple(o[1] for o in objects),
                       tuple(d[3] for d in arrow_data))
    return CommaCategory(cat, tuple(objects), tuple(arrow_data), left, right)


def full_subcategory(cat: FinCategory, objects: Sequence[int]) -> tuple[FinCategory, FinFunctor]:
    """The full subcategory on the given objects, with its inclusion."""
    objects = list(objects)
    obj_index = {c: i for i, c in enumerate(objects)}
    arrows = [f for f in cat.arrows
              if cat.dom[f] in obj_index and cat.cod[f] in obj_index]
    arr_index = {f: i for i, f in enumerate(arrows)}
    sub = FinCategory(
        len(objects),
        tuple(obj_index[cat.dom[f]] for f in arrows),
        tuple(obj_index[cat.cod[f]] for f in arrows),
        tuple(arr_index[cat.identity[c]] for c in objects),
        {(arr_index[g], arr_index[f]): arr_index[cat.comp[(g, f)]]
         for g in arrows for f in arrows if cat.cod[f] == cat.dom[g]},
    )
    inclusion = FinFunctor(sub, cat, tuple(objects), tuple(arrows))
    return sub, inclusion


def quotient_by_functor_congruence(F: FinFunctor) -> tuple[FinCategory, FinFunctor, FinFunctor]:
    """Quotient of the source by the hom-set congruence g ~ g' iff F(g) = F(g')
    (parallel arrows only).  Returns (quotient, projection, induced functor),
    with the induced functor satisfying induced ∘ projection = F."""
    cat = F.source
    classes: dict[tuple[int, int, int], int] = {}
    arr_class = []
    for f in cat.arrows:
        key = (cat.dom[f], cat.cod[f], F.on_arr(f))
        if key not in classes:
            classes[key] = len(classes)
        arr_class.append(classes[key])
    n = len(classes)
    dom = [0] * n
    cod = [0] * n
    rep = [0] * n
    for f in cat.arrows:
        k = arr_class[f]
        dom[k], cod[k], rep[k] = cat.dom[f], cat.cod[f], f
    comp = {}
    for (g, f), h in cat.comp.items():
        comp[(arr_class[g], arr_class[f])] = arr_class[h]
    quotient = FinCategory(cat.n_objects, tuple(dom), tuple(cod),
                           tuple(arr_class[cat.identity[c]] for c in cat.objects),
                           comp)
    projection = FinFunctor(cat, quotient, tuple(cat.objects), tuple(arr_class))
    induced = FinFunctor(quotient, F.target, F.obj_map,
                         tuple(F.on_arr(rep[k]) for k in range(n)))
    return quotient, projection, induced


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int) -> None:
        self.parent[self.find(i)] = self.find(j)


def connected_components(cat: FinCategory) -> tuple[frozenset[int], ...]:
    """Zig-zag equivalence classes of objects."""
    uf = _UnionFind(cat.n_objects)
    for f in cat.arrows:
        uf.union(cat.dom[f], cat.cod[f])
    groups: dict[int, set[int]] = {}
    for c in cat.objects:
        groups.setdefault(uf.find(c), set()).add(c)
    return tuple(frozenset(g) for g in sorted(groups.values(), key=min))


def _cocones_into(shape: FinCategory, diagram: FinFunctor, d: int) -> Iterable[dict[int, int]]:
    """All cocones from the diagram to vertex d, by backtracking."""
    C = diagram.target
    shape_objs = list(shape.objects)

    def extend(i: int, legs: dict[int, int]):
        if i == len(shape_objs):
            yield dict(legs)
            return
        obj = shape_objs[i]
        for leg in C.hom(diagram.on_obj(obj), d):
            legs[obj] = leg
            ok = True
            for u in shape.arrows:
                a, b = shape.dom[u], shape.cod[u]
                if a in legs and b in legs:
                    if C.compose(legs[b], diagram.on_arr(u)) != legs[a]:
                        ok = False
                        break
            if ok:
                yield from extend(i + 1, legs)
            del legs[obj]

    yield from extend(0, {})


def is_colimit_cocone(
    diagram: FinFunctor,
    vertex: int,
    legs: Mapping[int, int],
) -> tuple[bool, dict | None]:
    """Universal-property check: every cocone factors uniquely through the vertex.

    Returns (True, None) or (False, witness) where the witness names the
    object and cocone at which mediation fails.
    """
    shape, C = diagram.source, diagram.target
    for i in shape.objects:
        f = legs[i]
        if C.dom[f] != diagram.on_obj(i) or C.cod[f] != vertex:
            raise ValueError(f"leg at {i} is not an arrow D({i}) -> vertex")
    for u in shape.arrows:
        a, b = shape.dom[u], shape.cod[u]
        if C.compose(legs[b], diagram.on_arr(u)) != legs[a]:
            raise ValueError(f"legs do not form a cocone: fails at shape arrow {u}")

    for d in C.objects:
        for mu in _cocones_into(shape, diagram, d):
            mediators = [h for h in C.hom(vertex, d)
                         if all(C.compose(h, legs[i]) == mu[i] for i in shape.objects)]
            if len(mediators) != 1:
                return False, {"object": d, "cocone": mu, "mediators": mediators}
    return True, None


def is_cartesian(p: FinFunctor, phi: int) -> bool:
    """Street cartesianness of phi: c' -> c relative to p: unique fillers for
    all (psi, g) with p(phi)∘g = p(psi)."""
    C, D = p.source, p.target
    c1, c = C.dom[phi], C.cod[phi]
    for c2 in C.objects:
        for psi in C.hom(c2, c):
            for g in D.hom(p.on_obj(c2), p.on_obj(c1)):
                if D.compose(p.on_arr(phi), g) != p.on_arr(psi):
                    continue
                fillers = [chi for chi in C.hom(c2, c1)
                           if C.compose(phi, chi) == psi and p.on_arr(chi) == g]
                if len(fillers) != 1:
                    return False
    return True


def cartesian_arrows(p: FinFunctor) -> frozenset[int]:
    cached = p.__dict__.get("_cartesian_arrows")
    if cached is None:
        cached = frozenset(f for f in p.source.arrows if is_cartesian(p, f))
        p.__dict__["_cartesian_arrows"] = cached
    return cached


def vertical_arrows(p: FinFunctor) -> frozenset[int]:
    cached = p.__dict__.get("_vertical_arrows")
    if cached is None:
        cached = frozenset(f for f in p.source.arrows if p.target.is_iso(p.on_arr(f)))
        p.__dict__["_vertical_arrows"] = cached
    return cached


def is_fibration(p: FinFunctor) -> tuple[bool, dict | None]:
    """Street fibration: every f: d -> p(c) lifts to a cartesian arrow up to
    an isomorphism α with f∘α = p(φ).  Returns a missing-lift witness."""
    cached = p.__dict__.get("_is_fibration")
    if cached is not None:
        return cached
    result = _is_fibration_uncached(p)
    p.__dict__["_is_fibration"] = result
    return result


def _is_fibration_uncached(p: FinFunctor) -> tuple[bool, dict | None]:
    C, D = p.source, p.target
    cart = cartesian_arrows(p)
    for c in C.objects:
        for d in D.objects:
            for f in D.hom(d, p.on_obj(c)):
                if not any(
                    D.compose(f, alpha) == p.on_arr(phi)
                    for phi in cart if C.cod[phi] == c
                    for alpha in D.hom(p.on_obj(C.dom[phi]), d)
                    if D.is_iso(alpha)
                ):
                    return False, {"object": c, "arrow": f}
    return True, None


def cartesian_vertical_factor(p: FinFunctor, u: int) -> tuple[int, int]:
    """Factor u = φ∘v with v vertical and φ cartesian; ties broken by the
    lexicographically least (φ, v).  Requires p to be a fibration."""
    ok, witness = is_fibration(p)
    if not ok:
        raise ValueError(f"cartesian_vertical_factor needs a fibration: no lift at {witness}")
    C = p.source
    cart = cartesian_arrows(p)
    vert = vertical_arrows(p)
    best = None
    for phi in sorted(cart):
        if C.cod[phi] != C.cod[u]:
            continue
        for v in sorted(vert):
            if C.dom[v] == C.dom[u] and C.cod[v] == C.dom[phi] and C.compose(phi, v) == u:
                if best is None or (phi, v) < best:
                    best = (phi, v)
    if best is None:
        raise AssertionError("fibration without a vertical-cartesian factorization")
    phi, v = best
    return v, phi
