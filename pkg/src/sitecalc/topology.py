"""Grothendieck topologies on finite categories, stored as explicit
per-object families of covering sieves.

Explicit storage makes every axiom and every downstream classifier a finite
loop; generation is worklist saturation over bitmask sieves with a size
guard that fails fast.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

from .fincat import FinCategory, FinFunctor, SizeGuardError, cartesian_arrows, is_fibration
from .sieves import (
    Sieve,
    all_sieve_masks,
    bits,
    generate_mask,
    is_sieve_mask,
    mask_of,
    maximal_sieve_mask,
    preimage_mask,
    pullback_mask,
)

MAX_STORED_SIEVES = 1 << 20


class TopologyError(Exception):
    def __init__(self, violations):
        super().__init__("; ".join(str(v) for v in violations))
        self.violations = list(violations)


@dataclass(frozen=True)
class GrothendieckTopology:
    cat: FinCategory
    covers: tuple[frozenset[int], ...]  # per object: the covering sieve masks

    def is_covering(self, c: int, mask: int) -> bool:
        return mask in self.covers[c]

    def covers_family(self, c: int, mask: int) -> bool:
        """A family of arrows is covering when the sieve it generates is."""
        return generate_mask(self.cat, mask) in self.covers[c]

    def covering_sieves(self, c: int) -> frozenset[int]:
        return self.covers[c]

    @cached_property
    def min_cover(self) -> tuple[int, ...]:
        """Least covering sieve per object (covering sieves are closed under
        finite intersection)."""
        out = []
        for c in self.cat.objects:
            m = maximal_sieve_mask(self.cat, c)
            for s in self.covers[c]:
                m &= s
            out.append(m)
        return tuple(out)

    def __le__(self, other: "GrothendieckTopology") -> bool:
        return all(a <= b for a, b in zip(self.covers, other.covers))


def _axiom_violations(cat: FinCategory, covers) -> list[dict]:
    violations = []
    for c in cat.objects:
        if maximal_sieve_mask(cat, c) not in covers[c]:
            violations.append({"axiom": "maximality", "object": c})
    for c in cat.objects:
        for s in covers[c]:
            for f in cat.arrows_into(c):
                pb = pullback_mask(cat, s, f)
                if pb not in covers[cat.dom[f]]:
                    violations.append(
                        {"axiom": "stability", "object": c, "sieve": s, "arrow": f, "pullback": pb})
    for c in cat.objects:
        non_covering = [s for s in all_sieve_masks(cat, c) if s not in covers[c]]
        for s in non_covering:
            for t in covers[c]:
                if all(pullback_mask(cat, s, f) in covers[cat.dom[f]] for f in bits(t)):
                    violations.append(
                        {"axiom": "transitivity", "object": c, "sieve": s, "via": t})
                    break
    return violations


def validate_topology(cat: FinCategory, covers) -> GrothendieckTopology:
    """Check the three axioms; return the topology or raise TopologyError
    reporting every violation with witnesses."""
    covers = tuple(frozenset(f) for f in covers)
    if len(covers) != cat.n_objects:
        raise ValueError("need one family of sieves per object")
    for c in cat.objects:
        for s in covers[c]:
            if not is_sieve_mask(cat, c, s):
                raise ValueError(f"mask {s:#x} on object {c} is not a sieve")
    violations = _axiom_violations(cat, covers)
    if violations:
        raise TopologyError(violations)
    return GrothendieckTopology(cat, covers)


def trivial_topology(cat: FinCategory) -> GrothendieckTopology:
    return GrothendieckTopology(
        cat, tuple(frozenset({maximal_sieve_mask(cat, c)}) for c in cat.objects))


def atomic_topology(cat: FinCategory) -> GrothendieckTopology:
    """All nonempty sieves; defined only when these satisfy the axioms
    (a right-Ore-type condition), otherwise raises TopologyError."""
    covers = tuple(
        frozenset(s for s in all_sieve_masks(cat, c) if s != 0) for c in cat.objects)
    return validate_topology(cat, covers)


def rigid_topology(inclusion: FinFunctor) -> GrothendieckTopology:
    """R_i for a full subcategory inclusion i: sieves on c covering iff they
    contain every arrow from an object of the form i(d)."""
    cat = inclusion.target
    image = inclusion.image_objects
    covers = []
    for c in cat.objects:
        required = mask_of(f for f in cat.arrows_into(c) if cat.dom[f] in image)
        covers.append(frozenset(
            s for s in all_sieve_masks(cat, c) if s & required == required))
    return validate_topology(cat, covers)


def _is_effective_epi(cat: FinCategory, c: int, mask: int) -> bool:
    """Hom(c, e) -> {compatible cocones under the sieve's diagram} bijective
    for every e."""
    members = list(bits(mask))
    for e in cat.objects:
        homs = cat.hom(c, e)
        seen = set()
        for h in homs:
            key = tuple(cat.comp[(h, f)] for f in members)
            if key in seen:
                return False  # restriction not injective
            seen.add(key)
        # cocones under the diagram of the sieve = matching families of
        # arrows; injectivity plus equal counts gives bijectivity
        if _count_arrow_cocones(cat, c, members, e) != len(homs):
            return False
    return True


def _count_arrow_cocones(cat: FinCategory, c: int, members: list[int], e: int) -> int:
    """Number of families (u_f: dom f -> e)_{f in S} with u_{f∘z} = u_f∘z."""

    def extend(i: int, assign: dict[int, int]) -> int:
        if i == len(members):
            return 1
        f = members[i]
        forced = None
        # u_f may be forced by an earlier assignment via f = g∘z
        for g, ug in assign.items():
            for z in cat.arrows_into(cat.dom[g]):
                if cat.comp[(g, z)] == f:
                    val = cat.comp[(ug, z)]
                    if forced is not None and forced != val:
                        return 0
                    forced = val
        candidates = [forced] if forced is not None else cat.hom(cat.dom[f], e)
        total = 0
        for u in candidates:
            ok = all(cat.comp[(u, z)] == u
                     for z in cat.arrows_into(cat.dom[f])
                     if cat.comp[(f, z)] == f)
            for g, ug in assign.items():
                if not ok:
                    break
                for z in cat.arrows_into(cat.dom[f]):
                    if cat.comp[(f, z)] == g and cat.comp[(u, z)] != ug:
                        ok = False
                        break
                if not ok:
                    break
                for z in cat.arrows_into(cat.dom[f]):
                    for w in cat.arrows_into(cat.dom[g]):
                        if cat.dom[z] == cat.dom[w] and cat.comp[(f, z)] == cat.comp[(g, w)]:
                            if cat.comp[(u, z)] != cat.comp[(ug, w)]:
                                ok = False
                                break
                    if not ok:
                        break
                if not ok:
                    break
            if ok:
                assign[f] = u
                total += extend(i + 1, assign)
                del assign[f]
        return total

    return extend(0, {})


def canonical_topology(cat: FinCategory) -> GrothendieckTopology:
    """Covering sieves are the universally effective-epimorphic ones."""
    covers = []
    for c in cat.objects:
        good = []
        for s in all_sieve_masks(cat, c):
            if all(_is_effective_epi(cat, cat.dom[f], pullback_mask(cat, s, f))
                   for f in cat.arrows_into(c)):
                good.append(s)
        covers.append(frozenset(good))
    return validate_topology(cat, covers)


def generate_topology(cat: FinCategory, base, max_sieves: int = MAX_STORED_SIEVES) -> GrothendieckTopology:
    """Least topology whose covers include the given (object, sieve-mask)
    pairs: closes under maximality, pullback stability and transitivity."""
    covers: list[set[int]] = [set() for _ in cat.objects]
    for c in cat.objects:
        covers[c].add(maximal_sieve_mask(cat, c))
    for c, mask in base:
        if not is_sieve_mask(cat, c, mask):
            raise ValueError(f"base mask {mask:#x} on object {c} is not a sieve")
        covers[c].add(mask)

    sieves = [all_sieve_masks(cat, c) for c in cat.objects]
    changed = True
    while changed:
        changed = False
        for c in cat.objects:
            for s in list(covers[c]):
                for f in cat.arrows_into(c):
                    pb = pullback_mask(cat, s, f)
                    if pb not in covers[cat.dom[f]]:
                        covers[cat.dom[f]].add(pb)
                        changed = True
        for c in cat.objects:
            for s in sieves[c]:
                if s in covers[c]:
                    continue
                for t in covers[c]:
                    if all(pullback_mask(cat, s, f) in covers[cat.dom[f]] for f in bits(t)):
                        covers[c].add(s)
                        changed = True
                        break
        if sum(len(x) for x in covers) > max_sieves:
            raise SizeGuardError(f"generated topology exceeds {max_sieves} stored sieves")
    return GrothendieckTopology(cat, tuple(frozenset(x) for x in covers))


def join_topologies(j1: GrothendieckTopology, j2: GrothendieckTopology) -> GrothendieckTopology:
    base = [(c, s) for c in j1.cat.objects for s in (j1.covers[c] | j2.covers[c])]
    return generate_topology(j1.cat, base)


def induced_topology(F: FinFunctor, K: GrothendieckTopology) -> GrothendieckTopology:
    """J_F on the source: sieves whose image generates a K-covering sieve.
    Validates the axioms; failure signals that F is not a morphism of sites
    from any topology on its source."""
    cat = F.source
    covers = []
    for c in cat.objects:
        covers.append(frozenset(
            s for s in all_sieve_masks(cat, c)
            if K.is_covering(F.on_obj(c),
                             generate_mask(F.target, mask_of(F.on_arr(f) for f in bits(s))))))
    return validate_topology(cat, covers)


def coinduced_topology(F: FinFunctor, J: GrothendieckTopology) -> GrothendieckTopology:
    """J^F on the target: T covers d iff every arrow ξ: F(c) -> d pulls T
    back to something containing the F-image of a J-covering sieve."""
    src, tgt = F.source, F.target
    covers = []
    for d in tgt.objects:
        good = []
        for t in all_sieve_masks(tgt, d):
            ok = True
            for c in src.objects:
                for xi in tgt.hom(F.on_obj(c), d):
                    lifted = preimage_mask(F, pullback_mask(tgt, t, xi), c)
                    if not J.is_covering(c, lifted):
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                good.append(t)
        covers.append(frozenset(good))
    return validate_topology(tgt, covers)


def smallest_comorphism_topology(A: FinFunctor, K: GrothendieckTopology) -> GrothendieckTopology:
    """M^A_K, generated by the sieves S^A_R for R a K-covering sieve on A(c)."""
    base = [(c, preimage_mask(A, r, c))
            for c in A.source.objects
            for r in K.covers[A.on_obj(c)]]
    return generate_topology(A.source, base)


def fibration_topology(p: FinFunctor, K: GrothendieckTopology) -> GrothendieckTopology:
    """M^p_K by its direct characterization for fibrations: R covers iff the
    cartesian arrows in R are sent by p to a K-covering family."""
    ok, witness = is_fibration(p)
    if not ok:
        raise ValueError(f"not a fibration: no cartesian lift at {witness}")
    cat = p.source
    cart = mask_of(cartesian_arrows(p))
    covers = []
    for c in cat.objects:
        good = []
        for s in all_sieve_masks(cat, c):
            image = mask_of(p.on_arr(f) for f in bits(s & cart))
            if K.is_covering(p.on_obj(c), generate_mask(p.target, image)):
                good.append(s)
        covers.append(frozenset(good))
    return validate_topology(cat, covers)


def local_equality(J: GrothendieckTopology, h: int, k: int) -> bool:
    """h ≡_J k: the arrows agree after precomposition with a covering sieve."""
    cat = J.cat
    if cat.dom[h] != cat.dom[k] or cat.cod[h] != cat.cod[k]:
        raise ValueError("local equality needs parallel arrows")
    agree = mask_of(f for f in cat.arrows_into(cat.dom[h])
                    if cat.comp[(h, f)] == cat.comp[(k, f)])
    return agree in J.covers[cat.dom[h]]


def sieve_J_closure(J: GrothendieckTopology, s: Sieve) -> Sieve:
    """{f | f*(S) is J-covering}; a closure operator on sieves."""
    cat = J.cat
    mask = mask_of(
        f for f in cat.arrows_into(s.codomain)
        if J.is_covering(cat.dom[f], pullback_mask(cat, s.arrows, f)))
    return Sieve(cat, s.codomain, mask)


def closure_mask(J: GrothendieckTopology, c: int, mask: int) -> int:
    cat = J.cat
    return mask_of(
        f for f in cat.arrows_into(c)
        if J.is_covering(cat.dom[f], pullback_mask(cat, mask, f)))


def is_subcanonical(J: GrothendieckTopology) -> bool:
    return J <= canonical_topology(J.cat)


def enumerate_topologies(cat: FinCategory) -> list[GrothendieckTopology]:
    """All topologies, by brute force; restricted to categories with at most
    4 arrows per object (doubly exponential beyond that)."""
    if any(len(cat.arrows_into(c)) > 4 for c in cat.objects):
        raise SizeGuardError("topology enumeration needs <= 4 arrows per object")
    per_object = []
    for c in cat.objects:
        sieves = all_sieve_masks(cat, c)
        maximal = maximal_sieve_mask(cat, c)
        rest = [s for s in sieves if s != maximal]
        families = []
        for k in range(len(rest) + 1):
            for chosen in itertools.combinations(rest, k):
                fam = set(chosen) | {maximal}
                # upward closure among sieves is necessary, prune early
                if all(t in fam for s in fam for t in sieves if s & ~t == 0):
                    families.append(frozenset(fam))
        per_object.append(families)
    out = []
    for combo in itertools.product(*per_object):
        if not _axiom_violations(cat, combo):
            out.append(GrothendieckTopology(cat, tuple(combo)))
    return out
