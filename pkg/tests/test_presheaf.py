import itertools

from sitecalc.fincat import FinFunctor, poset_category, terminal_category
from sitecalc.presheaf import (
    FunctionalRelation,
    PresheafMorphism,
    SubPresheaf,
    arrow_to_relation,
    build_CJ,
    build_CJs,
    category_of_elements,
    closure_cJ,
    colimit_of_representables,
    compose_relations,
    constant_presheaf,
    elem_locally_equal,
    enumerate_presheaf_morphisms,
    graph_relation,
    identity_morphism,
    identity_relation,
    is_bicovering,
    is_sheaf,
    relation_is_epi,
    relation_is_mono,
    relation_to_arrow,
    sheaf_comparison,
    sheafify,
    sheafify_morphism,
    sheafify_plus_plus,
    sieve_subpresheaf,
    subpresheaves,
    validate_functional_relation,
    yoneda,
)
from sitecalc.sieves import bits, mask_of, maximal_sieve_mask
from sitecalc.topology import (
    atomic_topology,
    canonical_topology,
    generate_topology,
    trivial_topology,
)

from conftest import random_category, random_presheaf, random_topology


def test_every_presheaf_is_trivial_sheaf(rng):
    for _ in range(10):
        cat = random_category(rng)
        P = random_presheaf(rng, cat)
        ok, _ = is_sheaf(P, trivial_topology(cat))
        assert ok


def test_representables_on_two_atomic(two):
    J = atomic_topology(two)
    ok1, _ = is_sheaf(yoneda(two, 1), J)
    assert ok1
    ok0, witness = is_sheaf(yoneda(two, 0), J)
    assert not ok0
    assert witness["object"] == 1 and witness["amalgamations"] == []


def test_constant_presheaf_on_disconnected_cover_site():
    """A two-element constant presheaf fails the sheaf condition at a
    disconnected covering sieve (the locally-connected phenomenon)."""
    cospan = poset_category(3, [(0, 2), (1, 2)])
    legs = mask_of(f for f in cospan.arrows_into(2) if cospan.dom[f] in (0, 1))
    J = generate_topology(cospan, [(2, legs)])
    ok, witness = is_sheaf(constant_presheaf(cospan, 2), J)
    assert not ok
    assert len(witness["amalgamations"]) != 1


def test_closure_cJ(two, rng):
    J = atomic_topology(two)
    E = yoneda(two, 1)
    full = SubPresheaf(E, tuple(frozenset(range(E.sizes[c])) for c in two.objects))
    assert closure_cJ(full, J).members == full.members
    for _ in range(15):
        cat = random_category(rng)
        Jr = random_topology(rng, cat)
        P = random_presheaf(rng, cat)
        for A in subpresheaves(P)[:6]:
            assert closure_cJ(A, trivial_topology(cat)).members == A.members
            closed = closure_cJ(A, Jr)
            assert closure_cJ(closed, Jr).members == closed.members  # idempotent


def test_bicovering_identity(rng):
    for _ in range(8):
        cat = random_category(rng)
        P = random_presheaf(rng, cat)
        J = random_topology(rng, cat)
        assert is_bicovering(identity_morphism(P), J)


def test_covering_sieve_inclusion_is_bicovering(rng):
    for _ in range(12):
        cat = random_category(rng)
        J = random_topology(rng, cat)
        c = rng.randrange(cat.n_objects)
        for s in J.covers[c]:
            sub = sieve_subpresheaf(cat, c, s)
            carrier, elems = sub.as_presheaf()
            Y = yoneda(cat, c)
            incl = PresheafMorphism(carrier, Y, tuple(
                tuple(elems[e]) for e in cat.objects))
            assert is_bicovering(incl, J)


def test_bicovering_agrees_with_sheafified_iso(rng):
    """Random morphisms: bicovering iff a_J of the morphism is bijective."""
    for _ in range(12):
        cat = random_category(rng)
        J = random_topology(rng, cat)
        P = random_presheaf(rng, cat)
        Q = random_presheaf(rng, cat)
        morphisms = enumerate_presheaf_morphisms(P, Q)
        if not morphisms:
            continue
        alpha = rng.choice(morphisms)
        shP, shQ = sheafify(P, J), sheafify(Q, J)
        a_alpha = sheafify_morphism(alpha, shP, shQ)
        assert is_bicovering(alpha, J) == a_alpha.is_bijective()


def test_sheafify_on_sheaf_is_iso(rng):
    for _ in range(12):
        cat = random_category(rng)
        J = random_topology(rng, cat)
        P = random_presheaf(rng, cat)
        sh = sheafify(P, J)
        ok, _ = is_sheaf(sh.sheaf, J)
        assert ok
        assert is_bicovering(sh.unit, J)
        if is_sheaf(P, J)[0]:
            assert sh.unit.is_bijective()


def test_sheafify_idempotent_up_to_unit_iso(rng):
    for _ in range(10):
        cat = random_category(rng)
        J = random_topology(rng, cat)
        P = random_presheaf(rng, cat)
        sh = sheafify(P, J)
        sh2 = sheafify(sh.sheaf, J)
        assert sh2.unit.is_bijective()


def test_sheafify_y0_on_two_atomic(two):
    J = atomic_topology(two)
    sh = sheafify(yoneda(two, 0), J)
    assert sh.sheaf.sizes == (1, 1)
    pp, eta = sheafify_plus_plus(yoneda(two, 0), J)
    cmp = sheaf_comparison(yoneda(two, 0), J, pp, eta, sh.sheaf, sh.unit)
    assert cmp.is_bijective()


def test_plus_plus_oracle_agreement(rng):
    for _ in range(15):
        cat = random_category(rng)
        J = random_topology(rng, cat)
        P = random_presheaf(rng, cat)
        sh = sheafify(P, J)
        pp, eta = sheafify_plus_plus(P, J)
        ok, _ = is_sheaf(pp, J)
        assert ok
        cmp = sheaf_comparison(P, J, pp, eta, sh.sheaf, sh.unit)
        assert cmp.is_bijective()


def test_subcanonical_sheafified_representables(rng):
    for _ in range(6):
        cat = random_category(rng)
        J = canonical_topology(cat)
        for c in cat.objects:
            Y = yoneda(cat, c)
            sh = sheafify(Y, J)
            assert sh.unit.is_bijective()


# ---------------------------------------------------------------------------
# functional relations

def test_identity_relation_is_valid(rng):
    for _ in range(10):
        cat = random_category(rng)
        J = random_topology(rng, cat)
        P = random_presheaf(rng, cat)
        ok, _ = validate_functional_relation(identity_relation(P, J), J)
        assert ok


def test_dropping_closure_clause_witnessed(two):
    """Remove a pair required by clause (i) from a valid relation."""
    J = atomic_topology(two)
    P = yoneda(two, 1)
    R = identity_relation(P, J)
    # drop the pair at object 1 whose restriction sieve is covering
    pairs = list(R.pairs)
    assert (0, 0) in pairs[1]
    pairs[1] = frozenset(p for p in pairs[1] if p != (0, 0))
    broken = FunctionalRelation(P, P, tuple(pairs))
    ok, witness = validate_functional_relation(broken, J)
    assert not ok
    assert witness["clause"] in ("i", "iii")


def test_graph_relation_round_trip(rng):
    for _ in range(12):
        cat = random_category(rng)
        J = random_topology(rng, cat)
        P = random_presheaf(rng, cat)
        Q = random_presheaf(rng, cat)
        morphisms = enumerate_presheaf_morphisms(P, Q)
        if not morphisms:
            continue
        alpha = rng.choice(morphisms)
        R = graph_relation(alpha, J)
        ok, witness = validate_functional_relation(R, J)
        assert ok, witness


def test_compose_with_identity(rng):
    for _ in range(8):
        cat = random_category(rng)
        J = random_topology(rng, cat)
        P = random_presheaf(rng, cat)
        Q = random_presheaf(rng, cat)
        morphisms = enumerate_presheaf_morphisms(P, Q)
        if not morphisms:
            continue
        R = graph_relation(rng.choice(morphisms), J)
        assert compose_relations(J, R, identity_relation(P, J)).pairs == R.pairs
        assert compose_relations(J, identity_relation(Q, J), R).pairs == R.pairs


def test_relation_composition_associative_and_matches_arrows(rng):
    for _ in range(8):
        cat = random_category(rng)
        J = random_topology(rng, cat)
        P = random_presheaf(rng, cat, max_size=2)
        Q = random_presheaf(rng, cat, max_size=2)
        Z = random_presheaf(rng, cat, max_size=2)
        mor1 = enumerate_presheaf_morphisms(P, Q)
        mor2 = enumerate_presheaf_morphisms(Q, Z)
        mor3 = enumerate_presheaf_morphisms(Z, P)
        if not (mor1 and mor2 and mor3):
            continue
        R = graph_relation(rng.choice(mor1), J)
        S = graph_relation(rng.choice(mor2), J)
        T = graph_relation(rng.choice(mor3), J)
        lhs = compose_relations(J, T, compose_relations(J, S, R))
        rhs = compose_relations(J, compose_relations(J, T, S), R)
        assert lhs.pairs == rhs.pairs

        # arrow-side: a(S∘R) equals a(S)∘a(R)
        shP, shQ, shZ = sheafify(P, J), sheafify(Q, J), sheafify(Z, J)
        aR = relation_to_arrow(J, R, shP, shQ)
        aS = relation_to_arrow(J, S, shQ, shZ)
        aSR = relation_to_arrow(J, compose_relations(J, S, R), shP, shZ)
        assert aR.then(aS).components == aSR.components


def test_arrow_relation_round_trip(rng):
    for _ in range(10):
        cat = random_category(rng)
        J = random_topology(rng, cat)
        P = random_presheaf(rng, cat, max_size=2)
        Q = random_presheaf(rng, cat, max_size=2)
        shP, shQ = sheafify(P, J), sheafify(Q, J)
        for xi in enumerate_presheaf_morphisms(shP.sheaf, shQ.sheaf)[:4]:
            R = arrow_to_relation(shP, shQ, xi)
            ok, witness = validate_functional_relation(R, J)
            assert ok, witness
            back = relation_to_arrow(J, R, shP, shQ)
            assert back.components == xi.components


def test_relation_count_equals_sheaf_arrow_count(rng):
    for _ in range(6):
        cat = random_category(rng)
        J = random_topology(rng, cat)
        P = random_presheaf(rng, cat, max_size=2)
        Q = random_presheaf(rng, cat, max_size=2)
        shP, shQ = sheafify(P, J), sheafify(Q, J)
        arrows = enumerate_presheaf_morphisms(shP.sheaf, shQ.sheaf)
        relations = {arrow_to_relation(shP, shQ, xi).pairs for xi in arrows}
        assert len(relations) == len(arrows)


def test_relation_mono_epi(rng):
    for _ in range(10):
        cat = random_category(rng)
        J = random_topology(rng, cat)
        P = random_presheaf(rng, cat, max_size=2)
        ident = identity_relation(P, J)
        assert relation_is_mono(ident, J) and relation_is_epi(ident, J)


def test_covering_sieve_inclusion_relation_is_epi(rng):
    for _ in range(8):
        cat = random_category(rng)
        J = random_topology(rng, cat)
        c = rng.randrange(cat.n_objects)
        for s in list(J.covers[c])[:3]:
            sub = sieve_subpresheaf(cat, c, s)
            carrier, elems = sub.as_presheaf()
            Y = yoneda(cat, c)
            incl = PresheafMorphism(carrier, Y, tuple(tuple(e) for e in elems))
            R = graph_relation(incl, J)
            assert relation_is_epi(R, J)


def test_mono_epi_agree_with_componentwise_on_sheaf_arrows(rng):
    for _ in range(8):
        cat = random_category(rng)
        J = random_topology(rng, cat)
        P = random_presheaf(rng, cat, max_size=2)
        Q = random_presheaf(rng, cat, max_size=2)
        shP, shQ = sheafify(P, J), sheafify(Q, J)
        for xi in enumerate_presheaf_morphisms(shP.sheaf, shQ.sheaf)[:4]:
            R = arrow_to_relation(shP, shQ, xi)
            inj = all(len(set(comp)) == len(comp) for comp in xi.components)
            # componentwise injectivity/surjectivity on sheaves = mono/epi
            assert relation_is_mono(R, J) == inj
            surj = all(set(xi.components[c]) == set(range(shQ.sheaf.sizes[c]))
                       for c in cat.objects)
            assert relation_is_epi(R, J) == surj


# ---------------------------------------------------------------------------
# C_J and C_J^s

def test_build_CJ_trivial_is_isomorphic_on_skeletal(rng):
    for maker in (lambda: poset_category(2, [(0, 1)]),
                  lambda: poset_category(3, [(0, 1), (1, 2)])):
        cat = maker()
        J = trivial_topology(cat)
        cj = build_CJ(cat, J)
        assert cj.category.n_objects == cat.n_objects
        for a in cat.objects:
            for b in cat.objects:
                assert len(cj.homs[a * cat.n_objects + b]) == len(cat.hom(a, b))


def test_build_CJ_two_atomic(two):
    J = atomic_topology(two)
    cj = build_CJ(two, J)
    # everything is sheafified to the terminal object: all hom sets singleton
    assert all(len(h) == 1 for h in cj.homs)
    # oracle: arrow counts между sheafified representables
    for c in two.objects:
        for d in two.objects:
            shc = sheafify(yoneda(two, c), J)
            shd = sheafify(yoneda(two, d), J)
            count = len(enumerate_presheaf_morphisms(shc.sheaf, shd.sheaf))
            assert count == len(cj.homs[c * two.n_objects + d])


def test_build_CJ_hom_counts_match_oracle(rng):
    for _ in range(4):
        cat = random_category(rng)
        J = random_topology(rng, cat)
        try:
            cj = build_CJ(cat, J)
        except Exception:
            continue
        for c in cat.objects:
            for d in cat.objects:
                shc = sheafify(yoneda(cat, c), J)
                shd = sheafify(yoneda(cat, d), J)
                count = len(enumerate_presheaf_morphisms(shc.sheaf, shd.sheaf))
                assert count == len(cj.homs[c * cat.n_objects + d])


def test_build_CJs_two_atomic(two):
    J = atomic_topology(two)
    cjs = build_CJs(two, J)
    assert cjs.objects == ((0, 0), (0, 1), (1, 0), (1, 6))
    # maximal-sieve objects reproduce C_J hom-sets
    cj = build_CJ(two, J)
    for i, (c, s) in enumerate(cjs.objects):
        if s != maximal_sieve_mask(two, c):
            continue
        for j, (d, t) in enumerate(cjs.objects):
            if t != maximal_sieve_mask(two, d):
                continue
            n = sum(1 for (a, b, _) in cjs.arrow_decode if a == i and b == j)
            assert n == len(cj.homs[c * two.n_objects + d])


def test_build_CJs_composition_associative(two):
    J = atomic_topology(two)
    cjs = build_CJs(two, J)
    cat = cjs.category
    for h in cat.arrows:
        for g in cat.arrows:
            if cat.cod[g] != cat.dom[h]:
                continue
            for f in cat.arrows:
                if cat.cod[f] != cat.dom[g]:
                    continue
                assert cat.compose(cat.compose(h, g), f) == \
                    cat.compose(h, cat.compose(g, f))


# ---------------------------------------------------------------------------
# colimits and categories of elements

def test_colimit_single_object(rng):
    for _ in range(6):
        cat = random_category(rng)
        c = rng.randrange(cat.n_objects)
        one = terminal_category()
        F = FinFunctor(one, cat, (c,), (cat.identity[c],))
        colim, legs = colimit_of_representables(F)
        Y = yoneda(cat, c)
        assert colim.sizes == Y.sizes


def test_elements_of_terminal_presheaf(rng):
    for _ in range(6):
        cat = random_category(rng)
        el = category_of_elements(constant_presheaf(cat, 1))
        assert el.category.n_objects == cat.n_objects
        assert el.category.n_arrows == cat.n_arrows


def test_density_colimit_over_elements(rng):
    """colim of representables over ∫P is isomorphic to P."""
    for _ in range(8):
        cat = random_category(rng)
        P = random_presheaf(rng, cat, max_size=2)
        el = category_of_elements(P)
        colim, legs = colimit_of_representables(el.projection)
        # comparison: leg at (c, x) is the Yoneda arrow of x
        comps = [[None] * colim.sizes[e] for e in cat.objects]
        for i, (c, x) in enumerate(el.objects):
            for e in cat.objects:
                for u_idx, u in enumerate(cat.hom(e, c)):
                    comps[e][legs[i][e][u_idx]] = P.res(u, x)
        comparison = PresheafMorphism(colim, P, tuple(tuple(r) for r in comps))
        assert comparison.is_bijective()


# ---------------------------------------------------------------------------
# counting invariants

def count_closed_subpresheaves(P, J):
    return sum(1 for A in subpresheaves(P)
               if closure_cJ(A, J).members == A.members)


def count_subsheaves(E, J):
    return sum(1 for A in subpresheaves(E)
               if is_sheaf(A.as_presheaf()[0], J)[0]
               and closure_cJ(A, J).members == A.members)


def test_closed_subpresheaf_subobject_count(rng):
    """#closed subpresheaves of P = #subsheaves of a_J(P); each subsheaf
    inclusion induces a mono relation."""
    for _ in range(8):
        cat = random_category(rng)
        J = random_topology(rng, cat)
        P = random_presheaf(rng, cat, max_size=2)
        sh = sheafify(P, J)
        assert count_closed_subpresheaves(P, J) == count_subsheaves(sh.sheaf, J)
        for A in subpresheaves(sh.sheaf)[:8]:
            if closure_cJ(A, J).members != A.members:
                continue
            carrier, elems = A.as_presheaf()
            incl = PresheafMorphism(carrier, sh.sheaf,
                                    tuple(tuple(e) for e in elems))
            R = graph_relation(incl, J)
            assert relation_is_mono(R, J)


def test_relation_class_function_correspondence(two):
    """Functional relations = functorial, J-closed, locally pointed
    class-valued functions, by double enumeration on a small instance."""
    J = atomic_topology(two)
    P = yoneda(two, 1)
    Q = yoneda(two, 1)

    # enumerate all J-functional relations by brute force over pair sets
    universe = [(c, x, y) for c in two.objects
                for x in range(P.sizes[c]) for y in range(Q.sizes[c])]
    relations = []
    for combo in itertools.chain.from_iterable(
            itertools.combinations(universe, k) for k in range(len(universe) + 1)):
        pairs = [set() for _ in two.objects]
        for (c, x, y) in combo:
            pairs[c].add((x, y))
        R = FunctionalRelation(P, Q, tuple(frozenset(p) for p in pairs))
        if validate_functional_relation(R, J)[0]:
            relations.append(R)

    # enumerate class-valued functions: per object, per element of P, an
    # ≡_J-class of Q (possibly empty), functorial, closed, locally pointed
    def eq_classes(c):
        classes = []
        for y in range(Q.sizes[c]):
            for cl in classes:
                if elem_locally_equal(Q, J, c, y, next(iter(cl))):
                    cl.add(y)
                    break
            else:
                classes.append({y})
        return [frozenset(cl) for cl in classes] + [frozenset()]

    functions = []
    per_elem = [[(c, x) for x in range(P.sizes[c])] for c in two.objects]
    slots = [e for row in per_elem for e in row]
    choices = [eq_classes(c) for (c, x) in slots]
    for combo in itertools.product(*choices):
        f = {slot: cl for slot, cl in zip(slots, combo)}
        ok = True
        for (c, x), cl in f.items():
            for g in two.arrows_into(c):
                d = two.dom[g]
                for y in cl:
                    if Q.res(g, y) not in f[(d, P.res(g, x))]:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:  # J-closed
            for (c, x), cl in f.items():
                for y in range(Q.sizes[c]):
                    if y in cl:
                        continue
                    s = mask_of(g for g in two.arrows_into(c)
                                if Q.res(g, y) in f[(two.dom[g], P.res(g, x))])
                    if J.is_covering(c, s):
                        ok = False
                        break
                if not ok:
                    break
        if ok:  # locally pointed
            for (c, x) in slots:
                s = mask_of(g for g in two.arrows_into(c)
                            if f[(two.dom[g], P.res(g, x))])
                if not J.is_covering(c, s):
                    ok = False
                    break
        if ok:
            functions.append(f)
    assert len(relations) == len(functions)


def test_local_presentation_equality_and_composition(two):
    """Two local presentations give equal sheaf arrows iff they agree on a
    common refinement; composing presentations matches arrow composition."""
    J = atomic_topology(two)
    from sitecalc.presheaf import _locally_matching_families
    for c in two.objects:
        for d in two.objects:
            shc = sheafify(yoneda(two, c), J)
            shd = sheafify(yoneda(two, d), J)
            yd = yoneda(two, d)
            for s in J.covers[c]:
                members = sorted(bits(s))
                fams = _locally_matching_families(yd, J, c, members)
                for f1 in fams:
                    for f2 in fams:
                        # arrows induced by the two presentations: restrict to
                        # the least covering sieve and compare classes
                        common = [m for m in members if (J.min_cover[c] >> m) & 1]
                        idx = [members.index(m) for m in common]
                        same = all(
                            elem_locally_equal(yd, J, two.dom[members[i]],
                                               f1[i], f2[i])
                            for i in idx)
                        e1 = shd._index[c][tuple(f1[i] for i in idx)] \
                            if len(common) == len(shd.carrier[c]) else None
                        e2 = shd._index[c][tuple(f2[i] for i in idx)] \
                            if len(common) == len(shd.carrier[c]) else None
                        if e1 is not None and e2 is not None:
                            assert (e1 == e2) == same


def _cj_relation_to_functional(cat, c, d, rel):
    P, Q = yoneda(cat, c), yoneda(cat, d)
    pairs = []
    for e in cat.objects:
        hom_c = {h: i for i, h in enumerate(cat.hom(e, c))}
        hom_d = {h: i for i, h in enumerate(cat.hom(e, d))}
        pairs.append(frozenset(
            (hom_c[f], hom_d[g]) for (f, g) in rel if cat.dom[f] == e))
    return FunctionalRelation(P, Q, tuple(pairs))


def test_build_CJ_composition_agrees_arrowwise():
    """Beyond cardinalities: the composition formula of the relation
    category agrees with actual composition of the induced sheaf arrows."""
    from conftest import make_two
    two = make_two()
    for J in (atomic_topology(two), trivial_topology(two)):
        cj = build_CJ(two, J)
        shs = {c: sheafify(yoneda(two, c), J) for c in two.objects}
        cat = cj.category
        arrow_of = {}
        for a, (c, d, rel) in enumerate(cj.arrow_decode):
            R = _cj_relation_to_functional(two, c, d, rel)
            arrow_of[a] = relation_to_arrow(J, R, shs[c], shs[d])
        for g in cat.arrows:
            for f in cat.arrows:
                if cat.cod[f] != cat.dom[g]:
                    continue
                composite = cat.compose(g, f)
                assert arrow_of[f].then(arrow_of[g]).components == \
                    arrow_of[composite].components


def test_build_CJs_hom_counts_match_sheafified_sieves():
    """Hom-set sizes in the closed-sieve-pair category equal the number of
    sheaf arrows between the sheafified sieve carriers."""
    from conftest import make_two
    two = make_two()
    J = atomic_topology(two)
    cjs = build_CJs(two, J)
    sheaves = []
    for (d, s) in cjs.objects:
        carrier, _ = sieve_subpresheaf(two, d, s).as_presheaf()
        sheaves.append(sheafify(carrier, J).sheaf)
    for i in range(len(cjs.objects)):
        for j in range(len(cjs.objects)):
            n_rel = sum(1 for (a, b, _) in cjs.arrow_decode if a == i and b == j)
            n_arr = len(enumerate_presheaf_morphisms(sheaves[i], sheaves[j]))
            assert n_rel == n_arr, (cjs.objects[i], cjs.objects[j])


def test_sheafification_decode_round_trip(rng):
    """Element decoding returns the canonical locally matching family, and
    looking the family back up returns the element."""
    for _ in range(10):
        cat = random_category(rng)
        J = random_topology(rng, cat)
        P = random_presheaf(rng, cat, max_size=2)
        sh = sheafify(P, J)
        for c in cat.objects:
            for elt in range(sh.sheaf.sizes[c]):
                family = sh.decode(c, elt)
                assert set(family) == set(sh.carrier[c])
                assert sh.element_of_family(c, family) == elt
