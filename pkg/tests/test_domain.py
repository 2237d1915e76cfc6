import json
import random
from fractions import Fraction

import pytest

from hfd.domain import (
    WALLS,
    Catalog,
    ReductionError,
    UnsupportedField,
    conditions_12,
    enumerate_s1,
    essential_floors,
    floor,
    in_F,
    in_F_interior,
    in_Finf,
    normalize_inf,
    on_surface,
    reduce,
    satisfies_conditions,
    strictly_inside_except,
    surface_of,
)
from hfd.geometry import P1, P2, P3, GroupElem, SRPoint, XPoint, apply, as_x, diag_unit, norm_cZd
from hfd.ring import KNum, QuadInt, ideal_norm, make_ctx
from oracles import random_rational

Z0 = SRPoint(0, 0, 1, 2)


def test_s1_sizes_are_stable(k2, k5):
    assert len(k5[1]) == 21
    assert len(k2[1]) == 67


def test_s1_k5_only_unit_c(k5):
    ctx, S1 = k5
    assert all(abs(c.norm()) == 1 for c, _ in S1.pairs)
    # a^2 + ab - b^2 = +-2 has no solution: no element of norm 2
    assert not any(abs(QuadInt(5, a, b).norm()) == 2 for a in range(-30, 31) for b in range(-30, 31))


def test_s1_k2_norm_classes(k2):
    ctx, S1 = k2
    norms = {abs(c.norm()) for c, _ in S1.pairs}
    assert norms <= {1, 2, 4} and 1 in norms
    assert 0 < len(S1) < 1000


@pytest.mark.parametrize("k", [2, 5])
def test_s1_pairs_satisfy_conditions(k, request):
    ctx, S1 = request.getfixturevalue(f"k{k}")
    for c, d in S1.pairs:
        assert all(conditions_12(ctx, c, d).values())
        assert ideal_norm(c, d) == 1


@pytest.mark.parametrize("k", [2, 5, 3, 13])
def test_s1_canonicalization_invariant(k):
    ctx = make_ctx(k)
    assert enumerate_s1(ctx).pairs == enumerate_s1(ctx, canonicalize=True).pairs


def test_s1_sorted_and_duplicate_free(k2):
    ctx, S1 = k2
    keys = [(abs(c.norm()), c.emb1(), c.emb2(), d.emb1(), d.emb2()) for c, d in S1.pairs]
    assert keys == sorted(keys)
    assert len({(tuple(c), tuple(d)) for c, d in S1.pairs}) == len(S1)


def test_s1_matches_brute_force_k5(k5):
    ctx, S1 = k5
    found = set()
    for ca in range(-4, 5):
        for cb in range(-4, 5):
            c = QuadInt(5, ca, cb)
            if not c or abs(c.norm()) > 2:
                continue
            for da in range(-8, 9):
                for db in range(-8, 9):
                    d = QuadInt(5, da, db)
                    if satisfies_conditions(ctx, c, d):
                        found.add(S1.find(c, d))
    assert None not in found
    assert found == set(range(len(S1)))


def test_s1_json(k5):
    ctx, S1 = k5
    doc = json.loads(S1.dumps())
    assert doc["k"] == 5 and doc["k0"] == 2 and doc["eps0"] == ["0", "1"]
    assert len(doc["pairs"]) == len(S1)
    assert all(isinstance(x, str) for p in doc["pairs"] for x in p["c"] + p["d"])


def test_unsupported_field():
    with pytest.raises(UnsupportedField):
        enumerate_s1(make_ctx(10))


def test_in_Finf_examples(k5):
    ctx, _ = k5
    assert in_Finf(ctx, Z0)
    assert not in_Finf(ctx, SRPoint(Fraction(3, 5), 0, 1, 2))
    e2 = ctx.eps0.to_knum() ** 2
    boundary = XPoint(KNum(5), KNum(5), e2, e2.inverse())  # r = eps0^2, h = 1
    assert in_Finf(ctx, boundary)
    assert on_surface(ctx, WALLS[4], boundary)


@pytest.mark.parametrize("k", [2, 5])
def test_in_F_examples(k, request):
    ctx, S1 = request.getfixturevalue(f"k{k}")
    assert in_F(ctx, S1, Z0)
    assert in_F_interior(ctx, S1, Z0)
    assert not in_F(ctx, S1, SRPoint(0, 0, 1, Fraction(ctx.k0 ** 2, 2 * k)))
    assert not in_F_interior(ctx, S1, apply(P1(ctx), Z0))


def test_normalize_inf_lands_in_Finf(k2):
    ctx, _ = k2
    rng = random.Random(1)
    for _ in range(200):
        Z = SRPoint(random_rational(rng, -5, 5), random_rational(rng, -5, 5),
                    Fraction(rng.randint(1, 400), rng.randint(1, 400)), Fraction(rng.randint(1, 50), 7))
        T, m, b, W = normalize_inf(ctx, Z)
        assert in_Finf(ctx, W)
        assert apply(T, Z) == W


def test_normalize_inf_ties_pick_smaller_m_and_b(k5):
    ctx, _ = k5
    T, m, b, W = normalize_inf(ctx, SRPoint(Fraction(-1, 2), Fraction(1, 2), 1, 1))
    assert (m, b) == (0, (0, -1))
    e2 = ctx.eps0.to_knum() ** 2
    # r = eps0^2 can stay (m = 0) or move to eps0^-2 (m = -1); the smaller m wins
    T, m, b, W = normalize_inf(ctx, XPoint(KNum(5), KNum(5), e2, e2.inverse()))
    assert m == -1 and W.r_sq() == e2.inverse() ** 2


@pytest.mark.parametrize("k", [2, 5])
def test_reduce_simple_cases(k, request):
    ctx, S1 = request.getfixturevalue(f"k{k}")
    g, Z = reduce(ctx, S1, Z0)
    assert g.is_identity() and Z == as_x(Z0, k)
    res = reduce(ctx, S1, apply(P1(ctx), Z0))
    assert res.gamma == P1(ctx).inv() and res.point == as_x(Z0, k)


@pytest.mark.parametrize("k", [2, 5])
def test_reduce_random_points_heights_increase(k, request):
    ctx, S1 = request.getfixturevalue(f"k{k}")
    rng = random.Random(k)
    for _ in range(250):
        Z = SRPoint(random_rational(rng, -3, 3), random_rational(rng, -3, 3),
                    Fraction(rng.randint(1, 60), rng.randint(1, 60)), Fraction(rng.randint(1, 80), 97))
        res = reduce(ctx, S1, Z)
        assert in_F(ctx, S1, res.point)
        assert res.point == apply(res.gamma, Z)
        assert all(a < b for a, b in zip(res.heights, res.heights[1:]))


def test_reduce_cap_is_reported(k5):
    ctx, S1 = k5
    with pytest.raises(ReductionError):
        reduce(ctx, S1, SRPoint(Fraction(1, 7), Fraction(2, 9), 1, Fraction(1, 10**6)), cap=1)


def test_interiors_are_disjoint(k5):
    ctx, S1 = k5
    rng = random.Random(3)
    gens = [P1(ctx), P2(ctx), P3(ctx)] + [S1.matrix(i) for i in range(len(S1))]
    Z = SRPoint(Fraction(1, 7), Fraction(-1, 9), Fraction(11, 10), 3)
    assert in_F_interior(ctx, S1, Z)
    for _ in range(200):
        g = GroupElem.identity(5)
        for _ in range(rng.randint(1, 6)):
            g = g * rng.choice(gens) ** rng.choice([1, -1])
        if g.is_identity():
            continue
        assert not in_F_interior(ctx, S1, apply(g, Z))


def test_catalog_margins_sign(k5):
    ctx, S1 = k5
    cat = Catalog(ctx, S1)
    fp = as_x(Z0, 5).to_float()
    m = cat.margins(fp.x1, fp.x2, fp.y1, fp.y2)
    assert m.shape == (6 + len(S1), 1) and (m > 0).all()
    fp = as_x(SRPoint(0, 0, 1, Fraction(1, 10)), 5).to_float()
    assert (cat.margins(fp.x1, fp.x2, fp.y1, fp.y2)[6:] < 0).any()


@pytest.mark.parametrize("k", [2, 5])
def test_essential_floors(k, request):
    ctx, S1 = request.getfixturevalue(f"k{k}")
    ess = essential_floors(ctx, S1)
    assert ess.surfaces[:6] == list(WALLS)
    assert len(ess.surfaces) > 6
    for V, Z in ess.witnesses.items():
        assert norm_cZd(V.c, V.d, Z) == 1
        assert strictly_inside_except(ctx, S1, Z, V)
    assert set(ess.witnesses) | set(ess.undetermined) == {floor(c, d) for c, d in S1.pairs}
    if k == 5:
        one, zero = ctx.q(1), ctx.q(0)
        V = floor(*S1.pairs[S1.find(one, zero)])
        assert V in ess.witnesses


def test_surface_of(k5):
    ctx, S1 = k5
    assert surface_of(ctx, P1(ctx)) == WALLS[1]
    assert surface_of(ctx, P1(ctx).inv()) == WALLS[0]
    assert surface_of(ctx, P2(ctx)) == WALLS[3]
    assert surface_of(ctx, P3(ctx)) == WALLS[5]
    assert surface_of(ctx, P3(ctx).inv()) == WALLS[4]
    c, d = S1.pairs[3]
    assert surface_of(ctx, S1.matrix(3)) == floor(c, d)
    # second row (eps0^-1 c, eps0^-1 d) lies on the same hypersurface
    assert surface_of(ctx, diag_unit(ctx, 1) * S1.matrix(3)) == floor(c, d)
