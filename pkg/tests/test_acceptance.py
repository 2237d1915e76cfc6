"""Acceptance criteria; each test prints one PASS/FAIL line."""

import math
import random
import time

import numpy as np
import pytest

from conftest import ctx_s1, presentation
from hfd.domain import conditions_12, reduce, satisfies_conditions
from hfd.geometry import P1, P2, P3, GroupElem, PairArrays, SRPoint, apply, as_x, diag_unit, norm_cZd, same_point, translation
from hfd.presentation import decompose, decompose_sides, eval_word, standard_generators
from hfd.ring import canonical_pair, complete_to_matrix, ideal_norm, make_ctx
from oracles import pell_unit, random_coprime_pair, random_quadint, random_rational

# least unit > 1 as (a, b) = a + b*omega, frozen from oracles.pell_unit
FROZEN_UNITS = {2: (0, 1), 3: (1, 1), 5: (0, 1), 6: (3, 2), 7: (5, 3), 13: (1, 1), 17: (3, 2), 29: (2, 1)}
Z0 = SRPoint(0, 0, 1, 2)


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nAC{n} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


def test_ac1_fundamental_units(report):
    t = time.perf_counter()
    got = {k: (make_ctx(k).eps0.a, make_ctx(k).eps0.b) for k in FROZEN_UNITS}
    dt = time.perf_counter() - t
    live = all(pell_unit(k) == FROZEN_UNITS[k] for k in FROZEN_UNITS)
    ok = got == FROZEN_UNITS and live and dt < 1.0
    report(1, ok, f"units for k={sorted(FROZEN_UNITS)} match the Pell oracle in {dt:.3f}s (< 1s)")


def _coord_bound(S1):
    return max(max(abs(x) for x in (c.a, c.b, d.a, d.b)) for c, d in S1.pairs)


@pytest.mark.parametrize("k", [2, 5])
def test_ac2_s1_soundness(k, report):
    t = time.perf_counter()
    ctx, S1 = ctx_s1(k)
    sound = all(all(conditions_12(ctx, c, d).values()) for c, d in S1.pairs)
    rng = random.Random(100 + k)
    box = 2 * _coord_bound(S1)
    checked = rejected = 0
    while checked < 1000:
        c, d = random_coprime_pair(rng, k, box)
        if S1.find(c, d) is not None:
            continue
        checked += 1
        rejected += not satisfies_conditions(ctx, c, d)
    dt = time.perf_counter() - t
    ok = sound and rejected == checked and dt < 10
    report(2, ok, f"k={k}: {len(S1)} pairs satisfy the conditions; {rejected}/{checked} outside pairs rejected; {dt:.1f}s (< 10s)")


@pytest.mark.parametrize("k", [2, 5])
def test_ac3_floor_stability(k, report):
    ctx, S1 = ctx_s1(k)
    rng = random.Random(200 + k)
    box = 2 * _coord_bound(S1)
    extra = []
    while len(extra) < 100:
        c, d = random_coprime_pair(rng, k, box)
        if S1.find(c, d) is None:
            extra.append((c, d))
    n = 33
    le = 2 * math.log(ctx.eps_float)
    s = np.linspace(-0.5, 0.5, n)
    lr = np.linspace(-le, le, n)
    g1, g2, gr = (a.ravel() for a in np.meshgrid(s, s, lr, indexing="ij"))
    r = np.exp(gr)
    base = S1.arrays.h1_grid(g1, g2, r, k).max(axis=0)
    more = PairArrays.of(list(S1.pairs) + extra).h1_grid(g1, g2, r, k).max(axis=0)
    diff = float(np.abs(more - base).max())
    lo = ctx.k0 ** 2 / (2 * k)
    ok = diff <= 1e-9 and bool((base > lo).all()) and bool((base <= 1 + 1e-12).all())
    report(3, ok, f"k={k}: 33^3 grid, max |h0 change| = {diff:.2e} (<= 1e-9); "
                  f"{lo:.4f} < h0 in [{base.min():.4f}, {base.max():.4f}] <= 1")


@pytest.mark.parametrize("k", [2, 5])
def test_ac4_reduction_tiling(k, report):
    ctx, S1 = ctx_s1(k)
    gens = [g for _, g in standard_generators(ctx, S1)]
    rng = random.Random(300 + k)
    t = time.perf_counter()
    good = 0
    for _ in range(1000):
        w = GroupElem.identity(k)
        for _ in range(rng.randint(1, 20)):
            w = w * rng.choice(gens) ** rng.choice([1, -1])
        res = reduce(ctx, S1, apply(w, Z0))
        heights_up = all(a < b for a, b in zip(res.heights, res.heights[1:]))
        if same_point(res.point, Z0) and res.gamma == w.inv() and heights_up:
            good += 1
    dt = time.perf_counter() - t
    ok = good == 1000 and dt < 60
    report(4, ok, f"k={k}: {good}/1000 random words reduce to Z0 with the inverse element; {dt:.1f}s (< 60s)")


@pytest.mark.parametrize("k", [2, 5])
def test_ac5_presentation_validity(k, report):
    pres, dt = presentation(k)
    gens = pres.gen_dict()
    rel_ok = all(eval_word(w, gens, k).is_identity() for w in pres.pairing_relations + pres.cycle_relations)
    orders = [c.order for c in pres.cycles]
    cov = pres.coverage
    ok = rel_ok and max(orders) <= 60 and cov["passed"] and cov["samples"] == 2000 and dt < 600
    report(5, ok, f"k={k}: {len(pres.sides)} generators, {len(pres.pairing_relations)} pairing + "
                  f"{len(pres.cycle_relations)} cycle relators all +-I; max order {max(orders)}; "
                  f"coverage {cov['covered']}/{cov['samples']}; built in {dt:.0f}s (< 600s)")


def test_ac6_generation(report):
    results = []
    for k in (2, 5):
        ctx, S1 = ctx_s1(k)
        gens = standard_generators(ctx, S1)
        table = dict(gens)
        rng = random.Random(400 + k)
        good = 0
        for _ in range(200):
            M = GroupElem.identity(k)
            for _ in range(rng.randint(1, 12)):
                M = M * rng.choice(gens)[1] ** rng.choice([1, -1])
            good += eval_word(decompose(ctx, S1, M), table, k) == M
        results.append((f"k={k} standard", good))
    pres, _ = presentation(5)
    sides = [s.gamma for s in pres.sides]
    table = pres.gen_dict()
    rng = random.Random(406)
    good = 0
    for _ in range(200):
        M = GroupElem.identity(5)
        for _ in range(rng.randint(1, 12)):
            M = M * rng.choice(sides)
        good += eval_word(decompose_sides(pres, M), table, 5) == M
    results.append(("k=5 side generators", good))
    ok = all(g == 200 for _, g in results)
    report(6, ok, "decompose round trips: " + ", ".join(f"{name} {g}/200" for name, g in results))


def test_ac7_geometry_laws(report):
    rng = random.Random(7)
    counts = dict(height=0, inversion=0, gamma_inf=0, unit=0, assoc=0)
    for k in (2, 3, 5, 13):
        ctx = make_ctx(k)
        e = ctx.eps0.to_knum()

        def point():
            return as_x(SRPoint(random_rational(rng, -1, 1), random_rational(rng, -1, 1),
                                random_rational(rng, 0.1, 3) or 1, random_rational(rng, 0.1, 3) or 1), k)

        def elem():
            c, d = random_coprime_pair(rng, k, 4, c_nonzero=False)
            a, b = complete_to_matrix(c, d)
            return GroupElem(a, b, c, d)

        for _ in range(40):
            g, Z = elem(), point()
            W = apply(g, Z)
            n = norm_cZd(g.c, g.d, Z)
            counts["height"] += W.h_sq() * n * n == Z.h_sq()
            counts["inversion"] += norm_cZd(-g.c, g.a, W) * n == 1
            m, b = rng.randint(-3, 3), random_quadint(rng, k, 4)
            T = translation(ctx, b) * diag_unit(ctx, m)
            V = apply(T, Z)
            counts["gamma_inf"] += (V.h_sq() == Z.h_sq() and V.r_sq() == Z.r_sq() * e ** (8 * m)
                                    and V.x1 == Z.x1 * e ** (2 * m) + b.to_knum())
            u = ctx.eps_pow(rng.randint(-3, 3)) * rng.choice([1, -1])
            c, d = random_coprime_pair(rng, k, 5)
            counts["unit"] += (norm_cZd(u * c, u * d, Z) == norm_cZd(c, d, Z)
                               and ideal_norm(u * c, u * d) == ideal_norm(c, d)
                               and conditions_12(ctx, u * c, u * d) == conditions_12(ctx, c, d)
                               and canonical_pair(ctx, u * c, u * d) == canonical_pair(ctx, c, d))
            h = rng.choice([P1(ctx), P2(ctx), P3(ctx), elem()])
            counts["assoc"] += same_point(apply(g * h, Z), apply(g, apply(h, Z)))
    ok = all(v == 160 for v in counts.values())
    report(7, ok, "exact laws on random inputs: " + ", ".join(f"{name} {v}/160" for name, v in counts.items()))
