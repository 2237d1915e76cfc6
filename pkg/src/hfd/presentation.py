"""Sides, edges, cycles and the finite presentation of PSL2(R); word decomposition.

Sides are discovered by sampling generic boundary points of F.  A generic point Z on a
hypersurface V of the boundary lies in exactly one side, whose pairing transformation is
gamma = T * P_V with P_V the transformation attached to V and T in Gamma_inf the element
moving P_V(Z) into F_inf.  Every side is accepted only with an exact witness: a point of
K^4 on V_gamma strictly inside all other constraints of F, whose image under gamma is
strictly inside all constraints of F except V_{gamma^-1}.

Edges are located numerically by marching rays inside each side until its margin
vanishes; the exit point lies on exactly two sides.  Cycles are traced from edge
witnesses and their relators are verified exactly.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy.optimize import linprog, minimize

from .domain import (
    WALLS,
    Catalog,
    Hypersurface,
    S1Set,
    enumerate_s1,
    essential_floors,
    floor,
    floor_point,
    normalize_inf,
    rationalize,
    reduce,
    strictly_inside_except,
    surface_of,
)
from .geometry import (
    P1,
    P2,
    P3,
    FloatPoint,
    GroupElem,
    SRPoint,
    XPoint,
    apply,
    as_x,
    diag_unit,
    norm_cZd,
    omega_floats,
    translation,
)
from .parallel import pmap
from .ring import FieldCtx, KNum, omega_data, unit_log

log = logging.getLogger(__name__)

Z0 = SRPoint(0, 0, 1, 2)


class PresentationError(RuntimeError):
    pass


@dataclass
class Config:
    seed: int = 1
    floor_samples: int = 30000
    rays_per_side: int = 48
    ray_length: float = 2.0
    ray_steps: int = 400
    side_tol: float = 1e-7
    cluster_tol: float = 1e-6
    newton_tol: float = 1e-12
    coverage_samples: int = 2000
    coverage_rounds: int = 4
    discovery_rounds: int = 6
    order_cap: int = 60
    cycle_cap: int = 500
    witnesses_per_pair: int = 3
    essential_grid: int = 17
    q_max: int = 3
    m_max: int = 3
    b_max: int = 3


# -- data types ---------------------------------------------------------------------------

@dataclass
class Side:
    id: int
    gamma: GroupElem
    surface: Hypersurface
    witness: XPoint
    pair: int = -1

    @property
    def name(self) -> str:
        return f"g{self.id}"


@dataclass
class Edge:
    id: int
    sides: tuple
    witness: FloatPoint
    tolerance: float


@dataclass
class Cycle:
    entries: list  # (edge id, side id) pairs, one primitive period
    composite: GroupElem
    order: int
    witness: FloatPoint

    @property
    def side_ids(self) -> list:
        return [s for _, s in self.entries]


def word_str(word) -> str:
    """Render [(name, exp), ...] as whitespace-separated tokens with ^-1 suffixes."""
    out = []
    for name, e in word:
        if e == 1:
            out.append(name)
        elif e == -1:
            out.append(f"{name}^-1")
        else:
            out.append(f"{name}^{e}")
    return " ".join(out)


def parse_word(text: str):
    word = []
    for tok in text.split():
        if "^" in tok:
            name, e = tok.split("^", 1)
            word.append((name, int(e)))
        else:
            word.append((tok, 1))
    return word


def eval_word(word, gens: dict, k: int) -> GroupElem:
    g = GroupElem.identity(k)
    for name, e in word:
        g = g * (gens[name] ** e)
    return g


def is_pm_identity(g: GroupElem) -> bool:
    return g.is_identity()


def element_order(g: GroupElem, cap: int) -> Optional[int]:
    """Least m <= cap with g^m = +-I, or None."""
    p = g
    for m in range(1, cap + 1):
        if p.is_identity():
            return m
        p = p * g
    return None


# -- float machinery ----------------------------------------------------------------------

def _mobius(ent1, ent2, x1, x2, y1, y2):
    a1, b1, c1, d1 = ent1
    a2, b2, c2, d2 = ent2
    z1 = x1 + 1j * y1
    z2 = x2 + 1j * y2
    w1 = (a1 * z1 + b1) / (c1 * z1 + d1)
    w2 = (a2 * z2 + b2) / (c2 * z2 + d2)
    return w1.real, w2.real, w1.imag, w2.imag


def wall_transform(ctx: FieldCtx, V: Hypersurface) -> GroupElem:
    return {
        "V1+": P1(ctx).inv(), "V1-": P1(ctx),
        "V2+": P2(ctx).inv(), "V2-": P2(ctx),
        "V3+": P3(ctx).inv(), "V3-": P3(ctx),
    }[V.kind]


class Engine:
    """Float and exact helpers shared by side, edge and cycle computations."""

    def __init__(self, ctx: FieldCtx, S1: S1Set, cfg: Config):
        self.ctx = ctx
        self.S1 = S1
        self.cfg = cfg
        self.cat = Catalog(ctx, S1)
        self.w1, self.w2 = omega_floats(ctx.k)
        self.le = math.log(ctx.eps_float)
        self.e1 = ctx.eps0.emb1()
        self.e2 = ctx.eps0.emb2()
        self.sides: list[Side] = []
        self.deferred: dict = {}
        self.bounds = (cfg.q_max, cfg.m_max, cfg.b_max)
        self.by_gamma: dict = {}
        self._side_arrays = None

    # charts: three float parameters for a point of a hypersurface
    def chart(self, V: Hypersurface, p) -> tuple:
        p = np.atleast_2d(np.asarray(p, dtype=float))
        a, b, c = p[:, 0], p[:, 1], p[:, 2]
        if not V.is_wall:
            i = self.S1.find(V.c, V.d)
            s1, s2, r = a, b, np.exp(c)
            arr = self.S1.arrays
            h = arr.h1_grid(s1, s2, r, self.ctx.k)[i]
            h = np.where(h > 0, h, np.nan)
        elif V.kind in ("V1+", "V1-"):
            s1 = np.full_like(a, 0.5 if V.kind == "V1+" else -0.5)
            s2, r, h = a, np.exp(b), np.exp(c)
        elif V.kind in ("V2+", "V2-"):
            s2 = np.full_like(a, 0.5 if V.kind == "V2+" else -0.5)
            s1, r, h = a, np.exp(b), np.exp(c)
        else:
            lr = 2 * self.le if V.kind == "V3+" else -2 * self.le
            s1, s2, r, h = a, b, np.full_like(a, math.exp(lr)), np.exp(c)
        y1 = np.sqrt(r * h)
        y2 = np.sqrt(h / r)
        return s1 + s2 * self.w1, s1 + s2 * self.w2, y1, y2

    def chart_params(self, V: Hypersurface, fp: FloatPoint) -> np.ndarray:
        s1, s2 = fp.s(self.ctx.k)
        lr, lh = math.log(fp.r), math.log(fp.h)
        if not V.is_wall:
            return np.array([s1, s2, lr])
        if V.kind in ("V1+", "V1-"):
            return np.array([s2, lr, lh])
        if V.kind in ("V2+", "V2-"):
            return np.array([s1, lr, lh])
        return np.array([s1, s2, lh])

    def exact_on_chart(self, V: Hypersurface, p, den: int) -> Optional[XPoint]:
        ctx = self.ctx
        a, b, c = (float(x) for x in p)
        q = lambda x: rationalize(x, den)
        if not V.is_wall:
            i = self.S1.find(V.c, V.d)
            r = math.exp(c)
            h = float(self.S1.arrays.h1_grid(a, b, r, ctx.k)[i, 0])
            if not h > 0:
                return None
            return floor_point(ctx, V.c, V.d, q(a), q(b), q(r * h))
        half = Fraction(1, 2)
        if V.kind in ("V1+", "V1-"):
            s1 = half if V.kind == "V1+" else -half
            return as_x(SRPoint(s1, q(a), q(math.exp(b)), q(math.exp(c))), ctx.k)
        if V.kind in ("V2+", "V2-"):
            s2 = half if V.kind == "V2+" else -half
            return as_x(SRPoint(q(a), s2, q(math.exp(b)), q(math.exp(c))), ctx.k)
        e2 = ctx.eps0.to_knum() ** 2
        r = e2 if V.kind == "V3+" else e2.inverse()
        h = KNum(ctx.k, q(math.exp(c)))
        w = ctx.omega.to_knum()
        s1, s2 = q(a), q(b)
        return XPoint(w * s2 + s1, w.conj() * s2 + s1, r * h, h / r)

    # margins
    def margins(self, x1, x2, y1, y2) -> np.ndarray:
        m = self.cat.margins(x1, x2, y1, y2)
        return np.nan_to_num(m, nan=-1.0, neginf=-1.0)

    def row(self, V: Hypersurface) -> Optional[int]:
        return self.cat.index.get(V)

    def side_margin(self, gamma: GroupElem, V: Hypersurface, Vstar: Hypersurface, pts) -> np.ndarray:
        """Least margin of Z and gamma(Z) over all constraints except V at Z and V* at gamma(Z)."""
        x1, x2, y1, y2 = pts
        m = self.margins(x1, x2, y1, y2)
        m[self.row(V)] = np.inf
        e1, e2 = gamma.floats()
        with np.errstate(all="ignore"):
            u = _mobius(e1, e2, x1, x2, y1, y2)
            bad = ~(np.isfinite(u[2]) & (u[2] > 0) & np.isfinite(u[3]) & (u[3] > 0))
            u = tuple(np.where(bad, 1.0, v) for v in u)
            mg = self.margins(*u)
        mg[self.row(Vstar)] = np.inf
        out = np.minimum(m.min(axis=0), mg.min(axis=0))
        out[bad | np.isnan(y1) | np.isnan(y2)] = -1.0
        return out

    # Gamma_inf normalization in floats
    def gamma_at(self, V: Hypersurface, fp: FloatPoint) -> GroupElem:
        """Pairing transformation of the side containing a generic point fp of V."""
        P = self.S1.matrix(self.S1.find(V.c, V.d)) if not V.is_wall else wall_transform(self.ctx, V)
        e1, e2 = P.floats()
        x1, x2, y1, y2 = _mobius(e1, e2, fp.x1, fp.x2, fp.y1, fp.y2)
        lr = math.log(y1 / y2)
        m = math.ceil((-2 * self.le - lr) / (4 * self.le))
        x1 *= self.e1 ** (2 * m)
        x2 *= (self.e2 * self.e2) ** m
        s2 = (x1 - x2) / (self.w1 - self.w2)
        s1 = x1 - s2 * self.w1
        b1 = math.ceil(-0.5 - s1)
        b2 = math.ceil(-0.5 - s2)
        return translation(self.ctx, self.ctx.q(b1, b2)) * diag_unit(self.ctx, m) * P

    def inf_part(self, gamma: GroupElem) -> tuple:
        """(m, b) with gamma = +-P1^b1 P2^b2 P3^m P_V."""
        V = surface_of(self.ctx, gamma)
        P = self.S1.matrix(self.S1.find(V.c, V.d)) if not V.is_wall else wall_transform(self.ctx, V)
        T = gamma * P.inv()
        _, m = unit_log(self.ctx, T.a)
        return m, T.b * T.a

    def within_bounds(self, gamma: GroupElem) -> bool:
        q_max, m_max, b_max = self.bounds
        V = surface_of(self.ctx, gamma)
        if V.is_wall and V.kind not in ("V3+", "V3-"):
            return True
        m, b = self.inf_part(gamma)
        if V.is_wall:
            return max(abs(b.a), abs(b.b)) <= q_max
        return abs(m) <= m_max and max(abs(b.a), abs(b.b)) <= b_max

    # exact certification
    def exact_ok(self, gamma: GroupElem, V: Hypersurface, Vstar: Hypersurface, Z: XPoint) -> bool:
        ctx, S1 = self.ctx, self.S1
        if not strictly_inside_except(ctx, S1, Z, V):
            return False
        return strictly_inside_except(ctx, S1, apply(gamma, Z), Vstar)

    def certify(self, gamma: GroupElem, seeds) -> Optional[XPoint]:
        """Exact strict witness for the side of gamma, searched from chart seeds."""
        V = surface_of(self.ctx, gamma)
        Vstar = surface_of(self.ctx, gamma.inv())
        if self.row(V) is None or self.row(Vstar) is None:
            return None

        def neg(p):
            return -float(self.side_margin(gamma, V, Vstar, self.chart(V, p))[0])

        tried = 0
        for p0 in seeds:
            p0 = np.asarray(p0, dtype=float)
            if -neg(p0) <= -0.5:
                continue
            res = minimize(neg, p0, method="Nelder-Mead",
                           options={"xatol": 1e-11, "fatol": 1e-13, "maxiter": 800})
            p, val = (res.x, -res.fun) if -res.fun >= -neg(p0) else (p0, -neg(p0))
            tried += 1
            if val > 0:
                for den in (10**3, 10**6, 10**9, 10**13):
                    Z = self.exact_on_chart(V, p, den)
                    if Z is not None and self.exact_ok(gamma, V, Vstar, Z):
                        return Z
            if tried >= 4:
                break
        return None

    # side bookkeeping
    def add_side(self, gamma: GroupElem, Z: XPoint) -> bool:
        """Register a certified side and its partner; False if already known."""
        if gamma in self.by_gamma:
            return False
        ginv = gamma.inv()
        pairs = [(gamma, Z)]
        if ginv != gamma:
            pairs.append((ginv, apply(gamma, Z)))
        for g, W in pairs:
            if g in self.by_gamma:
                continue
            s = Side(len(self.sides), g, surface_of(self.ctx, g), W)
            self.by_gamma[g] = s.id
            self.sides.append(s)
        for g, _ in pairs:
            self.sides[self.by_gamma[g]].pair = self.by_gamma[g.inv()]
        self._side_arrays = None
        return True

    def _arrays(self):
        if self._side_arrays is None:
            ent = np.array([[*s.gamma.floats()[0], *s.gamma.floats()[1]] for s in self.sides])
            rows = np.array([self.row(s.surface) for s in self.sides])
            self._side_arrays = (ent, rows)
        return self._side_arrays

    def sides_containing(self, fp, tol: Optional[float] = None) -> list:
        """Ids of the sides containing the float point fp, within tolerance."""
        tol = self.cfg.side_tol if tol is None else tol
        x1, x2, y1, y2 = (fp.x1, fp.x2, fp.y1, fp.y2) if isinstance(fp, FloatPoint) else fp
        mZ = self.margins(x1, x2, y1, y2)[:, 0]
        if mZ.min() < -tol:
            return []
        ent, rows = self._arrays()
        on = np.abs(mZ[rows]) < tol
        if not on.any():
            return []
        idx = np.nonzero(on)[0]
        e = ent[idx]
        with np.errstate(all="ignore"):
            u = _mobius(e[:, :4].T, e[:, 4:].T, x1, x2, y1, y2)
            mg = self.margins(*u)
        good = mg.min(axis=0) > -tol
        return [int(i) for i in idx[good]]

    def float_point(self, V: Hypersurface, p) -> FloatPoint:
        x1, x2, y1, y2 = (float(v[0]) for v in self.chart(V, p))
        return FloatPoint(x1, x2, y1, y2)


# -- side discovery -----------------------------------------------------------------------

def _v3_translations(ctx: FieldCtx, up: bool):
    """Translations b for which the image of the open square under x -> u x + b meets it, u = eps0^-+2."""
    u = ctx.eps_pow(-2 if up else 2)
    _, t, n = omega_data(ctx.k)
    M = np.array([[u.a, -n * u.b], [u.b, u.a + t * u.b]], dtype=float)
    corners = np.array([[x, y] for x in (-0.5, 0.5) for y in (-0.5, 0.5)]) @ M.T
    out = []
    for b1 in range(math.floor(-0.5 - corners[:, 0].max()), math.ceil(0.5 - corners[:, 0].min()) + 1):
        for b2 in range(math.floor(-0.5 - corners[:, 1].max()), math.ceil(0.5 - corners[:, 1].min()) + 1):
            # maximize t: |s_i| <= 1/2 - t, |(M s + b)_i| <= 1/2 - t
            A, rhs = [], []
            for i in range(2):
                e = [0.0, 0.0]
                e[i] = 1.0
                A += [[e[0], e[1], 1.0], [-e[0], -e[1], 1.0]]
                rhs += [0.5, 0.5]
                A += [[M[i, 0], M[i, 1], 1.0], [-M[i, 0], -M[i, 1], 1.0]]
                b = (b1, b2)[i]
                rhs += [0.5 - b, 0.5 + b]
            res = linprog([0, 0, -1], A_ub=A, b_ub=rhs, bounds=[(-1, 1), (-1, 1), (None, 1)])
            if res.status == 0 and -res.fun > 1e-9:
                out.append(((b1, b2), res.x[:2]))
    return out


def _wall_sides(eng: Engine):
    ctx = eng.ctx
    found = []
    for V in WALLS[:4]:
        g = wall_transform(ctx, V)
        found.append((g, [np.array([0.0, 0.0, math.log(2.0)])]))
    for up, V in ((True, WALLS[4]), (False, WALLS[5])):
        base = P3(ctx).inv() if up else P3(ctx)
        for (b1, b2), s in _v3_translations(ctx, up):
            g = translation(ctx, ctx.q(b1, b2)) * base
            found.append((g, [np.array([s[0], s[1], math.log(2.0)])]))
    return found


def _floor_candidates(eng: Engine, rng: np.random.Generator, n: int, centers=None, scale=None):
    """Sample floor points; return {gamma: [chart params]} for generic samples."""
    ctx, S1 = eng.ctx, eng.S1
    le2 = 2 * eng.le
    if centers is None:
        s1 = rng.uniform(-0.5, 0.5, n)
        s2 = rng.uniform(-0.5, 0.5, n)
        lr = rng.uniform(-le2, le2, n)
    else:
        c = centers[rng.integers(0, len(centers), n)]
        s1 = np.clip(c[:, 0] + rng.normal(0, scale, n), -0.5, 0.5)
        s2 = np.clip(c[:, 1] + rng.normal(0, scale, n), -0.5, 0.5)
        lr = np.clip(c[:, 2] + rng.normal(0, scale, n), -le2, le2)
    H = S1.arrays.h1_grid(s1, s2, np.exp(lr), ctx.k)
    top = H.argmax(axis=0)
    srt = np.sort(H, axis=0)
    gap = srt[-1] - (srt[-2] if len(S1) > 1 else 0)
    keep = (gap > 1e-7) & (np.abs(s1) < 0.5 - 1e-7) & (np.abs(s2) < 0.5 - 1e-7) & (np.abs(lr) < le2 - 1e-7)
    out = {}
    for j in np.nonzero(keep)[0]:
        i = int(top[j])
        V = floor(*S1.pairs[i])
        p = np.array([s1[j], s2[j], lr[j]])
        g = eng.gamma_at(V, eng.float_point(V, p))
        out.setdefault(g, []).append(p)
    return out


def _certify_many(eng: Engine, cands: dict):
    """Certify candidate transformations not yet known; returns number added."""
    todo = []
    for g, seeds in cands.items():
        if g in eng.by_gamma:
            continue
        if eng.within_bounds(g):
            todo.append((g, seeds))
        else:
            eng.deferred.setdefault(g, []).extend(seeds)

    def work(item):
        g, seeds = item
        V = surface_of(eng.ctx, g)
        Vstar = surface_of(eng.ctx, g.inv())
        if eng.row(V) is None or eng.row(Vstar) is None:
            return g, None
        seeds = list(seeds)
        if len(seeds) > 1:
            arr = np.array(seeds)
            marg = eng.side_margin(g, V, Vstar, eng.chart(V, arr))
            seeds = [seeds[j] for j in np.argsort(-marg, kind="stable")[:4]]
        return g, eng.certify(g, seeds)

    added = 0
    for g, Z in pmap(work, todo):
        if Z is not None and eng.add_side(g, Z):
            added += 1
        elif Z is None:
            log.debug("no exact witness for candidate %s", g)
    return added


def find_sides(ctx: FieldCtx, S1: S1Set, cfg: Optional[Config] = None, engine: Optional[Engine] = None) -> list:
    """Certified sides of F, closed under pairing."""
    cfg = cfg or Config()
    eng = engine or Engine(ctx, S1, cfg)
    rng = np.random.default_rng(cfg.seed)
    _certify_many(eng, dict(_wall_sides(eng)))
    cands = _floor_candidates(eng, rng, cfg.floor_samples)
    _certify_many(eng, cands)
    # refine around known floor witnesses to catch small pieces
    centers = []
    for s in eng.sides:
        if not s.surface.is_wall:
            centers.append(eng.chart_params(s.surface, s.witness.to_float()))
    if centers:
        centers = np.array(centers)
        for scale in (0.1, 0.02):
            _certify_many(eng, _floor_candidates(eng, rng, cfg.floor_samples // 4, centers, scale))
    return eng.sides


# -- edges -------------------------------------------------------------------------------------

def _ray_exit(eng: Engine, side: Side, Vstar, p0, u):
    cfg = eng.cfg
    V = side.surface
    ts = np.linspace(0.0, cfg.ray_length, cfg.ray_steps)
    pts = p0[None, :] + ts[:, None] * u[None, :]
    m = eng.side_margin(side.gamma, V, Vstar, eng.chart(V, pts))
    neg = np.nonzero(m < 0)[0]
    if len(neg) == 0 or neg[0] == 0:
        return None, pts[len(pts) // 2]
    lo, hi = ts[neg[0] - 1], ts[neg[0]]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if eng.side_margin(side.gamma, V, Vstar, eng.chart(V, p0 + mid * u))[0] >= 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < cfg.newton_tol:
            break
    return eng.float_point(V, p0 + lo * u), p0 + 0.5 * lo * u


def _discover_near(eng: Engine, fp: FloatPoint, rng) -> int:
    """Look for uncatalogued sides at boundary points near fp."""
    mZ = eng.margins(fp.x1, fp.x2, fp.y1, fp.y2)[:, 0]
    active = [eng.cat.surfaces[i] for i in np.nonzero(np.abs(mZ) < 1e-5)[0]]
    cands = {}
    for V in active:
        p = eng.chart_params(V, fp)
        for scale in (1e-5, 1e-4, 1e-3):
            pts = p[None, :] + rng.normal(0, scale, (12, 3))
            x = eng.chart(V, pts)
            m = eng.margins(*x)
            m[eng.row(V)] = np.inf
            ok = m.min(axis=0) > 1e-9
            for j in np.nonzero(ok)[0]:
                g = eng.gamma_at(V, FloatPoint(*(float(v[j]) for v in x)))
                cands.setdefault(g, []).append(pts[j])
    return _certify_many(eng, cands)


def _collect_edges(eng: Engine, rng, witnesses: dict):
    """March rays in every side; returns number of sides newly discovered."""
    cfg = eng.cfg
    added = 0
    for side in list(eng.sides):
        V = side.surface
        Vstar = eng.sides[side.pair].surface
        starts = [eng.chart_params(V, side.witness.to_float())]
        for ray in range(cfg.rays_per_side):
            u = rng.normal(size=3)
            u /= np.linalg.norm(u)
            p0 = starts[ray % len(starts)]
            fp, mid = _ray_exit(eng, side, Vstar, p0, u)
            if len(starts) < 6 and mid is not None:
                starts.append(mid)
            if fp is None:
                continue
            cont = eng.sides_containing(fp)
            if side.id not in cont:
                continue
            if len(cont) == 1:
                added += _discover_near(eng, fp, rng)
                continue
            if len(cont) != 2:
                continue
            key = tuple(sorted(cont))
            lst = witnesses.setdefault(key, [])
            if len(lst) < cfg.witnesses_per_pair * 4:
                lst.append(fp)
    return added


# -- cycles ------------------------------------------------------------------------------------

def _close(a: FloatPoint, b: FloatPoint, tol: float) -> bool:
    va, vb = a.as_array(), b.as_array()
    return bool(np.all(np.abs(va - vb) <= tol * (1 + np.abs(vb))))


def _primitive_period(seq: list) -> int:
    n = len(seq)
    for p in range(1, n + 1):
        if n % p == 0 and seq == seq[:p] * (n // p):
            return p
    return n


def trace_cycle(eng: Engine, fp: FloatPoint, start: int):
    """Follow E_{i+1} = gamma_{S_i}(E_i); returns the side-id sequence or None."""
    cfg = eng.cfg
    seq = []
    W, S = fp, start
    for _ in range(cfg.cycle_cap):
        seq.append(S)
        e1, e2 = eng.sides[S].gamma.floats()
        Wn = FloatPoint(*_mobius(e1, e2, W.x1, W.x2, W.y1, W.y2))
        cont = eng.sides_containing(Wn, tol=cfg.side_tol * 10)
        nxt = [j for j in cont if j != eng.sides[S].pair]
        if len(nxt) != 1:
            return None
        if nxt[0] == start and _close(Wn, fp, 1e-6):
            return seq
        W, S = Wn, nxt[0]
    return None


def canonical_cycle(seq: list, star: list) -> tuple:
    rev = [star[s] for s in reversed(seq)]
    forms = []
    for s in (seq, rev):
        for i in range(len(s)):
            forms.append(tuple(s[i:] + s[:i]))
    return min(forms)


def cycle_from(eng: Engine, edge: Edge, side_id: int) -> Optional[Cycle]:
    seq = trace_cycle(eng, edge.witness, side_id)
    if seq is None:
        return None
    p = _primitive_period(seq)
    seq = seq[:p]
    comp = GroupElem.identity(eng.ctx.k)
    for s in seq:
        comp = eng.sides[s].gamma * comp
    order = element_order(comp, eng.cfg.order_cap)
    if order is None:
        raise PresentationError(f"cycle {seq} has no order <= {eng.cfg.order_cap}")
    return Cycle([(edge.id, s) for s in seq], comp, order, edge.witness)


# -- coverage -----------------------------------------------------------------------------------

def boundary_samples(eng: Engine, n: int, rng) -> list:
    """n float points of the boundary of F: floor points and wall points."""
    ctx, S1 = eng.ctx, eng.S1
    le2 = 2 * eng.le
    out = []
    n_floor = n // 2
    s1 = rng.uniform(-0.5, 0.5, n_floor)
    s2 = rng.uniform(-0.5, 0.5, n_floor)
    lr = rng.uniform(-le2, le2, n_floor)
    H = S1.arrays.h1_grid(s1, s2, np.exp(lr), ctx.k).max(axis=0)
    for j in range(n_floor):
        out.append(_sr_float(eng, s1[j], s2[j], math.exp(lr[j]), H[j]))
    for j in range(n - n_floor):
        V = WALLS[j % 6]
        a, b = rng.uniform(-0.5, 0.5, 2)
        lrr = rng.uniform(-le2, le2)
        if V.kind in ("V1+", "V1-"):
            s1v, s2v = (0.5 if V.kind == "V1+" else -0.5), a
        elif V.kind in ("V2+", "V2-"):
            s1v, s2v = a, (0.5 if V.kind == "V2+" else -0.5)
        else:
            s1v, s2v, lrr = a, b, (le2 if V.kind == "V3+" else -le2)
        h0v = float(S1.arrays.h1_grid(s1v, s2v, math.exp(lrr), ctx.k).max())
        h = h0v + rng.exponential(0.5)
        out.append(_sr_float(eng, s1v, s2v, math.exp(lrr), h))
    return out


def _sr_float(eng, s1, s2, r, h) -> FloatPoint:
    return FloatPoint(s1 + s2 * eng.w1, s1 + s2 * eng.w2, math.sqrt(r * h), math.sqrt(h / r))


def coverage(eng: Engine, n: int, rng) -> tuple[int, list]:
    """Count samples of the boundary not contained in any accepted side."""
    misses = []
    for fp in boundary_samples(eng, n, rng):
        if not eng.sides_containing(fp, tol=1e-9):
            misses.append(fp)
    return n - len(misses), misses


# -- presentation ------------------------------------------------------------------------------

@dataclass
class Presentation:
    ctx: FieldCtx
    S1: S1Set
    sides: list
    edges: list
    cycles: list
    essential: list
    undetermined: list
    coverage: dict
    pairing_relations: list = field(default_factory=list)
    cycle_relations: list = field(default_factory=list)

    @property
    def generators(self) -> list:
        return [(s.name, s.gamma) for s in self.sides]

    def gen_dict(self) -> dict:
        return {s.name: s.gamma for s in self.sides}

    def verify(self) -> None:
        gens = self.gen_dict()
        for w in self.pairing_relations + self.cycle_relations:
            if not eval_word(w, gens, self.ctx.k).is_identity():
                raise PresentationError(f"relator {word_str(w)} is not +-I")

    def to_text(self) -> str:
        ctx = self.ctx
        lines = [f"# PSL2(O_K), K = Q(sqrt {ctx.k}); omega = (1+sqrt {ctx.k})/{ctx.k0}; eps0 = {ctx.eps0}"]
        lines.append(f"generators {len(self.sides)}")
        for s in self.sides:
            lines.append(f"{s.name} = {s.gamma}  surface {s.surface.name}  pair g{s.pair}")
        lines.append(f"pairing relations {len(self.pairing_relations)}")
        lines += [word_str(w) for w in self.pairing_relations]
        lines.append(f"cycle relations {len(self.cycle_relations)}")
        lines += [word_str(w) for w in self.cycle_relations]
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "k": self.ctx.k,
            "k0": self.ctx.k0,
            "eps0": [str(self.ctx.eps0.a), str(self.ctx.eps0.b)],
            "generators": [
                {"name": s.name, "matrix": s.gamma.to_json(), "surface": s.surface.name, "pair": f"g{s.pair}"}
                for s in self.sides
            ],
            "pairing_relations": [word_str(w) for w in self.pairing_relations],
            "cycle_relations": [word_str(w) for w in self.cycle_relations],
            "cycles": [{"sides": [f"g{s}" for s in c.side_ids], "order": c.order} for c in self.cycles],
            "essential_floors": [V.name for V in self.essential if not V.is_wall],
            "undetermined_floors": [V.name for V in self.undetermined],
            "coverage": self.coverage,
        }

    def sides_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["side", "surface", "pair", "x1", "x2", "y1", "y2", "s1", "s2", "r", "h"])
        for s in self.sides:
            fp = s.witness.to_float()
            s1, s2 = fp.s(self.ctx.k)
            w.writerow([s.name, s.surface.name, f"g{s.pair}", *(repr(v) for v in
                        (fp.x1, fp.x2, fp.y1, fp.y2, s1, s2, fp.r, fp.h))])
        return buf.getvalue()

    def edges_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["edge", "side_a", "side_b", "x1", "x2", "y1", "y2", "s1", "s2", "r", "h"])
        for e in self.edges:
            fp = e.witness
            s1, s2 = fp.s(self.ctx.k)
            w.writerow([e.id, f"g{e.sides[0]}", f"g{e.sides[1]}", *(repr(v) for v in
                        (fp.x1, fp.x2, fp.y1, fp.y2, s1, s2, fp.r, fp.h))])
        return buf.getvalue()


def standard_generators(ctx: FieldCtx, S1: S1Set) -> list:
    """[(name, matrix)]: P1, P2, P3 and P(c,d) for each pair of S1."""
    gens = [("P1", P1(ctx)), ("P2", P2(ctx)), ("P3", P3(ctx))]
    for i, (c, d) in enumerate(S1.pairs):
        gens.append((f"P({c},{d})", S1.matrix(i)))
    return gens


def _sort_sides(eng: Engine) -> None:
    order = {V: i for i, V in enumerate(eng.cat.surfaces)}
    sides = sorted(eng.sides, key=lambda s: (order[s.surface], s.gamma.canonical()))
    remap = {s.id: i for i, s in enumerate(sides)}
    for s in sides:
        s.id, s.pair = remap[s.id], remap[s.pair]
    eng.sides = sides
    eng.by_gamma = {s.gamma: s.id for s in sides}
    eng._side_arrays = None


def find_edges(eng: Engine, seed: int) -> list:
    """Edge witnesses of the current side list, clustered per side pair."""
    witnesses: dict = {}
    _collect_edges(eng, np.random.default_rng(seed), witnesses)
    edges = []
    for key in sorted(witnesses):
        kept = []
        for fp in witnesses[key]:
            if not any(_close(fp, q, eng.cfg.cluster_tol) for q in kept):
                kept.append(fp)
        edges += [Edge(len(edges) + j, key, fp, eng.cfg.side_tol) for j, fp in enumerate(kept)]
    return edges


def edge_cycles(eng: Engine, edges: list) -> tuple:
    """One edge per (side pair, cycle class) and the distinct cycles; ids renumbered."""
    cfg = eng.cfg
    star = [s.pair for s in eng.sides]
    kept, cycles, seen = [], [], {}
    classes: dict = {}
    for e in edges:
        here = classes.setdefault(e.sides, set())
        if len(here) >= cfg.witnesses_per_pair:
            continue
        e = Edge(len(kept), e.sides, e.witness, e.tolerance)
        cyc = cycle_from(eng, e, e.sides[0])
        if cyc is None:
            continue
        canon = canonical_cycle(cyc.side_ids, star)
        if canon in here:
            continue
        here.add(canon)
        kept.append(e)
        if canon not in seen:
            seen[canon] = cyc
            cycles.append(cyc)
    for key, here in classes.items():
        if len(here) > 1:
            log.info("sides g%d, g%d meet in %d edge classes", key[0], key[1], len(here))
    return kept, cycles


def build_presentation(ctx: FieldCtx, cfg: Optional[Config] = None, S1: Optional[S1Set] = None) -> Presentation:
    cfg = cfg or Config()
    S1 = S1 or enumerate_s1(ctx)
    eng = Engine(ctx, S1, cfg)
    ess = essential_floors(ctx, S1, cfg.essential_grid)
    find_sides(ctx, S1, cfg, eng)
    rng = np.random.default_rng(cfg.seed + 1)

    # coverage: certify sides through failing samples until none fail
    cov_rng = np.random.default_rng(cfg.seed + 2)
    hits, misses = 0, []
    for rnd in range(cfg.coverage_rounds):
        hits, misses = coverage(eng, cfg.coverage_samples, cov_rng)
        if not misses:
            break
        log.info("coverage round %d: %d misses; searching near them", rnd, len(misses))
        if eng.deferred:
            eng.bounds = tuple(2 * v for v in eng.bounds)
            log.info("candidate bounds grown to q_max, m_max, b_max = %s", eng.bounds)
            pending, eng.deferred = eng.deferred, {}
            _certify_many(eng, pending)
        for fp in misses[:50]:
            _discover_near(eng, fp, rng)

    for rnd in range(cfg.discovery_rounds):
        n_before = len(eng.sides)
        _sort_sides(eng)
        edges = find_edges(eng, cfg.seed + 3 + rnd)
        if len(eng.sides) == n_before:
            break
        log.info("edge search round %d found %d new sides", rnd, len(eng.sides) - n_before)
    else:
        raise PresentationError("side list did not stabilize during the edge search")

    # final independent coverage certificate
    hits, misses = coverage(eng, cfg.coverage_samples, np.random.default_rng(cfg.seed + 4))
    cov = {"samples": cfg.coverage_samples, "covered": hits, "passed": not misses}
    edges, cycles = edge_cycles(eng, edges)

    pres = Presentation(ctx, S1, eng.sides, edges, cycles, ess.surfaces, ess.undetermined, cov)
    for s in eng.sides:
        if s.id < s.pair:
            pres.pairing_relations.append([(s.name, 1), (f"g{s.pair}", 1)])
        elif s.id == s.pair:
            pres.pairing_relations.append([(s.name, 2)])
    for cyc in cycles:
        pres.cycle_relations.append([(f"g{s}", 1) for s in reversed(cyc.side_ids)] * cyc.order)
    pres.verify()
    pres.engine = eng
    return pres


# -- decomposition ------------------------------------------------------------------------------

def decompose(ctx: FieldCtx, S1: S1Set, M: GroupElem) -> list:
    """Word over P1, P2, P3, P(c,d) evaluating to M up to sign."""
    res = reduce(ctx, S1, apply(M, Z0))
    if not _same(res.point, Z0, ctx):
        raise PresentationError("reduced base point differs from Z0")
    names = standard_generators(ctx, S1)
    word = []
    for st in res.steps:
        # res.gamma = step_n ... step_1 and M = res.gamma^-1
        if st[0] == "T":
            # (P1^b1 P2^b2 P3^m)^-1 = translation(-eps0^-2m b) P3^-m
            _, m, b1, b2 = st
            bb = -(ctx.eps_pow(-2 * m) * ctx.q(b1, b2))
            part = [("P1", bb.a), ("P2", bb.b), ("P3", -m)]
        else:
            part = [(names[3 + st[1]][0], -1)]
        word += [(n, e) for n, e in part if e]
    gens = dict(names)
    if eval_word(word, gens, ctx.k) != M:
        raise PresentationError("decomposition check failed")
    return word


def _same(P, Q, ctx) -> bool:
    P, Q = as_x(P, ctx.k), as_x(Q, ctx.k)
    return P.x1 == Q.x1 and P.x2 == Q.x2 and P.y1sq == Q.y1sq and P.y2sq == Q.y2sq


def decompose_sides(pres: Presentation, M: GroupElem, cap: int = 10_000) -> list:
    """Word over the side generators g_i evaluating to M up to sign."""
    ctx = pres.ctx
    sides = pres.sides
    by_surface: dict = {}
    for s in sides:
        by_surface.setdefault(s.surface, []).append(s)
    ess = [V for V in pres.essential if not V.is_wall]
    ess_arrays = [(V.c, V.d) for V in ess]
    from .geometry import PairArrays
    arr = PairArrays.of(ess_arrays) if ess_arrays else None

    Z = apply(M, Z0)
    applied = []  # side ids, in application order

    def use(V: Hypersurface, times: int = 1):
        nonlocal Z
        s = by_surface[V][0]
        for _ in range(times):
            Z = apply(s.gamma, Z)
            applied.append(s.id)

    for _ in range(cap):
        T, m, (b1, b2), _W = normalize_inf(ctx, Z)
        if m:
            use(WALLS[4] if m < 0 else WALLS[5], abs(m))
            continue
        if b1:
            use(WALLS[1] if b1 > 0 else WALLS[0], abs(b1))
        if b2:
            use(WALLS[3] if b2 > 0 else WALLS[2], abs(b2))
        lower = None
        if arr is not None:
            vals = arr.f_values(float(Z.x1), float(Z.x2), float(Z.y1sq), float(Z.y2sq))[:, 0]
            for j in np.argsort(vals, kind="stable"):
                if vals[j] >= 1 + 1e-6:
                    break
                if norm_cZd(ess[j].c, ess[j].d, Z) < 1:
                    lower = ess[j]
                    break
            if lower is None:
                for V in ess:
                    if norm_cZd(V.c, V.d, Z) < 1:
                        lower = V
                        break
        if lower is None:
            break
        use(lower)
    else:
        raise PresentationError("side reduction did not terminate")
    if not _same(Z, Z0, ctx):
        raise PresentationError("side reduction did not return to Z0")
    # gamma_n ... gamma_1 M = +-I, so M = gamma_1^-1 ... gamma_n^-1
    word = [(sides[i].name, -1) for i in applied]
    if eval_word(word, pres.gen_dict(), ctx.k) != M:
        raise PresentationError("side decomposition check failed")
    return word
