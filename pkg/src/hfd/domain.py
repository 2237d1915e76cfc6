"""The finite floor set S1, exact membership in F_inf and F, and reduction into F."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .geometry import (
    GroupElem,
    PairArrays,
    Point,
    XPoint,
    apply,
    as_x,
    diag_unit,
    norm_cZd,
    omega_floats,
    translation,
)
from .ring import (
    FieldCtx,
    KNum,
    QuadInt,
    canonical_elements,
    canonical_pair,
    complete_to_matrix,
    ideal_norm,
    is_pid,
)

log = logging.getLogger(__name__)

REDUCE_CAP = 10_000


class UnsupportedField(ValueError):
    """The ring of integers is not a PID, so the floor theorem does not apply."""


class ReductionError(RuntimeError):
    pass


# -- hypersurfaces -----------------------------------------------------------------------

WALL_KINDS = ("V1+", "V1-", "V2+", "V2-", "V3+", "V3-")


@dataclass(frozen=True)
class Hypersurface:
    kind: str
    c: Optional[QuadInt] = None
    d: Optional[QuadInt] = None

    @property
    def is_wall(self) -> bool:
        return self.kind != "Vcd"

    @property
    def name(self) -> str:
        if self.is_wall:
            return self.kind
        return f"V({self.c},{self.d})"

    def __repr__(self):
        return self.name


WALLS = tuple(Hypersurface(kd) for kd in WALL_KINDS)


def floor(c: QuadInt, d: QuadInt) -> Hypersurface:
    return Hypersurface("Vcd", c, d)


# -- S1 ----------------------------------------------------------------------------------

@dataclass
class S1Set:
    ctx: FieldCtx
    pairs: list
    _mats: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.arrays = PairArrays.of(self.pairs)
        self.index = {(tuple(c), tuple(d)): i for i, (c, d) in enumerate(self.pairs)}
        self.norms = np.array([abs(c.norm()) for c, _ in self.pairs], dtype=float)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def find(self, c: QuadInt, d: QuadInt) -> Optional[int]:
        """Index of the unit class of (c, d), or None."""
        cc, dd = canonical_pair(self.ctx, c, d)
        return self.index.get((tuple(cc), tuple(dd)))

    def matrix(self, i: int) -> GroupElem:
        """P_{c,d} for the i-th pair."""
        if i not in self._mats:
            c, d = self.pairs[i]
            a, b = complete_to_matrix(c, d)
            self._mats[i] = GroupElem(a, b, c, d)
        return self._mats[i]

    def to_json(self) -> dict:
        return {
            "k": self.ctx.k,
            "k0": self.ctx.k0,
            "eps0": [str(self.ctx.eps0.a), str(self.ctx.eps0.b)],
            "pairs": [{"c": [str(c.a), str(c.b)], "d": [str(d.a), str(d.b)]} for c, d in self.pairs],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _cond_constants(ctx: FieldCtx, n: int):
    """(A, m1, m2): A = 2k/(N^2 k0^2) - k0^2/(2k); m1 = (1+omega)/2; m2 = (1-omega')/2."""
    k, k0 = ctx.k, ctx.k0
    A = Fraction(2 * k, n * n * k0 * k0) - Fraction(k0 * k0, 2 * k)
    w = ctx.omega.to_knum()
    return A, (w + 1) / 2, (1 - w.conj()) / 2


def _bound_holds(value: KNum, const: KNum, eps_sq_A: KNum) -> bool:
    # |x| < eps0*sqrt(A) + const, decided by squaring the nonnegative part
    L = abs(value) - const
    if L.sign() < 0:
        return True
    return L * L < eps_sq_A


def conditions_12(ctx: FieldCtx, c: QuadInt, d: QuadInt) -> dict:
    """Evaluate each floor condition exactly; keys name the condition."""
    out = {"c_nonzero": bool(c)}
    if not c:
        out.update(coprime=False, norm_bound=False, bound1=False, bound2=False)
        return out
    n = abs(c.norm())
    out["coprime"] = ideal_norm(c, d) == 1
    out["norm_bound"] = n * ctx.k0 * ctx.k0 <= 2 * ctx.k
    if not out["norm_bound"]:
        out["bound1"] = out["bound2"] = False
        return out
    A, m1, m2 = _cond_constants(ctx, n)
    e2A = ctx.eps0.to_knum() ** 2 * A
    q = d.to_knum() / c.to_knum()
    out["bound1"] = _bound_holds(q, m1, e2A)
    out["bound2"] = _bound_holds(q.conj(), m2, e2A)
    return out


def satisfies_conditions(ctx: FieldCtx, c: QuadInt, d: QuadInt) -> bool:
    return all(conditions_12(ctx, c, d).values())


def check_supported(ctx: FieldCtx) -> None:
    if not is_pid(ctx):
        raise UnsupportedField(f"Z[omega] for k={ctx.k} is not a principal ideal domain")


def enumerate_s1(ctx: FieldCtx, canonicalize: bool = False) -> S1Set:
    """All unit classes (c, d) satisfying the floor conditions, canonical and sorted.

    With ``canonicalize`` the d-search runs over every unit multiple of each c in a
    window and the result is canonicalized afterwards; used to cross-check the default.
    """
    check_supported(ctx)
    k0 = ctx.k0
    max_norm = (2 * ctx.k) // (k0 * k0)
    w1, w2 = omega_floats(ctx.k)
    span = w1 - w2
    found = {}
    cs = canonical_elements(ctx, max_norm)
    if canonicalize:
        cs = [c * ctx.eps_pow(j) * s for c in cs for j in (-1, 0, 1) for s in (1, -1)]
    for c in cs:
        n = abs(c.norm())
        A, m1, m2 = _cond_constants(ctx, n)
        root = ctx.eps_float * math.sqrt(float(A))
        lim1 = (root + float(m1)) * abs(c.emb1()) * (1 + 1e-9) + 1e-9
        lim2 = (root + float(m2)) * abs(c.emb2()) * (1 + 1e-9) + 1e-9
        # d = a + b*omega with |d1| < lim1 and |d2| < lim2
        for b in range(math.floor(-(lim1 + lim2) / span) - 1, math.ceil((lim1 + lim2) / span) + 2):
            lo = math.floor(max(-lim1 - b * w1, -lim2 - b * w2)) - 1
            hi = math.ceil(min(lim1 - b * w1, lim2 - b * w2)) + 1
            for a in range(lo, hi + 1):
                d = QuadInt(ctx.k, a, b)
                if not satisfies_conditions(ctx, c, d):
                    continue
                cc, dd = canonical_pair(ctx, c, d)
                found[(tuple(cc), tuple(dd))] = (cc, dd)
    pairs = sorted(found.values(), key=lambda p: (abs(p[0].norm()), p[0].emb1(), p[0].emb2(),
                                                  p[1].emb1(), p[1].emb2()))
    return S1Set(ctx, pairs)


# -- exact membership ---------------------------------------------------------------------

def _eps4(ctx: FieldCtx) -> tuple[KNum, KNum]:
    e = ctx.eps0.to_knum()
    e4 = e ** 4
    return e4, e4.inverse()


def wall_values(ctx: FieldCtx, Z: Point) -> dict:
    """Signed exact quantities whose sign decides each wall: >= 0 inside F_inf."""
    Z = as_x(Z, ctx.k)
    s1, s2 = Z.s()
    half = Fraction(1, 2)
    e4, e4i = _eps4(ctx)
    rsq = Z.r_sq()
    return {
        "V1+": half - s1,
        "V1-": s1 + half,
        "V2+": half - s2,
        "V2-": s2 + half,
        "V3+": e4 - rsq,
        "V3-": rsq - e4i,
    }


def in_Finf(ctx: FieldCtx, Z: Point) -> bool:
    return all(v.sign() >= 0 for v in wall_values(ctx, Z).values())


def in_Finf_interior(ctx: FieldCtx, Z: Point) -> bool:
    return all(v.sign() > 0 for v in wall_values(ctx, Z).values())


def in_F(ctx: FieldCtx, S1: S1Set, Z: Point) -> bool:
    Z = as_x(Z, ctx.k)
    return in_Finf(ctx, Z) and all(norm_cZd(c, d, Z) >= 1 for c, d in S1.pairs)


def in_F_interior(ctx: FieldCtx, S1: S1Set, Z: Point) -> bool:
    Z = as_x(Z, ctx.k)
    return in_Finf_interior(ctx, Z) and all(norm_cZd(c, d, Z) > 1 for c, d in S1.pairs)


def on_surface(ctx: FieldCtx, V: Hypersurface, Z: Point) -> bool:
    Z = as_x(Z, ctx.k)
    if V.is_wall:
        return wall_values(ctx, Z)[V.kind].sign() == 0
    return norm_cZd(V.c, V.d, Z) == 1


def strictly_inside_except(ctx: FieldCtx, S1: S1Set, Z: Point, V: Hypersurface) -> bool:
    """Z lies on V, in F, and strictly inside every other constraint of F."""
    Z = as_x(Z, ctx.k)
    if not V.is_wall and norm_cZd(V.c, V.d, Z) != 1:
        return False
    for kind, val in wall_values(ctx, Z).items():
        sg = val.sign()
        if kind == V.kind:
            if sg != 0:
                return False
        elif sg <= 0:
            return False
    for c, d in S1.pairs:
        if not V.is_wall and (c, d) == (V.c, V.d):
            continue
        if not norm_cZd(c, d, Z) > 1:
            return False
    return True


# -- Gamma_inf normalization and reduction ------------------------------------------------

def normalize_inf(ctx: FieldCtx, Z: Point):
    """Return (T, m, (b1, b2), T(Z)) with T = P1^b1 P2^b2 P3^m and T(Z) in F_inf.

    m is the least integer with r in [eps0^-2, eps0^2] after P3^m; b_i the least with
    s_i + b_i >= -1/2.
    """
    Z = as_x(Z, ctx.k)
    rsq = Z.r_sq()
    e4, e4i = _eps4(ctx)
    le = math.log(ctx.eps_float)
    rf = float(rsq)
    m = math.ceil((-4 * le - math.log(rf)) / (8 * le)) if rf > 0 else 0

    def ok(mm):
        return rsq * ctx.eps_pow(8 * mm).to_knum() >= e4i

    while ok(m - 1):
        m -= 1
    while not ok(m):
        m += 1
    T = diag_unit(ctx, m)
    W = apply(T, Z) if m else Z
    s1, s2 = W.s()
    b1 = (Fraction(-1, 2) - s1).ceil()
    b2 = (Fraction(-1, 2) - s2).ceil()
    if b1 or b2:
        tr = translation(ctx, ctx.q(b1, b2))
        W = apply(tr, W)
        T = tr * T
    return T, m, (b1, b2), W


@dataclass
class ReduceResult:
    gamma: GroupElem
    point: XPoint
    steps: list  # ("T", m, b1, b2) or ("P", pair index)
    heights: list  # exact h^2 after each floor step, starting with the input

    def __iter__(self):
        yield self.gamma
        yield self.point


def _lower_pair(S1: S1Set, Z: XPoint, exhaustive: bool) -> Optional[int]:
    """A pair with ||cZ+d|| < 1 (smallest float value first), or None."""
    if exhaustive:
        order = range(len(S1))
    else:
        try:
            vals = S1.arrays.f_values(float(Z.x1), float(Z.x2), float(Z.y1sq), float(Z.y2sq))[:, 0]
        except OverflowError:
            return _lower_pair(S1, Z, True)
        cand = np.nonzero(~(vals >= 1 + 1e-6))[0]
        order = cand[np.argsort(vals[cand], kind="stable")]
    for i in order:
        c, d = S1.pairs[int(i)]
        if norm_cZd(c, d, Z) < 1:
            return int(i)
    return None


def reduce(ctx: FieldCtx, S1: S1Set, Z: Point, cap: int = REDUCE_CAP) -> ReduceResult:
    """Move Z into F; returns gamma with gamma(Z) = point."""
    Z = as_x(Z, ctx.k)
    g = GroupElem.identity(ctx.k)
    steps = []
    heights = [Z.h_sq()]
    for _ in range(cap):
        T, m, (b1, b2), Z = normalize_inf(ctx, Z)
        if m or b1 or b2:
            g = T * g
            steps.append(("T", m, b1, b2))
        i = _lower_pair(S1, Z, exhaustive=False)
        if i is None:
            i = _lower_pair(S1, Z, exhaustive=True)
            if i is None:
                return ReduceResult(g, Z, steps, heights)
        P = S1.matrix(i)
        Z = apply(P, Z)
        g = P * g
        steps.append(("P", i))
        hsq = Z.h_sq()
        if not hsq > heights[-1]:
            raise ReductionError(f"height did not increase at step {len(steps)}: {heights[-3:]}")
        heights.append(hsq)
    trace = ", ".join(f"{float(h):.3g}" for h in heights[-10:])
    raise ReductionError(f"reduction exceeded {cap} steps; last h^2: {trace}")


# -- float margins -------------------------------------------------------------------------

class Catalog:
    """Float evaluation of all constraints of F: six walls, then one per S1 pair.

    A margin is >= 0 inside F and 0 on the hypersurface; walls use s or log r, floors log f.
    """

    def __init__(self, ctx: FieldCtx, S1: S1Set):
        self.ctx = ctx
        self.S1 = S1
        self.surfaces = list(WALLS) + [floor(c, d) for c, d in S1.pairs]
        self.index = {V: i for i, V in enumerate(self.surfaces)}
        self.w1, self.w2 = omega_floats(ctx.k)
        self.log_e2 = 2 * math.log(ctx.eps_float)

    def __len__(self):
        return len(self.surfaces)

    def margins(self, x1, x2, y1, y2) -> np.ndarray:
        """Shape (len(catalog), n) for arrays of n points."""
        x1, x2, y1, y2 = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (x1, x2, y1, y2))
        s2 = (x1 - x2) / (self.w1 - self.w2)
        s1 = x1 - s2 * self.w1
        lr = np.log(y1 / y2)
        walls = np.stack([0.5 - s1, s1 + 0.5, 0.5 - s2, s2 + 0.5, self.log_e2 - lr, lr + self.log_e2])
        with np.errstate(divide="ignore"):
            fl = np.log(self.S1.arrays.f_values(x1, x2, y1 * y1, y2 * y2))
        return np.vstack([walls, fl])

    def margins_sr(self, s1, s2, r, h) -> np.ndarray:
        s1, s2, r, h = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (s1, s2, r, h))
        y1 = np.sqrt(r * h)
        y2 = np.sqrt(h / r)
        return self.margins(s1 + s2 * self.w1, s1 + s2 * self.w2, y1, y2)


# -- essential floors ----------------------------------------------------------------------

def box_grid(ctx: FieldCtx, n: int):
    """An n^3 grid on B = [-1/2, 1/2]^2 x [eps0^-2, eps0^2] (r spaced logarithmically)."""
    le = 2 * math.log(ctx.eps_float)
    s = np.linspace(-0.5, 0.5, n)
    lr = np.linspace(-le, le, n)
    S1g, S2g, LR = np.meshgrid(s, s, lr, indexing="ij")
    return S1g.ravel(), S2g.ravel(), np.exp(LR.ravel())


def rationalize(x: float, den: int) -> Fraction:
    return Fraction(x).limit_denominator(den)


def floor_point(ctx: FieldCtx, c: QuadInt, d: QuadInt, s1: Fraction, s2: Fraction, y1sq: Fraction):
    """Exact point on V_{c,d} with rational s1, s2, y1^2; y2^2 solved in K.  None if y2^2 <= 0."""
    k = ctx.k
    w = ctx.omega.to_knum()
    x1 = w * s2 + s1
    x2 = w.conj() * s2 + s1
    ck, dk = c.to_knum(), d.to_knum()
    cc, dc = ck.conj(), dk.conj()
    u = ck * x1 + dk
    p1 = u * u + ck * ck * y1sq
    v = cc * x2 + dc
    y2sq = (p1.inverse() - v * v) / (cc * cc)
    if y2sq.sign() <= 0:
        return None
    return XPoint(x1, x2, KNum(k, y1sq), y2sq)


def _floor_margin(cat: Catalog, i: int, s1, s2, lr, extra=None) -> float:
    """Least strict margin at the floor point above (s1, s2, e^lr) on pair i."""
    r = math.exp(lr)
    H = cat.S1.arrays.h1_grid(s1, s2, r, cat.ctx.k)[:, 0]
    h = H[i]
    if h <= 0:
        return -1.0
    m = cat.margins_sr(s1, s2, r, h)[:, 0]
    m[6 + i] = np.inf
    val = float(m.min())
    if extra is not None:
        val = min(val, extra(s1, s2, r, h))
    return val


def floor_margins_on_grid(cat: Catalog, i: int, g1, g2, gr, hi) -> np.ndarray:
    """Strict margin of the floor point of pair i above each grid point (-1 where absent)."""
    ok = hi > 0
    out = np.full(len(g1), -1.0)
    if ok.any():
        m = cat.margins_sr(g1[ok], g2[ok], gr[ok], hi[ok])
        m[6 + i] = np.inf
        out[ok] = m.min(axis=0)
    return out


def optimize_floor_seed(cat: Catalog, i: int, seeds, extra=None):
    """Maximize the strict margin on floor i starting from the best of ``seeds``."""
    best = None
    for s1, s2, r in seeds:
        val = _floor_margin(cat, i, s1, s2, math.log(r), extra)
        if best is None or val > best[0]:
            best = (val, (s1, s2, math.log(r)))
    if best is None:
        return None
    res = minimize(lambda p: -_floor_margin(cat, i, p[0], p[1], p[2], extra), np.array(best[1]),
                   method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 600})
    val = -res.fun
    if val < best[0]:
        return best
    return val, tuple(res.x)


def exact_floor_witness(ctx: FieldCtx, S1: S1Set, i: int, s1: float, s2: float, r: float, check=None):
    """Round a float floor point to an exact strict witness on V_{c_i,d_i}; None on failure."""
    c, d = S1.pairs[i]
    V = floor(c, d)
    h = float(S1.arrays.h1_grid(s1, s2, r, ctx.k)[i, 0])
    if h <= 0:
        return None
    for den in (10**3, 10**5, 10**8, 10**12):
        Z = floor_point(ctx, c, d, rationalize(s1, den), rationalize(s2, den), rationalize(r * h, den))
        if Z is None:
            continue
        if strictly_inside_except(ctx, S1, Z, V) and (check is None or check(Z)):
            return Z
    return None


@dataclass
class EssentialFloors:
    surfaces: list  # walls then certified floors
    witnesses: dict  # Hypersurface -> XPoint, floors only
    undetermined: list  # floors of S1 without an exact witness


def essential_floors(ctx: FieldCtx, S1: S1Set, grid: int = 17) -> EssentialFloors:
    cat = Catalog(ctx, S1)
    g1, g2, gr = box_grid(ctx, grid)
    H = S1.arrays.h1_grid(g1, g2, gr, ctx.k)
    top = H.argmax(axis=0)
    le = 2 * math.log(ctx.eps_float)
    interior = (np.abs(g1) < 0.5) & (np.abs(g2) < 0.5) & (np.abs(np.log(gr)) < le - 1e-12)
    witnesses = {}
    undetermined = []
    for i, (c, d) in enumerate(S1.pairs):
        V = floor(c, d)
        if H[i].max() <= 0:
            undetermined.append(V)
            continue
        marg = floor_margins_on_grid(cat, i, g1, g2, gr, H[i])
        idx = np.argsort(-marg, kind="stable")[:5]
        seeds = [(g1[j], g2[j], gr[j]) for j in idx if H[i, j] > 0]
        opt = optimize_floor_seed(cat, i, seeds)
        Z = None
        if opt is not None and opt[0] > 0:
            s1, s2, lr = opt[1]
            Z = exact_floor_witness(ctx, S1, i, s1, s2, math.exp(lr))
        if Z is None:
            if ((top == i) & interior).any():
                log.warning("floor %s is the top floor on the grid but has no exact witness", V.name)
            undetermined.append(V)
        else:
            witnesses[V] = Z
    floors = [V for V in (floor(c, d) for c, d in S1.pairs) if V in witnesses]
    return EssentialFloors(list(WALLS) + floors, witnesses, undetermined)


# -- the hypersurface of a transformation --------------------------------------------------

def surface_of(ctx: FieldCtx, g: GroupElem) -> Hypersurface:
    """The hypersurface V_g carrying the side of g: V_{c,d} when c != 0, else the wall that g moves into F_inf."""
    if g.c:
        c, d = canonical_pair(ctx, g.c, g.d)
        return floor(c, d)
    a, b = g.a, g.b
    if a.to_knum().sign() < 0:
        a, b = -a, -b
    ak = a.to_knum()
    if ak != 1:
        return WALLS[4] if ak < 1 else WALLS[5]
    s1, s2 = b.a, b.b
    if s1:
        return WALLS[0] if s1 < 0 else WALLS[1]
    if s2:
        return WALLS[2] if s2 < 0 else WALLS[3]
    raise ValueError("the identity has no hypersurface")
