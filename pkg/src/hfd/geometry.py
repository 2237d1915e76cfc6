"""Points of H^2 x H^2, the PSL2(R) action, and the floor functions f, h1, h0.

Coordinates: Z = (x1 + y1 i, x2 + y2 i) with
    x1 = s1 + s2*omega,  x2 = s1 + s2*omega',  r = y1/y2,  h = y1*y2,
so y1^2 = r*h and y2^2 = h/r.  Only squares of y are ever stored.

Exact points hold their four coordinates (x1, x2, y1^2, y2^2) as elements of K
evaluated in the first real embedding; the second coordinate x2 is therefore an
independent element of K, not the conjugate of x1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .ring import FieldCtx, KNum, QuadInt, omega_data


# -- group elements ------------------------------------------------------------

class GroupElem:
    """A matrix [[a, b], [c, d]] over R with determinant 1, taken modulo sign."""

    __slots__ = ("a", "b", "c", "d", "_f")

    def __init__(self, a: QuadInt, b: QuadInt, c: QuadInt, d: QuadInt, check: bool = True):
        self.a, self.b, self.c, self.d = a, b, c, d
        self._f = None
        if check and a * d - b * c != 1:
            raise ValueError(f"determinant of [[{a}, {b}], [{c}, {d}]] is not 1")

    @property
    def k(self) -> int:
        return self.a.k

    @classmethod
    def identity(cls, k: int) -> "GroupElem":
        return cls(QuadInt(k, 1), QuadInt(k, 0), QuadInt(k, 0), QuadInt(k, 1), check=False)

    @classmethod
    def from_ints(cls, k: int, entries) -> "GroupElem":
        """Build from four (a, b) coordinate pairs in the order a, b, c, d."""
        return cls(*(QuadInt(k, int(x), int(y)) for x, y in entries))

    def __mul__(self, o: "GroupElem") -> "GroupElem":
        return GroupElem(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
            check=False,
        )

    def inv(self) -> "GroupElem":
        return GroupElem(self.d, -self.b, -self.c, self.a, check=False)

    def __pow__(self, e: int) -> "GroupElem":
        base = self if e >= 0 else self.inv()
        e = abs(e)
        result = GroupElem.identity(self.k)
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def entries(self):
        return (self.a, self.b, self.c, self.d)

    def canonical(self) -> tuple:
        """Sign-normalized integer tuple; equal for M and -M."""
        flat = tuple(x for q in self.entries() for x in (q.a, q.b))
        for x in flat:
            if x:
                return flat if x > 0 else tuple(-y for y in flat)
        return flat  # pragma: no cover

    def __eq__(self, o):
        if not isinstance(o, GroupElem):
            return NotImplemented
        return self.canonical() == o.canonical()

    def __hash__(self):
        return hash(self.canonical())

    def is_identity(self) -> bool:
        return self.b == 0 and self.c == 0 and self.a == self.d and (self.a == 1 or self.a == -1)

    def floats(self) -> tuple[tuple[float, float, float, float], tuple[float, float, float, float]]:
        """Entries in the first and second real embeddings."""
        if self._f is None:
            e = self.entries()
            self._f = (tuple(x.emb1() for x in e), tuple(x.emb2() for x in e))
        return self._f

    def to_json(self):
        return [[str(q.a), str(q.b)] for q in self.entries()]

    def __repr__(self):
        return f"[[{self.a}, {self.b}], [{self.c}, {self.d}]]"


def translation(ctx: FieldCtx, b: QuadInt) -> GroupElem:
    return GroupElem(ctx.q(1), b, ctx.q(0), ctx.q(1), check=False)


def diag_unit(ctx: FieldCtx, m: int) -> GroupElem:
    return GroupElem(ctx.eps_pow(m), ctx.q(0), ctx.q(0), ctx.eps_pow(-m), check=False)


def P1(ctx: FieldCtx) -> GroupElem:
    return translation(ctx, ctx.q(1))


def P2(ctx: FieldCtx) -> GroupElem:
    return translation(ctx, ctx.omega)


def P3(ctx: FieldCtx) -> GroupElem:
    return diag_unit(ctx, 1)


# -- points --------------------------------------------------------------------

@dataclass(frozen=True)
class SRPoint:
    s1: Fraction
    s2: Fraction
    r: Fraction
    h: Fraction

    def __post_init__(self):
        for name in ("s1", "s2", "r", "h"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        if self.r <= 0 or self.h <= 0:
            raise ValueError("r and h must be positive")


@dataclass(frozen=True)
class XPoint:
    """Exact point with coordinates in K: x1, x2, y1^2, y2^2."""

    x1: KNum
    x2: KNum
    y1sq: KNum
    y2sq: KNum

    @property
    def k(self) -> int:
        return self.x1.k

    def s(self) -> tuple[KNum, KNum]:
        k0, t, _ = omega_data(self.k)
        w = KNum(self.k, Fraction(1, k0), Fraction(1, k0))
        wc = w.conj()
        s2 = (self.x1 - self.x2) / (w - wc)
        s1 = self.x1 - s2 * w
        return s1, s2

    def r_sq(self) -> KNum:
        return self.y1sq / self.y2sq

    def h_sq(self) -> KNum:
        return self.y1sq * self.y2sq

    def to_sr(self):
        """The SRPoint with these coordinates, or None when some coordinate is irrational."""
        s1, s2 = self.s()
        rsq, hsq = self.r_sq(), self.h_sq()
        if not (s1.is_rational() and s2.is_rational() and rsq.is_rational() and hsq.is_rational()):
            return None
        r, h = _frac_sqrt(rsq.to_fraction()), _frac_sqrt(hsq.to_fraction())
        if r is None or h is None:
            return None
        return SRPoint(s1.to_fraction(), s2.to_fraction(), r, h)

    def to_float(self) -> "FloatPoint":
        return FloatPoint(float(self.x1), float(self.x2),
                          math.sqrt(float(self.y1sq)), math.sqrt(float(self.y2sq)))

    def __repr__(self):
        return f"XPoint(x1={self.x1}, x2={self.x2}, y1sq={self.y1sq}, y2sq={self.y2sq})"


@dataclass(frozen=True)
class FloatPoint:
    x1: float
    x2: float
    y1: float
    y2: float

    def __post_init__(self):
        if not (self.y1 > 0 and self.y2 > 0):
            raise ValueError("y1, y2 must be positive")

    @property
    def r(self) -> float:
        return self.y1 / self.y2

    @property
    def h(self) -> float:
        return self.y1 * self.y2

    def s(self, k: int) -> tuple[float, float]:
        w1, w2 = omega_floats(k)
        s2 = (self.x1 - self.x2) / (w1 - w2)
        return self.x1 - s2 * w1, s2

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.y1, self.y2])


Point = Union[SRPoint, XPoint]


def _frac_sqrt(x: Fraction):
    if x < 0:
        return None
    n, d = math.isqrt(x.numerator), math.isqrt(x.denominator)
    if n * n == x.numerator and d * d == x.denominator:
        return Fraction(n, d)
    return None


def omega_floats(k: int) -> tuple[float, float]:
    k0, _, _ = omega_data(k)
    r = math.sqrt(k)
    return (1 + r) / k0, (1 - r) / k0


def sr_to_xy(ctx: FieldCtx, Z: SRPoint):
    """Return (x1, x2, y1^2, y2^2); x1, x2 in K and the squares rational."""
    w = ctx.omega.to_knum()
    x1 = w * Z.s2 + Z.s1
    x2 = w.conj() * Z.s2 + Z.s1
    return x1, x2, Z.r * Z.h, Z.h / Z.r


def xy_to_sr(ctx: FieldCtx, x1: KNum, x2: KNum, y1sq: Fraction, y2sq: Fraction) -> SRPoint:
    p = XPoint(x1, x2, KNum(ctx.k, y1sq), KNum(ctx.k, y2sq)).to_sr()
    if p is None:
        raise ValueError("coordinates are not rational in (s1, s2, r, h)")
    return p


def as_x(Z: Point, k: int) -> XPoint:
    if isinstance(Z, XPoint):
        return Z
    k0, _, _ = omega_data(k)
    w = KNum(k, Fraction(1, k0), Fraction(1, k0))
    return XPoint(w * Z.s2 + Z.s1, w.conj() * Z.s2 + Z.s1, KNum(k, Z.r * Z.h), KNum(k, Z.h / Z.r))


def sr_point(ctx: FieldCtx, s1, s2, r, h) -> XPoint:
    return as_x(SRPoint(s1, s2, r, h), ctx.k)


# -- exact evaluations ---------------------------------------------------------------

def _factors(c: QuadInt, d: QuadInt, Z: XPoint) -> tuple[KNum, KNum]:
    ck, dk = c.to_knum(), d.to_knum()
    cc, dc = ck.conj(), dk.conj()
    u = ck * Z.x1 + dk
    v = cc * Z.x2 + dc
    return u * u + ck * ck * Z.y1sq, v * v + cc * cc * Z.y2sq


def norm_cZd(c: QuadInt, d: QuadInt, Z: Point) -> KNum:
    """||cZ + d|| = ((c x1 + d)^2 + c^2 y1^2)((c' x2 + d')^2 + c'^2 y2^2), exactly."""
    Z = as_x(Z, c.k)
    p, q = _factors(c, d, Z)
    return p * q


def apply(g: GroupElem, Z: Point) -> XPoint:
    """Exact image g(Z) computed from the rational-in-y^2 action formulas."""
    Z = as_x(Z, g.k)
    a, b, c, d = (q.to_knum() for q in g.entries())
    ac, bc, cc, dc = a.conj(), b.conj(), c.conj(), d.conj()

    def one(a, b, c, d, x, ysq):
        u = c * x + d
        den = u * u + c * c * ysq
        xn = ((a * x + b) * u + a * c * ysq) / den
        return xn, ysq / (den * den)

    x1, y1sq = one(a, b, c, d, Z.x1, Z.y1sq)
    x2, y2sq = one(ac, bc, cc, dc, Z.x2, Z.y2sq)
    return XPoint(x1, x2, y1sq, y2sq)


def apply_sr(g: GroupElem, Z: Point):
    """g(Z) as an SRPoint when its (s1, s2, r, h) are rational, else as an XPoint."""
    p = apply(g, Z)
    sr = p.to_sr()
    return sr if sr is not None else p


def same_point(P: Point, Q: Point) -> bool:
    k = P.k if isinstance(P, XPoint) else Q.k if isinstance(Q, XPoint) else None
    if k is None:
        return P == Q
    P, Q = as_x(P, k), as_x(Q, k)
    return P.x1 == Q.x1 and P.x2 == Q.x2 and P.y1sq == Q.y1sq and P.y2sq == Q.y2sq


# -- float evaluations ---------------------------------------------------------------

def apply_float(g: GroupElem, Z: FloatPoint) -> FloatPoint:
    (a1, b1, c1, d1), (a2, b2, c2, d2) = g.floats()
    z1 = complex(Z.x1, Z.y1)
    z2 = complex(Z.x2, Z.y2)
    w1 = (a1 * z1 + b1) / (c1 * z1 + d1)
    w2 = (a2 * z2 + b2) / (c2 * z2 + d2)
    return FloatPoint(w1.real, w2.real, w1.imag, w2.imag)


def f_float(c: QuadInt, d: QuadInt, Z: FloatPoint) -> float:
    c1, c2, d1, d2 = c.emb1(), c.emb2(), d.emb1(), d.emb2()
    return (((c1 * Z.x1 + d1) ** 2 + c1 * c1 * Z.y1 ** 2)
            * ((c2 * Z.x2 + d2) ** 2 + c2 * c2 * Z.y2 ** 2))


def f_cd(c: QuadInt, d: QuadInt, x1: float, x2: float, r: float, v: float) -> float:
    """f_{c,d,x1,x2,r}(v): the value of ||cZ+d|| at height v."""
    c1, c2, d1, d2 = c.emb1(), c.emb2(), d.emb1(), d.emb2()
    u, w = c1 * x1 + d1, c2 * x2 + d2
    n = c1 * c2
    return (u * w) ** 2 + (u * u * c2 * c2 / r + w * w * c1 * c1 * r) * v + n * n * v * v


def h1_arrays(C1, C2, D1, D2, X1, X2, R):
    """Vectorized h1; entries with no positive root are 0.

    C*, D* broadcast against X1, X2, R.  Solves N^2 v^2 + B v + A^2 = 1.
    """
    u = C1 * X1 + D1
    w = C2 * X2 + D2
    a2 = (u * w) ** 2
    B = u * u * C2 * C2 / R + w * w * C1 * C1 * R
    n2 = (C1 * C2) ** 2
    one_minus = 1.0 - a2
    disc = np.sqrt(B * B + 4.0 * n2 * np.maximum(one_minus, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        root = 2.0 * one_minus / (B + disc)
    return np.where(one_minus > 0, root, 0.0)


def h1(c: QuadInt, d: QuadInt, x1: float, x2: float, r: float):
    """Positive height v with f_{c,d,x1,x2,r}(v) = 1, or None if there is none."""
    if not c:
        raise ValueError("h1 needs c != 0")
    if r <= 0:
        raise ValueError("r must be positive")
    v = float(h1_arrays(c.emb1(), c.emb2(), d.emb1(), d.emb2(), x1, x2, r))
    return v if v > 0 else None


@dataclass
class PairArrays:
    """First and second embeddings of a list of (c, d) pairs as float arrays."""

    C1: np.ndarray
    C2: np.ndarray
    D1: np.ndarray
    D2: np.ndarray

    @classmethod
    def of(cls, pairs) -> "PairArrays":
        return cls(
            np.array([c.emb1() for c, _ in pairs]),
            np.array([c.emb2() for c, _ in pairs]),
            np.array([d.emb1() for _, d in pairs]),
            np.array([d.emb2() for _, d in pairs]),
        )

    def h1_grid(self, s1, s2, r, k: int) -> np.ndarray:
        """h1 for every pair (rows) at every point (columns)."""
        w1, w2 = omega_floats(k)
        s1, s2, r = (np.atleast_1d(np.asarray(x, dtype=float)) for x in (s1, s2, r))
        X1 = (s1 + s2 * w1)[None, :]
        X2 = (s1 + s2 * w2)[None, :]
        return h1_arrays(self.C1[:, None], self.C2[:, None], self.D1[:, None], self.D2[:, None],
                         X1, X2, r[None, :])

    def f_values(self, x1, x2, y1sq, y2sq) -> np.ndarray:
        """||cZ+d|| for every pair (rows) at every point (columns)."""
        x1, x2, y1sq, y2sq = (np.atleast_1d(np.asarray(v, dtype=float))[None, :]
                              for v in (x1, x2, y1sq, y2sq))
        C1, C2, D1, D2 = (v[:, None] for v in (self.C1, self.C2, self.D1, self.D2))
        return ((C1 * x1 + D1) ** 2 + C1 * C1 * y1sq) * ((C2 * x2 + D2) ** 2 + C2 * C2 * y2sq)


def h0(ctx: FieldCtx, S1, s1: float, s2: float, r: float) -> float:
    """Floor height max over S1 of h1 (0 when no pair has a root)."""
    arr = S1.arrays if hasattr(S1, "arrays") else PairArrays.of(S1)
    return float(arr.h1_grid(s1, s2, r, ctx.k).max(axis=0)[0])


def h0_grid(ctx: FieldCtx, S1, s1, s2, r) -> np.ndarray:
    arr = S1.arrays if hasattr(S1, "arrays") else PairArrays.of(S1)
    return arr.h1_grid(s1, s2, r, ctx.k).max(axis=0)
