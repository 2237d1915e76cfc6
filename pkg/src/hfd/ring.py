"""Exact arithmetic in K = Q(sqrt k) and its ring of integers R = Z[omega].

omega = (1 + sqrt k) / k0 with k0 = 2 when k = 1 (mod 4) and k0 = 1 otherwise.
Elements of R are stored by their integer coordinates in the basis (1, omega);
elements of K as (a + b sqrt k) / d with integers a, b, d.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Union

log = logging.getLogger(__name__)

Rational = Union[int, Fraction]

# Norm-Euclidean real quadratic fields; every k here has class number one.
NORM_EUCLIDEAN = (2, 3, 5, 6, 7, 11, 13, 17, 19, 21, 29, 33, 37, 41, 57, 73)


class CompletionError(ArithmeticError):
    """No unimodular completion was found within the configured search bound."""


def is_squarefree(n: int) -> bool:
    if n < 1:
        return False
    p = 2
    while p * p <= n:
        if n % (p * p) == 0:
            return False
        p += 1
    return True


@lru_cache(maxsize=None)
def omega_data(k: int) -> tuple[int, int, int]:
    """Return (k0, t, n) with omega^2 = t*omega - n."""
    k0 = 2 if k % 4 == 1 else 1
    # trace and norm of omega
    t = 2 // k0
    n = (1 - k) // (k0 * k0)
    return k0, t, n


class KNum:
    """An element (a + b*sqrt(k)) / d of Q(sqrt k), always normalized."""

    __slots__ = ("a", "b", "d", "k")

    def __init__(self, k: int, p: Rational = 0, q: Rational = 0):
        p = Fraction(p)
        q = Fraction(q)
        d = p.denominator * q.denominator // math.gcd(p.denominator, q.denominator)
        self.k = k
        self._set(p.numerator * (d // p.denominator), q.numerator * (d // q.denominator), d)

    def _set(self, a: int, b: int, d: int) -> None:
        if d < 0:
            a, b, d = -a, -b, -d
        g = math.gcd(a, b, d)
        if g != 1:
            a //= g
            b //= g
            d //= g
        self.a = a
        self.b = b
        self.d = d

    @classmethod
    def raw(cls, k: int, a: int, b: int, d: int = 1) -> "KNum":
        obj = cls.__new__(cls)
        obj.k = k
        obj._set(a, b, d)
        return obj

    # -- coercion --------------------------------------------------------
    def _coerce(self, other) -> "KNum":
        if isinstance(other, KNum):
            if other.k != self.k:
                raise ValueError(f"mixing Q(sqrt {self.k}) and Q(sqrt {other.k})")
            return other
        if isinstance(other, QuadInt):
            return other.to_knum()
        if isinstance(other, int):
            return KNum.raw(self.k, other, 0, 1)
        if isinstance(other, Fraction):
            return KNum.raw(self.k, other.numerator, 0, other.denominator)
        return NotImplemented

    @property
    def p(self) -> Fraction:
        return Fraction(self.a, self.d)

    @property
    def q(self) -> Fraction:
        return Fraction(self.b, self.d)

    # -- arithmetic ------------------------------------------------------
    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if self.d == o.d:
            return KNum.raw(self.k, self.a + o.a, self.b + o.b, self.d)
        return KNum.raw(self.k, self.a * o.d + o.a * self.d, self.b * o.d + o.b * self.d, self.d * o.d)

    __radd__ = __add__

    def __neg__(self):
        return KNum.raw(self.k, -self.a, -self.b, self.d)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o + (-self)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return KNum.raw(
            self.k,
            self.a * o.a + self.k * self.b * o.b,
            self.a * o.b + self.b * o.a,
            self.d * o.d,
        )

    __rmul__ = __mul__

    def inverse(self) -> "KNum":
        n = self.a * self.a - self.k * self.b * self.b
        if n == 0:
            raise ZeroDivisionError("KNum division by zero")
        # 1/x = d * conj / (a^2 - k b^2)
        return KNum.raw(self.k, self.d * self.a, -self.d * self.b, n)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o * self.inverse()

    def __pow__(self, e: int):
        if e < 0:
            return self.inverse() ** (-e)
        result = KNum.raw(self.k, 1, 0, 1)
        base = self
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def conj(self) -> "KNum":
        return KNum.raw(self.k, self.a, -self.b, self.d)

    def norm(self) -> Fraction:
        return Fraction(self.a * self.a - self.k * self.b * self.b, self.d * self.d)

    def trace(self) -> Fraction:
        return Fraction(2 * self.a, self.d)

    # -- order -----------------------------------------------------------
    def sign(self) -> int:
        a, b = self.a, self.b
        if a >= 0 and b >= 0:
            return 1 if (a or b) else 0
        if a <= 0 and b <= 0:
            return -1
        s = a * a - self.k * b * b
        if a > 0:
            return 1 if s > 0 else -1
        return 1 if s < 0 else -1

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def _cmp(self, other) -> int:
        o = self._coerce(other)
        if o is NotImplemented:
            raise TypeError(f"cannot compare KNum with {type(other).__name__}")
        return (self - o).sign()

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, KNum, QuadInt)):
            o = self._coerce(other)
            return self.a == o.a and self.b == o.b and self.d == o.d
        return NotImplemented

    def __hash__(self):
        if self.b == 0:
            return hash(Fraction(self.a, self.d))
        return hash((self.a, self.b, self.d, self.k))

    def __bool__(self):
        return bool(self.a or self.b)

    def is_rational(self) -> bool:
        return self.b == 0

    def to_fraction(self) -> Fraction:
        if self.b:
            raise ValueError(f"{self} is irrational")
        return Fraction(self.a, self.d)

    def __float__(self):
        a, b, d, k = self.a, self.b, self.d, self.k
        r = math.sqrt(k)
        if b == 0:
            return a / d
        if (a >= 0) == (b >= 0) or a == 0:
            return a / d + (b / d) * r
        # opposite signs: divide the exact norm by the cancellation-free conjugate
        n = a * a - k * b * b
        return (n / d) / (a - b * r)

    def floor(self) -> int:
        """Exact floor of the real number."""
        guess = math.floor(float(self))
        while self < guess:
            guess -= 1
        while self >= guess + 1:
            guess += 1
        return guess

    def ceil(self) -> int:
        return -((-self).floor())

    def __repr__(self):
        return f"KNum({self.p} + {self.q}*sqrt({self.k}))"

    def __str__(self):
        if self.b == 0:
            return str(self.p)
        return f"{self.p} + {self.q}*sqrt({self.k})" if self.a else f"{self.q}*sqrt({self.k})"


def sign(x: KNum) -> int:
    """Exact sign of p + q*sqrt(k)."""
    return x.sign()


class QuadInt:
    """An element a + b*omega of R = Z[omega]."""

    __slots__ = ("a", "b", "k")

    def __init__(self, k: int, a: int = 0, b: int = 0):
        self.k = k
        self.a = a
        self.b = b

    def _coerce(self, other):
        if isinstance(other, QuadInt):
            if other.k != self.k:
                raise ValueError("mixing rings")
            return other
        if isinstance(other, int):
            return QuadInt(self.k, other, 0)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            if isinstance(other, (KNum, Fraction)):
                return self.to_knum() + other
            return o
        return QuadInt(self.k, self.a + o.a, self.b + o.b)

    __radd__ = __add__

    def __neg__(self):
        return QuadInt(self.k, -self.a, -self.b)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            if isinstance(other, (KNum, Fraction)):
                return self.to_knum() - other
            return o
        return QuadInt(self.k, self.a - o.a, self.b - o.b)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            if isinstance(other, (KNum, Fraction)):
                return self.to_knum() * other
            return o
        _, t, n = omega_data(self.k)
        bb = self.b * o.b
        return QuadInt(self.k, self.a * o.a - n * bb, self.a * o.b + self.b * o.a + t * bb)

    __rmul__ = __mul__

    def __truediv__(self, other) -> KNum:
        return self.to_knum() / other

    def __pow__(self, e: int) -> "QuadInt":
        if e < 0:
            raise ValueError("negative powers live in K; use FieldCtx.eps_pow or to_knum()")
        result = QuadInt(self.k, 1, 0)
        base = self
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def conj(self) -> "QuadInt":
        _, t, _ = omega_data(self.k)
        return QuadInt(self.k, self.a + t * self.b, -self.b)

    def norm(self) -> int:
        _, t, n = omega_data(self.k)
        return self.a * self.a + t * self.a * self.b + n * self.b * self.b

    def trace(self) -> int:
        _, t, _ = omega_data(self.k)
        return 2 * self.a + t * self.b

    def is_unit(self) -> bool:
        return abs(self.norm()) == 1

    def to_knum(self) -> KNum:
        k0, _, _ = omega_data(self.k)
        return KNum.raw(self.k, self.a * k0 + self.b, self.b, k0)

    def emb1(self) -> float:
        return float(self.to_knum())

    def emb2(self) -> float:
        return float(self.to_knum().conj())

    def divexact(self, other: "QuadInt") -> "QuadInt":
        """Return self/other, raising ArithmeticError if it is not in R."""
        q = from_knum(self.to_knum() / other.to_knum())
        if q is None:
            raise ArithmeticError(f"{other} does not divide {self}")
        return q

    def __eq__(self, other):
        if isinstance(other, int):
            return self.b == 0 and self.a == other
        if isinstance(other, QuadInt):
            return self.k == other.k and self.a == other.a and self.b == other.b
        if isinstance(other, KNum):
            return self.to_knum() == other
        return NotImplemented

    def __hash__(self):
        if self.b == 0:
            return hash(self.a)
        return hash((self.a, self.b, self.k))

    def __bool__(self):
        return bool(self.a or self.b)

    def __iter__(self) -> Iterator[int]:
        yield self.a
        yield self.b

    def __repr__(self):
        return f"QuadInt({self.a}, {self.b})"

    def __str__(self):
        if self.b == 0:
            return str(self.a)
        w = "w" if self.b == 1 else ("-w" if self.b == -1 else f"{self.b}*w")
        if self.a == 0:
            return w
        return f"{self.a}{'+' if self.b > 0 else ''}{w}"


def from_knum(x: KNum):
    """Convert an element of K to R, or return None when x is not integral."""
    k0, _, _ = omega_data(x.k)
    # x = (A + B sqrt k)/D = a + b*omega  =>  b = B*k0/D, a = (A - B)/D
    num_b = x.b * k0
    num_a = x.a - x.b
    if num_b % x.d or num_a % x.d:
        return None
    return QuadInt(x.k, num_a // x.d, num_b // x.d)


def omega_coords(x: KNum) -> tuple[Fraction, Fraction]:
    """Rational coordinates (u, v) with x = u + v*omega."""
    k0, _, _ = omega_data(x.k)
    return Fraction(x.a - x.b, x.d), Fraction(x.b * k0, x.d)


@dataclass(frozen=True)
class FieldCtx:
    k: int
    k0: int
    eps0: QuadInt
    _pows: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def q(self, a: int = 0, b: int = 0) -> QuadInt:
        return QuadInt(self.k, a, b)

    def num(self, p: Rational = 0, q: Rational = 0) -> KNum:
        return KNum(self.k, p, q)

    @property
    def omega(self) -> QuadInt:
        return QuadInt(self.k, 0, 1)

    @property
    def eps_norm(self) -> int:
        return self.eps0.norm()

    @property
    def eps_inv(self) -> QuadInt:
        # 1/eps = conj(eps)/N(eps)
        return self.eps0.conj() * self.eps_norm

    def eps_pow(self, m: int) -> QuadInt:
        """eps0**m for any integer m, as an element of R."""
        if m not in self._pows:
            base = self.eps0 if m >= 0 else self.eps_inv
            self._pows[m] = base ** abs(m)
        return self._pows[m]

    @property
    def eps_float(self) -> float:
        return self.eps0.emb1()


def _cf_fundamental_unit(k: int) -> QuadInt:
    k0, t, _ = omega_data(k)
    x = KNum(k, Fraction(1, k0), Fraction(1, k0))  # omega
    p_prev, p = 1, x.floor()
    q_prev, q = 0, 1
    for _ in range(100000):
        # the conjugate of p - q*omega is a unit candidate > 1
        u = QuadInt(k, p - q * t, q)
        if abs(u.norm()) == 1:
            return u
        frac = x - x.floor()
        x = frac.inverse()
        a = x.floor()
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
    raise RuntimeError(f"continued fraction for k={k} did not close")


def make_ctx(k: int) -> FieldCtx:
    """Build the field context for Q(sqrt k): k0 and the fundamental unit."""
    if not isinstance(k, int) or k <= 1 or not is_squarefree(k):
        raise ValueError(f"k must be a square-free integer > 1, got {k!r}")
    k0, _, _ = omega_data(k)
    return FieldCtx(k, k0, _cf_fundamental_unit(k))


# -- ideals and completions --------------------------------------------------

def _hnf_index(rows: list[tuple[int, int]]) -> int:
    """Index in Z^2 of the lattice spanned by ``rows`` via a two-column Hermite reduction."""
    rows = [list(r) for r in rows]
    pivot = None
    rest = []
    for r in rows:
        if pivot is None:
            pivot = r
            continue
        # Euclid on the first column between pivot and r
        while r[0] != 0:
            qq = pivot[0] // r[0]
            pivot = [pivot[0] - qq * r[0], pivot[1] - qq * r[1]]
            pivot, r = r, pivot
        rest.append(r)
    if pivot is None or pivot[0] == 0:
        return 0
    g2 = 0
    for r in rest:
        g2 = math.gcd(g2, r[1])
    return abs(pivot[0] * g2)


def ideal_norm(c: QuadInt, d: QuadInt) -> int:
    """Index [R : cR + dR]; equals 1 exactly when (c, d) is a coprime pair."""
    if not c and not d:
        raise ValueError("(0, 0) generates the zero ideal")
    w = QuadInt(c.k, 0, 1)
    rows = [tuple(c), tuple(c * w), tuple(d), tuple(d * w)]
    return _hnf_index(rows)


def _round_half_down(x: Fraction) -> int:
    # nearest integer, ties toward -inf
    return math.ceil(x - Fraction(1, 2))


def _euclid_step(r0: QuadInt, r1: QuadInt, radius: int = 2):
    z = r0.to_knum() / r1.to_knum()
    u, v = omega_coords(z)
    bu, bv = _round_half_down(u), _round_half_down(v)
    n1 = abs(r1.norm())
    best = None
    for du in range(-radius, radius + 1):
        for dv in range(-radius, radius + 1):
            qq = QuadInt(r0.k, bu + du, bv + dv)
            rem = r0 - qq * r1
            n = abs(rem.norm())
            key = (n, abs(du) + abs(dv), du, dv)
            if best is None or key < best[0]:
                best = (key, qq, rem)
    if best[0][0] >= n1:
        return None
    return best[1], best[2]


def _xgcd(x: QuadInt, y: QuadInt):
    """Return (g, s, t) with s*x + t*y = g using Euclidean descent; None if descent stalls."""
    k = x.k
    r0, r1 = x, y
    s0, s1 = QuadInt(k, 1), QuadInt(k, 0)
    t0, t1 = QuadInt(k, 0), QuadInt(k, 1)
    while r1:
        step = _euclid_step(r0, r1)
        if step is None:
            return None
        qq, rem = step
        r0, r1 = r1, rem
        s0, s1 = s1, s0 - qq * s1
        t0, t1 = t1, t0 - qq * t1
    return r0, s0, t0


def _lattice_completion(c: QuadInt, d: QuadInt):
    """Solve a*d - b*c = 1 over Z in omega-coordinates; exact whenever cR + dR = R."""
    k = c.k
    w = QuadInt(k, 0, 1)
    # each row carries (coordinates, coefficient vector over (a0, a1, -b0, -b1))
    gens = [d, d * w, c, c * w]
    rows = [[list(g), [int(i == j) for j in range(4)]] for i, g in enumerate(gens)]

    def combine(dst, src, q):
        dst[0] = [x - q * y for x, y in zip(dst[0], src[0])]
        dst[1] = [x - q * y for x, y in zip(dst[1], src[1])]

    def reduce_col(rows, col):
        rows = [r for r in rows if any(r[0])]
        while sum(1 for r in rows if r[0][col] != 0) > 1:
            nz = sorted((r for r in rows if r[0][col] != 0), key=lambda r: abs(r[0][col]))
            piv = nz[0]
            for r in nz[1:]:
                combine(r, piv, r[0][col] // piv[0][col])
        piv = next((r for r in rows if r[0][col] != 0), None)
        return piv, [r for r in rows if r is not piv]

    piv0, rest = reduce_col(rows, 0)
    piv1, _ = reduce_col(rest, 1)
    if piv0 is None or piv1 is None or abs(piv0[0][0]) != 1 or abs(piv1[0][1]) != 1:
        return None
    if piv0[0][0] < 0:
        piv0 = [[-x for x in piv0[0]], [-x for x in piv0[1]]]
    # clear the omega-coordinate of piv0 using piv1
    piv0 = [list(piv0[0]), list(piv0[1])]
    combine(piv0, piv1, piv0[0][1] * piv1[0][1])
    coef = piv0[1]
    a = QuadInt(k, coef[0], coef[1])
    b = QuadInt(k, -coef[2], -coef[3])
    return a, b


def complete_to_matrix(c: QuadInt, d: QuadInt):
    """Return (a, b) in R with a*d - b*c = 1 for a coprime pair (c, d)."""
    k = c.k
    if not c and not d:
        raise ValueError("(0, 0) cannot be completed")
    if d.is_unit():
        a, b = from_knum(QuadInt(k, 1).to_knum() / d.to_knum()), QuadInt(k, 0)
        return a, b
    if c.is_unit():
        return QuadInt(k, 0), from_knum(QuadInt(k, -1).to_knum() / c.to_knum())
    if ideal_norm(c, d) != 1:
        raise ValueError(f"({c}, {d}) is not a coprime pair")
    res = _xgcd(d, c)
    if res is not None:
        g, s, t = res
        ginv = from_knum(QuadInt(k, 1).to_knum() / g.to_knum())
        a, b = s * ginv, -(t * ginv)
    else:
        if k not in NORM_EUCLIDEAN:
            log.warning("k=%d is not norm-Euclidean; solving (%s, %s) over Z", k, c, d)
        found = _lattice_completion(c, d)
        if found is None:
            raise CompletionError(f"no completion of ({c}, {d})")
        a, b = found
    # shorten a modulo c
    u, v = omega_coords(a.to_knum() / c.to_knum())
    tt = QuadInt(k, _round_half_down(u), _round_half_down(v))
    a, b = a - tt * c, b - tt * d
    if a * d - b * c != 1:
        raise CompletionError(f"internal completion error for ({c}, {d})")
    return a, b


# -- units ---------------------------------------------------------------------

def unit_log(ctx: FieldCtx, u: QuadInt) -> tuple[int, int]:
    """Return (sign, m) with u = sign * eps0**m."""
    if abs(u.norm()) != 1:
        raise ValueError(f"{u} is not a unit")
    x = abs(u.emb1())
    m = round(math.log(x) / math.log(ctx.eps_float)) if x > 0 else 0
    for mm in (m, m - 1, m + 1):
        e = ctx.eps_pow(mm)
        if u == e:
            return 1, mm
        if u == -e:
            return -1, mm
    raise ArithmeticError(f"unit_log failed for {u}")  # pragma: no cover


def canonical_pair(ctx: FieldCtx, c: QuadInt, d: QuadInt) -> tuple[QuadInt, QuadInt]:
    """Unit-normalize (c, d): c > 0 in the first embedding with sqrt|N(c)| <= c < eps0*sqrt|N(c)|.

    For c = 0 the pair is normalized so that d > 0 with the same window on d.
    """
    lead = c if c else d
    n = abs(lead.norm())
    if n == 0:
        raise ValueError("zero pair")
    x = abs(lead.emb1())
    j = -math.floor((math.log(x) - 0.5 * math.log(n)) / math.log(ctx.eps_float))
    e = ctx.eps_pow(j)
    c, d = c * e, d * e
    lead = c if c else d
    eps2 = ctx.eps0.to_knum() ** 2
    while True:
        v = lead.to_knum()
        sq = v * v
        if sq < n:
            c, d = c * ctx.eps0, d * ctx.eps0
        elif sq >= eps2 * n:
            c, d = c * ctx.eps_inv, d * ctx.eps_inv
        else:
            break
        lead = c if c else d
    if lead.to_knum().sign() < 0:
        c, d = -c, -d
    return c, d


def canonical_elements(ctx: FieldCtx, max_norm: int) -> list[QuadInt]:
    """All c != 0 with |N(c)| <= max_norm, one per unit class, canonical as in canonical_pair."""
    w1, w2 = QuadInt(ctx.k, 0, 1).emb1(), QuadInt(ctx.k, 0, 1).emb2()
    root = math.sqrt(max_norm)
    hi1 = ctx.eps_float * root
    span = w1 - w2
    eps2 = ctx.eps0.to_knum() ** 2
    out = []
    b_lo = math.floor((0 - root) / span) - 1
    b_hi = math.ceil((hi1 + root) / span) + 1
    for b in range(b_lo, b_hi + 1):
        a_lo = math.floor(max(-b * w1, -root - b * w2)) - 1
        a_hi = math.ceil(min(hi1 - b * w1, root - b * w2)) + 1
        for a in range(a_lo, a_hi + 1):
            c = QuadInt(ctx.k, a, b)
            n = abs(c.norm())
            if n == 0 or n > max_norm:
                continue
            v = c.to_knum()
            if v.sign() <= 0:
                continue
            sq = v * v
            if n <= sq < eps2 * n:
                out.append(c)
    out.sort(key=lambda c: (abs(c.norm()), c.emb1()))
    return out


def _legendre(a: int, p: int) -> int:
    a %= p
    if a == 0:
        return 0
    return 1 if pow(a, (p - 1) // 2, p) == 1 else -1


def _primes_upto(n: int) -> list[int]:
    return [p for p in range(2, n + 1) if all(p % q for q in range(2, math.isqrt(p) + 1))]


def is_pid(ctx: FieldCtx) -> bool:
    """Class number one test: every prime ideal below the Minkowski bound is principal."""
    disc = ctx.k if ctx.k0 == 2 else 4 * ctx.k
    bound = math.isqrt(disc) // 2 + 1
    norms = {abs(c.norm()) for c in canonical_elements(ctx, bound)}
    for p in _primes_upto(bound):
        if p == 2:
            split = disc % 8 in (0, 1) or disc % 4 == 0
        else:
            split = _legendre(disc, p) >= 0
        # a non-inert prime has an ideal of norm p; it must be generated by an element
        if split and p not in norms:
            return False
    return True
