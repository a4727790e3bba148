"""Exact arithmetic: rationals, cyclotomic fields, quadratic towers, Dirichlet
characters, Gauss sums, and dense exact linear algebra.

Every value is immutable after construction and every operation is a pure
function, so all of this is safe to use concurrently.

Conventions:
  * zeta_n denotes e^(2*pi*i/n); elements of Q(zeta_n) are stored in the
    power basis 1, zeta_n, ..., zeta_n^(phi(n)-1), reduced modulo the n-th
    cyclotomic polynomial.  Representation is canonical: equal elements have
    equal coefficient vectors.
  * Tower elements are vectors over a cyclotomic base field in powers of a
    generator alpha with a monic minimal polynomial (quadratic with rational
    discriminant; enough for coefficient fields like Q(sqrt 2), Q(sqrt 17)).
  * Complex conjugation acts as zeta -> zeta^(-1) on cyclotomic generators
    and as the identity on real quadratic tower generators.
"""

from __future__ import annotations

from functools import lru_cache
from math import gcd

import gmpy2
from gmpy2 import mpq, mpz
import sympy

Rational = mpq  # reduced num/den with positive denominator, by construction

ZERO = mpq(0)
ONE = mpq(1)


def gcdex(a, b):
    """Extended gcd: returns (x, y, g) with a*x + b*y = g = gcd(a,b), g >= 0."""
    g, x, y = gmpy2.gcdext(mpz(a), mpz(b))
    return int(x), int(y), int(g)


def lcm(a, b):
    return a // gcd(a, b) * b


def crt(r1, m1, r2, m2):
    """Smallest non-negative solution of x=r1 mod m1, x=r2 mod m2 (coprime)."""
    x, _, g = gcdex(m1, m2)
    if g != 1:
        raise ValueError("crt moduli must be coprime")
    return (r1 + (r2 - r1) * x % m2 * m1) % (m1 * m2)


@lru_cache(maxsize=None)
def euler_phi(n):
    return int(sympy.totient(n))


def rational_to_str(x):
    x = mpq(x)
    return "%d/%d" % (x.numerator, x.denominator)


def rational_from_str(s):
    num, _, den = s.partition("/")
    return mpq(int(num), int(den or 1))


# ---------------------------------------------------------------------------
# Cyclotomic fields


class _CycloContext:
    """Per-level tables: phi(n) and the power basis expansion of zeta^e for
    every 0 <= e < n (plus one extra row used during products)."""

    def __init__(self, n):
        self.n = n
        self.phi = euler_phi(n)
        poly = sympy.polys.specialpolys.cyclotomic_poly(n, sympy.Symbol("x"))
        coeffs = [mpq(int(c)) for c in reversed(sympy.Poly(poly).all_coeffs())]
        # coeffs[i] is the x^i coefficient of Phi_n; monic of degree phi.
        assert len(coeffs) == self.phi + 1 and coeffs[-1] == 1
        rows = []
        for e in range(self.phi):
            row = [ZERO] * self.phi
            row[e] = ONE
            rows.append(tuple(row))
        # zeta^e for e >= phi via zeta^phi = -(lower part of Phi_n)
        top = max(n, 2 * self.phi - 1)
        for e in range(self.phi, top):
            prev = rows[e - 1]
            shifted = (ZERO,) + prev[:-1]
            lead = prev[-1]
            if lead:
                shifted = tuple(s - lead * c for s, c in zip(shifted, coeffs[:-1]))
            rows.append(shifted)
        self.power_rows = rows


@lru_cache(maxsize=None)
def _cyclo_context(n):
    return _CycloContext(n)


class CyclotomicElement:
    """Element of Q(zeta_n) in the canonical power basis."""

    __slots__ = ("level", "coeffs")

    def __init__(self, level, coeffs):
        ctx = _cyclo_context(level)
        coeffs = tuple(mpq(c) for c in coeffs)
        if len(coeffs) != ctx.phi:
            raise ValueError("coefficient vector has wrong length")
        object.__setattr__(self, "level", level)
        object.__setattr__(self, "coeffs", coeffs)

    def __setattr__(self, *a):
        raise AttributeError("CyclotomicElement is immutable")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def from_rational(x, level=1):
        ctx = _cyclo_context(level)
        return CyclotomicElement(level, (mpq(x),) + (ZERO,) * (ctx.phi - 1))

    @staticmethod
    def zeta(level, power=1):
        ctx = _cyclo_context(level)
        row = ctx.power_rows[power % level]
        return CyclotomicElement(level, row)

    # -- structure ---------------------------------------------------------

    def is_zero(self):
        return all(c == 0 for c in self.coeffs)

    def is_rational(self):
        return all(c == 0 for c in self.coeffs[1:])

    def rational_value(self):
        if not self.is_rational():
            raise ValueError("not a rational element")
        return self.coeffs[0]

    def embed(self, level):
        """Image under Q(zeta_m) -> Q(zeta_n), zeta_m -> zeta_n^(n/m)."""
        m, n = self.level, level
        if n % m:
            raise ValueError("embed requires the old level to divide the new")
        if n == m:
            return self
        ctx = _cyclo_context(n)
        step = n // m
        out = [ZERO] * ctx.phi
        for i, c in enumerate(self.coeffs):
            if c == 0:
                continue
            row = ctx.power_rows[(i * step) % n]
            for j, r in enumerate(row):
                if r:
                    out[j] += c * r
        return CyclotomicElement(n, out)

    def galois(self, a):
        """sigma_a: zeta_n -> zeta_n^a, for gcd(a, n) = 1."""
        n = self.level
        a %= n
        if gcd(a, n) != 1:
            raise ValueError("galois_apply needs gcd(a, n) = 1")
        ctx = _cyclo_context(n)
        out = [ZERO] * ctx.phi
        for i, c in enumerate(self.coeffs):
            if c == 0:
                continue
            row = ctx.power_rows[(i * a) % n]
            for j, r in enumerate(row):
                if r:
                    out[j] += c * r
        return CyclotomicElement(n, out)

    def conjugate(self):
        return self.galois(-1)

    # -- arithmetic --------------------------------------------------------

    def _pair(self, other):
        if isinstance(other, CyclotomicElement):
            n = lcm(self.level, other.level)
            return self.embed(n), other.embed(n)
        if isinstance(other, (int, mpq, type(mpz(0)))):
            return self, CyclotomicElement.from_rational(other).embed(self.level)
        return self, NotImplemented

    def __add__(self, other):
        if isinstance(other, (int, mpq, type(mpz(0)))):
            return CyclotomicElement(
                self.level, (self.coeffs[0] + other,) + self.coeffs[1:])
        a, b = self._pair(other)
        if b is NotImplemented:
            return NotImplemented
        return CyclotomicElement(a.level, tuple(x + y for x, y in zip(a.coeffs, b.coeffs)))

    __radd__ = __add__

    def __neg__(self):
        return CyclotomicElement(self.level, tuple(-c for c in self.coeffs))

    def __sub__(self, other):
        if isinstance(other, (int, mpq, type(mpz(0)))):
            return CyclotomicElement(
                self.level, (self.coeffs[0] - other,) + self.coeffs[1:])
        a, b = self._pair(other)
        if b is NotImplemented:
            return NotImplemented
        return CyclotomicElement(a.level, tuple(x - y for x, y in zip(a.coeffs, b.coeffs)))

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if isinstance(other, (int, mpq, type(mpz(0)))):
            if other == 0:
                return CyclotomicElement(
                    self.level, (ZERO,) * len(self.coeffs))
            return CyclotomicElement(
                self.level, tuple(c * other for c in self.coeffs))
        a, b = self._pair(other)
        if b is NotImplemented:
            return NotImplemented
        ctx = _cyclo_context(a.level)
        phi = ctx.phi
        conv = [ZERO] * (2 * phi - 1)
        for i, x in enumerate(a.coeffs):
            if x == 0:
                continue
            for j, y in enumerate(b.coeffs):
                if y:
                    conv[i + j] += x * y
        out = list(conv[:phi])
        for e in range(phi, 2 * phi - 1):
            c = conv[e]
            if c == 0:
                continue
            row = ctx.power_rows[e]
            for j, r in enumerate(row):
                if r:
                    out[j] += c * r
        return CyclotomicElement(a.level, out)

    __rmul__ = __mul__

    def inverse(self):
        """Inverse via the extended Euclidean algorithm modulo Phi_n."""
        if self.is_zero():
            raise ZeroDivisionError("inversion of zero")
        if self.is_rational():
            return CyclotomicElement.from_rational(1 / self.coeffs[0], self.level)
        n = self.level
        ctx = _cyclo_context(n)
        poly = sympy.polys.specialpolys.cyclotomic_poly(n, sympy.Symbol("x"))
        phi_coeffs = [mpq(int(c)) for c in reversed(sympy.Poly(poly).all_coeffs())]
        inv = _poly_modinv(list(self.coeffs), phi_coeffs)
        inv += [ZERO] * (ctx.phi - len(inv))
        return CyclotomicElement(n, inv[: ctx.phi])

    def __truediv__(self, other):
        a, b = self._pair(other)
        if b is NotImplemented:
            return NotImplemented
        return a * b.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, k):
        if k < 0:
            return self.inverse() ** (-k)
        result = CyclotomicElement.from_rational(1, self.level)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, TowerElement):
            return other.__eq__(self)
        a, b = self._pair(other)
        if b is NotImplemented:
            return NotImplemented
        return a.coeffs == b.coeffs

    def __hash__(self):
        if self.is_rational():
            return hash(self.coeffs[0])
        return hash((self.level, self.coeffs))

    def __repr__(self):
        terms = []
        for i, c in enumerate(self.coeffs):
            if c == 0:
                continue
            if i == 0:
                terms.append(str(c))
            else:
                terms.append("%s*z%d^%d" % (c, self.level, i))
        return "(" + (" + ".join(terms) if terms else "0") + ")"

    # -- serialization -----------------------------------------------------

    def to_json(self):
        return {"level": self.level, "coeffs": [rational_to_str(c) for c in self.coeffs]}

    @staticmethod
    def from_json(doc):
        return CyclotomicElement(doc["level"], [rational_from_str(c) for c in doc["coeffs"]])


def _poly_divmod(a, b):
    """Division with remainder for coefficient lists over Q (index = degree)."""
    a = list(a)
    while a and a[-1] == 0:
        a.pop()
    b = list(b)
    while b and b[-1] == 0:
        b.pop()
    db = len(b) - 1
    q = [ZERO] * max(len(a) - db, 0)
    while len(a) - 1 >= db and a:
        c = a[-1] / b[-1]
        d = len(a) - 1 - db
        q[d] = c
        for i, bc in enumerate(b):
            a[d + i] -= c * bc
        while a and a[-1] == 0:
            a.pop()
    return q, a


def _poly_modinv(a, mod):
    """Inverse of polynomial a modulo the monic polynomial mod, over Q."""
    # extended Euclid on (mod, a)
    r0, r1 = list(mod), list(a)
    t0, t1 = [ZERO], [ONE]
    while any(c != 0 for c in r1):
        q, r = _poly_divmod(r0, r1)
        t = _poly_sub(t0, _poly_mul(q, t1))
        r0, r1, t0, t1 = r1, r, t1, t
    if len(r0) != 1:
        raise ZeroDivisionError("element not invertible (gcd not constant)")
    c = r0[0]
    return [x / c for x in t0]


def _poly_mul(a, b):
    out = [ZERO] * (len(a) + len(b) - 1) if a and b else []
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j, y in enumerate(b):
            if y:
                out[i + j] += x * y
    return out


def _poly_sub(a, b):
    n = max(len(a), len(b))
    a = list(a) + [ZERO] * (n - len(a))
    b = list(b) + [ZERO] * (n - len(b))
    return [x - y for x, y in zip(a, b)]


def cyclotomic_arithmetic(a, b, op):
    """Spec-level entry point: op in {'add','mul','inv','embed'}.

    For 'inv' and 'embed', b is ignored / the target level respectively.
    """
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    if op == "inv":
        return a.inverse()
    if op == "embed":
        return a.embed(b)
    raise ValueError("unknown op %r" % (op,))


def galois_apply(a, x):
    if isinstance(x, TowerElement):
        return x.galois(a)
    return x.galois(a)


# ---------------------------------------------------------------------------
# Quadratic towers over cyclotomic bases


@lru_cache(maxsize=None)
def _quad_field_conductor(d):
    """Conductor of Q(sqrt(d)) for a squarefree integer d != 1."""
    if d % 4 == 1:
        return abs(d)
    return 4 * abs(d)


def _squarefree_part(x):
    x = mpq(x)
    n = int(x.numerator * x.denominator)
    if n == 0:
        return 0, mpq(0)
    sf = 1
    rest = abs(n)
    root = mpq(1, x.denominator)
    for p, e in sympy.factorint(rest).items():
        if e % 2:
            sf *= p
        root *= mpq(p) ** (e // 2)
    if n < 0:
        sf = -sf
    return sf, root


def _rational_sqrt(x):
    """sqrt(x) in Q if it exists, else None."""
    sf, root = _squarefree_part(x)
    if sf == 1:
        return root
    return None


_TOWER_CHECKED = set()


class TowerElement:
    """Element of Q(zeta_n)(alpha), alpha a root of a monic quadratic whose
    discriminant is rational (scope per the package's coefficient fields)."""

    __slots__ = ("base_level", "minpoly", "coeffs")

    def __init__(self, base_level, minpoly, coeffs):
        # minpoly: tuple of CyclotomicElement, index=degree, monic
        minpoly = tuple(
            c if isinstance(c, CyclotomicElement) else CyclotomicElement.from_rational(c, base_level)
            for c in minpoly
        )
        minpoly = tuple(c.embed(base_level) for c in minpoly)
        deg = len(minpoly) - 1
        if deg != 2:
            raise ValueError("unsupported tower degree %d (only quadratic)" % deg)
        if not (minpoly[-1] == 1):
            raise ValueError("minpoly must be monic")
        key = (base_level, tuple(c.coeffs for c in minpoly))
        if key not in _TOWER_CHECKED:
            _check_quadratic_irreducible(base_level, minpoly)
            _TOWER_CHECKED.add(key)
        coeffs = tuple(
            (c if isinstance(c, CyclotomicElement) else CyclotomicElement.from_rational(c, base_level)).embed(base_level)
            for c in coeffs
        )
        if len(coeffs) != deg:
            raise ValueError("coefficient vector has wrong length")
        object.__setattr__(self, "base_level", base_level)
        object.__setattr__(self, "minpoly", minpoly)
        object.__setattr__(self, "coeffs", coeffs)

    def __setattr__(self, *a):
        raise AttributeError("TowerElement is immutable")

    @staticmethod
    def generator(base_level, minpoly):
        zero = CyclotomicElement.from_rational(0, base_level)
        one = CyclotomicElement.from_rational(1, base_level)
        return TowerElement(base_level, minpoly, (zero, one))

    def _key(self):
        return (self.base_level, tuple(c.coeffs for c in self.minpoly))

    def is_zero(self):
        return all(c.is_zero() for c in self.coeffs)

    def is_base(self):
        return self.coeffs[1].is_zero()

    def base_value(self):
        if not self.is_base():
            raise ValueError("element not in the base field")
        return self.coeffs[0]

    def lift_level(self, level):
        if level == self.base_level:
            return self
        return TowerElement(level, tuple(c.embed(level) for c in self.minpoly),
                            tuple(c.embed(level) for c in self.coeffs))

    def _pair(self, other):
        if isinstance(other, TowerElement):
            n = lcm(self.base_level, other.base_level)
            a, b = self.lift_level(n), other.lift_level(n)
            if a._key() != b._key():
                raise ValueError("tower elements over different extensions")
            return a, b
        if isinstance(other, (int, mpq, type(mpz(0)), CyclotomicElement)):
            if isinstance(other, CyclotomicElement):
                n = lcm(self.base_level, other.level)
            else:
                n = self.base_level
                other = CyclotomicElement.from_rational(other)
            a = self.lift_level(n)
            zero = CyclotomicElement.from_rational(0, n)
            b = TowerElement(n, a.minpoly, (other.embed(n), zero))
            return a, b
        return self, NotImplemented

    def __add__(self, other):
        if isinstance(other, (int, mpq, type(mpz(0)))):
            return TowerElement(self.base_level, self.minpoly,
                                (self.coeffs[0] + other, self.coeffs[1]))
        a, b = self._pair(other)
        if b is NotImplemented:
            return NotImplemented
        return TowerElement(a.base_level, a.minpoly,
                            tuple(x + y for x, y in zip(a.coeffs, b.coeffs)))

    __radd__ = __add__

    def __neg__(self):
        return TowerElement(self.base_level, self.minpoly, tuple(-c for c in self.coeffs))

    def __sub__(self, other):
        if isinstance(other, (int, mpq, type(mpz(0)))):
            return TowerElement(self.base_level, self.minpoly,
                                (self.coeffs[0] - other, self.coeffs[1]))
        a, b = self._pair(other)
        if b is NotImplemented:
            return NotImplemented
        return TowerElement(a.base_level, a.minpoly,
                            tuple(x - y for x, y in zip(a.coeffs, b.coeffs)))

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if isinstance(other, (int, mpq, type(mpz(0)))):
            return TowerElement(self.base_level, self.minpoly,
                                (self.coeffs[0] * other,
                                 self.coeffs[1] * other))
        a, b = self._pair(other)
        if b is NotImplemented:
            return NotImplemented
        a0, a1 = a.coeffs
        b0, b1 = b.coeffs
        # alpha^2 = -m1*alpha - m0
        m0, m1 = a.minpoly[0], a.minpoly[1]
        c0 = a0 * b0
        c1 = a0 * b1 + a1 * b0
        c2 = a1 * b1
        if not c2.is_zero():
            c0 = c0 - c2 * m0
            c1 = c1 - c2 * m1
        return TowerElement(a.base_level, a.minpoly, (c0, c1))

    __rmul__ = __mul__

    def inverse(self):
        if self.is_zero():
            raise ZeroDivisionError("inversion of zero")
        a0, a1 = self.coeffs
        m0, m1 = self.minpoly[0], self.minpoly[1]
        # Norm to the base: (a0 + a1*alpha)(a0 + a1*alphabar) with
        # alpha + alphabar = -m1, alpha*alphabar = m0.
        conj0 = a0 - a1 * m1
        conj1 = -a1
        norm = a0 * conj0 - a1 * conj1 * m0
        ninv = norm.inverse()
        return TowerElement(self.base_level, self.minpoly, (conj0 * ninv, conj1 * ninv))

    def __truediv__(self, other):
        a, b = self._pair(other)
        if b is NotImplemented:
            return NotImplemented
        return a * b.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __eq__(self, other):
        if isinstance(other, (int, mpq, type(mpz(0)), CyclotomicElement, TowerElement)):
            a, b = self._pair(other)
            return all((x - y).is_zero() for x, y in zip(a.coeffs, b.coeffs))
        return NotImplemented

    def __hash__(self):
        if self.is_base():
            return hash(self.coeffs[0])
        return hash((self._key(), tuple(c.coeffs for c in self.coeffs)))

    def galois(self, a):
        """sigma_a on the cyclotomic base; the tower generator is fixed
        (real embedding convention for real quadratic generators)."""
        return TowerElement(self.base_level,
                            tuple(c.galois(a) for c in self.minpoly),
                            tuple(c.galois(a) for c in self.coeffs))

    def conjugate(self):
        return self.galois(-1)

    def __repr__(self):
        return "(%r + %r*alpha)" % (self.coeffs[0], self.coeffs[1])

    def to_json(self):
        return {
            "base_level": self.base_level,
            "minpoly": [c.to_json() for c in self.minpoly],
            "coeffs": [c.to_json() for c in self.coeffs],
        }

    @staticmethod
    def from_json(doc):
        return TowerElement(
            doc["base_level"],
            tuple(CyclotomicElement.from_json(c) for c in doc["minpoly"]),
            tuple(CyclotomicElement.from_json(c) for c in doc["coeffs"]),
        )


def _check_quadratic_irreducible(base_level, minpoly):
    """x^2 + m1*x + m0 over Q(zeta_n): irreducible iff the discriminant is
    not a square.  Supported when the discriminant is rational."""
    m0, m1 = minpoly[0], minpoly[1]
    disc = m1 * m1 - 4 * m0
    if not disc.is_rational():
        raise ValueError("unsupported minpoly (non-rational discriminant)")
    d = disc.rational_value()
    if d == 0:
        raise ValueError("minpoly is not squarefree")
    if _rational_sqrt(d) is not None:
        raise ValueError("minpoly reducible over the base (square discriminant)")
    sf, _ = _squarefree_part(d)
    if sf != 1 and base_level % _quad_field_conductor(sf) == 0:
        raise ValueError("minpoly reducible: sqrt(%d) already in Q(zeta_%d)" % (sf, base_level))


# ---------------------------------------------------------------------------
# Field contexts (used by linear algebra and series code)


class RationalField:
    level = 1

    def zero(self):
        return ZERO

    def one(self):
        return ONE

    def of_int(self, k):
        return mpq(k)

    def coerce(self, x):
        if isinstance(x, CyclotomicElement):
            return x.rational_value()
        if isinstance(x, TowerElement):
            return x.base_value().rational_value()
        return mpq(x)

    def is_zero(self, x):
        return x == 0

    def conjugate(self, x):
        return x

    def galois(self, a, x):
        return x

    def __repr__(self):
        return "QQ"

    def __eq__(self, other):
        return isinstance(other, RationalField)

    def __hash__(self):
        return hash("QQ")


class CyclotomicField:
    def __init__(self, level):
        self.level = level

    def zero(self):
        return CyclotomicElement.from_rational(0, self.level)

    def one(self):
        return CyclotomicElement.from_rational(1, self.level)

    def of_int(self, k):
        return CyclotomicElement.from_rational(k, self.level)

    def zeta(self, power=1):
        return CyclotomicElement.zeta(self.level, power)

    def coerce(self, x):
        if isinstance(x, CyclotomicElement):
            return x.embed(lcm(x.level, self.level)) if self.level % x.level == 0 else _fail_coerce(x, self)
        if isinstance(x, TowerElement):
            return self.coerce(x.base_value())
        return CyclotomicElement.from_rational(x, self.level)

    def is_zero(self, x):
        return x.is_zero()

    def conjugate(self, x):
        return x.conjugate()

    def galois(self, a, x):
        return x.galois(a)

    def __repr__(self):
        return "Q(zeta_%d)" % self.level

    def __eq__(self, other):
        return isinstance(other, CyclotomicField) and other.level == self.level

    def __hash__(self):
        return hash(("cyclo", self.level))


class TowerField:
    def __init__(self, base_level, minpoly):
        self.level = base_level
        probe = TowerElement.generator(base_level, minpoly)
        self.minpoly = probe.minpoly

    def zero(self):
        return TowerElement(self.level, self.minpoly,
                            (CyclotomicElement.from_rational(0, self.level),
                             CyclotomicElement.from_rational(0, self.level)))

    def one(self):
        return TowerElement(self.level, self.minpoly,
                            (CyclotomicElement.from_rational(1, self.level),
                             CyclotomicElement.from_rational(0, self.level)))

    def of_int(self, k):
        return TowerElement(self.level, self.minpoly,
                            (CyclotomicElement.from_rational(k, self.level),
                             CyclotomicElement.from_rational(0, self.level)))

    def generator(self):
        return TowerElement.generator(self.level, self.minpoly)

    def coerce(self, x):
        if isinstance(x, TowerElement):
            return x.lift_level(lcm(x.base_level, self.level))
        z = self.zero()
        return z + x

    def is_zero(self, x):
        return x.is_zero()

    def conjugate(self, x):
        return x.conjugate()

    def galois(self, a, x):
        return x.galois(a)

    def __repr__(self):
        return "Q(zeta_%d)(alpha)" % self.level

    def __eq__(self, other):
        return (isinstance(other, TowerField) and other.level == self.level
                and other.minpoly == self.minpoly)

    def __hash__(self):
        return hash(("tower", self.level, tuple(c.coeffs for c in self.minpoly)))


def _fail_coerce(x, field):
    raise ValueError("cannot coerce %r into %r" % (x, field))


def field_of(x):
    """Smallest field context naturally containing x."""
    if isinstance(x, TowerElement):
        return TowerField(x.base_level, x.minpoly)
    if isinstance(x, CyclotomicElement):
        return CyclotomicField(x.level) if x.level > 1 else RationalField()
    return RationalField()


def common_field(fields):
    """Compositum context of the given field contexts (at most one tower)."""
    level = 1
    tower = None
    for f in fields:
        level = lcm(level, f.level)
        if isinstance(f, TowerField):
            if tower is not None and tower.minpoly != tuple(c.embed(lcm(tower.level, f.level)) for c in f.minpoly):
                # same extension demanded; distinct quadratic generators unsupported
                raise ValueError("incompatible tower extensions")
            tower = f
    if tower is not None:
        return TowerField(level, tuple(c.embed(level) for c in tower.minpoly))
    if level == 1:
        return RationalField()
    return CyclotomicField(level)


# ---------------------------------------------------------------------------
# Dirichlet characters


@lru_cache(maxsize=None)
def unit_group_structure(L):
    """Deterministic cyclic decomposition of (Z/L)^*.

    Returns (gens, orders, logtable) where gens are CRT-lifted generators
    (smallest primitive root per odd prime power; 2^k handled classically),
    orders their orders, and logtable maps each unit to its exponent tuple.
    """
    if L == 1:
        return (), (), {1: ()} if L == 1 else {}
    local = []
    for p, e in sorted(sympy.factorint(L).items()):
        q = p ** e
        if p == 2:
            if e == 1:
                continue
            if e == 2:
                local.append((q, [3], [2]))
            else:
                local.append((q, [q - 1, 3], [2, q // 4]))
        else:
            g = int(sympy.primitive_root(q))
            # smallest primitive root
            for cand in range(2, q):
                if cand % p and sympy.is_primitive_root(cand, q):
                    g = cand
                    break
            local.append((q, [g], [euler_phi(q)]))
    gens, orders = [], []
    for q, gs, ords in local:
        for g, o in zip(gs, ords):
            gens.append(crt(g, q, 1, L // q))
            orders.append(o)
    logtable = {}
    # enumerate exponent tuples
    exps = [0] * len(gens)
    total = 1
    for o in orders:
        total *= o
    for _ in range(total):
        u = 1
        for g, k in zip(gens, exps):
            u = (u * pow(g, k, L)) % L
        logtable[u] = tuple(exps)
        for i in range(len(exps) - 1, -1, -1):
            exps[i] += 1
            if exps[i] < orders[i]:
                break
            exps[i] = 0
    assert len(logtable) == euler_phi(L)
    return tuple(gens), tuple(orders), logtable


class DirichletCharacter:
    """Character of (Z/L)^* stored by exponents on the deterministic
    generator set; chi(gen_i) = zeta_{order_i}^{exps_i}."""

    __slots__ = ("modulus", "gens", "orders", "exps", "_logtable", "order")

    def __init__(self, modulus, exps):
        gens, orders, logtable = unit_group_structure(modulus)
        exps = tuple(e % o for e, o in zip(exps, orders))
        if len(exps) != len(gens):
            raise ValueError("wrong number of generator exponents")
        object.__setattr__(self, "modulus", modulus)
        object.__setattr__(self, "gens", gens)
        object.__setattr__(self, "orders", orders)
        object.__setattr__(self, "exps", exps)
        object.__setattr__(self, "_logtable", logtable)
        o = 1
        for e, n in zip(exps, orders):
            if e:
                o = lcm(o, n // gcd(e, n))
        object.__setattr__(self, "order", o)

    def __setattr__(self, *a):
        raise AttributeError("DirichletCharacter is immutable")

    @staticmethod
    def trivial(modulus=1):
        gens, orders, _ = unit_group_structure(modulus)
        return DirichletCharacter(modulus, (0,) * len(gens))

    @staticmethod
    def all_characters(modulus):
        gens, orders, _ = unit_group_structure(modulus)
        out = []
        exps = [0] * len(gens)
        total = 1
        for o in orders:
            total *= o
        for _ in range(total):
            out.append(DirichletCharacter(modulus, tuple(exps)))
            for i in range(len(exps) - 1, -1, -1):
                exps[i] += 1
                if exps[i] < orders[i]:
                    break
                exps[i] = 0
        return out

    @staticmethod
    def from_value(modulus, unit, value_exponent_num, value_order):
        """Character with chi(unit) = zeta_{value_order}^{value_exponent_num},
        found by exhaustive search (deterministic, first in enumeration order)."""
        for chi in DirichletCharacter.all_characters(modulus):
            v = chi(unit)
            target = CyclotomicElement.zeta(value_order, value_exponent_num)
            if v == target:
                return chi
        raise ValueError("no character with the requested value")

    def __call__(self, u):
        u = int(u) % self.modulus
        if self.modulus == 1:
            return CyclotomicElement.from_rational(1)
        if gcd(u, self.modulus) != 1:
            return CyclotomicElement.from_rational(0, self.value_level())
        logs = self._logtable[u]
        num = 0
        n = self.value_level()
        for k, e, o in zip(logs, self.exps, self.orders):
            num = (num + k * e * (n // o)) % n
        return CyclotomicElement.zeta(n, num)

    def value_level(self):
        """Level of the cyclotomic field containing all values."""
        n = 1
        for o in self.orders:
            n = lcm(n, o)
        return max(n, 1)

    def is_even(self):
        return self(-1) == 1

    def is_trivial(self):
        return all(e == 0 for e in self.exps)

    def __mul__(self, other):
        if self.modulus == other.modulus:
            return DirichletCharacter(self.modulus,
                                      tuple(a + b for a, b in zip(self.exps, other.exps)))
        m = lcm(self.modulus, other.modulus)
        return self.extend(m) * other.extend(m)

    def inverse(self):
        return DirichletCharacter(self.modulus, tuple(-e for e in self.exps))

    def conjugate(self):
        return self.inverse()

    def __pow__(self, k):
        return DirichletCharacter(self.modulus, tuple(e * k for e in self.exps))

    def extend(self, m):
        """The character mod m (multiple of the modulus) agreeing on units."""
        if m == self.modulus:
            return self
        if m % self.modulus:
            raise ValueError("can only extend to multiples of the modulus")
        gens, orders, _ = unit_group_structure(m)
        # solve for exponents on the new generators by direct evaluation
        n = max(self.value_level(), 1)
        exps = []
        for g, o in zip(gens, orders):
            v = self(g % self.modulus)
            if v.is_zero():
                raise ValueError("generator not coprime to the old modulus")
            # v = zeta_n^t; find t
            t = _zeta_log(v, n)
            # chi(g) must be an o-th root of unity: t*n' consistency
            if (t * o) % n:
                raise AssertionError("character value has wrong order")
            exps.append(t * o // n)
        return DirichletCharacter(m, tuple(exps))

    def conductor(self):
        for f in sorted(sympy.divisors(self.modulus)):
            if self._factors_through(f):
                return f
        raise AssertionError("unreachable")

    def _factors_through(self, f):
        for u in range(1, self.modulus + 1):
            if gcd(u, self.modulus) == 1 and u % f == 1 % max(f, 1):
                if not (self(u) == 1):
                    return False
        return True

    def primitive(self):
        """The primitive character at the conductor inducing this one."""
        f = self.conductor()
        if f == self.modulus:
            return self
        gens, orders, _ = unit_group_structure(f)
        exps = []
        n = max(self.value_level(), 1)
        for g, o in zip(gens, orders):
            # lift g to a unit mod modulus congruent to g mod f
            u = g
            while gcd(u, self.modulus) != 1:
                u += f
            v = self(u)
            t = _zeta_log(v, n)
            if (t * o) % n:
                raise AssertionError("character value has wrong order")
            exps.append(t * o // n)
        return DirichletCharacter(f, tuple(exps))

    def __eq__(self, other):
        return (isinstance(other, DirichletCharacter)
                and self.modulus == other.modulus and self.exps == other.exps)

    def __hash__(self):
        return hash((self.modulus, self.exps))

    def __repr__(self):
        return "chi_%d%r" % (self.modulus, list(self.exps))

    def to_json(self):
        return {"modulus": self.modulus,
                "generators": [[g, e] for g, e in zip(self.gens, self.exps)]}

    @staticmethod
    def from_json(doc):
        modulus = doc["modulus"]
        gens, orders, _ = unit_group_structure(modulus)
        listed = {g: e for g, e in doc["generators"]}
        if set(listed) != set(gens):
            raise ValueError("character document generator set mismatch")
        return DirichletCharacter(modulus, tuple(listed[g] for g in gens))


def _zeta_log(v, n):
    """Discrete log of a root of unity v in Q(zeta_n): v = zeta_n^t."""
    for t in range(n):
        if v == CyclotomicElement.zeta(n, t):
            return t
    raise ValueError("value is not an n-th root of unity")


def gauss_sum(chi):
    """g(chi) = sum_u chi(u) zeta_L^u for chi primitive of modulus L."""
    L = chi.modulus
    if chi.conductor() != L:
        raise ValueError("gauss_sum requires a primitive character")
    if L == 1:
        return CyclotomicElement.from_rational(1)
    n = lcm(L, chi.value_level())
    total = CyclotomicElement.from_rational(0, n)
    for u in range(1, L):
        if gcd(u, L) != 1:
            continue
        total = total + chi(u) * CyclotomicElement.zeta(n, (n // L) * u)
    return total


# ---------------------------------------------------------------------------
# Exact linear algebra


def iszero(x):
    if hasattr(x, "is_zero"):
        return x.is_zero()
    return x == 0


class ExactMatrix:
    """Dense exact matrix over one coefficient field (mpq, cyclotomic, or
    tower entries; the field context is carried explicitly)."""

    __slots__ = ("rows", "cols", "entries", "field")

    def __init__(self, entries, field=None):
        entries = [list(r) for r in entries]
        self.rows = len(entries)
        self.cols = len(entries[0]) if entries else 0
        for r in entries:
            if len(r) != self.cols:
                raise ValueError("matrix is not rectangular")
        if field is None:
            field = RationalField()
            for r in entries:
                for x in r:
                    f = field_of(x)
                    if not isinstance(f, RationalField):
                        field = common_field([field, f])
        self.entries = entries
        self.field = field

    @staticmethod
    def identity(n, field=None):
        field = field or RationalField()
        z, o = field.zero(), field.one()
        return ExactMatrix([[o if i == j else z for j in range(n)] for i in range(n)], field)

    @staticmethod
    def zero(rows, cols, field=None):
        field = field or RationalField()
        z = field.zero()
        return ExactMatrix([[z] * cols for _ in range(rows)], field)

    def copy(self):
        return ExactMatrix([list(r) for r in self.entries], self.field)

    def __getitem__(self, ij):
        return self.entries[ij[0]][ij[1]]

    def __eq__(self, other):
        if not isinstance(other, ExactMatrix):
            return NotImplemented
        if (self.rows, self.cols) != (other.rows, other.cols):
            return False
        return all(
            iszero(self.entries[i][j] - other.entries[i][j])
            for i in range(self.rows) for j in range(self.cols)
        )

    def __hash__(self):
        raise TypeError("unhashable")

    def __add__(self, other):
        f = common_field([self.field, other.field])
        return ExactMatrix(
            [[self.entries[i][j] + other.entries[i][j] for j in range(self.cols)]
             for i in range(self.rows)], f)

    def __sub__(self, other):
        f = common_field([self.field, other.field])
        return ExactMatrix(
            [[self.entries[i][j] - other.entries[i][j] for j in range(self.cols)]
             for i in range(self.rows)], f)

    def __neg__(self):
        return ExactMatrix([[-x for x in r] for r in self.entries], self.field)

    def scale(self, c):
        return ExactMatrix([[c * x for x in r] for r in self.entries], self.field)

    def __mul__(self, other):
        if isinstance(other, ExactMatrix):
            if self.cols != other.rows:
                raise ValueError("dimension mismatch")
            f = common_field([self.field, other.field])
            z = f.zero()
            bt = [[other.entries[k][j] for k in range(other.rows)] for j in range(other.cols)]
            out = []
            for i in range(self.rows):
                row_i = self.entries[i]
                out_row = []
                for j in range(other.cols):
                    col_j = bt[j]
                    acc = z
                    for k in range(self.cols):
                        a = row_i[k]
                        if iszero(a):
                            continue
                        acc = acc + a * col_j[k]
                    out_row.append(acc)
                out.append(out_row)
            return ExactMatrix(out, f)
        return self.scale(other)

    def transpose(self):
        return ExactMatrix([[self.entries[i][j] for i in range(self.rows)]
                            for j in range(self.cols)], self.field)

    def apply(self, vec):
        """Matrix times a coordinate list."""
        z = self.field.zero()
        out = []
        for i in range(self.rows):
            acc = z
            row = self.entries[i]
            for k, v in enumerate(vec):
                if iszero(v):
                    continue
                acc = acc + row[k] * v
            out.append(acc)
        return out

    def is_zero(self):
        return all(iszero(x) for r in self.entries for x in r)

    # -- elimination -------------------------------------------------------

    def rref(self):
        """(reduced row echelon matrix, pivot column list)."""
        m = [list(r) for r in self.entries]
        rows, cols = self.rows, self.cols
        pivots = []
        r = 0
        for c in range(cols):
            pr = None
            for i in range(r, rows):
                if not iszero(m[i][c]):
                    pr = i
                    break
            if pr is None:
                continue
            m[r], m[pr] = m[pr], m[r]
            inv = m[r][c]
            if not (inv == 1):
                m[r] = [x / inv for x in m[r]]
            for i in range(rows):
                if i != r and not iszero(m[i][c]):
                    f = m[i][c]
                    m[i] = [a - f * b for a, b in zip(m[i], m[r])]
            pivots.append(c)
            r += 1
            if r == rows:
                break
        return ExactMatrix(m, self.field), pivots

    def rank(self):
        return len(self.rref()[1])

    def kernel(self):
        """Right kernel basis, reduced echelon (canonical), as column vectors
        packed into an ExactMatrix of shape (cols, dim).

        Rational matrices go through fraction-free (Bareiss-style)
        elimination; other fields use ordinary division elimination.
        """
        if isinstance(self.field, RationalField) and self.rows and self.cols:
            red, pivots = _bareiss_rref(self.entries)
        else:
            redm, pivots = self.rref()
            red = redm.entries
        z, o = self.field.zero(), self.field.one()
        free = [c for c in range(self.cols) if c not in pivots]
        basis_cols = []
        for fc in free:
            v = [z] * self.cols
            v[fc] = o
            for r, pc in enumerate(pivots):
                v[pc] = -red[r][fc]
            basis_cols.append(v)
        if not basis_cols:
            return ExactMatrix.zero(self.cols, 0, self.field)
        return ExactMatrix([[basis_cols[j][i] for j in range(len(basis_cols))]
                            for i in range(self.cols)], self.field)

    def solve(self, rhs):
        """Solve self * x = rhs (rhs a list or single-column matrix).

        Raises InconsistentSystem when no solution exists; when the solution
        is not unique, returns the one with free variables = 0.
        """
        if isinstance(rhs, ExactMatrix):
            rhs = [rhs.entries[i][0] for i in range(rhs.rows)]
        aug = ExactMatrix([list(self.entries[i]) + [rhs[i]] for i in range(self.rows)],
                          self.field)
        red, pivots = aug.rref()
        if self.cols in pivots:
            raise InconsistentSystem("no solution")
        z = self.field.zero()
        x = [z] * self.cols
        for r, pc in enumerate(pivots):
            x[pc] = red.entries[r][self.cols]
        return x

    def charpoly(self):
        """Characteristic polynomial det(xI - A), coefficient list by degree,
        via Faddeev-LeVerrier (exact, char 0)."""
        n = self.rows
        if n != self.cols:
            raise ValueError("charpoly needs a square matrix")
        f = self.field
        coeffs = [f.zero()] * (n + 1)
        coeffs[n] = f.one()
        M = ExactMatrix.identity(n, f)
        for k in range(1, n + 1):
            M = self * M
            tr = f.zero()
            for i in range(n):
                tr = tr + M.entries[i][i]
            ck = -tr / f.of_int(k) if not isinstance(tr, mpq) else -tr / k
            coeffs[n - k] = ck
            for i in range(n):
                M.entries[i][i] = M.entries[i][i] + ck
        return coeffs

    def eval_poly(self, coeffs):
        """Evaluate a polynomial (coefficient list by degree) at this matrix."""
        n = self.rows
        out = ExactMatrix.zero(n, n, self.field)
        power = ExactMatrix.identity(n, self.field)
        for c in coeffs:
            if not iszero(c):
                out = out + power.scale(c)
            power = power * self
        return out

    def eigenspace(self, lam=None, factor=None):
        """Kernel of (A - lam*I), or of factor(A) for an irreducible factor
        given as a coefficient list."""
        n = self.rows
        if factor is not None:
            return self.eval_poly(factor).kernel()
        shifted = self - ExactMatrix.identity(n, self.field).scale(lam)
        return shifted.kernel()

    def to_json(self):
        def enc(x):
            if isinstance(x, TowerElement):
                return {"tower": x.to_json()}
            if isinstance(x, CyclotomicElement):
                return {"cyclo": x.to_json()}
            return rational_to_str(x)
        return {"rows": self.rows, "cols": self.cols,
                "entries": [[enc(x) for x in r] for r in self.entries]}

    @staticmethod
    def from_json(doc):
        def dec(x):
            if isinstance(x, dict):
                if "tower" in x:
                    return TowerElement.from_json(x["tower"])
                return CyclotomicElement.from_json(x["cyclo"])
            return rational_from_str(x)
        return ExactMatrix([[dec(x) for x in r] for r in doc["entries"]])

    def __repr__(self):
        return "ExactMatrix(%dx%d over %r)" % (self.rows, self.cols, self.field)


class InconsistentSystem(Exception):
    pass


def _bareiss_rref(entries):
    """Fraction-free forward elimination (Bareiss) over Q followed by exact
    back-substitution to reduced echelon form.  Returns (rows, pivots)."""
    rows = len(entries)
    cols = len(entries[0]) if rows else 0
    # clear denominators row by row (row scaling preserves row space)
    m = []
    for r in entries:
        den = mpz(1)
        for x in r:
            den = den * mpq(x).denominator // gmpy2.gcd(den, mpq(x).denominator)
        m.append([mpz(mpq(x) * den) for x in r])
    pivots = []
    prev = mpz(1)
    r = 0
    for c in range(cols):
        pr = None
        for i in range(r, rows):
            if m[i][c]:
                pr = i
                break
        if pr is None:
            continue
        m[r], m[pr] = m[pr], m[r]
        piv = m[r][c]
        for i in range(r + 1, rows):
            if all(x == 0 for x in m[i]):
                continue
            fi = m[i][c]
            row = m[i]
            top = m[r]
            for j in range(cols):
                row[j] = (piv * row[j] - fi * top[j]) // prev
        prev = piv
        pivots.append(c)
        r += 1
        if r == rows:
            break
    # back substitute to rref over Q
    red = [[mpq(x) for x in row] for row in m[:len(pivots)]]
    for i in range(len(pivots) - 1, -1, -1):
        pc = pivots[i]
        inv = red[i][pc]
        red[i] = [x / inv for x in red[i]]
        for k in range(i):
            f = red[k][pc]
            if f:
                red[k] = [a - f * b for a, b in zip(red[k], red[i])]
    return red, pivots


def linear_algebra(m, task, **kw):
    """Spec-level dispatcher: task in {'kernel','solve','charpoly','eigenspace'}."""
    if task == "kernel":
        return m.kernel()
    if task == "solve":
        return m.solve(kw["rhs"])
    if task == "charpoly":
        return m.charpoly()
    if task == "eigenspace":
        return m.eigenspace(lam=kw.get("lam"), factor=kw.get("factor"))
    raise ValueError("unknown task %r" % (task,))
