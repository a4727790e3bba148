"""Truncated q-series with exact coefficients.

A QExpansion stores the coefficients a_n for val <= n < prec of a series
sum a_n q^n + O(q^prec).  Negative valuations are allowed (the j-invariant
starts at q^-1).  Coefficients are rationals (gmpy2.mpq), CyclotomicElement
or TowerElement values; mixed arithmetic is delegated to the coefficient
types.  All arithmetic truncates explicitly and reading a coefficient at or
beyond the declared precision is an error, never a silent zero.
"""

from gmpy2 import mpq

from .fields import (
    CyclotomicElement,
    TowerElement,
    iszero,
    rational_from_str,
    rational_to_str,
)


def scalar_to_json(x):
    """Serialize an exact coefficient (rational, cyclotomic or tower)."""
    if isinstance(x, TowerElement):
        return {"tower": x.to_json()}
    if isinstance(x, CyclotomicElement):
        return {"cyclotomic": x.to_json()}
    return rational_to_str(x)


def scalar_from_json(doc):
    if isinstance(doc, str):
        return rational_from_str(doc)
    if "tower" in doc:
        return TowerElement.from_json(doc["tower"])
    return CyclotomicElement.from_json(doc["cyclotomic"])


class QExpansion:
    """A q-series known exactly up to O(q^prec)."""

    __slots__ = ("val", "prec", "coeffs")

    def __init__(self, coeffs, prec, val=0):
        coeffs = list(coeffs)
        if val + len(coeffs) > prec:
            raise ValueError("more coefficients than the declared precision")
        # pad up to the precision so len(coeffs) == prec - val always
        coeffs += [mpq(0)] * (prec - val - len(coeffs))
        # normalize away stored leading zeros (the valuation only moves up)
        while coeffs and iszero(coeffs[0]) and val < prec:
            coeffs.pop(0)
            val += 1
        self.val = val
        self.prec = prec
        self.coeffs = coeffs

    @staticmethod
    def cusp_form(an, prec=None):
        """Series q + a_2 q^2 + ... from the list [a_1, a_2, ...]."""
        if prec is None:
            prec = len(an) + 1
        return QExpansion(an, prec, val=1)

    @staticmethod
    def zero(prec):
        return QExpansion([], prec, val=prec)

    def coefficient(self, n):
        if n >= self.prec:
            raise ValueError("coefficient of q^%d beyond precision O(q^%d)"
                             % (n, self.prec))
        if n < self.val:
            return mpq(0)
        return self.coeffs[n - self.val]

    def coefficients(self, start, stop):
        return [self.coefficient(n) for n in range(start, stop)]

    def is_zero(self):
        return all(iszero(c) for c in self.coeffs)

    def valuation(self):
        """Order of vanishing at q = 0; None for the (truncated) zero series."""
        for i, c in enumerate(self.coeffs):
            if not iszero(c):
                return self.val + i
        return None

    def truncate(self, prec):
        if prec > self.prec:
            raise ValueError("cannot raise precision from O(q^%d) to O(q^%d)"
                             % (self.prec, prec))
        return QExpansion(self.coeffs[:max(prec - self.val, 0)], prec, self.val)

    # -- ring operations -----------------------------------------------------

    def __add__(self, other):
        prec = min(self.prec, other.prec)
        val = min(self.val, other.val)
        out = [self.coefficient(n) + other.coefficient(n)
               for n in range(val, prec)]
        return QExpansion(out, prec, val)

    def __neg__(self):
        return QExpansion([-c for c in self.coeffs], self.prec, self.val)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        if iszero(c):
            return QExpansion.zero(self.prec)
        return QExpansion([c * x for x in self.coeffs], self.prec, self.val)

    def __mul__(self, other):
        if not isinstance(other, QExpansion):
            return self.scale(other)
        if self.is_zero() or other.is_zero():
            return QExpansion.zero(min(self.prec + other.val,
                                       other.prec + self.val))
        prec = min(self.prec + other.val, other.prec + self.val)
        val = self.val + other.val
        out = [mpq(0)] * (prec - val)
        for i, a in enumerate(self.coeffs):
            if iszero(a):
                continue
            for j, b in enumerate(other.coeffs):
                k = i + j
                if k >= len(out):
                    break
                out[k] = out[k] + a * b
        return QExpansion(out, prec, val)

    def __rmul__(self, c):
        return self.scale(c)

    def __pow__(self, k):
        if k < 0:
            return self.inverse() ** (-k)
        out = QExpansion([mpq(1)], self.prec - self.val, 0)
        for _ in range(k):
            out = out * self
        return out if k else QExpansion([mpq(1)], self.prec - self.val, 0)

    def inverse(self):
        v = self.valuation()
        if v is None:
            raise ZeroDivisionError("inverse of the zero series")
        if v != self.val:
            raise ZeroDivisionError("series has higher valuation than stored;"
                                    " truncate first")
        n = self.prec - self.val
        lead = self.coeffs[0]
        lead_inv = (1 / lead) if isinstance(lead, mpq) else lead.inverse()
        out = [lead_inv] + [mpq(0)] * (n - 1)
        for k in range(1, n):
            s = mpq(0)
            for i in range(1, k + 1):
                if i < len(self.coeffs) and not iszero(self.coeffs[i]):
                    s = s + self.coeffs[i] * out[k - i]
            out[k] = -(lead_inv * s)
        return QExpansion(out, self.prec - 2 * self.val, -self.val)

    def __truediv__(self, other):
        if isinstance(other, QExpansion):
            return self * other.inverse()
        inv = (1 / other) if isinstance(other, mpq) else other.inverse()
        return self.scale(inv)

    def derivative(self):
        """q d/dq of the series."""
        return QExpansion([c * (self.val + i) for i, c in enumerate(self.coeffs)],
                          self.prec, self.val)

    def shift(self, k):
        """Multiplication by q^k."""
        return QExpansion(self.coeffs, self.prec + k, self.val + k)

    def substitute_power(self, m):
        """The series in q^m, i.e. q -> q^m."""
        out = [mpq(0)] * ((self.prec - self.val) * m - (m - 1))
        for i, c in enumerate(self.coeffs):
            out[i * m] = c
        return QExpansion(out, (self.prec - 1) * m + 1, self.val * m)

    def map_coefficients(self, fn):
        return QExpansion([fn(c) for c in self.coeffs], self.prec, self.val)

    # -- comparisons ---------------------------------------------------------

    def agrees(self, other, prec=None):
        """Equality of coefficients up to the given (default: joint) precision."""
        if prec is None:
            prec = min(self.prec, other.prec)
        if prec > min(self.prec, other.prec):
            raise ValueError("comparison beyond declared precision")
        return all(iszero(self.coefficient(n) - other.coefficient(n))
                   for n in range(min(self.val, other.val), prec))

    def __eq__(self, other):
        if not isinstance(other, QExpansion):
            return NotImplemented
        return self.prec == other.prec and self.agrees(other)

    def __hash__(self):
        raise TypeError("QExpansion is not hashable")

    # -- serialization -------------------------------------------------------

    def to_json(self):
        return {"val": self.val, "prec": self.prec,
                "coeffs": [scalar_to_json(c) for c in self.coeffs]}

    @staticmethod
    def from_json(doc):
        return QExpansion([scalar_from_json(c) for c in doc["coeffs"]],
                          doc["prec"], doc["val"])

    def __repr__(self):
        terms = []
        for i, c in enumerate(self.coeffs[:8]):
            if not iszero(c):
                terms.append("%s*q^%d" % (c, self.val + i))
        body = " + ".join(terms) if terms else "0"
        return "QExpansion(%s + O(q^%d))" % (body, self.prec)


def j_invariant(prec):
    """The elliptic j-invariant q^-1 + 744 + 196884 q + ... as E4^3/Delta."""
    import sympy

    def sigma3(n):
        return sum(d ** 3 for d in sympy.divisors(n))

    e4 = QExpansion([mpq(1)] + [mpq(240 * sigma3(n)) for n in range(1, prec + 2)],
                    prec + 2, 0)
    # Delta = q prod (1-q^n)^24 via the pentagonal-number expansion of eta
    eta24 = QExpansion([mpq(1)], prec + 2, 0)
    f = [mpq(0)] * (prec + 2)
    f[0] = mpq(1)
    k = 1
    while True:
        g1 = k * (3 * k - 1) // 2
        g2 = k * (3 * k + 1) // 2
        if g1 >= prec + 2 and g2 >= prec + 2:
            break
        s = mpq(-1) ** k
        if g1 < prec + 2:
            f[g1] += s
        if g2 < prec + 2:
            f[g2] += s
        k += 1
    eta = QExpansion(f, prec + 2, 0)
    eta24 = eta ** 24
    delta = eta24.shift(1)
    return (e4 ** 3 / delta).truncate(prec)
