"""Manin-symbol presentation of the cuspidal homology of the modular curve
for Gamma_0(M*K^2) intersect Gamma_1(K), with the star involution and the
actions of Hecke, diamond, degeneracy, Atkin-Lehner and twist operators.

Symbols are the canonical pairs (c, d) mod N = M*K^2 enumerated in
groups.symbol_classes(N, K); they index the right cosets of the group in
SL_2(Z).  The symbol [(c, d)] corresponds to the path {g 0, g oo} for any
coset representative g with bottom row (c, d).

Operators are represented on the cuspidal basis as formal sums
sum_i coeff_i * A_i with rational matrices A_i and scalar coefficients in a
cyclotomic field; plain operators have a single term with coefficient 1.
"""

from __future__ import annotations

from math import gcd

from gmpy2 import mpq

from .fields import (
    ExactMatrix,
    RationalField,
    common_field,
    field_of,
    iszero,
)
from .groups import (
    IntMat2,
    lift_to_sl2,
    symbol_classes,
    symbol_normalizer,
    trace_coset_reps,
)

MAX_SYMBOLS = 500000


def merel_heilbronn(n):
    """Merel's set X_n of integer matrices of determinant n: summing the
    right action over this set gives the Hecke operator T_n on Manin
    symbols."""
    out = []
    for a in range(1, n + 1):
        for d in range((n + a - 1) // a, n + 2 - a):
            bc = a * d - n
            if bc == 0:
                for b in range(a):
                    out.append(IntMat2(a, b, 0, d))
                for c in range(1, d):
                    out.append(IntMat2(a, 0, c, d))
            else:
                for b in range((bc - 1) // (d - 1) + 1, a):
                    if bc % b == 0:
                        out.append(IntMat2(a, b, bc // b, d))
    return out


class FormalOperator:
    """Operator on the cuspidal (or plus) basis, stored as a formal sum of
    scalar coefficients times rational matrices.  Scalars may be cyclotomic;
    the underlying matrices are always over Q."""

    __slots__ = ("terms", "dim")

    def __init__(self, terms):
        terms = [(c, m) for c, m in terms]
        if not terms:
            raise ValueError("empty operator")
        self.terms = terms
        self.dim = terms[0][1].rows

    @staticmethod
    def of_matrix(m):
        return FormalOperator([(mpq(1), m)])

    def scale(self, c):
        return FormalOperator([(c * a, m) for a, m in self.terms])

    def __add__(self, other):
        return FormalOperator(self.terms + other.terms)

    def compose(self, other):
        """self after other (matrix product order self * other)."""
        return FormalOperator([(a * b, m1 * m2)
                               for a, m1 in self.terms for b, m2 in other.terms])

    def apply(self, vec):
        """Apply to a coordinate list (entries in any supported field)."""
        out = None
        for c, m in self.terms:
            w = m.apply(vec)
            w = [c * x for x in w]
            out = w if out is None else [a + b for a, b in zip(out, w)]
        return out

    def collect(self):
        """Expand into a single ExactMatrix."""
        if len(self.terms) == 1 and self.terms[0][0] == 1:
            return self.terms[0][1]
        fields = [field_of(c) for c, _ in self.terms]
        f = common_field(fields + [RationalField()])
        total = ExactMatrix.zero(self.dim, self.terms[0][1].cols, f)
        for c, m in self.terms:
            scaled = ExactMatrix([[c * x for x in r] for r in m.entries], f)
            total = total + scaled
        return total


class SymbolSpace:
    """Modular symbol space for a group Gamma_0(N) intersect Gamma_1(K),
    K | N.  The main spaces have N = M*K^2 with gcd(M, K) = 1 (see
    build_space); auxiliary lower-level spaces such as Gamma_0(35) meet
    Gamma_1(7) are constructed directly."""

    def __init__(self, level, gamma1_level=1):
        N, K = level, gamma1_level
        if N % K:
            raise ValueError("need K | N")
        self.K, self.N = K, N
        self.M = N // K ** 2 if K and N % (K * K) == 0 else None
        self.symbols = symbol_classes(N, K)
        if len(self.symbols) > MAX_SYMBOLS:
            raise ValueError("coset count %d exceeds cap" % len(self.symbols))
        self.index = {s: i for i, s in enumerate(self.symbols)}
        self.normal = symbol_normalizer(N, K)
        self._build_presentation()
        self._build_boundary()
        self._cache = {}
        self._lifts = {}

    # -- construction -------------------------------------------------------

    def _act(self, sym, h):
        """Right action of an integer matrix on a (c, d) pair; None when the
        image row is not coprime to the level (term omitted)."""
        c, d = sym
        n = self.N
        cp = (c * h.a + d * h.c) % n
        dp = (c * h.b + d * h.d) % n
        if gcd(gcd(cp, dp), n) != 1:
            return None
        return self.normal[(cp, dp)]

    def _build_presentation(self):
        n_sym = len(self.symbols)
        S = IntMat2(0, -1, 1, 0)
        TS = IntMat2(1, -1, 1, 0)
        TS2 = TS * TS
        # two-term relations x + xS = 0: pair symbols with a sign
        two_rep = [None] * n_sym   # (rep_index, sign) or "zero"
        for i, sym in enumerate(self.symbols):
            if two_rep[i] is not None:
                continue
            j = self.index[self._act(sym, S)]
            if j == i:
                two_rep[i] = "zero"
            else:
                two_rep[i] = (i, mpq(1))
                two_rep[j] = (i, mpq(-1))
        reps = sorted({t[0] for t in two_rep if t != "zero"})
        rep_pos = {r: k for k, r in enumerate(reps)}

        def as_pair(i):
            t = two_rep[i]
            if t == "zero":
                return None
            return rep_pos[t[0]], t[1]

        # three-term relations x + x*TS + x*(TS)^2 = 0, one per 3-orbit
        rows = []
        seen_orbit = set()
        for i, sym in enumerate(self.symbols):
            if i in seen_orbit:
                continue
            j = self.index[self._act(sym, TS)]
            k = self.index[self._act(sym, TS2)]
            seen_orbit.update((i, j, k))
            row = {}
            for idx in (i, j, k):
                pr = as_pair(idx)
                if pr is None:
                    continue
                pos, sgn = pr
                row[pos] = row.get(pos, mpq(0)) + sgn
            row = {p: v for p, v in row.items() if v != 0}
            if row:
                rows.append(row)

        # sparse elimination: eliminated[col] = expression in free columns
        eliminated = {}
        for row in rows:
            # reduce by current eliminations
            row = dict(row)
            changed = True
            while changed:
                changed = False
                for col in list(row):
                    if col in eliminated:
                        coef = row.pop(col)
                        for c2, v2 in eliminated[col].items():
                            row[c2] = row.get(c2, mpq(0)) + coef * v2
                            if row[c2] == 0:
                                del row[c2]
                        changed = True
            if not row:
                continue
            piv = max(row)
            pv = row.pop(piv)
            expr = {c: -v / pv for c, v in row.items()}
            # substitute the new pivot into stored expressions
            for col, e in eliminated.items():
                if piv in e:
                    coef = e.pop(piv)
                    for c2, v2 in expr.items():
                        e[c2] = e.get(c2, mpq(0)) + coef * v2
                        if e[c2] == 0:
                            del e[c2]
            eliminated[piv] = expr

        free_positions = [p for p in range(len(reps)) if p not in eliminated]
        free_of_pos = {p: k for k, p in enumerate(free_positions)}
        self.nfree = len(free_positions)
        self.free_symbols = [self.symbols[reps[p]] for p in free_positions]

        # full expression table: symbol index -> dict {free coord: mpq}
        expr_of_pos = {}
        for p in range(len(reps)):
            if p in free_of_pos:
                expr_of_pos[p] = {free_of_pos[p]: mpq(1)}
            else:
                e = {}
                for c, v in eliminated[p].items():
                    e[free_of_pos[c]] = v
                expr_of_pos[p] = e
        self._expr = []
        for i in range(n_sym):
            pr = as_pair(i)
            if pr is None:
                self._expr.append({})
            else:
                pos, sgn = pr
                if sgn == 1:
                    self._expr.append(expr_of_pos[pos])
                else:
                    self._expr.append({k: -v for k, v in expr_of_pos[pos].items()})

    def _build_boundary(self):
        n = self.N
        Tm = IntMat2(1, 1, 0, 1)
        orbit_of = {}
        n_orbits = 0
        for sym in self.symbols:
            if sym in orbit_of:
                continue
            members = []
            cur = sym
            while cur not in orbit_of:
                orbit_of[cur] = n_orbits
                members.append(cur)
                cur = self._act(cur, Tm)
            n_orbits += 1
        self._cusp_orbit = orbit_of
        S = IntMat2(0, -1, 1, 0)
        rows = [[mpq(0)] * self.nfree for _ in range(n_orbits)]
        for k, sym in enumerate(self.free_symbols):
            rows[orbit_of[sym]][k] += 1
            rows[orbit_of[self._act(sym, S)]][k] -= 1
        boundary = ExactMatrix(rows)
        self.n_cusps = n_orbits
        self.boundary = boundary
        kern = boundary.kernel()
        self.cuspidal = kern           # nfree x 2g
        self.cuspidal_dim = kern.cols
        # pivot rows: the kernel is echelonized along free columns, so each
        # basis vector has a unit coordinate; recover those positions
        pivots = []
        used = set()
        for j in range(kern.cols):
            for i in range(kern.rows):
                if kern.entries[i][j] == 1 and i not in used and all(
                        kern.entries[i][jj] == 0 for jj in range(kern.cols) if jj != j):
                    pivots.append(i)
                    used.add(i)
                    break
        if len(pivots) != kern.cols:
            raise AssertionError("cuspidal basis not in echelon form")
        self._cusp_pivots = pivots

    @property
    def genus(self):
        return self.cuspidal_dim // 2

    # -- symbol and path conversion -----------------------------------------

    def symbol_coords(self, c, d):
        """Class of [(c, d)] in free coordinates (dict)."""
        n = self.N
        key = (c % n, d % n)
        if key not in self.normal:
            raise ValueError("row (%d, %d) not coprime to the level" % (c, d))
        return self._expr[self.index[self.normal[key]]]

    def lift(self, k):
        """Coset representative of the k-th free symbol."""
        if k not in self._lifts:
            c, d = self.free_symbols[k]
            self._lifts[k] = lift_to_sl2(c, d, self.N)
        return self._lifts[k]

    def _cf_terms(self, p, q, out, scale):
        """Accumulate the Manin decomposition of the path {oo, p/q}."""
        if q == 0:
            return
        # continued fraction convergents of p/q
        pk_prev, qk_prev = 1, 0
        pk, qk = None, None
        a, b = p, q
        k = 0
        while True:
            quot = a // b
            a, b = b, a - quot * b
            if pk is None:
                pk, qk = quot, 1
            else:
                pk_prev, pk = pk, quot * pk + pk_prev
                qk_prev, qk = qk, quot * qk + qk_prev
            s = 1 if k % 2 == 1 else -1
            for pos, v in self.symbol_coords(s * qk, qk_prev).items():
                out[pos] = out.get(pos, mpq(0)) + scale * v
            if b == 0:
                break
            k += 1

    def path_coords(self, alpha, beta):
        """Class of the path {alpha, beta} (cusps as (num, den) pairs,
        den = 0 meaning oo) in free coordinates."""
        out = {}
        self._cf_terms(beta[0], beta[1], out, mpq(1))
        self._cf_terms(alpha[0], alpha[1], out, mpq(-1))
        return {k: v for k, v in out.items() if v != 0}

    def matrix_path_coords(self, m):
        """Class of the path {m 0, m oo} for an integer matrix m with
        positive determinant (scaling of m is irrelevant)."""
        return self.path_coords((m.b, m.d), (m.a, m.c))

    # -- operators ----------------------------------------------------------

    def _restrict(self, columns, target=None, pre=None):
        """Turn Manin-level operator columns (dicts over the source free
        coordinates, entries in any supported field) into a matrix on
        cuspidal coordinates; verifies the cuspidal space is preserved (or
        mapped into the target's).  An optional matrix pre (on cuspidal
        coordinates) is composed first."""
        tgt = target if target is not None else self
        C = self.cuspidal if pre is None else self.cuspidal * pre
        # image of each cuspidal basis vector in target free coordinates
        img_cols = []
        for j in range(C.cols):
            acc = {}
            for pos in range(C.rows):
                v = C.entries[pos][j]
                if iszero(v):
                    continue
                for tpos, w in columns[pos].items():
                    acc[tpos] = acc.get(tpos, mpq(0)) + v * w
            img_cols.append(acc)
        X = [[img_cols[j].get(piv, mpq(0)) for j in range(C.cols)]
             for piv in tgt._cusp_pivots]
        Xm = ExactMatrix(X)
        # verification: target.cuspidal * X equals the image columns
        TC = tgt.cuspidal
        for j in range(C.cols):
            col = img_cols[j]
            for i in range(TC.rows):
                acc = mpq(0)
                for r, piv in enumerate(tgt._cusp_pivots):
                    v = TC.entries[i][r]
                    if v:
                        acc = acc + v * Xm.entries[r][j]
                if not iszero(acc - col.get(i, mpq(0))):
                    raise ValueError(
                        "operator does not preserve the cuspidal space "
                        "(inconsistent image at row %d)" % i)
        return Xm

    def _columns_from_symbol_action(self, mats):
        """Columns of sum_h [x * h] acting on Manin symbols directly."""
        cols = []
        for sym in self.free_symbols:
            acc = {}
            for h in mats:
                im = self._act(sym, h)
                if im is None:
                    continue
                for pos, v in self._expr[self.index[im]].items():
                    acc[pos] = acc.get(pos, mpq(0)) + v
            cols.append({k: v for k, v in acc.items() if v != 0})
        return cols

    def _columns_from_path_action(self, mats, target=None):
        """Columns of sum_U [U] acting through paths: the free symbol with
        lift g maps to the target-space class of {U g 0, U g oo}."""
        tgt = target if target is not None else self
        cols = []
        for k in range(self.nfree):
            g = self.lift(k)
            acc = {}
            for u in mats:
                for pos, v in tgt.matrix_path_coords(u * g).items():
                    acc[pos] = acc.get(pos, mpq(0)) + v
            cols.append({p: v for p, v in acc.items() if v != 0})
        return cols

    def _cached(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    def star_matrix(self):
        """The involution induced by z -> -conj(z): [(c, d)] -> [(-c, d)]."""
        def build():
            cols = []
            for sym in self.free_symbols:
                c, d = sym
                cols.append(dict(self.symbol_coords(-c, d)))
            return self._restrict(cols)
        return self._cached(("J",), build)

    def plus_basis(self):
        """Echelon basis of the +1-eigenspace of the star involution on the
        cuspidal space (columns, in cuspidal coordinates)."""
        def build():
            j = self.star_matrix()
            n = j.rows
            shifted = j - ExactMatrix.identity(n)
            p = shifted.kernel()
            pivots = []
            used = set()
            for jj in range(p.cols):
                for i in range(p.rows):
                    if p.entries[i][jj] == 1 and i not in used and all(
                            p.entries[i][k] == 0 for k in range(p.cols) if k != jj):
                        pivots.append(i)
                        used.add(i)
                        break
            return p, pivots
        return self._cached(("plus",), build)

    def diamond_lift(self, d):
        """SL_2(Z) matrix in Gamma_0(N) with lower-right entry = d mod K."""
        n, k = self.N, self.K
        if gcd(d, k) != 1:
            raise ValueError("diamond needs gcd(d, K) = 1")
        e = d % k
        while gcd(e, n) != 1:
            e += k
        return lift_to_sl2(n, e, n * k)

    def hecke_matrix(self, p):
        """T_p for p prime not dividing the level, via Merel's set."""
        if self.N % p == 0:
            raise ValueError("T_p requires p not dividing the level; use U_q")
        def build():
            return self._restrict(
                self._columns_from_symbol_action(merel_heilbronn(p)))
        return self._cached(("Tp", p), build)

    def diamond_matrix(self, d):
        """<d>: pushforward of z -> sigma_d z; on Manin symbols this scales
        the row, [(c, e)] -> [(d c, d e)], because sigma_d has lower-left
        entry divisible by the level."""
        if gcd(d, self.K) != 1:
            raise ValueError("diamond needs gcd(d, K) = 1")
        def build():
            r = d % self.K
            while gcd(r, self.N) != 1:
                r += self.K
            cols = []
            for (c, e) in self.free_symbols:
                cols.append(dict(self.symbol_coords(r * c, r * e)))
            return self._restrict(cols)
        return self._cached(("diamond", d % self.K), build)

    def matrix_action(self, gamma, key=None, target=None):
        """Action of a single integral matrix through paths (projectively,
        so a scaled fractional matrix may be passed in integral form).
        Negative determinants are split off as the star involution composed
        with an orientation-preserving action."""
        det = gamma.det()
        if det == 0:
            raise ValueError("matrix action needs nonzero determinant")
        if det < 0:
            flip = IntMat2(-gamma.a, -gamma.b, gamma.c, gamma.d)
            tgt = target if target is not None else self
            return tgt.star_matrix() * self.matrix_action(flip, target=target)
        def build():
            cols = self._columns_from_path_action([gamma], target=target)
            return self._restrict(cols, target=target)
        if key is None:
            key = ("matrix", gamma.entries(),
                   None if target is None else (target.N, target.K))
        return self._cached(key, build)

    def u_matrix(self, q):
        """U_q = sum_u [(1, u; 0, q)] via paths."""
        def build():
            mats = [IntMat2(1, u, 0, q) for u in range(q)]
            return self._restrict(self._columns_from_path_action(mats))
        return self._cached(("U", q), build)

    def hecke_path_matrix(self, p):
        """T_p = sum_u [(1, u; 0, p)] + [sigma_p * (p, 0; 0, 1)] via paths;
        independent route used to cross-check the Merel route."""
        def build():
            cols_u = self._columns_from_path_action(
                [IntMat2(1, u, 0, p) for u in range(p)])
            sigma = self.diamond_lift(p)
            cols_s = self._columns_from_path_action([sigma * IntMat2(p, 0, 0, 1)])
            cols = [{k: a.get(k, mpq(0)) + b.get(k, mpq(0))
                     for k in set(a) | set(b)} for a, b in zip(cols_u, cols_s)]
            cols = [{k: v for k, v in c.items() if v != 0} for c in cols]
            return self._restrict(cols)
        return self._cached(("Tp_path", p), build)

    def t_tilde_matrix(self, u, L=None):
        """[T_tilde_L^u]: action of (1, u/L; 0, 1), scaled to (L, u; 0, L)."""
        L = L or self.K
        return self.matrix_action(IntMat2(L, u % L, 0, L), key=("Ttilde", L, u % L))

    def twist_operator(self, chi, L=None):
        """R_chi(L) = sum_u conj(chi)(u) [T_tilde_L^u] as a formal sum."""
        L = L or self.K
        chibar = chi.conjugate()
        terms = []
        for u in range(L):
            if gcd(u, L) != 1:
                continue
            terms.append((chibar(u), self.t_tilde_matrix(u, L)))
        return FormalOperator(terms)

    def atkin_lehner_xyzw(self, Q, x, y, z, w):
        """w_Q(x, y, z, w) for the integral matrix (Qx, y; Nz, Qw)."""
        m = IntMat2(Q * x, y, self.N * z, Q * w)
        if m.det() != Q:
            raise ValueError("xyzw do not solve the determinant condition")
        return self.matrix_action(m, key=("AL", Q, x, y, z, w))

    def atkin_lehner(self, Q):
        from .groups import atkin_lehner_matrix
        return self.matrix_action(atkin_lehner_matrix(Q, self.N), key=("AL", Q))

    def to_json(self):
        return {"level": self.N, "gamma1_level": self.K,
                "cuspidal_dim": self.cuspidal_dim}

    def __repr__(self):
        return "SymbolSpace(N=%d, K=%d, dim=%d)" % (self.N, self.K, self.cuspidal_dim)


_space_cache = {}


def group_space(level, gamma1_level=1):
    """Memoized symbol space for Gamma_0(level) intersect Gamma_1(K)."""
    key = (level, gamma1_level)
    if key not in _space_cache:
        _space_cache[key] = SymbolSpace(level, gamma1_level)
    return _space_cache[key]


def build_space(M, K):
    """Symbol space for Gamma_0(MK^2) intersect Gamma_1(K), gcd(M, K) = 1."""
    if gcd(M, K) != 1:
        raise ValueError("need gcd(M, K) = 1")
    return group_space(M * K * K, K)


def star_involution(space):
    return space.star_matrix()


def plus_subspace(space):
    return space.plus_basis()[0]


def hecke_action(space, desc):
    """desc = ('Tp', p) or ('diamond', d)."""
    kind = desc[0]
    if kind == "Tp":
        return space.hecke_matrix(desc[1])
    if kind == "diamond":
        return space.diamond_matrix(desc[1])
    raise ValueError("unknown Hecke descriptor %r" % (desc,))


def act_by_matrix(space, gamma, denominator=1, target=None):
    """Action of gamma (integral; an overall denominator is projectively
    irrelevant and accepted for signature completeness)."""
    return space.matrix_action(gamma, target=target)


def degeneracy(space_N, space_L, d, direction, character=None):
    """Symbol-side degeneracy operators between levels N = space_N.N and
    L = space_L.N (same K).

    direction 'B': H1(N) -> H1(L), the action of (d, 0; 0, 1).
    direction 'Tr': H1(L) -> H1(N).  With character=None this is the
    unweighted coset sum sum_i [D_d eta_i], D_d = (1, 0; 0, d), over a
    transversal refined to Gamma_0(L) & Gamma_1(K), which is well defined
    on the whole space.  With a character eps it is the weighted sum
    sum_i eps(eta_i)^-1 [D_d eta_i] over Gamma_0(L)-cosets (eps evaluated
    at the lower-right entry mod L); that sum is only an operator on the
    eps-component, so it is precomposed with the diamond idempotent
    projecting onto that component.
    """
    if space_N.K != space_L.K:
        raise ValueError("degeneracy requires matching K")
    N, L = space_N.N, space_L.N
    if N % L or (N // L) % d:
        raise ValueError("need L | N and d | N/L")
    if character is not None and L % character.conductor():
        raise ValueError("character conductor must divide L")
    if direction == "B":
        key = ("B", L, d)
        return space_N.matrix_action(IntMat2(d, 0, 0, 1), key=key, target=space_L)
    if direction != "Tr":
        raise ValueError("direction must be 'B' or 'Tr'")
    Dd = IntMat2(1, 0, 0, d)
    if character is None or character.is_trivial():
        def build():
            etas = trace_coset_reps(N, L, d, space_L.K)
            mats = [Dd * eta for eta in etas]
            cols = space_L._columns_from_path_action(mats, target=space_N)
            return space_L._restrict(cols, target=space_N)
        key = ("Tr", N, d, None)
        return space_L._cached(key, build)

    def build_weighted():
        etas = trace_coset_reps(N, L, d, 1)
        cols = [{} for _ in range(space_L.nfree)]
        for eta in etas:
            w = character(eta.d % L).inverse()
            m = Dd * eta
            for k in range(space_L.nfree):
                g = space_L.lift(k)
                for pos, v in space_N.matrix_path_coords(m * g).items():
                    cols[k][pos] = cols[k].get(pos, mpq(0)) + w * v
        # the weighted coset sum is transversal-independent only between the
        # character components, so project on both sides
        proj = character_idempotent(space_L, character)
        raw = space_L._restrict(cols, target=space_N, pre=proj)
        return character_idempotent(space_N, character) * raw
    key = ("Tr", N, d, character)
    return space_L._cached(key, build_weighted)


def character_idempotent(space, character):
    """Diamond idempotent projecting the cuspidal space onto the component
    where <u> acts by character(u)."""
    K = space.K
    units = [u for u in range(1, K + 1) if gcd(u, K) == 1]
    def build():
        total = None
        for u in units:
            w = character(u).inverse()
            m = space.diamond_matrix(u)
            t = ExactMatrix([[w * x for x in r] for r in m.entries])
            total = t if total is None else total + t
        return ExactMatrix([[x / len(units) for x in r] for r in total.entries])
    return space._cached(("idempotent", character), build)


class SymbolVector:
    """Vector in a symbol space (cuspidal or plus coordinates)."""

    __slots__ = ("space", "coords", "basis")

    def __init__(self, space, coords, basis="plus"):
        self.space = space
        self.coords = list(coords)
        self.basis = basis

    def __repr__(self):
        return "SymbolVector(%r, dim=%d, basis=%s)" % (self.space, len(self.coords), self.basis)


def restrict_to_plus(space, op):
    """Matrix of a cuspidal operator on the plus basis (op must commute
    with the star involution)."""
    P, pivots = space.plus_basis()
    if isinstance(op, FormalOperator):
        return FormalOperator([(c, restrict_to_plus(space, m)) for c, m in op.terms])
    ip = op * P
    Y = ExactMatrix([[ip.entries[piv][j] for j in range(P.cols)] for piv in pivots])
    if not (P * Y == ip):
        raise ValueError("operator does not preserve the plus subspace")
    return Y


def joint_eigenspace(conditions):
    """Common kernel of op - lam over a list of (matrix, eigenvalue) pairs,
    all on the same coordinate space; scalars may live in any supported
    field.  Returns the kernel as a matrix of columns."""
    fields = [field_of(lam) for _, lam in conditions]
    f = common_field(fields + [RationalField()])
    n = conditions[0][0].rows
    stacked = []
    for t, lam in conditions:
        shift = ExactMatrix(
            [[f.coerce(t.entries[i][j]) - (f.coerce(lam) if i == j else f.zero())
              for j in range(n)] for i in range(n)], f)
        stacked.extend(shift.entries)
    return ExactMatrix(stacked, f).kernel()


def eigensymbol(space, eigendata, character=None, diamond_checks=()):
    """Vector spanning the common eigenspace on the plus cuspidal subspace.

    eigendata: list of (p, a_p) with a_p the named form's Hecke eigenvalue;
    on homology the operator T_p acts on the symbol of f with eigenvalue
    eps_f(p) * conj(a_p) and <d> with eigenvalue eps_f(d) (Petersson
    adjoints), which is what gets imposed here.  diamond_checks lists extra
    d values to pin the character component.  The result is normalized to
    have first nonzero coordinate 1; returns a SymbolVector in plus
    coordinates.  Raises if the intersection is not 1-dimensional.
    """
    conditions = []
    for p, ap in eigendata:
        t = restrict_to_plus(space, space.hecke_matrix(p))
        if hasattr(ap, "conjugate"):
            lam = ap.conjugate()
        else:
            lam = mpq(ap)
        if character is not None and not character.is_trivial():
            lam = character(p) * lam
        conditions.append((t, lam))
    for d in diamond_checks:
        dm = restrict_to_plus(space, space.diamond_matrix(d))
        ev = character(d) if character is not None else mpq(1)
        conditions.append((dm, ev))
    kern = joint_eigenspace(conditions)
    if kern.cols == 0:
        raise ValueError("inconsistent eigendata: empty eigenspace")
    if kern.cols > 1:
        raise ValueError("eigenspace is %d-dimensional; supply more primes"
                         % kern.cols)
    coords = [kern.entries[i][0] for i in range(kern.rows)]
    lead = next(x for x in coords if not iszero(x))
    inv = 1 / lead if isinstance(lead, mpq) else lead.inverse()
    coords = [inv * x for x in coords]
    return SymbolVector(space, coords, basis="plus")
