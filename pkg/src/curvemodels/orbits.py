"""Real twist orbits of newform eigensymbols.

A seed newform f (possibly a Galois conjugate or a character twist of a
tabulated one) determines a line of eigensymbols mu in the homology of
the ambient symbol space.  Its real twist orbit collects, for each even
character psi mod K*h, the symbol vectors Tr_e pi R_psi(mu) together
with the q-expansions they pair with under the duality, namely
[Gamma_0(N) : Gamma_0(L)] * f|R_psibar pr B_e, where L is the new level
of the twist and e runs over the divisors of N/L.  Linear combinations
of symbols inside one orbit then translate to explicit q-expansions;
the overall scalar relating mu to the symbol of f is unknown but
constant across the orbit, so it never matters.
"""

from math import gcd

import sympy
from gmpy2 import mpq

from .fields import (CyclotomicElement, DirichletCharacter, ExactMatrix,
                     InconsistentSystem, RationalField, TowerElement,
                     common_field, crt, field_of, iszero, lcm,
                     unit_group_structure)
from .newforms import (Newform, newform_decomposition, qexp_from_eigendata,
                       quadratic_conjugate)
from .series import QExpansion
from .symbols import (degeneracy, eigensymbol, group_space, joint_eigenspace,
                      restrict_to_plus)

_SEED_PRIMES = (2, 3)


def twist_bound(M):
    """Largest divisor h of 24 with h^2 | M."""
    best = 1
    for h in (2, 3, 4, 6, 8, 12, 24):
        if M % (h * h) == 0:
            best = h
    return best


def even_characters(modulus):
    """Even Dirichlet characters mod modulus, trivial first, fixed order."""
    chars = [c for c in DirichletCharacter.all_characters(modulus)
             if c.is_even()]
    chars.sort(key=lambda c: tuple(c.exps))
    return chars


def twist_representatives(modulus):
    """Coset representatives of the even characters inside all characters
    mod modulus (trivial first); twisting the seed by these produces every
    twist class exactly once."""
    evens = set(even_characters(modulus))
    reps, covered = [], set()
    for chi in sorted(DirichletCharacter.all_characters(modulus),
                      key=lambda c: tuple(c.exps)):
        if chi in covered:
            continue
        reps.append(chi)
        covered.update(chi * e for e in evens)
    return reps


def character_sum(chi):
    """sum_u chi(u) zeta_L^u over the units mod L = chi.modulus.  This is
    the Gauss sum without any primitivity requirement; for the trivial
    character it is the Moebius value mu(L)."""
    L = chi.modulus
    if L == 1:
        return CyclotomicElement.from_rational(1)
    n = lcm(L, chi.value_level())
    total = CyclotomicElement.from_rational(0, n)
    for u in range(1, L):
        if gcd(u, L) != 1:
            continue
        total = total + chi(u) * CyclotomicElement.zeta(n, (n // L) * u % n)
    return total


def conjugate_scalar(x):
    """Complex conjugation: sigma_{-1} on cyclotomic parts, the identity on
    the (real) quadratic tower generator."""
    if isinstance(x, (CyclotomicElement, TowerElement)):
        return x.conjugate()
    return x


def galois_scalar(x, d, K):
    """The automorphism zeta_K -> zeta_K^d, fixing all other roots of unity
    and the quadratic tower generator."""
    if isinstance(x, TowerElement):
        return TowerElement(x.base_level, tuple(galois_scalar(c, d, K)
                                                for c in x.minpoly),
                            tuple(galois_scalar(c, d, K) for c in x.coeffs))
    if not isinstance(x, CyclotomicElement):
        return x
    n = x.level
    kpart = 1
    while n % (kpart * K) == 0 and K > 1:
        kpart *= K
    if kpart == 1:
        return x
    a = crt(d % kpart, kpart, 1, n // kpart)
    return x.galois(a % n)


def twist_qexp(f, chi):
    """Coefficientwise twist: the n-th coefficient becomes chi(n) a_n."""
    out = [f.coefficient(n) * chi(n) for n in range(f.val, f.prec)]
    return QExpansion(out, f.prec, f.val)


def R_chi_qexp(f, chi):
    """f|R_chi = g(chibar) * (f tensor chi)."""
    g = character_sum(chi.conjugate())
    return twist_qexp(f, chi).map_coefficients(lambda a: a * g)


class ConjugateSystem:
    """Galois conjugate of a quadratic eigenvalue system."""

    def __init__(self, base):
        self.base = base
        self.level = base.level
        self.character = base.character
        self.degree = base.degree

    def eigenvalue(self, p):
        return quadratic_conjugate(self.base.eigenvalue(p))

    def __repr__(self):
        return "ConjugateSystem(%r)" % (self.base,)


class Seed:
    """A newform seed for a real twist orbit.

    system is the eigenvalue system of the untwisted base newform at its
    own level; twist (a character mod K, or None) replaces the seed by the
    newform with coefficients twist(n) a_n.  The seed's eigensymbol lives
    in the ambient space: pushed up by Tr_1 from the base level when
    untwisted, cut out by T_2, T_3 and diamond eigenvalue conditions on
    the plus subspace when twisted.
    """

    def __init__(self, space, system, twist=None, label=""):
        self.space = space
        if twist is not None and twist.is_trivial():
            twist = None
        self.system = system
        self.twist = twist
        self.label = label
        self._base_qexp = None
        self._symbol = None

    def nebentypus(self):
        if self.twist is None:
            return DirichletCharacter.trivial(self.space.K)
        return self.twist * self.twist

    def coefficient(self, n):
        """a_n of the seed newform."""
        if self._base_qexp is None or len(self._base_qexp.an) < n:
            self._base_qexp = qexp_from_eigendata(self.system,
                                                  max(n + 1, 16))
        a = self._base_qexp.coefficient(n)
        if self.twist is None:
            return a
        return a * self.twist(n)

    def symbol(self):
        """Eigensymbol of the seed in the ambient space, in cuspidal
        coordinates, normalized so its first nonzero coordinate is 1."""
        if self._symbol is not None:
            return self._symbol
        space = self.space
        if self.twist is None:
            own = group_space(self.system.level, space.K)
            data = [(p, self.system.eigenvalue(p)) for p in _SEED_PRIMES]
            if space.K > 1:
                gens = unit_group_structure(space.K)[0]
                lam = eigensymbol(own, data,
                                  character=DirichletCharacter.trivial(space.K),
                                  diamond_checks=tuple(gens))
            else:
                lam = eigensymbol(own, data)
            P, _ = own.plus_basis()
            full = P.apply(lam.coords)
            if own.N == space.N:
                mu = full
            else:
                mu = degeneracy(space, own, 1, "Tr").apply(full)
        else:
            kern = _twisted_eigenspace(space, self.system, self.twist)
            if kern.cols != 1:
                raise ValueError("seed eigenspace is %d-dimensional; the "
                                 "twist is old or ambiguous" % kern.cols)
            col = [kern.entries[i][0] for i in range(kern.rows)]
            col = _normalize(col)
            P, _ = space.plus_basis()
            mu = P.apply(col)
        self._symbol = mu
        return mu

    def __repr__(self):
        return "Seed(%s)" % (self.label or self.system,)


def _twisted_eigenspace(space, system, chi):
    """Common eigenspace, in plus coordinates, for the twisted eigendata
    T_p = chi(p) a_p and diamonds <d> = chi(d)^2."""
    conds = []
    for p in _SEED_PRIMES:
        t = restrict_to_plus(space, space.hecke_matrix(p))
        conds.append((t, system.eigenvalue(p) * chi(p)))
    for d in unit_group_structure(space.K)[0]:
        dm = restrict_to_plus(space, space.diamond_matrix(d))
        conds.append((dm, chi(d) * chi(d)))
    return joint_eigenspace(conds)


def _normalize(coords):
    lead = next((x for x in coords if not iszero(x)), None)
    if lead is None:
        raise ValueError("zero vector cannot be normalized")
    inv = 1 / lead if isinstance(lead, mpq) else lead.inverse()
    return [inv * x for x in coords]


def _gamma0_index(n):
    """Index of Gamma_0(n) in SL_2(Z)."""
    out = n
    for p in sympy.factorint(n):
        out += out // p
    return out


def _hstack(mats):
    rows = mats[0].rows
    entries = [[m.entries[i][j] for m in mats for j in range(m.cols)]
               for i in range(rows)]
    return ExactMatrix(entries)


def _coerce_matrix(m, f):
    return ExactMatrix([[f.coerce(x) for x in row] for row in m.entries], f)


def _old_level_decomposition(space, nu):
    """Minimal level L with nu in the span of the Tr_d images of the
    level-L cuspidal space, together with the block coordinates of the
    decomposition nu = sum_d Tr_d(w_d).  Returns (L, lower, blocks) with
    blocks a dict d -> coordinate list; (N, None, None) when nu is new at
    the full level.  Raises on projection failure (overlapping images)."""
    N, K = space.N, space.K
    for L in sorted(d for d in sympy.divisors(N) if d != N and d % K == 0):
        lower = group_space(L, K)
        if lower.cuspidal_dim == 0:
            continue
        divs = sorted(sympy.divisors(N // L))
        stacked = space._cached(("old_stack", L), lambda: _hstack(
            [degeneracy(space, lower, d, "Tr") for d in divs]))
        if space._cached(("old_stack_ker", L),
                         lambda: stacked.kernel().cols):
            raise ValueError("projection failure: the degeneracy images "
                             "from level %d overlap" % L)
        f = common_field([field_of(x) for x in nu] + [RationalField()])
        try:
            x = _coerce_matrix(stacked, f).solve([f.coerce(v) for v in nu])
        except InconsistentSystem:
            continue
        m = lower.cuspidal_dim
        blocks = {d: x[i * m:(i + 1) * m] for i, d in enumerate(divs)}
        return L, lower, blocks
    return N, None, None


def _u_eigenvalue(space, q, vec):
    """Eigenvalue of U_q on an exact eigenvector in cuspidal coordinates."""
    img = space.u_matrix(q).apply(vec)
    i = next(k for k, v in enumerate(vec) if not iszero(v))
    lam = img[i] / vec[i]
    for k, v in enumerate(vec):
        if not iszero(img[k] - lam * v):
            raise ValueError("vector is not a U_%d eigenvector" % q)
    return lam


def _twist_data(seed, chi):
    """New-level data of seed tensor chi: nu = R_chibar(mu) on the symbol
    side, its minimal old level L, the degeneracy blocks, and the U_K
    eigenvalue a_K of the twisted newform k."""
    space = seed.space
    mu = seed.symbol()
    op = space.twist_operator(chi.conjugate(), chi.modulus)
    nu = op.apply(mu)
    L, lower, blocks = _old_level_decomposition(space, nu)
    if lower is None:
        return N_data(space.N, None, {1: nu}, mpq(0))
    return N_data(L, lower, blocks, _u_eigenvalue(lower, space.K, blocks[1]))


class N_data(tuple):
    """(new_level, lower_space, blocks, a_K) of a twist."""
    def __new__(cls, L, lower, blocks, a_K):
        return tuple.__new__(cls, (L, lower, blocks, a_K))


def twist_new_level_and_projection(seed, chi, prec=20):
    """New level L of the newform k underlying seed tensor chi, the newform
    itself (a_p(k) = chi(p) a_p(seed) away from the level, with the U_K
    eigenvalue recovered from the symbol side), and the projected
    expansion g(chibar) * k."""
    L, _, _, a_K = _twist_data(seed, chi)
    an = [_k_coefficient(seed, chi, a_K, n) for n in range(1, prec)]
    k = Newform(L, seed.nebentypus() * chi * chi, an, provenance="twist")
    g = character_sum(chi.conjugate())
    projected = k.qexp(prec).map_coefficients(lambda a: a * g)
    return L, k, projected


def _k_coefficient(seed, chi, a_K, n):
    """n-th coefficient of the newform part k of seed tensor chi: away from
    K it is chi(t) a_t(seed); the K-power part is driven by a_K."""
    K = seed.space.K
    s, t = 0, n
    if K > 1:
        if not sympy.isprime(K):
            raise ValueError("twist coefficients at composite K unsupported")
        while t % K == 0:
            t //= K
            s += 1
    a = seed.coefficient(t) * chi(t)
    for _ in range(s):
        a = a * a_K
    return a


class OrbitEntry:
    """One basis element of a real twist orbit: the symbol Tr_e pi
    R_psi(mu) paired with the q-expansion index * g(psi) * k(q^e), where
    k is the newform part of seed tensor psibar."""

    __slots__ = ("seed", "character", "new_level", "divisor", "symbol",
                 "scalar", "a_K")

    def __init__(self, seed, character, new_level, divisor, symbol, scalar,
                 a_K):
        self.seed = seed
        self.character = character
        self.new_level = new_level
        self.divisor = divisor
        self.symbol = list(symbol)
        self.scalar = scalar
        self.a_K = a_K

    def k_coefficient(self, n):
        return _k_coefficient(self.seed, self.character.conjugate(),
                              self.a_K, n)

    def qexp(self, prec):
        e = self.divisor
        m = -(-(prec - 1) // e) + 1
        an = [self.k_coefficient(n) for n in range(1, m)]
        f = QExpansion.cusp_form(an, m).substitute_power(e)
        if f.prec > prec:
            f = f.truncate(prec)
        s = self.scalar
        return f.map_coefficients(lambda a: a * s)

    def __repr__(self):
        return ("OrbitEntry(psi=%r, L=%d, e=%d)"
                % (self.character, self.new_level, self.divisor))


class TwistOrbit:
    """Real twist orbit of a seed eigensymbol: linearly independent symbol
    entries spanning the orbit space, paired with q-expansions."""

    def __init__(self, seed, entries):
        self.seed = seed
        self.entries = entries
        self._matrix = None

    @property
    def space(self):
        return self.seed.space

    def dimension(self):
        return len(self.entries)

    def symbol_matrix(self):
        if self._matrix is None:
            scalars = [x for e in self.entries for x in e.symbol]
            f = common_field([field_of(x) for x in scalars]
                             + [RationalField()])
            self._matrix = ExactMatrix(
                [[f.coerce(e.symbol[i]) for e in self.entries]
                 for i in range(len(self.entries[0].symbol))], f)
        return self._matrix

    def coordinates(self, vector):
        """Coordinates of a cuspidal symbol vector w.r.t. the entries;
        raises InconsistentSystem when the vector is outside the orbit."""
        m = self.symbol_matrix()
        f = common_field([m.field] + [field_of(x) for x in vector])
        return _coerce_matrix(m, f).solve([f.coerce(x) for x in vector])

    def contains(self, vector):
        try:
            self.coordinates(vector)
            return True
        except (InconsistentSystem, ValueError):
            return False

    def translate(self, combo, prec):
        """q-expansion dual to sum_i a_i * (symbol entry i); the combination
        coefficients get complex-conjugated per the duality."""
        if len(combo) != len(self.entries):
            raise ValueError("combination length %d does not match the %d "
                             "orbit entries" % (len(combo), len(self.entries)))
        out = QExpansion.zero(prec)
        for a, entry in zip(combo, self.entries):
            if iszero(a):
                continue
            ab = conjugate_scalar(a)
            out = out + entry.qexp(prec).map_coefficients(
                lambda c, ab=ab: c * ab)
        return out

    def translate_symbol(self, vector, prec):
        """Translate a symbol vector that lies in the orbit span."""
        return self.translate(self.coordinates(vector), prec)

    def __repr__(self):
        return "TwistOrbit(%s, dim=%d)" % (self.seed.label or self.seed,
                                           len(self.entries))


def build_real_twist_orbit(seed, h=None):
    """Construct the real twist orbit of a seed: one entry per (even psi,
    divisor e of N/L) with L the new level of seed tensor psibar."""
    space = seed.space
    N, K = space.N, space.K
    if h is None:
        h = twist_bound(space.M) if space.M else 1
    mu = seed.symbol()
    j = space.star_matrix()
    if any(not iszero(a - b) for a, b in zip(j.apply(mu), mu)):
        raise ValueError("seed symbol is not fixed by the star involution")
    entries = []
    for psi in even_characters(K * h):
        L, lower, blocks, a_K = _twist_data(seed, psi.conjugate())
        if lower is None:
            entries.append(OrbitEntry(seed, psi, N, 1, blocks[1],
                                      character_sum(psi), a_K))
            continue
        index = _gamma0_index(N) // _gamma0_index(L)
        gsum = character_sum(psi)
        for e in sorted(sympy.divisors(N // L)):
            sym = degeneracy(space, lower, e, "Tr").apply(blocks[1])
            entries.append(OrbitEntry(seed, psi, L, e, sym,
                                      index * gsum, a_K))
    orbit = TwistOrbit(seed, entries)
    if orbit.symbol_matrix().rank() != len(entries):
        raise ValueError("orbit entries are linearly dependent")
    return orbit


def _covered(space, system, chi, orbits):
    """Whether the eigenspace of the twisted system is already contained in
    the span of previously built orbits of the same seed family."""
    if not orbits:
        return False
    kern = _twisted_eigenspace(space, system, chi)
    if kern.cols == 0:
        raise ValueError("twisted eigendata cut out nothing")
    P, _ = space.plus_basis()
    pool = [e.symbol for orb in orbits for e in orb.entries]
    cand = [P.apply([kern.entries[i][j] for i in range(kern.rows)])
            for j in range(kern.cols)]
    scalars = [x for v in pool + cand for x in v]
    f = common_field([field_of(x) for x in scalars] + [RationalField()])
    base = ExactMatrix([[f.coerce(v[i]) for v in pool]
                        for i in range(len(pool[0]))], f)
    aug = ExactMatrix([[f.coerce(v[i]) for v in pool + cand]
                       for i in range(len(pool[0]))], f)
    return aug.rank() == base.rank()


def build_all_orbits(space):
    """All real twist orbits of the ambient space, from seeds enumerated by
    ascending level and orbit index, Galois conjugates included, twisted
    by coset representatives of the even characters; seeds whose
    eigenspace is already covered by an earlier orbit are skipped."""
    def build():
        N, K = space.N, space.K
        h = twist_bound(space.M) if space.M else 1
        reps = twist_representatives(K * h)
        orbits = []
        for L0 in sorted(sympy.divisors(N)):
            if L0 < 11:
                continue
            systems = newform_decomposition(L0)
            for idx, sysm in enumerate(systems):
                variants = [(sysm, "")]
                if sysm.degree == 2:
                    variants.append((ConjugateSystem(sysm), "c"))
                for var, tag in variants:
                    own = []
                    for jt, chi in enumerate(reps):
                        label = "L%d.%d%s.t%d" % (L0, idx, tag, jt)
                        if (not chi.is_trivial()
                                and _covered(space, var, chi, own)):
                            continue
                        seed = Seed(space, var,
                                    twist=None if chi.is_trivial() else chi,
                                    label=label)
                        orb = build_real_twist_orbit(seed, h)
                        own.append(orb)
                        orbits.append(orb)
        return orbits
    return space._cached(("orbits",), build)


def rational_components(x):
    """Rational coordinates of x over the power basis of its field."""
    if isinstance(x, TowerElement):
        return [q for c in x.coeffs for q in c.coeffs]
    if isinstance(x, CyclotomicElement):
        return list(x.coeffs)
    return [mpq(x)]


def rational_span(vectors):
    """Rational matrix whose column span (over any extension) equals the
    span of the given vectors together with their Galois conjugates."""
    cols = []
    for v in vectors:
        f = common_field([field_of(x) for x in v] + [RationalField()])
        comps = [rational_components(f.coerce(x)) for x in v]
        for j in range(len(comps[0])):
            col = [c[j] for c in comps]
            if any(not iszero(x) for x in col):
                cols.append(col)
    return ExactMatrix([[col[i] for col in cols]
                        for i in range(len(vectors[0]))])


class RationalStructureSpace:
    """Galois-orbit sum V(f)+ of real twist orbits (an orbit together with
    its quadratic conjugate when one exists), carrying the sigma_d action
    zeta_K -> zeta_K^d on q-expansion coefficients."""

    def __init__(self, orbits):
        if not orbits:
            raise ValueError("empty orbit family")
        self.orbits = list(orbits)
        self.space = orbits[0].space

    def dimension(self):
        return sum(o.dimension() for o in self.orbits)

    def qexp_basis(self, prec):
        return [e.qexp(prec) for o in self.orbits for e in o.entries]

    def sigma(self, d, f):
        """sigma_d applied coefficientwise to a q-expansion."""
        K = self.space.K
        return f.map_coefficients(lambda a: galois_scalar(a, d, K))

    def closed_under_sigma(self, d, prec):
        """Exact check that sigma_d maps the q-expansion basis into its own
        span (coefficients compared up to the given precision)."""
        basis = self.qexp_basis(prec)
        scalars = [f.coefficient(n) for f in basis for n in range(1, prec)]
        fld = common_field([field_of(x) for x in scalars]
                           + [RationalField()])
        m = ExactMatrix([[fld.coerce(f.coefficient(n)) for f in basis]
                         for n in range(1, prec)], fld)
        for f in basis:
            img = [fld.coerce(galois_scalar(f.coefficient(n), d,
                                            self.space.K))
                   for n in range(1, prec)]
            try:
                m.solve(img)
            except InconsistentSystem:
                return False
        return True


def rational_structures(orbits):
    """Group a list of orbits into Galois-orbit families: an orbit is
    paired with the conjugate-seed orbit built from the same system."""
    groups = {}
    order = []
    for orb in orbits:
        sysm = orb.seed.system
        base = sysm.base if isinstance(sysm, ConjugateSystem) else sysm
        twist = orb.seed.twist
        key = (id(base), tuple(twist.exps) if twist is not None else None)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(orb)
    return [RationalStructureSpace(groups[k]) for k in order]
