"""Fixed cusp-form spaces, rational structure, and projective models.

Given a group G in GL_2(Z/MK) whose mod-M image is the Borel B_0(M) and
a finite set of automorphism matrices normalising Gamma_0(M), the first
half of this module computes a basis of q-expansions for the subspace of
weight-2 cusp forms on Gamma_0(MK^2) intersect Gamma_1(K) fixed by the
group generated by the congruence part and the automorphisms, working
orbit by orbit through the real twist orbits and descending coefficients
to the real cyclotomic subfield.  The second half imposes the Q-rational
structure coming from the determinant map (mod-K symmetries composed
with coefficient Galois conjugation), finds homogeneous relations by
exact linear algebra on truncated series (with the Sturm-style precision
guard enforced), handles the hyperelliptic genus-2 case, and produces
maps to the line through a hauptmodul solved from a rational j-map.
"""

from fractions import Fraction
from itertools import combinations_with_replacement
from math import gcd

import sympy
from gmpy2 import mpq

from .fields import (CyclotomicElement, ExactMatrix, RationalField,
                     TowerElement, common_field, crt, euler_phi, field_of,
                     iszero, lcm)
from .groups import (IntMat2, J, ModMat2, T, gl2_order, group_closure,
                     lift_to_sl2, morphism_condition,
                     upper_triangular_group)
from .orbits import (build_all_orbits, galois_scalar, rational_components,
                     rational_structures, twist_bound)
from .series import QExpansion, j_invariant
from .symbols import build_space

I2 = IntMat2(1, 0, 0, 1)


class PrecisionError(ValueError):
    """Raised when a requested relation degree is not provable at the
    available series precision."""


# ---------------------------------------------------------------------------
# Symbol operators for the normaliser of Gamma_0(M)


def normalizer_symbol_operator(space, gamma):
    """Operator of gamma_K^-1 * gamma * gamma_K on the cuspidal space.

    gamma is an integral matrix normalising Gamma_0(M): an element of
    Gamma_0(M) itself, or an Atkin-Lehner shape (Qx, y; Mz, Qw) at M with
    determinant Q coprime to K.  The matrix is rewritten as a word
    T^-k * h * T^-m with h of the shape (K*, *; M*, K*), whose conjugate
    by diag(K, 1) is an honest integral action at level M*K^2; the word
    translates to upper-triangular twist actions on the symbol side.
    """
    K, M = space.K, space.M
    if M is None:
        raise ValueError("space is not of the M*K^2 shape")
    delta = gamma.det()
    if delta <= 0:
        raise ValueError("only positive determinants are supported")
    if gcd(delta, K) != 1:
        raise ValueError("determinant must be coprime to K")
    a, b, c, d = gamma.entries()
    if c % M:
        raise ValueError("matrix does not normalise Gamma_0(%d)" % M)
    if delta > 1:
        if M % delta or gcd(delta, M // delta) != 1:
            raise ValueError("determinant %d is not an exact divisor of M" % delta)
        if a % delta or d % delta:
            raise ValueError("matrix is not of Atkin-Lehner shape at %d" % delta)
    if c == 0:
        # +-T^k only: anything else upper-triangular fails to normalise
        if abs(a) == 1 and a == d:
            return space.t_tilde_matrix((a * b) % K)
        raise ValueError("upper-triangular matrix is not +-T^k")
    if gcd(c, K) != 1:
        # shift the lower-left entry into the units mod K with gamma_0 powers
        g0 = IntMat2(1, 0, M, 1)
        for j in range(1, K):
            if gcd(((g0 ** j) * gamma).c, K) == 1:
                break
        else:
            raise ValueError("no gamma_0 power makes the matrix usable")
        inv = normalizer_symbol_operator(space, IntMat2(1, 0, -M, 1))
        op = normalizer_symbol_operator(space, (g0 ** j) * gamma)
        for _ in range(j):
            op = inv * op
        return op
    cinv = pow(c % K, -1, K)
    k = crt(0, delta, (-a * cinv) % K, K)
    m = crt(0, delta, (-d * cinv) % K, K)
    h = (T ** k) * gamma * (T ** m)
    assert h.a % (K * delta) == 0 and h.d % (K * delta) == 0
    conj = IntMat2(K * h.a, h.b, K * K * h.c, K * h.d)
    assert conj.det() == delta * K * K
    op = space.matrix_action(conj)
    return (space.t_tilde_matrix((-k) % K) * op
            * space.t_tilde_matrix((-m) % K))


def lift_to_gamma0(Bbar, M, K):
    """Lift of a matrix in SL_2(Z/K) to an SL_2(Z) matrix in Gamma_0(M).

    Any two such lifts differ by an element of Gamma_0(M) & Gamma(K),
    which acts trivially on the symbol space, so the choice is harmless.
    """
    L = M * K
    # target congruence mod L: identity mod M, Bbar mod K
    ta = crt(1, M, Bbar.entries()[0], K)
    tb = crt(0, M, Bbar.entries()[1], K)
    tc = crt(0, M, Bbar.entries()[2], K)
    td = crt(1, M, Bbar.entries()[3], K)
    base = lift_to_sl2(tc % L, td % L, L)
    # fix the top row: same bottom row mod L forces (da, db) = t * (c, d)
    da, db = (ta - base.a) % L, (tb - base.b) % L
    t = 0
    mod = 1
    for p, e in sympy.factorint(L).items():
        q = p ** e
        if base.c % p:
            tq = (da * pow(base.c % q, -1, q)) % q
        else:
            tq = (db * pow(base.d % q, -1, q)) % q
        t = crt(t, mod, tq, q)
        mod *= q
    out = (T ** t) * base
    if out.c % M or ((out.a - ta) % K or (out.b - tb) % K
                     or (out.c - tc) % K or (out.d - td) % K):
        raise AssertionError("lift does not satisfy the congruences")
    return out


# ---------------------------------------------------------------------------
# Configuration


class PipelineConfig:
    """Input data for the fixed-space and model computations.

    group lives in GL_2(Z/MK); gamma_generators are integral SL_2(Z)
    matrices which, together with the trivially-acting congruence part,
    generate the SL_2 pullback of the group; automorphisms are integral
    matrices normalising Gamma_0(M) (Atkin-Lehner shapes allowed) whose
    images generate the extra automorphism group.
    """

    def __init__(self, M, K, group, gamma_generators=(), automorphisms=(),
                 prec=None, compute_maps=False, hyperelliptic=False):
        self.M, self.K = M, K
        self.N = M * K
        self.group = group
        self.gamma_generators = tuple(gamma_generators)
        self.automorphisms = tuple(automorphisms)
        self.prec = prec
        self.compute_maps = compute_maps
        self.hyperelliptic = hyperelliptic
        self.h = twist_bound(M)

    def validate(self):
        M, K, N = self.M, self.K, self.N
        if gcd(M, K) != 1:
            raise ValueError("M and K must be coprime")
        if self.group.level != N:
            raise ValueError("group level must be M*K")
        if not self.group.det_surjective():
            raise ValueError("group determinant must be surjective")
        if not self.group.has_minus_I:
            raise ValueError("-I must lie in the group")
        if not self.group.normalized_by_J:
            raise ValueError("group is not normalised by J")
        if M > 1:
            borel = set(upper_triangular_group(M).closure)
            image = {g.reduce(M) for g in self.group.closure}
            if image != borel:
                raise ValueError("mod-M image must be the Borel B_0(M)")
        for g in self.gamma_generators:
            if g.det() != 1:
                raise ValueError("congruence generators must have det 1")
            if g.mod(N) not in self.group:
                raise ValueError("congruence generator outside the group")
        for alpha in self.automorphisms:
            if not morphism_condition(alpha, self.group, self.group):
                raise ValueError("automorphism fails the morphism condition")
        self._check_sl2_generation()
        return self

    def _check_sl2_generation(self):
        """The trivially-acting congruence subgroup together with the
        declared generators must generate the SL_2 part of the group."""
        N, M, K = self.N, self.M, self.K
        seed = []
        for g in self.group.closure:
            if g.det() != 1:
                continue
            gm = g.reduce(K).entries()
            if gm[1] % K == 0 and gm[2] % K == 0 and gm[0] % K == gm[3] % K \
                    and (gm[0] % K in (1 % K, (K - 1) % K)):
                seed.append(g)
        gens = seed + [g.mod(N) for g in self.gamma_generators]
        closure = set(group_closure(N, gens).closure)
        target = {g for g in self.group.closure if g.det() == 1}
        if closure != target:
            raise ValueError("declared generators do not generate the "
                             "SL_2 part of the group")


# ---------------------------------------------------------------------------
# Coefficient bookkeeping: components over the real cyclotomic subfield


def _tensor_solve_matrix(n, K):
    """Columns: rational coordinates of zeta_K^s * zeta_m^t in Q(zeta_n),
    n = K*m with gcd(K, m) = 1; used to split off the prime-to-K part."""
    m = n // K
    cols = []
    for t in range(euler_phi(m)):
        for s in range(euler_phi(K)):
            z = (CyclotomicElement.zeta(n, (n // K) * s)
                 * CyclotomicElement.zeta(n, (n // m) * t))
            cols.append(z.coeffs)
    return ExactMatrix([[cols[j][i] for j in range(len(cols))]
                        for i in range(len(cols[0]))])


_TENSOR_CACHE = {}


def _zeta_k_components(x, K):
    """Components of a cyclotomic x over Q(zeta_K) w.r.t. the basis
    {zeta_m^t} of the prime-to-K part."""
    if isinstance(x, (int, mpq)):
        return [CyclotomicElement.from_rational(x, K)]
    n = lcm(x.level, K)
    m = n // K
    if gcd(m, K) != 1:
        raise ValueError("coefficient field mixes with the K-part")
    x = x.embed(n)
    if m == 1:
        return [x]
    key = (n, K)
    if key not in _TENSOR_CACHE:
        _TENSOR_CACHE[key] = _tensor_solve_matrix(n, K)
    sol = _TENSOR_CACHE[key].solve(list(x.coeffs))
    comps = []
    phiK = euler_phi(K)
    for t in range(euler_phi(m)):
        block = sol[t * phiK:(t + 1) * phiK]
        comps.append(CyclotomicElement(
            K, block) if K > 1 else block[0])
    return comps


def real_components(x, K):
    """Components of x over Q(zeta_K)^+: the element is written over a
    basis of its own field as a Q(zeta_K)^+ vector space, with each
    component a conjugation-fixed element of Q(zeta_K)."""
    if isinstance(x, TowerElement):
        out = []
        for c in x.coeffs:
            out.extend(real_components(c, K))
        return out
    comps = _zeta_k_components(x, K)
    if K <= 2:
        return comps
    zeta = CyclotomicElement.zeta(K)
    denom = zeta - zeta.conjugate()
    out = []
    for c in comps:
        v = (c - c.conjugate()) / denom
        u = c - v * zeta
        out.extend([u, v])
    return out


def in_real_subfield(x, K):
    """True when x lies in Q(zeta_K)^+ (conjugation-fixed cyclotomic)."""
    try:
        comps = _zeta_k_components(x, K) if not isinstance(x, TowerElement) \
            else None
    except ValueError:
        return False
    if comps is None:
        if not x.coeffs[1].is_zero():
            return False
        return in_real_subfield(x.base_value(), K)
    if any(not c.is_zero() for c in comps[1:]):
        return False
    c = comps[0]
    if isinstance(c, (int, mpq)):
        return True
    return c == c.conjugate()


def cyclotomic_value(x, K):
    """Coerce x into Q(zeta_K), raising when it does not lie there."""
    if isinstance(x, TowerElement):
        if not x.is_base():
            raise ValueError("value does not lie in the cyclotomic field")
        return cyclotomic_value(x.base_value(), K)
    comps = _zeta_k_components(x, K)
    if any(not iszero(c) for c in comps[1:]):
        raise ValueError("value does not lie in the cyclotomic field")
    return comps[0]


# ---------------------------------------------------------------------------
# Algorithm 1: the fixed space


def _rational_op_times(op, mat):
    """op (rational square ExactMatrix) times mat (ExactMatrix over any
    field), staying in mat's field."""
    f = mat.field
    rows = []
    for i in range(op.rows):
        row = []
        for j in range(mat.cols):
            acc = f.zero()
            for k in range(op.cols):
                c = op.entries[i][k]
                if c == 0:
                    continue
                acc = acc + mat.entries[k][j] * c
            row.append(acc)
        rows.append(row)
    return ExactMatrix(rows, f)


def fixed_symbol_dimension(space, operators):
    """Dimension of the +-part of the cuspidal space fixed by the given
    rational operators (the genus of the quotient curve)."""
    n = space.cuspidal_dim
    stacked = []
    for op in list(operators) + [space.star_matrix()]:
        stacked.extend([[op.entries[i][j] - (1 if i == j else 0)
                         for j in range(n)] for i in range(n)])
    return ExactMatrix(stacked).kernel().cols


def _orbit_fixed_combos(orbit, operators):
    """Kernel combinations c with (op - 1) * S * c = 0 for every operator
    and for the star involution; columns of the returned matrix."""
    smat = orbit.symbol_matrix()
    star = orbit.space.star_matrix()
    stacked = []
    for op in list(operators) + [star]:
        img = _rational_op_times(op, smat)
        stacked.extend([[img.entries[i][j] - smat.entries[i][j]
                         for j in range(smat.cols)]
                        for i in range(smat.rows)])
    return ExactMatrix(stacked, smat.field).kernel()


class FamilyBlock:
    """A Galois-orbit family of twist orbits with its fixed combinations
    and the translated q-expansions spanning the fixed subspace."""

    def __init__(self, orbits, combos, forms):
        self.orbits = orbits          # list of TwistOrbit
        self.combos = combos          # list of (orbit, combo list)
        self.forms = forms            # list of (orbit, QExpansion)

    def dimension(self):
        return len(self.forms)


class FixedSpaceResult:
    """Output of the fixed-space computation: per-family data plus the
    basis of q-expansions over the real cyclotomic subfield."""

    def __init__(self, config, space, orbits, families, basis, prec):
        self.config = config
        self.space = space
        self.orbits = orbits
        self.families = families
        self.basis = basis
        self.genus = len(basis)
        self.prec = prec


def algorithm1(config, prec=None):
    """q-expansions over Q(zeta_Kh)^+ spanning the cusp forms fixed by
    the congruence group together with the declared automorphisms."""
    space = build_space(config.M, config.K)
    gens = list(config.gamma_generators) + list(config.automorphisms)
    operators = [normalizer_symbol_operator(space, g) for g in gens]
    genus = fixed_symbol_dimension(space, operators)
    if prec is None:
        prec = config.prec
    if prec is None:
        prec = max(8 * genus - 10, 10)
    orbits = build_all_orbits(space)
    families = []
    total = 0
    for fam in rational_structures(orbits):
        combos, forms = [], []
        for orbit in fam.orbits:
            kern = _orbit_fixed_combos(orbit, operators)
            cols = [[kern.entries[i][j] for i in range(kern.rows)]
                    for j in range(kern.cols)]
            combos.append((orbit, cols))
            for c in cols:
                forms.append((orbit, orbit.translate(c, prec + 1)))
            total += len(cols)
        families.append(FamilyBlock(fam.orbits, combos, forms))
    if total != genus:
        raise ArithmeticError(
            "orbit fixed spaces span %d of %d dimensions" % (total, genus))
    basis = _real_descent([f for fam in families for _, f in fam.forms],
                          config.K, prec)
    if len(basis) != genus:
        raise ArithmeticError("real descent changed the dimension")
    return FixedSpaceResult(config, space, orbits, families, basis, prec)


def _real_descent(forms, K, prec):
    """Basis over Q(zeta_K)^+ of the span of the given forms and their
    Galois conjugates over that subfield, as reduced echelon rows of the
    coefficient matrix (deterministic)."""
    field = CyclotomicField_or_Q(K)
    rows = []
    for f in forms:
        coeffs = [f.coefficient(n) for n in range(1, prec + 1)]
        # coerce into the form's full coefficient field so every
        # coefficient expands over the same component basis
        fld = common_field([field_of(c) for c in coeffs]
                           + [RationalField()])
        comps = [real_components(fld.coerce(c), K) for c in coeffs]
        for j in range(len(comps[0])):
            row = [field.coerce(c[j]) for c in comps]
            if any(not iszero(x) for x in row):
                rows.append(row)
    if not rows:
        return []
    red, pivots = ExactMatrix(rows, field).rref()
    basis = []
    for r in range(len(pivots)):
        basis.append(QExpansion(list(red.entries[r]), prec + 1, 1))
    return basis


def CyclotomicField_or_Q(K):
    from .fields import CyclotomicField
    return CyclotomicField(K) if K > 1 else RationalField()


# ---------------------------------------------------------------------------
# Algorithm 2: the Q-rational structure and the model


def _detarget_generators(config):
    """Deterministic elements of the mod-K image of the group whose
    determinants generate (Z/K)^*."""
    from .fields import unit_group_structure
    K = config.K
    gens, _, _ = unit_group_structure(K)
    image = sorted({g.reduce(K) for g in config.group.closure},
                   key=lambda m: m.entries())
    out = []
    for u in gens:
        for m in image:
            if m.det() == u % K:
                out.append(m)
                break
        else:
            raise ValueError("no element with determinant %d mod K" % u)
    return out


def _semilinear_family_matrix(fs, fam, opB, d, flip):
    """Matrix of the map f -> sigma_d(f|B) on the family's fixed forms.

    The symbol action of B is computed orbitwise (where the unknown
    pairing scalar cancels), translated back to q-expansions, Galois
    conjugated with sigma_d on the zeta_K part, and expressed in the
    family basis by exact linear algebra on coefficients.
    """
    K = fs.config.K
    prec = fs.prec
    forms = [f for _, f in fam.forms]
    scalars = [f.coefficient(n) for f in forms for n in range(1, prec + 1)]
    fld = common_field([field_of(x) for x in scalars] + [RationalField()])
    coeff = ExactMatrix([[fld.coerce(f.coefficient(n)) for f in forms]
                         for n in range(1, prec + 1)], fld)
    rows = []
    for orbit, combos in fam.combos:
        smat = orbit.symbol_matrix()
        for c in combos:
            vec = smat.apply(c)
            img = [sum_apply(opB, vec, i) for i in range(len(vec))]
            coords = orbit.coordinates(img)
            form = orbit.translate(coords, prec + 1)
            form = form.map_coefficients(lambda a: galois_scalar(a, d, K))
            rhs = [fld.coerce(form.coefficient(n))
                   for n in range(1, prec + 1)]
            rows.append(coeff.solve(rhs))
    mat = ExactMatrix([[fld.coerce(rows[i][j]) for j in range(len(forms))]
                       for i in range(len(rows))], fld)
    return mat, fld


def sum_apply(op, vec, i):
    """Row i of op times vec, where op is rational and vec lives in any
    coefficient field."""
    acc = None
    for k, x in enumerate(vec):
        c = op.entries[i][k]
        if c == 0:
            continue
        term = x * c
        acc = term if acc is None else acc + term
    if acc is None:
        return vec[0] - vec[0]
    return acc


def _restriction_of_scalars(mat, fld, d, K):
    """Rational matrix of the sigma_d-semilinear map given by mat on the
    Q-vector space underlying the coefficient field."""
    m = mat.rows
    basis = _field_basis(fld)
    D = len(basis)
    width = len(rational_components(fld.coerce(0)))
    cols = []
    for k in range(m):
        for j, beta in enumerate(basis):
            sb = galois_scalar(beta, d, K)
            col = []
            for l in range(m):
                comp = rational_components(fld.coerce(sb * mat.entries[k][l]))
                col.extend(mpq(x) for x in comp)
            cols.append(col)
    return ExactMatrix([[cols[j][i] for j in range(len(cols))]
                        for i in range(m * width)])


def _field_basis(fld):
    """Power basis of the coefficient field context as concrete elements,
    compatible with the component expansion used for vectors."""
    from .fields import CyclotomicField, TowerField
    if isinstance(fld, RationalField):
        return [mpq(1)]
    if isinstance(fld, CyclotomicField):
        return [CyclotomicElement.zeta(fld.level, i)
                for i in range(euler_phi(fld.level))]
    if isinstance(fld, TowerField):
        alpha = fld.generator()
        cyc = [fld.coerce(CyclotomicElement.zeta(fld.level, i))
               for i in range(euler_phi(fld.level))]
        return cyc + [c * alpha for c in cyc]
    raise ValueError("unsupported field context %r" % fld)


def rational_fixed_basis(fs, flip=False):
    """Step from the fixed space over Q(zeta_Kh)^+ to the Q-rational
    structure: a Q-basis of the forms additionally fixed by the
    determinant-d symmetries of the group (dimension = genus)."""
    config = fs.config
    K = config.K
    dets = _detarget_generators(config)
    actions = []
    for A in dets:
        d = A.det()
        Bbar = A * ModMat2(K, pow(d, -1, K), 0, 0, 1)
        Btilde = lift_to_gamma0(Bbar, config.M, K)
        if flip:
            Btilde = Btilde.inverse()
        opB = normalizer_symbol_operator(fs.space, Btilde)
        actions.append((d, opB))
    out = []
    for fam in fs.families:
        forms = [f for _, f in fam.forms]
        if not forms:
            continue
        stacked = None
        fld = None
        for d, opB in actions:
            mat, fld = _semilinear_family_matrix(fs, fam, opB, d, flip)
            R = _restriction_of_scalars(mat, fld, d, K)
            block = ExactMatrix([[R.entries[i][j] - (1 if i == j else 0)
                                  for j in range(R.cols)]
                                 for i in range(R.rows)])
            stacked = block if stacked is None else ExactMatrix(
                stacked.entries + block.entries)
        kern = stacked.kernel()
        basis = _field_basis(fld)
        width = len(rational_components(fld.coerce(0)))
        for j in range(kern.cols):
            form = QExpansion.zero(fs.prec + 1)
            idx = 0
            for k, f in enumerate(forms):
                acc = None
                for beta in basis:
                    x = kern.entries[idx][j]
                    idx += 1
                    if x == 0:
                        continue
                    term = beta * x
                    acc = term if acc is None else acc + term
                if acc is None or iszero(acc):
                    continue
                form = form + f.map_coefficients(lambda c, a=acc: c * a)
            if not form.is_zero():
                out.append(form)
    if len(out) != fs.genus:
        raise ArithmeticError(
            "rational structure has dimension %d, expected the genus %d"
            % (len(out), fs.genus))
    return out


# ---------------------------------------------------------------------------
# Relations: Sturm-guarded exact kernel on monomial evaluations


def find_relations(basis, degree, prec=None):
    """Homogeneous degree-d polynomial relations over Q satisfied by the
    basis of q-expansions, to the given precision.

    The precision must exceed d(2g-2) - (d-1), otherwise a vanishing
    truncated series would not prove a vanishing section.
    """
    g = len(basis)
    if prec is None:
        prec = min(f.prec for f in basis) - 1
    bound = degree * (2 * g - 2) - (degree - 1)
    if prec <= bound:
        raise PrecisionError(
            "precision %d insufficient for degree %d relations at genus %d "
            "(need more than %d coefficients)" % (prec, degree, g, bound))
    if any(f.prec <= prec for f in basis):
        raise PrecisionError("basis series are shorter than the requested "
                             "precision")
    monomials = list(combinations_with_replacement(range(g), degree))
    series = []
    for mono in monomials:
        s = basis[mono[0]].truncate(prec + 1)
        for i in mono[1:]:
            s = (s * basis[i]).truncate(prec + 1)
        series.append(s)
    rows = []
    for n in range(degree, prec + 1):
        comps = [rational_components(s.coefficient(n)) for s in series]
        width = max(len(c) for c in comps)
        for c in comps:
            c.extend([mpq(0)] * (width - len(c)))
        for j in range(width):
            row = [mpq(c[j]) for c in comps]
            if any(x != 0 for x in row):
                rows.append(row)
    if not rows:
        return []
    kern = ExactMatrix(rows).kernel()
    out = []
    for j in range(kern.cols):
        col = [kern.entries[i][j] for i in range(kern.rows)]
        col = _integral_primitive(col)
        poly = {mono: c for mono, c in zip(monomials, col) if c != 0}
        out.append(poly)
    return out


def _integral_primitive(col):
    den = 1
    for x in col:
        den = lcm(den, mpq(x).denominator)
    ints = [int(mpq(x) * den) for x in col]
    g = 0
    for x in ints:
        g = gcd(g, abs(x))
    if g > 1:
        ints = [x // g for x in ints]
    for x in ints:
        if x:
            if x < 0:
                ints = [-y for y in ints]
            break
    return ints


def expected_quadric_count(g):
    """Number of quadrics cutting out a canonical curve of genus g that is
    neither trigonal nor a plane quintic."""
    return (g - 2) * (g - 3) // 2


def evaluate_polynomial(poly, values):
    """Evaluate a monomial-dict polynomial on a list of values (series,
    field elements, or integers mod p)."""
    acc = None
    for mono, c in poly.items():
        term = None
        for i in mono:
            term = values[i] if term is None else term * values[i]
        term = term * c if term is not None else c
        acc = term if acc is None else acc + term
    return acc


def polynomial_string(poly, names=None):
    """Readable form of a monomial-dict polynomial."""
    if not poly:
        return "0"
    g = max(max(mono) for mono in poly) + 1
    names = names or ["X%d" % i for i in range(g)]
    parts = []
    for mono in sorted(poly):
        c = poly[mono]
        factors = [names[i] + ("^%d" % mono.count(i) if mono.count(i) > 1
                               else "") for i in sorted(set(mono))]
        body = "*".join(factors)
        if abs(c) != 1 or not body:
            body = str(abs(c)) + ("*" + body if body else "")
        parts.append(("-" if c < 0 else "+") + body)
    s = "".join(parts)
    return s[1:] if s.startswith("+") else s


# ---------------------------------------------------------------------------
# Hyperelliptic genus-2 handling


def hyperelliptic_model(basis):
    """Weierstrass sextic y^2 = f(x) from a 2-dimensional basis, with
    x = f1/f2 and y = q (dx/dq) / f2."""
    if len(basis) != 2:
        raise ValueError("hyperelliptic handling needs a genus-2 basis")
    f1, f2 = basis
    if f2.is_zero() or f2.valuation() != 1:
        raise ValueError("degenerate basis for the hyperelliptic model")
    x = f1 / f2
    y = x.derivative() / f2
    y2 = y * y
    prec = y2.prec
    powers = [QExpansion([mpq(1)], prec, 0)]
    for _ in range(6):
        powers.append((powers[-1] * x).truncate(prec))
    rows = []
    lo = min([y2.val] + [p.val for p in powers])
    for n in range(lo, prec):
        comps = [rational_components(p.coefficient(n)) for p in powers]
        rhscomp = rational_components(y2.coefficient(n))
        width = max([len(c) for c in comps] + [len(rhscomp)])
        for c in comps + [rhscomp]:
            c.extend([mpq(0)] * (width - len(c)))
        for j in range(width):
            rows.append(([mpq(c[j]) for c in comps], mpq(rhscomp[j])))
    mat = ExactMatrix([r for r, _ in rows])
    sol = mat.solve([v for _, v in rows])
    coeffs = [mpq(s) for s in sol]
    if all(c == 0 for c in coeffs[6:7]) and coeffs[5] == 0:
        raise ArithmeticError("no sextic or quintic relation found")
    xs = sympy.symbols("x")
    fpoly = sum(sympy.Rational(str(c)) * xs ** i for i, c in enumerate(coeffs))
    if sympy.discriminant(sympy.Poly(fpoly, xs)) == 0:
        raise ArithmeticError("singular hyperelliptic relation")
    return coeffs


def hyperelliptic_point_count(coeffs, p):
    """Number of points of the smooth projective model of y^2 = f(x)
    over the prime field F_p (p odd, good reduction assumed)."""
    count = 0
    for x in range(p):
        v = sum(int(c) * pow(x, i, p) for i, c in enumerate(coeffs)) % p
        if v == 0:
            count += 1
        elif pow(v, (p - 1) // 2, p) == 1:
            count += 2
    deg = max(i for i, c in enumerate(coeffs) if c != 0)
    lead = int(coeffs[deg]) % p
    if deg <= 4:
        count += 1
    elif deg == 5:
        count += 1
    else:
        if pow(lead, (p - 1) // 2, p) == 1:
            count += 2
    return count


# ---------------------------------------------------------------------------
# Projective point counts for quadric models


def projective_point_count(polys, nvars, p):
    """Number of F_p-points of the projective variety cut out by the
    given polynomials, by normalized enumeration with early filtering."""
    import numpy as np
    total = 0
    for lead in range(nvars):
        free = nvars - lead - 1
        npts = p ** free
        chunk = max(1, min(npts, 1 << 20))
        done = 0
        while done < npts:
            size = min(chunk, npts - done)
            idx = np.arange(done, done + size, dtype=np.int64)
            coords = np.zeros((nvars, size), dtype=np.int64)
            coords[lead] = 1
            rest = idx
            for v in range(nvars - 1, lead, -1):
                coords[v] = rest % p
                rest //= p
            mask = np.ones(size, dtype=bool)
            for poly in polys:
                if not mask.any():
                    break
                acc = np.zeros(mask.sum(), dtype=np.int64)
                sub = coords[:, mask]
                for mono, c in poly.items():
                    term = np.full(sub.shape[1], int(c) % p, dtype=np.int64)
                    for i in mono:
                        term = (term * sub[i]) % p
                    acc = (acc + term) % p
                keep = acc == 0
                newmask = np.zeros(size, dtype=bool)
                newmask[np.flatnonzero(mask)[keep]] = True
                mask = newmask
            total += int(mask.sum())
            done += size
    return total


# ---------------------------------------------------------------------------
# Hauptmodul and maps to the line


def beta_element(K=7):
    """zeta_K + zeta_K^-1 as an exact cyclotomic element."""
    return CyclotomicElement.zeta(K) + CyclotomicElement.zeta(K, K - 1)


def _poly_eval_series(coeffs, s, prec):
    """Evaluate a polynomial (list of exact coefficients by degree) on a
    series, truncating along the way."""
    acc = QExpansion([coeffs[-1]], prec, 0)
    for c in reversed(coeffs[:-1]):
        acc = (acc * s).truncate(prec)
        acc = acc + QExpansion([c], prec, 0)
    return acc


def _poly_eval_scalar(coeffs, x):
    acc = None
    for c in reversed(coeffs):
        acc = c if acc is None else acc * x + c
    return acc


def _poly_derivative(coeffs):
    return [c * i for i, c in enumerate(coeffs)][1:]


def _embeddings_beta():
    import mpmath
    mpmath.mp.dps = 120
    return [2 * mpmath.cos(2 * mpmath.pi * k / 7) for k in (1, 2, 3)]


def _embed_real_cyclotomic(x, beta_num):
    """Numeric value of a conjugation-fixed element of Q(zeta_7) at the
    embedding zeta_7 + zeta_7^-1 -> beta_num."""
    import mpmath
    # express x = a + b*beta + c*beta^2 exactly first
    a, b, c = real_quadratic_coordinates(x)
    return (mpmath.mpf(str(Fraction(str(a)))) +
            mpmath.mpf(str(Fraction(str(b)))) * beta_num +
            mpmath.mpf(str(Fraction(str(c)))) * beta_num ** 2)


def real_quadratic_coordinates(x):
    """Coordinates of a conjugation-fixed element of Q(zeta_7) in the
    basis 1, beta, beta^2 of the real cubic subfield."""
    beta = beta_element(7)
    basis = [CyclotomicElement.from_rational(1, 7), beta, beta * beta]
    mat = ExactMatrix([[mpq(b.coeffs[i]) for b in basis] for i in range(6)])
    target = CyclotomicElement.from_rational(0, 7) + x
    sol = mat.solve(list(target.coeffs))
    return [mpq(s) for s in sol]


def seventh_root_real(v):
    """The unique 7th root of v inside Q(beta_7), found numerically at all
    three real embeddings and verified exactly."""
    import mpmath
    mpmath.mp.dps = 120
    betas = _embeddings_beta()
    vals = [_embed_real_cyclotomic(v, b) for b in betas]
    roots = [mpmath.sign(val) * mpmath.root(abs(val), 7) for val in vals]
    mat = mpmath.matrix([[1, b, b ** 2] for b in betas])
    sol = mpmath.lu_solve(mat, mpmath.matrix(roots))
    beta = beta_element(7)
    coords = []
    for s in sol:
        fr = Fraction(str(mpmath.nstr(s, 60, strip_zeros=False))).limit_denominator(10 ** 25)
        coords.append(mpq(fr.numerator, fr.denominator))
    root = (CyclotomicElement.from_rational(coords[0], 7)
            + beta * coords[1] + beta * beta * coords[2])
    check = root
    for _ in range(6):
        check = check * root
    if not (check == v):
        raise ArithmeticError("seventh root reconstruction failed")
    return root


def chen_j_numerator():
    """(4x^2+5x+2)(x^2+3x+4)(x^2+10x+4)(3x+1) as exact coefficients."""
    xs = sympy.symbols("x")
    poly = sympy.expand((4 * xs ** 2 + 5 * xs + 2) * (xs ** 2 + 3 * xs + 4)
                        * (xs ** 2 + 10 * xs + 4) * (3 * xs + 1))
    p = sympy.Poly(poly, xs)
    return [mpq(int(c)) for c in reversed(p.all_coeffs())]


def chen_j_denominator():
    return [mpq(-1), mpq(-2), mpq(1), mpq(1)]


def hauptmodul_solve(prec, numerator=None, denominator=None):
    """Series n(q) over Q(beta_7) with j(q^7) = P(n)^3 / Q(n)^7, solved
    coefficient by coefficient from the constant term -beta^2 - beta + 1."""
    P = numerator or chen_j_numerator()
    Q = denominator or chen_j_denominator()
    K = 7
    beta = beta_element(K)
    c0 = -(beta * beta) - beta + 1
    if not iszero(_poly_eval_scalar(Q, c0)):
        raise ArithmeticError("constant term is not a root of the "
                              "denominator")
    Qp = _poly_derivative(Q)
    qp0 = _poly_eval_scalar(Qp, c0)
    p0 = _poly_eval_scalar(P, c0)
    c1_pow7 = (p0 ** 3) / (qp0 ** 7)
    c1 = seventh_root_real(c1_pow7)
    jq = j_invariant(prec + 2).substitute_power(7)
    coeffs = [c0, c1]
    pivot = qp0 ** 7 * (c1 ** 6) * 7
    while len(coeffs) < prec:
        # with the next coefficient c_n set to zero the residual of
        # P(n)^3 - j(q^7) Q(n)^7 at q^(n-1) equals pivot * c_n, since the
        # valuation-7 zero of Q(n) meets the order-7 pole of j(q^7)
        n = len(coeffs)
        series = QExpansion(list(coeffs), n + 1, 0)
        pn = _poly_eval_series(P, series, n + 1)
        p3 = (pn * pn * pn).truncate(n + 1)
        qn = _poly_eval_series(Q, series, n + 1)
        q7 = qn
        for _ in range(6):
            q7 = q7 * qn
        resid = (p3 - jq * q7).coefficient(n - 1)
        coeffs.append(resid / pivot)
    return QExpansion(coeffs, prec, 0)


class MapToP1:
    """Map to the projective line given by a numerator and denominator
    homogeneous polynomial of the same degree on the model coordinates."""

    def __init__(self, numerator, denominator, degree, map_degree=None):
        self.numerator = numerator
        self.denominator = denominator
        self.degree = degree
        self.map_degree = map_degree

    def verify(self, basis, target, prec):
        num = evaluate_polynomial(self.numerator, basis)
        den = evaluate_polynomial(self.denominator, basis)
        diff = (den * target).truncate(prec) - num.truncate(prec)
        return diff.is_zero()


def find_map(basis, target, max_degree=4, prec=None):
    """Least-degree pair (p, r) of homogeneous rational polynomials with
    r(basis) * target = p(basis) as series."""
    if prec is None:
        prec = min(f.prec for f in basis) - 1
    for degree in range(1, max_degree + 1):
        monomials = list(combinations_with_replacement(range(len(basis)),
                                                       degree))
        series_p = []
        series_r = []
        for mono in monomials:
            s = basis[mono[0]].truncate(prec + 1)
            for i in mono[1:]:
                s = (s * basis[i]).truncate(prec + 1)
            series_p.append(s)
            series_r.append((s * target).truncate(prec + 1))
        rows = []
        lo = min([s.val for s in series_p] + [s.val for s in series_r])
        for n in range(lo, prec + 1):
            comps = [rational_components(s.coefficient(n))
                     for s in series_r]
            comps += [[-x for x in rational_components(s.coefficient(n))]
                      for s in series_p]
            width = max(len(c) for c in comps)
            for c in comps:
                c.extend([mpq(0)] * (width - len(c)))
            for j in range(width):
                row = [mpq(c[j]) for c in comps]
                if any(x != 0 for x in row):
                    rows.append(row)
        kern = ExactMatrix(rows).kernel()
        nm = len(monomials)
        for j in range(kern.cols):
            col = _integral_primitive([kern.entries[i][j]
                                       for i in range(kern.rows)])
            r = {m: c for m, c in zip(monomials, col[:nm]) if c}
            p = {m: c for m, c in zip(monomials, col[nm:]) if c}
            if r and p:
                return MapToP1(p, r, degree)
    raise ArithmeticError("no map found up to degree %d" % max_degree)


def quotient_map_degree(config, target_j_degree):
    """Degree of the induced map to the target curve of the line, as the
    index ratio of the two covers of the j-line."""
    sl2 = [g for g in config.group.closure if g.det() == 1]
    N = config.N
    sl2_order = gl2_order(N) // eulereuler_phi(N)
    index = sl2_order // len(sl2)
    if index % target_j_degree:
        raise ArithmeticError("index %d is not a multiple of the target "
                              "degree %d" % (index, target_j_degree))
    return index // target_j_degree


# ---------------------------------------------------------------------------
# Automorphism matrices on a computed basis


def automorphism_matrix(fs, basis, alpha):
    """Matrix of the automorphism induced by alpha (normalising the
    relevant groups and commuting with the star involution) on the given
    basis of the fixed space, via the orbitwise symbol action."""
    space = fs.space
    K = fs.config.K
    op = normalizer_symbol_operator(space, alpha)
    prec = fs.prec
    # translate the image of every family form, express the basis in the
    # family forms, and resolve the basis images back in the basis
    images_of_forms = []
    all_forms = []
    for fam in fs.families:
        for orbit, cols in fam.combos:
            smat = orbit.symbol_matrix()
            for c in cols:
                vec = smat.apply(c)
                img = [sum_apply(op, vec, i) for i in range(len(vec))]
                coords = orbit.coordinates(img)
                images_of_forms.append(orbit.translate(coords, prec + 1))
        all_forms.extend(f for _, f in fam.forms)
    scalars = [f.coefficient(n) for f in all_forms
               for n in range(1, prec + 1)]
    fld = common_field([field_of(x) for x in scalars] + [RationalField()])
    formmat = ExactMatrix([[fld.coerce(f.coefficient(n)) for f in all_forms]
                           for n in range(1, prec + 1)], fld)
    # basis in terms of family forms
    bcoords = []
    for f in basis:
        bcoords.append(formmat.solve([fld.coerce(f.coefficient(n))
                                      for n in range(1, prec + 1)]))
    # image of each basis element
    bmat = ExactMatrix([[fld.coerce(f.coefficient(n)) for f in basis]
                        for n in range(1, prec + 1)], fld)
    out = []
    for coords in bcoords:
        img = QExpansion.zero(prec + 1)
        for x, f in zip(coords, images_of_forms):
            if iszero(x):
                continue
            img = img + f.map_coefficients(lambda c, a=x: c * a)
        out.append(bmat.solve([fld.coerce(img.coefficient(n))
                               for n in range(1, prec + 1)]))
    return ExactMatrix([[fld.coerce(out[j][i]) for j in range(len(basis))]
                        for i in range(len(basis))], fld)


# ---------------------------------------------------------------------------
# The model pipeline


class CurveModel:
    """Canonical (or hyperelliptic) model over Q with its basis of
    q-expansions and any computed automorphism matrices."""

    def __init__(self, genus, degree, polynomials, basis, prec,
                 hyperelliptic=None, involutions=None, manifest=None):
        self.genus = genus
        self.degree = degree
        self.polynomials = polynomials
        self.basis = basis
        self.prec = prec
        self.hyperelliptic = hyperelliptic
        self.involutions = involutions or {}
        self.manifest = manifest or {}


def algorithm2(config, prec=None, involution_candidates=()):
    """Model over Q for the quotient curve: runs the fixed-space
    computation, imposes the rational structure, and finds relations."""
    fs = algorithm1(config, prec=prec)
    if fs.genus < 2:
        raise ValueError("the quotient has genus %d < 2; no canonical "
                         "model exists" % fs.genus)
    basis = rational_fixed_basis(fs)
    if config.hyperelliptic or fs.genus == 2:
        coeffs = hyperelliptic_model(basis)
        return CurveModel(fs.genus, None, [], basis, fs.prec,
                          hyperelliptic=coeffs,
                          manifest=_manifest(config, fs))
    polys = None
    degree = None
    for d in (2, 3, 4):
        polys = find_relations(basis, d, prec=fs.prec)
        degree = d
        if d == 2 and len(polys) == expected_quadric_count(fs.genus):
            break
        if d > 2 and polys:
            break
    involutions = {}
    for name, alpha in involution_candidates:
        involutions[name] = automorphism_matrix(fs, basis, alpha)
    return CurveModel(fs.genus, degree, polys, basis, fs.prec,
                      involutions=involutions,
                      manifest=_manifest(config, fs))


def _manifest(config, fs):
    return {
        "M": config.M, "K": config.K, "N": config.N, "h": config.h,
        "prec": fs.prec, "genus": fs.genus,
        "uniformizer_index": config.K * config.h,
    }
