"""Tests for the Manin symbol spaces and the operator algebra on cuspidal
homology."""

import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from curvemodels import symbols as ms
from curvemodels.fields import (
    DirichletCharacter,
    ExactMatrix,
    TowerElement,
    euler_phi,
)
from curvemodels.groups import IntMat2
from curvemodels.symbols import (
    act_by_matrix,
    build_space,
    character_idempotent,
    degeneracy,
    eigensymbol,
    group_space,
    hecke_action,
    merel_heilbronn,
    plus_subspace,
    restrict_to_plus,
    star_involution,
)

# the order-6 character mod 7 sending 3 to zeta_6
CHI = DirichletCharacter.from_value(7, 3, 1, 6)


# ---------------------------------------------------------------------------
# Independent dimension oracle: the closed formula for dim S_2(Gamma_0(N), chi)
# (Cohen-Oesterle), summed over the even characters of the Gamma_1 part.


def _factorint(n):
    out = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def _psi(n):
    out = n
    for p in _factorint(n):
        out += out // p
    return out


def _lam(r, s, p):
    if 2 * s <= r:
        if r % 2 == 0:
            return p ** (r // 2) + p ** (r // 2 - 1)
        return 2 * p ** (r // 2)
    return 2 * p ** (r - s)


def _as_rational(x):
    if isinstance(x, mpq) or isinstance(x, int):
        return mpq(x)
    return x.rational_value()


def dim_s2_with_character(N, chi):
    """dim S_2(Gamma_0(N), chi) for a character chi of modulus N."""
    if N == 1:
        return 0
    if not chi.is_even():
        return 0
    f = chi.conductor()
    fac_n = _factorint(N)
    fac_f = _factorint(f)
    prod = 1
    for p, r in fac_n.items():
        prod *= _lam(r, fac_f.get(p, 0), p)
    s4 = mpq(0)
    s3 = mpq(0)
    for x in range(N):
        if (x * x + 1) % N == 0:
            s4 = s4 + chi(x)
        if (x * x + x + 1) % N == 0:
            s3 = s3 + chi(x)
    total = (mpq(_psi(N), 12) - mpq(prod, 2)
             - _as_rational(s4) / 4 - _as_rational(s3) / 3)
    if chi.is_trivial():
        total += 1
    assert total.denominator == 1
    return int(total)


def dim_s2_group(A, B):
    """dim S_2(Gamma_0(A) meet Gamma_1(B)) by summing over characters."""
    total = 0
    for chi in DirichletCharacter.all_characters(B):
        total += dim_s2_with_character(A, chi.extend(A))
    return total


# ---------------------------------------------------------------------------


class TestBuildSpace:
    def test_level_245_dimension(self):
        s = build_space(5, 7)
        assert s.cuspidal_dim == 122
        assert s.genus == 61

    def test_level_one_trivial(self):
        assert build_space(1, 1).cuspidal_dim == 0

    def test_x0_11(self):
        s = build_space(11, 1)
        assert s.cuspidal_dim == 2
        assert s.cuspidal_dim == 2 * dim_s2_group(11, 1)

    def test_lower_level_spaces(self):
        assert group_space(35, 7).cuspidal_dim == 2 * 7
        assert group_space(49, 7).cuspidal_dim == 2 * 3

    def test_boundary_vanishes_on_cuspidal(self):
        for s in (build_space(11, 1), build_space(5, 7)):
            assert (s.boundary * s.cuspidal).is_zero()

    def test_coprimality_required(self):
        with pytest.raises(ValueError):
            build_space(7, 7)

    def test_symbol_cap(self, monkeypatch):
        monkeypatch.setattr(ms, "MAX_SYMBOLS", 10)
        with pytest.raises(ValueError):
            ms.SymbolSpace(23, 1)

    def test_dimension_formula_sweep(self):
        """dim cuspidal H_1 = 2 dim S_2 against the closed dimension
        formula, for every (M, K) with M K^2 <= 300."""
        pairs = []
        for K in range(1, 18):
            for M in range(1, 300 // (K * K) + 1):
                if M * K * K <= 300 and __import__("math").gcd(M, K) == 1:
                    pairs.append((M, K))
        for (M, K) in pairs:
            s = ms.SymbolSpace(M * K * K, K)
            expected = 2 * dim_s2_group(M * K * K, K)
            assert s.cuspidal_dim == expected, (M, K)


class TestStarInvolution:
    def test_j_squared(self):
        for s in (build_space(11, 1), build_space(5, 7)):
            j = star_involution(s)
            assert j * j == ExactMatrix.identity(s.cuspidal_dim)

    def test_plus_dimensions(self):
        assert plus_subspace(build_space(5, 7)).cols == 61
        assert plus_subspace(build_space(11, 1)).cols == 1

    def test_plus_minus_split(self):
        s = group_space(35, 7)
        j = star_involution(s)
        plus = plus_subspace(s)
        minus = (j + ExactMatrix.identity(s.cuspidal_dim)).kernel()
        assert plus.cols + minus.cols == s.cuspidal_dim
        assert plus.cols == minus.cols


class TestHeckeOperators:
    def test_dual_route_heilbronn_vs_paths(self):
        for s in (build_space(11, 1), build_space(5, 7)):
            for p in (2, 3):
                assert s.hecke_matrix(p) == s.hecke_path_matrix(p)

    def test_merel_set_determinant(self):
        for n in (2, 3, 5, 7):
            assert all(h.det() == n for h in merel_heilbronn(n))

    def test_t2_on_x0_11(self):
        t2 = hecke_action(build_space(11, 1), ("Tp", 2))
        # charpoly (x + 2)^2: a_2 = -2 for the level-11 newform
        assert t2.charpoly() == [mpq(4), mpq(4), mpq(1)]

    def test_hecke_commute(self):
        s = build_space(5, 7)
        t2, t3 = s.hecke_matrix(2), s.hecke_matrix(3)
        assert t2 * t3 == t3 * t2

    def test_diamond_trivial(self):
        s = build_space(5, 7)
        assert hecke_action(s, ("diamond", 1)) == ExactMatrix.identity(122)

    def test_diamond_commutes_with_hecke(self):
        s = build_space(5, 7)
        d3 = s.diamond_matrix(3)
        t2 = s.hecke_matrix(2)
        assert d3 * t2 == t2 * d3

    def test_diamond_minus_one_trivial(self):
        # weight-2 homology does not see <-1>
        s = group_space(35, 7)
        assert s.diamond_matrix(6) == ExactMatrix.identity(s.cuspidal_dim)

    def test_bad_prime_rejected(self):
        s = build_space(5, 7)
        for p in (5, 7):
            with pytest.raises(ValueError):
                s.hecke_matrix(p)

    def test_character_components_fill_space(self):
        s = build_space(5, 7)
        dims = [character_idempotent(s, CHI ** k).rank() for k in (0, 2, 4)]
        assert dims == [42, 40, 40]
        assert sum(dims) == 122
        # odd characters have no weight-2 component
        assert character_idempotent(s, CHI).rank() == 0

    @settings(max_examples=8, deadline=None)
    @given(st.sampled_from([2, 3, 5, 7, 13]))
    def test_hecke_commutes_with_star(self, p):
        s = build_space(11, 1)
        if 11 % p == 0:
            return
        t = s.hecke_matrix(p)
        j = s.star_matrix()
        assert t * j == j * t
        assert t == s.hecke_path_matrix(p)


class TestPathActions:
    def test_star_as_matrix_action(self):
        s = build_space(5, 7)
        j = act_by_matrix(s, IntMat2(-1, 0, 0, 1))
        assert j == s.star_matrix()
        assert j * j == ExactMatrix.identity(122)

    def test_singular_matrix_rejected(self):
        with pytest.raises(ValueError):
            act_by_matrix(build_space(11, 1), IntMat2(1, 1, 1, 1))

    def test_non_normalizing_matrix_detected(self):
        # translation by u/5 does not normalize the level-245 group
        s = build_space(5, 7)
        with pytest.raises(ValueError):
            s.t_tilde_matrix(1, 5)

    def test_twist_hecke_commutation(self):
        # R_chi(7) T_p = chi(p) T_p R_chi(7) for p = 2, 3
        s = build_space(5, 7)
        r = s.twist_operator(CHI).collect()
        for p in (2, 3):
            tp = s.hecke_matrix(p)
            lhs = r * tp
            m = tp * r
            rhs = ExactMatrix([[CHI(p) * x for x in row] for row in m.entries])
            assert lhs == rhs

    def test_star_twist_conjugation(self):
        s = build_space(5, 7)
        j = s.star_matrix()
        for chi in (CHI, CHI ** 2):
            r = s.twist_operator(chi).collect()
            sgn = chi(-1)
            rhs = ExactMatrix([[sgn * x for x in row] for row in r.entries])
            assert j * r * j == rhs

    def test_twist_resolution_of_translation(self):
        # phi(7) [Ttilde^a] = sum over characters eps of eps(a) R_eps(7)
        s = build_space(5, 7)
        a = 3
        total = None
        for eps in DirichletCharacter.all_characters(7):
            r = s.twist_operator(eps).collect()
            term = ExactMatrix([[eps(a) * x for x in row] for row in r.entries])
            total = term if total is None else total + term
        assert total == s.t_tilde_matrix(a).scale(mpq(euler_phi(7)))

    def test_twist_composition(self):
        # R_chi(7) R_psi(5) = chi(5) psi(7) R_{chi psi}(35): the underlying
        # translation matrices match exactly, so the identity reduces to the
        # collected coefficient comparison
        psi = DirichletCharacter.from_value(5, 2, 1, 4)
        for chi in (CHI, CHI ** 2, CHI ** 3):
            prod = chi * psi
            scale = chi(5) * psi(7)
            for u in range(1, 7):
                for v in range(1, 5):
                    m = IntMat2(7, u, 0, 7) * IntMat2(5, v, 0, 5)
                    assert (m.a, m.b, m.c, m.d) == (35, 5 * u + 7 * v, 0, 35)
                    lhs = chi.conjugate()(u) * psi.conjugate()(v)
                    rhs = scale * prod.conjugate()(5 * u + 7 * v)
                    assert lhs == rhs

    def test_atkin_lehner_star_conjugation(self):
        s = build_space(5, 7)
        j = s.star_matrix()
        for q in (5, 49):
            w = s.atkin_lehner(q)
            assert j * w * j == w

    def test_atkin_lehner_twisted_hecke_commutation(self):
        # T_p w_Q = conj(eps_Q)(p) w_Q T_p on each character component;
        # for Q = 49 the Q-part of the character is the character itself
        s = build_space(5, 7)
        w49 = s.atkin_lehner(49)
        for p in (2, 3):
            tp = s.hecke_matrix(p)
            for k in (0, 2, 4):
                eps = CHI ** k
                proj = character_idempotent(s, eps)
                lhs = tp * (w49 * proj)
                c = eps(p).conjugate() if k else mpq(1)
                m = w49 * tp
                rhs = ExactMatrix([[c * x for x in row] for row in m.entries]) * proj
                assert lhs == rhs

    def test_atkin_lehner_5_commutes_with_hecke(self):
        # the 5-part of every character here is trivial
        s = build_space(5, 7)
        w5 = s.atkin_lehner(5)
        t2 = s.hecke_matrix(2)
        assert t2 * w5 == w5 * t2

    def test_paper_w5_squares_to_identity(self):
        # the determinant-5 matrix normalizing the curve's group, conjugated
        # to level 245 and scaled integral
        s = build_space(5, 7)
        w = s.matrix_action(IntMat2(7 * 2890, 193, 49 * -8685, 7 * -580))
        sq = w * w
        assert sq == s.diamond_matrix(1)
        proj = character_idempotent(s, DirichletCharacter.trivial(7))
        assert (sq - ExactMatrix.identity(122)) * proj == ExactMatrix.zero(122, 122)

    def test_operator_cache_stable(self):
        s = build_space(5, 7)
        assert s.hecke_matrix(2) is s.hecke_matrix(2)
        assert s.t_tilde_matrix(3) is s.t_tilde_matrix(3)


class TestDegeneracy:
    def test_tr_b_composition_is_index(self):
        sN = build_space(5, 7)
        sL = group_space(35, 7)
        index = _psi(245) // _psi(35)
        for d in (1, 7):
            b = degeneracy(sN, sL, d, "B")
            tr = degeneracy(sN, sL, d, "Tr")
            assert b * tr == ExactMatrix.identity(sL.cuspidal_dim).scale(mpq(index))

    def test_tr_b_composition_49(self):
        sN = build_space(5, 7)
        s49 = group_space(49, 7)
        index = _psi(245) // _psi(49)
        for d in (1, 5):
            b = degeneracy(sN, s49, d, "B")
            tr = degeneracy(sN, s49, d, "Tr")
            assert b * tr == ExactMatrix.identity(s49.cuspidal_dim).scale(mpq(index))

    def test_identity_case(self):
        s = build_space(5, 7)
        assert degeneracy(s, s, 1, "Tr") == ExactMatrix.identity(122)
        assert degeneracy(s, s, 1, "B") == ExactMatrix.identity(122)

    def test_b_injective_on_lower_level(self):
        sN = build_space(5, 7)
        sL = group_space(35, 7)
        b = degeneracy(sN, sL, 7, "B")
        assert b.rank() == sL.cuspidal_dim

    def test_star_conjugation(self):
        sN = build_space(5, 7)
        sL = group_space(35, 7)
        jN, jL = sN.star_matrix(), sL.star_matrix()
        b = degeneracy(sN, sL, 7, "B")
        tr = degeneracy(sN, sL, 7, "Tr")
        assert jL * b * jN == b
        assert jN * tr * jL == tr

    def test_weighted_trace_star_conjugation(self):
        sN = build_space(5, 7)
        sL = group_space(35, 7)
        trw = degeneracy(sN, sL, 1, "Tr", character=CHI ** 2)
        assert sN.star_matrix() * trw * sL.star_matrix() == trw

    def test_conductor_violation(self):
        sN = build_space(5, 7)
        sL = group_space(49, 7)
        bad = DirichletCharacter.from_value(5, 2, 1, 4)
        with pytest.raises(ValueError):
            degeneracy(sN, sL, 1, "Tr", character=bad)

    def test_divisibility_checks(self):
        sN = build_space(5, 7)
        sL = group_space(35, 7)
        with pytest.raises(ValueError):
            degeneracy(sN, sL, 5, "Tr")
        with pytest.raises(ValueError):
            degeneracy(sN, sL, 7, "sideways")


class TestEigensymbol:
    def test_f0_isolated_by_two_primes(self):
        s = build_space(5, 7)
        v = eigensymbol(s, [(2, -2), (3, -3)])
        assert len(v.coords) == 61
        assert next(x for x in v.coords if x != 0) == 1

    def test_f0_u_eigenvalues(self):
        # a_5 = 1 and a_7 = 0 in the q-expansion of the isolated form
        s = build_space(5, 7)
        v = eigensymbol(s, [(2, -2), (3, -3)])
        for q, a in ((5, mpq(1)), (7, mpq(0))):
            u = restrict_to_plus(s, s.u_matrix(q))
            assert u.apply(v.coords) == [a * x for x in v.coords]

    def test_f49_new_at_own_level(self):
        v = eigensymbol(group_space(49, 7), [(2, 1), (3, 0)])
        assert len(v.coords) == 3

    def test_f49_old_at_245(self):
        with pytest.raises(ValueError, match="2-dimensional"):
            eigensymbol(build_space(5, 7), [(2, 1), (3, 0)])

    def test_f35_and_g35(self):
        s = group_space(35, 7)
        v = eigensymbol(s, [(2, 0), (3, 1)])
        assert len(v.coords) == 7
        alpha = TowerElement.generator(1, (mpq(-4), mpq(1), mpq(1)))
        vg = eigensymbol(s, [(2, alpha), (3, -(alpha + 1))])
        assert isinstance(vg.coords[0], TowerElement) or vg.coords[0] == 0

    def test_inconsistent_eigendata(self):
        with pytest.raises(ValueError, match="empty"):
            eigensymbol(build_space(11, 1), [(2, 17)])
