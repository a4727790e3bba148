"""Tests for newform decomposition, q-expansion synthesis and the database
cross-check fixtures."""

import json
import os

import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from curvemodels.fields import DirichletCharacter, TowerElement, iszero
from curvemodels.newforms import (
    Newform,
    cross_check_orbits,
    database_fetch,
    equivalent_orbits,
    new_subspace,
    newform_decomposition,
    qexp_from_eigendata,
    quadratic_conjugate,
)
from curvemodels.symbols import group_space

FIXTURES = os.path.join(os.path.dirname(__file__), "..", "src", "curvemodels",
                        "fixtures", "paper", "newforms.json")


def paper_forms():
    with open(FIXTURES) as fh:
        doc = json.load(fh)
    return {k: Newform.from_json(v) for k, v in doc.items()}


class TestNewSubspace:
    def test_new_dimensions(self):
        assert new_subspace(group_space(35, 1), plus=True).cols == 3
        assert new_subspace(group_space(49, 1), plus=True).cols == 1
        assert new_subspace(group_space(245, 1), plus=True).cols == 13

    def test_dimension_bookkeeping_61(self):
        # old/new bookkeeping across all levels carrying the Gamma_1(7)
        # structure: sigma_0(245/L)-fold old copies fill the 61-dim space
        dims = {}
        for L in (7, 35, 49, 245):
            dims[L] = new_subspace(group_space(L, 7), plus=True).cols
        assert dims == {7: 0, 35: 7, 49: 3, 245: 41}
        total = 4 * dims[7] + 2 * dims[35] + 2 * dims[49] + dims[245]
        assert total == 61

    def test_new_subspace_hecke_stable(self):
        s = group_space(35, 1)
        v = new_subspace(s, plus=True)
        from curvemodels.newforms import restrict_operator
        restrict_operator(v, s.hecke_matrix(2))  # raises if not stable


class TestDecomposition:
    def test_level_35(self):
        orbits = newform_decomposition(35)
        assert [o.degree for o in orbits] == [1, 2]
        f35, g35 = orbits
        assert f35.eigenvalue(2) == 0
        assert f35.eigenvalue(3) == 1
        assert f35.eigenvalue(5) == -1
        assert f35.eigenvalue(7) == 1
        alpha = g35.eigenvalue(2)
        # alpha^2 + alpha - 4 = 0
        assert iszero(alpha * alpha + alpha - 4)
        assert iszero(g35.eigenvalue(3) + alpha + 1)

    def test_level_49(self):
        orbits = newform_decomposition(49)
        assert [o.degree for o in orbits] == [1]
        nf = orbits[0]
        assert nf.eigenvalue(2) == 1
        assert nf.eigenvalue(7) == 0

    def test_level_245(self):
        orbits = newform_decomposition(245)
        assert [o.degree for o in orbits] == [1, 1, 1, 2, 2, 2, 2, 2]
        assert sum(o.degree for o in orbits) == 13

    def test_unsupported_degree(self):
        orbits = newform_decomposition(97)
        assert [o.degree for o in orbits] == [3, 4]
        with pytest.raises(ValueError, match="exceeds the supported"):
            orbits[0].eigenvalue(2)

    def test_deterministic_order(self):
        a = [dict(o.eigenvalues) for o in newform_decomposition(35)]
        b = [dict(o.eigenvalues) for o in newform_decomposition(35)]
        assert a == b


class TestQexpSynthesis:
    def test_f0_displayed_coefficients(self):
        orbits = newform_decomposition(245)
        f0 = qexp_from_eigendata(orbits[0], 11)
        assert f0.an == [mpq(c) for c in (1, -2, -3, 2, 1, 6, 0, 0, 6, -2)]

    def test_f49_recursion_coefficient(self):
        nf = qexp_from_eigendata(newform_decomposition(49)[0], 11)
        # a_8 = a_2 a_4 - 2 a_2 with eps(2) = 1
        assert nf.coefficient(8) == -3
        assert nf.coefficient(1) == 1

    def test_missing_prime_error(self):
        from curvemodels.newforms import EigenvalueSystem
        sys_ = EigenvalueSystem(11, DirichletCharacter.trivial(1), 1,
                                eigenvalues={2: mpq(-2)})
        with pytest.raises(ValueError, match="a_3"):
            qexp_from_eigendata(sys_, 11)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(min_value=2, max_value=29), st.integers(min_value=2, max_value=29))
    def test_multiplicativity_property(self, m, k):
        from math import gcd
        if gcd(m, k) != 1 or m * k > 30:
            return
        f0 = qexp_from_eigendata(newform_decomposition(245)[0], 31)
        assert iszero(f0.coefficient(m * k)
                      - f0.coefficient(m) * f0.coefficient(k))

    def test_hecke_recursion_property(self):
        # a_{p^2} = a_p^2 - eps(p) p for p coprime to the level
        g35 = qexp_from_eigendata(newform_decomposition(35)[1], 10)
        a2, a4 = g35.coefficient(2), g35.coefficient(4)
        assert iszero(a4 - (a2 * a2 - 2))


class TestPaperFixtures:
    def test_all_paper_forms_reproduced(self):
        paper = paper_forms()
        o35 = newform_decomposition(35)
        o49 = newform_decomposition(49)
        o245 = newform_decomposition(245)
        computed = {
            "f35": qexp_from_eigendata(o35[0], 11),
            "g35": qexp_from_eigendata(o35[1], 11),
            "f49": qexp_from_eigendata(o49[0], 11),
            "f0": qexp_from_eigendata(o245[0], 11),
        }
        for name, mine in computed.items():
            assert equivalent_orbits(mine, paper[name]), name
        deg2 = [qexp_from_eigendata(o, 11) for o in o245 if o.degree == 2]
        for name in ("f1", "f2"):
            assert sum(equivalent_orbits(f, paper[name]) for f in deg2) == 1, name

    def test_f35_resolution(self):
        # the displayed expansion has a_6 = 1 with a_2 = 0, violating
        # multiplicativity; the resolved fixture satisfies it
        f35 = paper_forms()["f35"]
        assert iszero(f35.coefficient(6) - f35.coefficient(2) * f35.coefficient(3))
        assert f35.an[:5] == [mpq(1), mpq(0), mpq(1), mpq(-2), mpq(-1)]

    def test_quadratic_conjugate(self):
        alpha = TowerElement.generator(1, (mpq(-4), mpq(1), mpq(1)))
        c = quadratic_conjugate(alpha)
        assert iszero(alpha + c + 1)       # sum of roots = -1
        assert iszero(alpha * c + 4)       # product of roots = -4


class TestDatabase:
    def test_cross_check_all_levels(self):
        for L in (35, 49, 245):
            local, remote = cross_check_orbits(L)
            assert len(local) == len(remote)

    def test_orbit_counts_and_degrees(self):
        remote = database_fetch(245)
        degrees = sorted(len_orbit(nf) for nf in remote)
        assert degrees == [1, 1, 1, 2, 2, 2, 2, 2]

    def test_level_49_a2(self):
        remote = database_fetch(49)
        assert len(remote) == 1
        assert remote[0].coefficient(2) == 1

    def test_cache_determinism(self):
        a = database_fetch(35)
        b = database_fetch(35)
        assert [f.to_json() for f in a] == [f.to_json() for f in b]

    def test_missing_fixture(self):
        with pytest.raises(ValueError, match="offline"):
            database_fetch(11)

    def test_schema_mismatch(self, tmp_path, monkeypatch):
        from curvemodels import newforms as nfmod
        bad = {"level": 36, "weight": 2, "orbits": []}
        p = tmp_path / "newforms_36_2_trivial.json"
        p.write_text(json.dumps({"level": 35, "weight": 2, "orbits": []}))
        monkeypatch.setenv(nfmod.CACHE_DIR_ENV, str(tmp_path))
        with pytest.raises(ValueError, match="does not match"):
            database_fetch(36)


def len_orbit(nf):
    from curvemodels.newforms import _orbit_degree
    return _orbit_degree(nf.an)
