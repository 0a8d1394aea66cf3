from fractions import Fraction

import numpy as np
import pytest

from app.errors import AlgebraMismatchError, ConfigError, EvenExtentWarning, InadmissibleFluxError
from app.model.lattice import HoppingTable, assemble_element, nilpotent_invertible_table
from app.model.torus import (
    DIRECTIONS,
    AlgebraElement,
    FluxTensor,
    TorusGeometry,
    cyclic,
    cyclicity_defect,
    derivation_commutator_defect,
    derive,
    element_norm,
    flux_step,
    identity,
    inverse,
    inverse_derivative_defect,
    leibniz_defect,
    partial_integration_defect,
    periodic_distance,
    positivity_margin,
    star_derivation_defect,
    trace_derivative_defect,
    trace_of_product,
    trace_per_volume,
)

from .conftest import random_element


class TestGeometry:
    def test_site_index_is_row_major(self):
        g = TorusGeometry((3, 5, 7))
        assert g.site_index((1, 2, 3)) == (1 * 5 + 2) * 7 + 3
        assert g.site_index((-1, 0, 0)) == g.site_index((2, 0, 0))
        assert g.volume == 105
        np.testing.assert_array_equal(g.site_indices(g.coordinates), np.arange(g.volume))

    def test_small_extent_rejected(self):
        with pytest.raises(ConfigError):
            TorusGeometry((2, 5, 5))

    def test_even_extent_warns(self):
        with pytest.warns(EvenExtentWarning):
            g = TorusGeometry((4, 3, 3))
        assert not g.odd_extents

    def test_periodic_distance_range(self):
        x = np.arange(-10, 11)
        for L in (5, 6):
            w = periodic_distance(x, L)
            assert np.all(w > -L / 2) and np.all(w <= L / 2)
            assert np.all(np.mod(w - x, L) == 0)
        assert periodic_distance(np.array([2]), 4)[0] == 2
        assert periodic_distance(np.array([-2]), 4)[0] == 2

    def test_cyclic(self):
        assert [cyclic(j, 1) for j in DIRECTIONS] == [2, 3, 1]
        assert [cyclic(j, 2) for j in DIRECTIONS] == [3, 1, 2]


class TestFlux:
    def test_admissibility(self):
        g = TorusGeometry((9, 9, 3))
        assert FluxTensor.from_numerators((0, 0, 2), 9).is_admissible(g)
        bad = FluxTensor.from_numerators((0, 0, 1), 9)
        assert len(bad.admissibility_violations(g)) == 2
        with pytest.raises(InadmissibleFluxError, match="B3"):
            bad.check_admissible(g)

    def test_flux_step(self):
        g = TorusGeometry((9, 9, 3))
        assert flux_step(g, 3) == Fraction(2, 9)
        assert flux_step(g, 1) == Fraction(2, 3)
        assert FluxTensor().with_component(3, flux_step(g, 3)).is_admissible(g)

    def test_tensor_is_antisymmetric(self):
        B = FluxTensor((Fraction(1, 3), Fraction(2, 5), Fraction(1, 7))).tensor()
        np.testing.assert_array_equal(B, -B.T)
        assert B[0, 1] == pytest.approx(1 / 7)
        assert B[1, 2] == pytest.approx(1 / 3)


class TestElement:
    def test_shape_checked(self):
        g = TorusGeometry((3, 3, 3))
        with pytest.raises(AlgebraMismatchError):
            AlgebraElement(g, FluxTensor(), np.eye(5))

    def test_tags_must_match(self):
        g = TorusGeometry((3, 3, 3))
        a = identity(g)
        b = identity(g, FluxTensor.from_numerators((0, 0, 2), 3))
        with pytest.raises(AlgebraMismatchError):
            a + b
        with pytest.raises(AlgebraMismatchError):
            a @ b

    def test_matrix_is_read_only(self, geometry, rng):
        f = random_element(geometry, rng)
        with pytest.raises(ValueError):
            f.matrix[0, 0] = 1.0

    def test_numpy_scalar_multiplication(self, geometry, rng):
        f = random_element(geometry, rng)
        g = np.float64(2.0) * f
        assert isinstance(g, AlgebraElement)
        np.testing.assert_array_equal(g.matrix, 2.0 * f.matrix)

    def test_trace_per_volume(self):
        g = TorusGeometry((3, 3, 5), orbitals=2)
        assert trace_per_volume(identity(g)) == pytest.approx(2.0)

    def test_derive_convention(self):
        g = TorusGeometry((5, 5, 5))
        hop = assemble_element(g, HoppingTable({(1, 0, 0): [[1.0]]}, hermitian=False))
        row, col = g.site_index((1, 0, 0)), g.site_index((0, 0, 0))
        assert derive(hop, 1).matrix[row, col] == pytest.approx(-1j)
        assert derive(hop, 2).matrix[row, col] == 0


class TestCalculus:
    """Exact rules on odd tori for elements whose products stay within half the torus."""

    @pytest.fixture
    def pair(self, geometry, rng):
        return random_element(geometry, rng), random_element(geometry, rng)

    @pytest.mark.parametrize("j", DIRECTIONS)
    def test_trace_of_derivative_vanishes(self, pair, j):
        assert trace_derivative_defect(pair[0], j) < 1e-13

    @pytest.mark.parametrize("j", DIRECTIONS)
    def test_partial_integration(self, pair, j):
        assert partial_integration_defect(*pair, j) < 1e-12

    @pytest.mark.parametrize("j", DIRECTIONS)
    def test_leibniz(self, pair, j):
        assert leibniz_defect(*pair, j) < 1e-12

    @pytest.mark.parametrize("j", DIRECTIONS)
    def test_star_derivation(self, pair, j):
        assert star_derivation_defect(pair[0], j) < 1e-14

    def test_derivations_commute(self, pair):
        for j in DIRECTIONS:
            for k in DIRECTIONS:
                assert derivation_commutator_defect(pair[0], j, k) < 1e-12

    def test_cyclicity_and_positivity(self, pair):
        f, g = pair
        assert cyclicity_defect(f, g) < 1e-12
        assert positivity_margin(f) > 0
        assert positivity_margin(f) == pytest.approx(element_norm(f) ** 2 * f.geometry.orbitals)

    @pytest.mark.parametrize("j", DIRECTIONS)
    def test_derivative_of_inverse(self, geometry, rng, j):
        f = assemble_element(geometry, nilpotent_invertible_table(geometry.orbitals, rng))
        assert element_norm(f @ inverse(f) - identity(geometry)) < 1e-12
        assert inverse_derivative_defect(f, j) < 1e-12

    def test_flux_keeps_rules_exact(self, rng):
        g = TorusGeometry((9, 9, 5), orbitals=1)
        flux = FluxTensor.from_numerators((0, 0, 2), 9)
        f, h = random_element(g, rng, flux=flux), random_element(g, rng, flux=flux)
        for j in DIRECTIONS:
            assert leibniz_defect(f, h, j) < 1e-12
            assert partial_integration_defect(f, h, j) < 1e-12

    def test_even_extent_breaks_dense_partial_integration(self, rng):
        def dense(g):
            n = g.dimension
            return AlgebraElement(g, FluxTensor(), rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))

        odd = TorusGeometry((5, 3, 3))
        assert partial_integration_defect(dense(odd), dense(odd), 1) < 1e-10
        with pytest.warns(EvenExtentWarning):
            even = TorusGeometry((4, 3, 3))
        assert partial_integration_defect(dense(even), dense(even), 1) > 1e-3

    def test_trace_of_product_matches_product(self, pair):
        f, g = pair
        assert trace_of_product(f, g) == pytest.approx(trace_per_volume(f @ g), abs=1e-13)
