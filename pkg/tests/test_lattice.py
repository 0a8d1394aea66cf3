import numpy as np
import pytest

from app.errors import ConfigError, InadmissibleFluxError, RangeError
from app.model import catalog
from app.model.lattice import (
    DisorderSpec,
    HoppingTable,
    SymmetrySpec,
    assemble_element,
    build_hamiltonian,
    covariance_defect,
    inversion,
    magnetic_translation,
    peierls_phase,
    realize_disorder,
    symmetry_defect,
    time_reversal,
)
from app.model.torus import FluxTensor, TorusGeometry, element_norm, identity

UNIT = ((1, 0, 0), (0, 1, 0), (0, 0, 1))


class TestHoppingTable:
    def test_missing_partner(self):
        with pytest.raises(ConfigError, match="partner"):
            HoppingTable({(1, 0, 0): [[1.0]], (0, 0, 0): [[0.0]]})

    def test_partner_must_be_adjoint(self):
        with pytest.raises(ConfigError, match="adjoint"):
            HoppingTable({(1, 0, 0): [[1.0j]], (-1, 0, 0): [[1.0j]]})

    def test_from_half_completes_partners(self):
        t = np.array([[0.0, 1.0], [2.0j, 0.0]])
        table = HoppingTable.from_half({(0, 1, 0): t, (0, 0, 0): np.diag([1.0, -1.0])})
        np.testing.assert_array_equal(table.entries[(0, -1, 0)], t.conj().T)
        assert table.canonical_displacements() == ((0, 0, 0), (0, 1, 0))
        assert table.range == 1

    def test_range_checked_against_torus(self):
        table = HoppingTable.from_half({(2, 0, 0): [[1.0]]})
        with pytest.raises(RangeError):
            build_hamiltonian(TorusGeometry((3, 5, 5)), table)
        build_hamiltonian(TorusGeometry((5, 5, 5)), table)

    def test_orbital_mismatch(self):
        with pytest.raises(ConfigError):
            build_hamiltonian(TorusGeometry((3, 3, 3), orbitals=2), catalog.cubic())


class TestHamiltonian:
    def test_hermitian(self):
        g = TorusGeometry((5, 5, 3), orbitals=4)
        h = build_hamiltonian(g, catalog.qhz(mass=-2.0, b=0.3), dis=DisorderSpec(strength=0.5, master_seed=3))
        np.testing.assert_array_equal(h.matrix, h.matrix.conj().T)

    def test_inadmissible_flux_rejected(self):
        g = TorusGeometry((9, 9, 3), orbitals=2)
        with pytest.raises(InadmissibleFluxError):
            build_hamiltonian(g, catalog.stacked_chern(), FluxTensor.from_numerators((0, 0, 1), 9))

    def test_peierls_phase(self):
        flux = FluxTensor.from_numerators((0, 0, 1), 2)
        phase = peierls_phase(np.array([[1, 0, 0]]), np.array([[0, 1, 0]]), flux)
        assert phase[0] == pytest.approx(np.exp(1j * np.pi * 0.5))
        assert peierls_phase(np.array([[1, 0, 0]]), np.array([[0, 1, 0]]), FluxTensor())[0] == 1

    def test_hop_orientation(self):
        g = TorusGeometry((9, 9, 3))
        flux = FluxTensor.from_numerators((0, 0, 2), 9)
        hop = assemble_element(g, HoppingTable({(1, -1, 0): [[1.0]]}, hermitian=False), flux)
        row, col = g.site_index((1, 0, 0)), g.site_index((0, 1, 0))
        assert hop.matrix[row, col] == pytest.approx(np.exp(-2j * np.pi / 9))

    def test_hofstadter_flux_shifts_spectrum(self):
        g = TorusGeometry((9, 9, 3))
        clean = np.linalg.eigvalsh(build_hamiltonian(g, catalog.cubic()).matrix)
        field = np.linalg.eigvalsh(build_hamiltonian(g, catalog.cubic(), FluxTensor.from_numerators((0, 0, 2), 9)).matrix)
        assert np.max(np.abs(clean - field)) > 1e-2


class TestCovariance:
    def test_magnetic_translations_are_unitary(self):
        g = TorusGeometry((9, 9, 3), orbitals=2)
        flux = FluxTensor.from_numerators((0, 0, 2), 9)
        U = magnetic_translation(g, flux, (1, 2, 0))
        assert element_norm(U @ U.H - identity(g, flux)) < 1e-14

    def test_clean_admissible_flux(self):
        g = TorusGeometry((7, 7, 7), orbitals=2)
        flux = FluxTensor.from_numerators((0, 0, 2), 7)
        table = catalog.stacked_chern(1.0)
        h = build_hamiltonian(g, table, flux)
        assert max(covariance_defect(h, table, None, a) for a in UNIT) < 1e-13

    def test_disorder_is_translated(self):
        g = TorusGeometry((5, 5, 5), orbitals=2)
        flux = FluxTensor.from_numerators((2, 0, 0), 5)
        table = catalog.stacked_chern(1.0)
        field = realize_disorder(g, table, DisorderSpec(strength=0.7, master_seed=12, realization_index=3))
        h = build_hamiltonian(g, table, flux, field)
        for a in UNIT + ((2, -1, 3),):
            assert covariance_defect(h, table, field, a) < 1e-13
        assert covariance_defect(h, table, None, (1, 0, 0)) > 1e-3

    def test_inadmissible_flux_breaks_covariance(self):
        g = TorusGeometry((7, 7, 7), orbitals=2)
        flux = FluxTensor.from_numerators((0, 0, 1), 7)
        table = catalog.stacked_chern(1.0)
        h = build_hamiltonian(g, table, flux, enforce_admissibility=False)
        assert max(covariance_defect(h, table, None, a, kind="spectral") for a in UNIT) > 0.1


class TestDisorder:
    def test_reproducible_streams(self):
        g = TorusGeometry((3, 3, 3))
        spec = DisorderSpec(strength=1.0, master_seed=2**63 + 5, realization_index=4)
        a = realize_disorder(g, catalog.cubic(), spec).values
        b = realize_disorder(g, catalog.cubic(), spec).values
        c = realize_disorder(g, catalog.cubic(), spec.with_realization(5)).values
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)
        assert np.all(np.abs(a) <= 0.5)

    def test_onsite_flag(self):
        g = TorusGeometry((3, 3, 3))
        with_onsite = realize_disorder(g, catalog.cubic(), DisorderSpec(strength=1.0))
        bonds_only = realize_disorder(g, catalog.cubic(), DisorderSpec(strength=1.0, onsite=False))
        assert (0, 0, 0) in with_onsite.displacements
        assert (0, 0, 0) not in bonds_only.displacements

    def test_negative_strength(self):
        with pytest.raises(ConfigError):
            DisorderSpec(strength=-0.1)

    def test_orbital_pattern_shape(self):
        with pytest.raises(ConfigError):
            DisorderSpec(strength=1.0, orbital_matrix=np.eye(3)).pattern(2)


class TestSymmetries:
    @pytest.fixture(scope="class")
    def setup(self):
        g = TorusGeometry((3, 3, 3), orbitals=4)
        return g, catalog.get_model("qhz").symmetry_spec()

    def test_time_reversal_invariant_at_zero_b(self, setup):
        g, sym = setup
        h = build_hamiltonian(g, catalog.qhz(mass=-2.0))
        assert symmetry_defect(time_reversal(h, sym), h) < 1e-13
        broken = build_hamiltonian(g, catalog.qhz(mass=-2.0, b=0.5))
        assert symmetry_defect(time_reversal(broken, sym), broken) > 0.1

    def test_time_reversal_is_an_involution(self, setup):
        g, sym = setup
        h = build_hamiltonian(g, catalog.qhz(mass=-2.0, b=0.5))
        assert symmetry_defect(time_reversal(time_reversal(h, sym), sym), h) < 1e-14

    def test_identity_pattern_disorder_keeps_time_reversal(self, setup):
        g, sym = setup
        dis = DisorderSpec(strength=0.5, master_seed=1, orbital_matrix=np.eye(4))
        h = build_hamiltonian(g, catalog.qhz(mass=-2.0), dis=dis)
        assert symmetry_defect(time_reversal(h, sym), h) < 1e-13

    def test_inversion(self, setup):
        g, sym = setup
        h = build_hamiltonian(g, catalog.qhz(mass=-2.0))
        assert symmetry_defect(inversion(h, sym), h) < 1e-13
        broken = build_hamiltonian(g, catalog.qhz(mass=-2.0, b=0.5))
        assert symmetry_defect(inversion(broken, sym), broken) > 0.1

    @pytest.mark.parametrize(
        "name,params,trs,inv",
        [
            ("cubic", {}, True, True),
            ("stacked_chern", {}, False, True),
            ("rice_mele", {"theta": 0.0}, True, True),
            ("rice_mele", {"theta": 0.7}, True, False),
        ],
    )
    def test_catalog_symmetry_data(self, name, params, trs, inv):
        fixture = catalog.get_model(name)
        sym = fixture.symmetry_spec()
        h = build_hamiltonian(TorusGeometry((3, 3, 3), orbitals=fixture.orbitals), fixture.table(**params))
        for image, expected in ((time_reversal(h, sym), trs), (inversion(h, sym), inv)):
            defect = symmetry_defect(image, h)
            assert defect < 1e-13 if expected else defect > 0.1

    def test_time_reversal_needs_zero_flux(self):
        g = TorusGeometry((3, 3, 3), orbitals=2)
        h = build_hamiltonian(g, catalog.stacked_chern(), FluxTensor.from_numerators((0, 0, 2), 3))
        with pytest.raises(ConfigError):
            time_reversal(h, SymmetrySpec.trivial(2))

    def test_symmetry_spec_must_be_unitary(self):
        with pytest.raises(ConfigError):
            SymmetrySpec(2 * np.eye(2), np.eye(2))
