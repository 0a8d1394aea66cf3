import numpy as np
import pytest

from app.errors import ConfigError
from app.model import catalog
from app.model.kspace import berry_phase_polarization
from app.model.lattice import DisorderSpec, atomic_table, build_hamiltonian, realize_disorder
from app.model.path import AdiabaticPath, KnotProfile
from app.model.response import (
    KAPPA,
    calibrate_kappa,
    chern2_integrand,
    convergence_report,
    delta_alpha,
    first_chern,
    integrate,
    polarization_change,
    polarization_report,
    proof_identity_defect,
    second_chern,
    second_chern_report,
    second_derivative_cancellation,
    time_derivative_projector,
    z2_from_inversion_pair,
    z2_from_trs_pair,
)
from app.model.spectral import fermi_projector
from app.model.torus import FluxTensor, TorusGeometry, derive, zeros_like

from .conftest import SX, SZ, random_element

TWO_PI = 2 * np.pi


def catalog_path(name, geometry, knots, samples, interpolation="smoothstep", closed=False, dis=None, **static):
    fixture = catalog.get_model(name)
    profile = KnotProfile(tuple(knots), tuple(knots.values()), interpolation=interpolation, periodic=closed)
    field = realize_disorder(geometry, fixture.table(**static, **profile.value(0.0)), dis) if dis else None

    def builder(t):
        return build_hamiltonian(geometry, fixture.table(**static, **profile.value(t)), FluxTensor(), field)

    return AdiabaticPath.uniform(
        samples, builder, closed=closed, stationary=profile.stationary_endpoints(), label=name
    )


def constant_path(h, samples=4):
    return AdiabaticPath.uniform(samples, lambda t: h, stationary=True, label="constant")


class TestQuadrature:
    def test_rules(self):
        times = np.linspace(0.0, 1.0, 9)
        assert integrate(times**2, times, "simpson") == pytest.approx(1 / 3, abs=1e-14)
        assert integrate(times**2, times) == pytest.approx(1 / 3, abs=1e-2)


class TestProofIdentities:
    def test_pairing_identity_vanishes_for_any_elements(self, geometry, rng):
        p, dtp = random_element(geometry, rng), random_element(geometry, rng)
        assert proof_identity_defect(p, dtp) < 1e-11

    def test_second_derivative_cancellation(self, geometry, rng):
        p, dtp = random_element(geometry, rng), random_element(geometry, rng)
        assert second_derivative_cancellation(p, dtp) < 1e-11


class TestTrivialPaths:
    def test_constant_path_has_no_response(self):
        h = build_hamiltonian(TorusGeometry((5, 5, 5), orbitals=4), catalog.qhz(mass=-2.0))
        report = delta_alpha(constant_path(h))
        assert report.delta_alpha == pytest.approx(0.0, abs=1e-10)
        assert report.delta_alpha_boundary == 0.0
        assert report.delta_P == pytest.approx([0.0, 0.0, 0.0], abs=1e-10)
        assert report.proof_identity_max < 1e-12

    def test_atomic_limit(self):
        g = TorusGeometry((3, 3, 3), orbitals=2)
        path = catalog_path("atomic", g, {0.0: {"splitting": 1.0}, 1.0: {"splitting": 3.0}}, 6)
        report = delta_alpha(path)
        assert report.delta_alpha == pytest.approx(0.0, abs=1e-12)
        assert report.chern2 == pytest.approx(0.0, abs=1e-12)

    def test_delta_alpha_needs_stationary_ends(self):
        g = TorusGeometry((3, 3, 3), orbitals=2)
        path = catalog_path("atomic", g, {0.0: {"splitting": 1.0}, 1.0: {"splitting": 3.0}}, 6, interpolation="linear")
        with pytest.raises(ConfigError, match="stationary"):
            delta_alpha(path)

    def test_second_chern_needs_a_loop(self):
        h = build_hamiltonian(TorusGeometry((3, 3, 3), orbitals=2), catalog.atomic())
        with pytest.raises(ConfigError):
            second_chern_report(constant_path(h))

    def test_convergence_levels(self):
        h = build_hamiltonian(TorusGeometry((3, 3, 3), orbitals=2), catalog.atomic())
        report = convergence_report(constant_path(h, samples=8), lambda path: polarization_change(path, 1))
        assert report.n_samples == [9, 5, 3]
        assert report.values == [0.0, 0.0, 0.0]
        assert report.richardson_ratio is None


class TestPolarization:
    def test_rice_mele_pump_matches_berry_phase(self):
        g = TorusGeometry((9, 3, 3), orbitals=2)
        path = catalog_path("rice_mele", g, {0.0: {"theta": 0.0}, 1.0: {"theta": TWO_PI}}, 40, "linear", closed=True)
        report = polarization_report(path, (1,))
        fixture = catalog.get_model("rice_mele")
        oracle = berry_phase_polarization(lambda t: fixture.table(theta=TWO_PI * t), axis=1, nk=64)
        assert abs(report.delta_P[0] - round(report.delta_P[0])) < 0.02
        assert round(report.delta_P[0]) == round(oracle)
        assert report.imaginary_residue < 1e-10
        assert min(report.gap_profile) > 0.1

    def test_static_directions_do_not_pump(self):
        g = TorusGeometry((9, 3, 3), orbitals=2)
        path = catalog_path("rice_mele", g, {0.0: {"theta": 0.0}, 1.0: {"theta": TWO_PI}}, 12, "linear", closed=True)
        assert polarization_report(path, (2, 3)).delta_P == pytest.approx([0.0, 0.0], abs=1e-12)

    def test_reversed_path_pumps_backwards(self):
        g = TorusGeometry((9, 3, 3), orbitals=2)
        path = catalog_path("rice_mele", g, {0.0: {"theta": 0.0}, 1.0: {"theta": TWO_PI}}, 12, "linear", closed=True)
        forward = polarization_change(path, 1)
        assert abs(forward) > 0.1
        assert polarization_change(path.reverse(), 1) == pytest.approx(-forward, abs=1e-10)


def rotating_path(samples, rate=1.0):
    g = TorusGeometry((3, 3, 3), orbitals=2)

    def builder(t):
        return build_hamiltonian(g, atomic_table(np.cos(rate * t) * SZ + np.sin(rate * t) * SX))

    return AdiabaticPath.uniform(samples, builder, label="rotating")


def rotating_derivative(t, rate=1.0):
    return -0.5 * rate * (np.cos(rate * t) * SX - np.sin(rate * t) * SZ)


class TestTimeDerivative:
    def test_second_order_in_the_step(self):
        errors = []
        for samples in (8, 16):
            path = rotating_path(samples)
            k = samples // 2
            dtp = time_derivative_projector(path, k)
            errors.append(np.abs(dtp.matrix[:2, :2] - rotating_derivative(path.times[k])).max())
        assert errors[1] < 1e-2
        assert errors[0] / errors[1] == pytest.approx(4.0, rel=0.1)

    def test_richardson_ratio(self):
        def midpoint_entry(level):
            k = (len(level.times) - 1) // 2
            return time_derivative_projector(level, k).matrix[0, 1].real

        report = convergence_report(rotating_path(16), midpoint_entry)
        assert report.n_samples == [17, 9, 5]
        assert report.values[0] == pytest.approx(rotating_derivative(0.5)[0, 1].real, abs=1e-2)
        assert report.richardson_ratio == pytest.approx(4.0, rel=0.05)


class TestPathAlgebra:
    knots = ({"mass": -5.0, "b": 0.0}, {"mass": -4.5, "b": 0.8}, {"mass": -4.0, "b": 0.0})

    def piece(self, start, end, samples=16):
        g = TorusGeometry((3, 3, 3), orbitals=4)
        return catalog_path("qhz", g, {0.0: self.knots[start], 1.0: self.knots[end]}, samples)

    def test_delta_alpha_is_additive(self):
        first, second = self.piece(0, 1), self.piece(1, 2)
        whole = delta_alpha(first.concatenate(second)).delta_alpha
        assert whole == pytest.approx(delta_alpha(first).delta_alpha + delta_alpha(second).delta_alpha, abs=5e-3)

    def test_out_and_back_loop_has_no_second_chern(self):
        out = self.piece(0, 1, samples=8)
        loop = out.concatenate(out.reverse())
        assert loop.closed
        assert second_chern(loop) == pytest.approx(0.0, abs=1e-10)


class TestFirstChern:
    @pytest.mark.slow
    def test_stacked_chern_matches_plaquette_oracle(self):
        from app.model.kspace import first_chern_fhs

        g = TorusGeometry((11, 11, 3), orbitals=2)
        p = fermi_projector(build_hamiltonian(g, catalog.stacked_chern(1.0)), 0.0)
        value = first_chern(p, 1, 2)
        assert value == pytest.approx(first_chern_fhs(catalog.stacked_chern(1.0)), abs=0.02)


class TestNormalization:
    def test_calibration(self):
        fit = calibrate_kappa(2 * KAPPA, 2)
        assert fit.ratio == pytest.approx(1.0, abs=1e-15)
        with pytest.warns(RuntimeWarning):
            calibrate_kappa(2.2 * KAPPA, 2)
        with pytest.raises(ConfigError):
            calibrate_kappa(1.0, 0.0)

    def test_integrand_is_real_for_projector_paths(self):
        g = TorusGeometry((3, 3, 3), orbitals=4)
        path = catalog_path("qhz_loop", g, {0.0: {"theta": 0.0}, 1.0: {"theta": TWO_PI}}, 8, "linear", closed=True)
        p = path.projector(path.times[3])
        assert isinstance(chern2_integrand(p, time_derivative_projector(path, 3)), float)

    def test_integrand_is_alternating(self):
        g = TorusGeometry((3, 3, 3), orbitals=4)
        path = catalog_path("qhz_loop", g, {0.0: {"theta": 0.0}, 1.0: {"theta": TWO_PI}}, 8, "linear", closed=True)
        p = path.projector(path.times[3])
        dtp = time_derivative_projector(path, 3)
        dps = [derive(p, j) for j in (1, 2, 3)]
        value = chern2_integrand(p, dtp, dps=dps)
        assert chern2_integrand(p, dtp, dps=[dps[1], dps[0], dps[2]]) == pytest.approx(-value, abs=1e-13)
        assert chern2_integrand(p, zeros_like(p), dps=dps) == 0.0


class TestZ2:
    def test_time_reversal_invariant_path_is_integer(self):
        g = TorusGeometry((3, 3, 3), orbitals=4)
        knots = {0.0: {"mass": -5.0}, 1.0: {"mass": -4.5}}
        path = catalog_path("qhz", g, knots, 6)
        report = z2_from_trs_pair(path, catalog.get_model("qhz").symmetry_spec())
        assert report.classification == "integer"
        assert abs(report.delta_alpha) < 1e-8
        assert max(report.endpoint_defects) < 1e-13
        assert abs(delta_alpha(path).delta_alpha) < 0.02

    def test_endpoints_must_be_symmetric(self):
        g = TorusGeometry((3, 3, 3), orbitals=4)
        knots = {0.0: {"mass": -5.0, "b": 0.3}, 1.0: {"mass": -4.5, "b": 0.0}}
        with pytest.raises(ConfigError, match="symmetric"):
            z2_from_trs_pair(catalog_path("qhz", g, knots, 6), catalog.get_model("qhz").symmetry_spec())

    def test_inversion_variant(self):
        g = TorusGeometry((3, 3, 3), orbitals=4)
        knots = {0.0: {"mass": -5.0}, 1.0: {"mass": -4.5}}
        report = z2_from_inversion_pair(catalog_path("qhz", g, knots, 6), catalog.get_model("qhz").symmetry_spec())
        assert report.symmetry == "inversion"
        assert report.classification == "integer"


@pytest.mark.slow
class TestAcceptance:
    """Desk-scale runs of the quantized observables."""

    def test_second_chern_of_the_qhz_loop(self):
        from app.model.kspace import second_chern_4d

        g = TorusGeometry((7, 7, 7), orbitals=4)
        loop = catalog_path("qhz_loop", g, {0.0: {"theta": 0.0}, 1.0: {"theta": TWO_PI}}, 24, "linear", closed=True)
        report = second_chern_report(loop)
        fixture = catalog.get_model("qhz_loop")
        oracle = second_chern_4d(lambda t: fixture.table(theta=TWO_PI * t), grid=(12, 12))
        assert report.deviation < 0.05
        assert report.nearest_integer == round(oracle)
        assert report.proof_identity_max < 1e-12

    def test_second_chern_survives_disorder(self):
        g = TorusGeometry((7, 7, 7), orbitals=4)
        knots = {0.0: {"theta": 0.0}, 1.0: {"theta": TWO_PI}}
        values = []
        for index in range(5):
            dis = DisorderSpec(strength=0.2, master_seed=2024, realization_index=index, orbital_matrix=np.eye(4))
            values.append(second_chern(catalog_path("qhz_loop", g, knots, 24, "linear", closed=True, dis=dis)))
        assert abs(np.mean(values) - round(np.mean(values))) < 0.05
        assert np.std(values) < 0.05

    def test_time_reversal_relation(self):
        g = TorusGeometry((7, 7, 7), orbitals=4)
        knots = {0.0: {"mass": -5.0, "b": 0.0}, 0.5: {"mass": -3.5, "b": 1.0}, 1.0: {"mass": -2.0, "b": 0.0}}
        path = catalog_path("qhz", g, knots, 24)
        sym = catalog.get_model("qhz").symmetry_spec()
        response = delta_alpha(path)
        z2 = z2_from_trs_pair(path, sym)
        assert abs(response.delta_alpha - z2.delta_alpha) < 0.05
        assert z2.classification == "half-integer"
        assert z2.twice_alpha_distance < 0.1

    def test_trivial_to_trivial_is_integer(self):
        g = TorusGeometry((7, 7, 7), orbitals=4)
        knots = {0.0: {"mass": -5.0, "b": 0.0}, 0.5: {"mass": -4.5, "b": 1.0}, 1.0: {"mass": -4.0, "b": 0.0}}
        z2 = z2_from_trs_pair(catalog_path("qhz", g, knots, 24), catalog.get_model("qhz").symmetry_spec())
        assert z2.classification == "integer"
