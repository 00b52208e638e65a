"""Fluctuation generators, their propagators, parity, the phase and the error terms."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hartreelab.errors import CoverageError, DomainError, StructuralError, TruncationError
from hartreelab.fock import (FockSpace, ModeBasis, d_N, displaced_number_state, ladder_bound_check,
                             number_op, second_quantization_bound_check, second_quantize)
from hartreelab.fluctuation import (GeneratorFamily, OrbitalFlow, build_generators, condensate_vector,
                                    et_estimates, et_from_states, interaction_integrand, interaction_tensor,
                                    lattice_mode_model, mode_model, model_from_matrices, omega_phase,
                                    parity_check, parity_commutator, propagate, generator_residual)
from hartreelab.hartree import HartreeState, SolverConfig, evolve
from hartreelab.lattice import Field, Grid, gaussian
from hartreelab.manybody import finite_difference_laplacian, gaussian_orbital, lattice_hartree
from hartreelab.potential import PotentialSpec, pair_matrix

LINE = Grid(1, 16, 8.0)


def model_for(lam, count=4):
    spec = PotentialSpec(lam=lam, mu=1.0)
    return lattice_mode_model(LINE, spec, gaussian_orbital(LINE, 1.0), 1.0, count)


def start(M):
    phi = np.zeros(M, complex)
    phi[0] = 1.0
    return phi


@pytest.fixture(scope="module")
def strong():
    model = model_for(1.0)
    return GeneratorFamily(model, FockSpace(4, 4), 4, orbital0=start(4), horizon=1.0)


@pytest.fixture(scope="module")
def free():
    model = model_for(0.0)
    return GeneratorFamily(model, FockSpace(4, 4), 4, orbital0=start(4), horizon=1.0)


class TestModel:
    def test_modes_orthonormal(self):
        model = model_for(1.0)
        u = model.basis.modes
        assert np.allclose(u.conj() @ u.T, np.eye(4), atol=1e-12)
        assert np.allclose(u[0], gaussian_orbital(LINE, 1.0), atol=1e-12)

    def test_tensor_symmetries(self):
        W = model_for(1.0).tensor
        assert np.allclose(W, W.transpose(1, 0, 3, 2), atol=1e-14)
        assert np.allclose(W, W.transpose(2, 3, 0, 1).conj(), atol=1e-14)

    def test_site_basis_tensor(self, rng):
        V = rng.standard_normal((3, 3))
        V = V + V.T
        site = model_from_matrices(ModeBasis(np.eye(3)), np.eye(3), V).tensor
        assert np.allclose(site, interaction_tensor(np.eye(3), V), atol=1e-15)
        with pytest.raises(StructuralError):
            model_from_matrices(ModeBasis(np.eye(3)), np.eye(2), V)

    def test_full_basis_flow_is_lattice_hartree(self):
        g = Grid(1, 8, 6.0)
        spec = PotentialSpec(lam=1.0)
        model = mode_model(ModeBasis(np.eye(8, dtype=complex)), finite_difference_laplacian(g), pair_matrix(g, spec))
        c0 = gaussian_orbital(g, 1.0, momentum=0.4)
        flow = OrbitalFlow(model, c0, 1.0)
        ref = lattice_hartree(g, spec, c0, [0.5, 1.0])
        assert np.max(np.abs(flow(0.5) - ref[0])) <= 1e-9
        assert np.max(np.abs(flow(1.0) - ref[1])) <= 1e-9

    def test_flow_coverage_and_normalization(self):
        model = model_for(1.0)
        flow = OrbitalFlow(model, start(4), 1.0)
        assert np.linalg.norm(flow(1.0)) == pytest.approx(1.0, abs=1e-10)
        with pytest.raises(CoverageError):
            flow(1.5)
        with pytest.raises(DomainError):
            OrbitalFlow(model, 2 * start(4), 1.0)


class TestGenerators:
    def test_noninteracting(self, free):
        g = free.at(0.3)
        assert np.max(np.abs(g.l3)) == 0 and np.max(np.abs(g.l4)) == 0
        K = second_quantize(free.space, free.model.kinetic).dense()
        assert np.max(np.abs(g.l2 - K)) <= 1e-14
        assert g.l0_phase == 0

    def test_hermitian(self, strong):
        g = strong.at(0.5)
        for A in (g.l2, g.l3, g.l4):
            assert np.max(np.abs(A - A.conj().T)) <= 1e-12

    def test_quartic_conserves_number(self, strong):
        Nop = number_op(strong.space).dense()
        L4 = strong.l4
        assert np.max(np.abs(L4 @ Nop - Nop @ L4)) <= 1e-12

    def test_quartic_time_independent(self, strong):
        assert strong.at(0.0).l4 is strong.at(0.9).l4

    def test_parity_structure(self, strong):
        g = strong.at(0.5)
        assert parity_commutator(strong.space, g.total("tilde")) <= 1e-12
        assert parity_commutator(strong.space, g.l3) > 1e-3

    def test_unnormalized_orbital(self, strong):
        with pytest.raises(DomainError, match="normalized"):
            build_generators(1.1 * start(4), strong.model, strong.space, 4)

    def test_shape_mismatch(self, strong):
        with pytest.raises(StructuralError):
            GeneratorFamily(strong.model, FockSpace(3, 4), 4, orbital0=start(4), horizon=1.0)

    def test_phase_integrand(self, strong):
        phi = strong.flow(0.2)
        g = strong.at(0.2)
        assert g.l0_phase == pytest.approx(0.5 * 4 * strong.model.interaction_density(phi), rel=1e-14)


class TestOmega:
    @staticmethod
    def brute_force(grid, spec, values):
        """Direct double sum over all site pairs with minimal-image distances."""
        x = np.stack(np.meshgrid(grid.axis, grid.axis, grid.axis, indexing="ij"), -1).reshape(-1, 3)
        d = x[:, None, :] - x[None, :, :]
        d -= grid.box_length * np.round(d / grid.box_length)
        r2 = np.sum(d**2, -1)
        eps = spec.mollification * grid.spacing
        V = spec.lam * np.exp(-spec.mu * np.sqrt(r2)) * (r2 + eps**2) ** (-spec.gamma / 2)
        rho = np.abs(values.ravel()) ** 2
        return float(rho @ V @ rho) * grid.measure**2

    def test_frozen_gaussian(self):
        g = Grid(3, 8, 8.0)
        spec = PotentialSpec(lam=0.8, mu=0.5, gamma=1.0)
        phi = gaussian(g, 1.0)
        integrand = interaction_integrand(phi, spec)
        oracle = self.brute_force(g, spec, phi.values)
        assert integrand == pytest.approx(oracle, abs=1e-8)
        times = np.linspace(0, 1, 11)
        omega = omega_phase((times, np.full(11, integrand)), 0.2, 0.9, 10)
        assert omega == pytest.approx(5 * 0.7 * oracle, abs=1e-8)

    def test_trivial_cases(self):
        g = Grid(3, 8, 8.0)
        assert interaction_integrand(gaussian(g, 1.0), PotentialSpec(lam=0.0)) == 0
        times = np.linspace(0, 1, 5)
        vals = np.linspace(1, 2, 5)
        assert omega_phase((times, vals), 0.5, 0.5, 7) == 0
        assert omega_phase((times, np.zeros(5)), 0.0, 1.0, 7) == 0

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_additive(self, s, r, t):
        times = np.linspace(0, 1, 21)
        vals = np.cos(3 * times) + 2
        src = (times, vals)
        lhs = omega_phase(src, s, t, 3)
        assert lhs == pytest.approx(omega_phase(src, r, t, 3) + omega_phase(src, s, r, 3), abs=1e-12)
        assert omega_phase(src, t, s, 3) == pytest.approx(-lhs, abs=1e-14)

    def test_from_record(self):
        g = Grid(3, 16, 16.0)
        spec = PotentialSpec(lam=0.5)
        rec = evolve(HartreeState(gaussian(g, 1.0)), spec, SolverConfig(dt=0.01, horizon=0.2, record_stride=5))
        direct = omega_phase((rec.times, 2 * rec.interaction), 0.0, 0.2, 4)
        assert omega_phase(rec, 0.0, 0.2, 4) == pytest.approx(direct, rel=1e-14)
        assert 2 * rec.interaction[0] == pytest.approx(interaction_integrand(gaussian(g, 1.0), spec), rel=1e-10)

    def test_coverage(self):
        with pytest.raises(CoverageError):
            omega_phase(([0.0, 1.0], [1.0, 1.0]), 0.0, 1.5, 2)


class TestPropagation:
    def test_vacuum_stays_vacuum_without_interaction(self, free):
        run = propagate("tilde", free, 0.05, 1.0)
        vac = free.space.vacuum().coefficients
        for s in run.states:
            assert np.max(np.abs(s.coefficients - vac)) <= 1e-14

    def test_norm_conserved(self, strong):
        run = propagate("full", strong, 1e-3, 1.0, record_every=100)
        assert run.norm_drift() <= 1e-8
        steps = np.abs(np.diff(run.norms))
        assert steps.max() <= 1e-10 * 100

    def test_dt_halving(self):
        model = model_for(1.0, count=2)
        fam = GeneratorFamily(model, FockSpace(2, 6), 4, orbital0=start(2), horizon=0.5)
        ref = propagate("full", fam, 0.05 / 8, 0.5).final.coefficients
        e1 = np.linalg.norm(propagate("full", fam, 0.05, 0.5).final.coefficients - ref)
        e2 = np.linalg.norm(propagate("full", fam, 0.025, 0.5).final.coefficients - ref)
        assert 3.0 <= e1 / e2 <= 5.0

    def test_generator_residual_second_order(self, strong):
        psi0 = propagate("full", strong, 0.01, 0.2).final.coefficients
        r1 = generator_residual(strong, "full", psi0, 0.2, 0.02)
        r2 = generator_residual(strong, "full", psi0, 0.2, 0.01)
        assert 3.0 <= r1 / r2 <= 5.0

    def test_truncation_abort(self, strong):
        with pytest.raises(TruncationError, match="cutoff"):
            propagate("full", strong, 0.01, 1.0, abort_top_mass=1e-8)

    def test_bad_variant(self, strong):
        with pytest.raises(DomainError):
            propagate("half", strong, 0.01, 0.1)

    def test_bounds_on_propagated_states(self, strong, rng):
        run = propagate("full", strong, 0.01, 0.5, record_every=10)
        J = rng.standard_normal((4, 4))
        J = J + J.T
        for s in run.states:
            assert min(ladder_bound_check(strong.space, [0.3, 0.1j, 0, 0.2], s).values()) >= -1e-12
            assert second_quantization_bound_check(strong.space, J, s) >= -1e-12


class TestParity:
    def test_tilde_preserves_parity(self, strong):
        # at this coupling the cutoff sector fills to ~1e-2 by t=1; parity is exact regardless
        report = parity_check(propagate("tilde", strong, 0.01, 1.0, abort_top_mass=0.05))
        assert report["odd_mass"][0] == 0
        assert report["max_odd_mass"] <= 1e-10
        assert report["max_field_expectation"] <= 1e-10

    def test_cubic_term_breaks_parity(self, strong):
        report = parity_check(propagate("full", strong, 0.01, 0.5))
        assert report["odd_mass"][-1] > 1e-4


class TestErrorTerms:
    @staticmethod
    def single_mode_family(N, lam=1.0):
        model = model_for(lam, count=1)
        space = FockSpace(1, displaced_number_state(N).space.cutoff)
        return GeneratorFamily(model, space, N, orbital0=start(1), horizon=1.0)

    def test_time_zero_sector_sum(self):
        N = 9
        fam = self.single_mode_family(N)
        xi = condensate_vector(fam.space, N)
        assert xi.safe
        vac = fam.space.vacuum()
        out = et_from_states(xi, vac, np.eye(1), start(1), N)
        n = fam.space.particle_numbers
        oracle_e1 = d_N(N) / N * np.sum(n * xi.coefficients.conj() * vac.coefficients)
        oracle_e2 = d_N(N) / math.sqrt(N) * xi.coefficients[1].conj()
        assert abs(out["e1"] - oracle_e1) <= 1e-8
        assert abs(out["e2"] - oracle_e2) <= 1e-8

    def test_zero_observable(self):
        fam = self.single_mode_family(4)
        out = et_estimates(fam, np.zeros((1, 1)), 0.2, 0.02)
        assert out["e1"] == 0 and out["e2"] == 0

    def test_noninteracting_tilde_field_term_vanishes(self):
        model = model_for(0.0, count=2)
        fam = GeneratorFamily(model, FockSpace(2, 12), 2, orbital0=start(2), horizon=1.0)
        J = np.array([[1.0, 0.3], [0.3, -0.5]])
        for t in (0.25, 0.5):
            assert abs(et_estimates(fam, J, t, 0.05, variant="tilde")["e2"]) <= 1e-12

    def test_unsafe_flagged(self):
        model = model_for(1.0, count=2)
        fam = GeneratorFamily(model, FockSpace(2, 4), 3, orbital0=start(2), horizon=1.0)
        out = et_estimates(fam, np.eye(2), 0.1, 0.05)
        assert out["safe"] is False

    def test_interacting_estimates_finite(self):
        fam = self.single_mode_family(4)
        out = et_estimates(fam, np.eye(1), 0.5, 0.05)
        assert out["safe"]
        assert np.isfinite(out["e1"]) and np.isfinite(out["e2"])
