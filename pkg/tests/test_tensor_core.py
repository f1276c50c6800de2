"""Tests for the tensor_core module."""

import numpy as np
import pytest

from elastomap.error_handling import DimensionMismatch, UnsupportedDimension, ZeroMacroStrain
from elastomap.tensor_core import (
    FullTensor4,
    IsoTensor4,
    ProjectorDims,
    SymTensor2,
    check_dim,
    field_invariants,
    iso_apply,
    iso_apply_field,
    iso_project,
    mandel_size,
    parallel_decompose,
    projector_j,
    projector_k,
    quad_dot,
    sph_dev_split,
    strain_invariants,
)


class TestMandelNotation:
    """Tests for Mandel storage of symmetric tensors."""

    def test_from_matrix_weights_off_diagonal(self):
        """Test that shear components carry the √2 factor."""
        eps = SymTensor2.from_matrix([[1.0, 2.0], [2.0, 3.0]])
        np.testing.assert_allclose(eps.comps, [1.0, 3.0, 2.0 * np.sqrt(2.0)])

    def test_matrix_round_trip_3d(self):
        """Test that to_matrix inverts from_matrix."""
        mat = np.array([[1.0, 0.2, -0.3], [0.2, 2.0, 0.5], [-0.3, 0.5, -1.0]])
        np.testing.assert_allclose(SymTensor2.from_matrix(mat).to_matrix(), mat, atol=1e-15)

    def test_ddot_matches_full_contraction(self):
        """Test that the Mandel dot product is the double contraction."""
        a = np.array([[1.0, 0.4, 0.0], [0.4, -2.0, 0.7], [0.0, 0.7, 0.5]])
        b = np.array([[0.3, -1.0, 0.2], [-1.0, 1.5, 0.1], [0.2, 0.1, 2.0]])
        result = SymTensor2.from_matrix(a).ddot(SymTensor2.from_matrix(b))
        assert result == pytest.approx(float(np.sum(a * b)), abs=1e-14)

    def test_sizes(self):
        """Test Mandel sizes and projector ranks."""
        assert mandel_size(2) == 3
        assert mandel_size(3) == 6
        assert ProjectorDims.for_dim(2) == ProjectorDims(n_i=3, n_j=1, n_k=2)
        assert ProjectorDims.for_dim(3) == ProjectorDims(n_i=6, n_j=1, n_k=5)

    def test_unsupported_dimension(self):
        """Test that only 2D and 3D are accepted."""
        with pytest.raises(UnsupportedDimension):
            check_dim(4)
        with pytest.raises(UnsupportedDimension):
            SymTensor2.identity(1)

    def test_component_count_mismatch(self):
        """Test that a wrong component count is rejected."""
        with pytest.raises(DimensionMismatch):
            SymTensor2(2, np.zeros(6))

    def test_asymmetric_matrix_rejected(self):
        """Test that non-symmetric matrices are rejected."""
        with pytest.raises(DimensionMismatch):
            SymTensor2.from_matrix([[1.0, 2.0], [0.0, 1.0]])

    def test_symmetric_identity_from_index_form(self):
        """Test that the symmetric fourth-order identity maps to the Mandel identity."""
        for dim in (2, 3):
            delta = np.eye(dim)
            ident = 0.5 * (
                np.einsum("ik,jl->ijkl", delta, delta) + np.einsum("il,jk->ijkl", delta, delta)
            )
            full = FullTensor4.from_index_form(ident)
            np.testing.assert_allclose(full.mandel, np.eye(mandel_size(dim)), atol=1e-15)
            np.testing.assert_allclose(full.to_index_form(), ident, atol=1e-15)


class TestProjectors:
    """Tests for the spherical and deviatoric projectors."""

    @pytest.mark.parametrize("dim", [2, 3])
    def test_projector_algebra(self, dim):
        """Test idempotence, orthogonality and completeness."""
        pj, pk = projector_j(dim), projector_k(dim)
        np.testing.assert_allclose(pj @ pj, pj, atol=1e-15)
        np.testing.assert_allclose(pk @ pk, pk, atol=1e-15)
        np.testing.assert_allclose(pj @ pk, 0.0, atol=1e-15)
        np.testing.assert_allclose(pj + pk, np.eye(mandel_size(dim)), atol=1e-15)

    @pytest.mark.parametrize("dim", [2, 3])
    def test_projector_traces(self, dim):
        """Test J::J = n_J and K::K = n_K."""
        dims = ProjectorDims.for_dim(dim)
        assert quad_dot(projector_j(dim), projector_j(dim)) == pytest.approx(dims.n_j, abs=1e-14)
        assert quad_dot(projector_k(dim), projector_k(dim)) == pytest.approx(dims.n_k, abs=1e-14)

    def test_projectors_are_read_only(self):
        """Test that cached projectors cannot be modified in place."""
        with pytest.raises(ValueError):
            projector_j(2)[0, 0] = 5.0


class TestIsotropicTensors:
    """Tests for IsoTensor4 and isotropic projection."""

    def test_iso_project_of_isotropic_tensor(self):
        """Test that a·J + b·K projects back to (a, b) with a zero remainder."""
        iso, remainder = iso_project(IsoTensor4(3, 3.0, 5.0).to_full())
        assert iso.a == pytest.approx(3.0, abs=1e-14)
        assert iso.b == pytest.approx(5.0, abs=1e-14)
        assert remainder.norm() < 1e-14

    def test_iso_project_remainder_is_orthogonal(self):
        """Test that the remainder has vanishing J and K projections."""
        rng = np.random.default_rng(0)
        mat = rng.standard_normal((6, 6))
        _, remainder = iso_project(FullTensor4(3, mat + mat.T))
        assert quad_dot(remainder.mandel, projector_j(3)) == pytest.approx(0.0, abs=1e-13)
        assert quad_dot(remainder.mandel, projector_k(3)) == pytest.approx(0.0, abs=1e-13)

    def test_compose_is_componentwise(self):
        """Test (a1 J + b1 K):(a2 J + b2 K) = a1a2 J + b1b2 K."""
        product = IsoTensor4(2, 2.0, 3.0) @ IsoTensor4(2, 0.5, 4.0)
        assert (product.a, product.b) == (1.0, 12.0)
        np.testing.assert_allclose(
            product.to_full().mandel,
            IsoTensor4(2, 2.0, 3.0).to_full().mandel @ IsoTensor4(2, 0.5, 4.0).to_full().mandel,
            atol=1e-14,
        )

    def test_stiffness(self):
        """Test L = dκJ + 2μK."""
        stiff = IsoTensor4.stiffness(3, 2.0, 0.5)
        assert (stiff.a, stiff.b) == (6.0, 1.0)

    def test_iso_apply_matches_full_tensor(self):
        """Test that iso_apply agrees with the Mandel matrix product."""
        tau = SymTensor2.from_matrix([[1.0, 0.3, 0.0], [0.3, -0.5, 0.2], [0.0, 0.2, 2.0]])
        iso = IsoTensor4(3, 1.7, -0.4)
        np.testing.assert_allclose(iso_apply(iso, tau).comps, iso.to_full().apply(tau).comps, atol=1e-14)

    def test_iso_apply_field(self):
        """Test pointwise application with per-point coefficients."""
        tau = SymTensor2.from_matrix([[1.0, 0.5], [0.5, 2.0]])
        values = np.broadcast_to(tau.comps, (4, 3)).copy()
        a = np.array([1.0, 2.0, 3.0, 4.0])
        out = iso_apply_field(a, 0.5, values, 2)
        for i in range(4):
            np.testing.assert_allclose(out[i], iso_apply(IsoTensor4(2, a[i], 0.5), tau).comps, atol=1e-14)


class TestInvariants:
    """Tests for strain invariants and decompositions."""

    def test_sph_dev_split(self):
        """Test that the deviatoric part is traceless and the parts sum to τ."""
        tau = SymTensor2.from_matrix([[2.0, 1.0], [1.0, 4.0]])
        sph, dev = sph_dev_split(tau)
        assert dev.trace == pytest.approx(0.0, abs=1e-15)
        np.testing.assert_allclose((sph + dev).comps, tau.comps)
        np.testing.assert_allclose(sph.comps, [3.0, 3.0, 0.0])

    def test_strain_invariants_pure_shear(self):
        """Test ε0 and ε_eq for diag(1, −1) in 2D."""
        eps0, eps_eq = strain_invariants(SymTensor2.from_matrix([[1.0, 0.0], [0.0, -1.0]]))
        assert eps0 == pytest.approx(0.0)
        assert eps_eq == pytest.approx(1.0)

    def test_strain_invariants_identity(self):
        """Test ε0 = 1 and ε_eq = 0 for the identity."""
        eps0, eps_eq = strain_invariants(SymTensor2.identity(3))
        assert eps0 == pytest.approx(1.0)
        assert eps_eq == pytest.approx(0.0, abs=1e-15)

    def test_field_invariants_match_pointwise(self):
        """Test that the field version agrees with strain_invariants."""
        eps = SymTensor2.from_matrix([[0.3, 0.1, 0.0], [0.1, -0.2, 0.4], [0.0, 0.4, 0.7]])
        eps0, eps_eq = field_invariants(np.stack([eps.comps] * 3), 3)
        expected = strain_invariants(eps)
        np.testing.assert_allclose(eps0, expected[0])
        np.testing.assert_allclose(eps_eq, expected[1])

    def test_parallel_decompose(self):
        """Test ε_par and ε_perp for a multiple of the load plus an orthogonal part."""
        eps_bar = SymTensor2.identity(2)
        shear = SymTensor2.from_matrix([[0.0, 1.0], [1.0, 0.0]])
        eps_par, eps_perp = parallel_decompose(eps_bar * 2.0 + shear * 0.5, eps_bar)
        assert eps_par == pytest.approx(2.0 * np.sqrt(2.0))
        assert eps_perp == pytest.approx(0.5 * shear.norm())

    def test_parallel_decompose_zero_load(self):
        """Test that a zero macroscopic strain is rejected."""
        with pytest.raises(ZeroMacroStrain):
            parallel_decompose(SymTensor2.identity(2), SymTensor2.zeros(2))
