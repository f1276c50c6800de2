"""Tests for the reconstruction module."""

import numpy as np
import pytest

from elastomap.error_handling import (
    DimensionMismatch,
    GridMismatch,
    IncompleteBasis,
    InputError,
    InvalidContrast,
    MixedMacroStrain,
    ZeroMacroStrain,
)
from elastomap.fem import FEMSolver, element_moduli
from elastomap.fields import BoundedGrid, PeriodicGrid, ScalarField, TensorField
from elastomap.green import ReferenceMedium
from elastomap.microstructure import gen_inclusion, gen_smooth_aniso, gen_voronoi
from elastomap.oracles import eshelby_interior
from elastomap.reconstruction import (
    Anchoring,
    ExperimentSet,
    LoadBasis,
    ModulusKind,
    Projector,
    ReconMethod,
    anchor_mean,
    error_map,
    estimate_reference,
    make_load_basis,
    reconstruct_bounded,
    reconstruct_bulk,
    reconstruct_bulk_iso,
    reconstruct_shear,
    reconstruct_shear_iso,
    strain_diagnostics,
    window_masks,
)
from elastomap.spectral import first_order_strain, solve_ls
from elastomap.tensor_core import SymTensor2

GRID = PeriodicGrid((8, 8))


def _uniform_set(projector, factor, ref, grid=GRID, count=None):
    """Experiment set whose fields are factor·ε̄⁽ⁱ⁾ for every load."""
    basis = make_load_basis(projector, ref.dim)
    loads = basis.strains[:count] if count else basis.strains
    return ExperimentSet(basis, [TensorField.uniform(grid, load * factor) for load in loads], ref)


def _first_order_sets(maps, ref=None):
    """J and K experiment sets built from first-order strains."""
    ref = ref or ReferenceMedium.from_fields(maps.kappa.values, maps.mu.values, 2)
    sets = {}
    for projector in Projector:
        basis = make_load_basis(projector, 2)
        fields = [first_order_strain(maps.kappa, maps.mu, load, ref) for load in basis.strains]
        sets[projector] = ExperimentSet(basis, fields, ref)
    return sets


class TestLoadBasis:
    """Tests for the canonical load sets."""

    @pytest.mark.parametrize("projector,dim,size", [("J", 2, 1), ("K", 2, 2), ("J", 3, 1), ("K", 3, 5)])
    def test_assembly(self, projector, dim, size):
        """Test that the normalized outer products sum to the projector."""
        basis = make_load_basis(projector, dim)
        assert len(basis) == size
        assert basis.assembly_error() <= 1e-14

    def test_load_outside_projector_range(self):
        """Test that a spherical load cannot enter a deviatoric basis."""
        with pytest.raises(InputError):
            LoadBasis(Projector.K, 2, (SymTensor2.identity(2),))

    def test_missing_load_fails_check(self):
        """Test that a partial deviatoric set is an incomplete basis."""
        partial = LoadBasis(Projector.K, 3, make_load_basis(Projector.K, 3).strains[:4])
        with pytest.raises(IncompleteBasis):
            partial.check()

    def test_zero_load(self):
        """Test that a zero load is rejected."""
        with pytest.raises(ZeroMacroStrain):
            LoadBasis(Projector.J, 2, (SymTensor2.zeros(2),))


class TestExperimentSet:
    """Tests for experiment-set validation."""

    def test_too_many_fields(self, unit_ref2d):
        """Test that more fields than loads is an error."""
        basis = make_load_basis(Projector.J, 2)
        fields = [TensorField.uniform(GRID, SymTensor2.identity(2))] * 2
        with pytest.raises(DimensionMismatch):
            ExperimentSet(basis, fields, unit_ref2d)

    def test_empty(self, unit_ref2d):
        """Test that an empty set is an incomplete basis."""
        with pytest.raises(IncompleteBasis):
            ExperimentSet(make_load_basis(Projector.J, 2), [], unit_ref2d)

    def test_grid_mismatch(self, unit_ref2d):
        """Test that fields on different grids are rejected."""
        basis = make_load_basis(Projector.K, 2)
        fields = [TensorField.uniform(GRID, load) for load in basis.strains]
        fields[1] = TensorField.uniform(PeriodicGrid((4, 4)), basis.strains[1])
        with pytest.raises(GridMismatch):
            ExperimentSet(basis, fields, unit_ref2d)

    def test_reference_dimension(self, unit_ref3d):
        """Test that a 3D reference medium cannot pair with 2D fields."""
        basis = make_load_basis(Projector.J, 2)
        with pytest.raises(DimensionMismatch):
            ExperimentSet(basis, [TensorField.uniform(GRID, SymTensor2.identity(2))], unit_ref3d)


class TestGenericReconstruction:
    """Tests for the local bulk and shear identities."""

    def test_bulk_example(self, unit_ref2d):
        """Test ε0/ε̄0 = 0.98 → κ = 1.04 in the unit 2D medium."""
        result = reconstruct_bulk(_uniform_set(Projector.J, 0.98, unit_ref2d))
        np.testing.assert_allclose(result.modulus_map.values, 1.04, rtol=1e-13)
        assert result.kind is ModulusKind.BULK
        assert result.method is ReconMethod.GENERIC
        assert result.modulus_map.metadata["anchoring"] == "implicit"

    def test_bulk_forms_agree(self, smooth_maps):
        """Test that the hydrostatic and trace forms coincide."""
        sets = _first_order_sets(smooth_maps)
        hydrostatic = reconstruct_bulk(sets[Projector.J]).modulus_map.values
        trace = reconstruct_bulk(sets[Projector.J], form="trace").modulus_map.values
        np.testing.assert_allclose(hydrostatic, trace, rtol=0.0, atol=1e-13)

    def test_shear_example(self, unit_ref2d):
        """Test both projection ratios 0.99 → μ = 1.013333 in the unit 2D medium."""
        result = reconstruct_shear(_uniform_set(Projector.K, 0.99, unit_ref2d))
        np.testing.assert_allclose(result.modulus_map.values, 1.0 + 0.02 * 2.0 / 3.0, rtol=1e-13)

    def test_single_load_example(self, unit_ref2d):
        """Test that one deviatoric load is weighted by n_K."""
        result = reconstruct_shear(_uniform_set(Projector.K, 0.99, unit_ref2d), single_load=1)
        np.testing.assert_allclose(result.modulus_map.values, 1.0 + 0.02 * 2.0 / 3.0, rtol=1e-13)
        assert result.method is ReconMethod.GENERIC_SINGLE

    def test_zero_contrast(self, unit_ref3d):
        """Test that ε ≡ ε̄ returns the reference moduli."""
        grid = PeriodicGrid((4, 4, 4))
        kappa = reconstruct_bulk(_uniform_set(Projector.J, 1.0, unit_ref3d, grid)).modulus_map
        mu = reconstruct_shear(_uniform_set(Projector.K, 1.0, unit_ref3d, grid)).modulus_map
        np.testing.assert_allclose(kappa.values, 1.0, rtol=0.0, atol=1e-14)
        np.testing.assert_allclose(mu.values, 1.0, rtol=0.0, atol=1e-14)

    def test_first_order_data_is_inverted_exactly(self, smooth_maps):
        """Test that first-order strains give back the generating moduli."""
        sets = _first_order_sets(smooth_maps)
        kappa = reconstruct_bulk(sets[Projector.J]).modulus_map.values
        mu = reconstruct_shear(sets[Projector.K]).modulus_map.values
        np.testing.assert_allclose(kappa, smooth_maps.kappa.values, rtol=0.0, atol=1e-10)
        np.testing.assert_allclose(mu, smooth_maps.mu.values, rtol=0.0, atol=1e-10)

    def test_incomplete_shear_set(self, unit_ref2d):
        """Test that the full shear identity needs every deviatoric load."""
        exp = _uniform_set(Projector.K, 0.99, unit_ref2d, count=1)
        with pytest.raises(IncompleteBasis):
            reconstruct_shear(exp)
        assert reconstruct_shear(exp, single_load=0).modulus_map.values.shape == GRID.shape
        with pytest.raises(IncompleteBasis):
            reconstruct_shear(exp, single_load=1)

    def test_wrong_basis(self, unit_ref2d):
        """Test that the bulk identity refuses a deviatoric experiment."""
        with pytest.raises(InputError):
            reconstruct_bulk(_uniform_set(Projector.K, 1.0, unit_ref2d))

    def test_unknown_form(self, unit_ref2d):
        """Test that unknown formula variants are rejected."""
        with pytest.raises(InputError):
            reconstruct_shear(_uniform_set(Projector.K, 1.0, unit_ref2d), form="median")

    def test_shear_forms_differ_at_second_order(self):
        """Test that the equivalent-strain form departs from the projection form like c²."""
        gaps = []
        for c in (1e-2, 1e-3):
            sets = _first_order_sets(gen_smooth_aniso(PeriodicGrid((32, 32)), c, seed=13))
            projection = reconstruct_shear(sets[Projector.K]).modulus_map.values
            equivalent = reconstruct_shear(sets[Projector.K], form="equivalent").modulus_map.values
            gaps.append(float(np.abs(projection - equivalent).max()))
        assert 50.0 <= gaps[0] / gaps[1] <= 200.0

    def test_scale_consistency(self, smooth_maps):
        """Test that scaling the reference medium scales the perturbations."""
        sets = _first_order_sets(smooth_maps)
        base_ref = sets[Projector.J].ref
        scaled_ref = base_ref.scaled(2.5)
        base = reconstruct_bulk(sets[Projector.J]).modulus_map.values
        exp = sets[Projector.J]
        scaled = reconstruct_bulk(ExperimentSet(exp.basis, exp.strain_fields, scaled_ref)).modulus_map.values
        np.testing.assert_allclose(
            scaled - scaled_ref.kappa0, 2.5 * (base - base_ref.kappa0), rtol=0.0, atol=1e-12
        )

    @pytest.mark.slow
    def test_error_scales_with_contrast(self):
        """Test that the c-normalized sup error of κ⁽¹⁾ grows linearly with c."""
        grid = PeriodicGrid((32, 32))
        ref = ReferenceMedium(2, 1.0, 1.0)
        contrasts = np.array([1e-3, 1e-2, 1e-1])
        errors = []
        for c in contrasts:
            maps = gen_smooth_aniso(grid, float(c), seed=31)
            strain, _ = solve_ls(maps.kappa, maps.mu, SymTensor2.identity(2), ref, tol=1e-13)
            exp = ExperimentSet(make_load_basis(Projector.J, 2), [strain], ref)
            _, stats = error_map(maps.kappa, reconstruct_bulk(exp), float(c))
            errors.append(stats.sup)
        slope = np.polyfit(np.log(contrasts), np.log(errors), 1)[0]
        assert 0.7 <= slope <= 1.3


class TestIsotropicReconstruction:
    """Tests for the invariant-based identities."""

    def test_bulk_example(self, unit_ref2d):
        """Test ε0²/ε̄0² = 0.96 → κ = 1.04 (coefficient 1 in the unit 2D medium)."""
        load = SymTensor2.identity(2)
        strain = TensorField.uniform(GRID, load * np.sqrt(0.96))
        result = reconstruct_bulk_iso(strain, load, unit_ref2d)
        np.testing.assert_allclose(result.modulus_map.values, 1.04, rtol=1e-13)
        assert result.method is ReconMethod.ISOTROPIC

    def test_shear_example(self, unit_ref2d):
        """Test ε_eq²/ε̄_eq² = 0.97 → μ = 1.02 (coefficient 2/3 in the unit 2D medium)."""
        load = SymTensor2.from_matrix([[0.0, 1.0], [1.0, 0.0]])
        strain = TensorField.uniform(GRID, load * np.sqrt(0.97))
        result = reconstruct_shear_iso(strain, load, unit_ref2d)
        np.testing.assert_allclose(result.modulus_map.values, 1.02, rtol=1e-13)

    def test_mixed_load(self, unit_ref2d):
        """Test that loads with both parts are rejected."""
        load = SymTensor2.from_matrix([[1.0, 0.0], [0.0, 0.0]])
        strain = TensorField.uniform(GRID, load)
        with pytest.raises(MixedMacroStrain):
            reconstruct_bulk_iso(strain, load, unit_ref2d)
        with pytest.raises(MixedMacroStrain):
            reconstruct_shear_iso(strain, load, unit_ref2d)

    def test_zero_load(self, unit_ref2d):
        """Test that a zero load is rejected."""
        strain = TensorField.uniform(GRID, SymTensor2.zeros(2))
        with pytest.raises(ZeroMacroStrain):
            reconstruct_bulk_iso(strain, SymTensor2.zeros(2), unit_ref2d)

    def test_bulk_departs_from_generic_at_second_order(self):
        """Test that the invariant form differs from the generic one like c²."""
        gaps = []
        for c in (1e-2, 1e-3):
            maps = gen_smooth_aniso(PeriodicGrid((32, 32)), c, seed=13)
            exp = _first_order_sets(maps)[Projector.J]
            strain, load = exp.pairs()[0]
            generic = reconstruct_bulk(exp).modulus_map.values
            iso = reconstruct_bulk_iso(strain, load, exp.ref).modulus_map.values
            gaps.append(float(np.abs(generic - iso).max()))
        assert 50.0 <= gaps[0] / gaps[1] <= 200.0


class TestBoundedReconstruction:
    """Tests for the bounded-domain particular solution and its anchoring."""

    @pytest.fixture
    def fem_sets(self):
        """Experiment sets from bilinear FEM solves on a Voronoi medium."""
        grid = BoundedGrid(17, 17)
        maps = gen_voronoi(grid, 6, 1e-2, seed=5)
        solver = FEMSolver(grid, element_moduli(maps.kappa.values), element_moduli(maps.mu.values))
        ref = ReferenceMedium(2, 1.0, 1.0)
        sets = {}
        for projector in Projector:
            basis = make_load_basis(projector, 2)
            fields = [solver.solve(load)[1] for load in basis.strains]
            sets[projector] = ExperimentSet(basis, fields, ref)
        return sets

    def test_matches_generic_on_periodic_data(self, smooth_maps):
        """Test that without anchoring the bounded identity equals the generic one."""
        sets = _first_order_sets(smooth_maps)
        bounded = reconstruct_bounded(sets[Projector.J], anchoring="none").modulus_map.values
        np.testing.assert_allclose(bounded, reconstruct_bulk(sets[Projector.J]).modulus_map.values, atol=1e-12)
        bounded = reconstruct_bounded(sets[Projector.K], anchoring="none").modulus_map.values
        np.testing.assert_allclose(bounded, reconstruct_shear(sets[Projector.K]).modulus_map.values, atol=1e-12)

    def test_mean_anchoring(self, fem_sets):
        """Test that mean anchoring fixes the spatial mean and only shifts the map."""
        for projector, nominal in ((Projector.J, 1.0), (Projector.K, 1.0)):
            anchored = reconstruct_bounded(fem_sets[projector])
            free = reconstruct_bounded(fem_sets[projector], anchoring=Anchoring.NONE)
            assert anchored.modulus_map.mean() == pytest.approx(nominal, abs=1e-12)
            shift = anchored.modulus_map.values - free.modulus_map.values
            np.testing.assert_allclose(shift, shift.flat[0], atol=1e-12)
            assert anchored.anchoring is Anchoring.MEAN
            assert free.modulus_map.metadata["anchoring"] == "none"
            assert anchored.method is ReconMethod.BOUNDED

    def test_incomplete_shear_set(self, fem_sets):
        """Test that a partial deviatoric set is refused."""
        exp = fem_sets[Projector.K]
        partial = ExperimentSet(exp.basis, exp.strain_fields[:1], exp.ref)
        with pytest.raises(IncompleteBasis):
            reconstruct_bounded(partial)

    @pytest.mark.slow
    def test_errors_localise_at_the_boundary(self):
        """Test that bounded errors concentrate near ∂V and that the full set beats one load."""
        grid = BoundedGrid(128, 128)
        c = 1e-2
        maps = gen_voronoi(grid, 30, c, seed=17)
        solver = FEMSolver(grid, element_moduli(maps.kappa.values), element_moduli(maps.mu.values), tol=1e-10)
        ref = ReferenceMedium(2, 1.0, 1.0)
        sets = {}
        for projector in Projector:
            basis = make_load_basis(projector, 2)
            sets[projector] = ExperimentSet(basis, [solver.solve(load)[1] for load in basis.strains], ref)

        for projector, truth in ((Projector.J, maps.kappa), (Projector.K, maps.mu)):
            _, stats = error_map(truth, reconstruct_bounded(sets[projector]), c, interior_fraction=0.5, band=0.05)
            assert stats.interior_median <= 0.5 * stats.boundary_median

        single = anchor_mean(reconstruct_shear(sets[Projector.K], single_load=0), ref.mu0)
        _, single_stats = error_map(maps.mu, single, c)
        _, full_stats = error_map(maps.mu, reconstruct_bounded(sets[Projector.K]), c)
        assert single_stats.sup > full_stats.sup


class TestDiluteInclusion:
    """Tests against the uniform interior strain of a small isolated disk."""

    @pytest.fixture(
        scope="class",
        params=[(Projector.J, (1.01, 1.0)), (Projector.K, (1.0, 1.01))],
        ids=["bulk", "shear"],
    )
    def disk(self, request):
        """Spectral strain fields for a disk of radius 0.05 at 1% contrast in one modulus."""
        projector, inclusion = request.param
        maps = gen_inclusion(PeriodicGrid((256, 256)), 0.05, inclusion=inclusion)
        ref = ReferenceMedium(2, 1.0, 1.0)
        basis = make_load_basis(projector, 2)
        fields = [solve_ls(maps.kappa, maps.mu, load, ref, tol=1e-10)[0] for load in basis.strains]
        return ExperimentSet(basis, fields, ref), inclusion, maps.labels.astype(bool)

    @pytest.mark.slow
    def test_interior_strain(self, disk):
        """Test that the mean strain in the disk is within 5% of the predicted perturbation."""
        exp, inclusion, inside = disk
        assert inside.mean() <= 0.01
        for strain, load in exp.pairs():
            expected = eshelby_interior(exp.ref, *inclusion, load)
            measured = strain.values[inside].mean(axis=0)
            perturbation = np.linalg.norm(expected.comps - load.comps)
            assert np.linalg.norm(measured - expected.comps) <= 0.05 * perturbation

    @pytest.mark.slow
    def test_reconstructed_inclusion_modulus(self, disk):
        """Test that the reconstructed modulus inside the disk is within 5% of the contrast."""
        exp, inclusion, inside = disk
        if exp.basis.projector is Projector.J:
            recovered, target = reconstruct_bulk(exp), inclusion[0]
        else:
            recovered, target = reconstruct_shear(exp), inclusion[1]
        assert recovered.modulus_map.values[inside].mean() == pytest.approx(target, abs=0.05 * 0.01)


class TestErrorMaps:
    """Tests for normalized error maps and their statistics."""

    def test_identical_maps(self):
        """Test that identical maps have zero error."""
        field = ScalarField.constant(GRID, 1.2)
        errors, stats = error_map(field, field, 0.1)
        assert not np.any(errors.values)
        assert stats.sup == 0.0

    def test_constant_offset(self):
        """Test |δ|/c for a constant offset δ."""
        errors, stats = error_map(ScalarField.constant(GRID, 1.0), ScalarField.constant(GRID, 1.01), 0.1)
        np.testing.assert_allclose(errors.values, 0.1, rtol=1e-12)
        assert stats.median == pytest.approx(0.1, rel=1e-12)

    def test_boundary_statistics(self):
        """Test that errors confined to the boundary ring show up in the band only."""
        grid = BoundedGrid(9, 9)
        recon = ScalarField(grid, 0.5 * grid.boundary_mask())
        _, stats = error_map(ScalarField.constant(grid, 0.0), recon, 0.5)
        assert stats.boundary_median == 1.0
        assert stats.interior_median == 0.0
        assert stats.interior_sup == 0.0
        assert stats.sup == 1.0

    def test_window_masks_are_not_empty(self):
        """Test that tiny fractions still select grid points."""
        interior, boundary = window_masks(PeriodicGrid((8, 8)), 0.0, 0.0)
        assert interior.any()
        assert boundary.any()

    def test_invalid_contrast(self):
        """Test that c = 0 cannot normalize an error map."""
        field = ScalarField.constant(GRID, 1.0)
        with pytest.raises(InvalidContrast):
            error_map(field, field, 0.0)

    def test_grid_mismatch(self):
        """Test that maps on different grids are rejected."""
        with pytest.raises(GridMismatch):
            error_map(ScalarField.constant(GRID, 1.0), ScalarField.constant(PeriodicGrid((4, 4)), 1.0), 0.1)


class TestReferenceEstimation:
    """Tests for estimating (κ0, μ0) from the data."""

    def test_periodic_data_reproduces_guess(self, smooth_maps):
        """Test that zero-mean fluctuations leave the guess unchanged."""
        sets = _first_order_sets(smooth_maps)
        for guess in (None, ReferenceMedium(2, 2.0, 3.0)):
            estimate = estimate_reference(sets[Projector.J], sets[Projector.K], guess)
            expected = guess or ReferenceMedium(2, 1.0, 1.0)
            assert estimate.kappa0 == pytest.approx(expected.kappa0, abs=1e-12)
            assert estimate.mu0 == pytest.approx(expected.mu0, abs=1e-12)


class TestStrainDiagnostics:
    """Tests for pointwise strain invariants."""

    def test_uniform_field(self):
        """Test ε_par = ‖ε̄‖ and ε_perp = 0 for ε ≡ ε̄."""
        load = SymTensor2.identity(2)
        diag = strain_diagnostics(TensorField.uniform(GRID, load), load)
        np.testing.assert_allclose(diag.eps_par, np.sqrt(2.0))
        np.testing.assert_allclose(diag.eps_perp, 0.0, atol=1e-15)
        np.testing.assert_allclose(diag.eps0, 1.0)

    def test_orthogonal_part_is_first_order(self):
        """Test that ε_perp under a spherical load is linear in c."""
        perps = []
        for c in (1e-2, 1e-3):
            maps = gen_smooth_aniso(PeriodicGrid((32, 32)), c, seed=13)
            strain, load = _first_order_sets(maps)[Projector.J].pairs()[0]
            perps.append(float(strain_diagnostics(strain, load).eps_perp.max()))
        assert perps[0] / perps[1] == pytest.approx(10.0, rel=1e-6)

    def test_zero_load(self):
        """Test that ε̄ = 0 is rejected."""
        with pytest.raises(ZeroMacroStrain):
            strain_diagnostics(TensorField.uniform(GRID, SymTensor2.identity(2)), SymTensor2.zeros(2))
