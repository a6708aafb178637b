mod common;

use common::{direct_quadrature, disk_robin_eigenvalue, random_permutation, random_vector, rng};
use fbms_core::exemplars::ExemplarSurface;
use fbms_core::jacobi::*;
use fbms_core::linalg::{dense_generalized, shift_invert_lowest, KrylovOptions};
use nalgebra::{DMatrix, Rotation3, Unit, Vector3};
use proptest::prelude::*;
use std::f64::consts::PI;

#[test]
fn assembly_matches_direct_quadrature_on_random_fields() {
    let e = ExemplarSurface::<f64>::critical_catenoid();
    let s = e.sample_mesh(16).unwrap();
    let robin = robin_coefficients(&s.mesh, &s.fields, e.domain()).unwrap();
    let asm = assemble(&s.mesh, &s.fields.a_squared, &robin).unwrap();
    let mut r = rng(11);
    for _ in 0..20 {
        let phi = random_vector(s.mesh.n_vertices(), &mut r);
        let q = asm.quadratic_form(&phi);
        let oracle = direct_quadrature(&s.mesh, &s.fields.a_squared, &robin, &phi);
        assert!((q - oracle).abs() <= 1e-12 * oracle.abs(), "{q} vs {oracle}");
    }
}

#[test]
fn catenoid_constant_function_matches_curvature_integrals() {
    // Q(1, 1) = −∫|A|² dμ − ∫ II(N, N) dσ; on the unit sphere II(N, N) = 1,
    // and the continuum value is −8π tanh t₀ − 4π c cosh t₀ = −12π / t₀
    let e = ExemplarSurface::<f64>::critical_catenoid();
    let exact = -12.0 * PI / e.t0();
    let mut previous = f64::INFINITY;
    for res in [16, 32, 64] {
        let s = e.sample_mesh(res).unwrap();
        let asm = assemble_surface(&s.mesh, &s.fields, e.domain()).unwrap();
        let one = nalgebra::DVector::from_element(s.mesh.n_vertices(), 1.0);
        let q = asm.quadratic_form(&one);
        // the same integrals on the mesh: triangle means of |A|² and boundary length
        let interior: f64 = (0..s.mesh.n_triangles())
            .map(|t| {
                let tri = s.mesh.triangles()[t];
                s.mesh.triangle_area(t) * tri.iter().map(|&v| s.fields.a_squared[v]).sum::<f64>() / 3.0
            })
            .sum();
        let perimeter: f64 = (0..s.mesh.boundary_loops().len()).map(|l| s.mesh.loop_length(l)).sum();
        assert!((q + interior + perimeter).abs() < 1e-10 * q.abs());
        let err = (q - exact).abs() / exact.abs();
        assert!(err < previous, "res {res}: {err}");
        previous = err;
    }
    assert!(previous < 2e-3, "{previous}");
}

#[test]
fn disk_first_eigenvalue_converges_monotonically() {
    let e = ExemplarSurface::<f64>::equatorial_disk();
    let exact = disk_robin_eigenvalue();
    // k = 1.60828, the root of k I₁(k) = I₀(k)
    assert!((exact + 2.586563).abs() < 1e-6, "{exact}");
    let mut previous = f64::INFINITY;
    for res in [8, 16, 32, 64] {
        let s = e.sample_mesh(res).unwrap();
        let asm = assemble_surface(&s.mesh, &s.fields, e.domain()).unwrap();
        let spec = solve_spectrum(&asm, 4, SolverMode::Dense).unwrap();
        assert_eq!(spec.negative_count, 1);
        let err = (spec.eigenvalues[0] - exact).abs();
        assert!(err < previous, "res {res}: {} vs {exact}", spec.eigenvalues[0]);
        previous = err;
    }
    assert!(previous < 1e-2 * exact.abs());
}

#[test]
fn iterative_matches_dense_on_coarse_catenoid() {
    let e = ExemplarSurface::<f64>::critical_catenoid();
    let s = e.sample_mesh(16).unwrap();
    let asm = assemble_surface(&s.mesh, &s.fields, e.domain()).unwrap();
    let a = asm.index_form();
    let dense = dense_generalized(&a.to_dense(), &asm.mass.to_dense(), 10).unwrap();
    let (iter, diag) = shift_invert_lowest(&a, &asm.mass, 10, &KrylovOptions::default()).unwrap();
    assert!(diag.max_residual < 1e-8);
    for (d, i) in dense.values.iter().zip(&iter.values) {
        assert!((d - i).abs() <= 1e-8 * d.abs(), "{d} vs {i}");
    }
}

#[test]
fn deflated_minimum_is_stable_under_perturbation() {
    let e = ExemplarSurface::<f64>::equatorial_disk();
    let s = e.sample_mesh(12).unwrap();
    let asm = assemble_surface(&s.mesh, &s.fields, e.domain()).unwrap();
    let spec = solve_spectrum(&asm, 4, SolverMode::Dense).unwrap();
    let block = spec.eigenvectors.columns(0, 1).into_owned();
    let exact = rayleigh_min_orthogonal_to(&asm, &block).unwrap();
    let mut r = rng(3);
    let noise = DMatrix::from_fn(block.nrows(), 1, |_, _| rand::Rng::gen_range(&mut r, -1.0..1.0));
    let perturbed = rayleigh_min_orthogonal_to(&asm, &(block + noise * 1e-12)).unwrap();
    assert!((exact - spec.eigenvalues[1]).abs() < 1e-8 * spec.eigenvalues[1].abs());
    assert!((perturbed - exact).abs() < 1e-8 * exact.abs().max(1.0));
}

#[test]
fn k_equal_index_gives_first_nonnegative_eigenvalue() {
    let e = ExemplarSurface::<f64>::equatorial_disk();
    let s = e.sample_mesh(12).unwrap();
    let asm = assemble_surface(&s.mesh, &s.fields, e.domain()).unwrap();
    let spec = solve_spectrum(&asm, 4, SolverMode::Dense).unwrap();
    let k = spec.negative_count;
    let v = rayleigh_min_orthogonal(&asm, &spec, k).unwrap();
    assert!(v >= 0.0);
    assert!((v - spec.eigenvalues[k]).abs() < 1e-8 * spec.eigenvalues[k].abs());
}

#[test]
fn spectrum_is_invariant_under_ambient_rotation() {
    let e = ExemplarSurface::<f64>::critical_catenoid();
    let s = e.sample_mesh(12).unwrap();
    let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(1.0, -2.0, 0.5)), 0.7);
    let mesh = s.mesh.map_vertices(|p| rot * p).unwrap();
    let fields = s.fields.rotated(&rot);
    let a = solve_spectrum(
        &assemble_surface(&s.mesh, &s.fields, e.domain()).unwrap(),
        10,
        SolverMode::Dense,
    )
    .unwrap();
    let b = solve_spectrum(
        &assemble_surface(&mesh, &fields, e.domain()).unwrap(),
        10,
        SolverMode::Dense,
    )
    .unwrap();
    let scale = a.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
        assert!((x - y).abs() <= 1e-8 * scale, "{x} vs {y}");
    }
    assert_eq!(a.negative_count, b.negative_count);
}

#[test]
fn catenoid_index_is_stable_and_at_least_four() {
    let e = ExemplarSurface::<f64>::critical_catenoid();
    let s = e.sample_mesh(16).unwrap();
    let (index, report) = morse_index(&s.mesh, &SurfaceSource::Exemplar(&e), 2, 12, SolverMode::Auto).unwrap();
    assert!(index >= 4);
    assert!(report.stable && report.inertia_consistent);
    // two rotational Jacobi fields approach zero from below
    assert_eq!(report.resolved_count, Some(4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn negative_count_is_invariant_under_relabeling(seed in any::<u64>(), catenoid in any::<bool>()) {
        let e = if catenoid {
            ExemplarSurface::<f64>::critical_catenoid()
        } else {
            ExemplarSurface::<f64>::equatorial_disk()
        };
        let s = e.sample_mesh(8).unwrap();
        let perm = random_permutation(s.mesh.n_vertices(), &mut rng(seed));
        let mesh = s.mesh.relabeled(&perm).unwrap();
        let fields = s.fields.permuted(&perm);
        let a = solve_spectrum(&assemble_surface(&s.mesh, &s.fields, e.domain()).unwrap(), 8, SolverMode::Dense).unwrap();
        let b = solve_spectrum(&assemble_surface(&mesh, &fields, e.domain()).unwrap(), 8, SolverMode::Dense).unwrap();
        prop_assert_eq!(a.negative_count, b.negative_count);
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }
}
