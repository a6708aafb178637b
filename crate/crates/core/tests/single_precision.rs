use fbms_core::hodge::{harmonic_basis, BoundaryFlavor};
use fbms_core::jacobi::{assemble_surface, solve_spectrum, SolverMode};
use fbms_core::mesh::{homology_profile, topology};
use fbms_core::{Exemplar, Exemplar32};

#[test]
fn pipeline_runs_in_single_precision() {
    let e = Exemplar32::critical_catenoid();
    assert!((e.t0() - Exemplar::critical_catenoid().t0() as f32).abs() < 1e-6);
    let s = e.sample_mesh(12).unwrap();
    let topo = topology(&s.mesh).unwrap();
    assert_eq!((topo.genus, topo.boundary_components), (0, 2));
    assert_eq!(homology_profile(&s.mesh).unwrap().h1_relative, 1);
    let asm = assemble_surface(&s.mesh, &s.fields, e.domain()).unwrap();
    let spec = solve_spectrum(&asm, 8, SolverMode::Dense).unwrap();
    assert!(spec.negative_count >= 4);
    let basis = harmonic_basis(&s.mesh, BoundaryFlavor::NormalAtBoundary, SolverMode::Dense).unwrap();
    assert_eq!(basis.dim(), 1);
}

#[test]
fn single_and_double_precision_spectra_agree() {
    let s64 = Exemplar::equatorial_disk().sample_mesh(8).unwrap();
    let e32 = Exemplar32::equatorial_disk();
    let s32 = e32.sample_mesh(8).unwrap();
    let a = solve_spectrum(
        &assemble_surface(&s64.mesh, &s64.fields, Exemplar::equatorial_disk().domain()).unwrap(),
        4,
        SolverMode::Dense,
    )
    .unwrap();
    let b = solve_spectrum(
        &assemble_surface(&s32.mesh, &s32.fields, e32.domain()).unwrap(),
        4,
        SolverMode::Dense,
    )
    .unwrap();
    for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
        assert!((x - *y as f64).abs() < 1e-3 * x.abs().max(1.0));
    }
}
