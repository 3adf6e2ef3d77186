//! Public-API pipelines: snapshots through reduction and back.

use nlmor::autoencoder::AutoencoderModel;
use nlmor::latent_regression::{krr_fit_default, krr_predict};
use nlmor::numkit::{linspace, DenseMatrix};
use nlmor::pod::{fit_pod, project_all, InnerProduct};
use nlmor::registration::{fit_registration, reconstruct_registered, transform_manifold, RegistrationHyper};
use nlmor::snapshots::{build_at_times, build_snapshot_set, load_csv, save_csv, AdvDiffConfig, Case, Grid1D};

fn set(case: Case, n: usize) -> nlmor::snapshots::SnapshotSet {
    build_snapshot_set(&AdvDiffConfig::for_case(case), Grid1D::default(), n, case).unwrap()
}

fn rel_err(g: &Grid1D, exact: &[f64], approx: &[f64]) -> f64 {
    let d: Vec<f64> = exact.iter().zip(approx).map(|(a, b)| a - b).collect();
    g.l2_norm(&d) / g.l2_norm(exact)
}

#[test]
fn csv_round_trip_preserves_the_set() {
    let s = set(Case::AdvectionDiffusion, 6);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.csv");
    save_csv(&s, &p).unwrap();
    let back = load_csv(&p).unwrap();
    assert_eq!(back.times, s.times);
    assert_eq!(back.data, s.data);
    assert_eq!(back.case, s.case);
}

#[test]
fn full_rank_pod_reconstructs_training_rows() {
    // advection keeps every mode above the rank cutoff
    let s = set(Case::Advection, 10);
    let basis = fit_pod(&s, InnerProduct::Trapezoid).unwrap();
    assert_eq!(basis.n_modes(), 9);
    let z = project_all(&basis, &s, basis.n_modes()).unwrap();
    for (i, zi) in z.iter().enumerate() {
        let rec = basis.reconstruct(zi).unwrap();
        assert!(rel_err(&s.grid, s.snapshot(i), &rec) < 1e-10, "row {i}");
    }
}

#[test]
fn registered_advection_generalises_between_training_times() {
    let s = set(Case::Advection, 20);
    let maps = fit_registration(&s, &RegistrationHyper::default(), s.times[0]).unwrap();
    let (moved, _) = transform_manifold(&s, &maps).unwrap();
    let basis = fit_pod(&moved, InnerProduct::Trapezoid).unwrap();

    let coeffs: Vec<Vec<f64>> = maps.iter().map(|m| m.coeffs.clone()).collect();
    let coeff_model = krr_fit_default(&s.times, &DenseMatrix::from_rows(&coeffs).unwrap()).unwrap();
    let z = project_all(&basis, &moved, 1).unwrap();
    let z_model = krr_fit_default(&s.times, &DenseMatrix::from_rows(&z).unwrap()).unwrap();

    let t_test = linspace(0.01, 0.49, 7);
    let test = build_at_times(
        &AdvDiffConfig::for_case(Case::Advection),
        s.grid,
        t_test.clone(),
        Case::Advection,
    )
    .unwrap();
    let (a, zs) = (krr_predict(&coeff_model, &t_test), krr_predict(&z_model, &t_test));
    for (i, &t) in t_test.iter().enumerate() {
        let map = nlmor::registration::RegistrationMap::legendre(s.grid, a.row(i).to_vec(), t, s.times[0]);
        let (rec, _) = reconstruct_registered(&basis, &map, zs.row(i), &s.grid).unwrap();
        assert!(rel_err(&s.grid, test.snapshot(i), &rec) < 1e-2, "t={t}");
    }
}

#[test]
fn checkpoint_survives_a_text_round_trip() {
    let m = AutoencoderModel::seeded(&[6, 3, 2, 3, 6], nlmor::autoencoder::LossKind::Contractive, 0.25, 9).unwrap();
    let mut buf = Vec::new();
    m.write_checkpoint(&mut buf).unwrap();
    let back = AutoencoderModel::read_checkpoint(&buf[..]).unwrap();
    assert_eq!(back.parameters(), m.parameters());
    assert_eq!(back.layer_dims(), m.layer_dims());
    let u = [0.1, -0.4, 0.9, 0.0, 0.3, -0.2];
    assert_eq!(back.encode(&u).unwrap(), m.encode(&u).unwrap());
}
