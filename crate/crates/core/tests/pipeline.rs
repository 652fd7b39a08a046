use num_complex::Complex64 as C64;

use qretro::detectors::{apd_povm, ApdParams, DetectorConfig};
use qretro::fock::{coherent_state, state_fidelity, FockOperator, FockSpace, Povm, QuantumState};
use qretro::metrics::MetricReport;
use qretro::retrodiction::{premeasurement_state, tmsv, BipartiteState, ProbeEnsemble};
use qretro::tomography::{
    maxlik_povm, qdt_retrodict, qst_premeasurement, simulate_counts, CountTable, MaxLikOptions, QstOptions,
};
use qretro::wigner::{wigner_transform, GridSpec, WignerGrid};

fn standard_rings(d: usize) -> ProbeEnsemble {
    let mags: Vec<f64> = (0..=12).map(|k| 0.25 * k as f64).collect();
    ProbeEnsemble::rings(FockSpace::new(d).unwrap(), &mags, 8).unwrap()
}

#[test]
fn reconstructed_povm_and_qst_route_agree() {
    let d = 12;
    let truth = apd_povm(ApdParams::new(0.6, 0.05).unwrap(), FockSpace::new(d).unwrap());
    let ens = standard_rings(d);
    let table = simulate_counts(&ens, &truth, 100_000, 0xC0FFEE).unwrap();

    let report = maxlik_povm(&table, MaxLikOptions { diagonal_constraint: true, ..Default::default() }).unwrap();
    let via_povm = premeasurement_state(report.povm.element("off").unwrap()).unwrap();

    let retro = qdt_retrodict(&table).unwrap();
    let col: Vec<f64> = retro.column(0).iter().copied().collect();
    let via_qst = qst_premeasurement(&col, &ens, &QstOptions::default()).unwrap();

    let f = state_fidelity(&via_povm, &via_qst);
    assert!(f >= 0.98, "fidelity between routes {f}");
}

#[test]
fn count_table_csv_file_round_trip() {
    let d = 10;
    let space = FockSpace::new(d).unwrap();
    let povm = apd_povm(ApdParams::new(0.5, 0.1).unwrap(), space);
    let table = simulate_counts(&standard_rings(d), &povm, 500, 42).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("counts.csv");
    table.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
    let back = CountTable::read_csv(std::io::BufReader::new(std::fs::File::open(&path).unwrap()), space, 42).unwrap();
    assert_eq!(back.counts(), table.counts());
    assert_eq!(back.labels(), table.labels());
}

#[test]
fn wigner_csv_file_round_trip() {
    let space = FockSpace::new(20).unwrap();
    let grid = GridSpec::new(-3.0, 3.0, -2.0, 2.5, 31, 19).unwrap();
    let w = wigner_transform(coherent_state(C64::new(0.4, -0.2), space).op(), &grid);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.csv");
    w.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
    let back = WignerGrid::read_csv(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(back.values, w.values);
    assert_eq!(back.spec.nx, grid.nx);
    assert_eq!(back.spec.np, grid.np);
}

#[test]
fn json_round_trips_are_exact() {
    let space = FockSpace::new(8).unwrap();
    let povm = apd_povm(ApdParams::new(0.37, 0.11).unwrap(), space);
    let back = Povm::from_json(&povm.to_json()).unwrap();
    for ((la, a), (lb, b)) in povm.iter().zip(back.iter()) {
        assert_eq!(la, lb);
        assert_eq!(a, b);
    }
    let st = coherent_state(C64::new(0.3, 0.8), space);
    assert_eq!(QuantumState::from_json(&st.to_json()).unwrap(), st);
    let bip = tmsv(0.2, space).unwrap();
    assert_eq!(BipartiteState::from_json(&bip.to_json()).unwrap(), bip);
    let op = FockOperator::identity(space);
    assert_eq!(FockOperator::from_json(&op.to_json()).unwrap(), op);
}

#[test]
fn detector_config_drives_metrics() {
    let cfg: DetectorConfig = serde_json::from_str(r#"{"type": "apd", "eta": 0.6, "nu": 0.05}"#).unwrap();
    let povm = cfg.povm(FockSpace::new(60).unwrap()).unwrap();
    let report = MetricReport::for_element(povm.element("off").unwrap(), 4).unwrap();
    assert!((report.projectivity - 0.6 / 1.4).abs() < 1e-12);
    assert!(report.effective_efficiency.is_none());
    let json = serde_json::to_value(&report).unwrap();
    for key in ["projectivity", "effective_efficiency", "fidelities", "non_gaussianity", "negativity_origin"] {
        assert!(json.get(key).is_some(), "{key}");
    }
}
