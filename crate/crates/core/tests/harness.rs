use fracboot::arfima::{ArfimaParams, ArfimaSimulator};
use fracboot::estimators::EstimatorSpec;
use fracboot::harness::{
    csv_rows, read_csv, replication_stream, run_design, run_design_with_threads, run_replication, write_aligned,
    write_csv, Correction, McDesign, Statistic,
};
use fracboot::pfsb::{bias_correct, InnovationMode, PfsbConfig};

const DESIGN: &str = r#"
seed = 21
replications = 4
T = [150]
d = [0.0, 0.25]
phi = [0.4]
bootstrap_draws = 12
hpd = true

[[estimator]]
family = "lpr"
p = 1
bba = [1, 2]
ssr = true

[[estimator]]
family = "splw"
p = 0
"#;

fn design() -> McDesign {
    McDesign::from_toml_str(DESIGN).unwrap()
}

#[test]
fn single_replication_matches_hand_assembled_pipeline() {
    let mut d = design();
    d.replications = 1;
    let cell = d.cells()[1];
    let rows = run_replication(&d, &cell, 0).unwrap();

    let stream = replication_stream(d.seed, cell.index, 0);
    let sim = ArfimaSimulator::new(ArfimaParams::gaussian(cell.d, cell.phi).unwrap(), cell.t).unwrap();
    let y = sim.simulate(&stream.split(0)).unwrap();
    let lpr = EstimatorSpec::lpr(1).unwrap();
    let d_hat = lpr.estimate(y.values()).unwrap().d_hat;
    let config = PfsbConfig::new(InnovationMode::Parametric, 12, stream.split(1).split(0)).unwrap();
    let one_shot = bias_correct(&y, &lpr, d_hat, d_hat, &config).unwrap();
    let splw_hat = EstimatorSpec::splw(0).unwrap().estimate(y.values()).unwrap().d_hat;

    let value = |name: &str, c: Correction| {
        rows.iter().find(|(k, _)| k.estimator == name && k.correction == c).unwrap().1.value.unwrap()
    };
    assert_eq!(value("LPR", Correction::None), d_hat);
    assert_eq!(value("LPR", Correction::Bba(1)), one_shot.d_tilde);
    assert_eq!(value("SPLW", Correction::None), splw_hat);

    let results = run_design(&d).unwrap();
    let c = &results.cells[1];
    let bias = c.rows.iter().find(|r| r.key.estimator == "SPLW").unwrap().get(Statistic::Bias).unwrap();
    assert_eq!(bias, splw_hat - cell.d);
}

#[test]
fn csv_round_trip_is_bit_exact() {
    let results = run_design(&design()).unwrap();
    let mut buf = Vec::new();
    write_csv(&results, &[], &mut buf).unwrap();
    let back = read_csv(&buf[..]).unwrap();
    let rows = csv_rows(&results, &[]);
    assert_eq!(back.len(), rows.len());
    for (a, b) in back.iter().zip(&rows) {
        assert_eq!(a, b);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }
    let again: Vec<u8> = {
        let mut v = Vec::new();
        write_csv(&results, &[], &mut v).unwrap();
        v
    };
    assert_eq!(again, buf);
}

#[test]
fn statistic_filter_and_aligned_tables() {
    let results = run_design(&design()).unwrap();
    let mut buf = Vec::new();
    write_csv(&results, &[Statistic::Bias], &mut buf).unwrap();
    let rows = read_csv(&buf[..]).unwrap();
    assert!(rows.iter().all(|r| r.statistic == Statistic::Bias));
    // Six rows per cell: LPR(1), three corrections and SPLW(0)... plus nothing else.
    assert_eq!(rows.len(), 2 * 5);

    let mut text = Vec::new();
    write_aligned(&results, &[], &mut text).unwrap();
    let text = String::from_utf8(text).unwrap();
    assert!(text.contains("T = 150, d = 0.25, phi = 0.4"));
    assert!(text.contains("LPR(1)-BBA(2)"));
    assert!(text.contains("hpd_coverage"));
}

#[test]
fn aggregates_are_consistent() {
    let results = run_design(&design()).unwrap();
    for cell in &results.cells {
        for row in &cell.rows {
            let bias = row.get(Statistic::Bias).unwrap();
            let mse = row.get(Statistic::Mse).unwrap();
            assert!(mse >= bias * bias - 1e-15, "{}: mse {mse} < bias² {}", row.key, bias * bias);
            let n = row.stats.iter().find(|s| s.statistic == Statistic::Bias).unwrap().r_effective;
            assert_eq!(n + row.get(Statistic::Failures).unwrap() as usize, 4);
            if let Some(c) = row.get(Statistic::HpdCoverage) {
                assert!((0.0..=1.0).contains(&c));
            }
        }
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let d = design();
    let a = run_design_with_threads(&d, 1).unwrap();
    let b = run_design_with_threads(&d, 3).unwrap();
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    write_csv(&a, &[], &mut ca).unwrap();
    write_csv(&b, &[], &mut cb).unwrap();
    assert_eq!(ca, cb);
}
