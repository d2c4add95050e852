use risas_harness::output::{
    read_aggregate, read_json, read_per_seed, AGGREGATE_FILE, PER_SEED_FILE,
};
use risas_harness::run::mean_std;
use risas_harness::{
    emit_results, run_experiment, ExperimentResult, ExperimentSpec, OutputFormat, Scheme, Sweep,
};

const DESK: &str = r#"
[system]
n_antennas = 8
rf_chains = 3
ris_elements = 8
users = 2
user_antennas = 2
user_streams = 2
power_dbm = -5
"#;

fn desk(schemes: &[Scheme], n: usize) -> ExperimentSpec {
    let mut spec = ExperimentSpec::from_toml(DESK).unwrap();
    spec.schemes = schemes.to_vec();
    spec.n_realizations = n;
    spec
}

#[test]
fn single_random_realization() {
    let spec = desk(&[Scheme::Random], 1);
    let a = run_experiment(&spec).unwrap();
    let b = run_experiment(&spec).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.points.len(), 1);
    let s = &a.points[0].schemes[0];
    assert_eq!(s.values.len(), 1);
    assert_eq!((s.n, s.failures, s.std), (1, 0, 0.0));
    assert!(s.mean.unwrap() > 0.0);
    assert!(a.failures.is_empty());
}

#[test]
fn schemes_see_identical_channels() {
    let mut spec = desk(&[Scheme::So, Scheme::Ao, Scheme::Random], 4);
    spec.sweep = Sweep::PowerDbm(vec![-10.0, 0.0]);
    let r = run_experiment(&spec).unwrap();
    let d0 = &r.points[0].channel_digests;
    assert_eq!(d0.len(), 4);
    assert!(d0.iter().all(|d| d.is_some()));
    // Power does not enter the channel draw, so every sweep point reuses it.
    assert_eq!(d0, &r.points[1].channel_digests);
    let distinct: std::collections::HashSet<_> = d0.iter().collect();
    assert_eq!(distinct.len(), 4);
    for p in &r.points {
        for s in &p.schemes {
            assert_eq!(s.values.len(), 4);
        }
    }
}

#[test]
fn mean_rate_increases_with_power() {
    let mut spec = desk(&[Scheme::So, Scheme::Ao, Scheme::Random], 50);
    spec.sweep = Sweep::PowerDbm(vec![-15.0, -10.0, -5.0, 0.0]);
    let r = run_experiment(&spec).unwrap();
    assert!(r.failures.is_empty(), "{:?}", r.failures);
    for &scheme in &spec.schemes {
        let means: Vec<f64> = (0..4)
            .map(|p| r.scheme(p, scheme).unwrap().mean.unwrap())
            .collect();
        assert!(means.windows(2).all(|w| w[1] > w[0]), "{scheme}: {means:?}");
    }
}

#[test]
fn pdd_traces_are_recorded() {
    let mut spec = desk(&[Scheme::Pdd], 2);
    spec.trace = true;
    let r = run_experiment(&spec).unwrap();
    let traces = &r.points[0].traces;
    assert!(!traces.is_empty());
    for seed in [0, 1] {
        let iters: Vec<usize> = traces
            .iter()
            .filter(|t| t.seed == seed)
            .map(|t| t.outer_iter)
            .collect();
        assert_eq!(iters, (1..=iters.len()).collect::<Vec<_>>());
    }
    let dir = tempfile::tempdir().unwrap();
    let files = emit_results(&r, OutputFormat::Csv, dir.path()).unwrap();
    assert_eq!(files.len(), 3);
    let text = std::fs::read_to_string(dir.path().join("traces.csv")).unwrap();
    assert!(text.starts_with("scheme,seed,outer_iter,h,rho,sum_rate,relaxed_sum_rate\n"));
    assert_eq!(text.lines().count(), traces.len() + 1);
}

#[test]
fn csv_round_trip_reproduces_aggregates() {
    let mut spec = desk(&[Scheme::So, Scheme::Random], 20);
    spec.sweep = Sweep::RfChains(vec![2, 4]);
    let r = run_experiment(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_results(&r, OutputFormat::Csv, dir.path()).unwrap();
    let rows = read_per_seed(&dir.path().join(PER_SEED_FILE)).unwrap();
    let agg = read_aggregate(&dir.path().join(AGGREGATE_FILE)).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 20);
    assert_eq!(agg.len(), 4);
    for a in &agg {
        assert_eq!(a.sweep_var, "rf_chains");
        let xs: Vec<f64> = rows
            .iter()
            .filter(|r| r.sweep_value == a.sweep_value && r.scheme == a.scheme)
            .filter_map(|r| r.sum_rate_bpshz)
            .collect();
        assert_eq!(xs.len(), a.n);
        let (m, s) = mean_std(&xs);
        let mean = a.mean.unwrap();
        assert!((m - mean).abs() <= 1e-12 * mean.abs(), "{m} vs {mean}");
        assert!((s - a.std).abs() <= 1e-12 * a.std.abs().max(1.0));
    }
    // Per-seed values parse back exactly.
    let so = r.scheme(1, Scheme::So).unwrap();
    let parsed: Vec<f64> = rows
        .iter()
        .filter(|x| x.sweep_value == "4" && x.scheme == Scheme::So)
        .map(|x| x.sum_rate_bpshz.unwrap())
        .collect();
    assert_eq!(
        parsed,
        so.values.iter().map(|v| v.unwrap()).collect::<Vec<_>>()
    );
}

#[test]
fn json_is_lossless() {
    let mut spec = desk(&[Scheme::So, Scheme::Random], 3);
    spec.sweep = Sweep::QBits(vec![
        risas_core::Quantization::Bits(1),
        risas_core::Quantization::Continuous,
    ]);
    let r = run_experiment(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_results(&r, OutputFormat::Json, dir.path()).unwrap();
    assert_eq!(files.len(), 1);
    assert_eq!(read_json(&files[0]).unwrap(), r);
    assert_eq!(r.points[1].sweep_value, "inf");
}

#[test]
fn output_bytes_are_deterministic() {
    let mut spec = desk(&[Scheme::So, Scheme::Random], 6);
    spec.sweep = Sweep::PowerDbm(vec![-5.0, 0.0]);
    let a = run_experiment(&spec).unwrap();
    let b = run_experiment(&spec).unwrap();
    for format in [OutputFormat::Csv, OutputFormat::Json] {
        let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let fa = emit_results(&a, format, da.path()).unwrap();
        let fb = emit_results(&b, format, db.path()).unwrap();
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
    }
}

#[test]
fn parallelism_does_not_change_results() {
    let spec = desk(&[Scheme::So, Scheme::Random], 8);
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let four = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap();
    let a = one.install(|| run_experiment(&spec)).unwrap();
    let b = four.install(|| run_experiment(&spec)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn empty_result_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    emit_results(
        &ExperimentResult::empty("none"),
        OutputFormat::Csv,
        dir.path(),
    )
    .unwrap();
    assert_eq!(
        std::fs::read_to_string(dir.path().join(PER_SEED_FILE)).unwrap(),
        "sweep_var,sweep_value,scheme,seed,sum_rate_bpshz\n"
    );
    assert_eq!(
        std::fs::read_to_string(dir.path().join(AGGREGATE_FILE)).unwrap(),
        "sweep_var,sweep_value,scheme,mean,std,n\n"
    );
}

#[test]
fn io_errors_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let err = emit_results(
        &ExperimentResult::empty("none"),
        OutputFormat::Csv,
        &blocker.join("sub"),
    )
    .unwrap_err();
    assert!(err.to_string().contains("file"), "{err}");
}

#[test]
fn invalid_specs_are_rejected() {
    let mut spec = desk(&[Scheme::So], 1);
    spec.n_realizations = 0;
    assert!(run_experiment(&spec).is_err());
    let mut spec = desk(&[], 1);
    spec.schemes.clear();
    assert!(run_experiment(&spec).is_err());
}
