use std::fs;
use std::path::Path;

use csim_harness::config::{Experiment, ExperimentSpec, Method};
use csim_harness::experiments::{
    run_bundle, run_convergence, run_displacement, run_sweep, write_bundle, write_convergence, write_displacement,
    write_sweep, HistogramRow,
};
use csim_harness::records::{read_csv, BundleRecord, TrialRecord};

fn assert_svg(path: &Path) {
    let text = fs::read_to_string(path).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "svg", "{}", path.display());
    assert_eq!(root.attribute("version"), Some("1.1"), "{}", path.display());
}

fn small_sweep(methods: &[Method]) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(Experiment::Sweep);
    spec.n = 256;
    spec.dims = vec![1, 2];
    spec.trials = 8;
    spec.noise_grid = vec![0.0, 0.4];
    spec.methods = methods.to_vec();
    spec.denoiser_n = 64;
    spec.denoiser_samples = 300;
    spec.denoiser_epochs = 2;
    spec
}

#[test]
fn sweep_writes_the_expected_files_and_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_sweep(&small_sweep(&Method::ALL)).unwrap();
    write_sweep(tmp.path(), &out).unwrap();
    for name in ["sweep.csv", "sweep_summary.json", "sweep_similarity.svg", "sweep_distance.svg", "sweep_fail.svg"] {
        assert!(tmp.path().join(name).is_file(), "missing {name}");
    }
    for name in ["sweep_similarity.svg", "sweep_distance.svg", "sweep_fail.svg"] {
        assert_svg(&tmp.path().join(name));
    }
    let back: Vec<TrialRecord> = read_csv(fs::File::open(tmp.path().join("sweep.csv")).unwrap()).unwrap();
    assert_eq!(back, out.records);
    assert_eq!(out.records.len(), 4 * 2 * 2 * 8);
    assert_eq!(out.summary.len(), 4 * 2 * 2);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("sweep_summary.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), out.summary.len());
}

#[test]
fn sweep_pairs_methods_on_the_same_trials() {
    let out = run_sweep(&small_sweep(&[Method::Csim, Method::Grid, Method::Resonator])).unwrap();
    for r in &out.records {
        let csim = out
            .records
            .iter()
            .find(|o| o.method == Method::Csim && o.d == r.d && o.sigma == r.sigma && o.trial == r.trial)
            .unwrap();
        assert_eq!(r.x_true, csim.x_true);
        assert!(r.error.is_none(), "{r:?}");
        assert_eq!(r.fail, r.euclidean_error > 0.1);
    }
    // The true value is drawn once per trial and reused across noise levels.
    let at = |sigma: f64| out.records.iter().find(|o| o.d == 2 && o.trial == 3 && o.sigma == sigma).unwrap();
    assert_eq!(at(0.0).x_true, at(0.4).x_true);
}

#[test]
fn noiseless_sweep_never_fails_and_csim_is_no_worse_than_the_resonator() {
    let mut spec = ExperimentSpec::new(Experiment::Sweep);
    spec.noise_grid = vec![0.0, 0.5];
    spec.methods = vec![Method::Csim, Method::Resonator];
    let out = run_sweep(&spec).unwrap();
    let fail = |m: Method, sigma: f64| {
        out.summary.iter().find(|s| s.method == m && s.sigma == sigma).unwrap().fail_fraction
    };
    assert_eq!(fail(Method::Csim, 0.0), 0.0);
    assert!(fail(Method::Csim, 0.5) <= fail(Method::Resonator, 0.5));
}

#[test]
fn convergence_counts_are_small_and_capped() {
    let mut spec = ExperimentSpec::new(Experiment::Convergence);
    spec.dims = vec![1, 2];
    spec.noise_grid = vec![0.0, 0.5];
    spec.trials = 40;
    let out = run_convergence(&spec).unwrap();
    for s in &out.summary {
        if s.sigma == 0.0 {
            assert!(s.median_coupled <= 3.0 && s.median_direct <= 3.0, "{s:?}");
        }
        if s.sigma == 0.5 && s.d == 1 {
            assert!(s.median_total <= 50.0, "{s:?}");
        }
    }
    assert!(out.records.iter().all(|r| r.iters_coupled <= 1000 && r.iters_direct <= 1000));

    let tmp = tempfile::tempdir().unwrap();
    write_convergence(tmp.path(), &out).unwrap();
    let back: Vec<TrialRecord> = read_csv(fs::File::open(tmp.path().join("convergence.csv")).unwrap()).unwrap();
    assert_eq!(back, out.records);
    assert_svg(&tmp.path().join("convergence.svg"));
}

#[test]
fn bundle_errors_grow_with_item_count() {
    let mut spec = ExperimentSpec::new(Experiment::Bundle);
    spec.max_items = 5;
    spec.trials = 60;
    let out = run_bundle(&spec).unwrap();

    let one: Vec<&BundleRecord> = out.records.iter().filter(|r| r.items == 1).collect();
    assert!(one.iter().all(|r| r.euclidean_error < 0.01));

    let means: Vec<f64> = (2..=5).map(|k| out.summary.iter().find(|s| s.items == k).unwrap().euclidean_error.mean).collect();
    let inversions = means.windows(2).filter(|w| w[1] < w[0]).count();
    assert!(inversions <= 1, "{means:?}");

    for items in 1..=5 {
        let total: u64 = out.histogram.iter().filter(|h: &&HistogramRow| h.items == items).map(|h| h.count).sum();
        assert_eq!(total, (spec.trials * spec.n) as u64);
    }

    let tmp = tempfile::tempdir().unwrap();
    write_bundle(tmp.path(), &out).unwrap();
    let back: Vec<BundleRecord> = read_csv(fs::File::open(tmp.path().join("bundle.csv")).unwrap()).unwrap();
    assert_eq!(back, out.records);
    assert_svg(&tmp.path().join("bundle_error.svg"));
    assert_svg(&tmp.path().join("bundle_phase_hist.svg"));
    let hist = fs::read_to_string(tmp.path().join("bundle_phase_hist.csv")).unwrap();
    assert_eq!(hist.lines().count(), 1 + out.histogram.len());
}

#[test]
fn displacement_outputs() {
    let out = run_displacement(&ExperimentSpec::new(Experiment::Displacement)).unwrap();
    assert_eq!(out.maps.len(), 101 * 101);
    let tmp = tempfile::tempdir().unwrap();
    write_displacement(tmp.path(), &out).unwrap();
    assert_svg(&tmp.path().join("displacement_maps.svg"));
    let csv = fs::read_to_string(tmp.path().join("displacement_maps.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,y,raw,cleaned"));
    assert_eq!(csv.lines().count(), 1 + out.maps.len());
    assert!(tmp.path().join("displacement_report.json").is_file());
}

#[test]
fn invalid_specs_are_rejected() {
    let mut spec = ExperimentSpec::new(Experiment::Sweep);
    spec.trials = 0;
    assert!(run_sweep(&spec).is_err());

    let mut spec = ExperimentSpec::new(Experiment::Displacement);
    spec.dims = vec![3];
    assert!(run_displacement(&spec).is_err());

    let mut spec = ExperimentSpec::new(Experiment::Sweep);
    spec.noise_grid = vec![-0.1];
    assert!(run_sweep(&spec).is_err());
}
