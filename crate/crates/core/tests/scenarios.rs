use clarkshift::experiments::analyze::analyze_model;
use clarkshift::experiments::config::{ScenarioConfig, ScenarioKind, SynthesisSpec, TargetAtom};
use clarkshift::experiments::{self, ScenarioReport};
use clarkshift::model_ops::PerturbedShiftModel;

fn synthesis(target: &[(f64, usize)], epsilon: f64) -> ScenarioConfig {
    let mut c = ScenarioConfig::new(ScenarioKind::Synthesize);
    c.t_grid = vec![1.0];
    c.synthesis = Some(SynthesisSpec {
        target: target
            .iter()
            .map(|&(a, m)| TargetAtom {
                angle_over_pi: a,
                multiplicity: m,
            })
            .collect(),
        epsilon,
        q: 4.0,
    });
    c
}

#[test]
fn synthesize_then_analyze_stays_below_epsilon() {
    let epsilon = 0.2;
    let (report, _) = experiments::run(&synthesis(&[(0.25, 1), (-0.5, 2)], epsilon)).unwrap();
    let ScenarioReport::Synthesize(s) = report else {
        panic!("wrong report kind")
    };
    assert!(s.passed, "{:?}", s.checks);
    let model = PerturbedShiftModel::new(s.certificate.measures.clone()).unwrap();
    let mut config = ScenarioConfig::new(ScenarioKind::Analyze);
    config.t_grid = vec![1.0];
    let (a, _) = analyze_model(&model, &config).unwrap();
    assert!(a.difference.trace_norm < epsilon);
    assert!(a.difference.rank <= 2);
    assert!(a.passed, "{:?}", a.checks);
}

#[test]
fn errors_carry_the_scenario_name() {
    let err = experiments::run(&synthesis(&[(2.0, 1)], 0.1)).unwrap_err();
    let text = err.to_string();
    assert!(text.starts_with("scenario synthesize:"), "{text}");
}

#[test]
fn empty_target_certifies_the_plain_shift() {
    let (report, outputs) = experiments::run(&synthesis(&[], 0.1)).unwrap();
    assert!(report.passed());
    let ScenarioReport::Synthesize(s) = report else {
        panic!("wrong report kind")
    };
    assert!(s.certificate.measures.is_empty());
    assert_eq!(s.certificate.trace_norm, 0.0);
    assert!(outputs.spectra.is_empty());
}

#[test]
fn integer_growth_table_is_sorted_and_increasing() {
    let mut c = ScenarioConfig::new(ScenarioKind::CounterexampleIntegers);
    c.integers.sizes = vec![2, 4, 8];
    c.integers.ratio_reference = 2;
    c.integers.min_ratio = 1.5;
    let (report, outputs) = experiments::run(&c).unwrap();
    assert!(report.passed(), "{:?}", report.checks());
    assert_eq!(outputs.growth.len(), 4);
    assert_eq!(outputs.growth[0].n, 0);
    let values: Vec<f64> = outputs.growth.iter().map(|r| r.y_hs_squared).collect();
    assert!(values.windows(2).all(|w| w[1] > w[0]), "{values:?}");
}

#[test]
fn scenario_outputs_write_the_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ScenarioConfig::new(ScenarioKind::CounterexampleSharp3);
    c.sharp3.max_exponent = 10;
    c.sharp3.bins_written = 4;
    let (report, written) = experiments::run_and_write(&c, dir.path()).unwrap();
    assert!(report.passed());
    let names: Vec<_> = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, vec!["report.json", "bins.csv"]);
}
