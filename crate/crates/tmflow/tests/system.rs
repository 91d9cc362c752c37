//! Cross-module invariants on the shipped sample machines.

use tmflow::geometry::ManifoldPoint;
use tmflow::integrate::{integrate, IntegratorConfig};
use tmflow::layout::ShiftPlan;
use tmflow::runtime::{
    build_system, initial_point, integrate_ambient, integrate_compactified, integrate_intrinsic,
    read_csv, Format, Outcome, TrajectoryWriter,
};
use tmflow::tm::{run, Configuration, RunOutcome, TMSpec, Tape};

fn data(file: &str) -> String {
    let path = format!("{}/../../data/{file}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("cannot read {path}: {e}"))
}

fn machine(file: &str) -> TMSpec {
    TMSpec::parse(&data(file)).expect("shipped machine parses")
}

#[test]
fn shipped_machines_parse_and_serialize_to_a_fixpoint() {
    for file in ["halt3.tm", "loop.tm", "bb-small.tm"] {
        let spec = machine(file);
        let canon = spec.canonical_text();
        let reparsed = TMSpec::parse(&canon).unwrap();
        assert_eq!(spec, reparsed, "{file}");
        assert_eq!(
            canon,
            reparsed.canonical_text(),
            "{file}: serializer not a fixpoint"
        );
    }
}

#[test]
fn bb_small_halts_in_ten_steps_and_uses_staging() {
    let spec = machine("bb-small.tm");
    match run(&spec, Configuration::start(&spec, Tape::blank()), 1000) {
        RunOutcome::Halted { steps, .. } => assert_eq!(steps, 10),
        other => panic!("expected halt, got {other:?}"),
    }
    let sys = build_system(spec).unwrap();
    let pops = sys
        .suspension
        .layout
        .branches
        .iter()
        .filter(|b| matches!(b.shift, ShiftPlan::PopY(_)))
        .count();
    assert_eq!(pops, 2, "bb-small should exercise right shifts");
}

#[test]
fn initial_ball_norm_is_sqrt_five_sixths_for_every_machine() {
    for file in ["halt3.tm", "loop.tm", "bb-small.tm"] {
        let spec = machine(file);
        let sys = build_system(spec.clone()).unwrap();
        let c0 = Configuration::start(&spec, Tape::blank());
        let w0 = sys.ball_point(&initial_point(&sys, &c0));
        let n = w0.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(
            (n - (5.0f64 / 6.0).sqrt()).abs() <= 1e-9,
            "{file}: initial |w| = {n}"
        );
    }
}

#[test]
fn nonhalting_trajectory_has_bitwise_zero_height() {
    let spec = machine("loop.tm");
    let sys = build_system(spec.clone()).unwrap();
    let p0 = initial_point(&sys, &Configuration::start(&spec, Tape::blank()));
    let cfg = IntegratorConfig {
        max_step: 2e-3,
        ..Default::default()
    };
    let mut checked = 0u64;
    let out = integrate(
        |t, y, dy| {
            let v = sys
                .suspension
                .eval_v(&[y[0], y[1], y[2], y[3]], t.rem_euclid(1.0));
            dy.copy_from_slice(&v);
        },
        None,
        |t, y| {
            let h = sys.height(&ManifoldPoint {
                theta: [y[0], y[1], y[2], y[3]],
                s: t.rem_euclid(1.0),
            });
            assert_eq!(h, 0.0, "height not exactly zero at tau = {t}");
            checked += 1;
        },
        0.0,
        &p0.theta,
        20.0,
        &cfg,
    );
    assert!(checked > 1000);
    assert_eq!(out.t, 20.0);
}

#[test]
fn bb_small_halting_equivalence_in_all_modes() {
    let spec = machine("bb-small.tm");
    let sys = build_system(spec.clone()).unwrap();
    let c0 = Configuration::start(&spec, Tape::blank());
    let cfg = IntegratorConfig::default();
    let tau_star = 10.0 - 0.05;

    let ri = integrate_intrinsic(&sys, &c0, 12.0, &cfg, None).unwrap();
    let Outcome::PlateauHit { t_detect: ti } = ri.outcome else {
        panic!("intrinsic: {:?}", ri.outcome);
    };
    assert!(ti >= tau_star - 0.02 && ti <= tau_star, "intrinsic {ti}");

    let rc = integrate_compactified(&sys, &c0, 12.0, &cfg, None).unwrap();
    let Outcome::PlateauHit { t_detect: tc } = rc.outcome else {
        panic!("compactified: {:?}", rc.outcome);
    };
    assert!(
        (ti - tc).abs() <= 1e-3,
        "mode disagreement {}",
        (ti - tc).abs()
    );

    let ra = integrate_ambient(&sys, &c0, 12.0, 1e6, &cfg, None).unwrap();
    let Outcome::BlewUp { t_detect: ta, .. } = ra.outcome else {
        panic!("ambient: {:?}", ra.outcome);
    };
    assert!(ta <= tau_star && ta >= tau_star - 0.07, "ambient {ta}");
}

#[test]
fn fixed_step_rk4_agrees_with_the_adaptive_method() {
    let spec = machine("halt3.tm");
    let sys = build_system(spec.clone()).unwrap();
    let c0 = Configuration::start(&spec, Tape::blank());
    let adaptive = integrate_intrinsic(&sys, &c0, 5.0, &IntegratorConfig::default(), None).unwrap();
    let rk4_cfg = IntegratorConfig {
        method: tmflow::integrate::Method::Rk4,
        max_step: 2e-4,
        ..Default::default()
    };
    let fixed = integrate_intrinsic(&sys, &c0, 5.0, &rk4_cfg, None).unwrap();
    let (Outcome::PlateauHit { t_detect: ta }, Outcome::PlateauHit { t_detect: tf }) =
        (adaptive.outcome, fixed.outcome)
    else {
        panic!("both methods should detect the plateau");
    };
    assert!(
        (ta - tf).abs() <= 1e-4,
        "methods disagree by {}",
        (ta - tf).abs()
    );
}

#[test]
fn tolerance_halving_moves_detection_by_less_than_1e4() {
    let spec = machine("halt3.tm");
    let sys = build_system(spec.clone()).unwrap();
    let c0 = Configuration::start(&spec, Tape::blank());
    let detect = |tol: f64| {
        let cfg = IntegratorConfig {
            abs_tol: tol,
            rel_tol: tol,
            ..Default::default()
        };
        let r = integrate_intrinsic(&sys, &c0, 5.0, &cfg, None).unwrap();
        match r.outcome {
            Outcome::PlateauHit { t_detect } => t_detect,
            other => panic!("{other:?}"),
        }
    };
    let a = detect(1e-10);
    let b = detect(5e-11);
    assert!(
        (a - b).abs() <= 1e-4,
        "detection moved by {}",
        (a - b).abs()
    );
}

#[test]
fn loop_compactified_sup_is_sqrt_five_sixths() {
    let spec = machine("loop.tm");
    let sys = build_system(spec.clone()).unwrap();
    let c0 = Configuration::start(&spec, Tape::blank());
    let r = integrate_compactified(&sys, &c0, 50.0, &IntegratorConfig::default(), None).unwrap();
    let Outcome::Bounded { sup_norm, .. } = r.outcome else {
        panic!("{:?}", r.outcome);
    };
    assert!(
        (sup_norm - (5.0f64 / 6.0).sqrt()).abs() <= 1e-6,
        "sup |w| = {sup_norm}"
    );
}

#[test]
fn wider_alphabets_keep_exact_conjugacy_and_the_ramp_bracket() {
    // three symbols, every head move, halts at step 7 from blank
    let b3 = TMSpec::parse(
        "alphabet: 3\nstates: A,B,HALT\nstart: A\nhalt: HALT\n\
         A 0 -> B 1 L\nA 1 -> A 2 R\nA 2 -> HALT 0 N\n\
         B 0 -> A 1 N\nB 1 -> HALT 2 L\nB 2 -> B 0 R\n",
    )
    .unwrap();
    match run(&b3, Configuration::start(&b3, Tape::blank()), 100) {
        RunOutcome::Halted { steps, .. } => assert_eq!(steps, 7),
        other => panic!("{other:?}"),
    }
    let sys = build_system(b3.clone()).unwrap();
    let conj = tmflow::check::suite_conjugacy(&sys, 5, 60);
    assert!(conj.passed, "{}", conj.detail);
    let r = integrate_intrinsic(
        &sys,
        &Configuration::start(&b3, Tape::blank()),
        9.0,
        &IntegratorConfig::default(),
        None,
    )
    .unwrap();
    let Outcome::PlateauHit { t_detect } = r.outcome else {
        panic!("{:?}", r.outcome);
    };
    assert!((6.93..=6.95).contains(&t_detect), "detected at {t_detect}");

    // four symbols: widest write gates and four-way staging fans
    let b4 = TMSpec::parse(
        "alphabet: 4\nstates: A,HALT\nstart: A\nhalt: HALT\n\
         A 0 -> A 3 R\nA 1 -> HALT 1 N\nA 2 -> A 1 L\nA 3 -> A 2 L\n",
    )
    .unwrap();
    let sys = build_system(b4).unwrap();
    let conj = tmflow::check::suite_conjugacy(&sys, 6, 60);
    assert!(conj.passed, "{}", conj.detail);
    let sound = tmflow::check::suite_support_soundness(&sys, 5);
    assert!(sound.passed, "{}", sound.detail);
}

#[test]
fn csv_export_reimports_to_the_identical_series() {
    let spec = machine("halt3.tm");
    let sys = build_system(spec.clone()).unwrap();
    let c0 = Configuration::start(&spec, Tape::blank());
    let mut buf: Vec<u8> = Vec::new();
    {
        let mut sink = TrajectoryWriter::new(Format::Csv, Box::new(&mut buf));
        let cfg = IntegratorConfig {
            max_step: 5e-3,
            ..Default::default()
        };
        integrate_intrinsic(&sys, &c0, 0.5, &cfg, Some(&mut sink)).unwrap();
        sink.finish().unwrap();
    }
    let text = String::from_utf8(buf).unwrap();
    let (header, rows) = read_csv(&text).unwrap();
    assert_eq!(
        header,
        ["tau", "theta1", "theta2", "theta3", "theta4", "s", "h"]
    );
    assert!(rows.len() > 50);
    // floats print in shortest-roundtrip form, so re-serializing the
    // parsed rows reproduces the file bytes
    let mut again = header.join(",") + "\n";
    for row in &rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        again.push_str(&(cells.join(",") + "\n"));
    }
    assert_eq!(text, again);
}
