//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line on
//! stderr (uncaptured) with its measurements and runtime.

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::time::{Duration, Instant};

use calibset::commands::{export_text, run, Command, Options};
use calibset::constructions::{build_book, build_book_from_sectors, build_sigma, build_sigma_prime, build_two_edge, kaehler_form};
use calibset::criterion::{check_configuration, check_edge, Configuration, Tolerances};
use calibset::deform::{adversarial_search, make_diffeo, random_trials, stokes_residual, sweep_flux, BumpField, BoundaryGuard};
use calibset::exterior::{comass, comass_2form_r4_oracle, evaluate, linear_combine, ConstantForm, KFrame, MultiIndex};
use calibset::scene::parse_scene;
use calibset::surfaces::{calibration_residual, face_area, flux};
use calibset::Vector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: f64, outcome: Outcome) -> Outcome {
    let secs = elapsed.as_secs_f64();
    match outcome {
        Ok(d) if secs <= limit_s => Ok(format!("{d}; {secs:.2} s (limit {limit_s} s)")),
        Ok(d) => Err(format!("{d}; {secs:.2} s exceeds {limit_s} s")),
        Err(d) => Err(format!("{d}; {secs:.2} s")),
    }
}

fn degrees(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|d| d.to_radians()).collect()
}

fn vanishing_sum() -> Outcome {
    let mut worst = 0.0f64;
    for n in 2..=8 {
        let forms: Vec<ConstantForm> = (0..n).map(|k| kaehler_form(TAU * k as f64 / n as f64)).collect();
        let terms: Vec<(f64, &ConstantForm)> = forms.iter().map(|f| (1.0, f)).collect();
        worst = worst.max(linear_combine(&terms).map_err(|e| e.to_string())?.max_abs_coefficient());
    }
    ensure(worst <= 1e-12, format!("max coefficient over n=2..8: {worst:.2e}"))
}

fn calibration_equality() -> Outcome {
    let sigma = build_sigma(3).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for face in sigma.faces() {
        worst = worst.max(calibration_residual(face, &face.calibration, 10_000, 17).map_err(|e| e.to_string())?);
    }
    ensure(worst <= 1e-9, format!("max residual over 10^4 samples per face: {worst:.2e}"))
}

fn area_oracle() -> Outcome {
    let sigma = build_sigma(3).map_err(|e| e.to_string())?;
    let d = &sigma.faces()[0];
    let area = face_area(d, 64).map_err(|e| e.to_string())?;
    let t = (5f64.sqrt() - 1.0) / 2.0;
    let closed = PI / 2.0 * (1.0 - t / 2.0);
    let omega = flux(d, &kaehler_form(0.0), 64).map_err(|e| e.to_string())?;
    ensure(
        (area - 1.0853936).abs() <= 1e-6 && (area - closed).abs() <= 1e-6 && (omega - area).abs() <= 1e-8,
        format!(
            "area {area:.10} (closed form {closed:.10}), |flux - area| = {:.2e}",
            (omega - area).abs()
        ),
    )
}

fn random_unit_frame(rng: &mut ChaCha8Rng) -> Option<KFrame> {
    let mut gauss = || Vector::from_iterator(4, (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)));
    KFrame::new(vec![gauss(), gauss()]).orthonormalized()
}

fn comass_checks() -> Outcome {
    let forms: Vec<ConstantForm> = (0..3).map(|k| kaehler_form(TAU * k as f64 / 3.0)).collect();
    let mut optimized = 0.0f64;
    for f in &forms {
        let c = comass(f, 64, 3).map_err(|e| e.to_string())?;
        optimized = optimized.max((c - 1.0).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut sampled = 0.0f64;
    let mut frames = 0;
    while frames < 1_000_000 {
        let Some(frame) = random_unit_frame(&mut rng) else { continue };
        frames += 1;
        for f in &forms {
            sampled = sampled.max(evaluate(f, &frame).map_err(|e| e.to_string())?.abs());
        }
    }
    let mut agreement = 0.0f64;
    for _ in 0..100 {
        let terms: Vec<(MultiIndex, f64)> =
            MultiIndex::all(4, 2).into_iter().map(|i| (i, rng.random_range(-1.0..1.0))).collect();
        let f = ConstantForm::new(4, 2, terms).map_err(|e| e.to_string())?;
        let gap = (comass(&f, 16, 9).map_err(|e| e.to_string())? - comass_2form_r4_oracle(&f).map_err(|e| e.to_string())?).abs();
        agreement = agreement.max(gap);
    }
    ensure(
        optimized <= 1e-6 && sampled <= 1.0 + 1e-9 && agreement <= 1e-4,
        format!(
            "|comass - 1| = {optimized:.2e}; max over {frames} sampled frames {sampled:.12}; optimizer vs closed form {agreement:.2e}"
        ),
    )
}

type Criterion = (&'static str, f64, fn() -> Outcome);

fn verdicts() -> Outcome {
    let tolerances = Tolerances { comass_restarts: 8, ..Tolerances::default() };
    let passing: Vec<(&str, Configuration)> = vec![
        ("sigma(2)", build_sigma(2).map_err(|e| e.to_string())?),
        ("sigma(3)", build_sigma(3).map_err(|e| e.to_string())?),
        ("sigma(4)", build_sigma(4).map_err(|e| e.to_string())?),
        ("sigma(6)", build_sigma(6).map_err(|e| e.to_string())?),
        ("sigma'(3,4)", build_sigma_prime(3, 4).map_err(|e| e.to_string())?),
        ("two-edge(3,4)", build_two_edge(3, 4).map_err(|e| e.to_string())?),
        ("book(90,210,330)", build_book(&degrees(&[90.0, 210.0, 330.0])).map_err(|e| e.to_string())?),
    ];
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, config) in &passing {
        let report = check_configuration(config, &tolerances).map_err(|e| e.to_string())?;
        ok &= report.pass && !report.has_errors();
        if !report.pass {
            notes.push(format!("{name} failed"));
        }
    }
    let bad = build_book(&degrees(&[100.0, 230.0, 330.0])).map_err(|e| e.to_string())?;
    let report = check_configuration(&bad, &tolerances).map_err(|e| e.to_string())?;
    let residual = report.edges[0].residual;
    ok &= !report.pass && residual >= 0.1;
    notes.push(format!("{} passing configurations, book(100,230,330) residual {residual:.4}", passing.len()));
    ensure(ok, notes.join("; "))
}

fn minimality_trials() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for (name, config) in [
        ("sigma(3)", build_sigma(3).map_err(|e| e.to_string())?),
        ("book(120)", build_book_from_sectors(&degrees(&[120.0, 120.0, 120.0])).map_err(|e| e.to_string())?),
    ] {
        let start = Instant::now();
        let report = random_trials(&config, 100, 1, 32).map_err(|e| e.to_string())?;
        let secs = start.elapsed().as_secs_f64();
        let pass = report.min_delta >= -report.noise_floor && secs < 60.0;
        ok &= pass;
        details.push(format!(
            "{name}: min {:.3e}, floor {:.1e}, identity error {:.1e}, {secs:.1} s",
            report.min_delta, report.noise_floor, report.identity_error
        ));
    }
    ensure(ok, details.join("; "))
}

fn converse_probe() -> Outcome {
    let bad = build_book_from_sectors(&degrees(&[100.0, 130.0, 130.0])).map_err(|e| e.to_string())?;
    let good = build_book_from_sectors(&degrees(&[120.0, 120.0, 120.0])).map_err(|e| e.to_string())?;
    let found = adversarial_search(&bad, 2000, 0, 32).map_err(|e| e.to_string())?;
    let none = adversarial_search(&good, 2000, 0, 32).map_err(|e| e.to_string())?;
    ensure(
        found.delta <= -1e-3 && found.verified_delta <= -1e-3 && !none.found_decrease(),
        format!(
            "book(100,130,130): {:.3e} (order 64: {:.3e}); book(120): best {:.2e}, floor {:.1e}",
            found.delta, found.verified_delta, none.delta, none.noise_floor
        ),
    )
}

fn proof_mechanics() -> Outcome {
    let sigma = build_sigma(3).map_err(|e| e.to_string())?;
    let edge_report = check_edge(&sigma, 0, 1e-10, 16).map_err(|e| e.to_string())?;
    let witness = edge_report.witness.ok_or("no witness signs")?;
    let inc = &sigma.edges()[0];
    let guard = BoundaryGuard::new(&sigma);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut cancel, mut swept, mut r32_max, mut r64_max) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut improved = true;
    for s in [0.3, 0.5, 0.7] {
        let center = inc.edge.point(s);
        let radius = guard.max_radius(&center).min(0.35);
        let direction = Vector::from_iterator(4, (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let bump = BumpField::new(center, radius, direction, BumpField::max_amplitude(radius)).map_err(|e| e.to_string())?;
        let phi = make_diffeo(vec![bump], &sigma).map_err(|e| e.to_string())?;
        let mut sum = 0.0;
        for (slot, &f) in inc.faces.iter().enumerate() {
            let form = sigma.faces()[f].calibration.scaled(witness[slot] as f64);
            let g = sweep_flux(&inc.edge, &phi, &form, 32).map_err(|e| e.to_string())?;
            swept = swept.max(g.abs());
            sum += g;
        }
        cancel = cancel.max(sum.abs());
        for face in sigma.faces() {
            let r32 = stokes_residual(face, &phi, &face.calibration, 32).map_err(|e| e.to_string())?.abs();
            let r64 = stokes_residual(face, &phi, &face.calibration, 64).map_err(|e| e.to_string())?.abs();
            r32_max = r32_max.max(r32);
            r64_max = r64_max.max(r64);
            improved &= r64 <= r32;
        }
    }
    ensure(
        cancel <= 1e-12 && swept > 1e-4 && r32_max <= 1e-6 && improved,
        format!(
            "signed swept flux {cancel:.2e} (individual up to {swept:.2e}); Stokes residual {r32_max:.2e} at 32, {r64_max:.2e} at 64"
        ),
    )
}

fn determinism() -> Outcome {
    let sigma = parse_scene("[generate kind=kaehler_sigma n=3]\n").map_err(|e| e.to_string())?;
    let book = parse_scene("[generate kind=book]\nsectors = 100 130 130\n").map_err(|e| e.to_string())?;
    let perturb = Options { trials: Some(100), seed: Some(7), ..Options::default() };
    let attack = Options { budget: Some(500), seed: Some(3), ..Options::default() };
    let p1 = run(&Command::Perturb, &sigma, &perturb).to_text();
    let p2 = run(&Command::Perturb, &sigma, &perturb).to_text();
    let a1 = run(&Command::Attack, &book, &attack).to_text();
    let a2 = run(&Command::Attack, &book, &attack).to_text();
    let mesh = Options { res: Some(64), ..Options::default() };
    let o1 = export_text(&sigma, &mesh).map_err(|e| e.to_string())?;
    let o2 = export_text(&sigma, &mesh).map_err(|e| e.to_string())?;
    ensure(
        p1 == p2 && a1 == a2 && o1 == o2,
        format!("perturb report {} bytes, attack report {} bytes, OBJ {} bytes", p1.len(), a1.len(), o1.len()),
    )
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("vanishing sum of Kähler forms", 1.0, vanishing_sum),
        ("calibration equality on the faces", 5.0, calibration_equality),
        ("area of the holomorphic face", 5.0, area_oracle),
        ("comass of the Kähler forms", 60.0, comass_checks),
        ("criterion verdicts", 30.0, verdicts),
        ("minimality trials", 120.0, minimality_trials),
        ("adversarial search", 300.0, converse_probe),
        ("swept-flux cancellation and Stokes budget", 60.0, proof_mechanics),
        ("determinism of reports and meshes", 120.0, determinism),
    ];
    let mut failures = Vec::new();
    let mut err = std::io::stderr();
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let outcome = within(start.elapsed(), *limit, result);
        let (label, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        let _ = writeln!(err, "criterion {}: {label}  {name}: {detail}", i + 1);
        if outcome.is_err() {
            failures.push(i + 1);
        }
    }
    assert!(failures.is_empty(), "failing criteria: {failures:?}");
}
