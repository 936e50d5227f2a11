//! Browser bindings: a mesh of the Kähler-angle union, the edge criterion
//! and deformation search on books, and comass estimates against the
//! closed form.

use calibset::constructions::{build_book_from_sectors, build_sigma, kaehler_form};
use calibset::criterion::check_edge;
use calibset::deform::adversarial_search;
use calibset::exterior::{comass, comass_2form_r4_oracle, ConstantForm, MultiIndex};
use calibset::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

fn js_err(e: calibset::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Triangles of `n` holomorphic faces sampled on `res × res` grids, as a
/// flat array of `(face, x1, x2, x3)` quadruples (three per triangle, the
/// fourth coordinate dropped).
pub fn sigma_triangles(n: usize, res: usize) -> Result<Vec<f64>> {
    let config = build_sigma(n)?;
    let res = res.clamp(2, 64);
    let mut out = Vec::new();
    for (k, face) in config.faces().iter().enumerate() {
        for block in face.patch.domain.grid(res) {
            let pts: Vec<_> = block.iter().map(|&[u, v]| face.patch.point(u, v)).collect();
            for i in 0..res - 1 {
                for j in 0..res - 1 {
                    let a = i * res + j;
                    let b = a + res;
                    for tri in [[a, b, b + 1], [a, b + 1, a + 1]] {
                        for idx in tri {
                            out.extend([k as f64, pts[idx][0], pts[idx][1], pts[idx][2]]);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn sigma_mesh(n: usize, res: usize) -> std::result::Result<Vec<f64>, JsError> {
    sigma_triangles(n, res).map_err(js_err)
}

/// Criterion verdict on the book with the given sector angles (degrees).
pub fn book_summary(sectors: &[f64]) -> Result<String> {
    let radians: Vec<f64> = sectors.iter().map(|d| d.to_radians()).collect();
    let config = build_book_from_sectors(&radians)?;
    let report = check_edge(&config, 0, 1e-10, 16)?;
    let witness = report
        .witness
        .as_ref()
        .map(|w| w.iter().map(|s| if *s > 0 { "+" } else { "-" }).collect::<Vec<_>>().join(""))
        .unwrap_or_else(|| "none".into());
    Ok(format!(
        "status: {}\nminimal residual: {:.3e}\nwitness signs: {}",
        report.status.label(),
        report.residual,
        witness
    ))
}

#[wasm_bindgen]
pub fn check_book(sectors: Vec<f64>) -> std::result::Result<String, JsError> {
    book_summary(&sectors).map_err(js_err)
}

/// Adversarial deformation search on a book; reports the best area change.
pub fn attack_summary(sectors: &[f64], budget: usize, seed: u64) -> Result<String> {
    let radians: Vec<f64> = sectors.iter().map(|d| d.to_radians()).collect();
    let config = build_book_from_sectors(&radians)?;
    let report = adversarial_search(&config, budget.clamp(1, 4000), seed, 32)?;
    let verdict = if report.found_decrease() {
        "area decreased: the configuration is not minimizing"
    } else {
        "no decrease found (not a proof of minimality)"
    };
    Ok(format!(
        "best area change: {:.4e}\nrecomputed at order 64: {:.4e}\nnoise floor: {:.1e}\nevaluations: {}\n{verdict}",
        report.delta, report.verified_delta, report.noise_floor, report.evaluations
    ))
}

#[wasm_bindgen]
pub fn attack_book(sectors: Vec<f64>, budget: usize, seed: u64) -> std::result::Result<String, JsError> {
    attack_summary(&sectors, budget, seed).map_err(js_err)
}

/// Random 2-form on R⁴ (or the Kähler form at angle `theta` when `kaehler`
/// is set) with its optimized comass and the closed-form value.
pub fn comass_pair(seed: u64, kaehler: bool, theta: f64) -> Result<(String, f64, f64)> {
    let form = if kaehler {
        kaehler_form(theta)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms: Vec<(MultiIndex, f64)> =
            MultiIndex::all(4, 2).into_iter().map(|idx| (idx, rng.random_range(-1.0..1.0))).collect();
        ConstantForm::new(4, 2, terms)?
    };
    let text = form
        .coefficients()
        .iter()
        .map(|(idx, c)| format!("{c:+.4} dx{idx}"))
        .collect::<Vec<_>>()
        .join(" ");
    Ok((text, comass(&form, 16, seed)?, comass_2form_r4_oracle(&form)?))
}

#[wasm_bindgen]
pub fn compare_comass(seed: u64, kaehler: bool, theta: f64) -> std::result::Result<String, JsError> {
    let (form, estimate, oracle) = comass_pair(seed, kaehler, theta).map_err(js_err)?;
    Ok(format!(
        "form: {form}\noptimized comass: {estimate:.9}\nclosed form:      {oracle:.9}\ndifference: {:.2e}",
        (estimate - oracle).abs()
    ))
}
