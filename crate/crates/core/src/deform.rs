//! Boundary-fixing diffeomorphisms built from smooth bumps, the areas and
//! fluxes of deformed faces, and randomized / adversarial minimality probes.
//!
//! A diffeomorphism is `φ = id + ψ` with `ψ(x) = Σ aₖ b(|x − cₖ|/ρₖ) dₖ` and
//! the homotopy is linear, `φ_t = id + tψ`. Every bump is Lipschitz-bounded
//! so that `Σ |aₖ| L_b / ρₖ ≤ 0.9 < 1`, which makes each `φ_t` injective, and
//! every support ball stays clear of the sampled boundary of the
//! configuration, so `∂Σ` is fixed exactly.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::criterion::Configuration;
use crate::exterior::{evaluate_unchecked, ConstantForm};
use crate::quadrature::GaussLegendre;
use crate::surfaces::{checked_area, face_area, flux, Chart, CurveKind, EdgeCurve, Face, ParamPath};
use crate::{map_indexed, task_rng, Error, Matrix, Result, Vector};

/// Largest admissible `|a| L_b / ρ` for one bump.
pub const BUMP_BUDGET: f64 = 0.5;
/// Largest admissible sum of `|a| L_b / ρ` over all bumps.
pub const TOTAL_BUDGET: f64 = 0.9;
/// Relative clearance between a support ball and the boundary samples.
pub const SUPPORT_MARGIN: f64 = 1e-3;
/// Boundary points sampled per boundary piece of each face.
pub const BOUNDARY_SAMPLES: usize = 257;
/// Default tolerance on negative area changes at quadrature order 32.
pub const NOISE_FLOOR: f64 = 5e-7;
/// Bump radii used by the random and adversarial generators.
pub const MIN_RADIUS: f64 = 0.15;
pub const MAX_RADIUS: f64 = 0.6;
/// Gauss–Legendre order on each refined panel near a bump.
pub const PANEL_ORDER: usize = 10;

/// `b(t) = exp(1 − 1/(1 − t²))` on `(−1, 1)`, zero elsewhere; `b(0) = 1`.
pub fn bump_profile(t: f64) -> f64 {
    let q = 1.0 - t * t;
    if q <= 0.0 {
        0.0
    } else {
        (1.0 - 1.0 / q).exp()
    }
}

/// `b'(t)`.
pub fn bump_profile_derivative(t: f64) -> f64 {
    let q = 1.0 - t * t;
    if q <= 0.0 {
        0.0
    } else {
        bump_profile(t) * (-2.0 * t / (q * q))
    }
}

/// `L_b = max |b'|`, from a fine scan of `(0, 1)` refined by golden-section.
pub fn profile_lipschitz() -> f64 {
    static CELL: OnceLock<f64> = OnceLock::new();
    *CELL.get_or_init(|| {
        const N: usize = 100_000;
        let g = |t: f64| bump_profile_derivative(t).abs();
        let mut best = 0;
        for i in 1..N {
            if g(i as f64 / N as f64) > g(best as f64 / N as f64) {
                best = i;
            }
        }
        let (mut lo, mut hi) = ((best - 1) as f64 / N as f64, (best + 1) as f64 / N as f64);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let x1 = hi - r * (hi - lo);
            let x2 = lo + r * (hi - lo);
            if g(x1) >= g(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        g(0.5 * (lo + hi))
    })
}

/// One smooth bump `x ↦ a b(|x − c|/ρ) d`.
#[derive(Clone, Debug, PartialEq)]
pub struct BumpField {
    pub center: Vector,
    pub radius: f64,
    pub direction: Vector,
    pub amplitude: f64,
}

impl BumpField {
    /// `direction` is normalized; it must be nonzero.
    pub fn new(center: Vector, radius: f64, direction: Vector, amplitude: f64) -> Result<Self> {
        if center.len() != direction.len() {
            return Err(Error::Shape("bump center and direction differ in dimension".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidDiffeo(format!("bump radius must be positive, got {radius}")));
        }
        let norm = direction.norm();
        if !(norm > 1e-12 && norm.is_finite()) || !amplitude.is_finite() || center.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidDiffeo("bump needs a finite center, amplitude and nonzero direction".into()));
        }
        Ok(Self { center, radius, direction: direction / norm, amplitude })
    }

    /// `|a| L_b / ρ`, the Lipschitz constant of the bump field.
    pub fn lipschitz(&self) -> f64 {
        self.amplitude.abs() * profile_lipschitz() / self.radius
    }

    /// Largest amplitude allowed by the per-bump budget at this radius.
    pub fn max_amplitude(radius: f64) -> f64 {
        BUMP_BUDGET * radius / profile_lipschitz()
    }

    fn value(&self, x: &Vector) -> f64 {
        let r = (x - &self.center).norm() / self.radius;
        self.amplitude * bump_profile(r)
    }

    /// `∇(a b(|x − c|/ρ)) = a b(r) (−2/(1 − r²)²) (x − c)/ρ²`.
    fn gradient(&self, x: &Vector) -> Option<Vector> {
        let diff = x - &self.center;
        let r2 = diff.norm_squared() / (self.radius * self.radius);
        if r2 >= 1.0 {
            return None;
        }
        let q = 1.0 - r2;
        let scale = self.amplitude * bump_profile(r2.sqrt()) * (-2.0 / (q * q)) / (self.radius * self.radius);
        Some(diff * scale)
    }
}

/// Precomputed boundary samples of a configuration, used to keep bump
/// supports away from `∂Σ`.
#[derive(Clone, Debug)]
pub struct BoundaryGuard {
    samples: Vec<Vector>,
    /// Half the largest gap between consecutive samples on one piece.
    slack: f64,
    dim: usize,
}

impl BoundaryGuard {
    pub fn new(config: &Configuration) -> Self {
        Self::with_resolution(config, BOUNDARY_SAMPLES)
    }

    pub fn with_resolution(config: &Configuration, per_piece: usize) -> Self {
        let samples = config.boundary_samples(per_piece);
        let mut gap = 0.0f64;
        for face in config.faces() {
            for path in face.patch.domain.boundary() {
                let pts: Vec<Vector> = (0..per_piece.max(2))
                    .map(|k| {
                        let [u, v] = path.point(k as f64 / (per_piece.max(2) - 1) as f64);
                        face.patch.point(u, v)
                    })
                    .collect();
                for w in pts.windows(2) {
                    gap = gap.max((&w[1] - &w[0]).norm());
                }
            }
        }
        Self { samples, slack: 0.5 * gap, dim: config.dim() }
    }

    pub fn samples(&self) -> &[Vector] {
        &self.samples
    }

    /// Distance from `p` to the sampled boundary, less the sampling slack.
    pub fn clearance(&self, p: &Vector) -> f64 {
        let d = self.samples.iter().map(|s| (s - p).norm()).fold(f64::INFINITY, f64::min);
        d - self.slack
    }

    /// Largest bump radius admissible at center `p`.
    pub fn max_radius(&self, p: &Vector) -> f64 {
        self.clearance(p) / (1.0 + SUPPORT_MARGIN)
    }

    pub fn admits(&self, bump: &BumpField) -> bool {
        bump.center.len() == self.dim && bump.radius * (1.0 + SUPPORT_MARGIN) <= self.clearance(&bump.center)
    }
}

/// A validated sum of bumps; `apply(x, t) = x + tψ(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Diffeo {
    dim: usize,
    bumps: Vec<BumpField>,
}

impl Diffeo {
    pub fn identity(dim: usize) -> Self {
        Self { dim, bumps: Vec::new() }
    }

    /// Checks the per-bump and total Lipschitz budgets and the boundary
    /// clearance of every support ball.
    pub fn validated(dim: usize, bumps: Vec<BumpField>, guard: &BoundaryGuard) -> Result<Self> {
        let phi = Self::unanchored(dim, bumps)?;
        if let Some(k) = phi.bumps.iter().position(|b| !guard.admits(b)) {
            return Err(Error::InvalidDiffeo(format!("bump {k}: support ball meets the boundary")));
        }
        Ok(phi)
    }

    /// Checks only the Lipschitz budgets; the result need not fix any
    /// particular boundary.
    pub fn unanchored(dim: usize, bumps: Vec<BumpField>) -> Result<Self> {
        let mut total = 0.0;
        for (k, b) in bumps.iter().enumerate() {
            if b.center.len() != dim {
                return Err(Error::Shape(format!("bump {k} lives in R^{}, expected R^{dim}", b.center.len())));
            }
            let lip = b.lipschitz();
            if lip > BUMP_BUDGET * (1.0 + 1e-12) {
                return Err(Error::InvalidDiffeo(format!(
                    "bump {k}: |a| L_b / rho = {lip} exceeds {BUMP_BUDGET}"
                )));
            }
            total += lip;
        }
        if total > TOTAL_BUDGET * (1.0 + 1e-12) {
            return Err(Error::InvalidDiffeo(format!("total Lipschitz bound {total} exceeds {TOTAL_BUDGET}")));
        }
        Ok(Self { dim, bumps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bumps(&self) -> &[BumpField] {
        &self.bumps
    }

    pub fn is_identity(&self) -> bool {
        self.bumps.is_empty()
    }

    /// `ψ(x)`.
    pub fn displacement(&self, x: &Vector) -> Vector {
        let mut out = Vector::zeros(x.len());
        for b in &self.bumps {
            let s = b.value(x);
            if s != 0.0 {
                out.axpy(s, &b.direction, 1.0);
            }
        }
        out
    }

    pub fn apply(&self, x: &Vector, t: f64) -> Vector {
        if self.bumps.is_empty() {
            return x.clone();
        }
        x + self.displacement(x) * t
    }

    pub fn jacobian(&self, x: &Vector, t: f64) -> Matrix {
        let mut m = Matrix::identity(x.len(), x.len());
        for b in &self.bumps {
            if let Some(g) = b.gradient(x) {
                m.ger(t, &b.direction, &g, 1.0);
            }
        }
        m
    }

    /// `Dφ_t(x) v`, returning `v` itself when nothing moves.
    fn push_vector(&self, x: &Vector, t: f64, v: Vector) -> Vector {
        let mut out = v;
        let mut touched = false;
        let mut delta = Vector::zeros(out.len());
        for b in &self.bumps {
            if let Some(g) = b.gradient(x) {
                delta.axpy(g.dot(&out), &b.direction, 1.0);
                touched = true;
            }
        }
        if touched {
            out.axpy(t, &delta, 1.0);
        }
        out
    }
}

/// Validates `bumps` against the sampled boundary of `config`.
pub fn make_diffeo(bumps: Vec<BumpField>, config: &Configuration) -> Result<Diffeo> {
    Diffeo::validated(config.dim(), bumps, &BoundaryGuard::new(config))
}

fn check_t(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("homotopy time {t} outside [0, 1]")));
    }
    Ok(())
}

/// Panels per bump radius for a nominal quadrature order: 4 at order 32.
fn panels_per_radius(quad_order: usize) -> f64 {
    (quad_order as f64 / 8.0).max(1.0)
}

/// Chart image extents along `s` and `t` (polyline lengths, max over a few
/// transversal samples).
fn chart_extent(face: &Face, chart: &Chart) -> (f64, f64) {
    const N: usize = 16;
    let point = |s: f64, t: f64| {
        let (u, v, _) = chart.map(s, t);
        face.patch.point(u, v)
    };
    let lerp = |r: [f64; 2], k: usize| r[0] + (r[1] - r[0]) * k as f64 / N as f64;
    let (mut ls, mut lt) = (0.0f64, 0.0f64);
    for j in 0..=4 {
        let fixed_t = lerp(chart.t, j * N / 4);
        let fixed_s = lerp(chart.s, j * N / 4);
        let (mut a, mut b) = (0.0, 0.0);
        for k in 0..N {
            a += (point(lerp(chart.s, k + 1), fixed_t) - point(lerp(chart.s, k), fixed_t)).norm();
            b += (point(fixed_s, lerp(chart.t, k + 1)) - point(fixed_s, lerp(chart.t, k))).norm();
        }
        ls = ls.max(a);
        lt = lt.max(b);
    }
    (ls, lt)
}

/// Whether the image of `panel` may meet the support of some bump.
fn panel_near(face: &Face, panel: &Chart, phi: &Diffeo) -> bool {
    let point = |s: f64, t: f64| {
        let (u, v, _) = panel.map(s, t);
        face.patch.point(u, v)
    };
    let sm = 0.5 * (panel.s[0] + panel.s[1]);
    let tm = 0.5 * (panel.t[0] + panel.t[1]);
    let center = point(sm, tm);
    let mut reach = 0.0f64;
    for s in [panel.s[0], sm, panel.s[1]] {
        for t in [panel.t[0], tm, panel.t[1]] {
            reach = reach.max((point(s, t) - &center).norm());
        }
    }
    let reach = 1.5 * reach;
    phi.bumps.iter().any(|b| (&center - &b.center).norm() < b.radius + reach)
}

fn outside_supports(phi: &Diffeo, p: &Vector) -> bool {
    phi.bumps.iter().all(|b| (p - &b.center).norm_squared() >= b.radius * b.radius)
}

fn min_radius(phi: &Diffeo) -> f64 {
    phi.bumps.iter().map(|b| b.radius).fold(f64::INFINITY, f64::min)
}

/// `∫ (g(Dφ_t f_u, Dφ_t f_v) − g(f_u, f_v))` over the face domain. The
/// difference vanishes off the bump supports, so only panels of size about
/// `ρ_min / panels_per_radius` that meet a support are integrated, each with
/// a [`PANEL_ORDER`]-point tensor rule.
fn refined_change<G>(face: &Face, phi: &Diffeo, t: f64, quad_order: usize, g: G) -> Result<f64>
where
    G: Fn(&Vector, &Vector, f64, f64) -> Result<f64>,
{
    if phi.is_identity() || t == 0.0 {
        return Ok(0.0);
    }
    let h = min_radius(phi) / panels_per_radius(quad_order);
    let mut total = 0.0;
    for chart in face.patch.domain.charts() {
        let (ls, lt) = chart_extent(face, &chart);
        let ps = ((ls / h).ceil() as usize).clamp(1, 4096);
        let pt = ((lt / h).ceil() as usize).clamp(1, 4096);
        for panel in chart.split(ps, pt) {
            if !panel_near(face, &panel, phi) {
                continue;
            }
            total += panel.integrate(PANEL_ORDER, &mut |u, v| {
                let (p, fu, fv) = face.patch.eval(u, v);
                if outside_supports(phi, &p) {
                    return Ok(0.0);
                }
                let before = g(&fu, &fv, u, v)?;
                let fu = phi.push_vector(&p, t, fu);
                let fv = phi.push_vector(&p, t, fv);
                Ok(g(&fu, &fv, u, v)? - before)
            })?;
        }
    }
    Ok(total)
}

/// `Area(φ_t(F)) − Area(F)`.
pub fn face_area_change(face: &Face, phi: &Diffeo, t: f64, quad_order: usize) -> Result<f64> {
    check_t(t)?;
    refined_change(face, phi, t, quad_order, checked_area)
}

/// `Area(φ_t(Σ)) − Area(Σ)`.
pub fn area_change(config: &Configuration, phi: &Diffeo, t: f64, quad_order: usize) -> Result<f64> {
    if phi.dim() != config.dim() {
        return Err(Error::Shape("diffeomorphism and configuration differ in dimension".into()));
    }
    let mut total = 0.0;
    for face in config.faces() {
        total += face_area_change(face, phi, t, quad_order)?;
    }
    Ok(total)
}

/// Area of `φ_t(F)`: the face area plus the refined change near the bumps.
pub fn deformed_face_area(face: &Face, phi: &Diffeo, t: f64, quad_order: usize) -> Result<f64> {
    let base = face_area(face, quad_order)?;
    if phi.is_identity() {
        return Ok(base);
    }
    Ok(base + face_area_change(face, phi, t, quad_order)?)
}

/// Total area of `φ_t(Σ)`; equal to [`Configuration::total_area`] bit for
/// bit when `φ` is the identity.
pub fn deformed_area(config: &Configuration, phi: &Diffeo, t: f64, quad_order: usize) -> Result<f64> {
    check_t(t)?;
    let base = config.total_area(quad_order)?;
    if phi.is_identity() {
        return Ok(base);
    }
    Ok(base + area_change(config, phi, t, quad_order)?)
}

/// `∫_{φ_t(F)} ω` with the face orientation.
pub fn deformed_flux(face: &Face, phi: &Diffeo, t: f64, form: &ConstantForm, quad_order: usize) -> Result<f64> {
    check_t(t)?;
    let base = flux(face, form, quad_order)?;
    let change = refined_change(face, phi, t, quad_order, |fu, fv, _, _| {
        Ok(evaluate_unchecked(form, &face.orient(fu.clone(), fv.clone())))
    })?;
    Ok(base + change)
}

/// Flux of `ω` through the swept surface `(s, t) ↦ φ_t(E(s))` on `[0, 1]²`,
/// oriented by `(∂_s, ∂_t)`. The integrand is affine in `t`; along `s` only
/// the stretches inside a bump support contribute.
pub fn sweep_flux(edge: &EdgeCurve, phi: &Diffeo, form: &ConstantForm, quad_order: usize) -> Result<f64> {
    if form.degree() != 2 || form.dim() != edge.dim() || phi.dim() != edge.dim() {
        return Err(Error::Shape("sweep flux needs a 2-form and diffeomorphism on the edge's space".into()));
    }
    if phi.is_identity() {
        return Ok(0.0);
    }
    const N: usize = 64;
    let length: f64 = (0..N).map(|k| (edge.point((k + 1) as f64 / N as f64) - edge.point(k as f64 / N as f64)).norm()).sum();
    let h = min_radius(phi) / panels_per_radius(quad_order);
    let panels = ((length / h).ceil() as usize).clamp(1, 1 << 16);
    let rule = GaussLegendre::cached(PANEL_ORDER);
    let mut total = 0.0;
    for k in 0..panels {
        let (a, b) = (k as f64 / panels as f64, (k + 1) as f64 / panels as f64);
        let mid = edge.point(0.5 * (a + b));
        let reach = 1.5 * (edge.point(a) - &mid).norm().max((edge.point(b) - &mid).norm());
        if !phi.bumps.iter().any(|bump| (&mid - &bump.center).norm() < bump.radius + reach) {
            continue;
        }
        for (s, ws) in rule.mapped(a, b) {
            let (x, tangent) = edge.eval(s);
            if outside_supports(phi, &x) {
                continue;
            }
            let dt = phi.displacement(&x);
            let mut row = 0.0;
            for (t, wt) in rule.mapped(0.0, 1.0) {
                let ds = phi.push_vector(&x, t, tangent.clone());
                row += wt * evaluate_unchecked(form, &[ds, dt.clone()]);
            }
            total += ws * row;
        }
    }
    Ok(total)
}

/// Stokes budget of one face for a closed constant form:
/// `∫_F ω − ∫_{φ(F)} ω − Σ_pieces ∫_G ω`, where `G` sweeps each
/// counterclockwise boundary piece of the parameter domain, signed by the
/// face orientation. Vanishes up to quadrature error.
pub fn stokes_residual(face: &Face, phi: &Diffeo, form: &ConstantForm, quad_order: usize) -> Result<f64> {
    let before = flux(face, form, quad_order)?;
    let after = deformed_flux(face, phi, 1.0, form, quad_order)?;
    let mut swept = 0.0;
    for path in face.patch.domain.boundary() {
        swept += sweep_flux(&boundary_piece(face, path), phi, form, quad_order)?;
    }
    Ok(before - after - face.orientation.sign() * swept)
}

fn boundary_piece(face: &Face, path: ParamPath) -> EdgeCurve {
    EdgeCurve { name: format!("{}.boundary", face.name), kind: CurveKind::Trace { patch: face.patch.clone(), path } }
}

fn random_unit(rng: &mut impl Rng, dim: usize) -> Vector {
    loop {
        let v = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

/// Largest `|a|` for one of `count` bumps of radius `radius`.
fn amplitude_cap(radius: f64, count: usize) -> f64 {
    BUMP_BUDGET.min(TOTAL_BUDGET / count as f64) * radius / profile_lipschitz()
}

const PLACEMENT_ATTEMPTS: usize = 256;

/// A random admissible center near the faces of `config`, with its
/// largest admissible radius (capped at [`MAX_RADIUS`]).
fn random_center(config: &Configuration, guard: &BoundaryGuard, rng: &mut impl Rng) -> Result<(Vector, f64)> {
    for _ in 0..PLACEMENT_ATTEMPTS {
        let face = &config.faces()[rng.random_range(0..config.faces().len())];
        let [u, v] = face.patch.domain.sample_interior(rng);
        let offset = random_unit(rng, config.dim()) * (0.05 * MIN_RADIUS * rng.random::<f64>());
        let center = face.patch.point(u, v) + offset;
        let r_max = guard.max_radius(&center).min(MAX_RADIUS);
        if r_max >= MIN_RADIUS {
            return Ok((center, r_max));
        }
    }
    Err(Error::InvalidDiffeo(format!(
        "no bump of radius {MIN_RADIUS} fits away from the boundary after {PLACEMENT_ATTEMPTS} attempts"
    )))
}

fn random_bump(config: &Configuration, guard: &BoundaryGuard, count: usize, rng: &mut impl Rng) -> Result<BumpField> {
    let (center, r_max) = random_center(config, guard, rng)?;
    let radius = MIN_RADIUS + (r_max - MIN_RADIUS) * rng.random::<f64>();
    let direction = random_unit(rng, config.dim());
    let amplitude = amplitude_cap(radius, count) * rng.random_range(-1.0..=1.0);
    BumpField::new(center, radius, direction, amplitude)
}

/// One seeded random admissible diffeomorphism with 1 to 3 bumps.
pub fn random_diffeo(config: &Configuration, guard: &BoundaryGuard, rng: &mut impl Rng) -> Result<Diffeo> {
    let count = rng.random_range(1..=3usize);
    let bumps = (0..count).map(|_| random_bump(config, guard, count, rng)).collect::<Result<Vec<_>>>()?;
    Diffeo::validated(config.dim(), bumps, guard)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub index: usize,
    pub diffeo: Diffeo,
    pub delta: f64,
}

/// Random minimality trials. `delta` is `Area(φ(Σ)) − Area(Σ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialReport {
    pub seed: u64,
    pub quad_order: usize,
    pub outcomes: Vec<TrialOutcome>,
    pub min_delta: f64,
    pub mean_delta: f64,
    /// Trial attaining `min_delta` (lowest index on ties).
    pub argmin: usize,
    /// `|deformed_area(identity) − total_area|`.
    pub identity_error: f64,
    /// `max(identity_error, NOISE_FLOOR)`.
    pub noise_floor: f64,
}

impl TrialReport {
    pub fn violations(&self) -> usize {
        self.outcomes.iter().filter(|o| o.delta < -self.noise_floor).count()
    }

    pub fn pass(&self) -> bool {
        self.violations() == 0
    }
}

/// `|deformed_area(identity) − total_area|` and the resulting noise floor.
pub fn noise_floor(config: &Configuration, quad_order: usize) -> Result<(f64, f64)> {
    let base = config.total_area(quad_order)?;
    let identity = deformed_area(config, &Diffeo::identity(config.dim()), 1.0, quad_order)?;
    let err = (identity - base).abs();
    Ok((err, err.max(NOISE_FLOOR)))
}

/// `trials` random admissible diffeomorphisms; trial `i` draws from the
/// stream `(seed, i)`, so results do not depend on scheduling.
pub fn random_trials(config: &Configuration, trials: usize, seed: u64, quad_order: usize) -> Result<TrialReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    let guard = BoundaryGuard::new(config);
    let (identity_error, floor) = noise_floor(config, quad_order)?;
    let results = map_indexed(trials, |i| -> Result<TrialOutcome> {
        let mut rng = task_rng(seed, i as u64);
        let diffeo = random_diffeo(config, &guard, &mut rng)?;
        let delta = area_change(config, &diffeo, 1.0, quad_order)?;
        Ok(TrialOutcome { index: i, diffeo, delta })
    });
    let outcomes = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut argmin = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.delta < outcomes[argmin].delta {
            argmin = i;
        }
    }
    let mean_delta = outcomes.iter().map(|o| o.delta).sum::<f64>() / trials as f64;
    Ok(TrialReport {
        seed,
        quad_order,
        min_delta: outcomes[argmin].delta,
        mean_delta,
        argmin,
        outcomes,
        identity_error,
        noise_floor: floor,
    })
}

/// Best deformation found by [`adversarial_search`].
#[derive(Clone, Debug, PartialEq)]
pub struct AttackReport {
    pub seed: u64,
    pub budget: usize,
    pub quad_order: usize,
    pub starts: usize,
    pub evaluations: usize,
    pub best: Diffeo,
    /// Area change of `best` at `quad_order`.
    pub delta: f64,
    /// Area change of `best` recomputed at twice the quadrature order.
    pub verified_delta: f64,
    pub noise_floor: f64,
}

impl AttackReport {
    /// True when the verified area change lies below the noise floor.
    pub fn found_decrease(&self) -> bool {
        self.delta < -self.noise_floor && self.verified_delta < -self.noise_floor
    }
}

/// Bump parameters packed for the simplex search: per bump the center,
/// an unnormalized direction, the radius and the amplitude as a fraction
/// of its cap.
struct Encoding<'a> {
    config: &'a Configuration,
    guard: &'a BoundaryGuard,
    count: usize,
}

impl Encoding<'_> {
    fn stride(&self) -> usize {
        2 * self.config.dim() + 2
    }

    fn encode(&self, bumps: &[BumpField]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.count * self.stride());
        for b in bumps {
            x.extend(b.center.iter());
            x.extend(b.direction.iter());
            x.push(b.radius);
            x.push(b.amplitude / amplitude_cap(b.radius, self.count));
        }
        x
    }

    /// Clamps radius and amplitude fraction into range in place and
    /// decodes; `None` when a center has no admissible radius.
    fn project(&self, x: &mut [f64]) -> Option<Diffeo> {
        let n = self.config.dim();
        let mut bumps = Vec::with_capacity(self.count);
        for chunk in x.chunks_mut(self.stride()) {
            let center = Vector::from_column_slice(&chunk[..n]);
            let r_max = self.guard.max_radius(&center).min(MAX_RADIUS);
            if !(r_max >= MIN_RADIUS) {
                return None;
            }
            chunk[2 * n] = chunk[2 * n].clamp(MIN_RADIUS, r_max);
            chunk[2 * n + 1] = chunk[2 * n + 1].clamp(-1.0, 1.0);
            let mut direction = Vector::from_column_slice(&chunk[n..2 * n]);
            if !(direction.norm() > 1e-9) {
                direction = Vector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 });
            }
            direction.normalize_mut();
            chunk[n..2 * n].copy_from_slice(direction.as_slice());
            let radius = chunk[2 * n];
            let amplitude = chunk[2 * n + 1] * amplitude_cap(radius, self.count);
            bumps.push(BumpField::new(center, radius, direction, amplitude).ok()?);
        }
        Diffeo::validated(n, bumps, self.guard).ok()
    }

    /// Initial simplex steps per coordinate.
    fn steps(&self, x: &[f64]) -> Vec<f64> {
        let n = self.config.dim();
        let mut steps = Vec::with_capacity(x.len());
        for chunk in x.chunks(self.stride()) {
            let radius = chunk[2 * n];
            steps.extend(std::iter::repeat_n(0.25 * radius, n));
            steps.extend(std::iter::repeat_n(0.5, n));
            steps.push(-0.25 * (radius - MIN_RADIUS).max(0.1 * radius));
            steps.push(if chunk[2 * n + 1] > 0.0 { -0.5 } else { 0.5 });
        }
        steps
    }
}

struct StartResult {
    best: Diffeo,
    delta: f64,
    evaluations: usize,
}

/// Nelder–Mead over the encoded parameters, with every trial point
/// projected into the admissible region; infeasible points score `+∞`.
fn simplex_search(enc: &Encoding, start: Vec<BumpField>, budget: usize, quad_order: usize) -> Result<StartResult> {
    let mut evaluations = 0usize;
    let mut best: Option<(Diffeo, f64)> = None;
    let mut eval = |x: &mut Vec<f64>, evaluations: &mut usize| -> Result<f64> {
        *evaluations += 1;
        let Some(phi) = enc.project(x) else {
            return Ok(f64::INFINITY);
        };
        let delta = area_change(enc.config, &phi, 1.0, quad_order)?;
        if best.as_ref().is_none_or(|(_, d)| delta < *d) {
            best = Some((phi, delta));
        }
        Ok(delta)
    };

    let mut x0 = enc.encode(&start);
    let f0 = eval(&mut x0, &mut evaluations)?;
    let dim = x0.len();
    let mut simplex = vec![(x0.clone(), f0)];
    for (i, step) in enc.steps(&x0).into_iter().enumerate() {
        if evaluations >= budget {
            break;
        }
        let mut x = x0.clone();
        x[i] += step;
        let f = eval(&mut x, &mut evaluations)?;
        simplex.push((x, f));
    }

    while evaluations < budget && simplex.len() == dim + 1 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let worst = simplex[dim].clone();
        let centroid: Vec<f64> =
            (0..dim).map(|k| simplex[..dim].iter().map(|(x, _)| x[k]).sum::<f64>() / dim as f64).collect();
        let along = |coef: f64| -> Vec<f64> {
            centroid.iter().zip(&worst.0).map(|(c, w)| c + coef * (c - w)).collect()
        };
        let mut xr = along(1.0);
        let fr = eval(&mut xr, &mut evaluations)?;
        if fr < simplex[0].1 {
            if evaluations >= budget {
                simplex[dim] = (xr, fr);
                break;
            }
            let mut xe = along(2.0);
            let fe = eval(&mut xe, &mut evaluations)?;
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            if evaluations >= budget {
                break;
            }
            let mut xc = if fr < worst.1 { along(0.5) } else { along(-0.5) };
            let fc = eval(&mut xc, &mut evaluations)?;
            if fc < worst.1.min(fr) {
                simplex[dim] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    if evaluations >= budget {
                        break;
                    }
                    let mut x: Vec<f64> = x_best.iter().zip(&vertex.0).map(|(b, v)| b + 0.5 * (v - b)).collect();
                    let f = eval(&mut x, &mut evaluations)?;
                    *vertex = (x, f);
                }
            }
        }
    }
    let (best, delta) = best.unwrap_or_else(|| (Diffeo::identity(enc.config.dim()), 0.0));
    Ok(StartResult { best, delta, evaluations })
}

/// Evaluations per start of the multi-start search.
const EVALUATIONS_PER_START: usize = 250;
const MAX_STARTS: usize = 8;

/// Seeded start: odd starts sit on a declared edge with the largest
/// admissible radius and full amplitude, even starts are random diffeos with
/// one or two bumps.
fn start_bumps(config: &Configuration, guard: &BoundaryGuard, index: usize, rng: &mut impl Rng) -> Result<Vec<BumpField>> {
    let count = 1 + index / 2 % 2;
    if index % 2 == 1 && !config.edges().is_empty() {
        for _ in 0..PLACEMENT_ATTEMPTS {
            let mut bumps = Vec::with_capacity(count);
            for _ in 0..count {
                let edge = &config.edges()[rng.random_range(0..config.edges().len())].edge;
                let center = edge.point(rng.random_range(0.2..0.8));
                let r_max = guard.max_radius(&center).min(MAX_RADIUS);
                if r_max < MIN_RADIUS {
                    break;
                }
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let direction = random_unit(rng, config.dim());
                bumps.push(BumpField::new(center, r_max, direction, sign * amplitude_cap(r_max, count))?);
            }
            if bumps.len() == count {
                return Ok(bumps);
            }
        }
    }
    (0..count).map(|_| random_bump(config, guard, count, rng)).collect()
}

/// Derivative-free multi-start search for an area-decreasing admissible
/// diffeomorphism with at most two bumps, spending `budget` area
/// evaluations. The best candidate is re-evaluated at twice `quad_order`.
/// Not finding a decrease does not prove minimality.
pub fn adversarial_search(config: &Configuration, budget: usize, seed: u64, quad_order: usize) -> Result<AttackReport> {
    if budget == 0 {
        return Err(Error::InvalidArgument("search budget must be at least one evaluation".into()));
    }
    let guard = BoundaryGuard::new(config);
    let (_, floor) = noise_floor(config, quad_order)?;
    let starts = budget.div_ceil(EVALUATIONS_PER_START).clamp(1, MAX_STARTS);
    let share = |i: usize| budget / starts + usize::from(i < budget % starts);
    let results = map_indexed(starts, |i| -> Result<StartResult> {
        let mut rng = task_rng(seed, i as u64);
        let bumps = start_bumps(config, &guard, i, &mut rng)?;
        let enc = Encoding { config, guard: &guard, count: bumps.len() };
        simplex_search(&enc, bumps, share(i), quad_order)
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let evaluations = results.iter().map(|r| r.evaluations).sum();
    let mut winner = 0;
    for (i, r) in results.iter().enumerate() {
        if r.delta < results[winner].delta {
            winner = i;
        }
    }
    let StartResult { best, delta, .. } = results.into_iter().nth(winner).expect("at least one start");
    let verified_delta = area_change(config, &best, 1.0, 2 * quad_order)?;
    Ok(AttackReport { seed, budget, quad_order, starts, evaluations, best, delta, verified_delta, noise_floor: floor })
}
