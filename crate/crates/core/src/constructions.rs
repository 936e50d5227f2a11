//! Builders for the example configurations: Kähler calibrations on R⁴ with
//! the holomorphic curve `z = w²` and its rotated copies, books of flat
//! sheets along a common line, and cones from an interior apex over the
//! 1-skeleton of a right prism.

use std::f64::consts::{PI, TAU};

use crate::criterion::Configuration;
use crate::exterior::{plane_dual_form, pushforward_isometry, ConstantForm, KFrame, LinearIsometry, MultiIndex};
use crate::surfaces::{gram_area, EdgeCurve, Face, Orientation, ParamPath, Patch, PatchDomain, PatchMap};
use crate::{Error, Matrix, Result, Vector};

/// Radius of the quarter-disk parameter domain of the holomorphic face:
/// the positive root of `ρ² + ρ⁴ = 1`, i.e. `√((√5 − 1)/2)`. The face is the
/// part of `z = w²` inside the closed unit ball with `x₁ ≥ 0, x₃ ≥ 0`.
pub fn holomorphic_radius() -> f64 {
    ((5f64.sqrt() - 1.0) / 2.0).sqrt()
}

/// Rotation of R⁴ by `theta` fixing the coordinate plane of the two given
/// one-based axes; it turns the complementary coordinate plane `(p, q)`,
/// `p < q`, by `e_p ↦ cos θ e_p + sin θ e_q`.
pub fn rotation_about_plane(fixed_axes: (usize, usize), theta: f64) -> Result<LinearIsometry> {
    let (i, j) = fixed_axes;
    if !(1 <= i && i < j && j <= 4) {
        return Err(Error::InvalidArgument(format!(
            "fixed plane axes must satisfy 1 <= i < j <= 4, got ({i}, {j})"
        )));
    }
    let free: Vec<usize> = (0..4).filter(|&a| a != i - 1 && a != j - 1).collect();
    let (p, q) = (free[0], free[1]);
    let mut m = Matrix::identity(4, 4);
    let (s, c) = theta.sin_cos();
    m[(p, p)] = c;
    m[(q, p)] = s;
    m[(p, q)] = -s;
    m[(q, q)] = c;
    LinearIsometry::new(m)
}

/// Orthogonal complex structure on R⁴.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexStructure {
    matrix: Matrix,
}

impl ComplexStructure {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }
}

/// `J_θ` with `J e₁ = R_θ e₃`, `J e₂ = R_θ e₄`, where `R_θ` turns the
/// `(x₃, x₄)` plane; `J e₃`, `J e₄` follow from `J² = −I`.
pub fn complex_structure(theta: f64) -> ComplexStructure {
    let (s, c) = theta.sin_cos();
    let columns = [
        [0.0, 0.0, c, s],
        [0.0, 0.0, -s, c],
        [-c, s, 0.0, 0.0],
        [-s, -c, 0.0, 0.0],
    ];
    let matrix = Matrix::from_fn(4, 4, |r, col| columns[col][r]);
    ComplexStructure { matrix }
}

/// Kähler form `ω(u, v) = ⟨J_θ u, v⟩ = cos θ (dx₁₃ + dx₂₄) + sin θ (dx₁₄ − dx₂₃)`.
pub fn kaehler_form(theta: f64) -> ConstantForm {
    let j = complex_structure(theta);
    let terms = MultiIndex::all(4, 2).into_iter().map(|idx| {
        let (a, b) = (idx.indices()[0], idx.indices()[1]);
        let c = j.matrix[(b, a)];
        (idx, c)
    });
    let form = ConstantForm::new(4, 2, terms).expect("4x4 complex structure yields a 2-form on R^4");
    // prunes round-off such as cos(π/2)
    form.scaled(1.0)
}

/// `(u, v) ↦ (u, u² − v², v, 2uv)` on the closed quarter-disk of radius
/// [`holomorphic_radius`].
pub fn holomorphic_patch() -> Patch {
    Patch::new(PatchDomain::QuarterDisk { radius: holomorphic_radius() }, PatchMap::Holomorphic)
        .expect("quarter-disk domain is valid")
}

/// Parabola `{x₂ = x₁², x₃ = x₄ = 0}` on D, `s ↦ (s r*, (s r*)², 0, 0)`.
fn first_parabola(name: &str, rotation: Option<&LinearIsometry>) -> Result<EdgeCurve> {
    let mut patch = holomorphic_patch();
    if let Some(r) = rotation {
        patch = patch.with_isometry(r)?;
    }
    Ok(EdgeCurve::trace(name, patch, ParamPath::Line { from: [0.0, 0.0], to: [holomorphic_radius(), 0.0] }))
}

/// Parabola `{x₂ = −x₃², x₁ = x₄ = 0}` on D, `s ↦ (0, −(s r*)², s r*, 0)`.
fn second_parabola(name: &str) -> EdgeCurve {
    EdgeCurve::trace(name, holomorphic_patch(), ParamPath::Line { from: [0.0, 0.0], to: [0.0, holomorphic_radius()] })
}

/// Rotation by `theta` about `{x₃ = x₄ = 0}`.
fn r_rotation(theta: f64) -> LinearIsometry {
    rotation_about_plane((1, 2), theta).expect("valid axes")
}

/// Rotation by `theta` about `{x₁ = x₄ = 0}`.
fn s_rotation(theta: f64) -> LinearIsometry {
    rotation_about_plane((2, 3), theta).expect("valid axes")
}

/// Face `S(R_{(i−1)α}(D))` calibrated by `S#ω_i`.
fn holomorphic_face(name: String, r_angle: f64, s_angle: Option<f64>) -> Result<Face> {
    let mut patch = holomorphic_patch().with_isometry(&r_rotation(r_angle))?;
    let mut calibration = kaehler_form(r_angle);
    if let Some(beta) = s_angle {
        let s = s_rotation(beta);
        patch = patch.with_isometry(&s)?;
        calibration = pushforward_isometry(&calibration, &s)?;
    }
    Face::new(name, patch, Orientation::Positive, calibration)
}

/// `Σ = D₁ ∪ … ∪ D_n` with `D_i = R_{(i−1)α}(D)`, `α = 2π/n`, meeting along
/// the single edge `E`.
pub fn build_sigma(n: usize) -> Result<Configuration> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("build_sigma needs n >= 2, got {n}")));
    }
    let alpha = TAU / n as f64;
    let faces = (1..=n)
        .map(|i| holomorphic_face(format!("D{i}"), (i - 1) as f64 * alpha, None))
        .collect::<Result<Vec<_>>>()?;
    let names = faces.iter().map(|f| f.name.clone()).collect();
    Configuration::new(faces, vec![(first_parabola("E", None)?, names)])
}

/// `D ∪ D_i ∪ D′_j`: the faces of [`build_sigma`] plus `D′_j = S_{(j−1)β}(D)`
/// for `j = 2..m`, with the two edges `E` and `E′`.
pub fn build_two_edge(n: usize, m: usize) -> Result<Configuration> {
    if n < 2 || m < 2 {
        return Err(Error::InvalidArgument(format!("build_two_edge needs n, m >= 2, got ({n}, {m})")));
    }
    let alpha = TAU / n as f64;
    let beta = TAU / m as f64;
    let mut faces = (1..=n)
        .map(|i| holomorphic_face(format!("D{i}"), (i - 1) as f64 * alpha, None))
        .collect::<Result<Vec<_>>>()?;
    for j in 2..=m {
        faces.push(holomorphic_face(format!("Dp{j}"), 0.0, Some((j - 1) as f64 * beta))?);
    }
    let on_e: Vec<String> = (1..=n).map(|i| format!("D{i}")).collect();
    let on_e_prime: Vec<String> = std::iter::once("D1".to_string()).chain((2..=m).map(|j| format!("Dp{j}"))).collect();
    Configuration::new(
        faces,
        vec![(first_parabola("E", None)?, on_e), (second_parabola("Eprime"), on_e_prime)],
    )
}

/// `Σ′ = ⋃_j S_{(j−1)β}(Σ)`, `β = 2π/m`: faces `S_j(D_i)`, the `m` rotated
/// copies of `E`, and `E′` shared by the faces `S_j(D)`.
pub fn build_sigma_prime(n: usize, m: usize) -> Result<Configuration> {
    if n < 2 || m < 2 {
        return Err(Error::InvalidArgument(format!("build_sigma_prime needs n, m >= 2, got ({n}, {m})")));
    }
    let alpha = TAU / n as f64;
    let beta = TAU / m as f64;
    let mut faces = Vec::with_capacity(n * m);
    let mut edges = Vec::with_capacity(m + 1);
    for j in 1..=m {
        let s_angle = (j - 1) as f64 * beta;
        for i in 1..=n {
            faces.push(holomorphic_face(format!("S{j}D{i}"), (i - 1) as f64 * alpha, Some(s_angle))?);
        }
        let copy = first_parabola(&format!("S{j}E"), Some(&s_rotation(s_angle)))?;
        edges.push((copy, (1..=n).map(|i| format!("S{j}D{i}")).collect()));
    }
    edges.push((second_parabola("Eprime"), (1..=m).map(|j| format!("S{j}D1")).collect()));
    Configuration::new(faces, edges)
}

fn unit(x: &[f64]) -> Vector {
    Vector::from_column_slice(x)
}

/// Unit-square sheets in R³ spanned by `(cos aᵢ, sin aᵢ, 0)` and `e₃`,
/// sharing the segment `{(0, 0, s)}`. Azimuths in radians.
pub fn build_book(azimuths: &[f64]) -> Result<Configuration> {
    if azimuths.len() < 2 {
        return Err(Error::InvalidArgument("a book needs at least two sheets".into()));
    }
    for (i, a) in azimuths.iter().enumerate() {
        for b in &azimuths[i + 1..] {
            let d = (a - b).rem_euclid(TAU);
            if d.min(TAU - d) < 1e-9 {
                return Err(Error::InvalidArgument(format!("coincident sheets at azimuth {a}")));
            }
        }
    }
    let spine = unit(&[0.0, 0.0, 1.0]);
    let mut faces = Vec::with_capacity(azimuths.len());
    for (i, a) in azimuths.iter().enumerate() {
        let dir = unit(&[a.cos(), a.sin(), 0.0]);
        let patch = Patch::affine(Vector::zeros(3), dir.clone(), spine.clone(), PatchDomain::unit_square())?;
        let calibration = plane_dual_form(&KFrame::new(vec![dir, spine.clone()]))?;
        faces.push(Face::new(format!("sheet{}", i + 1), patch, Orientation::Positive, calibration)?);
    }
    let names = faces.iter().map(|f| f.name.clone()).collect();
    let edge = EdgeCurve::segment("spine", Vector::zeros(3), spine)?;
    Configuration::new(faces, vec![(edge, names)])
}

/// Book described by the consecutive sector angles between its sheets
/// (radians, summing to 2π); the first sheet sits at azimuth 0.
pub fn book_azimuths_from_sectors(sectors: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = sectors.iter().sum();
    if sectors.len() < 2 || sectors.iter().any(|s| !(*s > 0.0)) || (total - TAU).abs() > 1e-9 {
        return Err(Error::InvalidArgument("sector angles must be positive and sum to a full turn".into()));
    }
    let mut azimuths = Vec::with_capacity(sectors.len());
    let mut acc = 0.0;
    for s in &sectors[..sectors.len() - 1] {
        azimuths.push(acc);
        acc += s;
    }
    azimuths.push(acc);
    Ok(azimuths)
}

pub fn build_book_from_sectors(sectors: &[f64]) -> Result<Configuration> {
    build_book(&book_azimuths_from_sectors(sectors)?)
}

/// Cone from `apex` over the 1-skeleton of the right regular `p`-gonal
/// prism with circumradius `radius` and bottom face at `z = 0`. One flat
/// triangle per prism edge (3p faces); the `2p` segments from the apex to the
/// prism vertices are the singular edges, each shared by three triangles.
pub fn build_prism_cone(p: usize, radius: f64, height: f64, apex: Option<Vector>) -> Result<Configuration> {
    if p < 3 {
        return Err(Error::InvalidArgument(format!("prism needs p >= 3 sides, got {p}")));
    }
    if !(radius > 0.0 && height > 0.0) {
        return Err(Error::InvalidArgument("prism radius and height must be positive".into()));
    }
    let apex = apex.unwrap_or_else(|| unit(&[0.0, 0.0, 0.5 * height]));
    if apex.len() != 3 {
        return Err(Error::Shape("apex must be a point of R^3".into()));
    }
    let ring = |k: usize, z: f64| {
        let a = TAU * (k % p) as f64 / p as f64;
        unit(&[radius * a.cos(), radius * a.sin(), z])
    };
    // Strictly inside: above/below the caps and inside every side half-plane.
    let inradius = radius * (PI / p as f64).cos();
    let inside_sides = (0..p).all(|k| {
        let mid = TAU * (k as f64 + 0.5) / p as f64;
        apex[0] * mid.cos() + apex[1] * mid.sin() < inradius - 1e-12
    });
    if !(apex[2] > 1e-12 && apex[2] < height - 1e-12 && inside_sides) {
        return Err(Error::InvalidArgument("apex must lie strictly inside the prism".into()));
    }

    let mut faces = Vec::with_capacity(3 * p);
    let mut triangle = |name: String, a: Vector, b: Vector| -> Result<()> {
        let du = &a - &apex;
        let dv = &b - &apex;
        if gram_area(&du, &dv) < 1e-12 * du.norm() * dv.norm() {
            return Err(Error::InvalidArgument(format!("degenerate cone triangle {name}")));
        }
        let frame = KFrame::new(vec![du.clone(), dv.clone()])
            .orthonormalized()
            .ok_or_else(|| Error::InvalidArgument(format!("degenerate cone triangle {name}")))?;
        let calibration = plane_dual_form(&frame)?;
        let patch = Patch::affine(apex.clone(), du, dv, PatchDomain::unit_triangle())?;
        faces.push(Face::new(name, patch, Orientation::Positive, calibration)?);
        Ok(())
    };
    for k in 0..p {
        triangle(format!("bottom{}", k + 1), ring(k, 0.0), ring(k + 1, 0.0))?;
        triangle(format!("top{}", k + 1), ring(k, height), ring(k + 1, height))?;
        triangle(format!("side{}", k + 1), ring(k, 0.0), ring(k, height))?;
    }
    let prev = |k: usize| (k + p - 1) % p + 1;
    let mut edges = Vec::with_capacity(2 * p);
    for k in 0..p {
        let ray_b = EdgeCurve::segment(format!("ray_bottom{}", k + 1), apex.clone(), ring(k, 0.0))?;
        edges.push((ray_b, vec![format!("bottom{}", k + 1), format!("bottom{}", prev(k)), format!("side{}", k + 1)]));
        let ray_t = EdgeCurve::segment(format!("ray_top{}", k + 1), apex.clone(), ring(k, height))?;
        edges.push((ray_t, vec![format!("top{}", k + 1), format!("top{}", prev(k)), format!("side{}", k + 1)]));
    }
    Configuration::new(faces, edges)
}
