//! Oriented parametrized 2-faces, edge curves, and the integrals over them.
//!
//! Every patch comes from a small analytic catalog (affine sheets and the
//! holomorphic curve `z = w²`), optionally composed with an isometry and a
//! translation, so derivatives are always exact.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;

use crate::exterior::{evaluate_unchecked, ConstantForm, KFrame, LinearIsometry};
use crate::quadrature::GaussLegendre;
use crate::{task_rng, Error, Result, Vector};

/// Default tolerance for edge-on-boundary membership.
pub const EDGE_TOLERANCE: f64 = 1e-9;
/// Default tensor quadrature order.
pub const DEFAULT_QUAD_ORDER: usize = 32;
/// Gram determinants below this are treated as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-14;

const DOMAIN_SLACK: f64 = 1e-12;

/// A straight segment or circular arc in the parameter plane, traversed for
/// `σ ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub enum ParamPath {
    Line { from: [f64; 2], to: [f64; 2] },
    /// Arc of the circle of `radius` about the origin from angle `start` to `end`.
    Arc { radius: f64, start: f64, end: f64 },
}

impl ParamPath {
    pub fn point(&self, sigma: f64) -> [f64; 2] {
        match *self {
            ParamPath::Line { from, to } => [
                from[0] + sigma * (to[0] - from[0]),
                from[1] + sigma * (to[1] - from[1]),
            ],
            ParamPath::Arc { radius, start, end } => {
                let a = start + sigma * (end - start);
                [radius * a.cos(), radius * a.sin()]
            }
        }
    }

    pub fn tangent(&self, sigma: f64) -> [f64; 2] {
        match *self {
            ParamPath::Line { from, to } => [to[0] - from[0], to[1] - from[1]],
            ParamPath::Arc { radius, start, end } => {
                let a = start + sigma * (end - start);
                let da = end - start;
                [-radius * a.sin() * da, radius * a.cos() * da]
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PatchDomain {
    Rectangle { u0: f64, u1: f64, v0: f64, v1: f64 },
    /// `{u ≥ 0, v ≥ 0, u² + v² ≤ r²}`.
    QuarterDisk { radius: f64 },
    /// Convex polygon, vertices counterclockwise.
    Polygon { vertices: Vec<[f64; 2]> },
}

fn cross2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn sub2(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// Coordinate rectangle `[s₀, s₁] × [t₀, t₁]` mapped smoothly onto part of
/// a parameter domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Chart {
    kind: ChartKind,
    pub s: [f64; 2],
    pub t: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum ChartKind {
    Identity,
    /// `(ρ, φ) ↦ (ρ cos φ, ρ sin φ)`.
    Polar,
    /// `(s, t) ↦ a + s·ab + s·t·bc`, Jacobian `s·jac`.
    Collapsed { a: [f64; 2], ab: [f64; 2], bc: [f64; 2], jac: f64 },
}

impl Chart {
    /// Parameter point and Jacobian determinant at chart coordinates `(s, t)`.
    pub fn map(&self, s: f64, t: f64) -> (f64, f64, f64) {
        match self.kind {
            ChartKind::Identity => (s, t, 1.0),
            ChartKind::Polar => (s * t.cos(), s * t.sin(), s),
            ChartKind::Collapsed { a, ab, bc, jac } => {
                (a[0] + s * ab[0] + s * t * bc[0], a[1] + s * ab[1] + s * t * bc[1], s * jac)
            }
        }
    }

    /// The `ps × pt` congruent sub-rectangles of this chart.
    pub fn split(&self, ps: usize, pt: usize) -> impl Iterator<Item = Chart> + '_ {
        let (ps, pt) = (ps.max(1), pt.max(1));
        let ds = (self.s[1] - self.s[0]) / ps as f64;
        let dt = (self.t[1] - self.t[0]) / pt as f64;
        (0..ps).flat_map(move |i| {
            (0..pt).map(move |j| {
                let s0 = self.s[0] + ds * i as f64;
                let t0 = self.t[0] + dt * j as f64;
                let s1 = if i + 1 == ps { self.s[1] } else { s0 + ds };
                let t1 = if j + 1 == pt { self.t[1] } else { t0 + dt };
                Chart { kind: self.kind, s: [s0, s1], t: [t0, t1] }
            })
        })
    }

    /// `order × order` Gauss–Legendre rule for `∫ f(u, v) du dv` over the
    /// image of the chart.
    pub fn integrate<F>(&self, order: usize, f: &mut F) -> Result<f64>
    where
        F: FnMut(f64, f64) -> Result<f64>,
    {
        if order < 2 {
            return Err(Error::InvalidArgument(format!("quadrature order {order} < 2")));
        }
        let rule = GaussLegendre::cached(order);
        let mut total = 0.0;
        for (s, ws) in rule.mapped(self.s[0], self.s[1]) {
            let mut row = 0.0;
            for (t, wt) in rule.mapped(self.t[0], self.t[1]) {
                let (u, v, jac) = self.map(s, t);
                row += wt * jac * f(u, v)?;
            }
            total += ws * row;
        }
        Ok(total)
    }
}

impl PatchDomain {
    pub fn unit_square() -> Self {
        PatchDomain::Rectangle { u0: 0.0, u1: 1.0, v0: 0.0, v1: 1.0 }
    }

    pub fn unit_triangle() -> Self {
        PatchDomain::Polygon { vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PatchDomain::Rectangle { u0, u1, v0, v1 } => {
                if !(u1 > u0 && v1 > v0) {
                    return Err(Error::InvalidArgument("rectangle domain has no area".into()));
                }
            }
            PatchDomain::QuarterDisk { radius } => {
                if !(*radius > 0.0) {
                    return Err(Error::InvalidArgument("quarter-disk radius must be positive".into()));
                }
            }
            PatchDomain::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(Error::InvalidArgument("polygon needs at least 3 vertices".into()));
                }
                let m = vertices.len();
                for i in 0..m {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % m];
                    let c = vertices[(i + 2) % m];
                    if !(cross2(sub2(b, a), sub2(c, b)) > 0.0) {
                        return Err(Error::InvalidArgument(
                            "polygon must be convex with counterclockwise vertices".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, u: f64, v: f64, slack: f64) -> bool {
        match self {
            PatchDomain::Rectangle { u0, u1, v0, v1 } => {
                u >= u0 - slack && u <= u1 + slack && v >= v0 - slack && v <= v1 + slack
            }
            PatchDomain::QuarterDisk { radius } => {
                u >= -slack && v >= -slack && (u * u + v * v).sqrt() <= radius + slack
            }
            PatchDomain::Polygon { vertices } => {
                let m = vertices.len();
                (0..m).all(|i| {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % m];
                    let edge = sub2(b, a);
                    cross2(edge, sub2([u, v], a)) >= -slack * (edge[0].hypot(edge[1]))
                })
            }
        }
    }

    /// Boundary pieces, traversed counterclockwise.
    pub fn boundary(&self) -> Vec<ParamPath> {
        match self {
            PatchDomain::Rectangle { u0, u1, v0, v1 } => vec![
                ParamPath::Line { from: [*u0, *v0], to: [*u1, *v0] },
                ParamPath::Line { from: [*u1, *v0], to: [*u1, *v1] },
                ParamPath::Line { from: [*u1, *v1], to: [*u0, *v1] },
                ParamPath::Line { from: [*u0, *v1], to: [*u0, *v0] },
            ],
            PatchDomain::QuarterDisk { radius } => vec![
                ParamPath::Line { from: [0.0, 0.0], to: [*radius, 0.0] },
                ParamPath::Arc { radius: *radius, start: 0.0, end: FRAC_PI_2 },
                ParamPath::Line { from: [0.0, *radius], to: [0.0, 0.0] },
            ],
            PatchDomain::Polygon { vertices } => {
                let m = vertices.len();
                (0..m)
                    .map(|i| ParamPath::Line { from: vertices[i], to: vertices[(i + 1) % m] })
                    .collect()
            }
        }
    }

    fn bounding_box(&self) -> [f64; 4] {
        match self {
            PatchDomain::Rectangle { u0, u1, v0, v1 } => [*u0, *u1, *v0, *v1],
            PatchDomain::QuarterDisk { radius } => [0.0, *radius, 0.0, *radius],
            PatchDomain::Polygon { vertices } => vertices.iter().fold(
                [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY],
                |b, p| [b[0].min(p[0]), b[1].max(p[0]), b[2].min(p[1]), b[3].max(p[1])],
            ),
        }
    }

    /// Uniform sample from the interior (rejection in the bounding box).
    pub fn sample_interior(&self, rng: &mut impl Rng) -> [f64; 2] {
        let [a, b, c, d] = self.bounding_box();
        loop {
            let u = a + (b - a) * rng.random::<f64>();
            let v = c + (d - c) * rng.random::<f64>();
            let inset = 1e-9 * (b - a).max(d - c);
            if self.contains(u, v, -inset) {
                return [u, v];
            }
        }
    }

    /// Fan triangles `(v₀, vᵢ, vᵢ₊₁)` of a polygon domain.
    fn fan(vertices: &[[f64; 2]]) -> impl Iterator<Item = [[f64; 2]; 3]> + '_ {
        (1..vertices.len() - 1).map(move |i| [vertices[0], vertices[i], vertices[i + 1]])
    }

    /// Integration charts covering the domain: the rectangle itself, polar
    /// coordinates for quarter-disks, and one collapsed square per fan
    /// triangle for polygons.
    pub fn charts(&self) -> Vec<Chart> {
        match self {
            PatchDomain::Rectangle { u0, u1, v0, v1 } => {
                vec![Chart { kind: ChartKind::Identity, s: [*u0, *u1], t: [*v0, *v1] }]
            }
            PatchDomain::QuarterDisk { radius } => {
                vec![Chart { kind: ChartKind::Polar, s: [0.0, *radius], t: [0.0, FRAC_PI_2] }]
            }
            PatchDomain::Polygon { vertices } => Self::fan(vertices)
                .map(|[a, b, c]| {
                    let ab = sub2(b, a);
                    let bc = sub2(c, b);
                    let jac = cross2(ab, bc).abs();
                    Chart { kind: ChartKind::Collapsed { a, ab, bc, jac }, s: [0.0, 1.0], t: [0.0, 1.0] }
                })
                .collect(),
        }
    }

    /// Tensor Gauss–Legendre quadrature of `f` over the domain, one
    /// `order × order` rule per chart.
    pub fn integrate<F>(&self, order: usize, mut f: F) -> Result<f64>
    where
        F: FnMut(f64, f64) -> Result<f64>,
    {
        let mut total = 0.0;
        for chart in self.charts() {
            total += chart.integrate(order, &mut f)?;
        }
        Ok(total)
    }

    /// `res × res` parameter grid (per fan triangle for polygons), row-major
    /// in the first grid coordinate. Used for mesh export and sampling.
    pub fn grid(&self, res: usize) -> Vec<Vec<[f64; 2]>> {
        let res = res.max(2);
        let step = |i: usize| i as f64 / (res - 1) as f64;
        let mut blocks = Vec::new();
        match self {
            PatchDomain::Rectangle { u0, u1, v0, v1 } => {
                let mut pts = Vec::with_capacity(res * res);
                for i in 0..res {
                    for j in 0..res {
                        pts.push([u0 + (u1 - u0) * step(i), v0 + (v1 - v0) * step(j)]);
                    }
                }
                blocks.push(pts);
            }
            PatchDomain::QuarterDisk { radius } => {
                let mut pts = Vec::with_capacity(res * res);
                for i in 0..res {
                    for j in 0..res {
                        let rho = radius * step(i);
                        let phi = FRAC_PI_2 * step(j);
                        pts.push([rho * phi.cos(), rho * phi.sin()]);
                    }
                }
                blocks.push(pts);
            }
            PatchDomain::Polygon { vertices } => {
                for [a, b, c] in Self::fan(vertices) {
                    let ab = sub2(b, a);
                    let bc = sub2(c, b);
                    let mut pts = Vec::with_capacity(res * res);
                    for i in 0..res {
                        for j in 0..res {
                            let (s, t) = (step(i), step(j));
                            pts.push([a[0] + s * ab[0] + s * t * bc[0], a[1] + s * ab[1] + s * t * bc[1]]);
                        }
                    }
                    blocks.push(pts);
                }
            }
        }
        blocks
    }

    /// Nearest point of the (closed) domain to `(u, v)`.
    pub fn clamp(&self, u: f64, v: f64) -> [f64; 2] {
        match self {
            PatchDomain::Rectangle { u0, u1, v0, v1 } => [u.clamp(*u0, *u1), v.clamp(*v0, *v1)],
            PatchDomain::QuarterDisk { radius } => {
                let (u, v) = (u.max(0.0), v.max(0.0));
                let r = u.hypot(v);
                if r > *radius {
                    [u * radius / r, v * radius / r]
                } else {
                    [u, v]
                }
            }
            PatchDomain::Polygon { vertices } => {
                if self.contains(u, v, 0.0) {
                    return [u, v];
                }
                let m = vertices.len();
                let mut best = vertices[0];
                let mut best_d = f64::INFINITY;
                for i in 0..m {
                    let a = vertices[i];
                    let e = sub2(vertices[(i + 1) % m], a);
                    let t = (((u - a[0]) * e[0] + (v - a[1]) * e[1]) / (e[0] * e[0] + e[1] * e[1])).clamp(0.0, 1.0);
                    let p = [a[0] + t * e[0], a[1] + t * e[1]];
                    let d = (p[0] - u).hypot(p[1] - v);
                    if d < best_d {
                        best_d = d;
                        best = p;
                    }
                }
                best
            }
        }
    }
}

/// Base maps of the patch catalog.
#[derive(Clone, Debug, PartialEq)]
pub enum PatchMap {
    /// `(u, v) ↦ origin + u·du + v·dv`.
    Affine { origin: Vector, du: Vector, dv: Vector },
    /// `(u, v) ↦ (u, u² − v², v, 2uv)`, the curve `z = w²` in C² ≅ R⁴.
    Holomorphic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub domain: PatchDomain,
    pub map: PatchMap,
    pub isometry: Option<LinearIsometry>,
    pub translation: Option<Vector>,
}

impl Patch {
    pub fn new(domain: PatchDomain, map: PatchMap) -> Result<Self> {
        domain.validate()?;
        if let PatchMap::Affine { origin, du, dv } = &map {
            if origin.len() != du.len() || du.len() != dv.len() {
                return Err(Error::Shape("affine patch vectors of differing dimension".into()));
            }
        }
        Ok(Self { domain, map, isometry: None, translation: None })
    }

    pub fn affine(origin: Vector, du: Vector, dv: Vector, domain: PatchDomain) -> Result<Self> {
        Self::new(domain, PatchMap::Affine { origin, du, dv })
    }

    /// Composes with `x ↦ R x` (after any existing isometry and translation).
    pub fn with_isometry(mut self, rotation: &LinearIsometry) -> Result<Self> {
        if rotation.dim() != self.dim() {
            return Err(Error::Shape(format!("{}-dimensional isometry on a patch in R^{}", rotation.dim(), self.dim())));
        }
        self.isometry = Some(match &self.isometry {
            Some(r) => rotation.compose(r),
            None => rotation.clone(),
        });
        self.translation = self.translation.map(|t| rotation.apply(&t));
        Ok(self)
    }

    pub fn with_translation(mut self, offset: Vector) -> Result<Self> {
        if offset.len() != self.dim() {
            return Err(Error::Shape("translation dimension mismatch".into()));
        }
        self.translation = Some(match self.translation {
            Some(t) => t + offset,
            None => offset,
        });
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        match &self.map {
            PatchMap::Affine { origin, .. } => origin.len(),
            PatchMap::Holomorphic => 4,
        }
    }

    pub fn catalog_id(&self) -> &'static str {
        match self.map {
            PatchMap::Affine { .. } => "affine",
            PatchMap::Holomorphic => "holomorphic",
        }
    }

    /// Point and the two partial derivatives at `(u, v)`; no domain check.
    pub fn eval(&self, u: f64, v: f64) -> (Vector, Vector, Vector) {
        let (p, fu, fv) = match &self.map {
            PatchMap::Affine { origin, du, dv } => (origin + du * u + dv * v, du.clone(), dv.clone()),
            PatchMap::Holomorphic => (
                Vector::from_column_slice(&[u, u * u - v * v, v, 2.0 * u * v]),
                Vector::from_column_slice(&[1.0, 2.0 * u, 0.0, 2.0 * v]),
                Vector::from_column_slice(&[0.0, -2.0 * v, 1.0, 2.0 * u]),
            ),
        };
        let (p, fu, fv) = match &self.isometry {
            Some(r) => (r.apply(&p), r.apply(&fu), r.apply(&fv)),
            None => (p, fu, fv),
        };
        match &self.translation {
            Some(t) => (p + t, fu, fv),
            None => (p, fu, fv),
        }
    }

    pub fn point(&self, u: f64, v: f64) -> Vector {
        self.eval(u, v).0
    }

    /// Nearest point of the patch image to `q`: grid seed then projected
    /// Gauss–Newton in the parameter domain. Returns `(u, v, distance)`.
    pub fn closest_point(&self, q: &Vector) -> (f64, f64, f64) {
        let mut best = (0.0, 0.0, f64::INFINITY);
        for block in self.domain.grid(9) {
            for [u, v] in block {
                let d = (self.point(u, v) - q).norm();
                if d < best.2 {
                    best = (u, v, d);
                }
            }
        }
        let (mut u, mut v, mut dist) = best;
        for _ in 0..40 {
            let (p, fu, fv) = self.eval(u, v);
            let r = q - &p;
            let (a, b, c) = (fu.dot(&fu), fu.dot(&fv), fv.dot(&fv));
            let (gu, gv) = (fu.dot(&r), fv.dot(&r));
            let det = a * c - b * b;
            if det.abs() < 1e-300 {
                break;
            }
            let du = (c * gu - b * gv) / det;
            let dv = (a * gv - b * gu) / det;
            let mut accepted = false;
            let mut scale = 1.0;
            for _ in 0..30 {
                let [nu, nv] = self.domain.clamp(u + scale * du, v + scale * dv);
                let nd = (self.point(nu, nv) - q).norm();
                if nd < dist {
                    accepted = (u - nu).abs() + (v - nv).abs() > 0.0;
                    u = nu;
                    v = nv;
                    dist = nd;
                    break;
                }
                scale *= 0.5;
            }
            if !accepted || dist < 1e-15 {
                break;
            }
        }
        (u, v, dist)
    }
}

/// Orientation sign of a face relative to its parametrization `(∂u, ∂v)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    Positive,
    Negative,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }

    pub fn from_sign(sign: i32) -> Result<Self> {
        match sign {
            1 => Ok(Orientation::Positive),
            -1 => Ok(Orientation::Negative),
            other => Err(Error::InvalidArgument(format!("orientation must be +1 or -1, got {other}"))),
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Orientation::Positive => Orientation::Negative,
            Orientation::Negative => Orientation::Positive,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub name: String,
    pub patch: Patch,
    pub orientation: Orientation,
    pub calibration: ConstantForm,
}

impl Face {
    pub fn new(name: impl Into<String>, patch: Patch, orientation: Orientation, calibration: ConstantForm) -> Result<Self> {
        let name = name.into();
        if calibration.degree() != 2 || calibration.dim() != patch.dim() {
            return Err(Error::Shape(format!(
                "face '{name}' in R^{} needs a 2-form calibration, got a {}-form on R^{}",
                patch.dim(),
                calibration.degree(),
                calibration.dim()
            )));
        }
        Ok(Self { name, patch, orientation, calibration })
    }

    pub fn dim(&self) -> usize {
        self.patch.dim()
    }

    /// Same calibration, opposite orientation.
    pub fn flipped(&self) -> Self {
        Self { orientation: self.orientation.flipped(), ..self.clone() }
    }

    /// Opposite orientation together with its correspondent calibration `−ω`.
    pub fn reversed(&self) -> Self {
        Self {
            orientation: self.orientation.flipped(),
            calibration: self.calibration.scaled(-1.0),
            ..self.clone()
        }
    }

    /// Oriented frame from raw partials: `(fu, fv)` or `(fv, fu)`.
    pub(crate) fn orient(&self, fu: Vector, fv: Vector) -> [Vector; 2] {
        match self.orientation {
            Orientation::Positive => [fu, fv],
            Orientation::Negative => [fv, fu],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CurveKind {
    Segment { a: Vector, b: Vector },
    /// Image under a patch map of a parameter-plane path.
    Trace { patch: Patch, path: ParamPath },
}

/// A regular curve on `s ∈ [0, 1]`; its parametrization direction is the
/// edge's reference orientation.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeCurve {
    pub name: String,
    pub kind: CurveKind,
}

impl EdgeCurve {
    pub fn segment(name: impl Into<String>, a: Vector, b: Vector) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Shape("segment endpoints of differing dimension".into()));
        }
        Ok(Self { name: name.into(), kind: CurveKind::Segment { a, b } })
    }

    pub fn trace(name: impl Into<String>, patch: Patch, path: ParamPath) -> Self {
        Self { name: name.into(), kind: CurveKind::Trace { patch, path } }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            CurveKind::Segment { a, .. } => a.len(),
            CurveKind::Trace { patch, .. } => patch.dim(),
        }
    }

    /// Point and derivative at `s`.
    pub fn eval(&self, s: f64) -> (Vector, Vector) {
        match &self.kind {
            CurveKind::Segment { a, b } => (a + (b - a) * s, b - a),
            CurveKind::Trace { patch, path } => {
                let [u, v] = path.point(s);
                let [tu, tv] = path.tangent(s);
                let (p, fu, fv) = patch.eval(u, v);
                (p, fu * tu + fv * tv)
            }
        }
    }

    pub fn point(&self, s: f64) -> Vector {
        self.eval(s).0
    }

    /// Smallest derivative norm over `samples + 1` equispaced parameters.
    pub fn min_speed(&self, samples: usize) -> f64 {
        (0..=samples.max(1))
            .map(|i| self.eval(i as f64 / samples.max(1) as f64).1.norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from `q` to the curve (scan plus golden-section refinement).
    pub fn distance_to(&self, q: &Vector) -> f64 {
        minimize_on_unit(|s| (self.point(s) - q).norm()).1
    }
}

/// Approximate global minimiser of `f` on `[0, 1]`: 128-cell scan followed
/// by golden-section search in the best bracket. Returns `(argmin, min)`.
fn minimize_on_unit(f: impl Fn(f64) -> f64) -> (f64, f64) {
    const CELLS: usize = 128;
    let mut best_i = 0;
    let mut best = f64::INFINITY;
    for i in 0..=CELLS {
        let val = f(i as f64 / CELLS as f64);
        if val < best {
            best = val;
            best_i = i;
        }
    }
    let mut lo = (best_i.saturating_sub(1)) as f64 / CELLS as f64;
    let mut hi = ((best_i + 1).min(CELLS)) as f64 / CELLS as f64;
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..120 {
        if hi - lo < 1e-16 {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let (x, fx) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if fx < best {
        (x, fx)
    } else {
        (best_i as f64 / CELLS as f64, best)
    }
}

/// Point and oriented tangent frame of a face at `(u, v)`.
pub fn tangent_frame(face: &Face, u: f64, v: f64) -> Result<(Vector, KFrame)> {
    if !face.patch.domain.contains(u, v, DOMAIN_SLACK) {
        return Err(Error::OutsideDomain { u, v });
    }
    let (p, fu, fv) = face.patch.eval(u, v);
    Ok((p, KFrame::new(face.orient(fu, fv).to_vec())))
}

/// `√(|a|²|b|² − (a·b)²)`, the area of the parallelogram spanned by `a, b`.
pub fn gram_area(a: &Vector, b: &Vector) -> f64 {
    let aa = a.dot(a);
    let bb = b.dot(b);
    let ab = a.dot(b);
    (aa * bb - ab * ab).max(0.0).sqrt()
}

pub fn area_element(face: &Face, u: f64, v: f64) -> Result<f64> {
    if !face.patch.domain.contains(u, v, DOMAIN_SLACK) {
        return Err(Error::OutsideDomain { u, v });
    }
    let (_, fu, fv) = face.patch.eval(u, v);
    checked_area(&fu, &fv, u, v)
}

pub(crate) fn checked_area(fu: &Vector, fv: &Vector, u: f64, v: f64) -> Result<f64> {
    let value = gram_area(fu, fv);
    if !(value >= DEGENERACY_THRESHOLD) {
        return Err(Error::Degenerate { u, v, value });
    }
    Ok(value)
}

pub fn face_area(face: &Face, quad_order: usize) -> Result<f64> {
    face.patch.domain.integrate(quad_order, |u, v| {
        let (_, fu, fv) = face.patch.eval(u, v);
        checked_area(&fu, &fv, u, v)
    })
}

/// `∫_F ω`, respecting the face orientation.
pub fn flux(face: &Face, form: &ConstantForm, quad_order: usize) -> Result<f64> {
    if form.degree() != 2 || form.dim() != face.dim() {
        return Err(Error::Shape(format!(
            "flux of a {}-form on R^{} through a face in R^{}",
            form.degree(),
            form.dim(),
            face.dim()
        )));
    }
    face.patch.domain.integrate(quad_order, |u, v| {
        let (_, fu, fv) = face.patch.eval(u, v);
        Ok(evaluate_unchecked(form, &face.orient(fu, fv)))
    })
}

/// Max over sampled interior points of `|ω(e₁, e₂) − 1|`, where `(e₁, e₂)`
/// is the orientation-preserving orthonormalization of the tangent frame.
pub fn calibration_residual(face: &Face, form: &ConstantForm, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidArgument("calibration residual needs at least one sample".into()));
    }
    if form.degree() != 2 || form.dim() != face.dim() {
        return Err(Error::Shape("calibration must be a 2-form on the face's ambient space".into()));
    }
    let mut rng = task_rng(seed, 0);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let [u, v] = face.patch.domain.sample_interior(&mut rng);
        let (_, fu, fv) = face.patch.eval(u, v);
        let value = gram_area(&fu, &fv);
        if !(value >= DEGENERACY_THRESHOLD) {
            return Err(Error::Degenerate { u, v, value });
        }
        let frame = KFrame::new(face.orient(fu, fv).to_vec());
        let ortho = frame.orthonormalized().ok_or(Error::Degenerate { u, v, value })?;
        worst = worst.max((evaluate_unchecked(form, ortho.vectors()) - 1.0).abs());
    }
    Ok(worst)
}

/// How an edge sits on a face's boundary: which boundary piece, and the
/// sampled monotone correspondence `s ↦ σ`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryMatch {
    pub segment: usize,
    /// `(s, σ)` pairs in increasing `s`.
    pub params: Vec<(f64, f64)>,
    /// Whether `σ` increases with `s`.
    pub increasing: bool,
    pub max_distance: f64,
}

impl BoundaryMatch {
    /// Range of `σ` covered by the edge on its boundary piece.
    pub fn sigma_range(&self) -> (f64, f64) {
        let first = self.params.first().map(|p| p.1).unwrap_or(0.0);
        let last = self.params.last().map(|p| p.1).unwrap_or(0.0);
        (first.min(last), first.max(last))
    }
}

fn project_onto_path(patch: &Patch, path: &ParamPath, q: &Vector) -> (f64, f64) {
    minimize_on_unit(|sigma| {
        let [u, v] = path.point(sigma);
        (patch.point(u, v) - q).norm()
    })
}

/// Checks that every sample of `edge` lies within `tol` of one boundary
/// piece of the face with a monotone parameter correspondence.
pub fn boundary_contains(face: &Face, edge: &EdgeCurve, tol: f64, samples: usize) -> Option<BoundaryMatch> {
    if edge.dim() != face.dim() {
        return None;
    }
    let samples = samples.max(2);
    let points: Vec<(f64, Vector)> = (0..samples)
        .map(|i| {
            let s = i as f64 / (samples - 1) as f64;
            (s, edge.point(s))
        })
        .collect();
    'segments: for (index, path) in face.patch.domain.boundary().iter().enumerate() {
        let mut params = Vec::with_capacity(samples);
        let mut max_distance = 0.0f64;
        for (s, q) in &points {
            let (sigma, dist) = project_onto_path(&face.patch, path, q);
            if !(dist <= tol) {
                continue 'segments;
            }
            max_distance = max_distance.max(dist);
            params.push((*s, sigma));
        }
        let increasing = params.windows(2).all(|w| w[1].1 > w[0].1);
        let decreasing = params.windows(2).all(|w| w[1].1 < w[0].1);
        if increasing || decreasing {
            return Some(BoundaryMatch { segment: index, params, increasing, max_distance });
        }
    }
    None
}

/// Outward-conormal-first induced orientation of `edge` at parameter `s`:
/// `+1` when `(ν, τ)` is positively oriented in the oriented tangent plane
/// of the face, with `ν` the outward unit conormal and `τ` the edge tangent.
pub fn induced_edge_sign(face: &Face, edge: &EdgeCurve, s: f64) -> Result<i8> {
    let not_on_boundary = || Error::NotOnBoundary { edge: edge.name.clone(), face: face.name.clone() };
    if edge.dim() != face.dim() {
        return Err(not_on_boundary());
    }
    let (q, tau) = edge.eval(s);
    let mut chosen: Option<(f64, ParamPath, f64)> = None;
    for path in face.patch.domain.boundary() {
        let (sigma, dist) = project_onto_path(&face.patch, &path, &q);
        if dist > EDGE_TOLERANCE {
            continue;
        }
        let [u, v] = path.point(sigma);
        let [tu, tv] = path.tangent(sigma);
        let (_, fu, fv) = face.patch.eval(u, v);
        let t = &fu * tu + &fv * tv;
        let align = (t.dot(&tau) / (t.norm() * tau.norm())).abs();
        if chosen.as_ref().is_none_or(|c| align > c.2) {
            chosen = Some((sigma, path, align));
        }
    }
    let (sigma, path, _) = chosen.ok_or_else(not_on_boundary)?;
    let [u, v] = path.point(sigma);
    let [tu, tv] = path.tangent(sigma);
    // Rotating a counterclockwise tangent clockwise gives the outward normal.
    let (nu, nv) = (tv, -tu);
    let (_, fu, fv) = face.patch.eval(u, v);
    let t = &fu * tu + &fv * tv;
    let n = &fu * nu + &fv * nv;
    let conormal = &n - &t * (n.dot(&t) / t.dot(&t));
    let [a, b] = face.orient(fu, fv);
    let pairing = conormal.dot(&a) * tau.dot(&b) - conormal.dot(&b) * tau.dot(&a);
    let scale = conormal.norm() * tau.norm() * gram_area(&a, &b);
    if !(pairing.abs() > 1e-9 * scale) {
        return Err(Error::Degenerate { u, v, value: pairing });
    }
    Ok(if pairing > 0.0 { 1 } else { -1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::linear_combine;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn dx12(n: usize) -> ConstantForm {
        ConstantForm::from_terms(n, &[(&[1, 2], 1.0)]).unwrap()
    }

    fn kaehler0() -> ConstantForm {
        ConstantForm::from_terms(4, &[(&[1, 3], 1.0), (&[2, 4], 1.0)]).unwrap()
    }

    fn r_star() -> f64 {
        ((5f64.sqrt() - 1.0) / 2.0).sqrt()
    }

    fn flat_face(domain: PatchDomain) -> Face {
        let patch = Patch::affine(v(&[0.0, 0.0, 0.0]), v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0]), domain).unwrap();
        Face::new("flat", patch, Orientation::Positive, dx12(3)).unwrap()
    }

    fn face_d() -> Face {
        let patch = Patch::new(PatchDomain::QuarterDisk { radius: r_star() }, PatchMap::Holomorphic).unwrap();
        Face::new("D", patch, Orientation::Positive, kaehler0()).unwrap()
    }

    #[test]
    fn tangent_frame_examples() {
        let flat = flat_face(PatchDomain::unit_square());
        let (p, fr) = tangent_frame(&flat, 0.25, 0.5).unwrap();
        assert_eq!(p, v(&[0.25, 0.5, 0.0]));
        assert_eq!(fr, KFrame::from_slices(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]));

        let d = face_d();
        let (u, w) = (0.3, 0.2);
        let (p, fr) = tangent_frame(&d, u, w).unwrap();
        assert_eq!(p, v(&[u, u * u - w * w, w, 2.0 * u * w]));
        let fu = v(&[1.0, 2.0 * u, 0.0, 2.0 * w]);
        let fv = v(&[0.0, -2.0 * w, 1.0, 2.0 * u]);
        assert_eq!(fr, KFrame::new(vec![fu.clone(), fv.clone()]));
        let (_, flipped) = tangent_frame(&d.flipped(), u, w).unwrap();
        assert_eq!(flipped, KFrame::new(vec![fv, fu]));

        assert!(matches!(tangent_frame(&d, 0.7, 0.7), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn area_element_examples() {
        let flat = flat_face(PatchDomain::unit_square());
        assert_eq!(area_element(&flat, 0.5, 0.5).unwrap(), 1.0);
        let d = face_d();
        let (u, w) = (0.3, 0.2);
        assert!((area_element(&d, u, w).unwrap() - (1.0 + 4.0 * (u * u + w * w))).abs() < 1e-14);

        let scaled = Patch::affine(v(&[0.0; 3]), v(&[3.0, 0.0, 0.0]), v(&[0.0, 3.0, 0.0]), PatchDomain::unit_square()).unwrap();
        let scaled = Face::new("s", scaled, Orientation::Positive, dx12(3)).unwrap();
        assert_eq!(area_element(&scaled, 0.5, 0.5).unwrap(), 9.0);

        let degenerate = Patch::affine(v(&[0.0; 3]), v(&[1.0, 0.0, 0.0]), v(&[2.0, 0.0, 0.0]), PatchDomain::unit_square()).unwrap();
        let degenerate = Face::new("z", degenerate, Orientation::Positive, dx12(3)).unwrap();
        assert!(matches!(area_element(&degenerate, 0.5, 0.5), Err(Error::Degenerate { .. })));
        assert!(matches!(face_area(&degenerate, 4), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn face_area_examples() {
        let quarter = flat_face(PatchDomain::QuarterDisk { radius: 1.0 });
        assert!((face_area(&quarter, 32).unwrap() - std::f64::consts::FRAC_PI_4).abs() < 1e-8);
        let square = flat_face(PatchDomain::unit_square());
        assert_eq!(face_area(&square, 8).unwrap(), 1.0);
        // radial oracle (π/2)∫₀^{r*}(1+4ρ²)ρ dρ = (π/2)(1 − t/2), t = (√5−1)/2
        let t = (5f64.sqrt() - 1.0) / 2.0;
        let oracle = std::f64::consts::FRAC_PI_2 * (1.0 - t / 2.0);
        let area = face_area(&face_d(), 64).unwrap();
        assert!((area - oracle).abs() < 1e-12);
        assert!((area - 1.0853936).abs() < 1e-6);
        assert!(face_area(&square, 1).is_err());
    }

    #[test]
    fn polygon_area() {
        let tri = flat_face(PatchDomain::unit_triangle());
        assert!((face_area(&tri, 4).unwrap() - 0.5).abs() < 1e-15);
        let hex: Vec<[f64; 2]> = (0..6)
            .map(|k| {
                let a = k as f64 * std::f64::consts::PI / 3.0;
                [a.cos(), a.sin()]
            })
            .collect();
        let hex = flat_face(PatchDomain::Polygon { vertices: hex });
        assert!((face_area(&hex, 4).unwrap() - 1.5 * 3f64.sqrt()).abs() < 1e-14);
        let cw = PatchDomain::Polygon { vertices: vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]] };
        assert!(cw.validate().is_err());
    }

    #[test]
    fn flux_examples() {
        let d = face_d();
        let area = face_area(&d, 32).unwrap();
        let f = flux(&d, &kaehler0(), 32).unwrap();
        assert!((f - area).abs() < 1e-8);
        let zero = ConstantForm::zero(4, 2).unwrap();
        assert_eq!(flux(&d, &zero, 16).unwrap(), 0.0);
        assert!((flux(&d.flipped(), &kaehler0(), 32).unwrap() + f).abs() < 1e-15);
        assert!(flux(&d, &dx12(3), 8).is_err());
    }

    #[test]
    fn calibration_residual_examples() {
        let d = face_d();
        assert!(calibration_residual(&d, &kaehler0(), 10_000, 11).unwrap() <= 1e-9);
        assert!((calibration_residual(&d.flipped(), &kaehler0(), 1_000, 11).unwrap() - 2.0).abs() < 1e-9);
        let flat = flat_face(PatchDomain::unit_square());
        assert!(calibration_residual(&flat, &dx12(3), 100, 1).unwrap() <= 1e-12);
        assert!(calibration_residual(&flat, &dx12(3), 0, 1).is_err());
    }

    #[test]
    fn boundary_contains_examples() {
        let d = face_d();
        let r = r_star();
        let parabola = EdgeCurve::trace("E", d.patch.clone(), ParamPath::Line { from: [0.0, 0.0], to: [r, 0.0] });
        // (s·r*, (s·r*)², 0, 0)
        let (p, _) = parabola.eval(0.5);
        assert!((p - v(&[0.5 * r, 0.25 * r * r, 0.0, 0.0])).norm() < 1e-16);
        let m = boundary_contains(&d, &parabola, EDGE_TOLERANCE, 32).expect("parabola lies on D's boundary");
        assert_eq!(m.segment, 0);
        assert!(m.increasing);

        let axis = EdgeCurve::segment("x4", v(&[0.0; 4]), v(&[0.0, 0.0, 0.0, 1.0])).unwrap();
        assert!(boundary_contains(&d, &axis, EDGE_TOLERANCE, 32).is_none());

        let quarter = flat_face(PatchDomain::QuarterDisk { radius: 1.0 });
        let arc = EdgeCurve::trace(
            "arc",
            quarter.patch.clone(),
            ParamPath::Arc { radius: 1.0, start: 0.0, end: FRAC_PI_2 },
        );
        let m = boundary_contains(&quarter, &arc, EDGE_TOLERANCE, 32).expect("arc is on the boundary");
        assert_eq!(m.segment, 1);
    }

    #[test]
    fn induced_sign_half_plane() {
        let u = v(&[1.0, 0.0, 0.0]);
        let t = v(&[0.0, 0.0, 1.0]);
        let patch = Patch::affine(v(&[0.0; 3]), u, t.clone(), PatchDomain::unit_square()).unwrap();
        let calib = ConstantForm::from_terms(3, &[(&[1, 3], 1.0)]).unwrap();
        let face = Face::new("H", patch, Orientation::Positive, calib).unwrap();
        let edge = EdgeCurve::segment("L", v(&[0.0; 3]), t).unwrap();
        assert_eq!(induced_edge_sign(&face, &edge, 0.5).unwrap(), -1);
        assert_eq!(induced_edge_sign(&face.flipped(), &edge, 0.5).unwrap(), 1);
        let reversed = EdgeCurve::segment("L'", v(&[0.0, 0.0, 1.0]), v(&[0.0; 3])).unwrap();
        assert_eq!(induced_edge_sign(&face, &reversed, 0.5).unwrap(), 1);

        let off = EdgeCurve::segment("off", v(&[0.5, 0.0, 0.0]), v(&[0.5, 0.0, 1.0])).unwrap();
        assert!(matches!(induced_edge_sign(&face, &off, 0.5), Err(Error::NotOnBoundary { .. })));
    }

    #[test]
    fn closest_point_recovers_parameters() {
        let d = face_d();
        let q = d.patch.point(0.3, 0.4);
        let (u, w, dist) = d.patch.closest_point(&q);
        assert!(dist < 1e-12, "{dist}");
        assert!((u - 0.3).abs() < 1e-9 && (w - 0.4).abs() < 1e-9);
        let far = v(&[0.0, 0.0, 0.0, 5.0]);
        assert!(d.patch.closest_point(&far).2 > 4.0);
    }

    #[test]
    fn flux_is_linear_in_form() {
        let d = face_d();
        let a = kaehler0();
        let b = ConstantForm::from_terms(4, &[(&[1, 2], 0.4), (&[3, 4], -1.3), (&[1, 4], 0.2)]).unwrap();
        let combo = linear_combine(&[(2.5, &a), (-0.7, &b)]).unwrap();
        let lhs = flux(&d, &combo, 24).unwrap();
        let rhs = 2.5 * flux(&d, &a, 24).unwrap() - 0.7 * flux(&d, &b, 24).unwrap();
        assert!((lhs - rhs).abs() < 1e-10);
    }
}
