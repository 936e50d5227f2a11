//! The per-edge minimality criterion.
//!
//! A [`Configuration`] is a list of calibrated faces and the singular edges
//! where they meet. For each edge the checker searches for face orientations
//! that induce one common orientation on the edge and whose correspondent
//! calibrations (`sᵢ·ωᵢ` for the chosen signs `sᵢ`) sum to zero. A pass
//! certifies these hypotheses up to the stated tolerances; the comass part is
//! an optimized lower bound and therefore reported as "estimated". For
//! polyhedral configurations a failing edge is evidence that the union is
//! not area-minimizing.
//!
//! Signs are chosen independently per edge. A face with several edges may get
//! different signs on different edges; the checker does not try to reconcile
//! them globally.

use std::collections::{BTreeSet, HashMap};

use crate::exterior::{comass, linear_combine, ConstantForm};
use crate::surfaces::{
    boundary_contains, calibration_residual, face_area, induced_edge_sign, BoundaryMatch, EdgeCurve, Face,
    EDGE_TOLERANCE,
};
use crate::{map_indexed, Error, Result, Vector};

/// Samples used to establish boundary correspondences.
pub const MATCH_SAMPLES: usize = 64;
/// Largest incidence the exhaustive sign search accepts.
pub const MAX_INCIDENT_FACES: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeIncidence {
    pub edge: EdgeCurve,
    /// Indices into [`Configuration::faces`].
    pub faces: Vec<usize>,
    /// Per incident face, the boundary correspondence (if the edge is on it).
    pub correspondences: Vec<Option<BoundaryMatch>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    faces: Vec<Face>,
    edges: Vec<EdgeIncidence>,
    face_edges: Vec<Vec<usize>>,
}

impl Configuration {
    /// Resolves face names, computes boundary correspondences and the
    /// per-face edge lists.
    pub fn new(faces: Vec<Face>, edges: Vec<(EdgeCurve, Vec<String>)>) -> Result<Self> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        for (i, face) in faces.iter().enumerate() {
            if index.insert(face.name.as_str(), i).is_some() {
                return Err(Error::DuplicateName(face.name.clone()));
            }
        }
        let mut edge_names = BTreeSet::new();
        let mut incidences = Vec::with_capacity(edges.len());
        for (edge, names) in edges {
            if !edge_names.insert(edge.name.clone()) {
                return Err(Error::DuplicateName(edge.name.clone()));
            }
            if names.len() < 2 {
                return Err(Error::InvalidArgument(format!(
                    "edge '{}' needs at least two incident faces",
                    edge.name
                )));
            }
            let mut ids = Vec::with_capacity(names.len());
            for name in &names {
                let id = *index.get(name.as_str()).ok_or_else(|| Error::UnknownFace(name.clone()))?;
                if ids.contains(&id) {
                    return Err(Error::DuplicateName(name.clone()));
                }
                ids.push(id);
            }
            let correspondences = ids
                .iter()
                .map(|&id| boundary_contains(&faces[id], &edge, EDGE_TOLERANCE, MATCH_SAMPLES))
                .collect();
            incidences.push(EdgeIncidence { edge, faces: ids, correspondences });
        }
        let mut face_edges = vec![Vec::new(); faces.len()];
        for (e, inc) in incidences.iter().enumerate() {
            for &f in &inc.faces {
                face_edges[f].push(e);
            }
        }
        Ok(Self { faces, edges: incidences, face_edges })
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn edges(&self) -> &[EdgeIncidence] {
        &self.edges
    }

    /// Edges lying on face `face` (the set `J_F`).
    pub fn face_edges(&self, face: usize) -> &[usize] {
        &self.face_edges[face]
    }

    pub fn face_index(&self, name: &str) -> Option<usize> {
        self.faces.iter().position(|f| f.name == name)
    }

    pub fn edge_index(&self, name: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.edge.name == name)
    }

    pub fn dim(&self) -> usize {
        self.faces.first().map(|f| f.dim()).unwrap_or(0)
    }

    /// Rebuilds the configuration without the named edge.
    pub fn without_edge(&self, name: &str) -> Result<Self> {
        let edges = self
            .edges
            .iter()
            .filter(|e| e.edge.name != name)
            .map(|e| (e.edge.clone(), e.faces.iter().map(|&f| self.faces[f].name.clone()).collect()))
            .collect();
        Self::new(self.faces.clone(), edges)
    }

    /// Replaces one face (same name) and recomputes correspondences.
    pub fn with_face(&self, face: Face) -> Result<Self> {
        let mut faces = self.faces.clone();
        let slot = self.face_index(&face.name).ok_or_else(|| Error::UnknownFace(face.name.clone()))?;
        faces[slot] = face;
        let edges = self
            .edges
            .iter()
            .map(|e| (e.edge.clone(), e.faces.iter().map(|&f| self.faces[f].name.clone()).collect()))
            .collect();
        Self::new(faces, edges)
    }

    pub fn total_area(&self, quad_order: usize) -> Result<f64> {
        let mut total = 0.0;
        for face in &self.faces {
            total += face_area(face, quad_order)?;
        }
        Ok(total)
    }

    /// Points sampled on the boundary `∂Σ`: every face's domain boundary
    /// minus the open stretches covered by its declared singular edges.
    pub fn boundary_samples(&self, per_piece: usize) -> Vec<Vector> {
        let per_piece = per_piece.max(2);
        let mut out = Vec::new();
        for (f, face) in self.faces.iter().enumerate() {
            let covered: Vec<(usize, f64, f64)> = self.face_edges[f]
                .iter()
                .filter_map(|&e| {
                    let inc = &self.edges[e];
                    let slot = inc.faces.iter().position(|&x| x == f)?;
                    let m = inc.correspondences[slot].as_ref()?;
                    let (lo, hi) = m.sigma_range();
                    Some((m.segment, lo, hi))
                })
                .collect();
            for (b, path) in face.patch.domain.boundary().iter().enumerate() {
                for k in 0..per_piece {
                    let sigma = k as f64 / (per_piece - 1) as f64;
                    let on_edge = covered
                        .iter()
                        .any(|&(seg, lo, hi)| seg == b && sigma > lo + 1e-9 && sigma < hi - 1e-9);
                    if !on_edge {
                        let [u, v] = path.point(sigma);
                        out.push(face.patch.point(u, v));
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Finding {
    pub severity: Severity,
    pub message: String,
}

impl Finding {
    fn error(message: String) -> Self {
        Self { severity: Severity::Error, message }
    }

    fn warning(message: String) -> Self {
        Self { severity: Severity::Warning, message }
    }
}

const COINCIDENCE_GRID: usize = 17;
const MIN_COINCIDENT_POINTS: usize = 3;

/// Structural checks: edges on the boundary of every incident face, regular
/// edge curves, and no undeclared coincidence between two faces.
pub fn validate_configuration(config: &Configuration, tol: f64) -> Vec<Finding> {
    let mut findings = Vec::new();
    for inc in &config.edges {
        for (slot, corr) in inc.correspondences.iter().enumerate() {
            if corr.is_none() {
                findings.push(Finding::error(format!(
                    "edge '{}' does not lie on the boundary of face '{}'",
                    inc.edge.name, config.faces[inc.faces[slot]].name
                )));
            }
        }
        let speed = inc.edge.min_speed(64);
        if !(speed > 1e-12) {
            findings.push(Finding::error(format!("edge '{}' is not a regular curve", inc.edge.name)));
        }
    }

    let nfaces = config.faces.len();
    let pairs: Vec<(usize, usize)> = (0..nfaces).flat_map(|a| (0..nfaces).filter(move |&b| b != a).map(move |b| (a, b))).collect();
    let counts = map_indexed(pairs.len(), |p| {
        let (a, b) = pairs[p];
        undeclared_coincidences(config, a, b, tol)
    });
    for (p, count) in counts.into_iter().enumerate() {
        let (a, b) = pairs[p];
        if a < b && count >= MIN_COINCIDENT_POINTS {
            findings.push(Finding::warning(format!(
                "faces '{}' and '{}' coincide at {count} sampled points not covered by a declared edge",
                config.faces[a].name, config.faces[b].name
            )));
        }
    }
    findings
}

/// Distinct grid points of face `a` within `tol` of face `b` and not on an
/// edge declared for both.
fn undeclared_coincidences(config: &Configuration, a: usize, b: usize, tol: f64) -> usize {
    let shared: Vec<&EdgeCurve> = config.face_edges[a]
        .iter()
        .filter(|e| config.face_edges[b].contains(e))
        .map(|&e| &config.edges[e].edge)
        .collect();
    let fa = &config.faces[a];
    let fb = &config.faces[b];
    if fa.dim() != fb.dim() {
        return 0;
    }
    let mut hits: Vec<Vector> = Vec::new();
    for block in fa.patch.domain.grid(COINCIDENCE_GRID) {
        for [u, v] in block {
            let p = fa.patch.point(u, v);
            if hits.iter().any(|h| (h - &p).norm() <= 10.0 * tol) {
                continue;
            }
            if fb.patch.closest_point(&p).2 >= tol {
                continue;
            }
            if shared.iter().any(|e| e.distance_to(&p) < tol) {
                continue;
            }
            hits.push(p);
        }
    }
    hits.len()
}

/// Induced orientation signs of every incident face along the edge, sampled
/// at `samples` interior parameters; errors if a sign varies.
pub fn induced_signs(config: &Configuration, edge: usize, samples: usize) -> Result<Vec<i8>> {
    let inc = &config.edges[edge];
    let samples = samples.max(1);
    let mut signs = Vec::with_capacity(inc.faces.len());
    for (slot, &f) in inc.faces.iter().enumerate() {
        let face = &config.faces[f];
        if inc.correspondences[slot].is_none() {
            return Err(Error::NotOnBoundary { edge: inc.edge.name.clone(), face: face.name.clone() });
        }
        let mut sign: Option<i8> = None;
        for m in 0..samples {
            let s = (m as f64 + 0.5) / samples as f64;
            let here = induced_edge_sign(face, &inc.edge, s)?;
            match sign {
                None => sign = Some(here),
                Some(prev) if prev != here => {
                    return Err(Error::SignVaries { edge: inc.edge.name.clone(), face: face.name.clone() })
                }
                _ => {}
            }
        }
        signs.push(sign.expect("at least one sample"));
    }
    Ok(signs)
}

/// Every sign vector `s ∈ {±1}^k` for which the flipped faces all induce
/// the same orientation on the edge. Exhaustive over `2^k` candidates,
/// enumerated with bit `i` of the counter meaning `sᵢ = −1`.
pub fn feasible_edge_signs(config: &Configuration, edge: usize, samples: usize) -> Result<Vec<Vec<i8>>> {
    let k = config.edges[edge].faces.len();
    if k > MAX_INCIDENT_FACES {
        return Err(Error::InvalidArgument(format!(
            "edge '{}' has {k} incident faces; the exhaustive search supports at most {MAX_INCIDENT_FACES}",
            config.edges[edge].edge.name
        )));
    }
    let induced = induced_signs(config, edge, samples)?;
    let mut feasible = Vec::new();
    for mask in 0u32..(1u32 << k) {
        let signs: Vec<i8> = (0..k).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
        let first = signs[0] * induced[0];
        if signs.iter().zip(&induced).all(|(s, i)| s * i == first) {
            feasible.push(signs);
        }
    }
    Ok(feasible)
}

#[derive(Clone, Debug, PartialEq)]
pub enum EdgeStatus {
    Pass,
    /// Orientations agree but no choice makes the calibrations cancel.
    NonvanishingSum,
    OrientationInconsistent,
    NotOnBoundary,
    SignVaries,
    Irregular,
}

impl EdgeStatus {
    pub fn label(&self) -> &'static str {
        match self {
            EdgeStatus::Pass => "pass",
            EdgeStatus::NonvanishingSum => "nonvanishing-sum",
            EdgeStatus::OrientationInconsistent => "orientation-inconsistent",
            EdgeStatus::NotOnBoundary => "not-on-boundary",
            EdgeStatus::SignVaries => "sign-varies",
            EdgeStatus::Irregular => "irregular-edge",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeReport {
    pub name: String,
    pub faces: Vec<String>,
    pub induced_signs: Vec<i8>,
    pub feasible: Vec<Vec<i8>>,
    /// `min_s max|coeff(Σ sᵢωᵢ)|`; infinite when nothing is feasible.
    pub residual: f64,
    pub witness: Option<Vec<i8>>,
    pub status: EdgeStatus,
    pub pass: bool,
}

/// Max-abs coefficient of `Σ sᵢ ωᵢ` for the given signs.
pub fn signed_sum_residual(config: &Configuration, edge: usize, signs: &[i8]) -> Result<f64> {
    let inc = &config.edges[edge];
    let terms: Vec<(f64, &ConstantForm)> = inc
        .faces
        .iter()
        .zip(signs)
        .map(|(&f, &s)| (s as f64, &config.faces[f].calibration))
        .collect();
    Ok(linear_combine(&terms)?.max_abs_coefficient())
}

pub fn check_edge(config: &Configuration, edge: usize, tol_sum: f64, samples: usize) -> Result<EdgeReport> {
    let inc = &config.edges[edge];
    let mut report = EdgeReport {
        name: inc.edge.name.clone(),
        faces: inc.faces.iter().map(|&f| config.faces[f].name.clone()).collect(),
        induced_signs: Vec::new(),
        feasible: Vec::new(),
        residual: f64::INFINITY,
        witness: None,
        status: EdgeStatus::OrientationInconsistent,
        pass: false,
    };
    if !(inc.edge.min_speed(64) > 1e-12) {
        report.status = EdgeStatus::Irregular;
        return Ok(report);
    }
    match induced_signs(config, edge, samples) {
        Ok(signs) => report.induced_signs = signs,
        Err(Error::NotOnBoundary { .. }) => {
            report.status = EdgeStatus::NotOnBoundary;
            return Ok(report);
        }
        Err(Error::SignVaries { .. }) => {
            report.status = EdgeStatus::SignVaries;
            return Ok(report);
        }
        Err(e) => return Err(e),
    }
    report.feasible = feasible_edge_signs(config, edge, samples)?;
    for signs in &report.feasible {
        let r = signed_sum_residual(config, edge, signs)?;
        if r < report.residual {
            report.residual = r;
            report.witness = Some(signs.clone());
        }
    }
    if report.witness.is_none() {
        report.status = EdgeStatus::OrientationInconsistent;
    } else if report.residual <= tol_sum {
        report.status = EdgeStatus::Pass;
        report.pass = true;
    } else {
        report.status = EdgeStatus::NonvanishingSum;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tolerances {
    pub tol_sum: f64,
    pub tol_cal: f64,
    pub tol_comass: f64,
    pub edge_samples: usize,
    pub calibration_samples: usize,
    pub comass_restarts: usize,
    pub validation_tol: f64,
    pub seed: u64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_sum: 1e-10,
            tol_cal: 1e-8,
            tol_comass: 1e-4,
            edge_samples: 16,
            calibration_samples: 256,
            comass_restarts: 16,
            validation_tol: EDGE_TOLERANCE,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FaceReport {
    pub name: String,
    pub calibration_residual: f64,
    /// Optimized lower bound on the comass of the face's calibration.
    pub comass_estimate: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionReport {
    pub findings: Vec<Finding>,
    pub faces: Vec<FaceReport>,
    pub edges: Vec<EdgeReport>,
    pub tolerances: Tolerances,
    pub pass: bool,
}

impl CriterionReport {
    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Error)
    }

    pub const COMASS_STATUS: &'static str = "estimated";
}

pub fn check_configuration(config: &Configuration, tolerances: &Tolerances) -> Result<CriterionReport> {
    let findings = validate_configuration(config, tolerances.validation_tol);
    let face_results = map_indexed(config.faces.len(), |i| -> Result<FaceReport> {
        let face = &config.faces[i];
        let residual = calibration_residual(face, &face.calibration, tolerances.calibration_samples, tolerances.seed)?;
        let estimate = comass(&face.calibration, tolerances.comass_restarts, tolerances.seed)?;
        Ok(FaceReport {
            name: face.name.clone(),
            calibration_residual: residual,
            comass_estimate: estimate,
            pass: residual <= tolerances.tol_cal && estimate <= 1.0 + tolerances.tol_comass,
        })
    });
    let faces = face_results.into_iter().collect::<Result<Vec<_>>>()?;
    let edges = map_indexed(config.edges.len(), |e| {
        check_edge(config, e, tolerances.tol_sum, tolerances.edge_samples)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let pass = faces.iter().all(|f| f.pass) && edges.iter().all(|e| e.pass);
    Ok(CriterionReport { findings, faces, edges, tolerances: tolerances.clone(), pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::plane_dual_form;
    use crate::exterior::KFrame;
    use crate::surfaces::{Orientation, Patch, PatchDomain};

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn sheet(name: &str, dir: &[f64], orientation: Orientation) -> Face {
        let u = v(dir).normalize();
        let t = v(&[0.0, 0.0, 1.0]);
        let patch = Patch::affine(v(&[0.0; 3]), u.clone(), t.clone(), PatchDomain::unit_square()).unwrap();
        let calib = plane_dual_form(&KFrame::new(vec![u, t])).unwrap();
        Face::new(name, patch, orientation, calib).unwrap()
    }

    fn axis() -> EdgeCurve {
        EdgeCurve::segment("axis", v(&[0.0; 3]), v(&[0.0, 0.0, 1.0])).unwrap()
    }

    #[test]
    fn unresolved_and_duplicate_names_are_rejected() {
        let a = sheet("a", &[1.0, 0.0, 0.0], Orientation::Positive);
        let b = sheet("b", &[-1.0, 0.0, 0.0], Orientation::Positive);
        let err = Configuration::new(vec![a.clone(), b.clone()], vec![(axis(), vec!["a".into(), "zz".into()])]);
        assert_eq!(err.unwrap_err(), Error::UnknownFace("zz".into()));
        let err = Configuration::new(vec![a.clone(), a.clone()], vec![]);
        assert!(matches!(err, Err(Error::DuplicateName(_))));
        let err = Configuration::new(vec![a, b], vec![(axis(), vec!["a".into()])]);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn two_face_edge_with_opposite_orientations() {
        // Same plane, opposite halves; orientations opposite.
        let a = sheet("a", &[1.0, 0.0, 0.0], Orientation::Positive);
        let b = sheet("b", &[-1.0, 0.0, 0.0], Orientation::Negative);
        let config = Configuration::new(vec![a, b], vec![(axis(), vec!["a".into(), "b".into()])]).unwrap();
        let feasible = feasible_edge_signs(&config, 0, 8).unwrap();
        assert_eq!(feasible, vec![vec![-1, 1], vec![1, -1]]);
    }

    #[test]
    fn edge_off_the_face_is_an_error_finding() {
        let a = sheet("a", &[1.0, 0.0, 0.0], Orientation::Positive);
        let b = sheet("b", &[0.0, 1.0, 0.0], Orientation::Positive);
        let off = EdgeCurve::segment("off", v(&[0.5, 0.0, 0.0]), v(&[0.5, 0.0, 1.0])).unwrap();
        let config = Configuration::new(vec![a, b], vec![(off, vec!["a".into(), "b".into()])]).unwrap();
        let findings = validate_configuration(&config, 1e-9);
        assert!(findings.iter().any(|f| f.severity == Severity::Error));
        let report = check_edge(&config, 0, 1e-10, 8).unwrap();
        assert_eq!(report.status, EdgeStatus::NotOnBoundary);
        assert!(!report.pass);
    }

    #[test]
    fn boundary_samples_skip_the_singular_edge() {
        let a = sheet("a", &[1.0, 0.0, 0.0], Orientation::Positive);
        let b = sheet("b", &[-1.0, 0.0, 0.0], Orientation::Positive);
        let config = Configuration::new(vec![a, b], vec![(axis(), vec!["a".into(), "b".into()])]).unwrap();
        let pts = config.boundary_samples(11);
        // Interior of the axis is excluded; its endpoints are kept.
        assert!(pts.iter().all(|p| !(p[0].abs() < 1e-12 && p[1].abs() < 1e-12 && p[2] > 1e-6 && p[2] < 1.0 - 1e-6)));
        assert!(pts.iter().any(|p| p.norm() < 1e-12));
        assert_eq!(pts.len(), 2 * (4 * 11 - 9));
    }
}
