//! Constant-coefficient exterior algebra on Rⁿ.
//!
//! A [`ConstantForm`] stores the coefficients of `Σ c_I dx_I` over strictly
//! increasing multi-indices. Because every coefficient is constant, every form
//! here is closed, which is all that is needed of a calibration besides the
//! comass bound.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Matrix4, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{map_indexed, task_rng, Error, Matrix, Result, Vector};

/// Coefficients with magnitude below this are dropped after combination.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// Central finite-difference step used by the comass ascent.
pub const COMASS_FD_STEP: f64 = 1e-6;
/// A restart ends once the squared norm of the projected gradient (the
/// first-order predicted gain) drops below this.
pub const COMASS_TOLERANCE: f64 = 1e-10;
pub const COMASS_MAX_ITERATIONS: usize = 500;

/// Strictly increasing tuple of zero-based coordinate indices.
///
/// Displayed one-based, e.g. `(1,3)` for `dx₁∧dx₃`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "multi-index {indices:?} is not strictly increasing"
            )));
        }
        Ok(Self(indices))
    }

    /// Builds a multi-index from one-based indices, as written in scene files.
    pub fn from_one_based(indices: &[usize]) -> Result<Self> {
        if indices.contains(&0) {
            return Err(Error::InvalidArgument("multi-index entries are one-based".into()));
        }
        Self::new(indices.iter().map(|i| i - 1).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    /// All strictly increasing `k`-subsets of `0..n` in lexicographic order.
    pub fn all(n: usize, k: usize) -> Vec<MultiIndex> {
        fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
            if cur.len() == k {
                out.push(MultiIndex(cur.clone()));
                return;
            }
            for i in start..n {
                cur.push(i);
                rec(i + 1, n, k, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        if k <= n {
            rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
        }
        out
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (pos, i) in self.0.iter().enumerate() {
            if pos > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, ")")
    }
}

/// An ordered list of `k` vectors in Rⁿ, standing for `v₁∧…∧v_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct KFrame(pub Vec<Vector>);

impl KFrame {
    pub fn new(vectors: Vec<Vector>) -> Self {
        Self(vectors)
    }

    pub fn from_slices(vectors: &[&[f64]]) -> Self {
        Self(vectors.iter().map(|v| Vector::from_column_slice(v)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.0.first().map(|v| v.len())
    }

    pub fn vectors(&self) -> &[Vector] {
        &self.0
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in self.0.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.dot(b) - target).abs());
            }
        }
        worst
    }

    /// Orientation-preserving Gram–Schmidt (two passes). `None` if the
    /// vectors are numerically dependent.
    pub fn orthonormalized(&self) -> Option<KFrame> {
        let mut out: Vec<Vector> = Vec::with_capacity(self.0.len());
        for v in &self.0 {
            let mut w = v.clone();
            for _ in 0..2 {
                for q in &out {
                    let c = q.dot(&w);
                    w.axpy(-c, q, 1.0);
                }
            }
            let norm = w.norm();
            if !(norm > 1e-300) || norm < 1e-14 * v.norm().max(1e-300) {
                return None;
            }
            out.push(w / norm);
        }
        Some(KFrame(out))
    }
}

/// Orthogonal n×n matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearIsometry {
    matrix: Matrix,
}

impl LinearIsometry {
    pub const TOLERANCE: f64 = 1e-12;

    pub fn new(matrix: Matrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Shape(format!(
                "isometry must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let n = matrix.nrows();
        let defect = (matrix.transpose() * &matrix - Matrix::identity(n, n)).amax();
        if !(defect <= Self::TOLERANCE) {
            return Err(Error::NotOrthogonal(defect));
        }
        Ok(Self { matrix })
    }

    pub fn identity(n: usize) -> Self {
        Self { matrix: Matrix::identity(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        &self.matrix * v
    }

    pub fn compose(&self, other: &LinearIsometry) -> LinearIsometry {
        LinearIsometry { matrix: &self.matrix * &other.matrix }
    }

    pub fn inverse(&self) -> LinearIsometry {
        LinearIsometry { matrix: self.matrix.transpose() }
    }
}

/// Degree-`k` alternating form on Rⁿ with constant coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantForm {
    n: usize,
    k: usize,
    coeffs: BTreeMap<MultiIndex, f64>,
}

impl ConstantForm {
    pub fn zero(n: usize, k: usize) -> Result<Self> {
        if k > n {
            return Err(Error::Shape(format!("degree {k} exceeds dimension {n}")));
        }
        Ok(Self { n, k, coeffs: BTreeMap::new() })
    }

    pub fn new(n: usize, k: usize, terms: impl IntoIterator<Item = (MultiIndex, f64)>) -> Result<Self> {
        let mut form = Self::zero(n, k)?;
        for (idx, c) in terms {
            if idx.degree() != k || idx.indices().iter().any(|&i| i >= n) {
                return Err(Error::Shape(format!("multi-index {idx} does not fit a {k}-form on R^{n}")));
            }
            *form.coeffs.entry(idx).or_insert(0.0) += c;
        }
        form.coeffs.retain(|_, c| *c != 0.0);
        Ok(form)
    }

    /// Convenience constructor from one-based index tuples, e.g.
    /// `from_terms(4, &[(&[1, 3], 1.0), (&[2, 4], 1.0)])` for `dx₁₃ + dx₂₄`.
    pub fn from_terms(n: usize, terms: &[(&[usize], f64)]) -> Result<Self> {
        let k = terms.first().map(|(i, _)| i.len()).unwrap_or(0);
        let parsed = terms
            .iter()
            .map(|(i, c)| MultiIndex::from_one_based(i).map(|m| (m, *c)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, k, parsed)
    }

    /// The 1-form `dx_i` (zero-based `i`).
    pub fn basis_covector(n: usize, i: usize) -> Result<Self> {
        Self::new(n, 1, [(MultiIndex::new(vec![i])?, 1.0)])
    }

    /// The metric dual `v♭` of a vector.
    pub fn covector(v: &Vector) -> Self {
        let coeffs = v
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| (MultiIndex(vec![i]), *c))
            .collect();
        Self { n: v.len(), k: 1, coeffs }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn coefficients(&self) -> &BTreeMap<MultiIndex, f64> {
        &self.coeffs
    }

    pub fn coefficient(&self, idx: &MultiIndex) -> f64 {
        self.coeffs.get(idx).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest coefficient magnitude; the residual measure of a vanishing sum.
    pub fn max_abs_coefficient(&self) -> f64 {
        self.coeffs.values().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        linear_combine(&[(factor, self)]).expect("single-term combination has matching shape")
    }
}

impl fmt::Display for ConstantForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        for (pos, (idx, c)) in self.coeffs.iter().enumerate() {
            if pos > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}·dx{idx}")?;
        }
        Ok(())
    }
}

fn determinant(m: &mut [f64], k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        _ => {
            let mut det = 1.0;
            for col in 0..k {
                let pivot = (col..k)
                    .max_by(|&a, &b| m[a * k + col].abs().total_cmp(&m[b * k + col].abs()))
                    .unwrap();
                if m[pivot * k + col] == 0.0 {
                    return 0.0;
                }
                if pivot != col {
                    for j in 0..k {
                        m.swap(pivot * k + j, col * k + j);
                    }
                    det = -det;
                }
                let p = m[col * k + col];
                det *= p;
                for row in col + 1..k {
                    let factor = m[row * k + col] / p;
                    for j in col..k {
                        m[row * k + j] -= factor * m[col * k + j];
                    }
                }
            }
            det
        }
    }
}

/// `ω(v₁,…,v_k) = Σ_I c_I · det(frame rows I)`.
pub fn evaluate(form: &ConstantForm, frame: &KFrame) -> Result<f64> {
    if frame.len() != form.k {
        return Err(Error::Shape(format!(
            "{}-form evaluated on {} vectors",
            form.k,
            frame.len()
        )));
    }
    if frame.vectors().iter().any(|v| v.len() != form.n) {
        return Err(Error::Shape(format!("frame vectors must live in R^{}", form.n)));
    }
    Ok(evaluate_unchecked(form, frame.vectors()))
}

pub(crate) fn evaluate_unchecked(form: &ConstantForm, vectors: &[Vector]) -> f64 {
    let k = form.k;
    let mut minor = vec![0.0; k * k];
    let mut total = 0.0;
    for (idx, c) in &form.coeffs {
        for (a, &row) in idx.indices().iter().enumerate() {
            for (b, v) in vectors.iter().enumerate() {
                minor[a * k + b] = v[row];
            }
        }
        total += c * determinant(&mut minor, k);
    }
    total
}

/// Sign of the permutation sorting `seq`, or `None` if an index repeats.
fn sort_sign(seq: &mut [usize]) -> Option<f64> {
    let mut sign = 1.0;
    for i in 1..seq.len() {
        let mut j = i;
        while j > 0 && seq[j - 1] > seq[j] {
            seq.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if seq.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

pub fn wedge(a: &ConstantForm, b: &ConstantForm) -> Result<ConstantForm> {
    if a.n != b.n {
        return Err(Error::Shape(format!("wedge of forms on R^{} and R^{}", a.n, b.n)));
    }
    let degree = a.k + b.k;
    if degree > a.n {
        return Err(Error::Shape(format!("wedge degree {degree} exceeds dimension {}", a.n)));
    }
    let mut coeffs: BTreeMap<MultiIndex, f64> = BTreeMap::new();
    for (ia, ca) in &a.coeffs {
        for (ib, cb) in &b.coeffs {
            let mut seq: Vec<usize> = ia.indices().iter().chain(ib.indices()).copied().collect();
            if let Some(sign) = sort_sign(&mut seq) {
                *coeffs.entry(MultiIndex(seq)).or_insert(0.0) += sign * ca * cb;
            }
        }
    }
    coeffs.retain(|_, c| c.abs() >= PRUNE_THRESHOLD);
    Ok(ConstantForm { n: a.n, k: degree, coeffs })
}

/// Coefficient-wise `Σ cᵢ ωᵢ`, pruning coefficients below [`PRUNE_THRESHOLD`].
pub fn linear_combine(terms: &[(f64, &ConstantForm)]) -> Result<ConstantForm> {
    let Some((_, first)) = terms.first() else {
        return Err(Error::InvalidArgument("empty linear combination".into()));
    };
    let (n, k) = (first.n, first.k);
    let mut coeffs: BTreeMap<MultiIndex, f64> = BTreeMap::new();
    for (scale, form) in terms {
        if form.n != n || form.k != k {
            return Err(Error::Shape(format!(
                "cannot combine a {}-form on R^{} with a {k}-form on R^{n}",
                form.k, form.n
            )));
        }
        for (idx, c) in &form.coeffs {
            *coeffs.entry(idx.clone()).or_insert(0.0) += scale * c;
        }
    }
    coeffs.retain(|_, c| c.abs() >= PRUNE_THRESHOLD);
    Ok(ConstantForm { n, k, coeffs })
}

/// `(R#ω)(v₁,…,v_k) = ω(R⁻¹v₁,…,R⁻¹v_k)`.
pub fn pushforward_isometry(form: &ConstantForm, rotation: &LinearIsometry) -> Result<ConstantForm> {
    if rotation.dim() != form.n {
        return Err(Error::Shape(format!(
            "{}x{} isometry applied to a form on R^{}",
            rotation.dim(),
            rotation.dim(),
            form.n
        )));
    }
    let inverse = rotation.matrix().transpose();
    let mut coeffs = BTreeMap::new();
    for idx in MultiIndex::all(form.n, form.k) {
        let frame: Vec<Vector> = idx.indices().iter().map(|&j| inverse.column(j).into_owned()).collect();
        let c = evaluate_unchecked(form, &frame);
        if c.abs() >= PRUNE_THRESHOLD {
            coeffs.insert(idx, c);
        }
    }
    Ok(ConstantForm { n: form.n, k: form.k, coeffs })
}

/// `v₁♭∧…∧v_k♭` for an orthonormal frame; the constant calibration of the
/// oriented plane the frame spans.
pub fn plane_dual_form(frame: &KFrame) -> Result<ConstantForm> {
    let Some(n) = frame.dim() else {
        return Err(Error::InvalidArgument("empty frame".into()));
    };
    if frame.vectors().iter().any(|v| v.len() != n) {
        return Err(Error::Shape("frame vectors of differing dimension".into()));
    }
    let defect = frame.orthonormality_defect();
    if !(defect <= 1e-10) {
        return Err(Error::NotOrthonormal(defect));
    }
    let mut acc = ConstantForm::covector(&frame.vectors()[0]);
    for v in &frame.vectors()[1..] {
        acc = wedge(&acc, &ConstantForm::covector(v))?;
    }
    Ok(acc)
}

/// Result of the comass ascent: the best value and the orthonormal frame
/// attaining it.
#[derive(Clone, Debug)]
pub struct ComassEstimate {
    pub value: f64,
    pub frame: KFrame,
    pub restart: usize,
}

/// Estimated comass (sup of ω over oriented orthonormal k-frames).
///
/// The value is attained on an actual orthonormal frame, so it is a lower
/// bound on the true comass up to roundoff; it is a heuristic estimate of the
/// supremum itself.
pub fn comass(form: &ConstantForm, restarts: usize, seed: u64) -> Result<f64> {
    comass_estimate(form, restarts, seed).map(|e| e.value)
}

pub fn comass_estimate(form: &ConstantForm, restarts: usize, seed: u64) -> Result<ComassEstimate> {
    let (n, k) = (form.n, form.k);
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!("comass needs 1 <= k < n, got k={k}, n={n}")));
    }
    if restarts == 0 {
        return Err(Error::InvalidArgument("comass needs at least one restart".into()));
    }
    let runs = map_indexed(restarts, |r| ascend(form, seed, r as u64));
    let mut best: Option<ComassEstimate> = None;
    for (restart, (value, frame)) in runs.into_iter().enumerate() {
        if best.as_ref().is_none_or(|b| value > b.value) {
            best = Some(ComassEstimate { value, frame, restart });
        }
    }
    Ok(best.expect("restarts >= 1"))
}

fn random_orthonormal_frame(rng: &mut impl Rng, n: usize, k: usize) -> KFrame {
    loop {
        let raw = KFrame(
            (0..k)
                .map(|_| Vector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal))))
                .collect(),
        );
        if let Some(frame) = raw.orthonormalized() {
            return frame;
        }
    }
}

/// Projected ascent on the Stiefel manifold of one random start.
fn ascend(form: &ConstantForm, seed: u64, restart: u64) -> (f64, KFrame) {
    let (n, k) = (form.n, form.k);
    let mut rng = task_rng(seed, restart);
    let mut frame = random_orthonormal_frame(&mut rng, n, k);
    let mut value = evaluate_unchecked(form, frame.vectors());
    // Maximising ω over oriented planes; flipping one vector flips the sign.
    if value < 0.0 {
        frame.0[0] = -frame.0[0].clone();
        value = -value;
    }
    let mut step = 0.5;
    let h = COMASS_FD_STEP;
    for _ in 0..COMASS_MAX_ITERATIONS {
        let mut grad: Vec<Vector> = vec![Vector::zeros(n); k];
        let mut probe = frame.0.clone();
        for a in 0..k {
            for i in 0..n {
                let orig = probe[a][i];
                probe[a][i] = orig + h;
                let plus = evaluate_unchecked(form, &probe);
                probe[a][i] = orig - h;
                let minus = evaluate_unchecked(form, &probe);
                probe[a][i] = orig;
                grad[a][i] = (plus - minus) / (2.0 * h);
            }
        }
        // Components inside the current span do not move the plane.
        for g in grad.iter_mut() {
            for q in &frame.0 {
                let c = q.dot(g);
                g.axpy(-c, q, 1.0);
            }
        }
        let gnorm2 = grad.iter().map(|g| g.norm_squared()).sum::<f64>();
        if gnorm2 < COMASS_TOLERANCE {
            break;
        }
        let retract = |step: f64| {
            KFrame(frame.0.iter().zip(&grad).map(|(v, g)| v + g * step).collect())
                .orthonormalized()
                .map(|c| {
                    let val = evaluate_unchecked(form, c.vectors());
                    (c, val)
                })
        };
        let mut improved = false;
        while step > 1e-12 {
            if let Some((mut candidate, mut cand_value)) = retract(step) {
                if cand_value - value >= 1e-4 * step * gnorm2 {
                    // Keep halving while it still helps: a full step can
                    // overshoot and zig-zag across the maximum.
                    while let Some((c, v)) = retract(step * 0.5) {
                        if v <= cand_value {
                            break;
                        }
                        candidate = c;
                        cand_value = v;
                        step *= 0.5;
                    }
                    frame = candidate;
                    value = cand_value;
                    step = (step * 2.0).min(1.0);
                    improved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (value, frame)
}

/// Exact comass of a 2-form on R⁴ from the spectrum of its skew matrix
/// `A[i][j] = ω(eᵢ, eⱼ)`: the eigenvalues are `±iλ₁, ±iλ₂` and the comass is
/// `max(λ₁, λ₂)`.
pub fn comass_2form_r4_oracle(form: &ConstantForm) -> Result<f64> {
    if form.n != 4 || form.k != 2 {
        return Err(Error::Shape(format!(
            "spectral comass needs a 2-form on R^4, got a {}-form on R^{}",
            form.k, form.n
        )));
    }
    let mut skew = Matrix4::<f64>::zeros();
    for (idx, c) in &form.coeffs {
        let (i, j) = (idx.indices()[0], idx.indices()[1]);
        skew[(i, j)] = *c;
        skew[(j, i)] = -*c;
    }
    // AᵀA is symmetric PSD with eigenvalues λ₁², λ₁², λ₂², λ₂².
    let gram = skew.transpose() * skew;
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l));
    Ok(top.max(0.0).sqrt())
}
