//! Wavefront OBJ export of configurations.

use std::fmt::Write as _;

use crate::criterion::Configuration;
use crate::{Error, Matrix, Result, Vector};

/// Allowed deviation of `P Pᵀ` from the identity for user-supplied projections.
const PROJECTION_TOL: f64 = 1e-9;

/// Map from the ambient space to R³.
#[derive(Clone, Debug, PartialEq)]
pub enum Projection {
    /// Keep the first three coordinates (pad with zeros below R³).
    DropTrailing,
    /// Orthographic projection by a `3 × n` matrix with orthonormal rows.
    Orthographic(Matrix),
}

impl Projection {
    pub fn orthographic(matrix: Matrix) -> Result<Self> {
        if matrix.nrows() != 3 {
            return Err(Error::Shape(format!("projection needs 3 rows, got {}", matrix.nrows())));
        }
        let gram = &matrix * matrix.transpose();
        let defect = (gram - Matrix::identity(3, 3)).amax();
        if defect > PROJECTION_TOL {
            return Err(Error::NotOrthonormal(defect));
        }
        Ok(Projection::Orthographic(matrix))
    }

    pub fn project(&self, x: &Vector) -> Result<[f64; 3]> {
        match self {
            Projection::DropTrailing => Ok([0, 1, 2].map(|i| x.get(i).copied().unwrap_or(0.0))),
            Projection::Orthographic(m) => {
                if m.ncols() != x.len() {
                    return Err(Error::Shape(format!(
                        "projection expects R^{}, configuration lives in R^{}",
                        m.ncols(),
                        x.len()
                    )));
                }
                let y = m * x;
                Ok([y[0], y[1], y[2]])
            }
        }
    }
}

/// Nine significant digits, `%.9g` style: fixed notation for moderate
/// exponents, trailing zeros removed, `0` for both zeros.
pub fn fmt_g9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent in scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// OBJ text: one `g` group per face, each face sampled on `res × res`
/// parameter grids (one per fan triangle for polygons) with two triangles
/// per grid cell.
pub fn export_obj(config: &Configuration, res: usize, projection: &Projection) -> Result<String> {
    if res < 2 {
        return Err(Error::InvalidArgument(format!("mesh resolution must be at least 2, got {res}")));
    }
    let mut out = String::new();
    let mut base = 1usize;
    for face in config.faces() {
        let _ = writeln!(out, "g {}", face.name);
        let blocks = face.patch.domain.grid(res);
        for block in &blocks {
            for &[u, v] in block {
                let p = projection.project(&face.patch.point(u, v))?;
                let _ = writeln!(out, "v {} {} {}", fmt_g9(p[0]), fmt_g9(p[1]), fmt_g9(p[2]));
            }
        }
        for _ in &blocks {
            for i in 0..res - 1 {
                for j in 0..res - 1 {
                    let a = base + i * res + j;
                    let b = a + res;
                    let _ = writeln!(out, "f {} {} {}", a, b, b + 1);
                    let _ = writeln!(out, "f {} {} {}", a, b + 1, a + 1);
                }
            }
            base += res * res;
        }
    }
    Ok(out)
}
