use serde::Serialize;

use super::eig::{diameter, general_eig};
use super::{determinant, CMatrix, C64};
use crate::error::{Error, Result};

/// Monic polynomial `sum_n a_n x^n`, coefficients stored from `a_0` up.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCoeffs {
    coeffs: Vec<C64>,
}

impl PolyCoeffs {
    /// Normalizes by the leading coefficient so that `a_k = 1` exactly.
    pub fn monic(mut coeffs: Vec<C64>) -> Result<Self> {
        while coeffs.len() > 1 && coeffs.last().map_or(false, |c| c.norm() == 0.0) {
            coeffs.pop();
        }
        let lead = *coeffs.last().ok_or_else(|| Error::domain("empty coefficient list"))?;
        if lead.norm() == 0.0 {
            return Err(Error::domain("zero polynomial"));
        }
        let k = coeffs.len() - 1;
        for c in coeffs.iter_mut().take(k) {
            *c /= lead;
        }
        coeffs[k] = C64::new(1.0, 0.0);
        Ok(Self { coeffs })
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Self::monic(coeffs.iter().map(|&c| C64::new(c, 0.0)).collect())
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `a_0, ..., a_k`.
    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn eval(&self, x: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * x + c)
    }

    fn eval_with_derivative(&self, x: C64) -> (C64, C64) {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp)
    }

    /// All roots via simultaneous Aberth iteration.
    pub fn roots(&self) -> Result<Vec<C64>> {
        let k = self.degree();
        if k == 0 {
            return Ok(vec![]);
        }
        if k == 1 {
            return Ok(vec![-self.coeffs[0]]);
        }
        // Cauchy bound on root moduli
        let radius = 1.0 + self.coeffs[..k].iter().map(|c| c.norm()).fold(0.0, f64::max);
        let center = -self.coeffs[k - 1] / k as f64;
        let mut z: Vec<C64> = (0..k)
            .map(|j| {
                let theta = 2.0 * std::f64::consts::PI * (j as f64 + 0.25) / k as f64 + 0.4;
                center + C64::from_polar(0.5 * radius, theta)
            })
            .collect();
        let tol = 4.0 * f64::EPSILON * radius;
        for _ in 0..500 {
            let mut moved = 0.0f64;
            for i in 0..k {
                let (p, dp) = self.eval_with_derivative(z[i]);
                if p.norm() == 0.0 {
                    continue;
                }
                let ratio = p / dp;
                let repulsion: C64 = (0..k)
                    .filter(|&j| j != i)
                    .map(|j| {
                        let d = z[i] - z[j];
                        if d.norm() == 0.0 {
                            C64::new(0.0, 0.0)
                        } else {
                            d.inv()
                        }
                    })
                    .sum();
                let step = ratio / (C64::new(1.0, 0.0) - ratio * repulsion);
                if step.is_finite() {
                    z[i] -= step;
                    moved = moved.max(step.norm());
                }
            }
            if moved <= tol {
                return Ok(z);
            }
        }
        // Multiple roots converge only linearly; what we have is still as
        // accurate as the coefficients allow.
        if z.iter().all(|v| v.is_finite()) {
            Ok(z)
        } else {
            Err(Error::NumericalFailure("polynomial root iteration diverged".into()))
        }
    }
}

/// Characteristic polynomial `det(xI - A)` by the Faddeev-LeVerrier trace
/// recursion.
pub fn char_poly(a: &CMatrix) -> PolyCoeffs {
    assert!(a.is_square(), "char_poly requires a square matrix");
    let k = a.nrows();
    let mut coeffs = vec![C64::new(0.0, 0.0); k + 1];
    coeffs[k] = C64::new(1.0, 0.0);
    let identity = CMatrix::identity(k, k);
    let mut m = CMatrix::zeros(k, k);
    for step in 1..=k {
        m = a * &m + &identity * coeffs[k - step + 1];
        let am = a * &m;
        coeffs[k - step] = -am.trace() / step as f64;
    }
    PolyCoeffs { coeffs }
}

/// `(2k-1) x (2k-1)` Sylvester matrix of `p` and `p'`: `k-1` shifted rows of
/// `a_k ... a_0` followed by `k` shifted rows of `k a_k ... a_1`.
pub fn sylvester_matrix(p: &PolyCoeffs) -> Result<CMatrix> {
    let k = p.degree();
    if k == 0 {
        return Err(Error::domain("Sylvester matrix needs degree at least 1"));
    }
    let size = 2 * k - 1;
    let a = p.coeffs();
    let mut s = CMatrix::zeros(size, size);
    for row in 0..k - 1 {
        for (j, n) in (0..=k).rev().enumerate() {
            s[(row, row + j)] = a[n];
        }
    }
    for r in 0..k {
        let row = k - 1 + r;
        for (j, n) in (1..=k).rev().enumerate() {
            s[(row, r + j)] = a[n] * n as f64;
        }
    }
    Ok(s)
}

/// `F(A) = (-1)^{k(k-1)/2} det S(char_poly(A))`; `1` for `1 x 1` input.
pub fn discriminant(a: &CMatrix) -> C64 {
    let k = a.nrows();
    if k <= 1 {
        return C64::new(1.0, 0.0);
    }
    let s = sylvester_matrix(&char_poly(a)).expect("degree >= 2");
    let det = determinant(&s);
    if (k * (k - 1) / 2) % 2 == 1 {
        -det
    } else {
        det
    }
}

/// `prod_{i<j} (x_j - x_i)^2`.
pub fn discriminant_from_roots(values: &[C64]) -> C64 {
    let mut f = C64::new(1.0, 0.0);
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            let d = values[j] - values[i];
            f *= d * d;
        }
    }
    f
}

#[derive(Debug, Clone, Serialize)]
pub struct SimplicityReport {
    pub simple: bool,
    pub min_gap: f64,
    pub diameter: f64,
    /// `|F|^{1/(k(k-1))} / (diameter + 1)`, comparable to the normalized gap.
    pub normalized_discriminant: f64,
}

/// Simple iff the smallest eigenvalue distance exceeds
/// `gap_tol * (diameter + 1)`.
pub fn is_simple(a: &CMatrix, gap_tol: f64) -> Result<SimplicityReport> {
    let k = a.nrows();
    if k > 32 {
        return Err(Error::domain("is_simple supports matrices up to 32 x 32"));
    }
    let spectrum = general_eig(a, gap_tol)?;
    let values = &spectrum.values;
    let mut min_gap = f64::INFINITY;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            min_gap = min_gap.min((values[i] - values[j]).norm());
        }
    }
    let diameter = diameter(values);
    let normalized_discriminant = if k <= 1 {
        1.0 / (diameter + 1.0)
    } else {
        discriminant(a).norm().powf(1.0 / (k * (k - 1)) as f64) / (diameter + 1.0)
    };
    Ok(SimplicityReport {
        simple: k <= 1 || min_gap > gap_tol * (diameter + 1.0),
        min_gap: if k <= 1 { f64::INFINITY } else { min_gap },
        diameter,
        normalized_discriminant,
    })
}
