//! Sample containers: periodic fields on the torus, compactly supported fields
//! on the line, and two-point kernels.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn fft_forward(samples: &[f64]) -> Vec<Complex<f64>> {
    let n = samples.len();
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_forward(n);
        fft.process(&mut buf);
    });
    buf
}

pub(crate) fn fft_inverse_real(mut spectrum: Vec<Complex<f64>>) -> Vec<f64> {
    let n = spectrum.len();
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_inverse(n);
        fft.process(&mut spectrum);
    });
    spectrum.iter().map(|c| c.re / n as f64).collect()
}

/// Signed frequency of FFT bin `k` for length `n` (0, 1, .., n/2, -n/2+1, .., -1).
pub(crate) fn signed_freq(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// N uniform samples of a real function on the torus T = [0, 2pi), N a power of two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicField {
    samples: Vec<f64>,
}

impl PeriodicField {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        let n = samples.len();
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidField(format!(
                "periodic field needs a power-of-two sample count >= 8, got {n}"
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidField("non-finite sample".into()));
        }
        Ok(Self { samples })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..n).map(|k| f(2.0 * PI * k as f64 / n as f64)).collect())
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    /// Construct without validation; used on hot paths where the length is
    /// known and finiteness is checked separately.
    pub(crate) fn from_parts(samples: Vec<f64>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Parameter of the k-th node, xi_k = 2 pi k / N.
    pub fn node(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.samples.len() as f64
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |a, &v| a.max(v.abs()))
    }

    /// Fourier coefficients c_k with f(xi) = sum c_k e^{i k xi} (fftfreq bin order).
    pub fn spectrum(&self) -> Vec<Complex<f64>> {
        let n = self.samples.len() as f64;
        fft_forward(&self.samples).into_iter().map(|c| c / n).collect()
    }

    /// Apply a multiplier m(k) on signed frequencies and transform back.
    pub fn apply_multiplier(&self, m: impl Fn(i64) -> Complex<f64>) -> PeriodicField {
        let n = self.samples.len();
        let mut spec = fft_forward(&self.samples);
        for (k, c) in spec.iter_mut().enumerate() {
            *c *= m(signed_freq(k, n));
        }
        PeriodicField {
            samples: fft_inverse_real(spec),
        }
    }

    /// Spectral derivative; the Nyquist mode is dropped (odd multiplier).
    pub fn derivative(&self) -> PeriodicField {
        let n = self.samples.len() as i64;
        self.apply_multiplier(|k| {
            if 2 * k == n {
                Complex::new(0.0, 0.0)
            } else {
                Complex::new(0.0, k as f64)
            }
        })
    }

    /// Band-limited interpolant for off-grid evaluation.
    pub fn interpolant(&self) -> TrigInterpolant {
        TrigInterpolant::new(self)
    }
}

/// Real trigonometric interpolant of a [`PeriodicField`].
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    a0: f64,
    // cos/sin coefficients for k = 1..=n/2 (Nyquist carries only cos)
    cos_c: Vec<f64>,
    sin_c: Vec<f64>,
}

impl TrigInterpolant {
    fn new(field: &PeriodicField) -> Self {
        let n = field.len();
        let spec = field.spectrum();
        let half = n / 2;
        let mut cos_c = vec![0.0; half];
        let mut sin_c = vec![0.0; half];
        for k in 1..half {
            cos_c[k - 1] = 2.0 * spec[k].re;
            sin_c[k - 1] = -2.0 * spec[k].im;
        }
        cos_c[half - 1] = spec[half].re;
        sin_c[half - 1] = 0.0;
        TrigInterpolant {
            a0: spec[0].re,
            cos_c,
            sin_c,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = self.a0;
        // recurrence for cos(kx), sin(kx)
        let (s1, c1) = x.sin_cos();
        let mut ck = c1;
        let mut sk = s1;
        for k in 0..self.cos_c.len() {
            acc += self.cos_c[k] * ck + self.sin_c[k] * sk;
            let cn = ck * c1 - sk * s1;
            let sn = sk * c1 + ck * s1;
            ck = cn;
            sk = sn;
            let _ = k;
        }
        acc
    }
}

/// Uniform samples of a compactly supported real function on [-L, L].
///
/// x_j = -L + j dx with dx = 2L/(M-1); both endpoints are nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineField {
    half_width: f64,
    samples: Vec<f64>,
    /// inclusive index range of nonzero samples; empty field encodes as None
    support: Option<(usize, usize)>,
}

impl LineField {
    pub fn new(half_width: f64, samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 8 {
            return Err(Error::InvalidField(format!(
                "line field needs >= 8 samples, got {}",
                samples.len()
            )));
        }
        if !(half_width > 0.0) {
            return Err(Error::InvalidField("half width must be positive".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidField("non-finite sample".into()));
        }
        let support = support_of(&samples);
        Ok(Self {
            half_width,
            samples,
            support,
        })
    }

    pub fn from_fn(half_width: f64, m: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let dx = 2.0 * half_width / (m - 1) as f64;
        Self::new(
            half_width,
            (0..m).map(|j| f(-half_width + j as f64 * dx)).collect(),
        )
    }

    pub fn zeros(half_width: f64, m: usize) -> Result<Self> {
        Self::new(half_width, vec![0.0; m])
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / (self.samples.len() - 1) as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |a, &v| a.max(v.abs()))
    }

    /// Inclusive nonzero index range, if any sample is nonzero.
    pub fn support(&self) -> Option<(usize, usize)> {
        self.support
    }

    /// Largest |x| over the support, or 0 for the zero field.
    pub fn support_radius(&self) -> f64 {
        match self.support {
            None => 0.0,
            Some((a, b)) => self.node(a).abs().max(self.node(b).abs()),
        }
    }

    /// Value at x by linear interpolation, zero outside the grid.
    pub fn eval(&self, x: f64) -> f64 {
        let t = (x + self.half_width) / self.dx();
        if t < 0.0 || t > (self.samples.len() - 1) as f64 {
            return 0.0;
        }
        let j = (t.floor() as usize).min(self.samples.len() - 2);
        let frac = t - j as f64;
        self.samples[j] * (1.0 - frac) + self.samples[j + 1] * frac
    }

    /// Fourth-order centered differences (one-sided second order at the ends).
    pub fn derivative(&self) -> LineField {
        let m = self.samples.len();
        let dx = self.dx();
        let s = &self.samples;
        let mut d = vec![0.0; m];
        for j in 2..m - 2 {
            d[j] = (-s[j + 2] + 8.0 * s[j + 1] - 8.0 * s[j - 1] + s[j - 2]) / (12.0 * dx);
        }
        d[0] = (s[1] - s[0]) / dx;
        d[1] = (s[2] - s[0]) / (2.0 * dx);
        d[m - 2] = (s[m - 1] - s[m - 3]) / (2.0 * dx);
        d[m - 1] = (s[m - 1] - s[m - 2]) / dx;
        LineField {
            half_width: self.half_width,
            support: support_of(&d),
            samples: d,
        }
    }

    /// Trapezoid moments (m0, m1, m2) = int f, int x f, int x^2 f.
    pub fn moments(&self) -> (f64, f64, f64) {
        let dx = self.dx();
        let m = self.samples.len();
        let mut out = (0.0, 0.0, 0.0);
        for (j, &v) in self.samples.iter().enumerate() {
            let w = if j == 0 || j == m - 1 { dx / 2.0 } else { dx };
            let x = self.node(j);
            out.0 += w * v;
            out.1 += w * x * v;
            out.2 += w * x * x * v;
        }
        out
    }

    /// Zero-pad onto a grid `factor` times wider (same dx).
    pub fn extend(&self, factor: usize) -> LineField {
        let m = self.samples.len();
        let extra = (factor - 1) * (m / 2);
        let mut samples = vec![0.0; m + 2 * extra];
        samples[extra..extra + m].copy_from_slice(&self.samples);
        LineField {
            half_width: self.half_width + extra as f64 * self.dx(),
            support: self.support.map(|(a, b)| (a + extra, b + extra)),
            samples,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> LineField {
        let samples: Vec<f64> = self.samples.iter().map(|&v| f(v)).collect();
        LineField {
            half_width: self.half_width,
            support: support_of(&samples),
            samples,
        }
    }

    /// Pointwise product with another field on the same grid.
    pub fn mul(&self, other: &LineField) -> Result<LineField> {
        self.check_same_grid(other)?;
        let samples: Vec<f64> = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a * b)
            .collect();
        Ok(LineField {
            half_width: self.half_width,
            support: support_of(&samples),
            samples,
        })
    }

    pub(crate) fn check_same_grid(&self, other: &LineField) -> Result<()> {
        if self.samples.len() != other.samples.len()
            || (self.half_width - other.half_width).abs() > 1e-12 * self.half_width
        {
            return Err(Error::InvalidField("mismatched line grids".into()));
        }
        Ok(())
    }

    pub(crate) fn from_parts(half_width: f64, samples: Vec<f64>) -> LineField {
        LineField {
            half_width,
            support: support_of(&samples),
            samples,
        }
    }
}

fn support_of(samples: &[f64]) -> Option<(usize, usize)> {
    let a = samples.iter().position(|&v| v != 0.0)?;
    let b = samples.iter().rposition(|&v| v != 0.0)?;
    Some((a, b))
}

/// A kernel of two real arguments with a prescribed diagonal limit.
#[derive(Clone)]
pub struct TwoPointField {
    eval: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    diag: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl TwoPointField {
    pub fn new(
        eval: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        diag: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            eval: Arc::new(eval),
            diag: Arc::new(diag),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_, _| c, move |_| c)
    }

    /// Q[f](x, y) = (f(x) - f(y))/(x - y) with diagonal f'(x), from line samples.
    pub fn diff_quotient(f: &LineField) -> Self {
        let fp = f.derivative();
        let f = f.clone();
        let near = 1e-9;
        let fp2 = fp.clone();
        Self::new(
            move |x, y| {
                if (x - y).abs() < near {
                    fp.eval(0.5 * (x + y))
                } else {
                    (f.eval(x) - f.eval(y)) / (x - y)
                }
            },
            move |x| fp2.eval(x),
        )
    }

    /// Evaluate at (x, y), using the diagonal rule when x == y.
    pub fn at(&self, x: f64, y: f64) -> f64 {
        if x == y {
            (self.diag)(x)
        } else {
            (self.eval)(x, y)
        }
    }

    pub fn diag_at(&self, x: f64) -> f64 {
        (self.diag)(x)
    }
}

/// Torus difference quotient Q[f](x,y) = (f(x)-f(y)) (1/2) cot((x-y)/2),
/// the periodization of (f(x)-f(y))/(x-y); diagonal value f'(x).
pub fn diff_quotient_torus(f: &PeriodicField) -> TwoPointField {
    let fp = f.derivative();
    let fi = f.interpolant();
    let fpi = fp.interpolant();
    let fpi2 = fp.interpolant();
    TwoPointField::new(
        move |x, y| {
            let half = 0.5 * (x - y);
            if half.sin().abs() < 1e-9 {
                fpi.eval(0.5 * (x + y))
            } else {
                (fi.eval(x) - fi.eval(y)) * 0.5 / half.tan()
            }
        },
        move |x| fpi2.eval(x),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spectral_round_trip() {
        let f = PeriodicField::from_fn(256, |x| (3.0 * x).cos() + 0.5 * (7.0 * x).sin()).unwrap();
        let back = PeriodicField {
            samples: fft_inverse_real(fft_forward(f.samples())),
        };
        for (a, b) in f.samples().iter().zip(back.samples()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn spectral_derivative_of_cos() {
        let f = PeriodicField::from_fn(128, |x| (5.0 * x).cos()).unwrap();
        let d = f.derivative();
        for k in 0..f.len() {
            assert_abs_diff_eq!(d.samples()[k], -5.0 * (5.0 * f.node(k)).sin(), epsilon = 1e-10);
        }
    }

    #[test]
    fn interpolant_matches_nodes_and_midpoints() {
        let f = PeriodicField::from_fn(64, |x| (2.0 * x).sin() - 0.3 * (9.0 * x).cos()).unwrap();
        let it = f.interpolant();
        for k in 0..f.len() {
            let x = f.node(k);
            assert_abs_diff_eq!(it.eval(x), f.samples()[k], epsilon = 1e-11);
            let xm = x + PI / f.len() as f64;
            assert_abs_diff_eq!(it.eval(xm), (2.0 * xm).sin() - 0.3 * (9.0 * xm).cos(), epsilon = 1e-10);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(PeriodicField::new(vec![0.0; 100]).is_err());
    }

    #[test]
    fn line_field_support_and_moments() {
        let f = LineField::from_fn(2.0, 512, |x| if x.abs() < 1.0 { 1.0 - x * x } else { 0.0 })
            .unwrap();
        let (a, b) = f.support().unwrap();
        assert!(f.node(a) > -1.01 && f.node(b) < 1.01);
        let (m0, m1, _) = f.moments();
        assert_abs_diff_eq!(m0, 4.0 / 3.0, epsilon = 1e-4);
        assert_abs_diff_eq!(m1, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn line_derivative_fourth_order() {
        let f = LineField::from_fn(3.0, 1024, |x| (-x * x).exp()).unwrap();
        let d = f.derivative();
        let mut worst: f64 = 0.0;
        for j in 10..f.len() - 10 {
            let x = f.node(j);
            worst = worst.max((d.samples()[j] - (-2.0 * x * (-x * x).exp())).abs());
        }
        assert!(worst < 1e-8, "worst = {worst:.3e}");
    }

    #[test]
    fn diff_quotient_examples() {
        // f(x) = x^2 on a grid containing 1 and 3: Q(3,1) = 4
        let f = LineField::from_fn(4.0, 1025, |x| x * x).unwrap();
        let q = TwoPointField::diff_quotient(&f);
        assert_abs_diff_eq!(q.at(3.0, 1.0), 4.0, epsilon = 1e-9);
        // f(x) = x: Q = 1 everywhere including the diagonal
        let g = LineField::from_fn(4.0, 1025, |x| x).unwrap();
        let q = TwoPointField::diff_quotient(&g);
        assert_abs_diff_eq!(q.at(0.25, -1.5), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(q.at(0.5, 0.5), 1.0, epsilon = 1e-6);
    }
}
