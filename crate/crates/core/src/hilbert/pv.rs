//! Principal-value quadrature on a uniform line grid.
//!
//! The scheme is a singularity-subtracted composite trapezoid with an exactly
//! integrated log window of width 4 dx around the target. For interior targets
//! the window algebra collapses to
//!
//!   PV_i = dx sum_{j != i} g_j/(x_i-x_j)
//!        - (dx/2) [g_0/(x_i-x_0) + g_{M-1}/(x_i-x_{M-1})]
//!        - (g_{i+1} - g_{i-1})/2,
//!
//! whose first term is a Toeplitz convolution, evaluated for all targets at
//! once by FFT. Far-field contributions beyond the grid are added in closed
//! form from a three-term 1/y asymptote, and support-edge nodes receive the
//! Navot h^{3/2} correction for sqrt-type endpoint behaviour.

use num_complex::Complex;

use crate::field::{fft_forward, fft_inverse_real};

/// zeta(-1/2), the Navot endpoint-correction constant.
const ZETA_MINUS_HALF: f64 = -0.207_886_224_977_354_57;

/// Far-field model f(y) ~ c1/y + c2/y^2 + c3/y^3 beyond the grid.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Asymptote {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Asymptote {
    pub fn is_zero(&self) -> bool {
        self.c1 == 0.0 && self.c2 == 0.0 && self.c3 == 0.0
    }

    /// Moments-to-asymptote for H[f] of a compactly supported f:
    /// H[f](y) ~ (m0/y + m1/y^2 + m2/y^3)/pi.
    pub fn from_moments(m0: f64, m1: f64, m2: f64) -> Self {
        use std::f64::consts::PI;
        Asymptote {
            c1: m0 / PI,
            c2: m1 / PI,
            c3: m2 / PI,
        }
    }

    /// Magnitude of the modeled field at the grid edge; the decay scale
    /// reported alongside truncated transforms.
    pub fn edge_magnitude(&self, y_max: f64) -> f64 {
        self.c1.abs() / y_max + self.c2.abs() / y_max.powi(2) + self.c3.abs() / y_max.powi(3)
    }
}

/// int_{|y|>Y} (x-y)^{-m} dy (PV at infinity for m = 1); |x| < Y.
pub(crate) fn tail_power(x: f64, y_max: f64, m: u32) -> f64 {
    if m == 1 {
        return ((y_max - x) / (y_max + x)).ln();
    }
    let p = 1.0 - m as f64;
    ((x + y_max).powf(p) - (x - y_max).powf(p)) / (m as f64 - 1.0)
}

/// int_{|y|>Y} (c1/y + c2/y^2 + c3/y^3)/(x-y) dy.
pub(crate) fn tail_cauchy(x: f64, y_max: f64, a: &Asymptote) -> f64 {
    if a.is_zero() {
        return 0.0;
    }
    let y = y_max;
    debug_assert!(x.abs() < y);
    let (i1, i2, i3) = if x.abs() < 0.05 * y {
        // series forms; the log difference cancels badly for small x
        let x2 = x * x;
        (
            -2.0 / y - 2.0 * x2 / (3.0 * y.powi(3)) - 2.0 * x2 * x2 / (5.0 * y.powi(5)),
            -2.0 * x / (3.0 * y.powi(3)) - 2.0 * x * x2 / (5.0 * y.powi(5)),
            -2.0 / (3.0 * y.powi(3)) - 2.0 * x2 / (5.0 * y.powi(5)),
        )
    } else {
        let l = ((y - x) / (y + x)).ln();
        (
            l / x,
            l / (x * x) + 2.0 / (x * y),
            l / (x * x * x) + 2.0 / (x * x * y),
        )
    };
    a.c1 * i1 + a.c2 * i2 + a.c3 * i3
}

/// PV quadrature engine for one uniform grid x_j = -L + j dx.
pub struct PvEngine {
    half_width: f64,
    m: usize,
    dx: f64,
    conv_len: usize,
    kernel_spec: Vec<Complex<f64>>,
}

impl PvEngine {
    pub fn new(half_width: f64, m: usize) -> Self {
        let dx = 2.0 * half_width / (m - 1) as f64;
        let conv_len = (2 * m).next_power_of_two();
        // kernel c_{i-j} = 1/((i-j) dx), laid out for circular convolution
        let mut kernel = vec![0.0; conv_len];
        for k in 1..m {
            kernel[k] = 1.0 / (k as f64 * dx); // i - j = +k
            kernel[conv_len - k] = -1.0 / (k as f64 * dx); // i - j = -k
        }
        let kernel_spec = fft_forward(&kernel);
        PvEngine {
            half_width,
            m,
            dx,
            conv_len,
            kernel_spec,
        }
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx
    }

    /// Raw PV integral of g(y)/(x_i - y) at a single target.
    pub fn pv_one(&self, g: &[f64], i: usize) -> f64 {
        debug_assert_eq!(g.len(), self.m);
        let m = self.m;
        let xi = self.x(i);
        if i >= 2 && i + 2 < m {
            let mut s = 0.0;
            for (j, &gj) in g.iter().enumerate() {
                if j != i {
                    s += gj / (xi - self.x(j));
                }
            }
            let mut v = self.dx * s;
            v -= 0.5 * self.dx * (g[0] / (xi - self.x(0)) + g[m - 1] / (xi - self.x(m - 1)));
            v -= 0.5 * (g[i + 1] - g[i - 1]);
            v
        } else {
            self.pv_edge(g, i)
        }
    }

    /// Edge targets: windowed quadrature with the singular node treated via a
    /// vanishing-at-target convention (fields are zero near the grid ends).
    fn pv_edge(&self, g: &[f64], i: usize) -> f64 {
        let m = self.m;
        let xi = self.x(i);
        let mut v = 0.0;
        for j in 0..m {
            if j == i {
                continue;
            }
            let w = if j == 0 || j == m - 1 { 0.5 } else { 1.0 };
            v += w * self.dx * g[j] / (xi - self.x(j));
        }
        v
    }

    /// Raw PV integral at every grid target (Toeplitz convolution + local fixes).
    pub fn pv_all(&self, g: &[f64]) -> Vec<f64> {
        debug_assert_eq!(g.len(), self.m);
        let m = self.m;
        let mut padded = vec![0.0; self.conv_len];
        padded[..m].copy_from_slice(g);
        let mut spec = fft_forward(&padded);
        for (c, k) in spec.iter_mut().zip(&self.kernel_spec) {
            *c *= k;
        }
        let conv = fft_inverse_real(spec);
        let mut out = vec![0.0; m];
        for i in 0..m {
            if i >= 2 && i + 2 < m {
                let xi = self.x(i);
                let mut v = self.dx * conv[i];
                v -= 0.5 * self.dx * (g[0] / (xi - self.x(0)) + g[m - 1] / (xi - self.x(m - 1)));
                v -= 0.5 * (g[i + 1] - g[i - 1]);
                out[i] = v;
            } else {
                out[i] = self.pv_edge(g, i);
            }
        }
        out
    }

    /// Navot endpoint correction for sqrt-type behaviour at the support edges,
    /// applied only when the support is strictly inside the grid.
    fn navot_correction(&self, g: &[f64], out: &mut [f64]) {
        let Some(first) = g.iter().position(|&v| v != 0.0) else {
            return;
        };
        let last = g.iter().rposition(|&v| v != 0.0).unwrap();
        if first == 0 || last + 1 == self.m {
            return;
        }
        for &e in &[first, last] {
            let ge = g[e];
            if ge == 0.0 {
                continue;
            }
            let xe = self.x(e);
            for (i, o) in out.iter_mut().enumerate() {
                if i.abs_diff(e) > 2 {
                    *o -= ZETA_MINUS_HALF * self.dx * ge / (self.x(i) - xe);
                }
            }
        }
    }

    /// (1/pi) PV int g(y)/(x - y) dy at all grid targets, with optional
    /// far-field tails for `g` and the Navot edge correction.
    pub fn hilbert(&self, g: &[f64], asym: Option<&Asymptote>, navot: bool) -> Vec<f64> {
        let mut out = self.pv_all(g);
        if navot {
            self.navot_correction(g, &mut out);
        }
        if let Some(a) = asym {
            if !a.is_zero() {
                let y = self.half_width;
                for (i, o) in out.iter_mut().enumerate() {
                    let xi = self.x(i);
                    if xi.abs() <= 0.9 * y {
                        *o += tail_cauchy(xi, y, a);
                    }
                }
            }
        }
        for o in &mut out {
            *o /= std::f64::consts::PI;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_path_matches_direct_rows() {
        let m = 257;
        let eng = PvEngine::new(3.0, m);
        let g: Vec<f64> = (0..m)
            .map(|j| {
                let x = eng.x(j);
                (-x * x).exp() * (1.0 + 0.3 * x)
            })
            .collect();
        let all = eng.pv_all(&g);
        for i in [0, 1, 2, 57, 128, 200, m - 3, m - 2, m - 1] {
            let one = eng.pv_one(&g, i);
            assert!(
                (all[i] - one).abs() <= 1e-9 * (1.0 + one.abs()),
                "i={i}: {} vs {}",
                all[i],
                one
            );
        }
    }

    #[test]
    fn tail_power_against_quadrature() {
        // int_{|y|>Y} (x-y)^{-2} dy at x=0.3, Y=2
        let x = 0.3;
        let y = 2.0;
        let exact = tail_power(x, y, 2);
        let mut num = 0.0;
        let n = 4_000_000;
        let hi = 4000.0;
        let h = (hi - y) / n as f64;
        for k in 0..n {
            let t = y + (k as f64 + 0.5) * h;
            num += h * ((x - t).powi(-2) + (x + t).powi(-2));
        }
        assert!((exact - num).abs() < 1e-3 * exact.abs());
    }

    #[test]
    fn tail_cauchy_series_matches_log_form_at_switch() {
        let a = Asymptote {
            c1: 1.0,
            c2: -0.5,
            c3: 0.25,
        };
        let y = 6.0;
        let x = 0.049 * y; // series branch
        let series = tail_cauchy(x, y, &a);
        let l = ((y - x) / (y + x)).ln();
        let exact = a.c1 * l / x + a.c2 * (l / (x * x) + 2.0 / (x * y))
            + a.c3 * (l / (x * x * x) + 2.0 / (x * x * y));
        assert!((series - exact).abs() < 5e-9, "{series} vs {exact}");
    }
}
