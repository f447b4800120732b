//! Hilbert transforms on the torus and the line, and the difference-quotient
//! operator calculus built on them: the refined product formula, Cotlar's
//! identity, A[f,g], the T operators and the H[T] recursion. Each operator
//! comes with an independent evaluation path and exposes the residual.

mod ops;
mod pv;

pub use ops::{HtRecursion, QFamily};
pub use pv::{Asymptote, PvEngine};

/// Closed-form far tail int_{|y|>Y} (x-y)^{-m} dy (PV at infinity for m = 1).
pub fn tail_power_pub(x: f64, y_max: f64, m: u32) -> f64 {
    pv::tail_power(x, y_max, m)
}

use std::f64::consts::PI;

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{LineField, PeriodicField, TwoPointField};

/// Conjugate-function multiplier -i sgn(n); the mean and the Nyquist mode map to zero.
pub fn hilbert_torus(f: &PeriodicField) -> PeriodicField {
    let n = f.len() as i64;
    f.apply_multiplier(|k| {
        if k == 0 || 2 * k == n {
            Complex::new(0.0, 0.0)
        } else {
            Complex::new(0.0, -(k.signum() as f64))
        }
    })
}

/// PV cotangent quadrature on the staggered grid (targets xi_k + dx/2, which
/// never coincide with source nodes). Returns the staggered samples; used to
/// validate [`hilbert_torus`].
pub fn hilbert_torus_quadrature(f: &PeriodicField) -> Vec<f64> {
    let n = f.len();
    let dx = 2.0 * PI / n as f64;
    (0..n)
        .map(|i| {
            let xt = f.node(i) + 0.5 * dx;
            let mut acc = 0.0;
            for (j, &fj) in f.samples().iter().enumerate() {
                acc += fj / ((xt - f.node(j)) / 2.0).tan();
            }
            acc * dx / (2.0 * PI)
        })
        .collect()
}

/// Difference quotient Q[f] of a line field, diagonal value f'.
pub fn diff_quotient(f: &LineField) -> TwoPointField {
    TwoPointField::diff_quotient(f)
}

/// The line Hilbert transform of a compactly supported field, evaluated on a
/// grid `extension` times wider. The far field is reported through the 1/x
/// asymptote (H[f] ~ (m0/x + m1/x^2 + m2/x^3)/pi) and its edge magnitude.
#[derive(Debug, Clone)]
pub struct LineTransform {
    pub field: LineField,
    pub asymptote: Asymptote,
    /// magnitude of the discarded far field at the output-grid edge
    pub tail_bound: f64,
}

pub fn hilbert_line(f: &LineField) -> Result<LineTransform> {
    hilbert_line_ext(f, 2)
}

pub fn hilbert_line_ext(f: &LineField, extension: usize) -> Result<LineTransform> {
    if extension < 1 {
        return Err(Error::InvalidParameter("extension must be >= 1".into()));
    }
    let fe = f.extend(extension);
    let eng = PvEngine::new(fe.half_width(), fe.len());
    let out = eng.hilbert(fe.samples(), None, true);
    let (m0, m1, m2) = f.moments();
    let asym = Asymptote::from_moments(m0, m1, m2);
    let tail_bound = asym.edge_magnitude(fe.half_width());
    Ok(LineTransform {
        field: LineField::from_parts(fe.half_width(), out),
        asymptote: asym,
        tail_bound,
    })
}

fn common_extended(f: &LineField, g: &LineField) -> Result<(LineField, LineField, PvEngine)> {
    f.check_same_grid(g)?;
    let fe = f.extend(2);
    let ge = g.extend(2);
    let eng = PvEngine::new(fe.half_width(), fe.len());
    Ok((fe, ge, eng))
}

/// H[fg] evaluated through the refined product formula
/// (1/pi) PV int (H[f](x)-H[f](y)) (H[g](x)-H[g](y)) / (x-y) dy.
///
/// The integrand tends to H[f](x)H[g](x) at infinity; that constant has zero
/// principal value over the line, and the decaying remainder is integrated in
/// closed form from the 1/y asymptotes of H[f], H[g].
pub fn product_formula_hfg(f: &LineField, g: &LineField) -> Result<LineTransform> {
    let (fe, ge, eng) = common_extended(f, g)?;
    let m = eng.len();
    let y_max = eng.half_width();
    let (a1, a2, a3) = {
        let (m0, m1, m2) = f.moments();
        (m0 / PI, m1 / PI, m2 / PI)
    };
    let (b1, b2, b3) = {
        let (m0, m1, m2) = g.moments();
        (m0 / PI, m1 / PI, m2 / PI)
    };
    let hf = eng.hilbert(fe.samples(), None, true);
    let hg = eng.hilbert(ge.samples(), None, true);
    let out: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            let xi = eng.x(i);
            let row: Vec<f64> = (0..m)
                .map(|j| (hf[i] - hf[j]) * (hg[i] - hg[j]) - hf[i] * hg[i])
                .collect();
            let mut v = eng.pv_one(&row, i);
            if xi.abs() <= 0.9 * y_max {
                let asym = Asymptote {
                    c1: -hf[i] * b1 - hg[i] * a1,
                    c2: a1 * b1 - hf[i] * b2 - hg[i] * a2,
                    c3: a1 * b2 + a2 * b1 - hf[i] * b3 - hg[i] * a3,
                };
                v += pv::tail_cauchy(xi, y_max, &asym);
            }
            v / PI
        })
        .collect();
    let (p0, p1, p2) = f.mul(g)?.moments();
    let asym = Asymptote::from_moments(p0, p1, p2);
    Ok(LineTransform {
        tail_bound: asym.edge_magnitude(y_max),
        field: LineField::from_parts(y_max, out),
        asymptote: asym,
    })
}

/// Cotlar residual max |H[fg] - (H[f] g + f H[g] + H[H[f] H[g]])| over the
/// base grid, with the estimated magnitude of the neglected tail orders.
#[derive(Debug, Clone)]
pub struct CotlarReport {
    pub residual: f64,
    pub tail_bound: f64,
}

pub fn cotlar_residual(f: &LineField, g: &LineField) -> Result<CotlarReport> {
    let (fe, ge, eng) = common_extended(f, g)?;
    let hf = eng.hilbert(fe.samples(), None, true);
    let hg = eng.hilbert(ge.samples(), None, true);
    let hfg = eng.hilbert(&fe.mul(&ge)?.samples().to_vec(), None, true);
    let (a1, a2, a3) = {
        let (m0, m1, m2) = f.moments();
        (m0 / PI, m1 / PI, m2 / PI)
    };
    let (b1, b2, b3) = {
        let (m0, m1, m2) = g.moments();
        (m0 / PI, m1 / PI, m2 / PI)
    };
    // H[f]H[g] ~ a1 b1 / y^2 + (a1 b2 + a2 b1)/y^3 beyond the grid
    let prod: Vec<f64> = hf.iter().zip(&hg).map(|(a, b)| a * b).collect();
    let prod_asym = Asymptote {
        c1: 0.0,
        c2: a1 * b1,
        c3: a1 * b2 + a2 * b1,
    };
    let outer = eng.hilbert(&prod, Some(&prod_asym), false);
    let mut residual = 0.0f64;
    let y_max = eng.half_width();
    for i in 0..eng.len() {
        if eng.x(i).abs() <= f.half_width() {
            let cot = hf[i] * ge.samples()[i] + fe.samples()[i] * hg[i] + outer[i];
            residual = residual.max((hfg[i] - cot).abs());
        }
    }
    let c4 = (a1 * b3 + a2 * b2 + a3 * b1).abs();
    Ok(CotlarReport {
        residual,
        tail_bound: c4 * 2.0 / (3.0 * y_max.powi(3)) / PI,
    })
}

/// A[f,g](x) = (1/pi) PV int f(y) g(x,y)/(x-y) dy, computed two ways:
/// direct PV quadrature, and the decomposition
/// f(x) H2[g](x,x) + H[f](x) g(x,x) + (1/pi) int (f(y)-f(x))(g(x,y)-g(x,x))/(x-y) dy.
/// The returned field is the decomposition path; the cross-check residual is exposed.
#[derive(Debug, Clone)]
pub struct OpA {
    pub field: LineField,
    pub direct: LineField,
    pub residual: f64,
}

pub fn op_a(f: &LineField, g: &TwoPointField, tol: Option<f64>) -> Result<OpA> {
    let fe = f.extend(2);
    let eng = PvEngine::new(fe.half_width(), fe.len());
    let m = eng.len();
    let y_max = eng.half_width();
    let hf = eng.hilbert(fe.samples(), None, true);
    let fs = fe.samples();

    let rows: Vec<(f64, f64)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let xi = eng.x(i);
            let grow: Vec<f64> = (0..m).map(|j| g.at(xi, eng.x(j))).collect();
            let gdiag = g.diag_at(xi);
            // far-field model g(x, y) ~ g_inf(x) + kappa/(x - y) fitted at the grid ends
            let g_inf = 0.5 * (grow[0] + grow[m - 1]);
            let kr = (grow[m - 1] - g_inf) * (xi - eng.x(m - 1));
            let kl = (grow[0] - g_inf) * (xi - eng.x(0));
            let kappa_tails = kr / (y_max - xi) + kl / (xi + y_max);

            // path (i): direct PV of f(y) g(x,y); f has compact support
            let kd: Vec<f64> = (0..m).map(|j| fs[j] * grow[j]).collect();
            let direct = eng.pv_one(&kd, i) / PI;

            // path (ii): the g_inf part of H2[g] has zero principal value over
            // the line, so its interior log and its tail are both dropped
            let grow0: Vec<f64> = grow.iter().map(|v| v - g_inf).collect();
            let h2g = (eng.pv_one(&grow0, i) + kappa_tails) / PI;
            let s_inf = fs[i] * (gdiag - g_inf);
            let rrow: Vec<f64> = (0..m)
                .map(|j| (fs[j] - fs[i]) * (grow[j] - gdiag) - s_inf)
                .collect();
            let rem_tails = -fs[i] * kappa_tails;
            let rem = (eng.pv_one(&rrow, i) + rem_tails) / PI;
            let decomp = fs[i] * h2g + hf[i] * gdiag + rem;
            (decomp, direct)
        })
        .collect();

    let mut residual = 0.0f64;
    for (i, &(d, dir)) in rows.iter().enumerate() {
        if eng.x(i).abs() <= f.half_width() {
            residual = residual.max((d - dir).abs());
        }
    }
    if let Some(t) = tol {
        if residual > t {
            return Err(Error::IdentityViolation {
                what: "A[f,g] decomposition vs direct quadrature".into(),
                residual,
                tol: t,
            });
        }
    }
    Ok(OpA {
        field: LineField::from_parts(y_max, rows.iter().map(|r| r.0).collect()),
        direct: LineField::from_parts(y_max, rows.iter().map(|r| r.1).collect()),
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bump(x: f64, c: f64, w: f64) -> f64 {
        let t = (x - c) / w;
        if t.abs() < 1.0 {
            (1.0 - 1.0 / (1.0 - t * t)).exp() * 1.0_f64.exp() / 1.0_f64.exp()
        } else {
            0.0
        }
    }

    #[test]
    fn torus_golden_multipliers() {
        for n_mode in 1..=8 {
            let f = PeriodicField::from_fn(256, |x| (n_mode as f64 * x).cos()).unwrap();
            let h = hilbert_torus(&f);
            for k in 0..f.len() {
                assert_abs_diff_eq!(
                    h.samples()[k],
                    (n_mode as f64 * f.node(k)).sin(),
                    epsilon = 1e-12
                );
            }
            let g = PeriodicField::from_fn(256, |x| (n_mode as f64 * x).sin()).unwrap();
            let hg = hilbert_torus(&g);
            for k in 0..g.len() {
                assert_abs_diff_eq!(
                    hg.samples()[k],
                    -(n_mode as f64 * g.node(k)).cos(),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn torus_constant_maps_to_zero() {
        let f = PeriodicField::from_fn(64, |_| 1.0).unwrap();
        assert!(hilbert_torus(&f).max_abs() < 1e-14);
    }

    #[test]
    fn torus_linearity_example() {
        let f = PeriodicField::from_fn(128, |x| (3.0 * x).cos() + (5.0 * x).sin()).unwrap();
        let h = hilbert_torus(&f);
        for k in 0..f.len() {
            let x = f.node(k);
            assert_abs_diff_eq!(h.samples()[k], (3.0 * x).sin() - (5.0 * x).cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn staggered_quadrature_matches_spectral() {
        let f = PeriodicField::from_fn(512, |x| (x).cos() - 0.4 * (6.0 * x).sin()).unwrap();
        let q = hilbert_torus_quadrature(&f);
        let it = hilbert_torus(&f).interpolant();
        let dx = 2.0 * PI / 512.0;
        let mut worst = 0.0f64;
        for (i, &v) in q.iter().enumerate() {
            worst = worst.max((v - it.eval(f.node(i) + 0.5 * dx)).abs());
        }
        assert!(worst < 1e-10, "worst = {worst:.3e}");
    }

    #[test]
    fn quadrature_of_zero_is_zero() {
        let f = PeriodicField::zeros(64).unwrap();
        assert!(hilbert_torus_quadrature(&f).iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn semicircle_identity_and_rate() {
        // H[sqrt(1-y^2)](x) = x inside the support; support endpoints on nodes
        let mut errs = Vec::new();
        for m in [1024usize, 2048, 4096] {
            let f = LineField::from_fn(2.0, m + 1, |x| (1.0 - x * x).max(0.0).sqrt()).unwrap();
            let h = hilbert_line(&f).unwrap();
            let mut worst = 0.0f64;
            for j in 0..h.field.len() {
                let x = h.field.node(j);
                if x.abs() <= 0.8 {
                    worst = worst.max((h.field.samples()[j] - x).abs());
                }
            }
            errs.push(worst);
        }
        assert!(errs[2] < 1e-3, "err at 4096 = {:.3e}", errs[2]);
        assert!(errs[0] / errs[1] >= 4.0, "ratios {:?}", errs);
        assert!(errs[1] / errs[2] >= 4.0, "ratios {:?}", errs);
    }

    #[test]
    fn even_field_transform_vanishes_at_origin() {
        let f = LineField::from_fn(3.0, 2049, |x| bump(x, 0.0, 1.0)).unwrap();
        let h = hilbert_line(&f).unwrap();
        let mid = h.field.len() / 2;
        assert!(h.field.samples()[mid].abs() < 1e-10);
    }

    #[test]
    fn zero_maps_to_zero() {
        let f = LineField::zeros(3.0, 64).unwrap();
        let h = hilbert_line(&f).unwrap();
        assert!(h.field.max_abs() == 0.0);
    }

    #[test]
    fn product_formula_positive_sign_and_symmetry() {
        let f = LineField::from_fn(3.0, 1025, |x| bump(x, -0.3, 0.8)).unwrap();
        let g = LineField::from_fn(3.0, 1025, |x| 0.7 * bump(x, 0.4, 1.1)).unwrap();
        let pf = product_formula_hfg(&f, &g).unwrap();
        let direct = hilbert_line(&f.mul(&g).unwrap()).unwrap();
        let mut worst = 0.0f64;
        for j in 0..pf.field.len() {
            if pf.field.node(j).abs() <= 3.0 {
                worst = worst.max((pf.field.samples()[j] - direct.field.samples()[j]).abs());
            }
        }
        assert!(worst < 1e-3, "worst = {worst:.3e}");
        // symmetric in f <-> g
        let pf2 = product_formula_hfg(&g, &f).unwrap();
        for (a, b) in pf.field.samples().iter().zip(pf2.field.samples()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn product_formula_zero_factor() {
        let f = LineField::from_fn(3.0, 513, |x| bump(x, 0.0, 1.0)).unwrap();
        let z = LineField::zeros(3.0, 513).unwrap();
        let pf = product_formula_hfg(&f, &z).unwrap();
        assert!(pf.field.max_abs() < 1e-12);
    }

    #[test]
    fn cotlar_zero_and_smooth() {
        let f = LineField::from_fn(3.0, 2049, |x| bump(x, -0.3, 0.8)).unwrap();
        let z = LineField::zeros(3.0, 2049).unwrap();
        assert!(cotlar_residual(&f, &z).unwrap().residual < 1e-12);
        let g = LineField::from_fn(3.0, 2049, |x| 0.7 * bump(x, 0.4, 1.1)).unwrap();
        let rep = cotlar_residual(&f, &g).unwrap();
        assert!(rep.residual < 1e-4, "residual {:.3e}", rep.residual);
    }

    #[test]
    fn op_a_with_unit_kernel_is_hilbert() {
        let f = LineField::from_fn(3.0, 1025, |x| bump(x, 0.1, 0.9)).unwrap();
        let res = op_a(&f, &TwoPointField::constant(1.0), None).unwrap();
        let h = hilbert_line(&f).unwrap();
        let mut worst = 0.0f64;
        for j in 0..res.field.len() {
            if res.field.node(j).abs() <= 3.0 {
                worst = worst.max((res.field.samples()[j] - h.field.samples()[j]).abs());
            }
        }
        assert!(worst < 1e-6, "worst = {worst:.3e}");
        assert!(res.residual < 1e-6);
    }

    #[test]
    fn op_a_zero_field() {
        let z = LineField::zeros(3.0, 513).unwrap();
        let res = op_a(&z, &TwoPointField::constant(1.0), Some(1e-12)).unwrap();
        assert!(res.field.max_abs() < 1e-14);
    }

    #[test]
    fn op_a_dual_path_on_diff_quotient() {
        let f = LineField::from_fn(3.0, 1025, |x| bump(x, 0.0, 1.0)).unwrap();
        let q = TwoPointField::diff_quotient(&f);
        let res = op_a(&f, &q, Some(1e-3)).unwrap();
        assert!(res.residual < 1e-3, "residual {:.3e}", res.residual);
    }
}
