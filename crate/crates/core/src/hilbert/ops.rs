//! The T-operator web: T_j^{n_1..n_l}[f], its Hilbert transform through the
//! recursion formula, and the difference-quotient derivative identity.
//!
//! With Q[f](x,y) = (f(x)-f(y))/(x-y) and PiQ = prod_k Q[f_k]^{n_k},
//!
//!   T_0(x) = (1/pi) PV int PiQ(x,y)/(x-y) dy,
//!   T_j(x) = (1/pi) PV int f'_j(y) PiQ(x,y)/(x-y) dy   (j >= 1),
//!
//! the derivative evaluated at the integration variable. The recursion used
//! here (validated against the direct path; the two sign-bearing terms differ
//! from their usual typeset form) is
//!
//!   H[T_0^{(n)}]  = sum_k (n_k/n) H[T_k^{(.., n_k - 1, ..)}],
//!   H[T_j^{(n)}]  = - sum_k (n_k/n) H[f'_j T_k^{(.., n_k-1, ..)}]
//!                   + 2 f'_j sum_k (n_k/n) H[T_k^{(.., n_k-1, ..)}]
//!                   + H[f'_j] T_0^{(n)} + J_rem,
//!   J_rem(x)      = (1/pi) PV int (f'_j(x)-f'_j(z)) (N(x,x)-N(x,z))/(x-z) dz,
//!   N(x,z)        = H_1[PiQ](x,z),  N(x,x) = T_0(x).
//!
//! T_0 also satisfies the same weighted identity pointwise before any
//! transform, which is used as an internal consistency check in the tests.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;

use super::pv::{tail_cauchy, tail_power, Asymptote, PvEngine};
use crate::error::{Error, Result};
use crate::field::LineField;

struct Component {
    f: Vec<f64>,
    fp: Vec<f64>,
    hfp: Vec<f64>,
    /// moments of f (those of f' follow by parts)
    mf: (f64, f64, f64),
}

/// A family of compactly supported components f_1..f_l sharing one grid,
/// with their difference-quotient operator calculus.
pub struct QFamily {
    eng: PvEngine,
    base_half_width: f64,
    comps: Vec<Component>,
}

/// Formula-path H[T_j] together with the direct path and their gap.
#[derive(Debug, Clone)]
pub struct HtRecursion {
    pub formula: LineField,
    pub direct: LineField,
    /// max |formula - direct| over the base (unextended) grid region
    pub residual: f64,
}

impl QFamily {
    /// Components given as (f, f'); the derivative is computed by finite
    /// differences when absent. Everything is zero-extended onto a grid twice
    /// as wide.
    pub fn new(comps: Vec<(LineField, Option<LineField>)>) -> Result<Self> {
        if comps.is_empty() {
            return Err(Error::InvalidParameter("empty component family".into()));
        }
        let base = comps[0].0.clone();
        for (f, fp) in &comps {
            base.check_same_grid(f)?;
            if let Some(fp) = fp {
                base.check_same_grid(fp)?;
            }
        }
        let mut out = Vec::with_capacity(comps.len());
        let eng = {
            let fe = base.extend(2);
            PvEngine::new(fe.half_width(), fe.len())
        };
        for (f, fp) in comps {
            let fp = fp.unwrap_or_else(|| f.derivative());
            let fe = f.extend(2);
            let fpe = fp.extend(2);
            let hfp = eng.hilbert(fpe.samples(), None, true);
            out.push(Component {
                mf: f.moments(),
                f: fe.samples().to_vec(),
                fp: fpe.samples().to_vec(),
                hfp,
            });
        }
        Ok(QFamily {
            eng,
            base_half_width: base.half_width(),
            comps: out,
        })
    }

    pub fn components(&self) -> usize {
        self.comps.len()
    }

    pub fn grid_len(&self) -> usize {
        self.eng.len()
    }

    pub fn node(&self, i: usize) -> f64 {
        self.eng.x(i)
    }

    fn check_powers(&self, j: usize, powers: &[u32]) -> Result<u32> {
        if powers.len() != self.comps.len() {
            return Err(Error::InvalidParameter(format!(
                "powers length {} != {} components",
                powers.len(),
                self.comps.len()
            )));
        }
        if j > self.comps.len() {
            return Err(Error::InvalidParameter(format!("j = {j} out of range")));
        }
        let n: u32 = powers.iter().sum();
        if j == 0 && n == 0 {
            return Err(Error::InvalidParameter(
                "T_0 with all powers zero has no principal value".into(),
            ));
        }
        Ok(n)
    }

    /// PiQ(x_i, y_j) for all j, diagonal included.
    fn piq_row(&self, powers: &[u32], i: usize, out: &mut [f64]) {
        let m = self.eng.len();
        out[..m].fill(1.0);
        let xi = self.eng.x(i);
        for (c, &nk) in self.comps.iter().zip(powers) {
            if nk == 0 {
                continue;
            }
            let fi = c.f[i];
            for (j, o) in out.iter_mut().enumerate() {
                let q = if j == i {
                    c.fp[i]
                } else {
                    (fi - c.f[j]) / (xi - self.eng.x(j))
                };
                *o *= q.powi(nk as i32);
            }
        }
    }

    /// prod_k f_k(x_i)^{n_k}; the exact large-|y| strength of PiQ(x_i, .).
    fn piq_far_strength(&self, powers: &[u32], i: usize) -> f64 {
        let mut p = 1.0;
        for (c, &nk) in self.comps.iter().zip(powers) {
            if nk > 0 {
                p *= c.f[i].powi(nk as i32);
            }
        }
        p
    }

    /// T_j^{powers} on the extended grid.
    pub fn op_t(&self, j: usize, powers: &[u32]) -> Result<LineField> {
        let n = self.check_powers(j, powers)?;
        let m = self.eng.len();
        let y_max = self.eng.half_width();
        let vals: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![0.0; m];
                self.piq_row(powers, i, &mut row);
                if j >= 1 {
                    let fp = &self.comps[j - 1].fp;
                    for (r, &d) in row.iter_mut().zip(fp) {
                        *r *= d;
                    }
                }
                let mut v = self.eng.pv_one(&row, i);
                if j == 0 && n >= 1 {
                    // beyond the grid PiQ(x,y) = prod f_k(x)^{n_k} / (x-y)^n exactly
                    let p = self.piq_far_strength(powers, i);
                    let xi = self.eng.x(i);
                    if p != 0.0 && xi.abs() < y_max {
                        v += p * tail_power(xi, y_max, n + 1);
                    }
                }
                v / PI
            })
            .collect();
        Ok(LineField::from_parts(y_max, vals))
    }

    /// Far-field asymptote of T_j^{powers} from moments of f'_j PiQ.
    pub fn t_asymptote(&self, j: usize, powers: &[u32]) -> Asymptote {
        let n: u32 = powers.iter().sum();
        if n == 0 && j >= 1 {
            // T_j^{(0)} = H[f'_j]; moments of f' by parts
            let (m0, m1, _) = self.comps[j - 1].mf;
            return Asymptote {
                c1: 0.0,
                c2: -m0 / PI,
                c3: -2.0 * m1 / PI,
            };
        }
        if n == 0 || n > 3 {
            return Asymptote::default();
        }
        // T(x) ~ ((-1)^n/pi) int w(y) (x-y)^{-(n+1)} dy,
        // w = prod f_k^{n_k} (times f'_j for j >= 1)
        let m = self.eng.len();
        let dx = self.eng.dx();
        let mut mom = [0.0f64; 3];
        for idx in 0..m {
            let mut w = 1.0;
            for (c, &nk) in self.comps.iter().zip(powers) {
                if nk > 0 {
                    w *= c.f[idx].powi(nk as i32);
                }
            }
            if j >= 1 {
                w *= self.comps[j - 1].fp[idx];
            }
            let wq = if idx == 0 || idx == m - 1 { 0.5 } else { 1.0 } * dx;
            let y = self.eng.x(idx);
            mom[0] += wq * w;
            mom[1] += wq * y * w;
            mom[2] += wq * y * y * w;
        }
        let s = if n % 2 == 0 { 1.0 } else { -1.0 } / PI;
        let mut a = Asymptote::default();
        let coeffs = [
            s * mom[0],
            s * (n as f64 + 1.0) * mom[1],
            s * (n as f64 + 1.0) * (n as f64 + 2.0) / 2.0 * mom[2],
        ];
        for (ord, &c) in (n + 1..=n + 3).zip(coeffs.iter()) {
            match ord {
                1 => a.c1 = c,
                2 => a.c2 = c,
                3 => a.c3 = c,
                _ => {}
            }
        }
        a
    }

    /// Direct path: hilbert transform of the quadrature values of T_j.
    pub fn ht_direct(&self, j: usize, powers: &[u32]) -> Result<LineField> {
        let t = self.op_t(j, powers)?;
        let asym = self.t_asymptote(j, powers);
        let vals = self.eng.hilbert(t.samples(), Some(&asym), false);
        Ok(LineField::from_parts(self.eng.half_width(), vals))
    }

    /// H[T_j^{powers}] through the recursion, cross-checked against the direct path.
    pub fn ht_recursion(&self, j: usize, powers: &[u32], depth_limit: u32) -> Result<HtRecursion> {
        let n = self.check_powers(j, powers)?;
        if n > depth_limit {
            return Err(Error::RecursionDepth {
                depth: n,
                limit: depth_limit,
            });
        }
        let mut memo: HashMap<(usize, Vec<u32>), Vec<f64>> = HashMap::new();
        let formula = self.ht_rec_inner(j, powers, &mut memo)?;
        let direct = self.ht_direct(j, powers)?;
        let mut residual = 0.0f64;
        for i in 0..self.eng.len() {
            if self.eng.x(i).abs() <= self.base_half_width {
                residual = residual.max((formula[i] - direct.samples()[i]).abs());
            }
        }
        Ok(HtRecursion {
            formula: LineField::from_parts(self.eng.half_width(), formula),
            direct,
            residual,
        })
    }

    fn ht_rec_inner(
        &self,
        j: usize,
        powers: &[u32],
        memo: &mut HashMap<(usize, Vec<u32>), Vec<f64>>,
    ) -> Result<Vec<f64>> {
        let key = (j, powers.to_vec());
        if let Some(v) = memo.get(&key) {
            return Ok(v.clone());
        }
        let n: u32 = powers.iter().sum();
        let m = self.eng.len();
        let out = if j == 0 {
            // H[T_0] = sum (n_k/n) H[T_k^{(..,n_k-1,..)}]
            let mut acc = vec![0.0; m];
            for k in 1..=self.comps.len() {
                let nk = powers[k - 1];
                if nk == 0 {
                    continue;
                }
                let mut pk = powers.to_vec();
                pk[k - 1] -= 1;
                let term = self.ht_rec_inner(k, &pk, memo)?;
                let w = nk as f64 / n as f64;
                for (a, t) in acc.iter_mut().zip(&term) {
                    *a += w * t;
                }
            }
            acc
        } else if n == 0 {
            // base case: T_j^{(0)} = H[f'_j]; apply H directly
            let asym = self.t_asymptote(j, powers);
            self.eng.hilbert(&self.comps[j - 1].hfp, Some(&asym), false)
        } else {
            let fpj = &self.comps[j - 1].fp;
            let t0 = self.op_t(0, powers)?;
            let mut acc = vec![0.0; m];
            for k in 1..=self.comps.len() {
                let nk = powers[k - 1];
                if nk == 0 {
                    continue;
                }
                let mut pk = powers.to_vec();
                pk[k - 1] -= 1;
                let w = nk as f64 / n as f64;
                let tk = self.op_t(k, &pk)?;
                // - sum (n_k/n) H[f'_j T_k]: the product is compactly supported
                let prod: Vec<f64> = fpj.iter().zip(tk.samples()).map(|(a, b)| a * b).collect();
                let hprod = self.eng.hilbert(&prod, None, false);
                // + 2 f'_j sum (n_k/n) H[T_k]
                let htk = self.ht_rec_inner(k, &pk, memo)?;
                for i in 0..m {
                    acc[i] += w * (-hprod[i] + 2.0 * fpj[i] * htk[i]);
                }
            }
            // + H[f'_j] T_0
            let hfpj = &self.comps[j - 1].hfp;
            for i in 0..m {
                acc[i] += hfpj[i] * t0.samples()[i];
            }
            // + J_rem
            let jrem = self.j_rem(j, powers, t0.samples())?;
            for i in 0..m {
                acc[i] += jrem[i];
            }
            acc
        };
        memo.insert(key, out.clone());
        Ok(out)
    }

    /// J_rem(x) = (1/pi) PV int (f'_j(x)-f'_j(z)) (N(x,x)-N(x,z))/(x-z) dz with
    /// N = H_1[PiQ]; streamed over z-columns (each column is one transform of
    /// PiQ(., z)) so only O(M) memory is used.
    fn j_rem(&self, j: usize, powers: &[u32], t0: &[f64]) -> Result<Vec<f64>> {
        let m = self.eng.len();
        let n: u32 = powers.iter().sum();
        let dx = self.eng.dx();
        let y_max = self.eng.half_width();
        let fpj = &self.comps[j - 1].fp;

        // moment transforms G_r = H[y^r prod f^{n}] for the far-z model of N
        let mut w = vec![1.0; m];
        for (c, &nk) in self.comps.iter().zip(powers) {
            if nk > 0 {
                for (wi, fi) in w.iter_mut().zip(&c.f) {
                    *wi *= fi.powi(nk as i32);
                }
            }
        }
        let g0 = self.eng.hilbert(&w, None, false);
        let g1 = {
            let wy: Vec<f64> = w.iter().enumerate().map(|(i, v)| v * self.eng.x(i)).collect();
            self.eng.hilbert(&wy, None, false)
        };
        let g2 = {
            let wy2: Vec<f64> = w
                .iter()
                .enumerate()
                .map(|(i, v)| v * self.eng.x(i) * self.eng.x(i))
                .collect();
            self.eng.hilbert(&wy2, None, false)
        };

        // accumulate sum_z B_{xz} K(x, z) with K = (fpj_x - fpj_z)(T0_x - N(x,z)) - fpj_x T0_x
        let mut acc = vec![0.0; m];
        let mut piq_col = vec![0.0; m];
        for z in 0..m {
            // N(., z): PiQ is symmetric, so the column is the row at z
            self.piq_row(powers, z, &mut piq_col);
            let col_asym = {
                // PiQ(y, z) = prod (-f_k(z))^{n_k} (y - z)^{-n} beyond the grid
                let mut p = 1.0;
                for (c, &nk) in self.comps.iter().zip(powers) {
                    if nk > 0 {
                        p *= (-c.f[z]).powi(nk as i32);
                    }
                }
                let xz = self.eng.x(z);
                let mut a = Asymptote::default();
                if (1..=3).contains(&n) && p != 0.0 {
                    let coeffs = [
                        p,
                        p * n as f64 * xz,
                        p * (n as f64) * (n as f64 + 1.0) / 2.0 * xz * xz,
                    ];
                    for (ord, &c) in (n..n + 3).zip(coeffs.iter()) {
                        match ord {
                            1 => a.c1 = c,
                            2 => a.c2 = c,
                            3 => a.c3 = c,
                            _ => {}
                        }
                    }
                }
                a
            };
            let ncol = self.eng.hilbert(&piq_col, Some(&col_asym), false);
            let xz = self.eng.x(z);
            let wz = if z == 0 || z == m - 1 { 0.5 * dx } else { dx };
            for i in 0..m {
                let k_iz = (fpj[i] - fpj[z]) * (t0[i] - ncol[i]) - fpj[i] * t0[i];
                if i != z {
                    acc[i] += wz * k_iz / (self.eng.x(i) - xz);
                }
                // diagonal derivative stencil of the subtracted trapezoid
                if z == i + 1 {
                    acc[i] -= 0.5 * k_iz;
                } else if i >= 1 && z == i - 1 {
                    acc[i] += 0.5 * k_iz;
                }
            }
        }
        // far-z tails: K - K_inf ~ -fpj_x N(x,z) with
        // N(x,z) ~ (-1)^n [G0(x)/z^n + n G1(x)/z^{n+1} + n(n+1)/2 G2(x)/z^{n+2}]
        if (1..=3).contains(&n) {
            let s = if n % 2 == 0 { 1.0 } else { -1.0 };
            for i in 0..m {
                let xi = self.eng.x(i);
                if xi.abs() > 0.9 * y_max || fpj[i] == 0.0 {
                    continue;
                }
                let coeffs = [
                    -fpj[i] * s * g0[i],
                    -fpj[i] * s * n as f64 * g1[i],
                    -fpj[i] * s * (n as f64) * (n as f64 + 1.0) / 2.0 * g2[i],
                ];
                let mut a = Asymptote::default();
                for (ord, &c) in (n..n + 3).zip(coeffs.iter()) {
                    match ord {
                        1 => a.c1 = c,
                        2 => a.c2 = c,
                        3 => a.c3 = c,
                        _ => {}
                    }
                }
                acc[i] += tail_cauchy(xi, y_max, &a);
            }
        }
        for a in &mut acc {
            *a /= PI;
        }
        Ok(acc)
    }

    /// Both sides of the derivative identity for PiQ/(y-z) at off-diagonal
    /// grid pairs, with the y-derivative by centered differences; returns the
    /// largest residual.
    pub fn dv_of_piq_residual(&self, powers: &[u32], pairs: &[(usize, usize)]) -> Result<f64> {
        let n: u32 = powers.iter().sum();
        if n == 0 {
            return Err(Error::InvalidParameter(
                "identity needs total power n >= 1".into(),
            ));
        }
        let m = self.eng.len();
        let dx = self.eng.dx();
        let piq_at = |i: usize, j: usize| -> f64 {
            let mut p = 1.0;
            for (c, &nk) in self.comps.iter().zip(powers) {
                if nk == 0 {
                    continue;
                }
                let q = if i == j {
                    c.fp[i]
                } else {
                    (c.f[i] - c.f[j]) / (self.eng.x(i) - self.eng.x(j))
                };
                p *= q.powi(nk as i32);
            }
            p
        };
        let mut worst = 0.0f64;
        for &(iy, iz) in pairs {
            if iy == iz || iy == 0 || iy + 1 >= m {
                return Err(Error::InvalidParameter(
                    "pairs must be off-diagonal and interior".into(),
                ));
            }
            let yz = self.eng.x(iy) - self.eng.x(iz);
            let lhs = piq_at(iy, iz) / yz;
            let mut rhs = 0.0;
            for k in 0..self.comps.len() {
                if powers[k] == 0 {
                    continue;
                }
                let mut pk = powers.to_vec();
                pk[k] -= 1;
                let mut p = 1.0;
                for (c, &nk) in self.comps.iter().zip(&pk) {
                    if nk == 0 {
                        continue;
                    }
                    p *= ((c.f[iy] - c.f[iz]) / yz).powi(nk as i32);
                }
                rhs += powers[k] as f64 / n as f64 * self.comps[k].fp[iy] * p / yz;
            }
            let dpi = (piq_at(iy + 1, iz) - piq_at(iy - 1, iz)) / (2.0 * dx);
            rhs -= dpi / n as f64;
            worst = worst.max((lhs - rhs).abs());
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump_field(hw: f64, m: usize, c: f64, w: f64, amp: f64) -> LineField {
        LineField::from_fn(hw, m, |x| {
            let t = (x - c) / w;
            if t.abs() < 1.0 {
                amp * (1.0 - 1.0 / (1.0 - t * t)).exp()
            } else {
                0.0
            }
        })
        .unwrap()
    }

    fn family(m: usize) -> QFamily {
        QFamily::new(vec![
            (bump_field(3.0, m, -0.3, 1.0, 0.8), None),
            (bump_field(3.0, m, 0.4, 1.2, 0.6), None),
        ])
        .unwrap()
    }

    #[test]
    fn t_with_zero_powers_is_hilbert_of_derivative() {
        let fam = family(1025);
        let t = fam.op_t(1, &[0, 0]).unwrap();
        let f = bump_field(3.0, 1025, -0.3, 1.0, 0.8);
        let h = crate::hilbert::hilbert_line(&f.derivative()).unwrap();
        let mut worst = 0.0f64;
        for i in 0..t.len() {
            if fam.node(i).abs() <= 3.0 {
                worst = worst.max((t.samples()[i] - h.field.samples()[i]).abs());
            }
        }
        assert!(worst < 1e-6, "worst = {worst:.3e}");
    }

    #[test]
    fn t1_with_one_power_matches_op_a_route() {
        // T_1^{(1,0)} = A[f'_1, Q[f_1]]: same operator, two code paths
        let fam = family(1025);
        let t = fam.op_t(1, &[1, 0]).unwrap();
        let f = bump_field(3.0, 1025, -0.3, 1.0, 0.8);
        let q = crate::field::TwoPointField::diff_quotient(&f);
        let a = crate::hilbert::op_a(&f.derivative(), &q, None).unwrap();
        let mut worst = 0.0f64;
        for i in 0..t.len() {
            if fam.node(i).abs() <= 3.0 {
                worst = worst.max((t.samples()[i] - a.direct.samples()[i]).abs());
            }
        }
        assert!(worst < 1e-6, "worst = {worst:.3e}");
    }

    #[test]
    fn t0_weighted_identity_pointwise() {
        let fam = family(769);
        for powers in [[1u32, 0], [1, 1], [2, 1]] {
            let n: u32 = powers.iter().sum();
            let t0 = fam.op_t(0, &powers).unwrap();
            let mut acc = vec![0.0; fam.grid_len()];
            for k in 1..=2usize {
                if powers[k - 1] == 0 {
                    continue;
                }
                let mut pk = powers.to_vec();
                pk[k - 1] -= 1;
                let tk = fam.op_t(k, &pk).unwrap();
                for (a, t) in acc.iter_mut().zip(tk.samples()) {
                    *a += powers[k - 1] as f64 / n as f64 * t;
                }
            }
            let mut worst = 0.0f64;
            for i in 0..fam.grid_len() {
                if fam.node(i).abs() <= 3.0 {
                    worst = worst.max((t0.samples()[i] - acc[i]).abs());
                }
            }
            assert!(worst < 2e-3, "powers {powers:?}: worst = {worst:.3e}");
        }
    }

    #[test]
    fn ht_recursion_depth_guard() {
        let fam = family(257);
        let err = fam.ht_recursion(1, &[4, 3], 6).unwrap_err();
        assert!(matches!(err, Error::RecursionDepth { .. }));
    }

    #[test]
    fn ht_recursion_n1_collapses_to_minus_derivative() {
        // H[T_0^{(1)}] = H[H[f'_1]] = -f'_1 up to tail truncation
        let fam = family(1025);
        let rec = fam.ht_recursion(0, &[1, 0], 6).unwrap();
        let f = bump_field(3.0, 1025, -0.3, 1.0, 0.8);
        let fpe = f.derivative().extend(2);
        let mut worst = 0.0f64;
        for i in 0..rec.formula.len() {
            if fam.node(i).abs() <= 3.0 {
                worst = worst.max((rec.formula.samples()[i] + fpe.samples()[i]).abs());
            }
        }
        assert!(worst < 1e-3, "worst = {worst:.3e}");
        assert!(rec.residual < 1e-3, "residual = {:.3e}", rec.residual);
    }

    #[test]
    fn dv_of_piq_quadratic_is_near_exact() {
        // for quadratics the centered difference of PiQ is exact in exact
        // arithmetic; the residual is pure floating-point noise. Pairs stay in
        // the interior where the zero-extension does not bite.
        let f = LineField::from_fn(3.0, 1025, |x| x * x).unwrap();
        let fam = QFamily::new(vec![(f, None)]).unwrap();
        // base region of the extended grid is [512, 1536]
        let pairs: Vec<(usize, usize)> = (0..200)
            .map(|k| (600 + (3 * k) % 800, 640 + (5 * k) % 800))
            .filter(|(a, b)| a != b)
            .collect();
        let r = fam.dv_of_piq_residual(&[1], &pairs).unwrap();
        assert!(r < 1e-9, "residual = {r:.3e}");
    }
}
