//! Action of the matrix exponential and of φ₁ on a vector.
//!
//! `exp(tA)·b` is evaluated as `s` successive applications of the degree-`m`
//! Taylor polynomial of `exp(tA/s)`, never forming the exponential itself.
//! The pair `(s, m)` is the cheapest one (fewest matrix-vector products
//! `s·m`) whose forward truncation bound
//!
//! ```text
//! (‖tA‖₁ / s)^(m+1) / (m+1)!  ≤  tol
//! ```
//!
//! holds, and each stage stops early once two consecutive Taylor terms are
//! negligible against the partial sum.
//!
//! `φ₁(tA)·b`, with `φ₁(z) = (eᶻ − 1)/z`, reuses the same kernel on the
//! bordered operator `[[tA, ηb], [0, 0]]`, whose exponential applied to the
//! last unit vector carries `η·φ₁(tA)·b` in its leading block.

use crate::error::{Error, Result};
use crate::operator::{inf_norm, LinearOperator, SparseOperator};

/// Largest Taylor degree considered by [`select_params`].
pub const M_MAX: usize = 55;

/// Default relative tolerance of the action kernel.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Scaling count and Taylor degree of one exponential action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionParams {
    pub s: usize,
    pub m: usize,
    pub tol: f64,
}

impl ActionParams {
    /// `ln` of the truncation bound `(norm/s)^(m+1)/(m+1)!`.
    pub fn log_truncation_bound(norm: f64, s: usize, m: usize) -> f64 {
        let k = (m + 1) as f64;
        k * (norm / s as f64).ln() - ln_factorial(m + 1)
    }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Picks `(s, m)` minimizing `s·m` subject to the truncation bound and
/// `m ≤ M_MAX`. Ties prefer fewer stages.
pub fn select_params(norm_ta: f64, tol: f64) -> ActionParams {
    assert!(norm_ta >= 0.0 && norm_ta.is_finite(), "norm must be finite and non-negative");
    assert!(tol > 0.0 && tol < 1.0, "tolerance must lie in (0, 1)");
    if norm_ta == 0.0 {
        return ActionParams { s: 1, m: 1, tol };
    }
    let ln_tol = tol.ln();
    let mut best: Option<ActionParams> = None;
    for m in 1..=M_MAX {
        // smallest s with (norm/s)^(m+1) ≤ tol·(m+1)!
        let k = (m + 1) as f64;
        let theta = ((ln_tol + ln_factorial(m + 1)) / k).exp();
        let mut s = (norm_ta / theta).ceil().max(1.0) as usize;
        while ActionParams::log_truncation_bound(norm_ta, s, m) > ln_tol {
            s += 1;
        }
        while s > 1 && ActionParams::log_truncation_bound(norm_ta, s - 1, m) <= ln_tol {
            s -= 1;
        }
        let better = match best {
            None => true,
            Some(b) => s * m < b.s * b.m || (s * m == b.s * b.m && s < b.s),
        };
        if better {
            best = Some(ActionParams { s, m, tol });
        }
    }
    best.expect("M_MAX >= 1")
}

fn check_inputs(t: f64, a: &SparseOperator, b: &[f64], tol: f64) -> Result<()> {
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.len(),
        });
    }
    if !t.is_finite() {
        return Err(Error::NonFinite(format!("time argument {t}")));
    }
    if let Some(pos) = b.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("input vector entry {pos}")));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidInput(format!("tolerance {tol} outside (0, 1)")));
    }
    Ok(())
}

/// `exp(scale·op)·b` by scaled, truncated Taylor series.
pub(crate) fn taylor_action<Op: LinearOperator + ?Sized>(
    op: &Op,
    scale: f64,
    b: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    let norm = scale.abs() * op.one_norm();
    if !norm.is_finite() {
        return Err(Error::Overflow { norm });
    }
    let ActionParams { s, m, .. } = select_params(norm, tol);
    let step = scale / s as f64;

    let n = op.dim();
    let mut acc = b.to_vec();
    let mut term = vec![0.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..s {
        term.copy_from_slice(&acc);
        let mut quiet = 0;
        for p in 1..=m {
            op.apply_into(&term, &mut next);
            let factor = step / p as f64;
            for (t, &x) in term.iter_mut().zip(&next) {
                *t = factor * x;
            }
            for (a, &t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
            let term_norm = op.monitor_norm(&term);
            let acc_norm = op.monitor_norm(&acc);
            if !acc_norm.is_finite() {
                return Err(Error::Overflow { norm });
            }
            if term_norm <= tol * acc_norm {
                quiet += 1;
                if quiet == 2 {
                    break;
                }
            } else {
                quiet = 0;
            }
        }
    }
    if acc.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow { norm });
    }
    Ok(acc)
}

/// `exp(tA)·b`.
pub fn expmv(t: f64, a: &SparseOperator, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    check_inputs(t, a, b, tol)?;
    if t == 0.0 {
        return Ok(b.to_vec());
    }
    taylor_action(a, t, b, tol)
}

/// The bordered operator `[[tA, c], [0, 0]]` of dimension `n + 1`.
struct Bordered<'a> {
    a: &'a SparseOperator,
    t: f64,
    column: Vec<f64>,
    one_norm: f64,
}

impl<'a> Bordered<'a> {
    fn new(a: &'a SparseOperator, t: f64, column: Vec<f64>) -> Self {
        let column_norm: f64 = column.iter().map(|v| v.abs()).sum();
        let one_norm = (t.abs() * a.one_norm()).max(column_norm);
        Bordered {
            a,
            t,
            column,
            one_norm,
        }
    }
}

impl LinearOperator for Bordered<'_> {
    fn dim(&self) -> usize {
        self.a.dim() + 1
    }

    fn one_norm(&self) -> f64 {
        self.one_norm
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.a.dim();
        let (y_top, y_last) = y.split_at_mut(n);
        self.a.apply_into(&x[..n], y_top);
        let w = x[n];
        for (yi, &ci) in y_top.iter_mut().zip(&self.column) {
            *yi = self.t * *yi + w * ci;
        }
        y_last[0] = 0.0;
    }

    // the trailing unit entry is bookkeeping, not part of the result
    fn monitor_norm(&self, v: &[f64]) -> f64 {
        inf_norm(&v[..self.a.dim()])
    }
}

/// `φ₁(tA)·b`.
pub fn phi1v(t: f64, a: &SparseOperator, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    check_inputs(t, a, b, tol)?;
    let ta_norm = t.abs() * a.one_norm();
    if ta_norm == 0.0 {
        // φ₁(0) = I
        return Ok(b.to_vec());
    }
    let b_norm: f64 = b.iter().map(|v| v.abs()).sum();
    if b_norm == 0.0 {
        return Ok(vec![0.0; b.len()]);
    }
    // Power-of-two weight putting the border column's 1-norm in
    // (w/2, w], w = max(‖tA‖₁, 1). A lighter column would let the bound on
    // ‖Ã‖₁ undercount the error relative to the leading block.
    let eta = (ta_norm.max(1.0) / b_norm).log2().floor().exp2();
    let border: Vec<f64> = b.iter().map(|v| eta * v).collect();
    let op = Bordered::new(a, t, border);
    let mut e_last = vec![0.0; a.dim() + 1];
    e_last[a.dim()] = 1.0;
    let mut y = taylor_action(&op, 1.0, &e_last, tol)?;
    y.truncate(a.dim());
    for v in &mut y {
        *v /= eta;
    }
    Ok(y)
}

/// Scalar `φ_{p+1}(z)` from `φ₀ = eᶻ` via `φ_{k+1}(z) = (φ_k(z) − 1/k!)/z`.
pub fn phi_recurrence(z: f64, p: usize) -> Result<f64> {
    if z == 0.0 {
        return Err(Error::InvalidInput(
            "recurrence is singular at z = 0; the limit is 1/(p+1)!".into(),
        ));
    }
    let mut phi = z.exp();
    let mut factorial = 1.0;
    for k in 0..=p {
        if k > 0 {
            factorial *= k as f64;
        }
        phi = (phi - 1.0 / factorial) / z;
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_norm_needs_one_term() {
        assert_eq!(select_params(0.0, 1e-8), ActionParams { s: 1, m: 1, tol: 1e-8 });
    }

    #[test]
    fn bound_holds_for_unit_norm() {
        let p = select_params(1.0, 1e-12);
        let bound = (1.0 / p.s as f64).powi(p.m as i32 + 1) / (1..=p.m + 1).map(|k| k as f64).product::<f64>();
        assert!(bound <= 1e-12, "{p:?} bound {bound}");
        assert!(p.m <= M_MAX);
    }

    #[test]
    fn large_norm_requires_scaling() {
        let p = select_params(100.0, 1e-8);
        assert!(p.s >= 2, "{p:?}");
        assert!(ActionParams::log_truncation_bound(100.0, p.s, p.m) <= 1e-8f64.ln());
        // a single stage within the degree cap cannot reach the tolerance
        assert!(ActionParams::log_truncation_bound(100.0, 1, M_MAX) > 1e-8f64.ln());
    }

    #[test]
    fn selection_is_cost_optimal() {
        for &norm in &[0.01, 0.7, 3.0, 33.0, 250.0] {
            for &tol in &[1e-6, 1e-8, 1e-12] {
                let p = select_params(norm, tol);
                for m in 1..=M_MAX {
                    for s in 1..=(p.s * p.m) / m {
                        if s * m < p.s * p.m {
                            assert!(
                                ActionParams::log_truncation_bound(norm, s, m) > tol.ln(),
                                "norm {norm} tol {tol}: ({s},{m}) beats {p:?}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn exp_at_zero_time_is_identity() {
        let a = SparseOperator::from_diagonal(&[1.0, -3.0]).unwrap();
        assert_eq!(expmv(0.0, &a, &[0.3, 0.4], 1e-8).unwrap(), vec![0.3, 0.4]);
        assert_eq!(phi1v(0.0, &a, &[0.3, 0.4], 1e-8).unwrap(), vec![0.3, 0.4]);
    }

    #[test]
    fn diagonal_log_two_doubles() {
        let ln2 = std::f64::consts::LN_2;
        let a = SparseOperator::from_diagonal(&[ln2, ln2]).unwrap();
        let y = expmv(1.0, &a, &[1.0, 1.0], 1e-12).unwrap();
        for v in y {
            assert!((v - 2.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn phi1_on_diagonal_matches_closed_form() {
        let z = [-3.0, -0.5, 0.25, 2.0];
        let a = SparseOperator::from_diagonal(&z).unwrap();
        let b = [1.0, -2.0, 0.5, 3.0];
        let y = phi1v(1.0, &a, &b, 1e-12).unwrap();
        for i in 0..4 {
            let expected = (z[i].exp() - 1.0) / z[i] * b[i];
            assert!((y[i] - expected).abs() <= 1e-12 * expected.abs(), "{i}: {} vs {expected}", y[i]);
        }
    }

    #[test]
    fn recurrence_values() {
        let e = std::f64::consts::E;
        assert!((phi_recurrence(1.0, 0).unwrap() - (e - 1.0)).abs() < 1e-15);
        assert!((phi_recurrence(1.0, 1).unwrap() - (e - 2.0)).abs() < 1e-15);
        assert!(phi_recurrence(0.0, 0).is_err());
    }

    /// Composite Gauss-Legendre (5 nodes) on `n` panels.
    fn quad(f: impl Fn(f64) -> f64, n: usize) -> f64 {
        const X: [f64; 5] = [
            0.0,
            -0.538_469_310_105_683_1,
            0.538_469_310_105_683_1,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        const W: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let h = 1.0 / n as f64;
        (0..n)
            .map(|k| {
                let mid = (k as f64 + 0.5) * h;
                X.iter().zip(&W).map(|(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
            })
            .sum()
    }

    #[test]
    fn recurrence_matches_integral_definition() {
        let z: f64 = -0.5;
        // φ₁(z) = ∫₀¹ e^{(1−θ)z} dθ
        let phi1 = quad(|th| ((1.0 - th) * z).exp(), 64);
        assert!((phi_recurrence(z, 0).unwrap() - phi1).abs() < 1e-10);
        // φ₂(z) = ∫₀¹ e^{(1−θ)z} θ dθ
        let phi2 = quad(|th| ((1.0 - th) * z).exp() * th, 64);
        assert!((phi_recurrence(z, 1).unwrap() - phi2).abs() < 1e-10);
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        let a = SparseOperator::from_diagonal(&[1.0]).unwrap();
        assert!(matches!(expmv(1.0, &a, &[f64::NAN], 1e-8), Err(Error::NonFinite(_))));
        assert!(matches!(phi1v(f64::INFINITY, &a, &[1.0], 1e-8), Err(Error::NonFinite(_))));
        assert!(matches!(expmv(1.0, &a, &[1.0, 2.0], 1e-8), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn overflow_is_reported() {
        let a = SparseOperator::from_diagonal(&[1.0]).unwrap();
        let err = expmv(1000.0, &a, &[1.0], 1e-8).unwrap_err();
        assert!(matches!(err, Error::Overflow { .. }), "{err}");
        assert!(err.to_string().contains("smaller time step"));
    }

    proptest! {
        #[test]
        fn scalar_operators_match_closed_forms(a in -2.0f64..2.0, t in 0.01f64..1.0, b in -5.0f64..5.0) {
            // |ta| ≤ 2 keeps Taylor cancellation (≈ ε·e^{2|ta|}) below the asserted bound
            prop_assume!(a.abs() > 1e-3);
            let op = SparseOperator::from_diagonal(&[a]).unwrap();
            let e = expmv(t, &op, &[b], 1e-14).unwrap()[0];
            let exact = (t * a).exp() * b;
            prop_assert!((e - exact).abs() <= 1e-13 * exact.abs().max(1e-300), "{e} vs {exact}");
            let p = phi1v(t, &op, &[b], 1e-14).unwrap()[0];
            let exact = (t * a).exp_m1() / (t * a) * b;
            prop_assert!((p - exact).abs() <= 1e-13 * exact.abs().max(1e-300), "{p} vs {exact}");
        }
    }
}
