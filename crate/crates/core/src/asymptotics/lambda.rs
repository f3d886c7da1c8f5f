//! The regime-II constant Λ, its approximating sequence λₙ, and the root `c₂(ε)`.

use crate::error::{Error, Result};
use crate::numeric;

fn check_common(a: f64, b: f64, q: f64, beta: f64) -> Result<f64> {
    if !(a > b && b > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "requires a > b > 0 (got a = {a}, b = {b})"
        )));
    }
    if !(q > 0.0 && q < 1.0) || !(beta > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "requires 0 < q < 1 and beta > 1 (got q = {q}, beta = {beta})"
        )));
    }
    let k = (1.0 - q).powf(-beta / (beta - 1.0));
    if !(a > b * k) {
        return Err(Error::RegimeMismatch(format!(
            "requires a > b (1/(1-q))^(beta/(beta-1)) = {:e} (got a = {a})",
            b * k
        )));
    }
    Ok(k)
}

/// Positive root of `a Λ^β − Λ − b Λ^β (1−q)^{−β/(β−1)} = 0` by bisection.
/// Independent of the closed form; used to cross-check it.
pub fn capital_lambda_by_root(a: f64, b: f64, q: f64, beta: f64) -> Result<f64> {
    let k = check_common(a, b, q, beta)?;
    // divided by Λ: (a − bK) Λ^{β−1} − 1, increasing in Λ
    let f = |l: f64| a * l.powf(beta - 1.0) - b * k * l.powf(beta - 1.0) - 1.0;
    let (lo, hi) = numeric::expand_bracket_log(f, 0.5, 2.0, 4.0, 400)?;
    // the bracket only grows outward, so hi can exceed the root by many decades
    numeric::bisect(f, lo, hi, 1e-15 * lo)
}

/// `Λ = (a − b (1−q)^{−β/(β−1)})^{−1/(β−1)}`, cross-checked against the root
/// of the defining polynomial.
pub fn capital_lambda(a: f64, b: f64, q: f64, beta: f64) -> Result<f64> {
    let k = check_common(a, b, q, beta)?;
    let closed = (a - b * k).powf(-1.0 / (beta - 1.0));
    let root = capital_lambda_by_root(a, b, q, beta)?;
    if ((closed - root) / closed).abs() > 1e-10 {
        return Err(Error::Internal(format!(
            "closed form {closed:e} and polynomial root {root:e} for Lambda disagree"
        )));
    }
    Ok(closed)
}

/// Gaps `Λ − λₙ`, n = 1..=n, computed directly so they keep full relative
/// precision after λₙ itself has rounded to Λ.
pub fn lambda_sequence_gaps(a: f64, b: f64, q: f64, beta: f64, n: usize) -> Result<Vec<f64>> {
    let k = check_common(a, b, q, beta)?;
    let big = capital_lambda(a, b, q, beta)?;
    let lam1 = a.powf(-1.0 / (beta - 1.0));
    let mut gaps = Vec::with_capacity(n);
    if n == 0 {
        return Ok(gaps);
    }
    let e1 = big - lam1;
    if !(e1 > 0.0) {
        return Err(Error::Internal(format!(
            "lambda_1 = {lam1} is not below Lambda = {big}"
        )));
    }
    gaps.push(e1);
    let p = a * big.powf(beta);
    let pk = b * k * big.powf(beta);
    // With λ = Λ − e and (a − bK)Λ^{β−1} = 1 the recursion
    // a λ_{n+1}^β = λ_{n+1} + bK λ_n^β becomes
    // a Λ^β expm1(β L(e)) − bK Λ^β expm1(β L(e_n)) + e = 0, L(e) = log1p(−e/Λ).
    let l = |e: f64| (-e / big).ln_1p();
    for _ in 1..n {
        let en = *gaps.last().unwrap();
        if en == 0.0 {
            gaps.push(0.0);
            continue;
        }
        let rhs = pk * (beta * l(en)).exp_m1();
        let fdf = |e: f64| {
            let v = p * (beta * l(e)).exp_m1() - rhs + e;
            let lam = big - e;
            (v, 1.0 - a * beta * lam.powf(beta - 1.0))
        };
        let e = numeric::safeguarded_newton(fdf, 0.0, en, en * 1e-16)?;
        if !(e >= 0.0 && e <= en) {
            return Err(Error::Internal(format!(
                "lambda sequence root left (lambda_n, Lambda): gap {e:e} vs previous {en:e}"
            )));
        }
        gaps.push(e);
    }
    Ok(gaps)
}

/// `λ₁ = a^{−1/(β−1)}` and `a λₙ₊₁^β = λₙ₊₁ + b λₙ^β (1−q)^{−β/(β−1)}`.
pub fn lambda_sequence(a: f64, b: f64, q: f64, beta: f64, n: usize) -> Result<Vec<f64>> {
    let big = capital_lambda(a, b, q, beta)?;
    let gaps = lambda_sequence_gaps(a, b, q, beta, n)?;
    let mut out: Vec<f64> = gaps.iter().map(|e| big - e).collect();
    if let Some(first) = out.first_mut() {
        *first = a.powf(-1.0 / (beta - 1.0));
    }
    Ok(out)
}

/// Unique root in `(0, log(a/b))` of `g_ε(c) = −εc + a − b e^{c(1+ε)}`.
pub fn c2_root(a: f64, b: f64, eps: f64) -> Result<f64> {
    if !(a > b && b > 0.0) {
        return Err(Error::domain(
            "c2_root",
            format!("requires a > b > 0 (got a = {a}, b = {b})"),
        ));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::domain("c2_root", format!("requires 0 < eps < 1 (got {eps})")));
    }
    let hi = (a / b).ln();
    let f = |c: f64| -eps * c + a - b * (c * (1.0 + eps)).exp();
    numeric::bisect(f, 0.0, hi, 1e-15 * hi)
}
