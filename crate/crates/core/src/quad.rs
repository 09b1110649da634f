//! Adaptive Simpson quadrature on a finite interval.

use std::cell::Cell;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    /// Truncation point `T` of the infinite `t`-integrals; `None` means the
    /// caller's default (`50 log x` for Euler-product integrals).
    pub t_cut: Option<f64>,
    pub rel_tol: f64,
    /// Absolute tolerance floor, for integrals whose value is close to zero.
    pub abs_tol: f64,
    pub max_depth: u32,
    pub max_evaluations: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { t_cut: None, rel_tol: 1e-6, abs_tol: 1e-300, max_depth: 40, max_evaluations: 20_000_000 }
    }
}

impl QuadConfig {
    pub fn with_t_cut(self, t_cut: f64) -> Self {
        Self { t_cut: Some(t_cut), ..self }
    }

    pub fn with_rel_tol(self, rel_tol: f64) -> Self {
        Self { rel_tol, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.t_cut {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::invalid(format!("truncation T must be positive, got {t}")));
            }
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::invalid(format!("relative tolerance must lie in (0, 1), got {}", self.rel_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    /// Sum of the local Richardson error estimates `|S2 - S1| / 15`.
    pub error_estimate: f64,
    pub evaluations: usize,
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    depth: u32,
}

/// Integrates `f` over `[a, b]`. The interval is first cut into
/// `initial_panels` equal pieces (so oscillations shorter than the interval
/// are not missed), then each piece is bisected until the two-level Simpson
/// difference is within its share of the global tolerance
/// `max(rel_tol * |I|, abs_tol)`.
pub fn adaptive_simpson(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    initial_panels: usize,
    cfg: &QuadConfig,
) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::invalid(format!("bad integration interval [{a}, {b}]")));
    }
    if b == a {
        return Ok(QuadResult { value: 0.0, error_estimate: 0.0, evaluations: 0 });
    }
    let panels = initial_panels.max(1);
    let h = (b - a) / panels as f64;
    let evals = Cell::new(0usize);
    let eval = |t: f64| {
        evals.set(evals.get() + 1);
        f(t)
    };

    let mut stack: Vec<Panel> = Vec::with_capacity(panels + 64);
    let mut coarse = 0.0;
    let mut fa = eval(a);
    for i in 0..panels {
        let pa = a + h * i as f64;
        let pb = if i + 1 == panels { b } else { a + h * (i + 1) as f64 };
        let fm = eval(0.5 * (pa + pb));
        let fb = eval(pb);
        let whole = (pb - pa) / 6.0 * (fa + 4.0 * fm + fb);
        coarse += whole;
        stack.push(Panel { a: pa, b: pb, fa, fm, fb, whole, depth: 0 });
        fa = fb;
    }
    stack.reverse();

    let tol = (cfg.rel_tol * coarse.abs()).max(cfg.abs_tol);
    let width = b - a;
    let mut value = 0.0;
    let mut err = 0.0;
    let mut unconverged = false;

    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        let flm = eval(lm);
        let frm = eval(rm);
        let left = (m - p.a) / 6.0 * (p.fa + 4.0 * flm + p.fm);
        let right = (p.b - m) / 6.0 * (p.fm + 4.0 * frm + p.fb);
        let split = left + right;
        let diff = split - p.whole;
        let local_tol = tol * (p.b - p.a) / width;
        if !diff.is_finite() {
            return Err(Error::Quadrature { partial: value, error_estimate: f64::INFINITY, evaluations: evals.get() });
        }
        if diff.abs() <= 15.0 * local_tol || p.depth >= cfg.max_depth {
            if diff.abs() > 15.0 * local_tol {
                unconverged = true;
            }
            value += split + diff / 15.0;
            err += diff.abs() / 15.0;
        } else {
            stack.push(Panel { a: m, b: p.b, fa: p.fm, fm: frm, fb: p.fb, whole: right, depth: p.depth + 1 });
            stack.push(Panel { a: p.a, b: m, fa: p.fa, fm: flm, fb: p.fm, whole: left, depth: p.depth + 1 });
        }
        if evals.get() > cfg.max_evaluations {
            unconverged = true;
            // Account for what is still on the stack so the partial value is
            // the best available estimate.
            for q in stack.drain(..) {
                value += q.whole;
            }
            err = f64::INFINITY;
            break;
        }
    }

    if unconverged {
        return Err(Error::Quadrature { partial: value, error_estimate: err, evaluations: evals.get() });
    }
    Ok(QuadResult { value, error_estimate: err, evaluations: evals.get() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomials_are_exact() {
        let cfg = QuadConfig::default();
        let r = adaptive_simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1, &cfg).unwrap();
        assert!((r.value - 0.0).abs() < 1e-14);
        let r = adaptive_simpson(|x| x * x, -1.0, 3.0, 4, &cfg).unwrap();
        assert!((r.value - 28.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn lorentzian_against_arctan() {
        let cfg = QuadConfig::default().with_rel_tol(1e-10);
        let t = 200.0;
        let r = adaptive_simpson(|x| 1.0 / (0.25 + x * x), 0.0, t, 16, &cfg).unwrap();
        let exact = 2.0 * (2.0 * t).atan();
        assert!((r.value - exact).abs() < 1e-8 * exact);
        assert!(r.error_estimate < 1e-8);
    }

    #[test]
    fn oscillatory_integrand() {
        let cfg = QuadConfig::default().with_rel_tol(1e-9);
        let r = adaptive_simpson(|x| (5.0 * x).cos().powi(2), 0.0, 10.0 * PI, 50, &cfg).unwrap();
        assert!((r.value - 5.0 * PI).abs() < 1e-7);
    }

    #[test]
    fn failure_carries_partial_result() {
        let cfg = QuadConfig { max_evaluations: 100, ..QuadConfig::default().with_rel_tol(1e-12) };
        let err = adaptive_simpson(|x| (1.0 / (x + 1e-3)).sin(), 0.0, 1.0, 1, &cfg).unwrap_err();
        match err {
            Error::Quadrature { evaluations, .. } => assert!(evaluations > 100),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(QuadConfig::default().validate().is_ok());
        assert!(QuadConfig::default().with_t_cut(-1.0).validate().is_err());
        assert!(QuadConfig::default().with_rel_tol(0.0).validate().is_err());
    }
}
