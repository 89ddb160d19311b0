//! Adaptive Simpson quadrature on a finite interval.

/// Controls for [`adaptive_simpson`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Target error relative to the magnitude of the integral.
    pub rel_tol: f64,
    /// Bisection depth limit per initial panel.
    pub max_depth: u32,
    /// Number of equal panels the interval is split into before refinement.
    pub initial_panels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_depth: 40,
            initial_panels: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Sum of local Richardson error estimates.
    pub error: f64,
    pub evaluations: usize,
    /// True when every leaf met its tolerance before hitting `max_depth`.
    pub converged: bool,
}

struct Panel {
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
}

fn simpson(a: f64, fa: f64, fm: f64, b: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Integrates `f` over `[a, b]`.
///
/// The absolute target is `rel_tol` times the magnitude of a coarse
/// first-pass estimate, split evenly across the initial panels and halved at
/// each refinement.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Quadrature
where
    F: Fn(f64) -> f64,
{
    if b <= a {
        return Quadrature {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
            converged: true,
        };
    }
    let n = cfg.initial_panels.max(1);
    let h = (b - a) / n as f64;
    let mut evaluations = 0usize;
    let mut eval = |x: f64| {
        evaluations += 1;
        f(x)
    };

    let mut panels = Vec::with_capacity(n);
    let mut fa = eval(a);
    for i in 0..n {
        let pa = a + h * i as f64;
        let pb = if i + 1 == n { b } else { a + h * (i + 1) as f64 };
        let pm = 0.5 * (pa + pb);
        let fm = eval(pm);
        let fb = eval(pb);
        panels.push(Panel {
            a: pa,
            fa,
            m: pm,
            fm,
            b: pb,
            fb,
            whole: simpson(pa, fa, fm, pb, fb),
        });
        fa = fb;
    }

    let scale: f64 = panels.iter().map(|p| p.whole.abs()).sum();
    if scale == 0.0 || !scale.is_finite() {
        let value = panels.iter().map(|p| p.whole).sum();
        return Quadrature {
            value,
            error: 0.0,
            evaluations,
            converged: scale.is_finite(),
        };
    }
    let tol = cfg.rel_tol * scale / n as f64;

    let mut value = 0.0;
    let mut error = 0.0;
    let mut converged = true;
    for p in panels {
        let (v, e, ok) = refine(&mut eval, p, tol, cfg.max_depth);
        value += v;
        error += e;
        converged &= ok;
    }
    Quadrature {
        value,
        error,
        evaluations,
        converged,
    }
}

fn refine<F: FnMut(f64) -> f64>(f: &mut F, p: Panel, tol: f64, depth: u32) -> (f64, f64, bool) {
    let lm = 0.5 * (p.a + p.m);
    let rm = 0.5 * (p.m + p.b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(p.a, p.fa, flm, p.m, p.fm);
    let right = simpson(p.m, p.fm, frm, p.b, p.fb);
    let delta = left + right - p.whole;
    if delta.abs() <= 15.0 * tol {
        return (left + right + delta / 15.0, delta.abs() / 15.0, true);
    }
    if depth == 0 {
        return (left + right + delta / 15.0, delta.abs() / 15.0, false);
    }
    let (lv, le, lok) = refine(
        f,
        Panel {
            a: p.a,
            fa: p.fa,
            m: lm,
            fm: flm,
            b: p.m,
            fb: p.fm,
            whole: left,
        },
        tol * 0.5,
        depth - 1,
    );
    let (rv, re, rok) = refine(
        f,
        Panel {
            a: p.m,
            fa: p.fm,
            m: rm,
            fm: frm,
            b: p.b,
            fb: p.fb,
            whole: right,
        },
        tol * 0.5,
        depth - 1,
    );
    (lv + rv, le + re, lok && rok)
}
