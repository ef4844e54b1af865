//! Adaptive Gauss–Kronrod (7/15) quadrature in one and two dimensions.
//!
//! The two-dimensional rule is nested: the inner integral is itself an
//! adaptive integral, with caller-supplied breakpoints so kinks of the
//! integrand fall on panel boundaries.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

/// Adaptive integral of `f` over `[a, b]`, split first at `breaks`.
///
/// Panels are bisected in order of largest error estimate until the summed
/// estimate drops below `tol` or `max_evals` is exhausted.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, breaks: &[f64], tol: f64, max_evals: usize) -> Result<QuadResult> {
    let mut pts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|x| *x > a && *x < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    pts.extend(inner);
    pts.push(b);
    let mut heap = BinaryHeap::new();
    let mut evals = 0;
    for w in pts.windows(2) {
        if w[1] > w[0] {
            let (value, error) = gk15(&mut f, w[0], w[1]);
            evals += 15;
            heap.push(Panel { a: w[0], b: w[1], value, error });
        }
    }
    loop {
        let total_err: f64 = heap.iter().map(|p| p.error).sum();
        if total_err <= tol || heap.is_empty() {
            let value = heap.iter().map(|p| p.value).sum();
            return Ok(QuadResult { value, error: total_err, evals });
        }
        if evals + 30 > max_evals {
            return Err(Error::Numerical { what: "adaptive quadrature".into(), achieved: total_err });
        }
        let worst = heap.pop().expect("non-empty heap");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            return Err(Error::Numerical { what: "adaptive quadrature (panel underflow)".into(), achieved: total_err });
        }
        for (a, b) in [(worst.a, m), (m, worst.b)] {
            let (value, error) = gk15(&mut f, a, b);
            heap.push(Panel { a, b, value, error });
        }
        evals += 30;
    }
}

/// Nested 2-D integral `∫_{x} ∫_{y} f(x, y) dy dx`.
///
/// `x_breaks` are fixed outer breakpoints; `y_breaks(x)` returns the inner
/// breakpoints for a given `x`. The inner tolerance is a tenth of `tol`
/// divided by the outer width.
#[allow(clippy::too_many_arguments)]
pub fn integrate_2d<F, B>(
    f: F,
    (xa, xb): (f64, f64),
    x_breaks: &[f64],
    (ya, yb): (f64, f64),
    y_breaks: B,
    tol: f64,
    max_evals: usize,
) -> Result<QuadResult>
where
    F: Fn(f64, f64) -> f64,
    B: Fn(f64) -> Vec<f64>,
{
    let inner_tol = 0.1 * tol / (xb - xa).abs().max(1e-300);
    let count = Cell::new(0usize);
    let failure: Cell<Option<f64>> = Cell::new(None);
    let outer = integrate(
        |x| {
            let remaining = max_evals.saturating_sub(count.get());
            match integrate(|y| f(x, y), ya, yb, &y_breaks(x), inner_tol, remaining) {
                Ok(r) => {
                    count.set(count.get() + r.evals);
                    r.value
                }
                Err(e) => {
                    if let Error::Numerical { achieved, .. } = e {
                        failure.set(Some(achieved));
                    }
                    count.set(max_evals);
                    0.0
                }
            }
        },
        xa,
        xb,
        x_breaks,
        0.9 * tol,
        max_evals,
    );
    if let Some(achieved) = failure.get() {
        return Err(Error::Numerical { what: "inner quadrature".into(), achieved });
    }
    let r = outer?;
    Ok(QuadResult { value: r.value, error: r.error + 0.1 * tol, evals: count.get() + r.evals })
}
