//! Composite Simpson quadrature with doubling and Richardson extrapolation.

use crate::error::{MatchError, Result};

const MAX_DOUBLINGS: u32 = 22;

/// Integrates `f` over `[a, b]`, splitting at every breakpoint that falls
/// strictly inside the interval. Each piece is refined by halving the step
/// until two successive Simpson estimates differ by less than the piece's
/// share of `tol`; the returned value carries the Richardson correction.
pub fn integrate<F>(mut f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(b > a) {
        return Ok(0.0);
    }
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&c| c > a && c < b && c.is_finite())
        .collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();

    let mut nodes = Vec::with_capacity(cuts.len() + 2);
    nodes.push(a);
    nodes.extend(cuts);
    nodes.push(b);

    let width = b - a;
    let mut total = 0.0;
    for w in nodes.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo <= 0.0 {
            continue;
        }
        let share = tol * ((hi - lo) / width).max(1e-3);
        total += simpson_piece(&mut f, lo, hi, share)?;
    }
    Ok(total)
}

fn simpson_piece<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, tol: f64) -> Result<f64> {
    // Running sums of endpoint, odd and even interior samples.
    let ends = f(a) + f(b);
    let mut panels: usize = 2;
    let mut h = (b - a) / panels as f64;
    let mut even = 0.0;
    let mut odd = f(a + h);
    let mut prev = (ends + 4.0 * odd + 2.0 * even) * h / 3.0;

    let mut diff = f64::NAN;
    for _ in 0..MAX_DOUBLINGS {
        even += odd;
        panels *= 2;
        h = (b - a) / panels as f64;
        odd = 0.0;
        let mut k = 1;
        while k < panels {
            odd += f(a + k as f64 * h);
            k += 2;
        }
        let cur = (ends + 4.0 * odd + 2.0 * even) * h / 3.0;
        diff = cur - prev;
        if diff.abs() <= tol * cur.abs().max(1.0) && panels >= 16 {
            return Ok(cur + diff / 15.0);
        }
        prev = cur;
    }
    Err(MatchError::Quadrature {
        residual: diff.abs(),
        tol,
    })
}
