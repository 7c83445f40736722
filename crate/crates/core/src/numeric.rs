//! Small log-space helpers shared by the engines.

/// `log(exp(a) + exp(b))`.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `log Σ exp(v)`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Accumulates `exp(log_weight)` into cells while tracking a running
/// maximum, so that arbitrarily large or small log-weights never overflow.
#[derive(Clone, Debug)]
pub struct ScaledAccumulator {
    shift: f64,
    cells: Vec<f64>,
}

impl ScaledAccumulator {
    pub fn new(len: usize) -> Self {
        ScaledAccumulator {
            shift: f64::NEG_INFINITY,
            cells: vec![0.0; len],
        }
    }

    /// Rebases to `log_weight` if it exceeds the current shift and returns
    /// the linear weight relative to the shift.
    #[inline]
    pub fn weight(&mut self, log_weight: f64) -> f64 {
        if log_weight == f64::NEG_INFINITY {
            return 0.0;
        }
        if log_weight > self.shift {
            if self.shift > f64::NEG_INFINITY {
                let r = (self.shift - log_weight).exp();
                self.cells.iter_mut().for_each(|c| *c *= r);
            }
            self.shift = log_weight;
        }
        (log_weight - self.shift).exp()
    }

    #[inline]
    pub fn add(&mut self, cell: usize, w: f64) {
        self.cells[cell] += w;
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_direct() {
        let v = [0.1, -2.0, 3.5];
        let direct: f64 = v.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&v) - direct).abs() < 1e-14);
        assert!((log_add(0.1, 3.5) - (0.1f64.exp() + 3.5f64.exp()).ln()).abs() < 1e-14);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn accumulator_survives_extreme_weights() {
        let mut acc = ScaledAccumulator::new(2);
        let w = acc.weight(-1000.0);
        acc.add(0, w);
        let w = acc.weight(1000.0);
        acc.add(1, w);
        let total: f64 = acc.cells().iter().sum();
        assert!((acc.cells()[1] / total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn compensated_sum_cancels() {
        let mut s = CompensatedSum::default();
        for v in [1e16, 1.0, -1e16, 1.0] {
            s.add(v);
        }
        assert_eq!(s.value(), 2.0);
    }
}
