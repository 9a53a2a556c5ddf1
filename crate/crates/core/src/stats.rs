//! Running moments for Monte Carlo estimates.

/// Sum and sum of squares of per-trial values. Merging is exact addition, so
/// a fixed merge order gives bit-identical results.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, value: f64) {
        self.count += 1;
        self.sum += value;
        self.sum_sq += value * value;
    }

    pub fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn estimate(&self) -> Estimate {
        let n = self.count as f64;
        if self.count == 0 {
            return Estimate {
                value: f64::NAN,
                ci_halfwidth: f64::NAN,
                trials: 0,
            };
        }
        let mean = self.sum / n;
        let ci_halfwidth = if self.count > 1 {
            let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
            1.96 * (var / n).sqrt()
        } else {
            0.0
        };
        Estimate {
            value: mean,
            ci_halfwidth,
            trials: self.count,
        }
    }
}

/// Sample mean with a 95% normal-approximation half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub ci_halfwidth: f64,
    pub trials: u64,
}

impl Estimate {
    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        self.ci_halfwidth / 1.96
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_moments() {
        let mut m = Moments::default();
        for i in 0..100 {
            m.push(if i % 4 == 0 { 1.0 } else { 0.0 });
        }
        let e = m.estimate();
        assert_eq!(e.value, 0.25);
        let expect = 1.96 * (0.25 * 0.75 * 100.0 / 99.0 / 100.0f64).sqrt();
        assert!((e.ci_halfwidth - expect).abs() < 1e-12);
        assert_eq!(e.trials, 100);

        let mut one = Moments::default();
        one.push(0.3);
        assert_eq!(one.estimate().ci_halfwidth, 0.0);

        let mut a = Moments::default();
        let mut b = Moments::default();
        a.push(1.0);
        b.push(3.0);
        a.merge(&b);
        assert_eq!(a.estimate().value, 2.0);
        assert!(Moments::default().estimate().value.is_nan());
    }
}
