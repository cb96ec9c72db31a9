//! Compensated summation and running moments.

/// Neumaier-compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    c: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(mut self, other: Neumaier) -> Neumaier {
        self.add(other.sum);
        self.add(other.c);
        self
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

pub fn neumaier<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = Neumaier::default();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Mean, unbiased variance and the standard errors of both, from one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMoments {
    pub n: usize,
    pub mean: f64,
    /// Unbiased (n - 1) variance.
    pub var: f64,
    pub se_mean: f64,
    pub se_var: f64,
}

impl SampleMoments {
    /// Two-pass, compensated.
    pub fn of(xs: &[f64]) -> SampleMoments {
        let n = xs.len();
        let nf = n as f64;
        let mean = neumaier(xs.iter().copied()) / nf;
        let mut s2 = Neumaier::default();
        let mut s4 = Neumaier::default();
        for &x in xs {
            let d = (x - mean) * (x - mean);
            s2.add(d);
            s4.add(d * d);
        }
        let m2 = s2.value() / nf;
        let m4 = s4.value() / nf;
        let var = if n > 1 { s2.value() / (nf - 1.0) } else { 0.0 };
        SampleMoments {
            n,
            mean,
            var,
            se_mean: (var / nf).sqrt(),
            se_var: ((m4 - m2 * m2).max(0.0) / nf).sqrt(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(neumaier(xs), 2.0);
        let mut a = Neumaier::default();
        a.add(1e16);
        a.add(1.0);
        let mut b = Neumaier::default();
        b.add(-1e16);
        b.add(1.0);
        assert_eq!(a.merge(b).value(), 2.0);
    }

    #[test]
    fn sample_moments_small_case() {
        let m = SampleMoments::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.var - 5.0 / 3.0).abs() < 1e-15);
        assert!((m.se_mean - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }
}
