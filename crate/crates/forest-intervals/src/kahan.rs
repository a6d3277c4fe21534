/// Compensated summation accumulator.
///
/// Keeps a running correction term so that long sums of small weights do not
/// drift. Used everywhere a probability mass or a mean is accumulated, so
/// that results are reproducible and accurate independent of input length.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let y = value - self.compensation;
        let t = self.sum + y;
        self.compensation = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Sums a slice with compensation, in slice order.
pub fn kahan_sum(values: &[f64]) -> f64 {
    let mut acc = KahanSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_exactly_on_small_input() {
        assert_eq!(kahan_sum(&[1.0, 2.0, 3.0]), 6.0);
    }

    #[test]
    fn recovers_mass_lost_by_naive_summation() {
        // 10^7 copies of 10^-7 should sum to exactly 1 under compensation.
        let mut acc = KahanSum::new();
        for _ in 0..10_000_000 {
            acc.add(1e-7);
        }
        assert_eq!(acc.value(), 1.0);

        let mut naive = 0.0;
        for _ in 0..10_000_000 {
            naive += 1e-7;
        }
        assert_ne!(naive, 1.0);
    }

    #[test]
    fn empty_sum_is_zero() {
        assert_eq!(kahan_sum(&[]), 0.0);
    }
}
