//! Compensated accumulation.
//!
//! Every reduction in the crate goes through these accumulators in a fixed
//! order, so results do not depend on thread scheduling.

use crate::C64;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Component-wise compensated sum of complex values.
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexSum {
    re: CompensatedSum,
    im: CompensatedSum,
}

impl ComplexSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: C64) {
        self.re.add(value.re);
        self.im.add(value.im);
    }

    #[inline]
    pub fn value(&self) -> C64 {
        C64::new(self.re.value(), self.im.value())
    }
}

impl FromIterator<C64> for ComplexSum {
    fn from_iter<I: IntoIterator<Item = C64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

pub fn sum_f64<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

pub fn sum_c64<I: IntoIterator<Item = C64>>(iter: I) -> C64 {
    iter.into_iter().collect::<ComplexSum>().value()
}

/// Compensated accumulator for a fixed-length vector of complex values.
#[derive(Debug, Clone)]
pub struct VecSum {
    parts: Vec<ComplexSum>,
}

impl VecSum {
    pub fn new(dim: usize) -> Self {
        Self {
            parts: vec![ComplexSum::new(); dim],
        }
    }

    pub fn add_slice(&mut self, values: &[C64]) {
        for (acc, v) in self.parts.iter_mut().zip(values) {
            acc.add(*v);
        }
    }

    pub fn add_scaled(&mut self, values: &[C64], scale: f64) {
        for (acc, v) in self.parts.iter_mut().zip(values) {
            acc.add(*v * scale);
        }
    }

    pub fn values(&self) -> Vec<C64> {
        self.parts.iter().map(ComplexSum::value).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_small_terms_lost_by_naive_summation() {
        let values = [1.0, 1e100, 1.0, -1e100];
        let naive: f64 = values.iter().sum();
        assert_eq!(naive, 0.0);
        assert_eq!(sum_f64(values), 2.0);
    }

    #[test]
    fn complex_sum_is_componentwise() {
        let s = sum_c64([C64::new(1.0, 1e16), C64::new(1e-16, 1.0), C64::new(0.0, -1e16)]);
        assert_eq!(s.im, 1.0);
        assert!((s.re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn order_is_fixed() {
        let v: Vec<f64> = (0..1000).map(|k| 1.0 / (k as f64 + 1.0)).collect();
        assert_eq!(sum_f64(v.iter().copied()).to_bits(), sum_f64(v.iter().copied()).to_bits());
    }
}
