//! Small numerical helpers shared by the statistics and models.

/// Neumaier (improved Kahan-Babuska) compensated accumulator.
///
/// The error of the final sum does not grow with the number of terms, so
/// sums over permuted inputs agree to within an ulp or two.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of a sequence of floats.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

/// `x * ln(x / y)` with the convention `0 * ln 0 = 0`.
#[inline]
pub(crate) fn xlogy_ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

/// Relative slack used when deciding whether a simulated statistic is at
/// least as large as the observed one. Mathematically tied values computed
/// through different summation paths can differ in the last bits.
pub const TIE_RELATIVE_TOLERANCE: f64 = 1e-12;

/// Inclusive "at least as large as" with floating-point tie slack.
/// Infinite observed values are matched only by infinite simulated ones.
#[inline]
pub fn at_least(simulated: f64, observed: f64) -> bool {
    if observed.is_infinite() {
        return simulated.is_infinite() && simulated > 0.0;
    }
    simulated >= observed - TIE_RELATIVE_TOLERANCE * observed.abs()
}
