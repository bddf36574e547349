//! Small numeric helpers shared across modules.

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut c = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Accumulates several compensated sums in lockstep.
#[derive(Debug, Clone)]
pub struct SumBank {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl SumBank {
    pub fn new(len: usize) -> Self {
        SumBank {
            sum: vec![0.0; len],
            comp: vec![0.0; len],
        }
    }

    #[inline]
    pub fn add(&mut self, k: usize, v: f64) {
        let s = self.sum[k];
        let t = s + v;
        if s.abs() >= v.abs() {
            self.comp[k] += (s - t) + v;
        } else {
            self.comp[k] += (v - t) + s;
        }
        self.sum[k] = t;
    }

    pub fn merge(mut self, other: &SumBank) -> Self {
        for k in 0..self.sum.len() {
            self.add(k, other.sum[k]);
            self.add(k, other.comp[k]);
        }
        self
    }

    pub fn totals(&self) -> Vec<f64> {
        self.sum.iter().zip(&self.comp).map(|(s, c)| s + c).collect()
    }
}

/// Symmetric relative residual `|a - b| / (|a| + |b| + floor)`.
pub fn relative_residual(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs() + RELATIVE_FLOOR)
}

/// Absolute guard in relative residuals; both sides may legitimately vanish.
pub const RELATIVE_FLOOR: f64 = 1e-300;

/// Formats a float with 17 significant digits (round-trip exact).
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{:.16e}", x)
    }
}

pub fn fmt17_opt(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}
