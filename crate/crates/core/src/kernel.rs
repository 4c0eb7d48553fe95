//! Normalized triggering kernels with optional truncation.
//!
//! A kernel is a density `φ` on `[0, ∞)` with `∫φ = 1`. When a truncation
//! width `B` is set the effective kernel is `φ(t)·1{t ≤ B}` and its
//! cumulative is `Φ(min(t, B))`.

use crate::error::{HawkesError, Result};
use crate::scalar::Real;

/// Tolerance on the trapezoid integral of a tabulated kernel.
pub const TABULATED_NORMALIZATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelFamily<T> {
    /// `φ(t) = β e^{-βt}`.
    Exponential { beta: T },
    /// Piecewise-linear density through the samples; zero past the last sample.
    Tabulated(TabulatedKernel<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel<T> {
    times: Vec<T>,
    values: Vec<T>,
    // trapezoid cumulative at each grid node
    cumulative: Vec<T>,
    // max of φ over [times[k], ∞)
    suffix_max: Vec<T>,
}

impl<T: Real> TabulatedKernel<T> {
    pub fn new(samples: &[(T, T)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(HawkesError::InvalidKernel(
                "tabulated kernel needs at least two samples".into(),
            ));
        }
        if samples[0].0 != T::zero() {
            return Err(HawkesError::InvalidKernel(
                "tabulated kernel grid must start at t = 0".into(),
            ));
        }
        let mut times = Vec::with_capacity(samples.len());
        let mut values = Vec::with_capacity(samples.len());
        for (k, &(t, v)) in samples.iter().enumerate() {
            if !t.is_finite() || !v.is_finite() {
                return Err(HawkesError::InvalidKernel(format!("non-finite sample {k}")));
            }
            if v < T::zero() {
                return Err(HawkesError::InvalidKernel(format!(
                    "negative density {v} at t = {t}"
                )));
            }
            if k > 0 && t <= times[k - 1] {
                return Err(HawkesError::InvalidKernel(
                    "tabulated grid must be strictly increasing".into(),
                ));
            }
            times.push(t);
            values.push(v);
        }
        let mut cumulative = vec![T::zero(); times.len()];
        let half = T::lit(0.5);
        for k in 1..times.len() {
            cumulative[k] =
                cumulative[k - 1] + (times[k] - times[k - 1]) * (values[k] + values[k - 1]) * half;
        }
        let total = *cumulative.last().unwrap();
        if (total.as_f64() - 1.0).abs() > TABULATED_NORMALIZATION_TOL {
            return Err(HawkesError::InvalidKernel(format!(
                "tabulated kernel integrates to {total}, expected 1"
            )));
        }
        let mut suffix_max = values.clone();
        for k in (0..times.len() - 1).rev() {
            suffix_max[k] = suffix_max[k].max(suffix_max[k + 1]);
        }
        Ok(Self {
            times,
            values,
            cumulative,
            suffix_max,
        })
    }

    pub fn samples(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    pub fn end(&self) -> T {
        *self.times.last().unwrap()
    }

    /// Index `k` with `times[k] <= t < times[k+1]`; caller ensures `0 <= t < end`.
    fn cell(&self, t: T) -> usize {
        match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t).expect("finite grid"))
        {
            Ok(k) => k.min(self.times.len() - 2),
            Err(k) => k - 1,
        }
    }

    fn density(&self, t: T) -> T {
        if t < T::zero() || t > self.end() {
            return T::zero();
        }
        let k = self.cell(t);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let w = (t - t0) / (t1 - t0);
        self.values[k] + w * (self.values[k + 1] - self.values[k])
    }

    fn cumulative(&self, t: T) -> T {
        if t <= T::zero() {
            return T::zero();
        }
        if t >= self.end() {
            return *self.cumulative.last().unwrap();
        }
        let k = self.cell(t);
        // exact integral of the linear interpolant on [times[k], t]
        self.cumulative[k] + (t - self.times[k]) * (self.values[k] + self.density(t)) * T::lit(0.5)
    }

    fn tail_sup(&self, t: T) -> T {
        if t > self.end() {
            return T::zero();
        }
        if t <= T::zero() {
            return self.suffix_max[0];
        }
        let k = self.cell(t);
        self.density(t).max(self.suffix_max[k + 1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec<T> {
    pub family: KernelFamily<T>,
    pub truncation: Option<T>,
}

impl<T: Real> KernelSpec<T> {
    pub fn exponential(beta: T) -> Result<Self> {
        if !(beta > T::zero()) || !beta.is_finite() {
            return Err(HawkesError::InvalidKernel(format!(
                "exponential rate must be positive, got {beta}"
            )));
        }
        Ok(Self {
            family: KernelFamily::Exponential { beta },
            truncation: None,
        })
    }

    pub fn tabulated(samples: &[(T, T)]) -> Result<Self> {
        Ok(Self {
            family: KernelFamily::Tabulated(TabulatedKernel::new(samples)?),
            truncation: None,
        })
    }

    pub fn with_truncation(mut self, width: Option<T>) -> Result<Self> {
        if let Some(b) = width {
            if !(b > T::zero()) {
                return Err(HawkesError::InvalidKernel(format!(
                    "truncation width must be positive, got {b}"
                )));
            }
        }
        self.truncation = width;
        Ok(self)
    }

    pub fn exponential_rate(&self) -> Option<T> {
        match self.family {
            KernelFamily::Exponential { beta } => Some(beta),
            KernelFamily::Tabulated(_) => None,
        }
    }

    /// Whether `Φ` has an analytic form (exponential family).
    pub fn has_closed_form_cumulative(&self) -> bool {
        matches!(self.family, KernelFamily::Exponential { .. })
    }

    /// Effective density `φ̃(t)`; zero for `t < 0` and past the truncation.
    pub fn density(&self, t: T) -> T {
        if t < T::zero() {
            return T::zero();
        }
        if let Some(b) = self.truncation {
            if t > b {
                return T::zero();
            }
        }
        match &self.family {
            KernelFamily::Exponential { beta } => *beta * (-*beta * t).exp(),
            KernelFamily::Tabulated(tab) => tab.density(t),
        }
    }

    /// Effective cumulative `Φ̃(t) = Φ(min(t, B))`; zero for `t < 0`.
    pub fn cumulative(&self, t: T) -> T {
        if t <= T::zero() {
            return T::zero();
        }
        let t = match self.truncation {
            Some(b) => t.min(b),
            None => t,
        };
        match &self.family {
            KernelFamily::Exponential { beta } => -(-*beta * t).exp_m1(),
            KernelFamily::Tabulated(tab) => tab.cumulative(t),
        }
    }

    /// `Φ̃(hi) - Φ̃(lo)` for `lo <= hi`.
    pub fn cumulative_increment(&self, lo: T, hi: T) -> T {
        if hi <= T::zero() {
            return T::zero();
        }
        match (&self.family, self.truncation) {
            (KernelFamily::Exponential { beta }, None) if lo > T::zero() => {
                // e^{-β lo} (1 - e^{-β(hi-lo)}) avoids cancellation for old events
                (-*beta * lo).exp() * -(-*beta * (hi - lo)).exp_m1()
            }
            _ => self.cumulative(hi) - self.cumulative(lo),
        }
    }

    /// `sup_{s >= t} φ̃(s)`, the envelope used to bound intensities ahead of `t`.
    pub fn tail_sup(&self, t: T) -> T {
        if let Some(b) = self.truncation {
            if t > b {
                return T::zero();
            }
        }
        match &self.family {
            KernelFamily::Exponential { .. } => self.density(t.max(T::zero())),
            KernelFamily::Tabulated(tab) => tab.tail_sup(t),
        }
    }

    /// Width beyond which the effective kernel vanishes, if finite.
    pub fn support(&self) -> Option<T> {
        let natural = match &self.family {
            KernelFamily::Exponential { .. } => None,
            KernelFamily::Tabulated(tab) => Some(tab.end()),
        };
        match (natural, self.truncation) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Total mass `Φ̃(∞)`.
    pub fn mass(&self) -> T {
        match self.support() {
            Some(w) => self.cumulative(w),
            None => T::one(),
        }
    }

    /// Diagnostics for violated kernel invariants (empty when valid).
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        match &self.family {
            KernelFamily::Exponential { beta } => {
                if !(*beta > T::zero()) {
                    out.push(format!("exponential rate {beta} is not positive"));
                }
            }
            KernelFamily::Tabulated(tab) => {
                let total = *tab.cumulative.last().unwrap();
                if (total.as_f64() - 1.0).abs() > TABULATED_NORMALIZATION_TOL {
                    out.push(format!("kernel integrates to {total}, not 1"));
                }
            }
        }
        if let Some(b) = self.truncation {
            if !(b > T::zero()) {
                out.push(format!("truncation width {b} is not positive"));
            }
        }
        out
    }
}
