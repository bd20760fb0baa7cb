use super::{evaluate_method, record, summarize, CellRecord, MethodSpec, ReplicationSummary};
use crate::error::{check_level, invalid, Error, Result};
use crate::evt::EmpiricalSample;
use crate::rng::{label, StreamKey};
use crate::robust_eval::{sample_cvar, WeightedAtoms};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::Range;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPlan {
    /// Total data length N.
    pub len: usize,
    /// Window size n.
    pub n: usize,
    pub stride: usize,
    pub reps: usize,
    pub grid: Vec<f64>,
}

impl WindowPlan {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.stride == 0 || self.reps == 0 {
            return Err(invalid("window size ≥ 2, stride ≥ 1 and reps ≥ 1 required"));
        }
        if self.grid.is_empty() {
            return Err(invalid("β grid is empty"));
        }
        for b in &self.grid {
            check_level(*b)?;
        }
        if self.stride * self.reps + self.n > self.len {
            return Err(Error::PlanOverrun {
                stride: self.stride,
                windows: self.reps,
                length: self.n,
                available: self.len,
            });
        }
        Ok(())
    }

    /// Zero-based index range of window k ∈ 1..=reps, i.e. Z_{sk+1..sk+n}.
    pub fn window(&self, k: usize) -> Range<usize> {
        self.stride * k..self.stride * k + self.n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStudy {
    /// `rep` holds the window index k.
    pub records: Vec<CellRecord>,
    /// Full-sample CVaR per β.
    pub benchmark: Vec<(f64, f64)>,
    /// Quartiles across windows against the benchmark; a stability diagnostic, not a sampling distribution.
    pub diagnostics: Vec<ReplicationSummary>,
}

/// Evaluate each method on overlapping windows of time-ordered data.
pub fn run_rolling_windows(data: &[f64], plan: &WindowPlan, methods: &[MethodSpec], seed: u64) -> Result<WindowStudy> {
    if plan.len != data.len() {
        return Err(Error::DimensionMismatch { expected: plan.len, got: data.len() });
    }
    plan.validate()?;
    let full = EmpiricalSample::new(data.to_vec())?;
    let atoms = WeightedAtoms::uniform(&full);
    let benchmark: Vec<(f64, f64)> =
        plan.grid.iter().map(|b| Ok((*b, sample_cvar(&atoms, *b)?))).collect::<Result<_>>()?;
    let key = StreamKey::root(seed);
    let per_window: Vec<Result<Vec<CellRecord>>> = (1..=plan.reps)
        .into_par_iter()
        .map(|k| {
            let sample = EmpiricalSample::new(data[plan.window(k)].to_vec())?;
            let mut out = Vec::new();
            for m in methods {
                for (bi, &beta) in plan.grid.iter().enumerate() {
                    let tkey = key.path(&[label("tail"), k as u64, bi as u64]);
                    out.push(record(m, beta, k, evaluate_method(&m.kind, &sample, beta, tkey)));
                }
            }
            Ok(out)
        })
        .collect();
    let mut records = Vec::new();
    for w in per_window {
        records.extend(w?);
    }
    let names: Vec<String> = methods.iter().map(|m| m.name.clone()).collect();
    let diagnostics = summarize(&records, &names, &benchmark);
    Ok(WindowStudy { records, benchmark, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::MethodKind;

    fn plan(len: usize, n: usize, stride: usize, reps: usize) -> WindowPlan {
        WindowPlan { len, n, stride, reps, grid: vec![0.5] }
    }

    #[test]
    fn window_indices() {
        let p = plan(10, 4, 3, 2);
        p.validate().unwrap();
        // one-based {4..7} and {7..10}
        assert_eq!(p.window(1), 3..7);
        assert_eq!(p.window(2), 6..10);
    }

    #[test]
    fn disjoint_when_stride_is_window() {
        let p = plan(20, 5, 5, 3);
        p.validate().unwrap();
        assert_eq!(p.window(1).end, p.window(2).start);
    }

    #[test]
    fn overrun() {
        assert!(matches!(plan(10, 4, 3, 3).validate(), Err(Error::PlanOverrun { .. })));
    }

    #[test]
    fn windows_see_their_slice() {
        let data: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let p = WindowPlan { len: 10, n: 4, stride: 3, reps: 2, grid: vec![0.25] };
        let m = [MethodSpec::new("saa", MethodKind::Saa)];
        let s = run_rolling_windows(&data, &p, &m, 1).unwrap();
        // top quarter of {3,4,5,6} is 6; of {6,7,8,9} is 9
        assert_eq!(s.records[0].value, Some(6.0));
        assert_eq!(s.records[1].value, Some(9.0));
        assert!((s.benchmark[0].1 - 8.2).abs() < 1e-12);
    }
}
