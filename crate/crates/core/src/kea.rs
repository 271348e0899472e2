//! Kernel exchange algorithm: fine-tunes a center set of fixed size `n` by
//! repeatedly inserting the best non-center and removing the least useful
//! center, both chosen on the same pre-exchange model.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{KeaError, Result};
use crate::greedy::{select_add, select_remove, AddCriterion, RemoveCriterion};
use crate::model::{max_abs, Dataset, KernelModel};
use crate::points::Points;

/// Which visited state [`kea_run`] hands back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReturnMode {
    /// State with the smallest max training residual (initial state included).
    #[default]
    Best,
    /// State after the last accepted exchange.
    Last,
}

impl fmt::Display for ReturnMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReturnMode::Best => "best",
            ReturnMode::Last => "last",
        })
    }
}

impl FromStr for ReturnMode {
    type Err = KeaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "best" => Ok(ReturnMode::Best),
            "last" => Ok(ReturnMode::Last),
            other => Err(KeaError::InvalidArgument(format!(
                "unknown return mode `{other}` (expected best or last)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExchangeConfig {
    /// Maximum number of exchanges `m`.
    pub max_steps: usize,
    pub add_criterion: AddCriterion,
    pub remove_criterion: RemoveCriterion,
    /// Stop when an exchange would lead back to an already visited center set.
    pub stop_on_revisit: bool,
    /// Stop after this many exchanges without a new best training residual.
    pub stagnation_window: Option<usize>,
    pub return_mode: ReturnMode,
}

impl ExchangeConfig {
    pub fn new(max_steps: usize) -> Result<Self> {
        let cfg = Self {
            max_steps,
            add_criterion: AddCriterion::FGreedy,
            remove_criterion: RemoveCriterion::FLoo,
            stop_on_revisit: true,
            stagnation_window: Some(10),
            return_mode: ReturnMode::Best,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(KeaError::InvalidArgument("exchange budget must be at least 1".into()));
        }
        if self.stagnation_window == Some(0) {
            return Err(KeaError::InvalidArgument("stagnation window must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxSteps,
    Revisit,
    Stagnation,
    NoCandidate,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::MaxSteps => "max_steps",
            StopReason::Revisit => "revisit",
            StopReason::Stagnation => "stagnation",
            StopReason::NoCandidate => "no_candidate",
        })
    }
}

impl FromStr for StopReason {
    type Err = KeaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max_steps" => Ok(StopReason::MaxSteps),
            "revisit" => Ok(StopReason::Revisit),
            "stagnation" => Ok(StopReason::Stagnation),
            "no_candidate" => Ok(StopReason::NoCandidate),
            other => Err(KeaError::Parse(format!("unknown stop reason `{other}`"))),
        }
    }
}

/// One accepted exchange.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeRecord {
    pub iter: usize,
    pub added: usize,
    pub removed: usize,
    /// Max training residual of the model after the exchange.
    pub max_train_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeTrace {
    pub records: Vec<ExchangeRecord>,
    pub stop_reason: StopReason,
    pub initial_residual: f64,
    /// Iteration of the best state; 0 is the initial model.
    pub best_iter: usize,
    pub return_mode: ReturnMode,
}

impl ExchangeTrace {
    pub fn steps_used(&self) -> usize {
        self.records.len()
    }

    /// Iteration whose state was returned (0 for the initial model).
    pub fn returned_iter(&self) -> usize {
        match self.return_mode {
            ReturnMode::Best => self.best_iter,
            ReturnMode::Last => self.records.len(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExchangeOutcome {
    pub added: usize,
    pub removed: usize,
    pub model: KernelModel,
}

/// One exchange: both selections read `model`, then the model is refit on
/// `(centers \ {removed}) + {added}` with `added` appended last.
pub fn exchange_step(model: &KernelModel, data: &Dataset, cfg: &ExchangeConfig) -> Result<ExchangeOutcome> {
    if model.size() == 0 {
        return Err(KeaError::InvalidState("exchange on an empty model".into()));
    }
    let added = select_add(model, cfg.add_criterion)?;
    let removed = select_remove(model, cfg.remove_criterion)?;
    let mut centers: Vec<usize> = model.centers().iter().copied().filter(|&c| c != removed).collect();
    centers.push(added);
    let next = model
        .rebuild(data, &centers)
        .map_err(|e| KeaError::SingularExchange {
            added,
            removed,
            source: Box::new(e),
        })?;
    Ok(ExchangeOutcome {
        added,
        removed,
        model: next,
    })
}

fn canonical(centers: &[usize]) -> Vec<usize> {
    let mut key = centers.to_vec();
    key.sort_unstable();
    key
}

/// Runs up to `cfg.max_steps` exchanges starting from `initial`.
///
/// Stops early on revisiting a center set, on stagnation of the best
/// training residual, or when no candidate can be inserted. Numerical
/// failures inside a step also end the run (as `NoCandidate`) instead of
/// erroring.
pub fn kea_run(
    initial: &KernelModel,
    data: &Dataset,
    cfg: &ExchangeConfig,
) -> Result<(KernelModel, ExchangeTrace)> {
    cfg.validate()?;
    if initial.size() == 0 {
        return Err(KeaError::InvalidState("KEA needs at least one center".into()));
    }
    if initial.base_size() != data.len() {
        return Err(KeaError::InvalidArgument(format!(
            "model tracks {} base points, dataset has {}",
            initial.base_size(),
            data.len()
        )));
    }

    let mut visited: HashSet<Vec<usize>> = HashSet::new();
    visited.insert(canonical(initial.centers()));
    let initial_residual = initial.max_residual();
    let mut best = (0usize, initial_residual, initial.clone());
    let mut current = initial.clone();
    let mut records = Vec::new();
    let mut since_best = 0usize;
    let mut stop_reason = StopReason::MaxSteps;

    for iter in 1..=cfg.max_steps {
        let step = match exchange_step(&current, data, cfg) {
            Ok(step) => step,
            Err(KeaError::ExhaustedCandidates) | Err(KeaError::SingularExchange { .. }) => {
                stop_reason = StopReason::NoCandidate;
                break;
            }
            Err(e) => return Err(e),
        };
        if cfg.stop_on_revisit && !visited.insert(canonical(step.model.centers())) {
            stop_reason = StopReason::Revisit;
            break;
        }
        let residual = step.model.max_residual();
        records.push(ExchangeRecord {
            iter,
            added: step.added,
            removed: step.removed,
            max_train_residual: residual,
        });
        current = step.model;
        if residual < best.1 {
            best = (iter, residual, current.clone());
            since_best = 0;
        } else {
            since_best += 1;
        }
        if let Some(w) = cfg.stagnation_window {
            if since_best >= w && iter < cfg.max_steps {
                stop_reason = StopReason::Stagnation;
                break;
            }
        }
    }

    let trace = ExchangeTrace {
        records,
        stop_reason,
        initial_residual,
        best_iter: best.0,
        return_mode: cfg.return_mode,
    };
    let model = match cfg.return_mode {
        ReturnMode::Best => best.2,
        ReturnMode::Last => current,
    };
    Ok((model, trace))
}

/// Below this, a max test error counts as zero.
pub const RATIO_FLOOR: f64 = 1e-14;

/// `max |f - s_after| / max |f - s_before|` over the test points.
pub fn improvement_ratio(
    f_test: &[f64],
    before: &KernelModel,
    after: &KernelModel,
    test_points: &Points,
) -> Result<f64> {
    if test_points.is_empty() {
        return Err(KeaError::InvalidArgument("no test points".into()));
    }
    if f_test.len() != test_points.len() {
        return Err(KeaError::InvalidArgument(format!(
            "{} test values for {} test points",
            f_test.len(),
            test_points.len()
        )));
    }
    let err_before = max_test_error(f_test, before, test_points)?;
    let err_after = max_test_error(f_test, after, test_points)?;
    ratio(err_after, err_before)
}

pub(crate) fn max_test_error(f_test: &[f64], model: &KernelModel, test_points: &Points) -> Result<f64> {
    let s = model.evaluate(test_points)?;
    let diff: Vec<f64> = f_test.iter().zip(&s).map(|(f, s)| f - s).collect();
    Ok(max_abs(&diff))
}

pub(crate) fn ratio(numerator: f64, denominator: f64) -> Result<f64> {
    if denominator < RATIO_FLOOR {
        if numerator < RATIO_FLOOR {
            return Ok(1.0);
        }
        return Err(KeaError::DegenerateRatio { numerator });
    }
    Ok(numerator / denominator)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greedy::{greedy_insert, InsertOptions};
    use crate::kernel::KernelDescriptor;
    use crate::testutil::separated_data;
    use proptest::prelude::*;

    fn line(xs: &[f64], ys: &[f64]) -> Dataset {
        let rows: Vec<[f64; 1]> = xs.iter().map(|&x| [x]).collect();
        Dataset::new(Points::from_rows(1, &rows).unwrap(), ys.to_vec()).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(ExchangeConfig::new(0).is_err());
        let mut cfg = ExchangeConfig::new(5).unwrap();
        cfg.stagnation_window = Some(0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn exchange_step_on_three_points() {
        let data = line(&[0.0, 0.4, 1.0], &[0.0, 1.0, 0.0]);
        let k = KernelDescriptor::matern(0).unwrap();
        let m = KernelModel::fit_direct(&k, &data, &[0, 2]).unwrap();
        let cfg = ExchangeConfig::new(1).unwrap();
        let step = exchange_step(&m, &data, &cfg).unwrap();
        assert_eq!(step.added, 1);

        // brute force: LOO error of each center by refit
        let loo = |keep: usize, drop: usize| {
            let r = KernelModel::fit_direct(&k, &data, &[keep]).unwrap();
            (data.values()[drop] - r.evaluate(&data.points().select(&[drop])).unwrap()[0]).abs()
        };
        let (e0, e2) = (loo(2, 0), loo(0, 2));
        let expect = if e2 < e0 { 2 } else { 0 };
        assert_eq!(step.removed, expect);
        assert_ne!(step.added, step.removed);
        assert_eq!(step.model.size(), 2);
        for &c in step.model.centers() {
            assert!(step.model.residual()[c].abs() < 1e-12);
        }
    }

    #[test]
    fn single_step_budget() {
        let data = separated_data(2, 30, 2, 0.25);
        let k = KernelDescriptor::matern(2).unwrap();
        let (m, _) = greedy_insert(&k, &data, AddCriterion::FGreedy, InsertOptions::new(5)).unwrap();
        let cfg = ExchangeConfig::new(1).unwrap();
        let (_, trace) = kea_run(&m, &data, &cfg).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.stop_reason, StopReason::MaxSteps);
    }

    #[test]
    fn two_cycle_is_detected() {
        // Both criteria are symmetric here: x=0 and x=1 swap back and forth.
        let data = line(&[0.0, 1.0], &[1.0, 1.0]);
        let k = KernelDescriptor::matern(0).unwrap();
        let m = KernelModel::fit_direct(&k, &data, &[0]).unwrap();
        let cfg = ExchangeConfig::new(10).unwrap();
        let (_, trace) = kea_run(&m, &data, &cfg).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!((trace.records[0].added, trace.records[0].removed), (1, 0));
        assert_eq!(trace.stop_reason, StopReason::Revisit);
    }

    #[test]
    fn full_base_set_has_no_candidate() {
        let data = line(&[0.0, 0.5, 1.0], &[0.0, 1.0, 0.0]);
        let k = KernelDescriptor::matern(1).unwrap();
        let m = KernelModel::fit_direct(&k, &data, &[0, 1, 2]).unwrap();
        let (out, trace) = kea_run(&m, &data, &ExchangeConfig::new(3).unwrap()).unwrap();
        assert_eq!(trace.stop_reason, StopReason::NoCandidate);
        assert!(trace.records.is_empty());
        assert_eq!(out.centers(), m.centers());
    }

    #[test]
    fn improvement_ratio_cases() {
        let data = line(&[0.0, 0.4, 1.0], &[0.0, 1.0, 0.0]);
        let k = KernelDescriptor::matern(0).unwrap();
        let before = KernelModel::fit_direct(&k, &data, &[0, 2]).unwrap();
        let test = data.points().clone();
        let f = data.values().to_vec();
        assert_eq!(improvement_ratio(&f, &before, &before, &test).unwrap(), 1.0);

        // before errs only at 0.4 (error 1 - s(0.4)); after interpolates 0.4
        let after = KernelModel::fit_direct(&k, &data, &[0, 1]).unwrap();
        let s_before = before.evaluate(&test).unwrap();
        let s_after = after.evaluate(&test).unwrap();
        let brute_before = f.iter().zip(&s_before).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let brute_after = f.iter().zip(&s_after).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let r = improvement_ratio(&f, &before, &after, &test).unwrap();
        assert!((r - brute_after / brute_before).abs() < 1e-15);
        assert!(r < 1.0);

        let exact = KernelModel::fit_direct(&k, &data, &[0, 1, 2]).unwrap();
        assert_eq!(improvement_ratio(&f, &exact, &exact, &test).unwrap(), 1.0);
        assert!(matches!(
            improvement_ratio(&f, &exact, &before, &test),
            Err(KeaError::DegenerateRatio { .. })
        ));
        assert!(improvement_ratio(&[], &before, &after, &Points::empty(1)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn kea_invariants(seed in any::<u64>(), p in 0u8..=4, d in 1usize..=3, n in 2usize..=12, m in 1usize..=30) {
            let data = separated_data(seed, 40, d, 0.25);
            let k = KernelDescriptor::matern(p).unwrap();
            let (init, _) = greedy_insert(&k, &data, AddCriterion::FGreedy, InsertOptions::new(n)).unwrap();
            let mut cfg = ExchangeConfig::new(m).unwrap();
            cfg.stagnation_window = Some(5);
            let (out, trace) = kea_run(&init, &data, &cfg).unwrap();
            prop_assert_eq!(out.size(), init.size());
            prop_assert!(trace.records.len() <= m);
            prop_assert!(out.max_residual() <= init.max_residual());

            // replay: pool disjointness and no repeated set
            let mut centers: Vec<usize> = init.centers().to_vec();
            let mut seen = HashSet::new();
            seen.insert(canonical(&centers));
            for r in &trace.records {
                prop_assert!(!centers.contains(&r.added));
                prop_assert!(centers.contains(&r.removed));
                centers.retain(|&c| c != r.removed);
                centers.push(r.added);
                prop_assert_eq!(centers.len(), init.size());
                prop_assert!(seen.insert(canonical(&centers)));
            }
            let (_, again) = kea_run(&init, &data, &cfg).unwrap();
            prop_assert_eq!(&trace, &again);
        }
    }
}
