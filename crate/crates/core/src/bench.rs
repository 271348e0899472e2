//! Test functions, point samplers and the experiment drivers that produce
//! the comparison (insertion vs removal) and KEA improvement tables.
//!
//! Uniform samples come from `ChaCha8Rng::seed_from_u64(seed)` (crate
//! `rand_chacha` 0.3), drawing `rng.gen::<f64>()` coordinate by coordinate,
//! point by point. Training points are drawn first, test points continue the
//! same stream. This generator is part of the output contract: a seed names
//! the same point set on every platform.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{KeaError, Result};
use crate::greedy::{greedy_insert, greedy_remove, AddCriterion, InsertOptions, RemoveCriterion};
use crate::kea::{kea_run, max_test_error, ratio, ExchangeConfig, StopReason};
use crate::kernel::{KernelDescriptor, LinearTransform};
use crate::model::{Dataset, KernelModel};
use crate::points::Points;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestFunction {
    /// `|x|^2` on `[0,1]^2`.
    Cmp2d,
    /// `|x_1 - 0.5| + sin(x_2 + x_3)` on `[0,1]^3`.
    Cmp3d,
    /// Classical Franke function.
    Franke1,
    Franke2,
    Franke3,
    Franke4,
    /// `exp(-4 (x_1 + ... + x_5 - 0.5)^2)` on `[0,1]^5`.
    Highdim5,
    /// `exp(-4 sum_{j<=5} (x_j - 0.5)^2) + 2 |x_1 - 0.5|` on `[0,1]^6`;
    /// the sixth coordinate does not enter.
    Highdim6,
}

impl TestFunction {
    pub const ALL: [TestFunction; 8] = [
        TestFunction::Cmp2d,
        TestFunction::Cmp3d,
        TestFunction::Franke1,
        TestFunction::Franke2,
        TestFunction::Franke3,
        TestFunction::Franke4,
        TestFunction::Highdim5,
        TestFunction::Highdim6,
    ];

    pub const FRANKE: [TestFunction; 4] = [
        TestFunction::Franke1,
        TestFunction::Franke2,
        TestFunction::Franke3,
        TestFunction::Franke4,
    ];

    pub fn dim(self) -> usize {
        match self {
            TestFunction::Cmp2d
            | TestFunction::Franke1
            | TestFunction::Franke2
            | TestFunction::Franke3
            | TestFunction::Franke4 => 2,
            TestFunction::Cmp3d => 3,
            TestFunction::Highdim5 => 5,
            TestFunction::Highdim6 => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::Cmp2d => "cmp2d",
            TestFunction::Cmp3d => "cmp3d",
            TestFunction::Franke1 => "franke1",
            TestFunction::Franke2 => "franke2",
            TestFunction::Franke3 => "franke3",
            TestFunction::Franke4 => "franke4",
            TestFunction::Highdim5 => "highdim5",
            TestFunction::Highdim6 => "highdim6",
        }
    }

    pub fn eval(self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(KeaError::InvalidArgument(format!(
                "{} takes {}-dimensional points, got {}",
                self.name(),
                self.dim(),
                x.len()
            )));
        }
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Cmp2d => x[0] * x[0] + x[1] * x[1],
            TestFunction::Cmp3d => (x[0] - 0.5).abs() + (x[1] + x[2]).sin(),
            TestFunction::Franke1 => {
                let (a, b) = (9.0 * x[0], 9.0 * x[1]);
                0.75 * (-((a - 2.0).powi(2) + (b - 2.0).powi(2)) / 4.0).exp()
                    + 0.75 * (-(a + 1.0).powi(2) / 49.0 - (b + 1.0) / 10.0).exp()
                    + 0.5 * (-((a - 7.0).powi(2) + (b - 3.0).powi(2)) / 4.0).exp()
                    - 0.2 * (-(a - 4.0).powi(2) - (b - 7.0).powi(2)).exp()
            }
            TestFunction::Franke2 => ((9.0 * x[1] - 9.0 * x[0]).tanh() + 1.0) / 9.0,
            TestFunction::Franke3 => {
                (1.25 + (5.4 * x[1]).cos()) / (6.0 + 6.0 * (3.0 * x[0] - 1.0).powi(2))
            }
            TestFunction::Franke4 => {
                ((-81.0 / 16.0) * ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2))).exp() / 3.0
            }
            TestFunction::Highdim5 => {
                let s: f64 = x[..5].iter().sum();
                (-4.0 * (s - 0.5).powi(2)).exp()
            }
            TestFunction::Highdim6 => {
                let s: f64 = x[..5].iter().map(|v| (v - 0.5).powi(2)).sum();
                (-4.0 * s).exp() + 2.0 * (x[0] - 0.5).abs()
            }
        }
    }

    /// Values at every point; identical to calling [`eval`](Self::eval) per point.
    pub fn eval_all(self, points: &Points) -> Result<Vec<f64>> {
        points.iter().map(|x| self.eval(x)).collect()
    }

    /// Largest expansion size used for this function in the reference runs.
    pub fn default_max_size(self) -> usize {
        match self {
            TestFunction::Franke1 => 150,
            TestFunction::Franke2 | TestFunction::Franke3 | TestFunction::Franke4 => 80,
            TestFunction::Highdim5 => 100,
            TestFunction::Highdim6 => 200,
            TestFunction::Cmp2d | TestFunction::Cmp3d => 256,
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestFunction {
    type Err = KeaError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| KeaError::InvalidArgument(format!("unknown test function `{s}`")))
    }
}

/// `n` points uniform in `[0,1)^d`.
pub fn sample_uniform(d: usize, n: usize, seed: u64) -> Points {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    uniform_from(&mut rng, d, n)
}

fn uniform_from(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Points {
    let data = (0..n * d).map(|_| rng.gen::<f64>()).collect();
    Points::new(d.max(1), data).expect("buffer is n * d long")
}

const PRIMES: [u64; 6] = [2, 3, 5, 7, 11, 13];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    r
}

/// First `n` Halton points (indices 1..=n, skipping the origin) with the
/// first `d` primes as bases.
pub fn halton(d: usize, n: usize) -> Result<Points> {
    if d == 0 || d > PRIMES.len() {
        return Err(KeaError::InvalidArgument(format!(
            "Halton sampler supports 1..=6 dimensions, got {d}"
        )));
    }
    let mut data = Vec::with_capacity(n * d);
    for i in 1..=n as u64 {
        data.extend(PRIMES[..d].iter().map(|&b| radical_inverse(i, b)));
    }
    Points::new(d, data)
}

/// `count` sizes log-equispaced between `min` and `max`, truncated to
/// integers (endpoint exact), deduplicated in order.
pub fn log_spaced_sizes(count: usize, min: usize, max: usize) -> Result<Vec<usize>> {
    if min == 0 || max < min || count == 0 {
        return Err(KeaError::InvalidArgument(format!(
            "bad log-spaced range: {count} values in [{min}, {max}]"
        )));
    }
    if count == 1 {
        return Ok(vec![max]);
    }
    let (lo, hi) = ((min as f64).ln(), (max as f64).ln());
    let mut out: Vec<usize> = Vec::with_capacity(count);
    for i in 0..count {
        let t = i as f64 / (count - 1) as f64;
        let v = ((lo + t * (hi - lo)).exp() + 1e-9).floor() as usize;
        let v = v.clamp(min, max);
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    Uniform { seed: u64 },
    Halton,
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sampler::Uniform { seed } => write!(f, "uniform(seed={seed})"),
            Sampler::Halton => f.write_str("halton"),
        }
    }
}

impl Sampler {
    /// Training and test point sets. Halton test points continue the
    /// sequence after the training points.
    pub fn train_test(&self, d: usize, n_train: usize, n_test: usize) -> Result<(Points, Points)> {
        match *self {
            Sampler::Uniform { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let train = uniform_from(&mut rng, d, n_train);
                let test = uniform_from(&mut rng, d, n_test);
                Ok((train, test))
            }
            Sampler::Halton => {
                let all = halton(d, n_train + n_test)?;
                let train = all.select(&(0..n_train).collect::<Vec<_>>());
                let test = all.select(&(n_train..n_train + n_test).collect::<Vec<_>>());
                Ok((train, test))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExpansionSizes {
    Explicit(Vec<usize>),
    LogSpaced { count: usize, min: usize, max: usize },
}

impl ExpansionSizes {
    pub fn resolve(&self) -> Result<Vec<usize>> {
        match self {
            ExpansionSizes::Explicit(v) => {
                if v.is_empty() || v.contains(&0) {
                    return Err(KeaError::InvalidArgument(
                        "expansion sizes must be a nonempty list of positive integers".into(),
                    ));
                }
                Ok(v.clone())
            }
            ExpansionSizes::LogSpaced { count, min, max } => log_spaced_sizes(*count, *min, *max),
        }
    }
}

impl fmt::Display for ExpansionSizes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpansionSizes::Explicit(v) => {
                let s: Vec<String> = v.iter().map(|n| n.to_string()).collect();
                write!(f, "{}", s.join(";"))
            }
            ExpansionSizes::LogSpaced { count, min, max } => write!(f, "log({count},{min},{max})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub function: TestFunction,
    pub smoothness: Vec<u8>,
    pub length_scale: f64,
    pub transform: Option<LinearTransform>,
    pub sampler: Sampler,
    pub n_train: usize,
    pub n_test: usize,
    pub sizes: ExpansionSizes,
    pub add_criterion: AddCriterion,
    pub remove_criterion: RemoveCriterion,
    pub exchange: ExchangeConfig,
}

impl ExperimentConfig {
    /// KEA study defaults for `function`: 10^3 uniform training and test
    /// points, all five kernels, ten log-spaced sizes, at most 100 exchanges.
    pub fn kea_defaults(function: TestFunction, seed: u64) -> Self {
        let (n_train, n_test) = match function {
            TestFunction::Highdim5 | TestFunction::Highdim6 => (10_000, 10_000),
            _ => (1000, 1000),
        };
        Self {
            function,
            smoothness: vec![0, 1, 2, 3, 4],
            length_scale: 1.0,
            transform: None,
            sampler: Sampler::Uniform { seed },
            n_train,
            n_test,
            sizes: ExpansionSizes::LogSpaced {
                count: 10,
                min: 5,
                max: function.default_max_size(),
            },
            add_criterion: AddCriterion::FGreedy,
            remove_criterion: RemoveCriterion::FLoo,
            exchange: ExchangeConfig::new(100).expect("positive budget"),
        }
    }

    /// Insertion-vs-removal defaults: 256 Halton points, Matérn p = 2.
    pub fn comparison_defaults(function: TestFunction) -> Self {
        Self {
            function,
            smoothness: vec![2],
            sampler: Sampler::Halton,
            n_train: 256,
            n_test: 0,
            sizes: ExpansionSizes::Explicit(vec![256]),
            ..Self::kea_defaults(function, 0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_base()?;
        let sizes = self.sizes.resolve()?;
        if let Some(&n) = sizes.iter().find(|&&n| n > self.n_train) {
            return Err(KeaError::InvalidArgument(format!(
                "expansion size {n} exceeds the {} training points",
                self.n_train
            )));
        }
        Ok(())
    }

    /// Everything but the expansion sizes, which the comparison run ignores.
    fn validate_base(&self) -> Result<()> {
        if self.n_train == 0 {
            return Err(KeaError::InvalidArgument("training set size must be positive".into()));
        }
        if self.smoothness.is_empty() {
            return Err(KeaError::InvalidArgument("no kernel smoothness given".into()));
        }
        for &p in &self.smoothness {
            self.kernel(p)?;
        }
        self.exchange.validate()
    }

    pub fn kernel(&self, p: u8) -> Result<KernelDescriptor> {
        let k = KernelDescriptor::matern(p)?.with_length_scale(self.length_scale)?;
        let k = match &self.transform {
            Some(t) => k.with_transform(t.clone()),
            None => k,
        };
        k.check_dim(self.function.dim())?;
        Ok(k)
    }

    /// `key=value` pairs describing the resolved configuration.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let p: Vec<String> = self.smoothness.iter().map(|p| p.to_string()).collect();
        let mut out = vec![
            ("function".to_string(), self.function.to_string()),
            ("kernel".to_string(), "matern".to_string()),
            ("p".to_string(), p.join(";")),
            ("length_scale".to_string(), self.length_scale.to_string()),
            (
                "transform".to_string(),
                match &self.transform {
                    Some(t) => format!("{0}x{0}", t.dim()),
                    None => "identity".to_string(),
                },
            ),
            ("sampler".to_string(), self.sampler.to_string()),
            ("n_train".to_string(), self.n_train.to_string()),
            ("n_test".to_string(), self.n_test.to_string()),
            ("sizes".to_string(), self.sizes.to_string()),
            ("add".to_string(), self.add_criterion.to_string()),
            ("remove".to_string(), self.remove_criterion.to_string()),
            ("exchanges".to_string(), self.exchange.max_steps.to_string()),
            ("stop_on_revisit".to_string(), self.exchange.stop_on_revisit.to_string()),
            (
                "stagnation_window".to_string(),
                self.exchange
                    .stagnation_window
                    .map_or("none".to_string(), |w| w.to_string()),
            ),
            ("return".to_string(), self.exchange.return_mode.to_string()),
        ];
        if let Some(t) = &self.transform {
            let rows: Vec<String> = (0..t.dim())
                .map(|i| t.row(i).iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "))
                .collect();
            out.push(("transform_rows".to_string(), rows.join(";")));
        }
        out
    }

    fn datasets(&self) -> Result<(Dataset, Points, Vec<f64>)> {
        let (train, test) = self.sampler.train_test(self.function.dim(), self.n_train, self.n_test)?;
        let f = self.function;
        let train = Dataset::new(train.clone(), f.eval_all(&train)?)?;
        let f_test = f.eval_all(&test)?;
        Ok((train, test, f_test))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Insert,
    Remove,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Insert => "insert",
            Method::Remove => "remove",
        })
    }
}

/// Row value that is either a number or the reason it is missing.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell<T> {
    Value(T),
    Failed(String),
}

impl<T> Cell<T> {
    pub fn value(&self) -> Option<&T> {
        match self {
            Cell::Value(v) => Some(v),
            Cell::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub function: TestFunction,
    pub method: Method,
    pub n: usize,
    pub max_train_error: Cell<f64>,
}

/// Max training error over `n` for greedy insertion from the empty set up
/// to all training points, and greedy removal from all points down to none.
/// Uses the first entry of `config.smoothness`.
pub fn run_comparison(config: &ExperimentConfig) -> Result<Vec<ComparisonRow>> {
    config.validate_base()?;
    let p = config.smoothness[0];
    let kernel = config.kernel(p)?;
    let (train, _, _) = config.datasets()?;
    let n_all = train.len();
    let f = config.function;
    let row = |method, n, v| ComparisonRow {
        function: f,
        method,
        n,
        max_train_error: v,
    };

    let (insert_rows, remove_rows) = rayon::join(
        || {
            let mut rows = Vec::new();
            match greedy_insert(&kernel, &train, config.add_criterion, InsertOptions::new(n_all)) {
                Ok((model, history)) => {
                    for r in &history.records {
                        rows.push(row(Method::Insert, r.step, Cell::Value(r.max_residual)));
                    }
                    if model.size() < n_all {
                        rows.push(row(
                            Method::Insert,
                            model.size() + 1,
                            Cell::Failed(history.stop.to_string()),
                        ));
                    }
                }
                Err(e) => rows.push(row(Method::Insert, 1, Cell::Failed(e.to_string()))),
            }
            rows
        },
        || {
            let mut rows = Vec::new();
            let start = (0..n_all).collect::<Vec<_>>();
            let full = KernelModel::fit_direct(&kernel, &train, &start);
            match full.and_then(|full| {
                let (_, h) = greedy_remove(&kernel, &train, config.remove_criterion, 0, Some(&start))?;
                Ok((full.max_residual(), h))
            }) {
                Ok((full_err, history)) => {
                    rows.push(row(Method::Remove, n_all, Cell::Value(full_err)));
                    for r in &history.records {
                        rows.push(row(Method::Remove, n_all - r.step, Cell::Value(r.max_residual)));
                    }
                }
                Err(e) => rows.push(row(Method::Remove, n_all, Cell::Failed(e.to_string()))),
            }
            rows.retain(|r| r.n >= 1);
            rows.reverse();
            rows
        },
    );
    Ok(insert_rows.into_iter().chain(remove_rows).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeaOutcome {
    pub test_err_before: f64,
    pub test_err_after: f64,
    pub ratio: f64,
    pub stop_reason: StopReason,
    pub steps_used: usize,
    /// Size the greedy model actually reached (may fall short of `n`).
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeaRow {
    pub function: TestFunction,
    pub p: u8,
    pub n: usize,
    pub outcome: Cell<KeaOutcome>,
}

/// Greedy insertion to each expansion size, then KEA; one row per
/// `(p, n)` cell, ordered by `p` then `n`. Cells run in parallel on the
/// current rayon pool.
pub fn run_kea_experiment(config: &ExperimentConfig) -> Result<Vec<KeaRow>> {
    config.validate()?;
    if config.n_test == 0 {
        return Err(KeaError::InvalidArgument("KEA experiment needs test points".into()));
    }
    let sizes = config.sizes.resolve()?;
    let (train, test, f_test) = config.datasets()?;
    let cells: Vec<(u8, usize)> = config
        .smoothness
        .iter()
        .flat_map(|&p| sizes.iter().map(move |&n| (p, n)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(p, n)| KeaRow {
            function: config.function,
            p,
            n,
            outcome: match kea_cell(config, p, n, &train, &test, &f_test) {
                Ok(o) => Cell::Value(o),
                Err(e) => Cell::Failed(e.to_string()),
            },
        })
        .collect();
    Ok(rows)
}

fn kea_cell(
    config: &ExperimentConfig,
    p: u8,
    n: usize,
    train: &Dataset,
    test: &Points,
    f_test: &[f64],
) -> Result<KeaOutcome> {
    let kernel = config.kernel(p)?;
    let (before, _) = greedy_insert(&kernel, train, config.add_criterion, InsertOptions::new(n))?;
    let mut exchange = config.exchange;
    exchange.add_criterion = config.add_criterion;
    exchange.remove_criterion = config.remove_criterion;
    let (after, trace) = kea_run(&before, train, &exchange)?;
    let err_before = max_test_error(f_test, &before, test)?;
    let err_after = max_test_error(f_test, &after, test)?;
    Ok(KeaOutcome {
        test_err_before: err_before,
        test_err_after: err_after,
        ratio: ratio(err_after, err_before)?,
        stop_reason: trace.stop_reason,
        steps_used: trace.steps_used(),
        size: before.size(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn function_values() {
        let f = |id: TestFunction, x: &[f64]| id.eval(x).unwrap();
        assert!((f(TestFunction::Franke2, &[0.5, 0.5]) - 1.0 / 9.0).abs() < 1e-15);
        assert!((f(TestFunction::Franke4, &[0.5, 0.5]) - 1.0 / 3.0).abs() < 1e-15);
        assert!((f(TestFunction::Highdim5, &[0.1, 0.1, 0.1, 0.1, 0.1]) - 1.0).abs() < 1e-15);
        assert!((f(TestFunction::Highdim5, &[0.5, 0.0, 0.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert_eq!(f(TestFunction::Cmp2d, &[1.0, 1.0]), 2.0);
        assert!((f(TestFunction::Cmp3d, &[0.5, 0.2, 0.3]) - 0.5f64.sin()).abs() < 1e-15);
        assert!((f(TestFunction::Franke3, &[1.0 / 3.0, 0.0]) - 2.25 / 6.0).abs() < 1e-15);
        // sixth coordinate is inert
        let a = f(TestFunction::Highdim6, &[0.2, 0.4, 0.6, 0.8, 0.1, 0.0]);
        let b = f(TestFunction::Highdim6, &[0.2, 0.4, 0.6, 0.8, 0.1, 0.9]);
        assert_eq!(a, b);
        // classical Franke value at the origin
        let expect = 0.75 * (-2.0f64).exp() + 0.75 * (-1.0f64 / 49.0 - 0.1).exp()
            + 0.5 * (-(49.0 + 9.0) / 4.0f64).exp()
            - 0.2 * (-16.0f64 - 49.0).exp();
        assert!((f(TestFunction::Franke1, &[0.0, 0.0]) - expect).abs() < 1e-15);
        assert!(TestFunction::Franke1.eval(&[0.0]).is_err());
    }

    #[test]
    fn names_round_trip() {
        for f in TestFunction::ALL {
            assert_eq!(f.name().parse::<TestFunction>().unwrap(), f);
        }
        assert!("franke9".parse::<TestFunction>().is_err());
    }

    #[test]
    fn uniform_sampler_is_deterministic_and_in_range() {
        let a = sample_uniform(3, 100, 42);
        assert_eq!(a, sample_uniform(3, 100, 42));
        assert_ne!(a, sample_uniform(3, 100, 43));
        assert!(a.as_slice().iter().all(|v| (0.0..1.0).contains(v)));

        let big = sample_uniform(2, 10_000, 7);
        for j in 0..2 {
            let mean = big.iter().map(|x| x[j]).sum::<f64>() / 10_000.0;
            assert!((mean - 0.5).abs() < 0.02);
        }
    }

    #[test]
    fn halton_points() {
        let h = halton(2, 3).unwrap();
        assert_eq!(h.row(0), &[0.5, 1.0 / 3.0]);
        assert_eq!(h.row(1), &[0.25, 2.0 / 3.0]);
        assert_eq!(h.row(2), &[0.75, 1.0 / 9.0]);
        assert!(halton(7, 3).is_err());

        let h = halton(6, 10_000).unwrap();
        assert!(Dataset::new(h.clone(), vec![0.0; 10_000]).is_ok());
        assert!(h.as_slice().iter().all(|v| *v > 0.0 && *v < 1.0));
    }

    #[test]
    fn log_spacing_matches_reference_lists() {
        assert_eq!(
            log_spaced_sizes(10, 5, 150).unwrap(),
            vec![5, 7, 10, 15, 22, 33, 48, 70, 102, 150]
        );
        assert_eq!(
            log_spaced_sizes(10, 5, 80).unwrap(),
            vec![5, 6, 9, 12, 17, 23, 31, 43, 58, 80]
        );
        assert_eq!(
            log_spaced_sizes(10, 5, 100).unwrap(),
            vec![5, 6, 9, 13, 18, 26, 36, 51, 71, 100]
        );
        assert_eq!(
            log_spaced_sizes(10, 5, 200).unwrap(),
            vec![5, 7, 11, 17, 25, 38, 58, 88, 132, 200]
        );
        assert_eq!(log_spaced_sizes(10, 5, 6).unwrap(), vec![5, 6]);
        assert!(log_spaced_sizes(10, 0, 6).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::kea_defaults(TestFunction::Franke2, 1);
        assert!(cfg.validate().is_ok());
        cfg.n_train = 50;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::kea_defaults(TestFunction::Franke2, 1);
        cfg.transform = Some(LinearTransform::identity(3));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn small_comparison() {
        let mut cfg = ExperimentConfig::comparison_defaults(TestFunction::Cmp2d);
        cfg.n_train = 40;
        let rows = run_comparison(&cfg).unwrap();
        let insert: Vec<_> = rows.iter().filter(|r| r.method == Method::Insert).collect();
        let remove: Vec<_> = rows.iter().filter(|r| r.method == Method::Remove).collect();
        assert_eq!(insert.len(), 40);
        assert_eq!(remove.len(), 40);
        assert_eq!(remove.first().unwrap().n, 1);
        assert_eq!(remove.last().unwrap().n, 40);
        assert!(*insert[39].max_train_error.value().unwrap() <= 1e-6);
        assert!(*remove[39].max_train_error.value().unwrap() <= 1e-6);
    }

    #[test]
    fn small_kea_experiment_is_reproducible() {
        let mut cfg = ExperimentConfig::kea_defaults(TestFunction::Franke4, 3);
        cfg.n_train = 200;
        cfg.n_test = 200;
        cfg.smoothness = vec![1, 3];
        cfg.sizes = ExpansionSizes::Explicit(vec![5, 12]);
        cfg.exchange.max_steps = 20;
        let rows = run_kea_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(
            rows.iter().map(|r| (r.p, r.n)).collect::<Vec<_>>(),
            vec![(1, 5), (1, 12), (3, 5), (3, 12)]
        );
        for r in &rows {
            let o = r.outcome.value().unwrap();
            assert!(o.ratio > 0.0);
            assert!(o.steps_used <= 20);
        }
        assert_eq!(rows, run_kea_experiment(&cfg).unwrap());
    }
}
