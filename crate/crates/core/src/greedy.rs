//! Greedy center insertion (f-greedy, P-greedy) and greedy center removal
//! driven by leave-one-out quantities.
//!
//! Removal scores come from the diagonal of the inverse kernel matrix:
//! removing center `i` changes the interpolant at `x_i` by
//! `alpha_i / (K^{-1})_{ii}` (Rippa's rule), and the power function of the
//! remaining centers at `x_i` is `1 / sqrt((K^{-1})_{ii})`.

use std::fmt;
use std::str::FromStr;

use crate::error::{KeaError, Result};
use crate::kernel::KernelDescriptor;
use crate::linalg::PIVOT_TOL;
use crate::model::{Dataset, KernelModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AddCriterion {
    /// Largest absolute residual.
    #[default]
    FGreedy,
    /// Largest power function value.
    PGreedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RemoveCriterion {
    /// Smallest absolute leave-one-out residual.
    #[default]
    FLoo,
    /// Smallest leave-one-out power value.
    PLoo,
}

impl fmt::Display for AddCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AddCriterion::FGreedy => "f",
            AddCriterion::PGreedy => "p",
        })
    }
}

impl FromStr for AddCriterion {
    type Err = KeaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f" | "f-greedy" | "f_greedy" => Ok(AddCriterion::FGreedy),
            "p" | "p-greedy" | "p_greedy" => Ok(AddCriterion::PGreedy),
            other => Err(KeaError::InvalidArgument(format!(
                "unknown insertion criterion `{other}` (expected f or p)"
            ))),
        }
    }
}

impl fmt::Display for RemoveCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RemoveCriterion::FLoo => "floo",
            RemoveCriterion::PLoo => "ploo",
        })
    }
}

impl FromStr for RemoveCriterion {
    type Err = KeaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "floo" | "f_loo" | "f-loo" => Ok(RemoveCriterion::FLoo),
            "ploo" | "p_loo" | "p-loo" => Ok(RemoveCriterion::PLoo),
            other => Err(KeaError::InvalidArgument(format!(
                "unknown removal criterion `{other}` (expected floo or ploo)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Insert,
    Remove,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Insert => "insert",
            Action::Remove => "remove",
        })
    }
}

/// One insertion or removal. `max_residual` and `max_power` describe the
/// model after the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyRecord {
    pub step: usize,
    pub index: usize,
    pub criterion_value: f64,
    pub max_residual: f64,
    pub max_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreedyStop {
    /// Target expansion size reached.
    TargetSize,
    /// Max training residual fell below `tol_f`.
    ResidualTolerance,
    /// No candidate left with squared power above `tol_p2`.
    PowerTolerance,
    /// The chosen candidate could not be inserted stably.
    NearDuplicate,
}

impl fmt::Display for GreedyStop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GreedyStop::TargetSize => "target_size",
            GreedyStop::ResidualTolerance => "residual_tolerance",
            GreedyStop::PowerTolerance => "power_tolerance",
            GreedyStop::NearDuplicate => "near_duplicate",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyHistory {
    pub action: Action,
    pub records: Vec<GreedyRecord>,
    pub stop: GreedyStop,
}

impl GreedyHistory {
    fn new(action: Action) -> Self {
        Self {
            action,
            records: Vec::new(),
            stop: GreedyStop::TargetSize,
        }
    }

    fn push(&mut self, index: usize, criterion_value: f64, model: &KernelModel) {
        self.records.push(GreedyRecord {
            step: self.records.len() + 1,
            index,
            criterion_value,
            max_residual: model.max_residual(),
            max_power: model.max_power(),
        });
    }
}

/// Insertion candidate maximizing the criterion among non-centers with
/// squared power above [`PIVOT_TOL`]. Ties go to the smallest index.
pub fn select_add(model: &KernelModel, crit: AddCriterion) -> Result<usize> {
    select_add_scored(model, crit, PIVOT_TOL).map(|(i, _)| i)
}

/// Like [`select_add`] with a custom eligibility threshold (never below
/// [`PIVOT_TOL`]); also returns the criterion value.
pub fn select_add_scored(model: &KernelModel, crit: AddCriterion, tol_p2: f64) -> Result<(usize, f64)> {
    let tol = tol_p2.max(PIVOT_TOL);
    let p2 = model.p2();
    let residual = model.residual();
    let mut best: Option<(usize, f64)> = None;
    for i in 0..p2.len() {
        if model.is_center(i) || !(p2[i] > tol) {
            continue;
        }
        let score = match crit {
            AddCriterion::FGreedy => residual[i].abs(),
            AddCriterion::PGreedy => p2[i].sqrt(),
        };
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((i, score));
        }
    }
    best.ok_or(KeaError::ExhaustedCandidates)
}

/// Leave-one-out residuals `e_i = alpha_i / (K^{-1})_{ii}`, one per center.
pub fn rippa_loo(model: &KernelModel) -> Vec<f64> {
    let inv_diag = model.factor().inverse_diagonal();
    model.alpha().iter().zip(&inv_diag).map(|(a, d)| a / d).collect()
}

/// Power value at each center of the model with that center removed,
/// `1 / sqrt((K^{-1})_{ii})`.
pub fn power_removal_scores(model: &KernelModel) -> Vec<f64> {
    model
        .factor()
        .inverse_diagonal()
        .iter()
        .map(|d| 1.0 / d.sqrt())
        .collect()
}

/// Position in the center list to remove, with its score. Ties go to the
/// smallest position.
pub fn select_remove_position(model: &KernelModel, crit: RemoveCriterion) -> Result<(usize, f64)> {
    if model.size() == 0 {
        return Err(KeaError::InvalidState("cannot remove from an empty model".into()));
    }
    let scores: Vec<f64> = match crit {
        RemoveCriterion::FLoo => rippa_loo(model).into_iter().map(f64::abs).collect(),
        RemoveCriterion::PLoo => power_removal_scores(model),
    };
    let mut best = (0, scores[0]);
    for (pos, &s) in scores.iter().enumerate().skip(1) {
        if s < best.1 {
            best = (pos, s);
        }
    }
    Ok(best)
}

/// Dataset index of the center to remove.
pub fn select_remove(model: &KernelModel, crit: RemoveCriterion) -> Result<usize> {
    select_remove_position(model, crit).map(|(pos, _)| model.centers()[pos])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InsertOptions {
    pub n_max: usize,
    /// Stop once the max training residual drops below this; 0 disables.
    pub tol_f: f64,
    /// Candidates need squared power above this.
    pub tol_p2: f64,
}

impl InsertOptions {
    pub fn new(n_max: usize) -> Self {
        Self {
            n_max,
            tol_f: 0.0,
            tol_p2: PIVOT_TOL,
        }
    }
}

/// Greedy insertion starting from the empty model.
pub fn greedy_insert(
    kernel: &KernelDescriptor,
    data: &Dataset,
    crit: AddCriterion,
    opts: InsertOptions,
) -> Result<(KernelModel, GreedyHistory)> {
    if opts.n_max == 0 {
        return Err(KeaError::InvalidArgument("n_max must be at least 1".into()));
    }
    if !(opts.tol_f >= 0.0) || !(opts.tol_p2 >= 0.0) {
        return Err(KeaError::InvalidArgument("tolerances must be nonnegative".into()));
    }
    let mut model = KernelModel::empty(kernel, data)?;
    let mut history = GreedyHistory::new(Action::Insert);
    while model.size() < opts.n_max {
        if model.max_residual() < opts.tol_f {
            history.stop = GreedyStop::ResidualTolerance;
            break;
        }
        let (index, score) = match select_add_scored(&model, crit, opts.tol_p2) {
            Ok(choice) => choice,
            Err(KeaError::ExhaustedCandidates) => {
                history.stop = GreedyStop::PowerTolerance;
                break;
            }
            Err(e) => return Err(e),
        };
        match model.extend_in_place(data, index) {
            Ok(()) => history.push(index, score, &model),
            Err(KeaError::NearDuplicateCenter { .. }) => {
                history.stop = GreedyStop::NearDuplicate;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok((model, history))
}

/// Greedy removal from `start_centers` (all base points when `None`) down
/// to `n_min` centers, refitting after each removal.
pub fn greedy_remove(
    kernel: &KernelDescriptor,
    data: &Dataset,
    crit: RemoveCriterion,
    n_min: usize,
    start_centers: Option<&[usize]>,
) -> Result<(KernelModel, GreedyHistory)> {
    let all: Vec<usize>;
    let start = match start_centers {
        Some(s) => s,
        None => {
            all = (0..data.len()).collect();
            &all
        }
    };
    if start.is_empty() {
        return Err(KeaError::InvalidArgument("start center list is empty".into()));
    }
    if n_min > start.len() {
        return Err(KeaError::InvalidArgument(format!(
            "n_min {n_min} exceeds the {} start centers",
            start.len()
        )));
    }
    let mut model = KernelModel::fit_direct(kernel, data, start)?;
    let mut history = GreedyHistory::new(Action::Remove);
    while model.size() > n_min {
        let (pos, score) = select_remove_position(&model, crit)?;
        let removed = model.centers()[pos];
        let mut centers = model.centers().to_vec();
        centers.remove(pos);
        model = model.rebuild(data, &centers)?;
        history.push(removed, score, &model);
    }
    Ok((model, history))
}
