//! Two-input first-order Sugeno ANFIS with generalized-bell premises and
//! hybrid learning (least-squares consequents, batch gradient premises).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnfisError {
    #[error("all rule firing strengths are zero at ({x}, {y})")]
    AllFiringZero { x: f64, y: f64 },
    #[error("least-squares system is rank deficient: rank {rank} of {cols}")]
    SingularLse { rank: usize, cols: usize },
    #[error("gradient is not finite")]
    NanGradient,
    #[error("training set is ill-posed: {0}")]
    IllPosed(String),
    #[error("input {input} has zero spread in the traces")]
    DegenerateTraceRange { input: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("training data line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Generalized bell `1 / (1 + |(x - c)/a|^(2b))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipFunction {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl MembershipFunction {
    pub fn new(a: f64, b: f64, c: f64) -> Result<MembershipFunction, AnfisError> {
        if !(a > 0.0 && b > 0.0 && c.is_finite() && a.is_finite() && b.is_finite()) {
            return Err(AnfisError::InvalidParameter(format!(
                "bell needs a > 0 and b > 0, got a={a}, b={b}, c={c}"
            )));
        }
        Ok(MembershipFunction { a, b, c })
    }

    pub fn eval(&self, x: f64) -> f64 {
        1.0 / (1.0 + ((x - self.c) / self.a).abs().powf(2.0 * self.b))
    }

    /// Membership value and its partial derivatives with respect to a, b, c.
    pub fn eval_with_grad(&self, x: f64) -> (f64, [f64; 3]) {
        let u = (x - self.c) / self.a;
        let au = u.abs();
        let s = au.powf(2.0 * self.b);
        let mu = 1.0 / (1.0 + s);
        let dmu_ds = -mu * mu;
        let ds_da = -2.0 * self.b * s / self.a;
        let ds_db = if au == 0.0 { 0.0 } else { 2.0 * s * au.ln() };
        let ds_dc = if au == 0.0 {
            0.0
        } else {
            -(2.0 * self.b / self.a) * u.signum() * au.powf(2.0 * self.b - 1.0)
        };
        (mu, [dmu_ds * ds_da, dmu_ds * ds_db, dmu_ds * ds_dc])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleWiring {
    /// Every pairing of x and y memberships.
    Grid,
    /// Rule k pairs the k-th membership of each input.
    Paired,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnfisModel {
    pub wiring: RuleWiring,
    /// Membership functions of x (index 0) and y (index 1).
    pub premise: [Vec<MembershipFunction>; 2],
    /// Per rule `(p, q, r)` for `f = p·x + q·y + r`.
    pub consequents: Vec<[f64; 3]>,
    /// Per rule, the membership index used for x and for y.
    pub rules: Vec<(usize, usize)>,
}

fn spaced(n: usize, lo: f64, hi: f64) -> Vec<MembershipFunction> {
    let span = if hi > lo { hi - lo } else { 2.0 };
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        (lo - 1.0, lo + 1.0)
    };
    if n == 1 {
        return vec![MembershipFunction {
            a: span / 2.0,
            b: 2.0,
            c: 0.5 * (lo + hi),
        }];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|k| MembershipFunction {
            a: step / 2.0,
            b: 2.0,
            c: lo + step * k as f64,
        })
        .collect()
}

impl AnfisModel {
    /// Evenly spaced bells over each input range, `a` = half the center
    /// spacing, `b` = 2, zero consequents.
    pub fn new(
        n_mf_per_input: usize,
        wiring: RuleWiring,
        x_range: (f64, f64),
        y_range: (f64, f64),
    ) -> Result<AnfisModel, AnfisError> {
        if n_mf_per_input == 0 {
            return Err(AnfisError::InvalidParameter(
                "need at least one membership function per input".into(),
            ));
        }
        let premise = [
            spaced(n_mf_per_input, x_range.0, x_range.1),
            spaced(n_mf_per_input, y_range.0, y_range.1),
        ];
        let rules: Vec<(usize, usize)> = match wiring {
            RuleWiring::Grid => (0..n_mf_per_input)
                .flat_map(|i| (0..n_mf_per_input).map(move |j| (i, j)))
                .collect(),
            RuleWiring::Paired => (0..n_mf_per_input).map(|k| (k, k)).collect(),
        };
        Ok(AnfisModel {
            wiring,
            premise,
            consequents: vec![[0.0; 3]; rules.len()],
            rules,
        })
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    fn check(&self) -> Result<(), AnfisError> {
        if self.consequents.len() != self.rules.len() || self.rules.is_empty() {
            return Err(AnfisError::InvalidParameter(
                "rule and consequent counts differ".into(),
            ));
        }
        for &(i, j) in &self.rules {
            if i >= self.premise[0].len() || j >= self.premise[1].len() {
                return Err(AnfisError::InvalidParameter(format!(
                    "rule references membership ({i}, {j}) out of range"
                )));
            }
        }
        for mf in self.premise.iter().flatten() {
            MembershipFunction::new(mf.a, mf.b, mf.c)?;
        }
        Ok(())
    }

    /// Raw firing strengths `w_i = μ_Ai(x)·μ_Bi(y)`.
    pub fn firing(&self, x: f64, y: f64) -> Vec<f64> {
        let mx: Vec<f64> = self.premise[0].iter().map(|m| m.eval(x)).collect();
        let my: Vec<f64> = self.premise[1].iter().map(|m| m.eval(y)).collect();
        self.rules.iter().map(|&(i, j)| mx[i] * my[j]).collect()
    }

    /// Normalized firing strengths (layer 3).
    pub fn normalized_firing(&self, x: f64, y: f64) -> Result<Vec<f64>, AnfisError> {
        let w = self.firing(x, y);
        let total: f64 = w.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(AnfisError::AllFiringZero { x, y });
        }
        Ok(w.iter().map(|v| v / total).collect())
    }

    /// Consequent value of each rule at (x, y).
    pub fn rule_outputs(&self, x: f64, y: f64) -> Vec<f64> {
        self.consequents
            .iter()
            .map(|[p, q, r]| p * x + q * y + r)
            .collect()
    }

    pub fn infer(&self, x: f64, y: f64) -> Result<f64, AnfisError> {
        let wn = self.normalized_firing(x, y)?;
        Ok(wn
            .iter()
            .zip(self.rule_outputs(x, y))
            .map(|(w, f)| w * f)
            .sum())
    }

    fn premise_params(&self) -> Vec<f64> {
        self.premise
            .iter()
            .flatten()
            .flat_map(|m| [m.a, m.b, m.c])
            .collect()
    }

    fn set_premise_params(&mut self, p: &[f64]) {
        for (m, chunk) in self.premise.iter_mut().flatten().zip(p.chunks(3)) {
            m.a = chunk[0];
            m.b = chunk[1];
            m.c = chunk[2];
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    rows: Vec<[f64; 3]>,
}

impl TrainingSet {
    pub fn new(rows: Vec<[f64; 3]>) -> Result<TrainingSet, AnfisError> {
        if rows.is_empty() {
            return Err(AnfisError::IllPosed("no rows".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(AnfisError::IllPosed("non-finite value".into()));
        }
        Ok(TrainingSet { rows })
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Initial RMSE followed by the RMSE after each epoch's least-squares step.
    pub rmse: Vec<f64>,
    /// RMSE immediately before each epoch's least-squares step.
    pub rmse_before_lse: Vec<f64>,
    /// RMSE of the returned model.
    pub final_rmse: f64,
    pub model: AnfisModel,
    pub converged: bool,
}

pub fn sse(model: &AnfisModel, data: &TrainingSet) -> Result<f64, AnfisError> {
    let mut total = 0.0;
    for [x, y, t] in data.rows() {
        let e = model.infer(*x, *y)? - t;
        total += e * e;
    }
    Ok(total)
}

pub fn rmse(model: &AnfisModel, data: &TrainingSet) -> Result<f64, AnfisError> {
    Ok((sse(model, data)? / data.len() as f64).sqrt())
}

const LSE_RANK_TOL: f64 = 1e-10;

/// Solves the consequents by linear least squares with premises fixed.
pub fn fit_consequents(model: &mut AnfisModel, data: &TrainingSet) -> Result<(), AnfisError> {
    let r = model.rule_count();
    let cols = 3 * r;
    let n = data.len();
    let mut a = DMatrix::<f64>::zeros(n, cols);
    let mut b = DVector::<f64>::zeros(n);
    for (k, [x, y, t]) in data.rows().iter().enumerate() {
        let wn = model.normalized_firing(*x, *y)?;
        for (i, w) in wn.iter().enumerate() {
            a[(k, 3 * i)] = w * x;
            a[(k, 3 * i + 1)] = w * y;
            a[(k, 3 * i + 2)] = *w;
        }
        b[k] = *t;
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > LSE_RANK_TOL * smax)
        .count();
    if rank < cols {
        return Err(AnfisError::SingularLse { rank, cols });
    }
    let sol = svd
        .solve(&b, LSE_RANK_TOL * smax)
        .map_err(|e| AnfisError::InvalidParameter(e.to_string()))?;
    for i in 0..r {
        model.consequents[i] = [sol[3 * i], sol[3 * i + 1], sol[3 * i + 2]];
    }
    Ok(())
}

/// Analytic gradient of the training SSE with respect to every premise
/// parameter, ordered input x then y, membership index, then (a, b, c).
pub fn premise_gradient(model: &AnfisModel, data: &TrainingSet) -> Result<Vec<f64>, AnfisError> {
    let nx = model.premise[0].len();
    let mut grad = vec![0.0; 3 * (nx + model.premise[1].len())];
    for [x, y, t] in data.rows() {
        let ex: Vec<(f64, [f64; 3])> = model.premise[0]
            .iter()
            .map(|m| m.eval_with_grad(*x))
            .collect();
        let ey: Vec<(f64, [f64; 3])> = model.premise[1]
            .iter()
            .map(|m| m.eval_with_grad(*y))
            .collect();
        let w: Vec<f64> = model
            .rules
            .iter()
            .map(|&(i, j)| ex[i].0 * ey[j].0)
            .collect();
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(AnfisError::AllFiringZero { x: *x, y: *y });
        }
        let f = model.rule_outputs(*x, *y);
        let out: f64 = w.iter().zip(&f).map(|(w, f)| w * f).sum::<f64>() / total;
        let err2 = 2.0 * (out - t);
        for (rule, &(i, j)) in model.rules.iter().enumerate() {
            let do_dw = (f[rule] - out) / total;
            let scale = err2 * do_dw;
            for p in 0..3 {
                grad[3 * i + p] += scale * ey[j].0 * ex[i].1[p];
                grad[3 * (nx + j) + p] += scale * ex[i].0 * ey[j].1[p];
            }
        }
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(AnfisError::NanGradient);
    }
    Ok(grad)
}

fn check_data(model: &AnfisModel, data: &TrainingSet) -> Result<(), AnfisError> {
    model.check()?;
    let need = 3 * model.rule_count();
    if data.len() < need {
        return Err(AnfisError::IllPosed(format!(
            "{} rows for {} consequent parameters",
            data.len(),
            need
        )));
    }
    Ok(())
}

fn descend(model: &mut AnfisModel, grad: &[f64], learn_rate: f64) {
    let mut p = model.premise_params();
    for (k, v) in p.iter_mut().enumerate() {
        *v -= learn_rate * grad[k];
        // a and b must stay positive.
        if k % 3 != 2 {
            *v = v.max(1e-6);
        }
    }
    model.set_premise_params(&p);
}

/// Hybrid learning. Each epoch solves the consequents exactly, then takes
/// one batch gradient step on the premises.
pub fn train_hybrid(
    model: &AnfisModel,
    data: &TrainingSet,
    epochs: usize,
    learn_rate: f64,
) -> Result<TrainingReport, AnfisError> {
    if !(learn_rate >= 0.0 && learn_rate.is_finite()) {
        return Err(AnfisError::InvalidParameter(format!(
            "learning rate must be nonnegative, got {learn_rate}"
        )));
    }
    check_data(model, data)?;
    let mut m = model.clone();
    let initial = rmse(&m, data)?;
    let mut report = TrainingReport {
        rmse: vec![initial],
        rmse_before_lse: Vec::with_capacity(epochs),
        final_rmse: initial,
        model: m.clone(),
        converged: false,
    };
    for _ in 0..epochs {
        report.rmse_before_lse.push(rmse(&m, data)?);
        fit_consequents(&mut m, data)?;
        report.rmse.push(rmse(&m, data)?);
        if learn_rate > 0.0 {
            let g = premise_gradient(&m, data)?;
            descend(&mut m, &g, learn_rate);
        }
    }
    report.final_rmse = rmse(&m, data)?;
    report.converged = epochs > 0 && {
        let n = report.rmse.len();
        let last = report.rmse[n - 1];
        let prev = report.rmse[n.saturating_sub(2)];
        last <= 1e-9 * initial.max(1.0) || (prev - last).abs() <= 1e-9 * prev.max(1e-300)
    };
    report.model = m;
    Ok(report)
}

/// Plain batch gradient descent on premises and consequents, used to compare
/// convergence speed against [`train_hybrid`].
pub fn train_gradient_only(
    model: &AnfisModel,
    data: &TrainingSet,
    epochs: usize,
    learn_rate: f64,
) -> Result<Vec<f64>, AnfisError> {
    check_data(model, data)?;
    let mut m = model.clone();
    let mut history = vec![rmse(&m, data)?];
    for _ in 0..epochs {
        let g = premise_gradient(&m, data)?;
        let mut gc = vec![[0.0; 3]; m.rule_count()];
        for [x, y, t] in data.rows() {
            let wn = m.normalized_firing(*x, *y)?;
            let e2 = 2.0 * (m.infer(*x, *y)? - t);
            for (i, w) in wn.iter().enumerate() {
                gc[i][0] += e2 * w * x;
                gc[i][1] += e2 * w * y;
                gc[i][2] += e2 * w;
            }
        }
        descend(&mut m, &g, learn_rate);
        for (c, g) in m.consequents.iter_mut().zip(&gc) {
            for k in 0..3 {
                c[k] -= learn_rate * g[k];
            }
        }
        history.push(rmse(&m, data)?);
    }
    Ok(history)
}

/// First index whose value is at or below `threshold`.
pub fn epochs_to_threshold(history: &[f64], threshold: f64) -> Option<usize> {
    history.iter().position(|v| *v <= threshold)
}

/// Max relative error between analytic and central-difference premise
/// gradients of the training SSE.
pub fn gradient_check(
    model: &AnfisModel,
    data: &TrainingSet,
    step: f64,
) -> Result<f64, AnfisError> {
    if !(step > 1e-8 && step < 1e-2) {
        return Err(AnfisError::InvalidParameter(format!(
            "step must lie in (1e-8, 1e-2), got {step}"
        )));
    }
    model.check()?;
    let g = premise_gradient(model, data)?;
    let fd = numeric_premise_gradient(model, data, step)?;
    Ok(g.iter()
        .zip(&fd)
        .map(|(a, n)| (a - n).abs() / (n.abs() + 1e-12))
        .fold(0.0, f64::max))
}

/// Central-difference premise gradient of the training SSE.
pub fn numeric_premise_gradient(
    model: &AnfisModel,
    data: &TrainingSet,
    step: f64,
) -> Result<Vec<f64>, AnfisError> {
    let base = model.premise_params();
    let mut out = Vec::with_capacity(base.len());
    let mut m = model.clone();
    for k in 0..base.len() {
        let mut p = base.clone();
        p[k] = base[k] + step;
        m.set_premise_params(&p);
        let up = sse(&m, data)?;
        p[k] = base[k] - step;
        m.set_premise_params(&p);
        let down = sse(&m, data)?;
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

/// Linear map of one input onto [-1, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: f64,
    pub max: f64,
}

impl Normalization {
    pub fn apply(&self, v: f64) -> f64 {
        2.0 * (v - self.min) / (self.max - self.min) - 1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VdcEstimator {
    pub model: AnfisModel,
    pub normalization: [Normalization; 2],
    pub report: TrainingReport,
}

impl VdcEstimator {
    pub fn predict(&self, e_power: f64, e_vdc: f64) -> Result<f64, AnfisError> {
        self.model.infer(
            self.normalization[0].apply(e_power),
            self.normalization[1].apply(e_vdc),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub n_mf_per_input: usize,
    pub wiring: RuleWiring,
    pub epochs: usize,
    pub learn_rate: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            n_mf_per_input: 2,
            wiring: RuleWiring::Grid,
            epochs: 50,
            learn_rate: 0.01,
        }
    }
}

/// Trains a V*dc correction estimator from rows of
/// (load-power error, dc-voltage error, target correction).
pub fn fit_vdc_estimator(
    traces: &[[f64; 3]],
    opts: &FitOptions,
) -> Result<VdcEstimator, AnfisError> {
    if traces.is_empty() {
        return Err(AnfisError::IllPosed("no traces".into()));
    }
    let mut norm = [Normalization {
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
    }; 2];
    for row in traces {
        for k in 0..2 {
            norm[k].min = norm[k].min.min(row[k]);
            norm[k].max = norm[k].max.max(row[k]);
        }
    }
    for (k, n) in norm.iter().enumerate() {
        if !(n.max > n.min) {
            return Err(AnfisError::DegenerateTraceRange { input: k });
        }
    }
    let rows = traces
        .iter()
        .map(|r| [norm[0].apply(r[0]), norm[1].apply(r[1]), r[2]])
        .collect();
    let data = TrainingSet::new(rows)?;
    let init = AnfisModel::new(opts.n_mf_per_input, opts.wiring, (-1.0, 1.0), (-1.0, 1.0))?;
    let report = train_hybrid(&init, &data, opts.epochs, opts.learn_rate)?;
    Ok(VdcEstimator {
        model: report.model.clone(),
        normalization: norm,
        report,
    })
}

pub const TRAINING_HEADER: [&str; 3] = ["x", "y", "target"];

/// Reads `x,y,target` rows. Blank lines are skipped; every value must be
/// a finite real.
pub fn parse_training_csv(text: &str) -> Result<Vec<[f64; 3]>, AnfisError> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    let mut header = false;
    for rec in rd.records() {
        let rec = rec.map_err(|e| AnfisError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let cells: Vec<&str> = rec.iter().map(str::trim).collect();
        if !header {
            let first = cells.first().map(|c| c.trim_start_matches('\u{feff}'));
            if first != Some("x") || cells[1..] != TRAINING_HEADER[1..] {
                return Err(AnfisError::Parse {
                    line,
                    msg: format!("expected header {}", TRAINING_HEADER.join(",")),
                });
            }
            header = true;
            continue;
        }
        if cells.len() != 3 {
            return Err(AnfisError::Parse {
                line,
                msg: format!("expected 3 cells, found {}", cells.len()),
            });
        }
        let mut row = [0.0; 3];
        for (k, c) in cells.iter().enumerate() {
            row[k] = c
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| AnfisError::Parse {
                    line,
                    msg: format!("bad {} value {c:?}", TRAINING_HEADER[k]),
                })?;
        }
        rows.push(row);
    }
    if !header {
        return Err(AnfisError::Parse {
            line: 1,
            msg: "missing header".into(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_shape() {
        let m = MembershipFunction::new(0.5, 2.0, 1.0).unwrap();
        assert_eq!(m.eval(1.0), 1.0);
        assert!((m.eval(1.5) - 0.5).abs() < 1e-15);
        assert!(MembershipFunction::new(0.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn single_rule_constant() {
        let mut m = AnfisModel::new(1, RuleWiring::Grid, (-1.0, 1.0), (-1.0, 1.0)).unwrap();
        m.consequents[0] = [0.0, 0.0, 5.0];
        assert_eq!(m.infer(0.3, -7.0).unwrap(), 5.0);
    }

    #[test]
    fn midpoint_of_equal_firing() {
        let mut m = AnfisModel::new(2, RuleWiring::Paired, (-1.0, 1.0), (-1.0, 1.0)).unwrap();
        m.consequents = vec![[0.0, 0.0, 2.0], [0.0, 0.0, 4.0]];
        assert!((m.infer(0.0, 0.0).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn grid_rule_count() {
        let m = AnfisModel::new(3, RuleWiring::Grid, (0.0, 1.0), (0.0, 1.0)).unwrap();
        assert_eq!(m.rule_count(), 9);
        assert_eq!(m.premise[0][1].c, 0.5);
        assert_eq!(m.premise[0][1].a, 0.25);
    }

    #[test]
    fn too_few_rows() {
        let m = AnfisModel::new(2, RuleWiring::Grid, (0.0, 1.0), (0.0, 1.0)).unwrap();
        let d = TrainingSet::new(vec![[0.0, 0.0, 1.0]; 5]).unwrap();
        assert!(matches!(
            train_hybrid(&m, &d, 1, 0.01),
            Err(AnfisError::IllPosed(_))
        ));
    }

    #[test]
    fn duplicated_rows_are_singular() {
        let m = AnfisModel::new(2, RuleWiring::Grid, (0.0, 1.0), (0.0, 1.0)).unwrap();
        let d = TrainingSet::new(vec![[0.2, 0.3, 1.0]; 20]).unwrap();
        match train_hybrid(&m, &d, 1, 0.01) {
            Err(AnfisError::SingularLse { rank, cols }) => {
                assert_eq!(cols, 12);
                assert!(rank < 12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn step_range_guarded() {
        let m = AnfisModel::new(2, RuleWiring::Grid, (0.0, 1.0), (0.0, 1.0)).unwrap();
        let d = TrainingSet::new(vec![[0.2, 0.3, 1.0]; 20]).unwrap();
        assert!(gradient_check(&m, &d, 0.1).is_err());
    }
}
