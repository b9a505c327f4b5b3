//! Weighted-F1 evaluation and report-level bootstrap statistics.
//!
//! Each condition is scored on three retrieval tasks (positive, negative and
//! uncertain extraction). A task treats its class as positive and pools the
//! rest; the condition's weighted-F1 is the support-weighted mean of the task
//! F1s. Tasks with `2TP + FP + FN = 0` are undefined and carry no weight.
//! Conditions with no support at all are left out of the macro average and
//! counted in `excluded`.
//!
//! Bootstrap replicates resample whole reports. Replicate `r` draws from a
//! ChaCha8 stream keyed by `(seed, r)`, so any execution order of the
//! replicates yields the same values.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::schema::{Condition, LabelClass, LabelVector, NUM_CONDITIONS};

/// The three retrieval tasks, in reporting order.
pub const TASKS: [LabelClass; 3] = [LabelClass::Positive, LabelClass::Negative, LabelClass::Uncertain];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("{preds} predictions but {gold} gold labels")]
    Length { preds: usize, gold: usize },
    #[error("inputs are not aligned: {a} / {b} / {gold} reports")]
    Alignment { a: usize, b: usize, gold: usize },
    #[error("no condition has a defined weighted-F1")]
    AllUndefined,
    #[error("bootstrap needs at least 2 reports, got {0}")]
    Size(usize),
    #[error("invalid evaluation config: {0}")]
    Config(&'static str),
}

/// 4×4 counts indexed `[gold][pred]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion(pub [[u32; 4]; 4]);

impl Confusion {
    pub fn from_pairs(preds: &[LabelClass], gold: &[LabelClass]) -> Result<Self, EvalError> {
        if preds.len() != gold.len() {
            return Err(EvalError::Length {
                preds: preds.len(),
                gold: gold.len(),
            });
        }
        let mut m = Confusion::default();
        for (p, g) in preds.iter().zip(gold) {
            m.0[g.index()][p.index()] += 1;
        }
        Ok(m)
    }

    pub fn task(&self, class: LabelClass) -> TaskScore {
        let k = class.index();
        let tp = self.0[k][k];
        let fp: u32 = (0..4).filter(|&g| g != k).map(|g| self.0[g][k]).sum();
        let fn_: u32 = (0..4).filter(|&p| p != k).map(|p| self.0[k][p]).sum();
        let denom = 2 * tp + fp + fn_;
        TaskScore {
            class,
            tp,
            fp,
            fn_,
            support: tp + fn_,
            f1: (denom > 0).then(|| 2.0 * tp as f64 / denom as f64),
        }
    }
}

/// One binary retrieval task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub class: LabelClass,
    pub tp: u32,
    pub fp: u32,
    #[serde(rename = "fn")]
    pub fn_: u32,
    pub support: u32,
    pub f1: Option<f64>,
}

/// F1 with `class` as the positive class and every other class pooled.
pub fn binary_f1(preds: &[LabelClass], gold: &[LabelClass], class: LabelClass) -> Result<TaskScore, EvalError> {
    Ok(Confusion::from_pairs(preds, gold)?.task(class))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// `num / den` in lowest terms, or `None` on overflow.
fn add_fraction((n1, d1): (u128, u128), (n2, d2): (u128, u128)) -> Option<(u128, u128)> {
    let g = d1.gcd(&d2);
    let num = n1.checked_mul(d2 / g)?.checked_add(n2.checked_mul(d1 / g)?)?;
    let den = (d1 / g).checked_mul(d2)?;
    let r = num.gcd(&den).max(1);
    Some((num / r, den / r))
}

const EXACT_F64: u128 = 1 << 53;

/// Support-weighted mean of the defined task F1s. The sum is formed as an
/// exact fraction and rounded once, so a lone task returns its own F1 bit
/// for bit and the result never leaves `[min, max]` of the task F1s.
/// Counts too large for that fall back to floating point.
fn weighted(tasks: &[TaskScore; 3]) -> Option<f64> {
    let used: Vec<&TaskScore> = tasks.iter().filter(|t| t.f1.is_some() && t.support > 0).collect();
    let support: u64 = used.iter().map(|t| t.support as u64).sum();
    if support == 0 {
        return None;
    }
    let exact = used.iter().try_fold((0u128, 1u128), |acc, t| {
        let num = 2 * t.tp as u128 * t.support as u128;
        let den = 2 * t.tp as u128 + t.fp as u128 + t.fn_ as u128;
        add_fraction(acc, (num, den))
    });
    if let Some((num, den)) = exact {
        let g = num.gcd(&(support as u128)).max(1);
        let (num, den) = (num / g, den.checked_mul(support as u128 / g));
        if let Some(den) = den.filter(|&d| d < EXACT_F64 && num < EXACT_F64) {
            return Some(num as f64 / den as f64);
        }
    }
    let num: f64 = used.iter().map(|t| t.support as f64 * t.f1.expect("defined")).sum();
    Some(num / support as f64)
}

/// Weighted-F1 of one condition without the per-task breakdown.
fn weighted_from_confusion(m: &Confusion) -> Option<f64> {
    weighted(&TASKS.map(|k| m.task(k)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionScore {
    pub condition: Condition,
    pub tasks: [TaskScore; 3],
    pub weighted_f1: Option<f64>,
    pub ci: Option<Interval>,
}

impl ConditionScore {
    pub fn from_confusion(condition: Condition, m: &Confusion) -> Self {
        let tasks = TASKS.map(|k| m.task(k));
        ConditionScore {
            condition,
            weighted_f1: weighted(&tasks),
            tasks,
            ci: None,
        }
    }
}

fn column(vectors: &[LabelVector], condition: Condition) -> Vec<LabelClass> {
    vectors.iter().map(|v| v.get(condition)).collect()
}

pub fn weighted_f1_condition(preds: &[LabelVector], gold: &[LabelVector], condition: Condition) -> Result<ConditionScore, EvalError> {
    let m = Confusion::from_pairs(&column(preds, condition), &column(gold, condition))?;
    Ok(ConditionScore::from_confusion(condition, &m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroF1 {
    pub value: f64,
    pub included: usize,
    pub excluded: usize,
}

/// Unweighted mean over conditions with a defined score.
pub fn macro_f1(scores: &[ConditionScore]) -> Result<MacroF1, EvalError> {
    macro_of(scores.iter().map(|s| s.weighted_f1))
}

fn macro_of(values: impl Iterator<Item = Option<f64>>) -> Result<MacroF1, EvalError> {
    let mut sum = 0.0;
    let mut included = 0;
    let mut excluded = 0;
    for v in values {
        match v {
            Some(v) => {
                sum += v;
                included += 1;
            }
            None => excluded += 1,
        }
    }
    if included == 0 {
        return Err(EvalError::AllUndefined);
    }
    Ok(MacroF1 {
        value: sum / included as f64,
        included,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_condition: Vec<ConditionScore>,
    pub macro_f1: f64,
    pub excluded: usize,
    pub macro_ci: Option<Interval>,
    pub n_reports: usize,
}

/// Point estimates for all 14 conditions and their macro average.
pub fn evaluate(preds: &[LabelVector], gold: &[LabelVector]) -> Result<EvalReport, EvalError> {
    let table = PairTable::new(preds, gold)?;
    let all: Vec<usize> = (0..table.len()).collect();
    let confusions = table.confusions(&all);
    let per_condition: Vec<ConditionScore> = Condition::ALL
        .iter()
        .map(|&c| ConditionScore::from_confusion(c, &confusions[c.index()]))
        .collect();
    let m = macro_f1(&per_condition)?;
    Ok(EvalReport {
        per_condition,
        macro_f1: m.value,
        excluded: m.excluded,
        macro_ci: None,
        n_reports: preds.len(),
    })
}

/// `(gold, pred)` codes per report and condition.
struct PairTable {
    codes: Vec<[u8; NUM_CONDITIONS]>,
}

impl PairTable {
    fn new(preds: &[LabelVector], gold: &[LabelVector]) -> Result<Self, EvalError> {
        if preds.len() != gold.len() {
            return Err(EvalError::Length {
                preds: preds.len(),
                gold: gold.len(),
            });
        }
        let codes = preds
            .iter()
            .zip(gold)
            .map(|(p, g)| {
                let mut row = [0u8; NUM_CONDITIONS];
                for c in Condition::ALL {
                    row[c.index()] = (g.get(c).index() * 4 + p.get(c).index()) as u8;
                }
                row
            })
            .collect();
        Ok(PairTable { codes })
    }

    fn len(&self) -> usize {
        self.codes.len()
    }

    fn confusions(&self, indices: &[usize]) -> [Confusion; NUM_CONDITIONS] {
        let mut out = [Confusion::default(); NUM_CONDITIONS];
        for &i in indices {
            for (c, &code) in self.codes[i].iter().enumerate() {
                out[c].0[(code / 4) as usize][(code % 4) as usize] += 1;
            }
        }
        out
    }

    fn weighted_scores(&self, indices: &[usize]) -> [Option<f64>; NUM_CONDITIONS] {
        self.confusions(indices).map(|m| weighted_from_confusion(&m))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub n_bootstrap: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_bootstrap: 1000,
            alpha: 0.05,
            seed: 0,
        }
    }
}

impl EvalConfig {
    fn check(&self) -> Result<(), EvalError> {
        if self.n_bootstrap == 0 {
            return Err(EvalError::Config("n_bootstrap must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(EvalError::Config("alpha must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Report indices drawn with replacement for replicate `replicate`.
pub fn resample_indices(seed: u64, replicate: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// Executes independent replicates. Implementations must return results in
/// replicate order.
pub trait ReplicateRunner {
    fn run<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// In-order, single-threaded execution.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl ReplicateRunner for Serial {
    fn run<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

/// Nearest-rank quantile: the `ceil(q·n)`-th smallest value.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = libm::ceil(q * n as f64 - 1e-9).max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

/// Two-sided percentile interval from unsorted replicate values.
pub fn percentile_interval(values: &[f64], alpha: f64) -> Option<Interval> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(Interval {
        lo: nearest_rank(&sorted, alpha / 2.0),
        hi: nearest_rank(&sorted, 1.0 - alpha / 2.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEstimate {
    pub point: f64,
    pub ci: Interval,
    /// Defined replicate values, in replicate order.
    pub replicates: Vec<f64>,
    /// Replicates on which the statistic was undefined.
    pub undefined: usize,
}

/// Percentile bootstrap of a report-level statistic. `statistic` receives
/// the (possibly repeated) report indices of one sample.
pub fn bootstrap_ci<F, R>(n_items: usize, statistic: F, cfg: &EvalConfig, runner: &R) -> Result<BootstrapEstimate, EvalError>
where
    F: Fn(&[usize]) -> Option<f64> + Sync + Send,
    R: ReplicateRunner,
{
    cfg.check()?;
    if n_items < 2 {
        return Err(EvalError::Size(n_items));
    }
    let all: Vec<usize> = (0..n_items).collect();
    let point = statistic(&all).ok_or(EvalError::AllUndefined)?;
    let seed = cfg.seed;
    let raw = runner.run(cfg.n_bootstrap, |r| statistic(&resample_indices(seed, r, n_items)));
    let undefined = raw.iter().filter(|v| v.is_none()).count();
    let replicates: Vec<f64> = raw.into_iter().flatten().collect();
    let ci = percentile_interval(&replicates, cfg.alpha).ok_or(EvalError::AllUndefined)?;
    Ok(BootstrapEstimate {
        point,
        ci,
        replicates,
        undefined,
    })
}

/// [`evaluate`] plus per-condition and macro intervals computed from the
/// same report resamples.
pub fn evaluate_with_ci<R: ReplicateRunner>(preds: &[LabelVector], gold: &[LabelVector], cfg: &EvalConfig, runner: &R) -> Result<EvalReport, EvalError> {
    cfg.check()?;
    let mut report = evaluate(preds, gold)?;
    let n = preds.len();
    if n < 2 {
        return Err(EvalError::Size(n));
    }
    let table = PairTable::new(preds, gold)?;
    let seed = cfg.seed;
    let reps: Vec<[Option<f64>; NUM_CONDITIONS]> =
        runner.run(cfg.n_bootstrap, |r| table.weighted_scores(&resample_indices(seed, r, n)));
    for c in Condition::ALL {
        let values: Vec<f64> = reps.iter().filter_map(|r| r[c.index()]).collect();
        report.per_condition[c.index()].ci = percentile_interval(&values, cfg.alpha);
    }
    let macros: Vec<f64> = reps
        .iter()
        .filter_map(|r| macro_of(r.iter().copied()).ok().map(|m| m.value))
        .collect();
    report.macro_ci = percentile_interval(&macros, cfg.alpha);
    Ok(report)
}

/// Correct-assignment differences by gold class: `(a right, b wrong)`
/// minus `(b right, a wrong)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorrectCounts {
    pub by_class: [i64; 4],
    pub total: i64,
}

impl CorrectCounts {
    pub fn get(&self, class: LabelClass) -> i64 {
        self.by_class[class.index()]
    }
}

pub fn correct_count_diffs(a: &[LabelVector], b: &[LabelVector], gold: &[LabelVector]) -> Result<CorrectCounts, EvalError> {
    check_aligned(a, b, gold)?;
    let mut out = CorrectCounts::default();
    for ((va, vb), vg) in a.iter().zip(b).zip(gold) {
        for c in Condition::ALL {
            let g = vg.get(c);
            let ra = va.get(c) == g;
            let rb = vb.get(c) == g;
            if ra && !rb {
                out.by_class[g.index()] += 1;
            } else if rb && !ra {
                out.by_class[g.index()] -= 1;
            }
        }
    }
    out.total = out.by_class.iter().sum();
    Ok(out)
}

fn check_aligned(a: &[LabelVector], b: &[LabelVector], gold: &[LabelVector]) -> Result<(), EvalError> {
    if a.len() != gold.len() || b.len() != gold.len() {
        return Err(EvalError::Alignment {
            a: a.len(),
            b: b.len(),
            gold: gold.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionDiff {
    pub condition: Condition,
    /// Full-sample difference.
    pub point: Option<f64>,
    pub mean: Option<f64>,
    pub ci: Option<Interval>,
}

/// Paired bootstrap comparison of model `a` against model `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub point_diff: f64,
    pub mean_diff: f64,
    pub ci: Interval,
    pub p_value_two_sided: f64,
    pub per_condition_diffs: Vec<ConditionDiff>,
    pub correct_count_diffs: CorrectCounts,
    pub n_bootstrap: usize,
    pub undefined_replicates: usize,
}

/// `p = 2·min(P(d ≤ 0), P(d ≥ 0))` over replicate differences, clipped to
/// `[1/n_bootstrap, 1]`.
pub fn paired_p_value(diffs: &[f64], n_bootstrap: usize) -> f64 {
    if diffs.is_empty() {
        return 1.0;
    }
    let n = diffs.len() as f64;
    let le = diffs.iter().filter(|&&d| d <= 0.0).count() as f64 / n;
    let ge = diffs.iter().filter(|&&d| d >= 0.0).count() as f64 / n;
    (2.0 * le.min(ge)).clamp(1.0 / n_bootstrap as f64, 1.0)
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

struct ReplicateDiff {
    macro_diff: Option<f64>,
    per_condition: [Option<f64>; NUM_CONDITIONS],
}

fn diff_on(ta: &PairTable, tb: &PairTable, idx: &[usize]) -> ReplicateDiff {
    let sa = ta.weighted_scores(idx);
    let sb = tb.weighted_scores(idx);
    let mut per_condition = [None; NUM_CONDITIONS];
    for c in 0..NUM_CONDITIONS {
        if let (Some(x), Some(y)) = (sa[c], sb[c]) {
            per_condition[c] = Some(x - y);
        }
    }
    let macro_diff = match (macro_of(sa.iter().copied()), macro_of(sb.iter().copied())) {
        (Ok(x), Ok(y)) => Some(x.value - y.value),
        _ => None,
    };
    ReplicateDiff {
        macro_diff,
        per_condition,
    }
}

pub fn compare_models<R: ReplicateRunner>(
    a: &[LabelVector],
    b: &[LabelVector],
    gold: &[LabelVector],
    cfg: &EvalConfig,
    runner: &R,
) -> Result<Comparison, EvalError> {
    cfg.check()?;
    check_aligned(a, b, gold)?;
    let n = gold.len();
    if n < 2 {
        return Err(EvalError::Size(n));
    }
    let ta = PairTable::new(a, gold)?;
    let tb = PairTable::new(b, gold)?;
    let all: Vec<usize> = (0..n).collect();
    let full = diff_on(&ta, &tb, &all);
    let point_diff = full.macro_diff.ok_or(EvalError::AllUndefined)?;
    let seed = cfg.seed;
    let reps: Vec<ReplicateDiff> = runner.run(cfg.n_bootstrap, |r| diff_on(&ta, &tb, &resample_indices(seed, r, n)));
    let macro_diffs: Vec<f64> = reps.iter().filter_map(|r| r.macro_diff).collect();
    let ci = percentile_interval(&macro_diffs, cfg.alpha).ok_or(EvalError::AllUndefined)?;
    let per_condition_diffs = Condition::ALL
        .iter()
        .map(|&c| {
            let values: Vec<f64> = reps.iter().filter_map(|r| r.per_condition[c.index()]).collect();
            ConditionDiff {
                condition: c,
                point: full.per_condition[c.index()],
                mean: mean(&values),
                ci: percentile_interval(&values, cfg.alpha),
            }
        })
        .collect();
    Ok(Comparison {
        point_diff,
        mean_diff: mean(&macro_diffs).unwrap_or(0.0),
        ci,
        p_value_two_sided: paired_p_value(&macro_diffs, cfg.n_bootstrap),
        per_condition_diffs,
        correct_count_diffs: correct_count_diffs(a, b, gold)?,
        n_bootstrap: cfg.n_bootstrap,
        undefined_replicates: reps.len() - macro_diffs.len(),
    })
}

/// One line of the per-condition table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub f1: Option<f64>,
    pub ci: Option<Interval>,
    pub improvement: Option<f64>,
    pub improvement_ci: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub rows: Vec<ReportRow>,
    pub average: ReportRow,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TableParseError {
    #[error("unexpected header {0:?}")]
    Header(String),
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
    #[error("missing Average row")]
    NoAverage,
}

pub const TABLE_HEADER: &str = "condition,f1,f1_lo,f1_hi,improvement,improvement_lo,improvement_hi";

/// Per-condition rows plus the Average row. With a comparison, rows are
/// sorted by mean improvement, largest first; otherwise condition order.
pub fn per_condition_report(eval: &EvalReport, comparison: Option<&Comparison>) -> ReportTable {
    let mut rows: Vec<ReportRow> = eval
        .per_condition
        .iter()
        .map(|s| {
            let diff = comparison.map(|cmp| &cmp.per_condition_diffs[s.condition.index()]);
            ReportRow {
                label: s.condition.name().to_string(),
                f1: s.weighted_f1,
                ci: s.ci,
                improvement: diff.and_then(|d| d.mean),
                improvement_ci: diff.and_then(|d| d.ci),
            }
        })
        .collect();
    if comparison.is_some() {
        // Stable: equal improvements keep condition order; undefined last.
        rows.sort_by(|x, y| match (x.improvement, y.improvement) {
            (Some(a), Some(b)) => b.total_cmp(&a),
            (Some(_), None) => core::cmp::Ordering::Less,
            (None, Some(_)) => core::cmp::Ordering::Greater,
            (None, None) => core::cmp::Ordering::Equal,
        });
    }
    ReportTable {
        rows,
        average: ReportRow {
            label: "Average".to_string(),
            f1: Some(eval.macro_f1),
            ci: eval.macro_ci,
            improvement: comparison.map(|c| c.mean_diff),
            improvement_ci: comparison.map(|c| c.ci),
        },
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn parse_cell(s: &str, line: usize) -> Result<Option<f64>, TableParseError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|_| TableParseError::Row {
        line,
        message: format!("not a number: {s:?}"),
    })
}

fn interval(lo: Option<f64>, hi: Option<f64>) -> Option<Interval> {
    Some(Interval { lo: lo?, hi: hi? })
}

impl ReportTable {
    /// Machine-readable rendering; values use shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TABLE_HEADER);
        out.push('\n');
        for r in self.rows.iter().chain(core::iter::once(&self.average)) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.label,
                cell(r.f1),
                cell(r.ci.map(|c| c.lo)),
                cell(r.ci.map(|c| c.hi)),
                cell(r.improvement),
                cell(r.improvement_ci.map(|c| c.lo)),
                cell(r.improvement_ci.map(|c| c.hi)),
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, TableParseError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != TABLE_HEADER {
            return Err(TableParseError::Header(header.to_string()));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let lineno = i + 2;
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 7 {
                return Err(TableParseError::Row {
                    line: lineno,
                    message: format!("expected 7 cells, found {}", cells.len()),
                });
            }
            let v: Vec<Option<f64>> = cells[1..].iter().map(|c| parse_cell(c, lineno)).collect::<Result<_, _>>()?;
            rows.push(ReportRow {
                label: cells[0].to_string(),
                f1: v[0],
                ci: interval(v[1], v[2]),
                improvement: v[3],
                improvement_ci: interval(v[4], v[5]),
            });
        }
        match rows.pop() {
            Some(average) if average.label == "Average" => Ok(ReportTable { rows, average }),
            _ => Err(TableParseError::NoAverage),
        }
    }

    /// Fixed-width text table with three-decimal values.
    pub fn render(&self) -> String {
        let fmt_val = |v: Option<f64>, ci: Option<Interval>| match (v, ci) {
            (Some(v), Some(ci)) => format!("{v:.3} ({:.3}, {:.3})", ci.lo, ci.hi),
            (Some(v), None) => format!("{v:.3}"),
            _ => "-".to_string(),
        };
        let with_improvement = self.average.improvement.is_some();
        let mut out = String::new();
        let _ = write!(out, "{:<28}{:<24}", "Condition", "F1 (95% CI)");
        if with_improvement {
            let _ = write!(out, "Improvement (95% CI)");
        }
        out.push('\n');
        for r in self.rows.iter().chain(core::iter::once(&self.average)) {
            let _ = write!(out, "{:<28}{:<24}", r.label, fmt_val(r.f1, r.ci));
            if with_improvement {
                let _ = write!(out, "{}", fmt_val(r.improvement, r.improvement_ci));
            }
            out.push('\n');
        }
        out
    }
}

/// Replicate values of a statistic must lie inside `[lo, hi]` of the F1
/// range; exposed for property checks.
pub fn all_in_unit_interval(values: &[f64]) -> bool {
    values.iter().all(|v| (0.0..=1.0).contains(v))
}

#[doc(hidden)]
pub fn replicate_macro_values(preds: &[LabelVector], gold: &[LabelVector], cfg: &EvalConfig) -> Result<Vec<f64>, EvalError> {
    let table = PairTable::new(preds, gold)?;
    let n = table.len();
    Ok((0..cfg.n_bootstrap)
        .filter_map(|r| macro_of(table.weighted_scores(&resample_indices(cfg.seed, r, n)).into_iter()).ok())
        .map(|m| m.value)
        .collect())
}
