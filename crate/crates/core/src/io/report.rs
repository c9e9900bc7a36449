//! Report emission: fixed-width tables for human eyes (reals rounded to 3
//! decimals) and structured JSON that round-trips losslessly.

use serde::Serialize;

use crate::analysis::FlipReport;
use crate::domain::ClassLabel;
use crate::io::IoError;
use crate::metrics::{AlphaDecomposition, Correlation, EvalReport};
use crate::search::SearchResult;
use crate::selection::{AugmentationBudget, FoldSelection, SpecialistRank, SplitReport};
use crate::voting::VoteTrace;

/// Output format of every report-emitting subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Structured,
}

/// Structured emission: pretty JSON, newline-terminated. Parsing the output
/// back into the report type and emitting again is byte-identical.
pub fn structured<T: Serialize>(value: &T) -> Result<String, IoError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

/// One JSON object per line, for voting traces.
pub fn trace_jsonl(traces: &[VoteTrace]) -> Result<String, IoError> {
    let mut out = String::new();
    for trace in traces {
        out.push_str(&serde_json::to_string(trace)?);
        out.push('\n');
    }
    Ok(out)
}

fn f3(value: f64) -> String {
    format!("{value:.3}")
}

fn subset_label(report: &EvalReport) -> String {
    if report.class_subset == ClassLabel::defence_classes() {
        return "1-8".to_string();
    }
    report
        .class_subset
        .iter()
        .map(|c| c.value().to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Per-class evaluation table: ID, level name, F1, P, R, and support, with
/// the subset macro-F1 underneath.
pub fn eval_table(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<4}{:<20}{:>8}{:>8}{:>8}{:>7}\n",
        "ID", "Defence level", "F1", "P", "R", "n"
    ));
    for (class, score) in &report.per_class {
        out.push_str(&format!(
            "{:<4}{:<20}{:>8}{:>8}{:>8}{:>7}\n",
            class.value(),
            class.name(),
            f3(score.f1),
            f3(score.precision),
            f3(score.recall),
            score.support
        ));
    }
    out.push_str(&format!(
        "Macro-F1 (classes {}): {}{}\n",
        subset_label(report),
        f3(report.macro_f1),
        if report.skip_absent {
            ", absent classes skipped"
        } else {
            ""
        }
    ));
    out
}

/// Augmentation budget table with per-class rows and totals.
pub fn budget_table(budget: &AugmentationBudget) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<4}{:<20}{:>8}{:>8}{:>8}\n",
        "ID", "Defence level", "Orig.", "Budget", "After"
    ));
    for (class, row) in &budget.per_class {
        out.push_str(&format!(
            "{:<4}{:<20}{:>8}{:>8}{:>8}{}\n",
            class.value(),
            class.name(),
            row.orig_count,
            row.budget,
            row.orig_count + row.budget,
            if row.excluded { "  (excluded)" } else { "" }
        ));
    }
    out.push_str(&format!(
        "{:<24}{:>8}{:>8}{:>8}\n",
        "Total", budget.total_orig, budget.total_budget, budget.total_after
    ));
    out.push_str(&format!(
        "target {} per class, cap {}x, excluded {{{}}}\n",
        budget.target,
        budget.cap_multiplier,
        budget
            .excluded
            .iter()
            .map(|c| c.value().to_string())
            .collect::<Vec<_>>()
            .join(",")
    ));
    out
}

/// Agreement decomposition: pool alpha, within-branch alphas, cross-branch
/// pair alphas.
pub fn alpha_table(decomposition: &AlphaDecomposition) -> String {
    let mut out = String::new();
    out.push_str(&format!("pool alpha: {}\n", f3(decomposition.pool_alpha)));
    if !decomposition.within.is_empty() {
        out.push_str("within-branch:\n");
        for (branch, alpha) in &decomposition.within {
            out.push_str(&format!("  {branch}: {}\n", f3(*alpha)));
        }
    }
    if !decomposition.cross.is_empty() {
        out.push_str("cross-branch pairs:\n");
        for pair in &decomposition.cross {
            out.push_str(&format!(
                "  {} x {}: {}\n",
                pair.branch_a,
                pair.branch_b,
                f3(pair.alpha)
            ));
        }
    }
    if let Some(pair) = &decomposition.min_cross {
        out.push_str(&format!(
            "least agreeing pair: {} x {} ({})\n",
            pair.branch_a,
            pair.branch_b,
            f3(pair.alpha)
        ));
    }
    if !decomposition.skipped.is_empty() {
        out.push_str(&format!(
            "single-voter branches skipped: {}\n",
            decomposition.skipped.join(", ")
        ));
    }
    out
}

/// Specialist ranking, most anti-aligned first.
pub fn rank_table(rows: &[SpecialistRank]) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<6}{:<24}{:>10}\n", "rank", "candidate", "r"));
    for (i, row) in rows.iter().enumerate() {
        let r = match row.correlation {
            Correlation::Coefficient(r) => f3(r),
            Correlation::Degenerate => "degenerate".to_string(),
        };
        out.push_str(&format!("{:<6}{:<24}{:>10}\n", i + 1, row.name, r));
    }
    out
}

/// Kept and dropped folds per branch.
pub fn folds_table(selections: &[FoldSelection]) -> String {
    let mut out = String::new();
    for selection in selections {
        let kept: Vec<String> = selection
            .selected
            .iter()
            .map(|m| format!("fold {} ({})", m.fold, f3(m.f1_cv)))
            .collect();
        let dropped: Vec<String> = selection
            .dropped
            .iter()
            .map(|m| format!("fold {} ({})", m.fold, f3(m.f1_cv)))
            .collect();
        out.push_str(&format!("{}: keep {}", selection.branch_id, kept.join(", ")));
        if !dropped.is_empty() {
            out.push_str(&format!("; drop {}", dropped.join(", ")));
        }
        out.push('\n');
    }
    out
}

/// Fold composition report for a dialogue-stratified split.
pub fn split_table(report: &SplitReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "k = {}, seed = {}\n",
        report.assignment.k, report.seed
    ));
    for (fold, hist) in report.fold_class_counts.iter().enumerate() {
        let classes: Vec<String> = hist.iter().map(|n| n.to_string()).collect();
        out.push_str(&format!(
            "fold {}: {} dialogues, {} samples, classes [{}]\n",
            fold,
            report.fold_dialogue_counts[fold],
            report.fold_sample_counts[fold],
            classes.join(",")
        ));
    }
    out.push_str(&format!(
        "max class-proportion deviation: {}\n",
        f3(report.max_proportion_deviation)
    ));
    out.push_str(&format!("objective: {}\n", f3(report.objective)));
    out
}

/// Ranked configurations per ensemble size, no-aug branches marked "(n)".
pub fn search_table(result: &SearchResult) -> String {
    let mut out = String::new();
    for size in &result.sizes {
        out.push_str(&format!(
            "== {} voters ({} configs) ==\n",
            size.ensemble_size, size.total_configs
        ));
        for (i, row) in size.rows.iter().enumerate() {
            out.push_str(&format!(
                "#{}  f1={}  t={}  {}\n",
                i + 1,
                f3(row.f1),
                row.threshold_t,
                row.config_string()
            ));
        }
        if let Some(mean) = size.mean_f1_mixed {
            out.push_str(&format!("mean f1, mixed aug/no-aug: {}\n", f3(mean)));
        }
        if let Some(mean) = size.mean_f1_pure {
            out.push_str(&format!("mean f1, uniform aug: {}\n", f3(mean)));
        }
    }
    out.push_str(&format!("total configurations: {}\n", result.total_configs));
    out
}

/// Band histogram (highest agreement first), flip directions, and the
/// boundary-touch share.
pub fn flip_table(report: &FlipReport) -> String {
    let mut out = String::new();
    let b = report.base_voter_count;
    out.push_str(&format!("{:<8}{:>8}{:>7}\n", "band", "samples", "flips"));
    for (band, stat) in report.band_histogram.iter().rev() {
        out.push_str(&format!(
            "{:<8}{:>8}{:>7}\n",
            format!("{band}/{b}"),
            stat.samples,
            stat.flips
        ));
    }
    out.push_str(&format!(
        "contested samples (band <= {}): {}\n",
        (b + report.probe_voter_count) / 2,
        report.contested_total
    ));
    out.push_str(&format!("flips: {}\n", report.flips_total));
    for direction in &report.flip_directions {
        out.push_str(&format!(
            "  C{}->C{}: {}\n",
            direction.from.value(),
            direction.to.value(),
            direction.count
        ));
    }
    let boundary: Vec<String> = report
        .boundary_classes
        .iter()
        .map(|c| format!("C{}", c.value()))
        .collect();
    if report.flips_total == 0 {
        out.push_str(&format!(
            "boundary ({}) touches: 0/0\n",
            boundary.join("/")
        ));
    } else {
        out.push_str(&format!(
            "boundary ({}) touches: {}/{} ({:.1}%)\n",
            boundary.join("/"),
            report.boundary_touch_count,
            report.flips_total,
            100.0 * report.boundary_touch_count as f64 / report.flips_total as f64
        ));
    }
    out
}
