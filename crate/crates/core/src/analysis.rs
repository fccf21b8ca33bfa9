//! OOV statistics over extracted instances and their text rendering.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::SplitTag;
use crate::embeddings::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::extraction::{
    CodeInstance, OperandType, Slot, BIN_LEFT, BIN_RIGHT, CALL_ARG1, CALL_ARG2, CALL_BASE, CALL_CALLEE,
};

/// Row labels of the call table, after the count row.
pub const CALL_ROWS: [&str; 10] = [
    "Calls Missing Base Object",
    "Base Object Missing or OOV",
    "Function Name OOV",
    "First Argument OOV",
    "Second Argument OOV",
    "Both Arguments OOV",
    "Base and Function Name OOV",
    "Base and Arguments OOV",
    "Function Name and Arguments OOV",
    "All Elements OOV",
];

pub const BINOP_ROWS: [&str; 7] = [
    "Left Operand OOV",
    "Right Operand OOV",
    "Both Operands OOV",
    "Unknown Left Operand Type",
    "Unknown Right Operand Type",
    "Both Operand Types Unknown",
    "All OOV or Unknown",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CallCounts {
    pub calls: u64,
    /// Same order as [`CALL_ROWS`].
    pub rows: [u64; 10],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BinopCounts {
    pub binops: u64,
    /// Same order as [`BINOP_ROWS`].
    pub rows: [u64; 7],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitStats {
    pub calls: CallCounts,
    pub binops: BinopCounts,
}

impl SplitStats {
    pub fn merge(&mut self, other: &SplitStats) {
        self.calls.calls += other.calls.calls;
        self.binops.binops += other.binops.binops;
        for (a, b) in self.calls.rows.iter_mut().zip(other.calls.rows) {
            *a += b;
        }
        for (a, b) in self.binops.rows.iter_mut().zip(other.binops.rows) {
            *a += b;
        }
    }

    pub fn call_pct(&self, row: usize) -> f64 {
        pct(self.calls.rows[row], self.calls.calls)
    }

    pub fn binop_pct(&self, row: usize) -> f64 {
        pct(self.binops.rows[row], self.binops.binops)
    }
}

fn pct(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        100.0 * n as f64 / d as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OovReport {
    pub splits: BTreeMap<SplitTag, SplitStats>,
}

impl OovReport {
    pub fn split(&self, s: SplitTag) -> SplitStats {
        self.splits.get(&s).copied().unwrap_or_default()
    }

    pub fn merge(&mut self, other: &OovReport) {
        for (s, st) in &other.splits {
            self.splits.entry(*s).or_default().merge(st);
        }
    }
}

fn oov(slot: &Slot, vocab: &Vocabulary) -> bool {
    slot.missing || !vocab.contains(&slot.name)
}

/// Counts OOV elements per split. A base object counts as OOV when it is
/// missing. Binary operations shared by the operator and operand patterns
/// are counted once.
pub fn oov_stats(instances: &[CodeInstance], vocab: &Vocabulary) -> OovReport {
    let mut report = OovReport::default();
    let mut seen_binops = HashSet::new();
    for inst in instances {
        let st = report.splits.entry(inst.split).or_default();
        if inst.pattern.is_call() {
            let base_missing = inst.slot(CALL_BASE).missing;
            let base = oov(inst.slot(CALL_BASE), vocab);
            let callee = oov(inst.slot(CALL_CALLEE), vocab);
            let a1 = oov(inst.slot(CALL_ARG1), vocab);
            let a2 = oov(inst.slot(CALL_ARG2), vocab);
            let args = a1 && a2;
            let hits = [
                base_missing,
                base,
                callee,
                a1,
                a2,
                args,
                base && callee,
                base && args,
                callee && args,
                base && callee && args,
            ];
            st.calls.calls += 1;
            for (c, h) in st.calls.rows.iter_mut().zip(hits) {
                *c += h as u64;
            }
        } else {
            if !seen_binops.insert((inst.file_id, inst.split, inst.range)) {
                continue;
            }
            let (l, r) = (inst.slot(BIN_LEFT), inst.slot(BIN_RIGHT));
            let (lo, ro) = (oov(l, vocab), oov(r, vocab));
            let lu = l.operand_type == OperandType::Unknown;
            let ru = r.operand_type == OperandType::Unknown;
            let hits = [lo, ro, lo && ro, lu, ru, lu && ru, lo && ro && lu && ru];
            st.binops.binops += 1;
            for (c, h) in st.binops.rows.iter_mut().zip(hits) {
                *c += h as u64;
            }
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Tsv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(ReportFormat::Tsv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(Error::InvalidArgument(format!("unknown report format {other:?}"))),
        }
    }
}

/// Number of statistic rows in a rendered report.
pub const STAT_ROWS: usize = 2 + CALL_ROWS.len() + BINOP_ROWS.len();

/// One column per split present, one row per statistic.
pub fn render_report(report: &OovReport, format: ReportFormat) -> String {
    let mut splits: Vec<(SplitTag, SplitStats)> = report.splits.iter().map(|(k, v)| (*k, *v)).collect();
    if splits.is_empty() {
        splits.push((SplitTag::Train, SplitStats::default()));
    }
    let mut rows: Vec<Vec<String>> = Vec::with_capacity(STAT_ROWS + 1);
    let mut header = vec!["Statistic".to_string()];
    header.extend(splits.iter().map(|(s, _)| s.as_str().to_string()));
    rows.push(header);
    let mut row = |label: &str, f: &dyn Fn(&SplitStats) -> String| {
        let mut r = vec![label.to_string()];
        r.extend(splits.iter().map(|(_, st)| f(st)));
        rows.push(r);
    };
    row("Two Arguments Calls", &|s| s.calls.calls.to_string());
    for (i, label) in CALL_ROWS.iter().enumerate() {
        row(label, &|s| format!("{:.2}%", s.call_pct(i)));
    }
    row("Binary Operations", &|s| s.binops.binops.to_string());
    for (i, label) in BINOP_ROWS.iter().enumerate() {
        row(label, &|s| format!("{:.2}%", s.binop_pct(i)));
    }
    let mut out = String::new();
    match format {
        ReportFormat::Tsv => {
            for r in &rows {
                let _ = writeln!(out, "{}", r.join("\t"));
            }
        }
        ReportFormat::Markdown => {
            for (i, r) in rows.iter().enumerate() {
                let _ = writeln!(out, "| {} |", r.join(" | "));
                if i == 0 {
                    let sep: Vec<&str> = r.iter().enumerate().map(|(j, _)| if j == 0 { "---" } else { "---:" }).collect();
                    let _ = writeln!(out, "| {} |", sep.join(" | "));
                }
            }
        }
    }
    out
}
