//! Variant matrix runner and exhaustive annotation-subset oracle.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::flowgraph::EdgeRules;
use crate::pipeline::{read_program, run_program, Analysis, Error};
use crate::runtime::{DynamicCounts, EvalOptions, Outcome, DEFAULT_BUDGET};
use crate::selector::AnnotationSet;
use crate::syntax::{Program, Type};
use crate::transform::VariantKind;

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub fast_slow: bool,
    pub budget: u64,
    pub prelude: BTreeMap<String, Type>,
    pub rules: EdgeRules,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { fast_slow: false, budget: DEFAULT_BUDGET, prelude: BTreeMap::new(), rules: EdgeRules::default() }
    }
}

impl BenchOptions {
    fn eval(&self) -> EvalOptions {
        EvalOptions { budget: self.budget, ..EvalOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Win,
    Tie,
    Loss,
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Class::Win => "win",
            Class::Tie => "tie",
            Class::Loss => "loss",
        })
    }
}

/// Chosen against Infer on total dynamic events.
pub fn classify(chosen: &DynamicCounts, infer: &DynamicCounts) -> Class {
    match chosen.total.cmp(&infer.total) {
        std::cmp::Ordering::Less => Class::Win,
        std::cmp::Ordering::Equal => Class::Tie,
        std::cmp::Ordering::Greater => Class::Loss,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantResult {
    pub variant: VariantKind,
    pub annotations: usize,
    pub static_sites: usize,
    pub dynamic: DynamicCounts,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchResult {
    pub program: String,
    pub variants: Vec<VariantResult>,
    /// Absent when a variant could not be built or Chosen or Infer did not
    /// finish with a value.
    pub class: Option<Class>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl BenchResult {
    pub fn variant(&self, kind: VariantKind) -> Option<&VariantResult> {
        self.variants.iter().find(|v| v.variant == kind)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub win: usize,
    pub tie: usize,
    pub loss: usize,
    pub unclassified: usize,
}

pub fn summarize(results: &[BenchResult]) -> Summary {
    let mut s = Summary::default();
    for r in results {
        match r.class {
            Some(Class::Win) => s.win += 1,
            Some(Class::Tie) => s.tie += 1,
            Some(Class::Loss) => s.loss += 1,
            None => s.unclassified += 1,
        }
    }
    s
}

/// Sorted `*.spy` files of a directory.
pub fn corpus_files(dir: &Path) -> std::io::Result<Vec<std::path::PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "spy") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Runs every variant of every corpus program. Per-program failures are
/// recorded in the result.
pub fn bench_run(dir: &Path, options: &BenchOptions) -> std::io::Result<Vec<BenchResult>> {
    let files = corpus_files(dir)?;
    let mut results: Vec<BenchResult> = files
        .par_iter()
        .map(|path| {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            match read_program(path, &options.prelude) {
                Ok(p) => bench_program(&name, &p, options),
                Err(e) => failed(name, e),
            }
        })
        .collect();
    results.sort_by(|a, b| a.program.cmp(&b.program));
    Ok(results)
}

fn failed(program: String, e: Error) -> BenchResult {
    BenchResult { program, variants: Vec::new(), class: None, error: Some(e.to_string()) }
}

pub fn bench_program(name: &str, program: &Program, options: &BenchOptions) -> BenchResult {
    let analysis = match Analysis::with_rules(program, options.rules) {
        Ok(a) => a,
        Err(e) => return failed(name.to_owned(), e),
    };
    let mut variants = Vec::new();
    for kind in VariantKind::ALL {
        let sites = analysis.annotations(kind);
        let run = analysis
            .with_annotations(&sites, options.fast_slow)
            .and_then(|p| run_program(&p, &options.eval()));
        match run {
            Ok(ev) => variants.push(VariantResult {
                variant: kind,
                annotations: sites.len(),
                static_sites: ev.report.static_sites.len(),
                dynamic: ev.report.dynamic,
                outcome: ev.report.outcome,
            }),
            Err(e) => return BenchResult { error: Some(format!("{kind}: {e}")), ..failed(name.to_owned(), e) },
        }
    }
    let get = |k| variants.iter().find(|v: &&VariantResult| v.variant == k).unwrap();
    let (chosen, infer) = (get(VariantKind::Chosen), get(VariantKind::Infer));
    let class =
        (chosen.outcome.is_value() && infer.outcome.is_value()).then(|| classify(&chosen.dynamic, &infer.dynamic));
    BenchResult { program: name.to_owned(), variants, class, error: None }
}

pub const CSV_HEADER: [&str; 9] = [
    "program",
    "variant",
    "static_sites",
    "dyn_total",
    "dyn_projection",
    "dyn_injection",
    "dyn_proxy",
    "outcome",
    "class",
];

pub fn write_csv<W: Write>(results: &[BenchResult], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in results {
        let class = r.class.map(|c| c.to_string()).unwrap_or_default();
        if r.variants.is_empty() {
            let outcome = format!("error: {}", r.error.as_deref().unwrap_or(""));
            w.write_record([r.program.as_str(), "", "", "", "", "", "", &outcome, &class])?;
        }
        for v in &r.variants {
            let d = &v.dynamic;
            w.write_record([
                r.program.clone(),
                v.variant.to_string(),
                v.static_sites.to_string(),
                d.total.to_string(),
                d.projection.to_string(),
                d.injection.to_string(),
                d.proxy().to_string(),
                v.outcome.label(),
                class.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{found} inferred annotation sites exceed the limit of {limit}")]
    TooManySites { found: usize, limit: usize },
    #[error(transparent)]
    Program(#[from] Error),
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsetRow {
    /// Bit `i` set means site `i` is annotated.
    pub mask: u64,
    pub static_sites: usize,
    pub dynamic: DynamicCounts,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsetOracleResult {
    pub program: String,
    /// Inferred annotation sites as `label: type`, in bit order.
    pub sites: Vec<String>,
    pub rows: Vec<SubsetRow>,
    /// Masks with the fewest total events among value-producing subsets.
    pub best: Vec<u64>,
    pub chosen_mask: u64,
    pub infer_mask: u64,
    /// 1 + number of value-producing subsets with strictly fewer events.
    pub chosen_rank: usize,
    pub infer_rank: usize,
}

impl SubsetOracleResult {
    pub fn row(&self, mask: u64) -> &SubsetRow {
        &self.rows[mask as usize]
    }

    pub fn site_index(&self, label: &str) -> Option<usize> {
        self.sites.iter().position(|s| s.split(": ").next() == Some(label))
    }
}

pub const DEFAULT_MAX_SITES: usize = 14;

pub fn subset_oracle(
    name: &str,
    program: &Program,
    max_sites: usize,
    options: &BenchOptions,
) -> Result<SubsetOracleResult, OracleError> {
    let analysis = Analysis::with_rules(program, options.rules)?;
    let infer = analysis.annotations(VariantKind::Infer);
    let chosen = analysis.annotations(VariantKind::Chosen);
    let k = infer.len();
    if k > max_sites || k >= 64 {
        return Err(OracleError::TooManySites { found: k, limit: max_sites });
    }
    let sites: Vec<_> = infer.iter().collect();
    let mask_of = |set: &AnnotationSet| -> u64 {
        sites.iter().enumerate().filter(|(_, (s, _))| set.contains_key(s)).fold(0, |m, (i, _)| m | 1 << i)
    };
    let rows: Vec<SubsetRow> = (0..1u64 << k)
        .into_par_iter()
        .map(|mask| {
            let subset: AnnotationSet = sites
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, (s, t))| (**s, (*t).clone()))
                .collect();
            let ev = run_program(&analysis.with_annotations(&subset, options.fast_slow)?, &options.eval())?;
            Ok(SubsetRow {
                mask,
                static_sites: ev.report.static_sites.len(),
                dynamic: ev.report.dynamic,
                outcome: ev.report.outcome,
            })
        })
        .collect::<Result<_, Error>>()?;
    let rank = |mask: u64| {
        let total = rows[mask as usize].dynamic.total;
        1 + rows.iter().filter(|r| r.outcome.is_value() && r.dynamic.total < total).count()
    };
    let min = rows.iter().filter(|r| r.outcome.is_value()).map(|r| r.dynamic.total).min();
    let best = rows.iter().filter(|r| r.outcome.is_value() && Some(r.dynamic.total) == min).map(|r| r.mask).collect();
    let (chosen_mask, infer_mask) = (mask_of(&chosen), mask_of(&infer));
    Ok(SubsetOracleResult {
        program: name.to_owned(),
        sites: sites.iter().map(|(s, t)| format!("{}: {t}", analysis.resolved.site_label(**s))).collect(),
        best,
        chosen_mask,
        infer_mask,
        chosen_rank: rank(chosen_mask),
        infer_rank: rank(infer_mask),
        rows,
    })
}
