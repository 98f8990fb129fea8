//! Aggregation of evaluated runs into side-by-side merge/inject tables.
//!
//! A grid directory holds run directories, each with a `run.conf`, a
//! `manifest.tsv` and per-seed `seed_<s>.<split>.metrics.tsv` files. Nothing
//! else is read.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::captioner::Architecture;
use crate::conf::Conf;
use crate::data::Split;
use crate::error::{Error, Result};
use crate::metrics::{read_report, MetricReport};
use crate::nn::Precision;

pub const RUN_CONF_FILE: &str = "run.conf";

/// Columns of the first table, then of the second, as (key, header).
pub const MAIN_TABLE: [(&str, &str); 4] = [
    ("vocab_usage_percent", "%Vocab"),
    ("cider", "CIDEr"),
    ("meteor", "METEOR"),
    ("rouge_l", "ROUGE-L"),
];
pub const BLEU_TABLE: [(&str, &str); 4] = [
    ("bleu1", "BLEU-1"),
    ("bleu2", "BLEU-2"),
    ("bleu3", "BLEU-3"),
    ("bleu4", "BLEU-4"),
];

const SINGLE_RUN_MARK: &str = "†";
const ABSENT: &str = "n/a";
const MISSING: &str = "missing";

pub fn hypotheses_name(seed: u64, split: Split) -> String {
    format!("seed_{seed}.{split}.hyp.tsv")
}

pub fn metrics_name(seed: u64, split: Split) -> String {
    format!("seed_{seed}.{split}.metrics.tsv")
}

/// What a run directory was trained with, as stored in its `run.conf`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunInfo {
    pub architecture: Architecture,
    pub layer_size: usize,
    pub min_freq: usize,
    pub vocab_size: usize,
    pub precision: Precision,
    pub seeds: Vec<u64>,
    pub dataset: String,
}

impl RunInfo {
    pub fn to_conf(&self) -> Conf {
        let mut c = Conf::new();
        c.set("arch", self.architecture);
        c.set("layer", self.layer_size);
        c.set("min_freq", self.min_freq);
        c.set("vocab_size", self.vocab_size);
        c.set("precision", self.precision);
        c.set(
            "seeds",
            self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
        );
        c.set("dataset", &self.dataset);
        c
    }

    pub fn from_conf(c: &Conf) -> Result<Self> {
        let seeds = c
            .get("seeds")
            .unwrap_or("")
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|e| Error::config(format!("seed {s:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        Ok(RunInfo {
            architecture: c.require("arch")?,
            layer_size: c.require("layer")?,
            min_freq: c.require("min_freq")?,
            vocab_size: c.require("vocab_size")?,
            precision: {
                let bits: u32 = c.require("precision")?;
                Precision::from_bits(bits)
                    .ok_or_else(|| Error::config(format!("precision must be 32 or 64, got {bits}")))?
            },
            seeds,
            dataset: c.get("dataset").unwrap_or_default().to_owned(),
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        self.to_conf().save(dir.join(RUN_CONF_FILE))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Self::from_conf(&Conf::load(dir.join(RUN_CONF_FILE))?)
    }
}

/// Scores of the evaluated seeds of one run directory.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub info: RunInfo,
    pub metrics: BTreeMap<u64, MetricReport>,
}

fn find_run_dirs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if dir.join(RUN_CONF_FILE).is_file() {
        out.push(dir.to_path_buf());
        return Ok(());
    }
    let mut children: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    children.sort();
    for child in children {
        find_run_dirs(&child, out)?;
    }
    Ok(())
}

/// Every run directory under `grid`, with the metrics found for `split`.
pub fn collect_runs(grid: &Path, split: Split) -> Result<Vec<RunSummary>> {
    let mut dirs = Vec::new();
    find_run_dirs(grid, &mut dirs)?;
    dirs.into_iter()
        .map(|dir| {
            let info = RunInfo::load(&dir)?;
            let mut metrics = BTreeMap::new();
            for &seed in &info.seeds {
                let path = dir.join(metrics_name(seed, split));
                if path.is_file() {
                    metrics.insert(seed, read_report(&path)?);
                }
            }
            Ok(RunSummary { dir, info, metrics })
        })
        .collect()
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// `mean (std)` with three and two decimals.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{mean:.3} ({std:.2})")
}

/// One architecture's runs in one grid cell.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ArchRuns {
    pub reports: Vec<MetricReport>,
    pub expected: usize,
}

impl ArchRuns {
    pub fn complete(&self) -> bool {
        self.expected > 0 && self.reports.len() >= self.expected
    }

    pub fn stats(&self, key: &str) -> Option<(f64, f64)> {
        let values: Option<Vec<f64>> = self.reports.iter().map(|r| r.get(key)).collect();
        mean_std(&values?)
    }
}

/// A (layer size, vocabulary) row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Cell {
    pub layer_size: usize,
    pub vocab_size: usize,
    pub merge: ArchRuns,
    pub inject: ArchRuns,
}

impl Cell {
    fn arch(&self, arch: Architecture) -> &ArchRuns {
        match arch {
            Architecture::Merge => &self.merge,
            Architecture::Inject => &self.inject,
        }
    }
}

/// Cells keyed and ordered by (layer, vocabulary size).
pub fn build_grid(runs: &[RunSummary]) -> Vec<Cell> {
    let mut cells: BTreeMap<(usize, usize), Cell> = BTreeMap::new();
    for run in runs {
        let key = (run.info.layer_size, run.info.vocab_size);
        let cell = cells.entry(key).or_insert_with(|| Cell {
            layer_size: key.0,
            vocab_size: key.1,
            ..Cell::default()
        });
        let slot = match run.info.architecture {
            Architecture::Merge => &mut cell.merge,
            Architecture::Inject => &mut cell.inject,
        };
        slot.expected += run.info.seeds.len();
        slot.reports.extend(run.metrics.values().copied());
    }
    cells.into_values().collect()
}

#[derive(Clone, Debug, PartialEq)]
struct Rendered {
    text: String,
    bold: bool,
}

fn render_entry(cell: &Cell, arch: Architecture, key: &str) -> Rendered {
    let runs = cell.arch(arch);
    let Some((mean, std)) = runs.stats(key) else {
        let text = if key == "meteor" {
            ABSENT.to_owned()
        } else if runs.expected == 0 {
            MISSING.to_owned()
        } else {
            format!("incomplete (0/{})", runs.expected)
        };
        return Rendered { text, bold: false };
    };
    let mut text = format_mean_std(mean, std);
    if runs.reports.len() == 1 {
        text.push_str(SINGLE_RUN_MARK);
    }
    if !runs.complete() {
        text.push_str(&format!(" incomplete ({}/{})", runs.reports.len(), runs.expected));
    }
    let other = cell.arch(match arch {
        Architecture::Merge => Architecture::Inject,
        Architecture::Inject => Architecture::Merge,
    });
    let bold = other.stats(key).is_some_and(|(m, _)| mean > m);
    Rendered { text, bold }
}

const ARCH_ORDER: [Architecture; 2] = [Architecture::Merge, Architecture::Inject];

fn table_rows(cells: &[Cell], columns: &[(&str, &str)]) -> Vec<Vec<String>> {
    let mut header1 = vec![String::new(), String::new()];
    let mut header2 = vec!["Layer".to_owned(), "Vocab.".to_owned()];
    for (_, title) in columns {
        header1.extend([title.to_string(), String::new()]);
        header2.extend(ARCH_ORDER.iter().map(|a| capitalised(*a)));
    }
    let mut rows = vec![header1, header2];
    for cell in cells {
        let mut row = vec![cell.layer_size.to_string(), cell.vocab_size.to_string()];
        for (key, _) in columns {
            for arch in ARCH_ORDER {
                let r = render_entry(cell, arch, key);
                row.push(if r.bold { format!("*{}*", r.text) } else { r.text });
            }
        }
        rows.push(row);
    }
    rows
}

fn capitalised(arch: Architecture) -> String {
    let s = arch.as_str();
    s[..1].to_uppercase() + &s[1..]
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s}{}", " ".repeat(widths[c] - s.chars().count())))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Both tables as aligned plain text. Better means are wrapped in `*`.
pub fn render_text(cells: &[Cell]) -> String {
    let mut out = String::new();
    out.push_str("(a) % vocabulary used, CIDEr, METEOR and ROUGE-L\n");
    out.push_str(&align(&table_rows(cells, &MAIN_TABLE)));
    out.push_str("\n(b) BLEU-1 to BLEU-4\n");
    out.push_str(&align(&table_rows(cells, &BLEU_TABLE)));
    out.push_str("\nValues are mean (population std) over runs; *x* marks the better mean of a pair.\n");
    if cells
        .iter()
        .any(|c| c.merge.reports.len() == 1 || c.inject.reports.len() == 1)
    {
        out.push_str(&format!(
            "{SINGLE_RUN_MARK} single run: std is reported as 0.00 by convention.\n"
        ));
    }
    if cells.iter().any(|c| c.merge.expected == 0 || c.inject.expected == 0) {
        out.push_str(&format!("{MISSING}: no runs of that architecture in the cell.\n"));
    }
    out.push_str("METEOR is not computed.\n");
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// One row per (cell, metric, architecture).
pub fn render_csv(cells: &[Cell]) -> String {
    let mut out = String::from("table,layer,vocab,metric,arch,mean,std,runs,expected,complete,single_run,better\n");
    for (table, columns) in [("a", &MAIN_TABLE), ("b", &BLEU_TABLE)] {
        for cell in cells {
            for (key, title) in columns.iter() {
                for arch in ARCH_ORDER {
                    let runs = cell.arch(arch);
                    let (mean, std) = match runs.stats(key) {
                        Some((m, s)) => (format!("{m:.6}"), format!("{s:.6}")),
                        None => (String::new(), String::new()),
                    };
                    let r = render_entry(cell, arch, key);
                    let _ = writeln!(
                        out,
                        "{table},{},{},{},{arch},{mean},{std},{},{},{},{},{}",
                        cell.layer_size,
                        cell.vocab_size,
                        csv_field(title),
                        runs.reports.len(),
                        runs.expected,
                        runs.complete(),
                        runs.reports.len() == 1,
                        r.bold
                    );
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(cider: f64) -> MetricReport {
        MetricReport {
            bleu1: 0.6,
            bleu2: 0.4,
            bleu3: 0.27,
            bleu4: 0.18,
            rouge_l: 0.44,
            cider,
            vocab_usage_percent: 14.0,
        }
    }

    fn summary(arch: Architecture, seeds: &[u64], ciders: &[f64]) -> RunSummary {
        RunSummary {
            dir: PathBuf::new(),
            info: RunInfo {
                architecture: arch,
                layer_size: 256,
                min_freq: 3,
                vocab_size: 2539,
                precision: Precision::F32,
                seeds: seeds.to_vec(),
                dataset: "d".into(),
            },
            metrics: seeds.iter().zip(ciders).map(|(&s, &c)| (s, report(c))).collect(),
        }
    }

    #[test]
    fn population_mean_and_std() {
        let (m, s) = mean_std(&[0.45, 0.46, 0.47]).unwrap();
        assert!((m - 0.46).abs() < 1e-12);
        assert!((s - (0.0002f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(format_mean_std(m, s), "0.460 (0.01)");
        assert_eq!(mean_std(&[]), None);
    }

    #[test]
    fn cells_pair_architectures_and_bold_the_better() {
        let runs = [
            summary(Architecture::Merge, &[1, 2, 3], &[0.45, 0.46, 0.47]),
            summary(Architecture::Inject, &[1, 2, 3], &[0.44, 0.45, 0.46]),
        ];
        let cells = build_grid(&runs);
        assert_eq!(cells.len(), 1);
        let text = render_text(&cells);
        assert!(text.contains("*0.460 (0.01)*"), "{text}");
        assert!(text.contains(" 0.450 (0.01)"), "{text}");
        assert!(!text.contains(SINGLE_RUN_MARK));
        let csv = render_csv(&cells);
        assert!(
            csv.contains("a,256,2539,CIDEr,merge,0.460000,0.008165,3,3,true,false,true"),
            "{csv}"
        );
    }

    #[test]
    fn main_table_column_order() {
        let cells = build_grid(&[summary(Architecture::Merge, &[1], &[0.4])]);
        let text = render_text(&cells);
        let header = text.lines().nth(1).unwrap();
        let pos: Vec<usize> = ["%Vocab", "CIDEr", "METEOR", "ROUGE-L"]
            .iter()
            .map(|h| header.find(h).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{header}");
        assert!(!header.contains("BLEU"));
        assert!(text.contains("BLEU-1"));
    }

    #[test]
    fn single_and_missing_runs_are_flagged() {
        let runs = [
            summary(Architecture::Merge, &[1], &[0.4]),
            summary(Architecture::Inject, &[1, 2, 3], &[0.3, 0.31]),
        ];
        let cells = build_grid(&runs);
        let text = render_text(&cells);
        assert!(text.contains("0.400 (0.00)†"), "{text}");
        assert!(text.contains("incomplete (2/3)"), "{text}");
        assert!(text.contains("single run"));

        let empty = build_grid(&[summary(Architecture::Inject, &[7], &[])]);
        assert!(render_text(&empty).contains("incomplete (0/1)"));
    }

    #[test]
    fn run_info_round_trip() {
        let info = summary(Architecture::Inject, &[4, 5], &[]).info;
        let back = RunInfo::from_conf(&Conf::parse(&info.to_conf().to_string(), Path::new("x")).unwrap()).unwrap();
        assert_eq!(back, info);
    }
}
