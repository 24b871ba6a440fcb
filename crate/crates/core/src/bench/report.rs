//! Report assembly and artifact writers shared by every experiment runner.
//!
//! Each run produces two files in its output directory: `cells.csv` with one
//! row per (cell, task) aggregate, and `summary.json` carrying the same
//! numbers plus per-trial scores, the plan's config hash, the seed, and
//! pairwise significance annotations against a reference cell.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::stats::welch_t_test;
use crate::Result;

pub const CSV_HEADER: &str = "cell,task,trials,rubric_mean,following_rate,success_rate";

/// Aggregate metrics for one (cell, task) pair. `task` is a task name or
/// `"all"` for the across-task aggregate; `scores` carries the per-trial
/// rubric fractions behind `rubric_mean` so significance tests can rerun
/// from the summary alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub cell: String,
    pub task: String,
    pub trials: usize,
    pub rubric_mean: f64,
    pub following_rate: Option<f64>,
    pub success_rate: Option<f64>,
    pub scores: Vec<f64>,
}

/// Welch t-test of one cell against the report's reference cell, computed
/// on the `"all"` rows. Non-finite statistics (zero-variance separations)
/// are stored as `None`; the p-value and flag always carry the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub cell: String,
    pub reference: String,
    pub t: Option<f64>,
    pub df: Option<f64>,
    pub p: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub kind: String,
    pub seed: u64,
    pub config_hash: String,
    pub notes: Vec<String>,
    pub cells: Vec<CellMetrics>,
    pub significance: Vec<Significance>,
}

impl BenchReport {
    pub fn new(kind: &str, seed: u64, config_hash: &str) -> Self {
        BenchReport {
            kind: kind.to_string(),
            seed,
            config_hash: config_hash.to_string(),
            notes: Vec::new(),
            cells: Vec::new(),
            significance: Vec::new(),
        }
    }

    pub fn add_cell(&mut self, cell: CellMetrics) {
        self.cells.push(cell);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn cell(&self, cell: &str, task: &str) -> Option<&CellMetrics> {
        self.cells.iter().find(|c| c.cell == cell && c.task == task)
    }

    /// Across-task rubric mean of a cell (its `"all"` row).
    pub fn rubric_mean(&self, cell: &str) -> Option<f64> {
        self.cell(cell, "all").map(|c| c.rubric_mean)
    }

    /// Annotate every other cell's `"all"` row against `reference`'s.
    pub fn annotate_significance(&mut self, reference: &str) {
        let Some(ref_scores) = self.cell(reference, "all").map(|c| c.scores.clone()) else {
            return;
        };
        let pairs: Vec<(String, Vec<f64>)> = self
            .cells
            .iter()
            .filter(|c| c.task == "all" && c.cell != reference)
            .map(|c| (c.cell.clone(), c.scores.clone()))
            .collect();
        for (cell, scores) in pairs {
            let r = welch_t_test(&scores, &ref_scores);
            self.significance.push(Significance {
                cell,
                reference: reference.to_string(),
                t: r.t.is_finite().then_some(r.t),
                df: r.df.is_finite().then_some(r.df),
                p: r.p,
                significant: r.significant,
            });
        }
    }

    fn csv_string(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let opt = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.cell,
                c.task,
                c.trials,
                c.rubric_mean,
                opt(&c.following_rate),
                opt(&c.success_rate)
            ));
        }
        out
    }

    /// Write `cells.csv` and `summary.json` into `dir` (created if needed).
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut csv = std::fs::File::create(dir.join("cells.csv"))?;
        csv.write_all(self.csv_string().as_bytes())?;
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join("summary.json"), json)?;
        Ok(())
    }

    pub fn read_summary(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn cell(name: &str, task: &str, scores: &[f64]) -> CellMetrics {
        CellMetrics {
            cell: name.to_string(),
            task: task.to_string(),
            trials: scores.len(),
            rubric_mean: if scores.is_empty() {
                0.0
            } else {
                scores.iter().sum::<f64>() / scores.len() as f64
            },
            following_rate: None,
            success_rate: Some(0.0),
            scores: scores.to_vec(),
        }
    }

    #[test]
    fn csv_rows_follow_the_schema_with_blank_optionals() {
        let mut r = BenchReport::new("env_scaling", 7, "deadbeefdeadbeef");
        let mut c = cell("envs_01", "dishes", &[0.5, 0.75]);
        c.following_rate = Some(0.25);
        r.add_cell(c);
        r.add_cell(cell("envs_01", "all", &[0.5, 0.75]));
        let csv = r.csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "envs_01,dishes,2,0.625,0.25,0");
        assert_eq!(lines[2], "envs_01,all,2,0.625,,0");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn empty_report_still_writes_both_artifacts() {
        let dir = tempdir().unwrap();
        let r = BenchReport::new("language_following", 0, "0000000000000000");
        r.write(dir.path()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("cells.csv")).unwrap();
        assert_eq!(csv, format!("{CSV_HEADER}\n"));
        let back = BenchReport::read_summary(&dir.path().join("summary.json")).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn identical_cells_annotate_as_not_significant_with_p_one() {
        let mut r = BenchReport::new("hl_ablation", 1, "x");
        r.add_cell(cell("model", "all", &[0.7; 10]));
        r.add_cell(cell("oracle", "all", &[0.7; 10]));
        r.annotate_significance("model");
        assert_eq!(r.significance.len(), 1);
        let s = &r.significance[0];
        assert_eq!(s.cell, "oracle");
        assert_eq!(s.p, 1.0);
        assert!(!s.significant);
    }

    #[test]
    fn maximal_separation_is_flagged_and_survives_the_json_round_trip() {
        let mut r = BenchReport::new("mixture_ablation", 1, "x");
        r.add_cell(cell("full", "all", &[1.0; 10]));
        r.add_cell(cell("no_wd", "all", &[0.0; 10]));
        r.annotate_significance("full");
        let s = &r.significance[0];
        assert!(s.significant);
        assert_eq!(s.p, 0.0);
        // Zero-variance separation has no finite t; it must still serialize.
        assert_eq!(s.t, None);
        let dir = tempdir().unwrap();
        r.write(dir.path()).unwrap();
        let back = BenchReport::read_summary(&dir.path().join("summary.json")).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn summary_embeds_hash_seed_and_scores() {
        let dir = tempdir().unwrap();
        let mut r = BenchReport::new("env_scaling", 99, "cafebabecafebabe");
        r.add_cell(cell("envs_02", "all", &[0.25, 0.5]));
        r.note("controls skipped");
        r.write(dir.path()).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
                .unwrap();
        assert_eq!(v["seed"], 99);
        assert_eq!(v["config_hash"], "cafebabecafebabe");
        assert_eq!(v["cells"][0]["scores"][1], 0.5);
        assert_eq!(v["notes"][0], "controls skipped");
    }

    #[test]
    fn lookup_helpers_find_cells_by_name_and_task() {
        let mut r = BenchReport::new("env_scaling", 0, "h");
        r.add_cell(cell("envs_04", "bed", &[0.5]));
        r.add_cell(cell("envs_04", "all", &[0.75]));
        assert_eq!(r.rubric_mean("envs_04"), Some(0.75));
        assert_eq!(r.cell("envs_04", "bed").unwrap().trials, 1);
        assert!(r.cell("envs_08", "all").is_none());
    }
}
