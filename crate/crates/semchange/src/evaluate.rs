//! Scoring answer directories against gold directories.
//!
//! Both directories follow the answer layout: `task1/<dataset>.txt` with
//! binary labels and `task2/<dataset>.txt` with graded scores (gold) or
//! change distances (predictions). Every gold file needs a prediction file
//! of the same name.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use semchange_core::detect::Strategy;
use semchange_core::eval::{accuracy, spearman, GoldStandard};

use crate::error::{Error, Result};
use crate::formats::{read_graded, read_label_set, read_labels, read_ranking};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Task {
    Binary,
    Graded,
}

impl Task {
    pub fn dir(self) -> &'static str {
        match self {
            Task::Binary => "task1",
            Task::Graded => "task2",
        }
    }

    pub fn metric(self) -> &'static str {
        match self {
            Task::Binary => "accuracy",
            Task::Graded => "spearman",
        }
    }

    fn from_dir(s: &str) -> Option<Task> {
        [Task::Binary, Task::Graded].into_iter().find(|t| t.dir() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub task: Task,
    pub dataset: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub rows: Vec<MetricRow>,
}

impl MetricsReport {
    pub fn get(&self, task: Task, dataset: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.task == task && r.dataset == dataset)
            .map(|r| r.value)
    }

    /// Aligned table for people.
    pub fn table(&self) -> String {
        let header = ["task", "dataset", "metric", "value"];
        let rows: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.task.dir().into(),
                    r.dataset.clone(),
                    r.task.metric().into(),
                    format!("{:.4}", r.value),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &rows {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let mut line = |cells: [&str; 4]| {
            let [a, b, c, d] = cells;
            let [wa, wb, wc, wd] = widths;
            writeln!(out, "{a:<wa$}  {b:<wb$}  {c:<wc$}  {d:>wd$}").unwrap();
        };
        line(header);
        for r in &rows {
            line([&r[0], &r[1], &r[2], &r[3]]);
        }
        out
    }

    /// One `metric<TAB>task<TAB>dataset<TAB>name<TAB>value` line per row,
    /// values at full precision.
    pub fn machine_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            writeln!(
                out,
                "metric\t{}\t{}\t{}\t{}",
                r.task.dir(),
                r.dataset,
                r.task.metric(),
                r.value
            )
            .unwrap();
        }
        out
    }

    /// Table, blank line, machine-readable lines.
    pub fn render(&self) -> String {
        format!("{}\n{}", self.table(), self.machine_lines())
    }
}

/// Reads the machine-readable lines back, ignoring every other line.
pub fn parse_metrics(text: &str) -> Result<MetricsReport> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let Some(rest) = line.strip_prefix("metric\t") else {
            continue;
        };
        let bad = |m: &str| Error::parse("metrics", i + 1, m);
        let f: Vec<&str> = rest.split('\t').collect();
        let [task, dataset, metric, value] = f[..] else {
            return Err(bad("expected 5 tab-separated fields"));
        };
        let task = Task::from_dir(task).ok_or_else(|| bad("unknown task"))?;
        if metric != task.metric() {
            return Err(bad("metric does not match task"));
        }
        rows.push(MetricRow {
            task,
            dataset: dataset.to_string(),
            value: value.parse().map_err(|_| bad("bad value"))?,
        });
    }
    Ok(MetricsReport { rows })
}

fn datasets(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_file() && p.extension().is_some_and(|e| e == "txt") {
            let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
            out.push((stem, p));
        }
    }
    out.sort();
    Ok(out)
}

/// Accuracy for every gold `task1` file and Spearman for every gold `task2`
/// file, rows ordered by task then dataset.
pub fn evaluate(pred_dir: &Path, gold_dir: &Path) -> Result<MetricsReport> {
    let mut rows = Vec::new();
    for task in [Task::Binary, Task::Graded] {
        for (dataset, gold_path) in datasets(&gold_dir.join(task.dir()))? {
            let pred_path = pred_dir.join(task.dir()).join(format!("{dataset}.txt"));
            if !pred_path.is_file() {
                return Err(Error::Layout(format!(
                    "no prediction {} for gold {}",
                    pred_path.display(),
                    gold_path.display()
                )));
            }
            let value = match task {
                Task::Binary => {
                    let gold = GoldStandard {
                        binary: read_labels(&gold_path)?,
                        ..GoldStandard::default()
                    };
                    accuracy(&read_label_set(&pred_path, Strategy::Gmm)?, &gold)?
                }
                Task::Graded => {
                    let gold = GoldStandard {
                        graded: read_graded(&gold_path)?,
                        ..GoldStandard::default()
                    };
                    spearman(&read_ranking(&pred_path)?, &gold)?
                }
            };
            rows.push(MetricRow { task, dataset, value });
        }
    }
    if rows.is_empty() {
        return Err(Error::Layout(format!(
            "no gold files under {}/task1 or task2",
            gold_dir.display()
        )));
    }
    Ok(MetricsReport { rows })
}
