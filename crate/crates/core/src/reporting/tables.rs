use serde::{Deserialize, Serialize};

use crate::evaluation::EvalResult;
use crate::eventlog::{Label, LogStats};

/// AUROC as a percentage with one decimal; a perfect score prints as `100.`.
pub fn format_cell(train: f64, test: f64) -> String {
    let f = |v: f64| {
        let s = format!("{:.1}", v * 100.0);
        if s == "100.0" {
            "100.".to_owned()
        } else {
            s
        }
    };
    format!("{}({})", f(train), f(test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub dataset: String,
    pub encoding: String,
    /// `train(test)` per model column, `None` when not evaluated.
    pub cells: Vec<Option<String>>,
}

/// Rows are dataset × encoding, columns are models, both in order of first
/// appearance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsGrid {
    pub models: Vec<String>,
    pub rows: Vec<GridRow>,
}

impl ResultsGrid {
    pub fn build(results: &[EvalResult]) -> Self {
        let mut models: Vec<String> = Vec::new();
        for r in results {
            if !models.contains(&r.model) {
                models.push(r.model.clone());
            }
        }
        let mut rows: Vec<GridRow> = Vec::new();
        for r in results {
            let idx = match rows
                .iter()
                .position(|g| g.dataset == r.dataset && g.encoding == r.encoding)
            {
                Some(i) => i,
                None => {
                    rows.push(GridRow {
                        dataset: r.dataset.clone(),
                        encoding: r.encoding.clone(),
                        cells: vec![None; models.len()],
                    });
                    rows.len() - 1
                }
            };
            let col = models
                .iter()
                .position(|m| *m == r.model)
                .expect("model collected");
            rows[idx].cells[col] = Some(format_cell(r.train_auroc, r.test_auroc));
        }
        ResultsGrid { models, rows }
    }

    pub fn to_text(&self) -> String {
        let mut table: Vec<Vec<String>> = Vec::with_capacity(self.rows.len() + 1);
        let mut header = vec!["dataset".to_owned(), "encoding".to_owned()];
        header.extend(self.models.iter().cloned());
        table.push(header);
        for r in &self.rows {
            let mut line = vec![r.dataset.clone(), r.encoding.clone()];
            line.extend(
                r.cells
                    .iter()
                    .map(|c| c.clone().unwrap_or_else(|| "-".to_owned())),
            );
            table.push(line);
        }
        align(&table)
    }
}

fn align(table: &[Vec<String>]) -> String {
    let cols = table.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            table
                .iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in table {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s:<w$}", w = widths[c]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

pub fn render_results_table(results: &[EvalResult]) -> String {
    ResultsGrid::build(results).to_text()
}

/// Per-class trace counts and duplicate concentration for several logs.
pub fn render_stats_table(logs: &[(String, LogStats)]) -> String {
    let mut table = vec![["dataset", "class", "traces", "unique", "unique %", "top-10 %"]
        .map(str::to_owned)
        .to_vec()];
    for (name, stats) in logs {
        for label in Label::BOTH {
            let c = stats.class(label);
            table.push(vec![
                name.clone(),
                label.to_string(),
                c.trace_count.to_string(),
                c.unique_count.to_string(),
                format!("{:.1}", c.unique_pct),
                format!("{:.1}", c.top10_pct),
            ]);
        }
    }
    align(&table)
}
