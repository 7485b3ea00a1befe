//! Static artifacts: SVG relevance charts and attention maps, text tables.
//! Every renderer is a pure function of its input.

mod svg;
mod tables;

use std::path::{Path, PathBuf};

pub use svg::{render_attention_map, render_relevance_chart, HEAD_COLORS};
pub use tables::{format_cell, render_results_table, render_stats_table, ResultsGrid};

/// `root/reports/{dataset}/{model}`.
pub fn report_dir(root: &Path, dataset: &str, model: &str) -> PathBuf {
    root.join("reports").join(dataset).join(model)
}
