use std::fmt::Write;

use crate::attnmodel::AttentionTensor;
use crate::error::{Error, Result};
use crate::relevance::RelevanceReport;

pub const HEAD_COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

const POSITIVE: &str = "#2b6cb0";
const NEGATIVE: &str = "#c53030";

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Horizontal bar chart of the `top_k` features by magnitude. Lasso
/// coefficients are drawn around a centred zero axis; other methods from
/// the left edge.
pub fn render_relevance_chart(report: &RelevanceReport, top_k: usize) -> Result<String> {
    if top_k == 0 {
        return Err(Error::InvalidParameter("top_k must be at least 1".into()));
    }
    if report.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot chart an empty relevance report".into(),
        ));
    }
    let shown: Vec<_> = report.ranked().into_iter().take(top_k).collect();
    let signed = report.method.is_signed();
    let (label_w, plot_w, bar_h, gap, top) = (220.0, 400.0, 18.0, 6.0, 40.0);
    let width = label_w + plot_w + 80.0;
    let height = top + shown.len() as f64 * (bar_h + gap) + 20.0;
    let max = shown.iter().map(|s| s.score.abs()).fold(0.0, f64::max);
    let unit = if max > 0.0 { max } else { 1.0 };
    let (zero_x, span) = if signed {
        (label_w + plot_w / 2.0, plot_w / 2.0)
    } else {
        (label_w, plot_w)
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" font-size="14" text-anchor="middle">{}</text>"#,
        width / 2.0,
        report.method.as_str()
    );
    for (i, f) in shown.iter().enumerate() {
        let y = top + i as f64 * (bar_h + gap);
        let len = f.score.abs() / unit * span;
        let x = if signed && f.score < 0.0 {
            zero_x - len
        } else {
            zero_x
        };
        let color = if signed && f.score < 0.0 {
            NEGATIVE
        } else {
            POSITIVE
        };
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            label_w - 8.0,
            y + bar_h * 0.75,
            escape(&f.name)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{len:.2}" height="{bar_h:.2}" fill="{color}"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{:.4}</text>"#,
            label_w + plot_w + 6.0,
            y + bar_h * 0.75,
            f.score
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{zero_x:.2}" y1="{:.2}" x2="{zero_x:.2}" y2="{:.2}" stroke="black"/>"#,
        top - 4.0,
        height - 16.0
    );
    s.push_str("</svg>\n");
    Ok(s)
}

/// Connection diagram between query tokens (left) and key tokens (right).
/// Each head has its own colour; line width and opacity scale with the
/// weight. Pad positions and zero weights are not drawn.
pub fn render_attention_map(tensor: &AttentionTensor, tokens: &[String]) -> Result<String> {
    if tokens.len() != tensor.len() {
        return Err(Error::DimensionMismatch {
            expected: tensor.len(),
            actual: tokens.len(),
        });
    }
    let real: Vec<usize> = (0..tensor.len()).filter(|&i| tensor.mask[i]).collect();
    let (left_x, right_x, row_h, top) = (160.0, 440.0, 24.0, 50.0);
    let width = 600.0;
    let height = top + real.len() as f64 * row_h + 20.0;
    let y_of = |k: usize| top + k as f64 * row_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    for h in 0..tensor.n_heads() {
        let color = HEAD_COLORS[h % HEAD_COLORS.len()];
        let _ = writeln!(
            s,
            r#"<rect x="{:.1}" y="10" width="12" height="12" fill="{color}"/><text x="{:.1}" y="21">head {}</text>"#,
            20.0 + h as f64 * 90.0,
            36.0 + h as f64 * 90.0,
            h + 1
        );
    }
    for (k, &i) in real.iter().enumerate() {
        let name = escape(&tokens[i]);
        let y = y_of(k) + 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{y:.1}" text-anchor="end">{name}</text>"#,
            left_x - 8.0
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{y:.1}">{name}</text>"#, right_x + 8.0);
    }
    for (h, head) in tensor.scores.iter().enumerate() {
        let color = HEAD_COLORS[h % HEAD_COLORS.len()];
        let _ = writeln!(s, r#"<g stroke="{color}" stroke-linecap="round">"#);
        for (qk, &i) in real.iter().enumerate() {
            for (kk, &j) in real.iter().enumerate() {
                let a = head[i][j];
                if a <= 0.0 {
                    continue;
                }
                let _ = writeln!(
                    s,
                    r#"<line x1="{left_x:.1}" y1="{:.1}" x2="{right_x:.1}" y2="{:.1}" stroke-width="{:.3}" stroke-opacity="{:.3}"/>"#,
                    y_of(qk),
                    y_of(kk),
                    0.5 + 3.5 * a,
                    0.15 + 0.85 * a
                );
            }
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    Ok(s)
}
