use serde::{Deserialize, Serialize};

use crate::zmatrix::ZMatrix;

/// When the "< suppress_below" rule is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suppression {
    /// Compare the scaled value before rounding (0.7 is blanked).
    PreRounding,
    /// Compare the rounded integer (0.7 prints as 1, 0.4 is blanked).
    #[default]
    PostRounding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableOptions {
    pub transpose: bool,
    pub scale: f64,
    pub suppress_below: f64,
    pub suppression: Suppression,
    /// Covariate used for row/column labels; unit ids when absent.
    pub label_covariate: Option<String>,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self {
            transpose: true,
            scale: 1_000.0,
            suppress_below: 1.0,
            suppression: Suppression::PostRounding,
            label_covariate: None,
        }
    }
}

/// Integer with "," thousands separators.
pub fn group_thousands(value: i64) -> String {
    let digits = value.unsigned_abs().to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3 + 1);
    if value < 0 {
        out.push('-');
    }
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// Printed form of one matrix value; `None` when suppressed.
pub fn format_cell(value: f64, opts: &TableOptions) -> Option<String> {
    let scaled = value * opts.scale;
    let rounded = scaled.round_ties_even();
    let shown = match opts.suppression {
        Suppression::PreRounding => scaled >= opts.suppress_below,
        Suppression::PostRounding => rounded >= opts.suppress_below,
    };
    shown.then(|| group_thousands(rounded as i64))
}

pub(crate) fn format_label(value: f64) -> String {
    if value.fract() == 0.0 && value.abs() < 1e15 {
        format!("{}", value as i64)
    } else {
        format!("{value}")
    }
}

/// Labels for each unit in the matrix order.
pub fn unit_labels(z: &ZMatrix, covariate: Option<&str>) -> Vec<String> {
    match covariate {
        Some(name) => z
            .covariates
            .iter()
            .zip(&z.order)
            .map(|(c, id)| c.get(name).map_or_else(|| id.clone(), |v| format_label(*v)))
            .collect(),
        None => z.order.clone(),
    }
}

/// Cell grid as printed: `grid[r][c]` is displayed row r, column c.
pub fn table_cells(z: &ZMatrix, opts: &TableOptions) -> Vec<Vec<Option<String>>> {
    let n = z.n();
    (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    let value = if opts.transpose {
                        z.get(c, r)
                    } else {
                        z.get(r, c)
                    };
                    format_cell(value, opts)
                })
                .collect()
        })
        .collect()
}

/// Fixed-width text table: a header row of column labels, then one line per
/// unit with its label first. Blank cells are spaces. LF line endings.
pub fn table_text(z: &ZMatrix, opts: &TableOptions) -> String {
    let labels = unit_labels(z, opts.label_covariate.as_deref());
    let cells = table_cells(z, opts);
    let header = opts
        .label_covariate
        .clone()
        .unwrap_or_else(|| "unit".to_string());
    let label_width = labels
        .iter()
        .map(String::len)
        .chain([header.len()])
        .max()
        .unwrap_or(0);
    let cell_width = cells
        .iter()
        .flatten()
        .flatten()
        .map(String::len)
        .chain(labels.iter().map(String::len))
        .max()
        .unwrap_or(1);

    let mut out = String::new();
    out.push_str(&format!("{header:<label_width$}"));
    for label in &labels {
        out.push_str(&format!(" {label:>cell_width$}"));
    }
    out.push('\n');
    for (label, row) in labels.iter().zip(&cells) {
        let mut line = format!("{label:<label_width$}");
        for cell in row {
            let text = cell.as_deref().unwrap_or("");
            line.push_str(&format!(" {text:>cell_width$}"));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}
