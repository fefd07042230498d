//! Text tables, SVG charts and CSV dumps of z-matrices.

mod svg;
mod table;

pub use svg::{cdf_density_svg, lineup_svg, scatter_svg, symbols_svg, SvgDoc};
pub(crate) use table::format_label;
pub use table::{
    format_cell, group_thousands, table_cells, table_text, unit_labels, Suppression, TableOptions,
};

use crate::error::Result;
use crate::zmatrix::ZMatrix;

/// Full-precision, unsuppressed n x n CSV with unit ids as header and first
/// column. Values use the shortest round-trip representation.
pub fn matrix_csv(z: &ZMatrix) -> Result<String> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["unit_id".to_string()];
    header.extend(z.order.iter().cloned());
    writer.write_record(&header)?;
    for (i, id) in z.order.iter().enumerate() {
        let mut record = vec![id.clone()];
        record.extend(z.row(i).iter().map(|v| format!("{v:?}")));
        writer.write_record(&record)?;
    }
    let bytes = writer.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Parses [`matrix_csv`] output back into ids and a row-major matrix.
pub fn parse_matrix_csv(text: &str) -> Result<(Vec<String>, Vec<f64>)> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let ids: Vec<String> = reader
        .headers()?
        .iter()
        .skip(1)
        .map(str::to_string)
        .collect();
    let mut entries = Vec::with_capacity(ids.len() * ids.len());
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        for field in record.iter().skip(1) {
            entries.push(
                field
                    .parse::<f64>()
                    .map_err(|e| crate::error::Error::Input {
                        line: line + 2,
                        message: e.to_string(),
                    })?,
            );
        }
    }
    Ok((ids, entries))
}
