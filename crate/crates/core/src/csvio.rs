//! Shared CSV plumbing for the table formats used across the crate:
//! optional `# key=value` metadata comment lines, one header row, then
//! comma-separated data rows.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("i/o error reading table: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing header row")]
    MissingHeader,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("expected header `{expected}`, found `{found}`")]
    HeaderMismatch { expected: String, found: String },
    #[error("row {row}: missing column {column}")]
    MissingColumn { row: usize, column: usize },
}

#[derive(Debug, Clone, Default)]
pub struct CsvTable {
    pub metadata: BTreeMap<String, String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Parse a table: leading `# key=value` comments become metadata, the first
/// non-comment line is the header, everything after is data. Blank lines are
/// skipped.
pub fn read_table<R: Read>(reader: R) -> Result<CsvTable, CsvError> {
    let mut table = CsvTable::default();
    let mut saw_header = false;
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let comment = comment.trim();
            if let Some((key, value)) = comment.split_once('=') {
                table.metadata.insert(key.trim().to_string(), value.trim().to_string());
            }
            continue;
        }
        let fields: Vec<String> = trimmed.split(',').map(|f| f.trim().to_string()).collect();
        if !saw_header {
            table.header = fields;
            saw_header = true;
        } else {
            if fields.len() < table.header.len() && fields.iter().all(|f| f.is_empty()) {
                continue;
            }
            if fields.len() > table.header.len() {
                return Err(CsvError::Parse {
                    line: idx + 1,
                    message: format!(
                        "row has {} fields but the header declares {}",
                        fields.len(),
                        table.header.len()
                    ),
                });
            }
            table.rows.push(fields);
        }
    }
    if !saw_header {
        return Err(CsvError::MissingHeader);
    }
    Ok(table)
}

pub fn expect_header(table: &CsvTable, expected: &[&str]) -> Result<(), CsvError> {
    let found: Vec<&str> = table.header.iter().map(String::as_str).collect();
    if found != expected {
        return Err(CsvError::HeaderMismatch {
            expected: expected.join(","),
            found: found.join(","),
        });
    }
    Ok(())
}

pub fn parse_field(row: &[String], column: usize, row_idx: usize) -> Result<f64, CsvError> {
    let field = row.get(column).ok_or(CsvError::MissingColumn {
        row: row_idx + 1,
        column: column + 1,
    })?;
    field.parse::<f64>().map_err(|e| CsvError::Parse {
        line: row_idx + 1,
        message: format!("column {}: `{}`: {}", column + 1, field, e),
    })
}

/// Write `# key=value` metadata lines in sorted key order.
pub fn write_metadata<W: std::io::Write>(
    writer: &mut W,
    metadata: &BTreeMap<String, String>,
) -> std::io::Result<()> {
    for (key, value) in metadata {
        writeln!(writer, "# {key}={value}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_metadata_header_and_rows() {
        let text = "# geom=L8D6\n# power_w=4.8\ntime_s,force_N\n0.0,0.1\n0.001,0.2\n";
        let table = read_table(text.as_bytes()).unwrap();
        assert_eq!(table.metadata["geom"], "L8D6");
        assert_eq!(table.metadata["power_w"], "4.8");
        assert_eq!(table.header, vec!["time_s", "force_N"]);
        assert_eq!(table.rows.len(), 2);
        assert_eq!(parse_field(&table.rows[1], 1, 1).unwrap(), 0.2);
    }

    #[test]
    fn rejects_missing_header_and_bad_rows() {
        assert!(matches!(read_table("".as_bytes()), Err(CsvError::MissingHeader)));
        assert!(matches!(read_table("# only=comments\n".as_bytes()), Err(CsvError::MissingHeader)));
        let wide = "a,b\n1,2,3\n";
        assert!(matches!(read_table(wide.as_bytes()), Err(CsvError::Parse { .. })));
    }

    #[test]
    fn parse_field_reports_position() {
        let text = "a,b\n1,notanumber\n";
        let table = read_table(text.as_bytes()).unwrap();
        let err = parse_field(&table.rows[0], 1, 0).unwrap_err();
        assert!(err.to_string().contains("notanumber"));
    }
}
