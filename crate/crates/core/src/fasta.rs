//! Minimal FASTA reading and writing.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub header: String,
    pub sequence: String,
}

/// Parses `>`-header records. Sequence lines are concatenated with
/// whitespace removed; blank lines are ignored.
pub fn parse(text: &str) -> Result<Vec<Record>> {
    let mut records: Vec<Record> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            records.push(Record {
                header: header.trim().to_string(),
                sequence: String::new(),
            });
        } else {
            let rec = records.last_mut().ok_or_else(|| Error::ParseError {
                location: format!("line {}", lineno + 1),
                message: "sequence data before the first '>' header".into(),
            })?;
            rec.sequence.extend(line.chars().filter(|c| !c.is_whitespace()));
        }
    }
    Ok(records)
}

pub fn read(path: impl AsRef<Path>) -> Result<Vec<Record>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text)
}

/// One record per entry, sequence on a single line.
pub fn write(records: &[Record]) -> String {
    let mut out = String::new();
    for r in records {
        out.push('>');
        out.push_str(&r.header);
        out.push('\n');
        out.push_str(&r.sequence);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_line_records() {
        let recs = parse(">one desc\nACGT\nAC\n\n>two\nGG\n").unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].header, "one desc");
        assert_eq!(recs[0].sequence, "ACGTAC");
        assert_eq!(recs[1].sequence, "GG");
        assert_eq!(parse(&write(&recs)).unwrap(), recs);
    }

    #[test]
    fn data_before_header() {
        assert!(matches!(parse("ACGT\n>x\nA\n"), Err(Error::ParseError { .. })));
    }
}
