use std::path::Path;

use super::hashing::{hash_feature, MISSING_TOKEN};
use super::schema::{FeatureSchema, Party, Sample};
use crate::{Error, Result};

/// Raw string cells with a header, as read from or written to CSV.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// 1-based source line of each row (header is line 1).
    pub lines: Vec<u64>,
}

impl RawTable {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
            lines: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.lines.push(self.rows.len() as u64 + 2);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
        let mut table = RawTable::new(header);
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            table.rows.push(record.iter().map(str::to_owned).collect());
            table.lines.push(line);
        }
        Ok(table)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(&self.header)?;
        for row in &self.rows {
            writer.write_record(row)?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Hash every row into a [`Sample`] under `schema`; columns not named by
    /// the schema are ignored.
    pub fn to_samples(&self, schema: &FeatureSchema, origin: &Path) -> Result<Vec<Sample>> {
        if self.header.is_empty() && self.rows.is_empty() {
            return Ok(Vec::new());
        }
        let require = |name: &str| {
            self.column(name)
                .ok_or_else(|| Error::Schema(format!("{}: missing column `{name}`", origin.display())))
        };
        let key_col = require(&schema.key_column)?;
        let slot_cols = schema
            .slots
            .iter()
            .map(|s| require(&s.name))
            .collect::<Result<Vec<_>>>()?;
        let label_col = match (schema.party, &schema.label_column) {
            (Party::Host, Some(l)) => Some(require(l)?),
            _ => None,
        };
        let time_col = schema.time_column.as_deref().map(require).transpose()?;

        let mut out = Vec::with_capacity(self.rows.len());
        for (row, &line) in self.rows.iter().zip(&self.lines) {
            let cell = |c: usize| row.get(c).map(String::as_str).unwrap_or("");
            let row_error = |message: String| Error::Row {
                path: origin.to_path_buf(),
                line,
                message,
            };
            let indices = schema
                .slots
                .iter()
                .zip(&slot_cols)
                .map(|(s, &c)| {
                    let raw = cell(c);
                    let raw = if raw.is_empty() { MISSING_TOKEN } else { raw };
                    hash_feature(&s.name, raw, s.vocab_size)
                })
                .collect();
            let label = label_col
                .map(|c| match cell(c).trim() {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(row_error(format!("unparsable label `{other}`"))),
                })
                .transpose()?;
            let key = cell(key_col);
            if key.is_empty() {
                return Err(row_error("empty key".into()));
            }
            let sample = Sample::new(schema, key, indices, label)
                .map_err(|e| row_error(e.to_string()))?
                .with_time(time_col.map(|c| cell(c).to_owned()));
            out.push(sample);
        }
        Ok(out)
    }
}

/// Read one party's CSV file into hashed samples.
pub fn load_csv(path: &Path, schema: &FeatureSchema) -> Result<Vec<Sample>> {
    RawTable::read_csv(path)?.to_samples(schema, path)
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn host_schema() -> FeatureSchema {
        FeatureSchema::uniform(Party::Host, &["a".into(), "b".into()], 50, "key", Some("click")).unwrap()
    }

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn host_rows_carry_labels() {
        let f = write("key,click,a,b\nk1,1,x,y\nk2,0,x,z\nk3,1,w,y\n");
        let s = load_csv(f.path(), &host_schema()).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|x| x.label().is_some()));
        assert_eq!(s[0].slot_indices()[0], hash_feature("a", "x", 50));
    }

    #[test]
    fn guest_schema_ignores_label_column() {
        let f = write("key,click,g\nk1,1,x\n");
        let g = FeatureSchema::uniform(Party::Guest, &["g".into()], 10, "key", None).unwrap();
        let s = load_csv(f.path(), &g).unwrap();
        assert_eq!(s[0].label(), None);
    }

    #[test]
    fn empty_cell_hashes_as_missing_token() {
        let f = write("key,click,a,b\nk1,0,,y\n");
        let s = load_csv(f.path(), &host_schema()).unwrap();
        assert_eq!(s[0].slot_indices()[0], hash_feature("a", MISSING_TOKEN, 50));
    }

    #[test]
    fn missing_column_is_named() {
        let f = write("key,click,a\nk1,0,x\n");
        let err = load_csv(f.path(), &host_schema()).unwrap_err();
        assert!(matches!(&err, Error::Schema(m) if m.contains("`b`")), "{err}");
    }

    #[test]
    fn bad_label_reports_line() {
        let f = write("key,click,a,b\nk1,0,x,y\nk2,yes,x,y\n");
        match load_csv(f.path(), &host_schema()) {
            Err(Error::Row { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_empty_sequence() {
        let f = write("");
        assert!(load_csv(f.path(), &host_schema()).unwrap().is_empty());
    }
}
