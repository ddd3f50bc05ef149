//! CSV ingestion and export.
//!
//! Input rows are `(user, item, rating, timestamp)` with a configurable
//! delimiter and column order. Rating and timestamp columns are optional:
//! a missing rating column defaults every rating to 1.0 and a missing
//! timestamp column numbers rows in input order, which preserves the
//! original sequence for the temporal operations.

use std::path::Path;
use std::sync::Arc;

use crate::data::{Dataset, IdMaps, Interaction};
use crate::error::{Error, Result};

/// Column layout of an interaction CSV file.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CsvSchema {
    pub delimiter: u8,
    pub has_header: bool,
    pub user_col: usize,
    pub item_col: usize,
    pub rating_col: Option<usize>,
    pub timestamp_col: Option<usize>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: true,
            user_col: 0,
            item_col: 1,
            rating_col: Some(2),
            timestamp_col: Some(3),
        }
    }
}

/// Load an interaction log. Duplicate `(user, item)` rows are all kept as
/// distinct interactions; row count is preserved.
pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(schema.has_header)
        .flexible(true)
        .from_path(path)?;

    let mut maps = IdMaps::default();
    let mut interactions = Vec::new();
    let header_offset = usize::from(schema.has_header);

    for (row_idx, record) in reader.records().enumerate() {
        let line = row_idx + header_offset + 1;
        let record = record.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        let field = |col: usize, name: &str| -> Result<&str> {
            record
                .get(col)
                .ok_or_else(|| Error::Parse { line, message: format!("missing {name} column {col}") })
        };

        let user = maps.users.get_or_insert(field(schema.user_col, "user")?);
        let item = maps.items.get_or_insert(field(schema.item_col, "item")?);
        let rating = match schema.rating_col {
            Some(col) => field(col, "rating")?.trim().parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("bad rating: {e}"),
            })?,
            None => 1.0,
        };
        let timestamp = match schema.timestamp_col {
            Some(col) => {
                let raw = field(col, "timestamp")?.trim();
                // ML-100k style files carry integer seconds; accept a float
                // form too and truncate.
                raw.parse::<i64>()
                    .or_else(|_| raw.parse::<f64>().map(|v| v as i64))
                    .map_err(|e| Error::Parse { line, message: format!("bad timestamp: {e}") })?
            }
            None => row_idx as i64,
        };
        if timestamp < 0 {
            return Err(Error::Parse { line, message: format!("negative timestamp {timestamp}") });
        }
        interactions.push(Interaction { user, item, rating, timestamp });
    }

    if interactions.is_empty() {
        return Err(Error::EmptyDataset(format!("{} has no data rows", path.display())));
    }

    let num_users = maps.users.len() as u32;
    let num_items = maps.items.len() as u32;
    Dataset::from_parts(interactions, num_users, num_items, Arc::new(maps))
}

/// Write a dataset back out with raw labels, `user,item,rating,timestamp`.
/// Re-ingesting the file yields an identical interaction multiset.
pub fn export_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["user", "item", "rating", "timestamp"])?;
    let maps = dataset.id_maps();
    for it in dataset.interactions() {
        writer.write_record([
            maps.users.label(it.user).unwrap_or_default(),
            maps.items.label(it.item).unwrap_or_default(),
            &format_rating(it.rating),
            &it.timestamp.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Write the dense-index to raw-label map of each entity as a two-column CSV.
pub fn export_id_maps(dataset: &Dataset, users_path: &Path, items_path: &Path) -> Result<()> {
    let maps = dataset.id_maps();
    for (path, map, header) in
        [(users_path, &maps.users, "user"), (items_path, &maps.items, "item")]
    {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["index", header])?;
        for idx in 0..map.len() as u32 {
            writer.write_record([&idx.to_string(), map.label(idx).unwrap_or_default()])?;
        }
        writer.flush()?;
    }
    Ok(())
}

fn format_rating(r: f64) -> String {
    if r.fract() == 0.0 && r.abs() < 1e15 {
        format!("{}", r as i64)
    } else {
        format!("{r}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn ingest_dense_ids_and_row_count() {
        let f = write_tmp("user,item,rating,timestamp\na,x,5,10\nb,y,3,20\na,x,4,30\n");
        let d = ingest_csv(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.num_users(), 2);
        assert_eq!(d.num_items(), 2);
        // duplicate (a, x) kept as two interactions
        assert_eq!(d.user_history(0).len(), 2);
    }

    #[test]
    fn ingest_defaults_for_missing_columns() {
        let f = write_tmp("a,x\nb,y\n");
        let schema = CsvSchema {
            has_header: false,
            rating_col: None,
            timestamp_col: None,
            ..CsvSchema::default()
        };
        let d = ingest_csv(f.path(), &schema).unwrap();
        assert_eq!(d.interaction(0).rating, 1.0);
        assert_eq!(d.interaction(0).timestamp, 0);
        assert_eq!(d.interaction(1).timestamp, 1);
    }

    #[test]
    fn ingest_reports_line_of_malformed_row() {
        let f = write_tmp("user,item,rating,timestamp\na,x,5,10\nb,y,oops,20\n");
        let err = ingest_csv(f.path(), &CsvSchema::default()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn ingest_empty_file_is_an_error() {
        let f = write_tmp("user,item,rating,timestamp\n");
        assert!(matches!(
            ingest_csv(f.path(), &CsvSchema::default()),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn export_round_trips_interaction_multiset() {
        let f = write_tmp("user,item,rating,timestamp\na,x,5,10\nb,y,3.5,20\na,x,5,10\n");
        let d = ingest_csv(f.path(), &CsvSchema::default()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        export_csv(&d, out.path()).unwrap();
        let d2 = ingest_csv(out.path(), &CsvSchema::default()).unwrap();
        let key = |ds: &Dataset| {
            let maps = ds.id_maps();
            let mut rows: Vec<(String, String, String, i64)> = ds
                .interactions()
                .iter()
                .map(|it| {
                    (
                        maps.users.label(it.user).unwrap().to_owned(),
                        maps.items.label(it.item).unwrap().to_owned(),
                        format!("{}", it.rating),
                        it.timestamp,
                    )
                })
                .collect();
            rows.sort();
            rows
        };
        assert_eq!(key(&d), key(&d2));
    }
}
