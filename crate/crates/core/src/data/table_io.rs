// SPDX-License-Identifier: Apache-2.0

//! Line-oriented storage for normalized tables: one JSON header line followed
//! by one JSON object per sample.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{DataError, DatasetId, DatasetTable, Sample};

const TABLE_FORMAT: &str = "mebench-table";
const TABLE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    dataset_id: DatasetId,
    n_samples: usize,
}

pub fn write_table(table: &DatasetTable, mut out: impl Write) -> Result<(), DataError> {
    let header = Header {
        format: TABLE_FORMAT.into(),
        version: TABLE_VERSION,
        dataset_id: table.dataset_id().clone(),
        n_samples: table.len(),
    };
    let io = |e: std::io::Error| DataError::Io(e.to_string());
    serde_json::to_writer(&mut out, &header).map_err(|e| DataError::Io(e.to_string()))?;
    out.write_all(b"\n").map_err(io)?;
    for s in table.samples() {
        serde_json::to_writer(&mut out, s).map_err(|e| DataError::Io(e.to_string()))?;
        out.write_all(b"\n").map_err(io)?;
    }
    Ok(())
}

pub fn table_to_string(table: &DatasetTable) -> String {
    let mut buf = Vec::new();
    write_table(table, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("json is utf-8")
}

pub fn read_table(input: impl BufRead) -> Result<DatasetTable, DataError> {
    let mut lines = input.lines();
    let first = lines
        .next()
        .ok_or_else(|| DataError::Format("empty table file".into()))?
        .map_err(|e| DataError::Io(e.to_string()))?;
    let header: Header =
        serde_json::from_str(&first).map_err(|e| DataError::Format(format!("header: {e}")))?;
    if header.format != TABLE_FORMAT || header.version != TABLE_VERSION {
        return Err(DataError::Format(format!(
            "unsupported table format {} v{}",
            header.format, header.version
        )));
    }
    let mut samples = Vec::with_capacity(header.n_samples);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| DataError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: Sample = serde_json::from_str(&line)
            .map_err(|e| DataError::Format(format!("line {}: {e}", i + 2)))?;
        samples.push(sample);
    }
    if samples.len() != header.n_samples {
        return Err(DataError::Format(format!(
            "header declares {} samples, found {}",
            header.n_samples,
            samples.len()
        )));
    }
    DatasetTable::new(header.dataset_id, samples)
}

pub fn read_table_file(path: impl AsRef<std::path::Path>) -> Result<DatasetTable, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
    read_table(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::{parse_annotations, Schema};
    use proptest::prelude::*;

    fn schema() -> Schema {
        Schema::from_toml(
            "id='t'\nversion=1\ndataset='SA'\n[columns]\nsubject='subject'\nonset='onset'\napex='apex'\noffset='offset'\naction_units='aus'\nemotion='emotion'\n",
        )
        .unwrap()
    }

    prop_compose! {
        fn row()(subject in "[a-z]{1,3}[0-9]", onset in 0u32..100, d1 in 0u32..50,
                 d2 in prop::option::of(0u32..50), aus in prop::collection::btree_set(1u16..30, 0..4),
                 emotion in prop::option::of("[a-z]{3,6}")) -> String {
            let aus: Vec<String> = aus.iter().map(|n| format!("AU{n}")).collect();
            format!("{subject},{onset},{},{},{},{}", onset + d1,
                d2.map(|d| (onset + d1 + d).to_string()).unwrap_or_default(),
                aus.join("+"), emotion.unwrap_or_default())
        }
    }

    proptest! {
        #[test]
        fn normalized_round_trip(rows in prop::collection::vec(row(), 0..20)) {
            let raw = format!("subject,onset,apex,offset,aus,emotion\n{}\n", rows.join("\n"));
            let table = parse_annotations(&raw, &schema()).unwrap();
            let text = table_to_string(&table);
            let back = read_table(text.as_bytes()).unwrap();
            prop_assert_eq!(&back, &table);
            prop_assert_eq!(table_to_string(&back), text);
        }
    }

    #[test]
    fn rejects_wrong_count() {
        let raw = "subject,onset,apex,offset,aus,emotion\ns1,1,2,3,AU1,\n";
        let text = table_to_string(&parse_annotations(raw, &schema()).unwrap());
        let truncated: String = text.lines().take(1).collect::<Vec<_>>().join("\n");
        assert!(matches!(read_table(truncated.as_bytes()), Err(DataError::Format(_))));
    }
}
