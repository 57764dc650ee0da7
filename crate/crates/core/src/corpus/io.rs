use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{normalize, Corpus, GroundTruth, Item, ItemId, LabelRecord};
use crate::error::{Error, Result};

/// First line of every label store file.
pub const LABEL_STORE_HEADER: &str = r#"{"format":"review-funnel/labels","version":1}"#;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ItemLine {
    item_id: ItemId,
    embedding: Vec<f64>,
    account_id: u64,
    impressions: u64,
    exact_hash: String,
    created_round: u32,
    #[serde(default)]
    ground_truth: Option<bool>,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads a JSON Lines corpus. Blank lines are skipped; line numbers are 1-based.
pub fn read_corpus(reader: impl Read, origin: &Path) -> Result<(Corpus, GroundTruth)> {
    let mut items: Vec<Item> = Vec::new();
    let mut truth = GroundTruth::new();
    let mut seen = std::collections::HashMap::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ItemLine = serde_json::from_str(&line).map_err(|e| parse_err(origin, lineno, e.to_string()))?;
        let exact_hash = rec
            .exact_hash
            .parse::<u64>()
            .map_err(|e| parse_err(origin, lineno, format!("exact_hash: {e}")))?;
        if let Some(first) = items.first() {
            if first.embedding.len() != rec.embedding.len() {
                return Err(parse_err(
                    origin,
                    lineno,
                    format!(
                        "embedding dimension mismatch: expected {}, got {}",
                        first.embedding.len(),
                        rec.embedding.len()
                    ),
                ));
            }
        }
        if seen.insert(rec.item_id, lineno).is_some() {
            return Err(Error::DuplicateId {
                id: rec.item_id,
                line: Some(lineno),
            });
        }
        let mut embedding = rec.embedding;
        normalize(&mut embedding).map_err(|e| parse_err(origin, lineno, e.to_string()))?;
        if let Some(gt) = rec.ground_truth {
            truth.insert(rec.item_id, gt);
        }
        items.push(Item {
            item_id: rec.item_id,
            embedding,
            account_id: rec.account_id,
            impressions: rec.impressions,
            exact_hash,
            created_round: rec.created_round,
        });
    }
    Ok((Corpus::new(items)?, truth))
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<(Corpus, GroundTruth)> {
    let path = path.as_ref();
    read_corpus(File::open(path)?, path)
}

/// Writes items as JSON Lines, attaching ground truth where `truth` has it.
pub fn write_corpus(mut w: impl Write, items: &[Item], truth: Option<&GroundTruth>) -> Result<()> {
    for it in items {
        let line = ItemLine {
            item_id: it.item_id,
            embedding: it.embedding.clone(),
            account_id: it.account_id,
            impressions: it.impressions,
            exact_hash: it.exact_hash.to_string(),
            created_round: it.created_round,
            ground_truth: truth.and_then(|t| t.get(it.item_id)),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_corpus(path: impl AsRef<Path>, items: &[Item], truth: Option<&GroundTruth>) -> Result<()> {
    write_corpus(BufWriter::new(File::create(path)?), items, truth)
}

pub fn write_labels(mut w: impl Write, records: &[LabelRecord]) -> Result<()> {
    w.write_all(LABEL_STORE_HEADER.as_bytes())?;
    w.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_labels(records: &[LabelRecord], path: impl AsRef<Path>) -> Result<()> {
    write_labels(BufWriter::new(File::create(path)?), records)
}

pub fn read_labels(reader: impl Read, origin: &Path) -> Result<Vec<LabelRecord>> {
    let mut lines = BufReader::new(reader).lines();
    match lines.next().transpose()? {
        Some(h) if h.trim() == LABEL_STORE_HEADER => {}
        Some(_) | None => return Err(parse_err(origin, 1, "missing label store header")),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LabelRecord = serde_json::from_str(&line).map_err(|e| parse_err(origin, lineno, e.to_string()))?;
        rec.validate().map_err(|m| parse_err(origin, lineno, m))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<LabelRecord>> {
    let path = path.as_ref();
    read_labels(File::open(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus, GeneratorConfig, Provenance};
    use proptest::prelude::*;

    fn origin() -> &'static Path {
        Path::new("mem")
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let (c, t) = read_corpus(&b""[..], origin()).unwrap();
        assert!(c.is_empty() && t.is_empty());
    }

    #[test]
    fn unnormalized_embedding_is_normalized() {
        let line = br#"{"item_id":0,"embedding":[3,4],"account_id":1,"impressions":5,"exact_hash":"17","created_round":0,"ground_truth":null}"#;
        let (c, t) = read_corpus(&line[..], origin()).unwrap();
        assert_eq!(c.items()[0].embedding, vec![0.6, 0.8]);
        assert_eq!(c.items()[0].exact_hash, 17);
        assert!(t.is_empty());
    }

    #[test]
    fn duplicate_id_cites_second_line() {
        let mut text = String::new();
        for (i, id) in [0, 1, 2, 3, 7, 4, 5, 6, 7].iter().enumerate() {
            text.push_str(&format!(
                r#"{{"item_id":{id},"embedding":[1,{i}],"account_id":0,"impressions":1,"exact_hash":"0","created_round":0,"ground_truth":true}}"#
            ));
            text.push('\n');
        }
        match read_corpus(text.as_bytes(), origin()) {
            Err(Error::DuplicateId { id: 7, line: Some(9) }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_and_bad_json_carry_line_numbers() {
        let text = "{\"item_id\":0,\"embedding\":[1,0],\"account_id\":0,\"impressions\":1,\"exact_hash\":\"0\",\"created_round\":0}\n\
                    {\"item_id\":1,\"embedding\":[1,0,0],\"account_id\":0,\"impressions\":1,\"exact_hash\":\"0\",\"created_round\":0}\n";
        assert!(matches!(read_corpus(text.as_bytes(), origin()), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(read_corpus(&b"{not json"[..], origin()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn corpus_round_trips_with_ground_truth() {
        let g = generate_corpus(&GeneratorConfig {
            n_clusters: 30,
            ..GeneratorConfig::default()
        })
        .unwrap();
        let mut buf = Vec::new();
        write_corpus(&mut buf, &g.items, Some(&g.ground_truth)).unwrap();
        let (c, t) = read_corpus(&buf[..], origin()).unwrap();
        assert_eq!(c.items(), &g.items[..]);
        assert_eq!(t, g.ground_truth);
    }

    #[test]
    fn empty_store_is_header_only() {
        let mut buf = Vec::new();
        write_labels(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), format!("{LABEL_STORE_HEADER}\n"));
        assert!(read_labels(&buf[..], origin()).unwrap().is_empty());
    }

    #[test]
    fn propagated_without_source_is_rejected() {
        let text = format!(
            "{LABEL_STORE_HEADER}\n{}\n",
            r#"{"item_id":4,"label":true,"provenance":"propagated","source_item_id":null,"round":1,"distance_to_source":0.01}"#
        );
        match read_labels(text.as_bytes(), origin()) {
            Err(Error::Parse { line: 2, message, .. }) => assert!(message.contains("source_item_id")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn oracle_record_round_trips_bit_identical() {
        let recs = vec![LabelRecord::oracle(9, true, 3)];
        let mut buf = Vec::new();
        write_labels(&mut buf, &recs).unwrap();
        let back = read_labels(&buf[..], origin()).unwrap();
        assert_eq!(back, recs);
        let mut again = Vec::new();
        write_labels(&mut again, &back).unwrap();
        assert_eq!(buf, again);
    }

    fn arb_record() -> impl Strategy<Value = LabelRecord> {
        (any::<u64>(), any::<bool>(), 0u8..3, any::<u64>(), 0u32..100, 0.0f64..=2.0).prop_map(
            |(id, label, p, src, round, dist)| match p {
                0 => LabelRecord::seed(id, label, round),
                1 => LabelRecord::oracle(id, label, round),
                _ => LabelRecord::propagated(id, label, src, dist, round),
            },
        )
    }

    proptest! {
        #[test]
        fn label_store_round_trip(recs in proptest::collection::vec(arb_record(), 0..40)) {
            let mut buf = Vec::new();
            write_labels(&mut buf, &recs).unwrap();
            let back = read_labels(&buf[..], origin()).unwrap();
            prop_assert_eq!(&back, &recs);
            prop_assert!(back.iter().all(|r| r.provenance != Provenance::Propagated || r.source_item_id.is_some()));
        }
    }
}
