//! Affinity labels: CSV with header `complex_id,affinity` and an optional
//! `split` column (`train`, `val` or `test`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::StoreError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub complex_id: String,
    pub affinity: f64,
    #[serde(default)]
    pub split: Option<Split>,
}

pub fn parse_labels(text: &str) -> Result<Vec<Label>, StoreError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out: Vec<Label> = Vec::new();
    for (row, rec) in reader.deserialize::<Label>().enumerate() {
        let label = rec.map_err(|e| StoreError::Labels(format!("row {}: {e}", row + 1)))?;
        if !label.affinity.is_finite() {
            return Err(StoreError::Labels(format!("row {}: affinity must be finite", row + 1)));
        }
        if out.iter().any(|l| l.complex_id == label.complex_id) {
            return Err(StoreError::Labels(format!("duplicate label for {}", label.complex_id)));
        }
        out.push(label);
    }
    Ok(out)
}

pub fn load_labels(path: &Path) -> Result<Vec<Label>, StoreError> {
    let text = std::fs::read_to_string(path).map_err(super::io_err(path))?;
    parse_labels(&text)
}

pub fn labels_csv(labels: &[Label]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for l in labels {
        w.serialize(l).expect("serialize label");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_and_without_split() {
        let l = parse_labels("complex_id,affinity\na,6.5\nb,-1e-1\n").unwrap();
        assert_eq!(l[1], Label { complex_id: "b".into(), affinity: -0.1, split: None });
        let l = parse_labels("complex_id,affinity,split\na,1,train\nb,2,\nc,3,test\n").unwrap();
        assert_eq!(l.iter().map(|x| x.split).collect::<Vec<_>>(), vec![Some(Split::Train), None, Some(Split::Test)]);
        assert_eq!(parse_labels(&labels_csv(&l)).unwrap(), l);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(parse_labels("complex_id,affinity\na,x\n").is_err());
        assert!(parse_labels("complex_id,affinity\na,NaN\n").is_err());
        assert!(parse_labels("complex_id,affinity\na,1\na,2\n").is_err());
        assert!(parse_labels("complex_id,affinity,split\na,1,holdout\n").is_err());
    }
}
