use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassLabel, DatasetSplit, PatientId, Sample, SampleId, SplitKind};
use crate::{Error, Result};

/// Column mapping for dataset CSV files. Every column not named here is a
/// feature, taken in header order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvSchema {
    pub sample_id: String,
    pub patient_id: String,
    pub label: String,
    pub split: String,
    /// Size of the label space. Inferred as `max label + 1` when absent.
    pub num_classes: Option<usize>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            sample_id: "sample_id".into(),
            patient_id: "patient_id".into(),
            label: "label".into(),
            split: "split".into(),
            num_classes: None,
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<DatasetSplit> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::DataIo {
        path: path.to_path_buf(),
        source,
    })?;
    read_dataset(file, schema)
}

struct Columns {
    id: usize,
    patient: usize,
    label: usize,
    split: usize,
    features: Vec<usize>,
}

impl Columns {
    fn resolve(header: &csv::StringRecord, schema: &CsvSchema) -> Result<Self> {
        let find = |name: &str| {
            header
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Parse {
                    line: 1,
                    message: format!("missing column `{name}`"),
                })
        };
        let id = find(&schema.sample_id)?;
        let patient = find(&schema.patient_id)?;
        let label = find(&schema.label)?;
        let split = find(&schema.split)?;
        let features: Vec<usize> = (0..header.len())
            .filter(|i| ![id, patient, label, split].contains(i))
            .collect();
        if features.is_empty() {
            return Err(Error::Parse {
                line: 1,
                message: "no feature columns".into(),
            });
        }
        Ok(Columns {
            id,
            patient,
            label,
            split,
            features,
        })
    }
}

/// Parses a dataset CSV from any reader.
pub fn read_dataset<R: Read>(reader: R, schema: &CsvSchema) -> Result<DatasetSplit> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let cols = Columns::resolve(&header, schema)?;
    let expected = cols.features.len();

    let mut pool = Vec::new();
    let mut test = Vec::new();
    let mut max_label = 0;
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != header.len() {
            let found = record.len().saturating_sub(header.len() - expected);
            return Err(Error::Dimension {
                line,
                expected,
                found,
            });
        }
        let parse_err = |message: String| Error::Parse { line, message };

        let id: u64 = record[cols.id]
            .trim()
            .parse()
            .map_err(|e| parse_err(format!("bad sample id `{}`: {e}", &record[cols.id])))?;
        let patient = record[cols.patient].trim();
        if patient.is_empty() {
            return Err(parse_err("empty patient id".into()));
        }
        let label: usize = record[cols.label]
            .trim()
            .parse()
            .map_err(|e| parse_err(format!("bad label `{}`: {e}", &record[cols.label])))?;
        let kind = match record[cols.split].trim() {
            "pool" => SplitKind::Pool,
            "test" => SplitKind::Test,
            other => {
                return Err(parse_err(format!(
                    "split must be `pool` or `test`, got `{other}`"
                )))
            }
        };
        let mut features = Vec::with_capacity(expected);
        for &c in &cols.features {
            let raw = record[c].trim();
            let x: f64 = raw
                .parse()
                .map_err(|e| parse_err(format!("bad feature `{raw}` in column `{}`: {e}", &header[c])))?;
            if !x.is_finite() {
                return Err(parse_err(format!("non-finite feature `{raw}`")));
            }
            features.push(x);
        }

        max_label = max_label.max(label);
        let sample = Sample::new(SampleId(id), PatientId::new(patient), features, ClassLabel(label));
        match kind {
            SplitKind::Pool => pool.push(sample),
            SplitKind::Test => test.push(sample),
        }
    }

    let num_classes = schema.num_classes.unwrap_or(max_label + 1);
    DatasetSplit::new(pool, test, num_classes)
}

/// Writes `split` in the canonical schema, pool rows first.
pub fn write_dataset<W: Write>(split: &DatasetSplit, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![
        "sample_id".to_string(),
        "patient_id".to_string(),
        "label".to_string(),
        "split".to_string(),
    ];
    header.extend((0..split.feature_dim()).map(|i| format!("f{i}")));
    wtr.write_record(&header)?;
    for (s, kind) in split.samples_with_kind() {
        let mut row = vec![
            s.id.to_string(),
            s.patient.to_string(),
            s.label().to_string(),
            kind.as_str().to_string(),
        ];
        row.extend(s.features.iter().map(|x| x.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIX_ROWS: &str = "\
sample_id,patient_id,label,split,f0,f1
0,A,0,pool,0.1,0.2
1,A,1,pool,0.3,0.4
2,B,2,pool,-1.5,2e-3
3,B,0,pool,7,8
4,C,1,test,0.0,0.0
5,C,2,test,1.0,1.0
";

    fn read(s: &str) -> Result<DatasetSplit> {
        read_dataset(s.as_bytes(), &CsvSchema::default())
    }

    #[test]
    fn reads_six_rows() {
        let split = read(SIX_ROWS).unwrap();
        assert_eq!(split.pool().len(), 4);
        assert_eq!(split.test().len(), 2);
        assert_eq!(split.feature_dim(), 2);
        assert_eq!(split.num_classes(), 3);
        assert_eq!(split.pool()[2].features, vec![-1.5, 0.002]);
        assert_eq!(split.pool_patient_count(), 2);
        assert_eq!(split.test_patient_count(), 1);
    }

    #[test]
    fn shared_patient_is_rejected() {
        let csv = "sample_id,patient_id,label,split,f0,f1\n0,A,0,pool,0,0\n1,B,1,pool,0,0\n2,A,1,test,0,0\n";
        match read(csv) {
            Err(Error::Disjointness(p)) => assert_eq!(p.as_str(), "A"),
            other => panic!("expected disjointness error, got {other:?}"),
        }
    }

    #[test]
    fn dimension_error_reports_line() {
        let csv = "sample_id,patient_id,label,split,f0,f1\n0,A,0,pool,0,0\n1,B,1,pool,0,0,9\n";
        match read(csv) {
            Err(Error::Dimension {
                line,
                expected,
                found,
            }) => {
                assert_eq!((line, expected, found), (3, 2, 3));
            }
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_rows_report_line() {
        let bad_label = "sample_id,patient_id,label,split,f0\n0,A,zero,pool,0\n";
        assert!(matches!(read(bad_label), Err(Error::Parse { line: 2, .. })));
        let bad_split = "sample_id,patient_id,label,split,f0\n0,A,0,pool,0\n1,B,1,train,0\n";
        assert!(matches!(read(bad_split), Err(Error::Parse { line: 3, .. })));
        let nan = "sample_id,patient_id,label,split,f0\n0,A,0,pool,NaN\n";
        assert!(matches!(read(nan), Err(Error::Parse { line: 2, .. })));
        let missing = "id,patient_id,label,split,f0\n0,A,0,pool,0\n";
        assert!(matches!(read(missing), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn custom_schema() {
        let csv = "img,pid,y,part,a,b\n0,A,0,pool,1,2\n1,B,1,test,3,4\n";
        let schema = CsvSchema {
            sample_id: "img".into(),
            patient_id: "pid".into(),
            label: "y".into(),
            split: "part".into(),
            num_classes: Some(3),
        };
        let split = read_dataset(csv.as_bytes(), &schema).unwrap();
        assert_eq!(split.num_classes(), 3);
        assert_eq!(split.test()[0].features, vec![3.0, 4.0]);
    }

    #[test]
    fn write_then_read_is_identity() {
        let split = read(SIX_ROWS).unwrap();
        let mut buf = Vec::new();
        write_dataset(&split, &mut buf).unwrap();
        let again = read_dataset(buf.as_slice(), &CsvSchema::default()).unwrap();
        assert_eq!(again, split);
    }
}
