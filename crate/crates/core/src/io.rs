//! CSV datasets.
//!
//! Header is required; columns are `id,label[,x1..xm][,s_pos,s_neg]`.
//! UTF-8, `.` decimal point, comma separator. An empty `label` cell means the
//! sample is unlabelled. Score columns always carry a probability pair.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::domain::{Dataset, FeatureVector, Label, Sample, ScorePair};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Features,
    Scores,
    Both,
}

impl Schema {
    fn has_features(self) -> bool {
        matches!(self, Schema::Features | Schema::Both)
    }

    fn has_scores(self) -> bool {
        matches!(self, Schema::Scores | Schema::Both)
    }
}

/// Mapping between source class names and binary labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassNames {
    pub positive: String,
    /// When unset, the first non-positive name seen becomes the negative
    /// class; a third distinct name is an error.
    pub negative: Option<String>,
}

impl ClassNames {
    pub fn new(positive: impl Into<String>, negative: Option<String>) -> Self {
        ClassNames {
            positive: positive.into(),
            negative,
        }
    }

    /// The canonical `positive` / `negative` names.
    pub fn canonical() -> Self {
        ClassNames::new("positive", Some("negative".into()))
    }

    fn resolve(&mut self, name: &str) -> Result<Label> {
        if name == self.positive {
            return Ok(Label::Positive);
        }
        match &self.negative {
            Some(neg) if neg == name => Ok(Label::Negative),
            Some(_) => Err(Error::UnknownClass(name.to_string())),
            None => {
                self.negative = Some(name.to_string());
                Ok(Label::Negative)
            }
        }
    }

    pub fn name(&self, label: Label) -> &str {
        match label {
            Label::Positive => &self.positive,
            Label::Negative => self.negative.as_deref().unwrap_or("negative"),
        }
    }
}

struct Layout {
    features: Vec<usize>,
    scores: Option<(usize, usize)>,
}

fn layout(header: &csv::StringRecord, schema: Schema) -> Result<Layout> {
    let parse_err = |message: String| Error::Parse { line: 1, message };
    if header.get(0) != Some("id") || header.get(1) != Some("label") {
        return Err(parse_err("header must start with `id,label`".into()));
    }
    let mut features = Vec::new();
    let mut s_pos = None;
    let mut s_neg = None;
    for (i, name) in header.iter().enumerate().skip(2) {
        match name {
            "s_pos" => s_pos = Some(i),
            "s_neg" => s_neg = Some(i),
            x if x.starts_with('x') && x[1..].parse::<usize>() == Ok(features.len() + 1) => {
                if s_pos.is_some() {
                    return Err(parse_err("feature columns must precede score columns".into()));
                }
                features.push(i)
            }
            other => return Err(parse_err(format!("unexpected column `{other}`"))),
        }
    }
    let scores = match (s_pos, s_neg) {
        (Some(p), Some(n)) if n == p + 1 => Some((p, n)),
        (None, None) => None,
        _ => return Err(parse_err("score columns must be `s_pos,s_neg`".into())),
    };
    if schema.has_features() && features.is_empty() {
        return Err(parse_err("schema requires feature columns x1..xm".into()));
    }
    if schema.has_scores() && scores.is_none() {
        return Err(parse_err("schema requires columns s_pos,s_neg".into()));
    }
    Ok(Layout {
        features: if schema.has_features() { features } else { Vec::new() },
        scores: if schema.has_scores() { scores } else { None },
    })
}

/// Infers the schema from a header line.
pub fn detect_schema(header: &str) -> Result<Schema> {
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    let has_x = cols.iter().any(|c| c.starts_with('x'));
    let has_s = cols.contains(&"s_pos");
    match (has_x, has_s) {
        (true, true) => Ok(Schema::Both),
        (true, false) => Ok(Schema::Features),
        (false, true) => Ok(Schema::Scores),
        (false, false) => Err(Error::Parse {
            line: 1,
            message: "header has neither feature nor score columns".into(),
        }),
    }
}

pub fn read_dataset<R: Read>(reader: R, schema: Schema, classes: &mut ClassNames) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let layout = layout(&header, schema)?;

    let mut samples = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let at = |message: String| Error::Parse { line, message };
        if record.len() != header.len() {
            return Err(at(format!("expected {} fields, found {}", header.len(), record.len())));
        }
        let number = |i: usize| -> Result<f64> {
            let raw = &record[i];
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| at(format!("column `{}`: not a finite number: `{raw}`", &header[i])))
        };
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(at("empty id".into()));
        }
        let label = match &record[1] {
            "" => None,
            name => Some(classes.resolve(name).map_err(|e| at(e.to_string()))?),
        };
        let features = if layout.features.is_empty() {
            None
        } else {
            let values = layout.features.iter().map(|&i| number(i)).collect::<Result<Vec<_>>>()?;
            Some(FeatureVector::new(values)?)
        };
        let scores = match layout.scores {
            Some((p, n)) => Some(
                ScorePair::probability(number(p)?, number(n)?).map_err(|e| at(e.to_string()))?,
            ),
            None => None,
        };
        samples.push(Sample {
            id,
            features,
            scores,
            label,
        });
    }
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Dataset::new(samples)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Reads a dataset from `path`, detecting the schema from the header when
/// `schema` is `None`.
pub fn load_dataset(path: &Path, schema: Option<Schema>, classes: &mut ClassNames) -> Result<Dataset> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let schema = match schema {
        Some(s) => s,
        None => detect_schema(text.lines().next().unwrap_or(""))?,
    };
    read_dataset(text.as_bytes(), schema, classes)
}

/// Writes `data` in the CSV contract. Features are written when every
/// sample has them, probability scores likewise.
pub fn write_dataset<W: Write>(data: &Dataset, classes: &ClassNames, out: W) -> Result<()> {
    let with_features = !data.is_empty() && data.iter().all(|s| s.features.is_some());
    let with_scores = !data.is_empty() && data.iter().all(|s| s.scores.is_some_and(|p| p.is_probability()));
    let mut w = csv::WriterBuilder::new().from_writer(out);
    let mut header = vec!["id".to_string(), "label".to_string()];
    if with_features {
        header.extend((1..=data.feature_dim().unwrap_or(0)).map(|j| format!("x{j}")));
    }
    if with_scores {
        header.extend(["s_pos".to_string(), "s_neg".to_string()]);
    }
    w.write_record(&header).map_err(csv_error)?;
    for s in data {
        let mut row = vec![s.id.clone(), s.label.map(|l| classes.name(l).to_string()).unwrap_or_default()];
        if with_features {
            row.extend(s.features.as_ref().unwrap().values().iter().map(f64::to_string));
        }
        if with_scores {
            let p = s.scores.unwrap();
            row.extend([p.pos().to_string(), p.neg().to_string()]);
        }
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, schema: Schema) -> Result<Dataset> {
        read_dataset(text.as_bytes(), schema, &mut ClassNames::new("B", None))
    }

    #[test]
    fn parses_scores_and_features() {
        let d = read("id,label,x1,x2,s_pos,s_neg\na,A,1,2,0.3,0.7\nb,B,3,4,0.9,0.1\n", Schema::Both).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.samples()[0].label, Some(Label::Negative));
        assert_eq!(d.samples()[1].label, Some(Label::Positive));
        assert_eq!(d.samples()[1].features.as_ref().unwrap().values(), &[3.0, 4.0]);
        let d = read("id,label,x1,x2,s_pos,s_neg\na,A,1,2,0.3,0.7\n", Schema::Features).unwrap();
        assert!(d.samples()[0].scores.is_none());
    }

    #[test]
    fn header_only_is_empty_dataset() {
        let err = read("id,label,s_pos,s_neg\n", Schema::Scores).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset));
        assert_eq!(err.to_string(), "empty dataset");
    }

    #[test]
    fn bad_probability_row_names_the_line() {
        let err = read("id,label,s_pos,s_neg\na,A,0.5,0.5\nb,B,0.3,0.8\n", Schema::Scores).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn third_class_is_rejected() {
        let err = read("id,label,s_pos,s_neg\na,A,0.5,0.5\nb,C,0.2,0.8\n", Schema::Scores).unwrap_err();
        assert!(err.to_string().contains("unknown class name `C`"), "{err}");
        let mut strict = ClassNames::new("B", Some("A".into()));
        let err = read_dataset("id,label,s_pos,s_neg\na,Z,0.5,0.5\n".as_bytes(), Schema::Scores, &mut strict).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn malformed_rows() {
        assert!(matches!(read("id,label,x1\na,A,abc\n", Schema::Features), Err(Error::Parse { line: 2, .. })));
        assert!(read("id,label,x1\na,A\n", Schema::Features).is_err());
        assert!(read("label,id,x1\nA,a,1\n", Schema::Features).is_err());
        assert!(read("id,label,x1\na,A,1\n", Schema::Scores).is_err());
        assert!(read("id,label,x2\na,A,1\n", Schema::Features).is_err());
        assert!(read("id,label,x1\na,A,1\na,B,2\n", Schema::Features).is_err());
    }

    #[test]
    fn unlabelled_rows_allowed() {
        let d = read("id,label,s_pos,s_neg\nt1,,0.5,0.5\n", Schema::Scores).unwrap();
        assert_eq!(d.samples()[0].label, None);
    }

    #[test]
    fn detects_schema() {
        assert_eq!(detect_schema("id,label,x1,x2").unwrap(), Schema::Features);
        assert_eq!(detect_schema("id,label,s_pos,s_neg").unwrap(), Schema::Scores);
        assert_eq!(detect_schema("id,label,x1,s_pos,s_neg\n").unwrap(), Schema::Both);
        assert!(detect_schema("id,label").is_err());
    }
}
