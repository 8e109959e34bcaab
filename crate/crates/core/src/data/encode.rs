use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use super::buckets::{parse_numeric, BucketSpec};
use super::io::RawRecord;
use super::schema::{FeatureSchema, FieldKind};
use super::vocab::{build_vocabulary, Vocabulary};
use crate::error::{Error, Result};

/// One training instance: the active feature index of every field plus the
/// binary label.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodedSample {
    pub indices: Vec<usize>,
    pub label: u8,
}

impl EncodedSample {
    pub fn new(indices: Vec<usize>, label: u8) -> Self {
        Self { indices, label }
    }

    pub fn n_fields(&self) -> usize {
        self.indices.len()
    }

    /// Checks the sample against a model's field count and feature space.
    pub fn validate(&self, n_fields: usize, n_features: usize) -> Result<()> {
        if self.indices.len() != n_fields {
            return Err(Error::SchemaMismatch(format!(
                "sample has {} fields, expected {n_fields}",
                self.indices.len()
            )));
        }
        if let Some(&index) = self.indices.iter().find(|&&i| i >= n_features) {
            return Err(Error::IndexOutOfRange { index, n: n_features });
        }
        if self.label > 1 {
            return Err(Error::invalid(format!("label {} is not 0/1", self.label)));
        }
        Ok(())
    }
}

/// First index of each numerical field's range.
fn numerical_offsets(schema: &FeatureSchema, vocab: &Vocabulary, buckets: &BucketSpec) -> Vec<usize> {
    let mut next = vocab.n();
    let mut offsets = vec![0; schema.len()];
    for (f, field) in schema.fields().iter().enumerate() {
        if field.kind == FieldKind::Numerical {
            offsets[f] = next;
            next += buckets.field(f).map_or(1, |b| b.n_buckets()) + 1;
        }
    }
    offsets
}

/// Encodes one record. Categorical values map through the vocabulary (OOV on
/// a miss); numerical values map to their bucket inside the field's range,
/// with empty cells taking the field's trailing missing-value slot.
pub fn encode(
    record: &RawRecord,
    schema: &FeatureSchema,
    vocab: &Vocabulary,
    buckets: &BucketSpec,
) -> Result<EncodedSample> {
    let offsets = numerical_offsets(schema, vocab, buckets);
    encode_with(record, schema, vocab, buckets, &offsets)
}

fn encode_with(
    record: &RawRecord,
    schema: &FeatureSchema,
    vocab: &Vocabulary,
    buckets: &BucketSpec,
    offsets: &[usize],
) -> Result<EncodedSample> {
    if record.values.len() != schema.len() {
        return Err(Error::SchemaMismatch(format!(
            "record has {} values, schema has {} fields",
            record.values.len(),
            schema.len()
        )));
    }
    let mut indices = Vec::with_capacity(schema.len());
    for (f, field) in schema.fields().iter().enumerate() {
        let value = &record.values[f];
        let idx = match field.kind {
            FieldKind::Categorical => vocab
                .field(f)
                .ok_or_else(|| Error::SchemaMismatch(format!("no vocabulary for `{}`", field.name)))?
                .index(value),
            FieldKind::Numerical => {
                let b = buckets
                    .field(f)
                    .ok_or_else(|| Error::SchemaMismatch(format!("no buckets for `{}`", field.name)))?;
                match parse_numeric(value)? {
                    Some(v) => offsets[f] + b.bucket_of(v),
                    None => offsets[f] + b.n_buckets(),
                }
            }
        };
        indices.push(idx);
    }
    Ok(EncodedSample {
        indices,
        label: record.label,
    })
}

/// Fitted schema + vocabulary + buckets: everything needed to encode records.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    schema: FeatureSchema,
    vocab: Vocabulary,
    buckets: BucketSpec,
    offsets: Vec<usize>,
}

pub const VOCAB_FILE: &str = "vocab.tsv";
pub const BUCKETS_FILE: &str = "buckets.tsv";
pub const SCHEMA_FILE: &str = "schema.txt";

impl FeatureMap {
    pub fn new(schema: FeatureSchema, vocab: Vocabulary, buckets: BucketSpec) -> Result<Self> {
        if vocab.schema_fingerprint() != schema.fingerprint()
            || buckets.schema_fingerprint() != schema.fingerprint()
        {
            return Err(Error::SchemaMismatch(
                "vocabulary/buckets were fitted on a different schema".into(),
            ));
        }
        let offsets = numerical_offsets(&schema, &vocab, &buckets);
        Ok(Self {
            schema,
            vocab,
            buckets,
            offsets,
        })
    }

    pub fn fit(records: &[RawRecord], schema: FeatureSchema, min_count: usize, n_buckets: usize) -> Result<Self> {
        let vocab = build_vocabulary(records, &schema, min_count)?;
        let buckets = BucketSpec::fit(records, &schema, n_buckets)?;
        Self::new(schema, vocab, buckets)
    }

    pub fn encode(&self, record: &RawRecord) -> Result<EncodedSample> {
        encode_with(record, &self.schema, &self.vocab, &self.buckets, &self.offsets)
    }

    pub fn encode_all(&self, records: &[RawRecord]) -> Result<Vec<EncodedSample>> {
        records.iter().map(|r| self.encode(r)).collect()
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn buckets(&self) -> &BucketSpec {
        &self.buckets
    }

    /// Total feature count `n`.
    pub fn n_features(&self) -> usize {
        self.vocab.n() + self.buckets.total_slots()
    }

    /// Index range owned by each field, in schema order.
    pub fn field_ranges(&self) -> Vec<Range<usize>> {
        self.schema
            .fields()
            .iter()
            .enumerate()
            .map(|(f, field)| match field.kind {
                FieldKind::Categorical => {
                    let v = self.vocab.field(f).expect("categorical field has vocabulary");
                    v.offset..v.oov + 1
                }
                FieldKind::Numerical => {
                    let b = self.buckets.field(f).expect("numerical field has buckets");
                    self.offsets[f]..self.offsets[f] + b.n_buckets() + 1
                }
            })
            .collect()
    }

    /// Writes `schema.txt`, `vocab.tsv` and `buckets.tsv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(SCHEMA_FILE), self.schema.to_text())?;
        let mut w = BufWriter::new(File::create(dir.join(VOCAB_FILE))?);
        self.vocab.write_to(&mut w, &self.schema)?;
        w.flush()?;
        let mut w = BufWriter::new(File::create(dir.join(BUCKETS_FILE))?);
        self.buckets.write_to(&mut w, &self.schema)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let schema = FeatureSchema::load(&dir.join(SCHEMA_FILE))?;
        let vpath = dir.join(VOCAB_FILE);
        let vocab = Vocabulary::read_from(BufReader::new(File::open(&vpath)?), &schema, &vpath)?;
        let bpath = dir.join(BUCKETS_FILE);
        let buckets = BucketSpec::read_from(BufReader::new(File::open(&bpath)?), &schema, &bpath)?;
        Self::new(schema, vocab, buckets)
    }
}
