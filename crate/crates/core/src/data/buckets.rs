use std::io::{BufRead, Write};
use std::path::Path;

use super::io::RawRecord;
use super::schema::{FeatureSchema, FieldKind};
use super::vocab::header_fields;
use crate::error::{Error, Result};

/// Sorted, strictly increasing upper boundaries for one numerical field.
/// Bucket `b` holds values in `[bounds[b-1], bounds[b])`; the last bucket is
/// unbounded above.
#[derive(Debug, Clone, PartialEq)]
pub struct Buckets {
    bounds: Vec<f64>,
}

impl Buckets {
    pub fn from_bounds(bounds: Vec<f64>) -> Result<Self> {
        if bounds.iter().any(|b| !b.is_finite()) || bounds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("bucket boundaries must be finite and strictly increasing"));
        }
        Ok(Self { bounds })
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn n_buckets(&self) -> usize {
        self.bounds.len() + 1
    }

    pub fn bucket_of(&self, value: f64) -> usize {
        self.bounds.partition_point(|&b| b <= value)
    }
}

/// Equal-frequency discretization: boundaries sit at the empirical
/// `i / n_buckets` quantiles. Coinciding quantiles collapse, so the result may
/// have fewer than `n_buckets` buckets.
pub fn fit_buckets<I: IntoIterator<Item = f64>>(values: I, n_buckets: usize) -> Result<Buckets> {
    if n_buckets == 0 {
        return Err(Error::invalid("n_buckets must be >= 1"));
    }
    let mut v: Vec<f64> = values.into_iter().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return Err(Error::Empty("no values to fit buckets on"));
    }
    v.sort_by(f64::total_cmp);
    let len = v.len();
    let mut bounds: Vec<f64> = Vec::with_capacity(n_buckets - 1);
    for i in 1..n_buckets {
        let q = i * len / n_buckets;
        if q == 0 {
            continue;
        }
        let b = 0.5 * (v[q - 1] + v[q]);
        // a boundary at or below the minimum would leave bucket 0 empty
        if !b.is_finite() || b <= v[0] {
            continue;
        }
        if bounds.last().is_none_or(|&last| b > last) {
            bounds.push(b);
        }
    }
    Ok(Buckets { bounds })
}

/// Per-field bucket boundaries; `None` for categorical fields.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketSpec {
    schema_fingerprint: u64,
    n_buckets: usize,
    fields: Vec<Option<Buckets>>,
}

/// Parses a numerical cell. Empty cells and `nan` count as missing.
pub(crate) fn parse_numeric(cell: &str) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    let v: f64 = cell
        .parse()
        .map_err(|_| Error::invalid(format!("not a number: `{cell}`")))?;
    Ok(if v.is_nan() { None } else { Some(v) })
}

impl BucketSpec {
    pub fn fit<'a, I>(records: I, schema: &FeatureSchema, n_buckets: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a RawRecord>,
    {
        if n_buckets == 0 {
            return Err(Error::invalid("n_buckets must be >= 1"));
        }
        let m = schema.len();
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); m];
        for rec in records {
            if rec.values.len() < m {
                return Err(Error::MissingField(schema.fields()[rec.values.len()].name.clone()));
            }
            for (f, field) in schema.fields().iter().enumerate() {
                if field.kind == FieldKind::Numerical {
                    if let Some(v) = parse_numeric(&rec.values[f])? {
                        columns[f].push(v);
                    }
                }
            }
        }
        let fields = schema
            .fields()
            .iter()
            .zip(columns)
            .map(|(field, col)| match field.kind {
                FieldKind::Categorical => Ok(None),
                // an all-missing column still gets a single bucket
                FieldKind::Numerical if col.is_empty() => Ok(Some(Buckets { bounds: Vec::new() })),
                FieldKind::Numerical => fit_buckets(col, n_buckets).map(Some),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            schema_fingerprint: schema.fingerprint(),
            n_buckets,
            fields,
        })
    }

    pub fn field(&self, f: usize) -> Option<&Buckets> {
        self.fields.get(f).and_then(Option::as_ref)
    }

    pub fn schema_fingerprint(&self) -> u64 {
        self.schema_fingerprint
    }

    /// Indices owned by numerical fields: each gets its buckets plus one
    /// missing-value slot.
    pub fn total_slots(&self) -> usize {
        self.fields.iter().flatten().map(|b| b.n_buckets() + 1).sum()
    }

    /// `#buckets` header, then `field<TAB>bucket<TAB>upper_bound` rows; the
    /// last bucket of each field has upper bound `inf`.
    pub fn write_to<W: Write>(&self, w: &mut W, schema: &FeatureSchema) -> Result<()> {
        writeln!(
            w,
            "#buckets\tschema={:016x}\tn_buckets={}",
            self.schema_fingerprint, self.n_buckets
        )?;
        for (f, b) in self.fields.iter().enumerate() {
            let Some(b) = b else { continue };
            let name = &schema.fields()[f].name;
            for (i, bound) in b.bounds.iter().enumerate() {
                writeln!(w, "{name}\t{i}\t{bound:?}")?;
            }
            writeln!(w, "{name}\t{}\tinf", b.bounds.len())?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R, schema: &FeatureSchema, origin: &Path) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or(Error::Empty("bucket file is empty"))??;
        let meta = header_fields(&header, "#buckets")
            .ok_or_else(|| Error::parse(origin, 1, "missing `#buckets` header"))?;
        let fp = meta
            .get("schema")
            .and_then(|s| u64::from_str_radix(s, 16).ok())
            .ok_or_else(|| Error::parse(origin, 1, "bad or missing schema fingerprint"))?;
        if fp != schema.fingerprint() {
            return Err(Error::SchemaMismatch(format!(
                "buckets built for schema {fp:016x}, current schema is {}",
                schema.fingerprint_hex()
            )));
        }
        let n_buckets = meta
            .get("n_buckets")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(origin, 1, "bad or missing n_buckets"))?;

        let mut bounds: Vec<Vec<f64>> = vec![Vec::new(); schema.len()];
        let mut closed = vec![false; schema.len()];
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::parse(origin, i + 2, msg.to_string());
            let cells: Vec<&str> = line.split('\t').collect();
            let [name, bucket, upper] = cells[..] else {
                return Err(bad("expected `field<TAB>bucket<TAB>upper_bound`"));
            };
            let f = schema.position(name).ok_or_else(|| bad("unknown field"))?;
            let bucket: usize = bucket.parse().map_err(|_| bad("bad bucket number"))?;
            if closed[f] || bucket != bounds[f].len() {
                return Err(bad("bucket rows out of order"));
            }
            if upper == "inf" {
                closed[f] = true;
            } else {
                bounds[f].push(upper.parse().map_err(|_| bad("bad upper bound"))?);
            }
        }
        let fields = schema
            .fields()
            .iter()
            .enumerate()
            .map(|(f, field)| match field.kind {
                FieldKind::Categorical => Ok(None),
                FieldKind::Numerical if !closed[f] => Err(Error::parse(
                    origin,
                    0,
                    format!("field `{}` has no bucket rows", field.name),
                )),
                FieldKind::Numerical => Buckets::from_bounds(std::mem::take(&mut bounds[f])).map(Some),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            schema_fingerprint: fp,
            n_buckets,
            fields,
        })
    }
}
