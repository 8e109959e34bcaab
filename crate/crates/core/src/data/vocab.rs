use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use super::io::RawRecord;
use super::schema::{FeatureSchema, FieldKind};
use crate::error::{Error, Result};

/// Category → global index map for one categorical field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldVocab {
    pub offset: usize,
    categories: HashMap<String, usize>,
    pub oov: usize,
}

impl FieldVocab {
    /// Global index for `category`, falling back to the field's OOV slot.
    pub fn index(&self, category: &str) -> usize {
        self.categories.get(category).copied().unwrap_or(self.oov)
    }

    pub fn retained(&self) -> usize {
        self.categories.len()
    }

    /// Number of indices owned by this field (retained + OOV).
    pub fn size(&self) -> usize {
        self.categories.len() + 1
    }

    pub fn contains(&self, category: &str) -> bool {
        self.categories.contains_key(category)
    }
}

/// Frequency-filtered categorical vocabulary. Only categorical fields have an
/// entry; numerical slots are `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    schema_fingerprint: u64,
    min_count: usize,
    fields: Vec<Option<FieldVocab>>,
    n: usize,
}

pub fn build_vocabulary<'a, I>(records: I, schema: &FeatureSchema, min_count: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a RawRecord>,
{
    let m = schema.len();
    let mut counts: Vec<HashMap<&'a str, usize>> = vec![HashMap::new(); m];
    let mut seen = 0usize;
    for rec in records {
        if rec.values.len() < m {
            return Err(Error::MissingField(schema.fields()[rec.values.len()].name.clone()));
        }
        for (f, field) in schema.fields().iter().enumerate() {
            if field.kind == FieldKind::Categorical {
                *counts[f].entry(rec.values[f].as_str()).or_default() += 1;
            }
        }
        seen += 1;
    }
    if seen == 0 {
        return Err(Error::Empty("vocabulary corpus has no records"));
    }

    let min_count = min_count.max(1);
    let mut offset = 0;
    let mut fields = Vec::with_capacity(m);
    for (f, field) in schema.fields().iter().enumerate() {
        if field.kind != FieldKind::Categorical {
            fields.push(None);
            continue;
        }
        let mut kept: Vec<&str> = counts[f]
            .iter()
            .filter(|(_, &c)| c >= min_count)
            .map(|(k, _)| *k)
            .collect();
        kept.sort_unstable();
        let categories: HashMap<String, usize> = kept
            .iter()
            .enumerate()
            .map(|(i, c)| (c.to_string(), offset + i))
            .collect();
        let oov = offset + categories.len();
        offset = oov + 1;
        fields.push(Some(FieldVocab {
            offset: oov - categories.len(),
            categories,
            oov,
        }));
    }
    Ok(Vocabulary {
        schema_fingerprint: schema.fingerprint(),
        min_count,
        fields,
        n: offset,
    })
}

const OOV_CELL: &str = "\\N";

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next()? {
            '\\' => out.push('\\'),
            't' => out.push('\t'),
            'n' => out.push('\n'),
            'r' => out.push('\r'),
            _ => return None,
        }
    }
    Some(out)
}

/// Parses `key=value` cells of an artifact header line.
pub(crate) fn header_fields(line: &str, tag: &str) -> Option<BTreeMap<String, String>> {
    let mut cells = line.split('\t');
    if cells.next()? != tag {
        return None;
    }
    cells
        .map(|c| c.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

impl Vocabulary {
    /// Total number of categorical feature indices.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn schema_fingerprint(&self) -> u64 {
        self.schema_fingerprint
    }

    pub fn field(&self, f: usize) -> Option<&FieldVocab> {
        self.fields.get(f).and_then(Option::as_ref)
    }

    /// True when every categorical field kept nothing but its OOV slot.
    pub fn all_oov(&self) -> bool {
        self.fields.iter().flatten().all(|f| f.retained() == 0)
    }

    /// `#vocab` header, then one `field<TAB>category<TAB>index` row per
    /// retained category in index order. The OOV row uses the `\N` cell.
    pub fn write_to<W: Write>(&self, w: &mut W, schema: &FeatureSchema) -> Result<()> {
        writeln!(
            w,
            "#vocab\tschema={:016x}\tmin_count={}\tn={}",
            self.schema_fingerprint, self.min_count, self.n
        )?;
        for (f, fv) in self.fields.iter().enumerate() {
            let Some(fv) = fv else { continue };
            let name = escape(&schema.fields()[f].name);
            let mut rows: Vec<(&String, &usize)> = fv.categories.iter().collect();
            rows.sort_by_key(|(_, &i)| i);
            for (cat, idx) in rows {
                writeln!(w, "{name}\t{}\t{idx}", escape(cat))?;
            }
            writeln!(w, "{name}\t{OOV_CELL}\t{}", fv.oov)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R, schema: &FeatureSchema, origin: &Path) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or(Error::Empty("vocabulary file is empty"))??;
        let meta = header_fields(&header, "#vocab")
            .ok_or_else(|| Error::parse(origin, 1, "missing `#vocab` header"))?;
        let get = |k: &str| {
            meta.get(k)
                .ok_or_else(|| Error::parse(origin, 1, format!("header lacks `{k}`")))
        };
        let fp = u64::from_str_radix(get("schema")?, 16)
            .map_err(|e| Error::parse(origin, 1, e.to_string()))?;
        if fp != schema.fingerprint() {
            return Err(Error::SchemaMismatch(format!(
                "vocabulary built for schema {fp:016x}, current schema is {}",
                schema.fingerprint_hex()
            )));
        }
        let min_count: usize = get("min_count")?
            .parse()
            .map_err(|_| Error::parse(origin, 1, "bad min_count"))?;
        let n: usize = get("n")?.parse().map_err(|_| Error::parse(origin, 1, "bad n"))?;

        let mut cats: Vec<HashMap<String, usize>> = vec![HashMap::new(); schema.len()];
        let mut oov: Vec<Option<usize>> = vec![None; schema.len()];
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::parse(origin, lineno, msg.to_string());
            let mut cells = line.split('\t');
            let (Some(name), Some(cat), Some(idx), None) =
                (cells.next(), cells.next(), cells.next(), cells.next())
            else {
                return Err(bad("expected `field<TAB>category<TAB>index`"));
            };
            let name = unescape(name).ok_or_else(|| bad("bad escape in field"))?;
            let f = schema
                .position(&name)
                .ok_or_else(|| bad("unknown field"))?;
            let idx: usize = idx.parse().map_err(|_| bad("bad index"))?;
            if idx >= n {
                return Err(bad("index out of range"));
            }
            if cat == OOV_CELL {
                oov[f] = Some(idx);
            } else {
                let cat = unescape(cat).ok_or_else(|| bad("bad escape in category"))?;
                cats[f].insert(cat, idx);
            }
        }

        let mut fields = Vec::with_capacity(schema.len());
        for (f, field) in schema.fields().iter().enumerate() {
            if field.kind != FieldKind::Categorical {
                fields.push(None);
                continue;
            }
            let oov = oov[f].ok_or_else(|| {
                Error::parse(origin, 0, format!("field `{}` has no OOV row", field.name))
            })?;
            let categories = std::mem::take(&mut cats[f]);
            fields.push(Some(FieldVocab {
                offset: oov - categories.len(),
                categories,
                oov,
            }));
        }
        Ok(Self {
            schema_fingerprint: fp,
            min_count,
            fields,
            n,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(vals: &[&str]) -> RawRecord {
        RawRecord {
            values: vals.iter().map(|s| s.to_string()).collect(),
            label: 0,
        }
    }

    #[test]
    fn threshold_boundary() {
        let schema = FeatureSchema::categorical(&["f", "g"]).unwrap();
        let mut recs = Vec::new();
        recs.extend((0..25).map(|_| rec(&["A", "x"])));
        recs.extend((0..19).map(|_| rec(&["B", "x"])));
        let v = build_vocabulary(&recs, &schema, 20).unwrap();
        let f = v.field(0).unwrap();
        assert!(f.contains("A"));
        assert!(!f.contains("B"));
        assert_eq!(f.size(), 2);
        assert_eq!(f.index("B"), f.oov);
        assert_eq!(f.index("never-seen"), f.oov);
    }

    #[test]
    fn min_count_one_keeps_everything() {
        let schema = FeatureSchema::categorical(&["f", "g"]).unwrap();
        let recs = vec![rec(&["a", "x"]), rec(&["b", "y"]), rec(&["c", "y"])];
        let v = build_vocabulary(&recs, &schema, 1).unwrap();
        assert_eq!(v.field(0).unwrap().retained(), 3);
        assert_eq!(v.field(1).unwrap().retained(), 2);
        assert_eq!(v.n(), 4 + 3);
    }

    #[test]
    fn empty_and_short_records_fail() {
        let schema = FeatureSchema::categorical(&["f", "g"]).unwrap();
        assert!(matches!(
            build_vocabulary(&Vec::<RawRecord>::new(), &schema, 1),
            Err(Error::Empty(_))
        ));
        match build_vocabulary(&[rec(&["a"])], &schema, 1) {
            Err(Error::MissingField(name)) => assert_eq!(name, "g"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn escape_roundtrip() {
        for s in ["plain", "tab\there", "back\\slash", "\\N", "new\nline"] {
            assert_eq!(unescape(&escape(s)).unwrap(), s);
        }
        assert_ne!(escape("\\N"), OOV_CELL);
    }

    #[test]
    fn write_read_roundtrip() {
        let schema = FeatureSchema::categorical(&["f", "g"]).unwrap();
        let recs = vec![rec(&["a\tb", "\\N"]), rec(&["b", "y"]), rec(&["b", "y"])];
        let v = build_vocabulary(&recs, &schema, 1).unwrap();
        let mut buf = Vec::new();
        v.write_to(&mut buf, &schema).unwrap();
        let back = Vocabulary::read_from(buf.as_slice(), &schema, Path::new("v")).unwrap();
        assert_eq!(back, v);

        let other = FeatureSchema::categorical(&["g", "f"]).unwrap();
        assert!(matches!(
            Vocabulary::read_from(buf.as_slice(), &other, Path::new("v")),
            Err(Error::SchemaMismatch(_))
        ));
    }
}
