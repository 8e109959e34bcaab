use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Categorical,
    Numerical,
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldKind::Categorical => "categorical",
            FieldKind::Numerical => "numerical",
        })
    }
}

impl FromStr for FieldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "categorical" | "cat" | "c" => Ok(FieldKind::Categorical),
            "numerical" | "num" | "n" => Ok(FieldKind::Numerical),
            other => Err(Error::invalid(format!("unknown field kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    pub name: String,
    pub kind: FieldKind,
}

/// Ordered list of input fields. At least two fields are required so that
/// every interaction layer has at least one pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    fields: Vec<Field>,
}

impl FeatureSchema {
    pub fn new(fields: Vec<Field>) -> Result<Self> {
        if fields.len() < 2 {
            return Err(Error::invalid(format!(
                "schema needs at least 2 fields, got {}",
                fields.len()
            )));
        }
        let mut seen = HashSet::new();
        for f in &fields {
            if f.name.is_empty() || f.name == "label" {
                return Err(Error::invalid(format!("invalid field name `{}`", f.name)));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::invalid(format!("duplicate field name `{}`", f.name)));
            }
        }
        Ok(Self { fields })
    }

    /// Convenience constructor for all-categorical schemas.
    pub fn categorical<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        Self::new(
            names
                .iter()
                .map(|n| Field {
                    name: n.as_ref().to_string(),
                    kind: FieldKind::Categorical,
                })
                .collect(),
        )
    }

    /// Parses the schema file format: one `name kind` pair per line
    /// (whitespace separated), `#` starts a comment.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut fields = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(name), Some(kind), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::parse(origin, lineno + 1, "expected `<name> <kind>`"));
            };
            let kind = kind
                .parse()
                .map_err(|e: Error| Error::parse(origin, lineno + 1, e.to_string()))?;
            fields.push(Field {
                name: name.to_string(),
                kind,
            });
        }
        Self::new(fields)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        self.fields
            .iter()
            .map(|f| format!("{} {}\n", f.name, f.kind))
            .collect()
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    /// Number of fields, `m`.
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    /// FNV-1a fingerprint of the ordered `(name, kind)` list.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_text().bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h
    }

    pub fn fingerprint_hex(&self) -> String {
        format!("{:016x}", self.fingerprint())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn needs_two_unique_fields() {
        assert!(FeatureSchema::categorical(&["a"]).is_err());
        assert!(FeatureSchema::categorical(&["a", "a"]).is_err());
        assert!(FeatureSchema::categorical(&["a", "label"]).is_err());
        assert_eq!(FeatureSchema::categorical(&["a", "b"]).unwrap().len(), 2);
    }

    #[test]
    fn parse_schema_file() {
        let s = FeatureSchema::parse(
            "# toy\nuser categorical\nprice numerical  # dollars\n\ngender cat\n",
            Path::new("s"),
        )
        .unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.fields()[1].kind, FieldKind::Numerical);
        assert_eq!(s.position("gender"), Some(2));
        let again = FeatureSchema::parse(&s.to_text(), Path::new("s")).unwrap();
        assert_eq!(again.fingerprint(), s.fingerprint());
    }

    #[test]
    fn parse_reports_line() {
        let err = FeatureSchema::parse("a categorical\nb bogus\n", Path::new("x.schema")).unwrap_err();
        assert!(err.to_string().contains("x.schema:2"), "{err}");
    }

    #[test]
    fn fingerprint_depends_on_order() {
        let a = FeatureSchema::categorical(&["a", "b"]).unwrap();
        let b = FeatureSchema::categorical(&["b", "a"]).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
