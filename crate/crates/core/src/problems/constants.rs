//! `name = value  # citation` constants files.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConstantsError {
    #[error("cannot read constants file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("{source_name} is missing constants: {}", missing.join(", "))]
    Missing { source_name: String, missing: Vec<String> },
}

#[derive(Debug, Clone)]
pub struct Constants {
    pub source_name: String,
    values: BTreeMap<String, f64>,
    citations: BTreeMap<String, String>,
}

impl Constants {
    pub fn parse(text: &str, source_name: &str) -> Result<Self, ConstantsError> {
        let mut values = BTreeMap::new();
        let mut citations = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let (body, comment) = match raw.split_once('#') {
                Some((b, c)) => (b, Some(c.trim())),
                None => (raw, None),
            };
            let body = body.trim();
            if body.is_empty() {
                continue;
            }
            let err = |message: String| ConstantsError::Parse {
                source_name: source_name.to_string(),
                line: i + 1,
                message,
            };
            let (name, value) = body
                .split_once('=')
                .ok_or_else(|| err(format!("expected `name = value`, found `{body}`")))?;
            let name = name.trim();
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|e| err(format!("bad value for {name}: {e}")))?;
            if values.insert(name.to_string(), value).is_some() {
                return Err(err(format!("duplicate constant {name}")));
            }
            if let Some(c) = comment.filter(|c| !c.is_empty()) {
                citations.insert(name.to_string(), c.to_string());
            }
        }
        Ok(Self {
            source_name: source_name.to_string(),
            values,
            citations,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConstantsError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConstantsError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Fails with every missing key listed.
    pub fn require(&self, keys: &[&str]) -> Result<(), ConstantsError> {
        let missing: Vec<String> = keys
            .iter()
            .filter(|k| !self.values.contains_key(**k))
            .map(|k| k.to_string())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(ConstantsError::Missing {
                source_name: self.source_name.clone(),
                missing,
            })
        }
    }

    /// Value of a key that `require` has already checked.
    pub fn get(&self, key: &str) -> f64 {
        self.values[key]
    }

    pub fn citation(&self, key: &str) -> Option<&str> {
        self.citations.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_values_and_citations() {
        let c = Constants::parse("# header\nrho = 1.23  # sea level\n\nmu=1.7e-5\n", "t").unwrap();
        assert_eq!(c.get("rho"), 1.23);
        assert_eq!(c.get("mu"), 1.7e-5);
        assert_eq!(c.citation("rho"), Some("sea level"));
        assert_eq!(c.citation("mu"), None);
    }

    #[test]
    fn missing_keys_are_all_listed() {
        let c = Constants::parse("a = 1\n", "t").unwrap();
        let e = c.require(&["a", "b", "c"]).unwrap_err().to_string();
        assert!(e.contains("b, c"), "{e}");
    }

    #[test]
    fn rejects_garbage() {
        assert!(Constants::parse("a 1\n", "t").is_err());
        assert!(Constants::parse("a = x\n", "t").is_err());
        assert!(Constants::parse("a = 1\na = 2\n", "t").is_err());
    }

    #[test]
    fn missing_file_names_the_path() {
        let e = Constants::load(Path::new("/nonexistent/k.constants")).unwrap_err();
        assert!(e.to_string().contains("/nonexistent/k.constants"));
    }
}
