//! Flat `key = value` text used by run configs and chip profiles.

use crate::error::{Result, SimError};

/// One parsed entry with its 1-based source line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Parses `key = value` lines. `#` starts a comment; duplicate keys are errors.
pub fn parse(text: &str) -> Result<Vec<Entry>> {
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| SimError::Config(format!("line {}: expected 'key = value'", i + 1)))?;
        let key = k.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(SimError::Config(format!("line {}: bad key '{key}'", i + 1)));
        }
        if let Some(prev) = out.iter().find(|e| e.key == key) {
            return Err(SimError::Config(format!("line {}: key '{key}' already set on line {}", i + 1, prev.line)));
        }
        out.push(Entry { key: key.to_string(), value: v.trim().to_string(), line: i + 1 });
    }
    Ok(out)
}

/// Renders entries back to text, one per line.
pub fn render<'a>(entries: impl IntoIterator<Item = (&'a str, String)>) -> String {
    let mut s = String::new();
    for (k, v) in entries {
        s.push_str(k);
        s.push_str(" = ");
        s.push_str(&v);
        s.push('\n');
    }
    s
}

pub fn parse_value<T: std::str::FromStr>(e: &Entry) -> Result<T> {
    e.value
        .parse()
        .map_err(|_| SimError::Config(format!("line {}: bad value '{}' for '{}'", e.line, e.value, e.key)))
}

pub fn parse_bool(e: &Entry) -> Result<bool> {
    match e.value.as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(SimError::Config(format!("line {}: bad boolean '{}' for '{}'", e.line, e.value, e.key))),
    }
}

/// Comma separated list.
pub fn parse_list<T: std::str::FromStr>(e: &Entry) -> Result<Vec<T>> {
    if e.value.trim().is_empty() {
        return Ok(Vec::new());
    }
    e.value
        .split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| SimError::Config(format!("line {}: bad list item '{}' for '{}'", e.line, p.trim(), e.key)))
        })
        .collect()
}

pub fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects() {
        let es = parse("# c\na.b = 1 # trailing\n\nc = x,y\n").unwrap();
        assert_eq!(es.len(), 2);
        assert_eq!(es[0].key, "a.b");
        assert_eq!(es[0].value, "1");
        assert_eq!(es[1].line, 4);
        assert_eq!(parse_list::<String>(&es[1]).unwrap(), vec!["x", "y"]);
        assert!(parse("a = 1\na = 2").is_err());
        assert!(parse("novalue").is_err());
        assert!(parse("a b = 1").is_err());
    }
}
