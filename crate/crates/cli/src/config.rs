//! INI-like configuration files.
//!
//! ```text
//! # comment
//! [system]
//! A = [["-1", "0"], ["t", "-2"]]
//! domain = (-10, 10)
//! ```
//!
//! Matrices are JSON arrays of rows whose cells are expression strings (or
//! plain numbers). A value whose brackets are not balanced continues on the
//! following lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ltvdiss::dissipativity::StorageCandidate;
use ltvdiss::ltv::Domain;
use ltvdiss::ph::PhRepresentation;
use ltvdiss::{LtvSystem, MatrixFunction, TimeExpr};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{file}:{line}: {message}")]
pub struct ParseError {
    pub file: String,
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed file: section name → key → raw value with its line number.
#[derive(Debug, Clone)]
pub struct Config {
    file: String,
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

fn bracket_depth(s: &str) -> i64 {
    let mut depth = 0;
    let mut in_str = false;
    let mut escaped = false;
    for ch in s.chars() {
        if in_str {
            match ch {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match ch {
            '"' => in_str = true,
            '[' | '(' => depth += 1,
            ']' | ')' => depth -= 1,
            _ => {}
        }
    }
    depth
}

impl Config {
    pub fn parse_str(text: &str, file: &str) -> Result<Self, ParseError> {
        let err = |line: usize, message: String| ParseError {
            file: file.to_string(),
            line,
            message,
        };
        let mut sections: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();
        let mut current: Option<String> = None;
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        while let Some((no, raw)) = lines.next() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                if bracket_depth(line) == 0 && rest.ends_with(']') && !rest.starts_with('[') {
                    let name = rest[..rest.len() - 1].trim().to_lowercase();
                    if name.is_empty() {
                        return Err(err(no, "empty section name".into()));
                    }
                    sections.entry(name.clone()).or_default();
                    current = Some(name);
                    continue;
                }
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(err(no, format!("expected `key = value`, found `{line}`")));
            };
            let Some(section) = current.clone() else {
                return Err(err(no, "key outside of any section".into()));
            };
            let mut value = value.trim().to_string();
            while bracket_depth(&value) > 0 {
                match lines.next() {
                    Some((_, more)) => {
                        value.push(' ');
                        value.push_str(more.trim());
                    }
                    None => return Err(err(no, "unbalanced brackets at end of file".into())),
                }
            }
            let key = key.trim().to_string();
            let map = sections.get_mut(&section).expect("created with the header");
            if map.contains_key(&key) {
                return Err(err(no, format!("duplicate key `{key}` in [{section}]")));
            }
            map.insert(key, Entry { value, line: no });
        }
        Ok(Config {
            file: file.to_string(),
            sections,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ParseError> {
        let text = std::fs::read_to_string(path).map_err(|e| ParseError {
            file: path.display().to_string(),
            line: 0,
            message: format!("cannot read file: {e}"),
        })?;
        Self::parse_str(&text, &path.display().to_string())
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section)?.get(key)
    }

    fn err(&self, line: usize, message: String) -> ParseError {
        ParseError {
            file: self.file.clone(),
            line,
            message,
        }
    }

    fn missing(&self, section: &str, key: &str) -> ParseError {
        self.err(0, format!("missing key `{key}` in [{section}]"))
    }

    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.entry(section, key).map(|e| e.value.as_str())
    }

    pub fn number(&self, section: &str, key: &str) -> Result<Option<f64>, ParseError> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        parse_number(&e.value)
            .map(Some)
            .map_err(|m| self.err(e.line, format!("[{section}] {key}: {m}")))
    }

    pub fn matrix(&self, section: &str, key: &str) -> Result<Option<MatrixFunction>, ParseError> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        parse_matrix(&e.value)
            .map(Some)
            .map_err(|m| self.err(e.line, format!("[{section}] {key}: {m}")))
    }

    pub fn require_matrix(&self, section: &str, key: &str) -> Result<MatrixFunction, ParseError> {
        self.matrix(section, key)?.ok_or_else(|| self.missing(section, key))
    }

    pub fn domain(&self, section: &str, key: &str) -> Result<Option<Domain>, ParseError> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        parse_domain(&e.value)
            .map(Some)
            .map_err(|m| self.err(e.line, format!("[{section}] {key}: {m}")))
    }

    pub fn system(&self) -> Result<LtvSystem, ParseError> {
        let line = self.entry("system", "A").map_or(0, |e| e.line);
        let get = |k| self.require_matrix("system", k);
        let domain = self.domain("system", "domain")?.unwrap_or_else(Domain::full);
        LtvSystem::new(get("A")?, get("B")?, get("C")?, get("D")?, domain)
            .map_err(|e| self.err(line, e.to_string()))
    }

    pub fn storage(&self) -> Result<Option<StorageCandidate>, ParseError> {
        let Some(q) = self.matrix("storage", "Q")? else { return Ok(None) };
        let line = self.entry("storage", "Q").map_or(0, |e| e.line);
        StorageCandidate::new(q).map(Some).map_err(|e| self.err(line, e.to_string()))
    }

    pub fn ph(&self) -> Result<Option<PhRepresentation>, ParseError> {
        if !self.has_section("ph") {
            return Ok(None);
        }
        let get = |k| self.require_matrix("ph", k);
        let line = self.entry("ph", "Q").map_or(0, |e| e.line);
        let domain = self.domain("ph", "domain")?.unwrap_or_else(Domain::full);
        PhRepresentation::new(
            get("Q")?,
            get("K")?,
            get("J")?,
            get("R")?,
            get("G")?,
            get("P")?,
            get("S")?,
            get("N")?,
            domain,
        )
        .map(Some)
        .map_err(|e| self.err(line, e.to_string()))
    }
}

pub fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim().replace('−', "-");
    match s.as_str() {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse::<f64>().map_err(|_| format!("not a number: `{s}`")),
    }
}

/// `(lo, hi)`, `[lo, hi]` or `lo:hi`.
pub fn parse_domain(s: &str) -> Result<Domain, String> {
    let t = s.trim();
    let inner = t
        .strip_prefix(['(', '['])
        .and_then(|r| r.strip_suffix([')', ']']))
        .unwrap_or(t);
    let parts: Vec<&str> = if inner.contains(',') {
        inner.split(',').collect()
    } else {
        inner.split(':').collect()
    };
    if parts.len() != 2 {
        return Err(format!("expected an interval `(lo, hi)`, found `{s}`"));
    }
    let (lo, hi) = (parse_number(parts[0])?, parse_number(parts[1])?);
    if !(lo < hi) {
        return Err(format!("empty interval ({lo}, {hi})"));
    }
    Ok(Domain::new(lo, hi))
}

fn cell_source(v: &Value) -> Result<String, String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(format!("cell must be a string or number, found {other}")),
    }
}

/// JSON rows of expression strings. A bare string or number is a 1x1 matrix.
pub fn parse_matrix(s: &str) -> Result<MatrixFunction, String> {
    let v: Value = serde_json::from_str(s).map_err(|e| format!("malformed matrix: {e}"))?;
    let rows: Vec<Vec<Value>> = match v {
        Value::Array(rows) => rows
            .into_iter()
            .map(|r| match r {
                Value::Array(cells) => Ok(cells),
                other => Err(format!("row must be an array, found {other}")),
            })
            .collect::<Result<_, _>>()?,
        scalar => vec![vec![scalar]],
    };
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let mut r = Vec::with_capacity(row.len());
        for (j, cell) in row.iter().enumerate() {
            let src = cell_source(cell)?;
            let e = TimeExpr::parse(&src).map_err(|e| format!("cell ({i}, {j}) `{src}`: {e}"))?;
            r.push(e);
        }
        out.push(r);
    }
    MatrixFunction::from_rows(out).map_err(|e| e.to_string())
}

/// A column of expressions: a JSON list (of scalars or 1-element rows), a
/// single JSON scalar, or a bare expression.
pub fn parse_column(s: &str) -> Result<Vec<TimeExpr>, String> {
    let parse = |src: String| TimeExpr::parse(&src).map_err(|e| format!("`{src}`: {e}"));
    match serde_json::from_str::<Value>(s) {
        Ok(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let cell = match v {
                    Value::Array(r) if r.len() == 1 => &r[0],
                    other => other,
                };
                cell_source(cell)
                    .and_then(parse)
                    .map_err(|m| format!("entry {i}: {m}"))
            })
            .collect(),
        Ok(v @ (Value::String(_) | Value::Number(_))) => Ok(vec![parse(cell_source(&v)?)?]),
        Ok(other) => Err(format!("expected an expression or a list, found {other}")),
        Err(_) => Ok(vec![parse(s.trim().to_string())?]),
    }
}

/// Inverse of [`parse_matrix`]. Numeric functions are replaced by their
/// piecewise-linear interpolant on `grid`.
pub fn format_matrix(f: &MatrixFunction, grid: &[f64]) -> ltvdiss::Result<String> {
    let sym;
    let f = if f.is_symbolic() {
        f
    } else {
        sym = f.interpolate(grid)?;
        &sym
    };
    let mut s = String::from("[");
    for i in 0..f.rows() {
        s.push_str(if i == 0 { "[" } else { ", [" });
        for j in 0..f.cols() {
            if j > 0 {
                s.push_str(", ");
            }
            let e = f.entry(i, j).expect("symbolic");
            s.push_str(&Value::String(e.to_string()).to_string());
        }
        s.push(']');
    }
    s.push(']');
    Ok(s)
}

pub fn format_domain(d: Domain) -> String {
    let b = |x: f64| {
        if x.is_infinite() {
            if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
        } else {
            format!("{x:?}")
        }
    };
    format!("({}, {})", b(d.lo), b(d.hi))
}

pub fn format_system(sys: &LtvSystem, grid: &[f64]) -> ltvdiss::Result<String> {
    let mut s = String::from("[system]\n");
    for (k, f) in [("A", sys.a()), ("B", sys.b()), ("C", sys.c()), ("D", sys.d())] {
        let _ = writeln!(s, "{k} = {}", format_matrix(f, grid)?);
    }
    let _ = writeln!(s, "domain = {}", format_domain(sys.domain()));
    Ok(s)
}

pub fn format_ph(ph: &PhRepresentation, grid: &[f64]) -> ltvdiss::Result<String> {
    let mut s = String::from("[ph]\n");
    let fields = [
        ("Q", &ph.q),
        ("K", &ph.k),
        ("J", &ph.j),
        ("R", &ph.r),
        ("G", &ph.g),
        ("P", &ph.p),
        ("S", &ph.s),
        ("N", &ph.n),
    ];
    for (k, f) in fields {
        let _ = writeln!(s, "{k} = {}", format_matrix(f, grid)?);
    }
    let _ = writeln!(s, "domain = {}", format_domain(ph.domain));
    Ok(s)
}

/// Loads the system from a config file.
pub fn load_system(path: &Path) -> Result<LtvSystem, ParseError> {
    Config::load(path)?.system()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = "
# scalar test system
[system]
A = [[\"-1\"]]
B = [[\"1\"]]
C = [[1]]
D = [[\"0\"]]
domain = (−10,10)
";

    #[test]
    fn minimal_system() {
        let c = Config::parse_str(SCALAR, "scalar.cfg").unwrap();
        let sys = c.system().unwrap();
        assert_eq!((sys.n(), sys.m()), (1, 1));
        assert_eq!(sys.domain(), Domain::new(-10.0, 10.0));
        assert_eq!(sys.a().eval(0.0).unwrap()[(0, 0)].re, -1.0);
    }

    #[test]
    fn multi_line_matrix() {
        let text = "[storage]\nQ = [[\"1\", \"0\"],\n     [\"0\", \"t\"]]\n";
        let c = Config::parse_str(text, "q.cfg").unwrap();
        let q = c.storage().unwrap().unwrap();
        assert_eq!(q.q().eval(2.0).unwrap()[(1, 1)].re, 2.0);
    }

    #[test]
    fn malformed_expression_names_the_cell() {
        let text = SCALAR.replace("[[\"1\"]]\nC", "[[\"1 +* t\"]]\nC");
        let c = Config::parse_str(&text, "bad.cfg").unwrap();
        let e = c.system().unwrap_err();
        assert_eq!(e.file, "bad.cfg");
        assert_eq!(e.line, 5);
        assert!(e.message.contains("B") && e.message.contains("(0, 0)"), "{e}");
    }

    #[test]
    fn structural_errors_have_lines() {
        let e = Config::parse_str("[system]\nA [[1]]\n", "x.cfg").unwrap_err();
        assert_eq!(e.line, 2);
        let e = Config::parse_str("A = 1\n", "x.cfg").unwrap_err();
        assert_eq!(e.line, 1);
        let e = Config::parse_str("[s]\nA = [[1]\n", "x.cfg").unwrap_err();
        assert!(e.message.contains("unbalanced"));
    }

    #[test]
    fn columns() {
        let c = parse_column("[\"1\", 2, [\"t\"]]").unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c[2].eval_real(3.0).unwrap(), 3.0);
        assert_eq!(parse_column("sin(t)").unwrap().len(), 1);
        assert_eq!(parse_column("1").unwrap()[0].eval_real(0.0).unwrap(), 1.0);
        assert!(parse_column("[[1, 2]]").is_err());
    }

    #[test]
    fn round_trip_through_text() {
        let c = Config::parse_str(SCALAR, "scalar.cfg").unwrap();
        let sys = c.system().unwrap();
        let text = format_system(&sys, &[0.0, 1.0]).unwrap();
        let back = Config::parse_str(&text, "out.cfg").unwrap().system().unwrap();
        assert_eq!(back.domain(), sys.domain());
        assert_eq!(back.a().eval(0.3).unwrap(), sys.a().eval(0.3).unwrap());
    }
}
