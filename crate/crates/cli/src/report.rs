//! Reports: a `key=value` block, a blank line, then free text.

use std::fmt::Write as _;

/// Formats with 9 significant digits, trailing zeros removed.
pub fn fmt9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        // exponent taken after rounding, so this keeps exactly 9 digits
        let fixed = format!("{:.*}", (8 - exp) as usize, x);
        trim_zeros(&fixed)
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

#[derive(Debug, Default, Clone)]
pub struct Report {
    pairs: Vec<(String, String)>,
    text: String,
}

impl Report {
    pub fn new(command: &str) -> Self {
        let mut r = Report::default();
        r.str("command", command);
        r
    }

    pub fn str(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        let v: String = value.into();
        debug_assert!(!v.contains('\n'), "values are single-line");
        self.pairs.push((key.to_string(), v));
        self
    }

    pub fn num(&mut self, key: &str, x: f64) -> &mut Self {
        self.str(key, fmt9(x))
    }

    pub fn int(&mut self, key: &str, x: usize) -> &mut Self {
        self.str(key, x.to_string())
    }

    pub fn flag(&mut self, key: &str, b: bool) -> &mut Self {
        self.str(key, if b { "true" } else { "false" })
    }

    pub fn line(&mut self, s: impl AsRef<str>) -> &mut Self {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.pairs {
            let _ = writeln!(s, "{k}={v}");
        }
        if !self.text.is_empty() {
            s.push('\n');
            s.push_str(&self.text);
        }
        s
    }
}

/// Reads the `key=value` block of a rendered report.
pub fn parse_summary(s: &str) -> Vec<(String, String)> {
    s.lines()
        .take_while(|l| !l.is_empty())
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
