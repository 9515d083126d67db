// SPDX-License-Identifier: Apache-2.0

//! Minimal s-expression reader for solver responses.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Net parenthesis depth of `text`, ignoring parentheses inside string
/// literals and quoted symbols. A complete response has depth zero.
pub fn depth(text: &str) -> i64 {
    let mut d = 0;
    let mut in_string = false;
    let mut in_quoted = false;
    for c in text.chars() {
        match c {
            '"' if !in_quoted => in_string = !in_string,
            '|' if !in_string => in_quoted = !in_quoted,
            '(' if !in_string && !in_quoted => d += 1,
            ')' if !in_string && !in_quoted => d -= 1,
            _ => {}
        }
    }
    d
}

/// Parse every top-level expression in `text`.
pub fn parse_all(text: &str) -> Result<Vec<Sexp>, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut pos = 0;
    let mut out = Vec::new();
    loop {
        skip_ws(&chars, &mut pos);
        if pos >= chars.len() {
            return Ok(out);
        }
        out.push(parse_one(&chars, &mut pos)?);
    }
}

fn skip_ws(chars: &[char], pos: &mut usize) {
    while *pos < chars.len() {
        if chars[*pos].is_whitespace() {
            *pos += 1;
        } else if chars[*pos] == ';' {
            while *pos < chars.len() && chars[*pos] != '\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
}

fn parse_one(chars: &[char], pos: &mut usize) -> Result<Sexp, String> {
    skip_ws(chars, pos);
    match chars.get(*pos) {
        None => Err("unexpected end of input".into()),
        Some(')') => Err(format!("unexpected ')' at {pos}")),
        Some('(') => {
            *pos += 1;
            let mut items = Vec::new();
            loop {
                skip_ws(chars, pos);
                match chars.get(*pos) {
                    None => return Err("unterminated list".into()),
                    Some(')') => {
                        *pos += 1;
                        return Ok(Sexp::List(items));
                    }
                    _ => items.push(parse_one(chars, pos)?),
                }
            }
        }
        Some('"') => {
            let start = *pos;
            *pos += 1;
            loop {
                match chars.get(*pos) {
                    None => return Err("unterminated string".into()),
                    // A doubled quote is an escaped quote.
                    Some('"') if chars.get(*pos + 1) == Some(&'"') => *pos += 2,
                    Some('"') => {
                        *pos += 1;
                        break;
                    }
                    _ => *pos += 1,
                }
            }
            Ok(Sexp::Atom(chars[start..*pos].iter().collect()))
        }
        Some('|') => {
            let start = *pos;
            *pos += 1;
            while chars.get(*pos).is_some_and(|&c| c != '|') {
                *pos += 1;
            }
            if *pos >= chars.len() {
                return Err("unterminated quoted symbol".into());
            }
            *pos += 1;
            Ok(Sexp::Atom(chars[start..*pos].iter().collect()))
        }
        Some(_) => {
            let start = *pos;
            while chars
                .get(*pos)
                .is_some_and(|&c| !c.is_whitespace() && c != '(' && c != ')' && c != ';')
            {
                *pos += 1;
            }
            Ok(Sexp::Atom(chars[start..*pos].iter().collect()))
        }
    }
}

/// Decode a model value: numerals, `(- n)`, `#b...`, `#x...`,
/// `(_ bvN w)`, `true` and `false`.
pub fn value(s: &Sexp) -> Option<i64> {
    match s {
        Sexp::Atom(a) => {
            if let Some(bits) = a.strip_prefix("#b") {
                i64::from_str_radix(bits, 2).ok()
            } else if let Some(hex) = a.strip_prefix("#x") {
                i64::from_str_radix(hex, 16).ok()
            } else if a == "true" {
                Some(1)
            } else if a == "false" {
                Some(0)
            } else {
                a.parse().ok()
            }
        }
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(minus), x] if minus == "-" => value(x).map(|v| -v),
            [Sexp::Atom(us), Sexp::Atom(bv), _] if us == "_" => bv.strip_prefix("bv")?.parse().ok(),
            _ => None,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_get_value_output() {
        let text = "((i_0_0 #b00)\n (t_0_1 #x03) (l_0_1 (_ bv1 1)) (mstart_0 (- 5)) (gamma_0 true))";
        let parsed = parse_all(text).unwrap();
        assert_eq!(parsed.len(), 1);
        let Sexp::List(pairs) = &parsed[0] else { panic!() };
        let values: Vec<Option<i64>> = pairs
            .iter()
            .map(|p| match p {
                Sexp::List(kv) => value(&kv[1]),
                _ => None,
            })
            .collect();
        assert_eq!(values, vec![Some(0), Some(3), Some(1), Some(-5), Some(1)]);
    }

    #[test]
    fn depth_ignores_quoted_parens() {
        assert_eq!(depth("(error \"line 3: ( unexpected\")"), 0);
        assert_eq!(depth("((x #x3)"), 1);
        assert_eq!(depth("|a(b|"), 0);
    }

    #[test]
    fn strings_and_symbols_round_trip() {
        let parsed = parse_all("(error \"say \"\"hi\"\"\") |odd sym|").unwrap();
        assert_eq!(parsed[0].to_string(), "(error \"say \"\"hi\"\"\")");
        assert_eq!(parsed[1], Sexp::Atom("|odd sym|".into()));
        assert!(parse_all("(a (b)").is_err());
    }
}
