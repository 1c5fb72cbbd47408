//! Line-oriented text format.
//!
//! ```text
//! UG <N> <|V|> <|E|>
//! <v> <w> <weight> <pi(0)> ... <pi(N-1)>
//! ```
//!
//! Weights use 17 significant digits. Blank lines and lines starting with
//! `#` are ignored. A labeling file is `LABELING <|V|>` followed by one label
//! per line, and a label map is `PERM <N>` followed by `ρ(0) .. ρ(N-1)`
//! on one line.

use std::fmt::Write as _;

use super::{Labeling, Permutation, UgEdge, UgInstance};
use crate::error::{Error, Result};

pub(crate) fn parse_error<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line, msg: msg.into() })
}

pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub(crate) fn parse_field<T: std::str::FromStr>(line: usize, token: Option<&str>, what: &str) -> Result<T> {
    match token {
        None => parse_error(line, format!("missing {what}")),
        Some(tok) => tok
            .parse()
            .or_else(|_| parse_error(line, format!("cannot parse {what} from {tok:?}"))),
    }
}

pub fn write_ug(u: &UgInstance) -> String {
    let mut out = format!("UG {} {} {}\n", u.labels(), u.num_vertices(), u.edges().len());
    for e in u.edges() {
        write!(out, "{} {} {:.16e}", e.v, e.w, e.weight).unwrap();
        for &p in e.pi.as_slice() {
            write!(out, " {p}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_ug(text: &str) -> Result<UgInstance> {
    let mut lines = content_lines(text);
    let Some((ln, header)) = lines.next() else {
        return parse_error(0, "empty input");
    };
    let mut tok = header.split_whitespace();
    if tok.next() != Some("UG") {
        return parse_error(ln, "expected header `UG N |V| |E|`");
    }
    let labels: usize = parse_field(ln, tok.next(), "N")?;
    let vertices: usize = parse_field(ln, tok.next(), "|V|")?;
    let count: usize = parse_field(ln, tok.next(), "|E|")?;
    let mut edges = Vec::with_capacity(count);
    for (ln, line) in lines {
        let mut tok = line.split_whitespace();
        let v = parse_field(ln, tok.next(), "v")?;
        let w = parse_field(ln, tok.next(), "w")?;
        let weight = parse_field(ln, tok.next(), "weight")?;
        let map: Vec<u32> = tok
            .map(|t| t.parse().or_else(|_| parse_error(ln, format!("bad label {t:?}"))))
            .collect::<Result<_>>()?;
        if map.len() != labels {
            return parse_error(ln, format!("permutation has {} entries, expected {labels}", map.len()));
        }
        let pi = Permutation::new(map).or_else(|e| parse_error(ln, e.to_string()))?;
        edges.push(UgEdge { v, w, weight, pi });
    }
    if edges.len() != count {
        return parse_error(0, format!("header announces {count} edges, found {}", edges.len()));
    }
    UgInstance::new(labels, vertices, edges)
}

pub fn write_labeling(lam: &Labeling) -> String {
    let mut out = format!("LABELING {}\n", lam.len());
    for l in &lam.0 {
        writeln!(out, "{l}").unwrap();
    }
    out
}

pub fn parse_labeling(text: &str) -> Result<Labeling> {
    let mut lines = content_lines(text);
    let Some((ln, header)) = lines.next() else {
        return parse_error(0, "empty input");
    };
    let mut tok = header.split_whitespace();
    if tok.next() != Some("LABELING") {
        return parse_error(ln, "expected header `LABELING |V|`");
    }
    let count: usize = parse_field(ln, tok.next(), "|V|")?;
    let labels: Vec<u32> = lines
        .map(|(ln, l)| parse_field(ln, Some(l), "label"))
        .collect::<Result<_>>()?;
    if labels.len() != count {
        return parse_error(0, format!("expected {count} labels, found {}", labels.len()));
    }
    Ok(Labeling(labels))
}

pub fn write_permutation(rho: &Permutation) -> String {
    let body: Vec<String> = rho.as_slice().iter().map(|p| p.to_string()).collect();
    format!("PERM {}\n{}\n", rho.len(), body.join(" "))
}

pub fn parse_permutation(text: &str) -> Result<Permutation> {
    let mut lines = content_lines(text);
    let Some((ln, header)) = lines.next() else {
        return parse_error(0, "empty input");
    };
    let mut tok = header.split_whitespace();
    if tok.next() != Some("PERM") {
        return parse_error(ln, "expected header `PERM N`");
    }
    let n: usize = parse_field(ln, tok.next(), "N")?;
    let mut map = Vec::with_capacity(n);
    let mut last = ln;
    for (ln, line) in lines {
        last = ln;
        for t in line.split_whitespace() {
            map.push(parse_field::<u32>(ln, Some(t), "label")?);
        }
    }
    if map.len() != n {
        return parse_error(last, format!("expected {n} entries, found {}", map.len()));
    }
    Permutation::new(map).or_else(|e| parse_error(last, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unique_games::plant_instance;

    #[test]
    fn round_trip() {
        let u = plant_instance(5, 3, 0.2, 1.0, 9).unwrap().instance;
        let text = write_ug(&u);
        assert!(text.starts_with("UG 3 5 "));
        assert_eq!(parse_ug(&text).unwrap(), u);
        let lam = Labeling(vec![0, 2, 1, 1, 0]);
        assert_eq!(parse_labeling(&write_labeling(&lam)).unwrap(), lam);
        let rho = Permutation::new(vec![2, 0, 1]).unwrap();
        assert_eq!(write_permutation(&rho), "PERM 3\n2 0 1\n");
        assert_eq!(parse_permutation(&write_permutation(&rho)).unwrap(), rho);
        assert!(parse_permutation("PERM 3\n0 0 1\n").is_err());
    }

    #[test]
    fn tampered_weight_detected() {
        let u = plant_instance(4, 2, 0.0, 1.0, 1).unwrap().instance;
        let text = write_ug(&u);
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut fields: Vec<String> = lines[1].split(' ').map(String::from).collect();
        fields[2] = "0.9".into();
        lines[1] = fields.join(" ");
        let err = parse_ug(&lines.join("\n")).unwrap_err();
        assert!(err.to_string().contains("sum to"), "{err}");
    }

    #[test]
    fn malformed_lines_report_position() {
        let err = parse_ug("UG 2 2 1\n0 1 1.0 0 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_ug("UG 2 2 1\n0 1 x 0 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
