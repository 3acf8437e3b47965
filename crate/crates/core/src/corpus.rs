//! Tab-separated corpus and confirmation files.
//!
//! Corpus lines are `text [TAB weight] (TAB domain=label)*`. The second
//! column is a weight unless it contains `=`. Blank lines and lines starting
//! with `#` are ignored.
//!
//! Confirmation lines are `domain TAB label TAB keyword TAB token` or
//! `domain TAB label TAB frame TAB token TAB token`.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::trainer::{Confirmation, CorpusRecord, FeatureSpec};

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn content_lines(reader: impl BufRead) -> impl Iterator<Item = Result<(usize, String)>> {
    reader.lines().enumerate().filter_map(|(i, line)| {
        let n = i + 1;
        match line {
            Err(e) if e.kind() == std::io::ErrorKind::InvalidData => Some(Err(parse_error(n, "invalid UTF-8"))),
            Err(e) => Some(Err(e.into())),
            Ok(mut l) => {
                if l.ends_with('\r') {
                    l.pop();
                }
                if l.trim().is_empty() || l.starts_with('#') {
                    None
                } else {
                    Some(Ok((n, l)))
                }
            }
        }
    })
}

pub fn parse_corpus_line(line_no: usize, line: &str) -> Result<CorpusRecord> {
    let mut cols = line.split('\t');
    let text = cols.next().unwrap_or_default();
    let mut record = CorpusRecord::new(text);
    let mut rest = cols.peekable();
    if let Some(col) = rest.peek() {
        if !col.contains('=') {
            let w: f64 = col
                .trim()
                .parse()
                .map_err(|_| parse_error(line_no, format!("invalid weight `{col}`")))?;
            if !(w > 0.0 && w <= 1.0) {
                return Err(parse_error(line_no, format!("weight {w} outside (0, 1]")));
            }
            record.weight = w;
            rest.next();
        }
    }
    for col in rest {
        let (domain, label) = col
            .split_once('=')
            .map(|(d, l)| (d.trim(), l.trim()))
            .filter(|(d, l)| !d.is_empty() && !l.is_empty())
            .ok_or_else(|| parse_error(line_no, format!("malformed label column `{col}` (expected domain=label)")))?;
        if record.labels.insert(domain.to_owned(), label.to_owned()).is_some() {
            return Err(parse_error(line_no, format!("domain `{domain}` labeled twice")));
        }
    }
    Ok(record)
}

/// Parses a corpus, returning each record with its 1-based line number.
pub fn parse_corpus(reader: impl BufRead) -> Result<Vec<(usize, CorpusRecord)>> {
    content_lines(reader)
        .map(|l| {
            let (n, line) = l?;
            Ok((n, parse_corpus_line(n, &line)?))
        })
        .collect()
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusRecord>> {
    let file = File::open(path)?;
    Ok(parse_corpus(BufReader::new(file))?.into_iter().map(|(_, r)| r).collect())
}

pub fn write_corpus(records: &[CorpusRecord], mut out: impl Write) -> Result<()> {
    for r in records {
        let text = r.text.replace(['\t', '\n', '\r'], " ");
        out.write_all(text.as_bytes())?;
        if r.weight != 1.0 {
            write!(out, "\t{}", r.weight)?;
        }
        for (d, l) in &r.labels {
            write!(out, "\t{d}={l}")?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn parse_confirmations(reader: impl BufRead) -> Result<Vec<Confirmation>> {
    content_lines(reader)
        .map(|l| {
            let (n, line) = l?;
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            let feature = match cols.as_slice() {
                [_, _, "keyword", t] if !t.is_empty() => FeatureSpec::Keyword(t.to_lowercase()),
                [_, _, "frame", a, b] if !a.is_empty() && !b.is_empty() => {
                    FeatureSpec::Frame(a.to_lowercase(), b.to_lowercase())
                }
                _ => {
                    return Err(parse_error(
                        n,
                        "expected `domain<TAB>label<TAB>keyword<TAB>token` or `...<TAB>frame<TAB>token<TAB>token`",
                    ))
                }
            };
            if cols[0].is_empty() || cols[1].is_empty() {
                return Err(parse_error(n, "empty domain or label"));
            }
            Ok(Confirmation { domain: cols[0].to_owned(), label: cols[1].to_owned(), feature })
        })
        .collect()
}

pub fn read_confirmations(path: impl AsRef<Path>) -> Result<Vec<Confirmation>> {
    parse_confirmations(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_weights_labels_and_comments() {
        let input = "# header\noffice scissors\tunspsc=44121618\ttype=scissors\n\nsteel desk\t0.5\tunspsc=56101703\r\nbare text\n";
        let got = parse_corpus(input.as_bytes()).unwrap();
        assert_eq!(got.len(), 3);
        assert_eq!(got[0].0, 2);
        assert_eq!(got[0].1.labels["type"], "scissors");
        assert_eq!(got[1].1.weight, 0.5);
        assert_eq!(got[1].1.labels["unspsc"], "56101703");
        assert!(got[2].1.labels.is_empty());
    }

    #[test]
    fn malformed_label_reports_line() {
        let err = parse_corpus("ok\tunspsc=1\nbad\tunspsc=1\tnolabel\n".as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("malformed label"));
            }
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(parse_corpus("x\t2.0\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
        assert!(parse_corpus("x\td==\n".as_bytes()).is_ok());
        assert!(matches!(parse_corpus("x\t=v\n".as_bytes()), Err(Error::Parse { .. })));
        assert!(matches!(parse_corpus("x\ta=1\ta=2\n".as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn write_then_parse() {
        let records = vec![
            CorpusRecord::new("a b").label("unspsc", "1").label("color", "red"),
            CorpusRecord::new("c").with_weight(0.25),
        ];
        let mut buf = Vec::new();
        write_corpus(&records, &mut buf).unwrap();
        let back: Vec<_> = parse_corpus(buf.as_slice()).unwrap().into_iter().map(|(_, r)| r).collect();
        assert_eq!(back, records);
    }

    #[test]
    fn confirmations() {
        let input = "unspsc\tA\tkeyword\tScissors\ncolor\tred\tframe\tred\tpen\n";
        let got = parse_confirmations(input.as_bytes()).unwrap();
        assert_eq!(got[0].feature, FeatureSpec::Keyword("scissors".into()));
        assert_eq!(got[1].feature, FeatureSpec::Frame("red".into(), "pen".into()));
        assert!(parse_confirmations("unspsc\tA\tframe\tx\n".as_bytes()).is_err());
    }
}
