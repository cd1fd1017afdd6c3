//! ARFF reader and writer for the dense numeric/nominal subset.
//!
//! `string`, `date` and `relational` attributes and sparse `{...}` data rows
//! are rejected. `?` marks a missing value. The class is the last attribute.

use std::io::{BufRead, BufReader, Read, Write};

use crate::dataset::{parse_cell, Attribute, AttributeKind, Dataset, Schema, Value};
use crate::error::{Error, Result};

/// Splits on `sep` outside single or double quotes, unquoting each token.
fn split_quoted(text: &str, sep: char, line: usize) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    let mut was_quoted = false;
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) if c == '\\' => match chars.next() {
                Some(e) => cur.push(e),
                None => return Err(Error::parse(line, "dangling escape")),
            },
            Some(_) => cur.push(c),
            None if c == '\'' || c == '"' => {
                if cur.trim().is_empty() {
                    cur.clear();
                }
                quote = Some(c);
                was_quoted = true;
            }
            None if c == sep => {
                out.push(finish_token(&cur, was_quoted));
                cur.clear();
                was_quoted = false;
            }
            None if was_quoted && c.is_whitespace() => {}
            None => cur.push(c),
        }
    }
    if quote.is_some() {
        return Err(Error::parse(line, "unterminated quote"));
    }
    out.push(finish_token(&cur, was_quoted));
    Ok(out)
}

fn finish_token(raw: &str, quoted: bool) -> String {
    if quoted {
        raw.to_string()
    } else {
        raw.trim().to_string()
    }
}

/// Reads one (possibly quoted) word from the front of `text`.
fn take_word(text: &str, line: usize) -> Result<(String, &str)> {
    let text = text.trim_start();
    let mut chars = text.char_indices();
    match chars.next() {
        None => Err(Error::parse(line, "expected a name")),
        Some((_, q)) if q == '\'' || q == '"' => {
            let mut word = String::new();
            let mut escaped = false;
            for (i, c) in chars {
                if escaped {
                    word.push(c);
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == q {
                    return Ok((word, &text[i + 1..]));
                } else {
                    word.push(c);
                }
            }
            Err(Error::parse(line, "unterminated quote"))
        }
        Some(_) => {
            let end = text.find(char::is_whitespace).unwrap_or(text.len());
            Ok((text[..end].to_string(), &text[end..]))
        }
    }
}

fn keyword(line: &str) -> Option<(String, &str)> {
    let rest = line.strip_prefix('@')?;
    let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
    Some((rest[..end].to_ascii_lowercase(), &rest[end..]))
}

fn parse_attribute(rest: &str, line: usize) -> Result<Attribute> {
    let (name, rest) = take_word(rest, line)?;
    let kind = rest.trim();
    if let Some(inner) = kind.strip_prefix('{') {
        let inner = inner
            .strip_suffix('}')
            .ok_or_else(|| Error::parse(line, format!("attribute `{name}`: unclosed value list")))?;
        let values = split_quoted(inner, ',', line)?;
        if values.iter().any(String::is_empty) {
            return Err(Error::parse(line, format!("attribute `{name}`: empty nominal value")));
        }
        return Ok(Attribute {
            name,
            kind: AttributeKind::Nominal(values),
        });
    }
    let type_word = kind.split_whitespace().next().unwrap_or("").to_ascii_lowercase();
    match type_word.as_str() {
        "numeric" | "real" | "integer" => Ok(Attribute::numeric(name)),
        "" => Err(Error::parse(line, format!("attribute `{name}` has no type"))),
        other => Err(Error::parse(
            line,
            format!("attribute `{name}`: unsupported type `{other}` (only numeric and nominal)"),
        )),
    }
}

/// Parses an ARFF document into a dataset named after its relation.
pub fn parse_arff<R: Read>(input: R) -> Result<Dataset> {
    let reader = BufReader::new(input);
    let mut relation: Option<String> = None;
    let mut attributes: Vec<Attribute> = Vec::new();
    let mut schema: Option<Schema> = None;
    let mut rows = Vec::new();

    for (i, raw) in reader.lines().enumerate() {
        let line = i + 1;
        let raw = raw.map_err(|e| Error::parse(line, e.to_string()))?;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('%') {
            continue;
        }
        if let Some(schema) = &schema {
            if text.starts_with('{') {
                return Err(Error::parse(line, "sparse ARFF rows are not supported"));
            }
            let cells = split_quoted(text, ',', line)?;
            if cells.len() != schema.attributes().len() {
                return Err(Error::parse(
                    line,
                    format!(
                        "row has {} values, {} attributes declared",
                        cells.len(),
                        schema.attributes().len()
                    ),
                ));
            }
            let row = cells
                .iter()
                .zip(schema.attributes())
                .map(|(cell, attr)| parse_cell(cell, attr).map_err(|m| Error::parse(line, m)))
                .collect::<Result<Vec<Value>>>()?;
            rows.push(row);
            continue;
        }
        match keyword(text) {
            Some((kw, rest)) if kw == "relation" => {
                relation = Some(take_word(rest, line)?.0);
            }
            Some((kw, rest)) if kw == "attribute" => {
                attributes.push(parse_attribute(rest, line)?);
            }
            Some((kw, _)) if kw == "data" => {
                if relation.is_none() {
                    return Err(Error::parse(line, "@data before @relation"));
                }
                schema = Some(
                    Schema::with_last_class(std::mem::take(&mut attributes))
                        .map_err(|e| Error::parse(line, e.to_string()))?,
                );
            }
            Some((kw, _)) => {
                return Err(Error::parse(line, format!("unknown declaration `@{kw}`")));
            }
            None => return Err(Error::parse(line, format!("unexpected text `{text}` in header"))),
        }
    }
    let schema = schema.ok_or_else(|| Error::parse(0, "missing @data section"))?;
    Dataset::new(schema, rows, relation.unwrap_or_default())
}

fn quote_if_needed(s: &str) -> String {
    let plain = !s.is_empty()
        && s != "?"
        && !s
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, ',' | '\'' | '"' | '{' | '}' | '%' | '\\'));
    if plain {
        s.to_string()
    } else {
        let escaped = s.replace('\\', "\\\\").replace('\'', "\\'");
        format!("'{escaped}'")
    }
}

/// Serializes a dataset as ARFF. The class attribute must be last.
pub fn write_arff<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    let schema = data.schema();
    if schema.class_index() + 1 != schema.attributes().len() {
        return Err(Error::Schema("ARFF output needs the class attribute last".into()));
    }
    let mut text = String::new();
    text.push_str(&format!("@relation {}\n\n", quote_if_needed(data.name())));
    for attr in schema.attributes() {
        let kind = match &attr.kind {
            AttributeKind::Numeric => "numeric".to_string(),
            AttributeKind::Nominal(values) => {
                let vs: Vec<String> = values.iter().map(|v| quote_if_needed(v)).collect();
                format!("{{{}}}", vs.join(","))
            }
        };
        text.push_str(&format!("@attribute {} {kind}\n", quote_if_needed(&attr.name)));
    }
    text.push_str("\n@data\n");
    for row in data.rows() {
        let cells: Vec<String> = row
            .iter()
            .zip(schema.attributes())
            .map(|(v, attr)| match (v, &attr.kind) {
                (Value::Missing, _) => "?".to_string(),
                (Value::Numeric(x), _) => x.to_string(),
                (Value::Nominal(k), AttributeKind::Nominal(values)) => quote_if_needed(&values[*k]),
                (Value::Nominal(k), AttributeKind::Numeric) => k.to_string(),
            })
            .collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<arff output>", e))
}
