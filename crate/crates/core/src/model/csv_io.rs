//! Minimal RFC-4180 reader/writer that keeps track of quoting, which the
//! snapshot format needs: an empty unquoted field is Null while `""` is the
//! empty string.

use super::value::Value;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    pub text: String,
    pub quoted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSyntaxError {
    pub line: usize,
    pub message: String,
}

pub fn parse(input: &str) -> Result<Vec<Vec<Field>>, CsvSyntaxError> {
    let mut records = Vec::new();
    let mut record = Vec::new();
    let mut field = String::new();
    let mut quoted = false;
    let mut line = 1;
    let mut chars = input.chars().peekable();
    // start of a field, inside quotes, or after the closing quote
    #[derive(PartialEq)]
    enum State {
        Start,
        Unquoted,
        Quoted,
        AfterQuote,
    }
    let mut state = State::Start;
    let mut at_record_start = true;

    while let Some(c) = chars.next() {
        match state {
            State::Quoted => match c {
                '"' if chars.peek() == Some(&'"') => {
                    chars.next();
                    field.push('"');
                }
                '"' => state = State::AfterQuote,
                '\n' => {
                    line += 1;
                    field.push(c);
                }
                _ => field.push(c),
            },
            _ => match c {
                '"' if state == State::Start => {
                    quoted = true;
                    state = State::Quoted;
                    at_record_start = false;
                }
                '"' => {
                    return Err(CsvSyntaxError {
                        line,
                        message: "stray quote inside field".into(),
                    })
                }
                ',' => {
                    record.push(Field {
                        text: std::mem::take(&mut field),
                        quoted,
                    });
                    quoted = false;
                    state = State::Start;
                    at_record_start = false;
                }
                '\r' if chars.peek() == Some(&'\n') => {}
                '\n' | '\r' => {
                    record.push(Field {
                        text: std::mem::take(&mut field),
                        quoted,
                    });
                    records.push(std::mem::take(&mut record));
                    quoted = false;
                    state = State::Start;
                    at_record_start = true;
                    line += 1;
                }
                _ if state == State::AfterQuote => {
                    return Err(CsvSyntaxError {
                        line,
                        message: "characters after closing quote".into(),
                    })
                }
                _ => {
                    field.push(c);
                    state = State::Unquoted;
                    at_record_start = false;
                }
            },
        }
    }
    if state == State::Quoted {
        return Err(CsvSyntaxError {
            line,
            message: "unterminated quoted field".into(),
        });
    }
    if !at_record_start {
        record.push(Field { text: field, quoted });
        records.push(record);
    }
    Ok(records)
}

fn needs_quotes(s: &str) -> bool {
    s.is_empty()
        || s.contains([',', '"', '\n', '\r'])
        || s.starts_with(char::is_whitespace)
        || s.ends_with(char::is_whitespace)
}

pub fn encode_field(value: &Value, out: &mut String) {
    match value {
        Value::Null => {}
        Value::Text(s) if needs_quotes(s) => {
            out.push('"');
            out.push_str(&s.replace('"', "\"\""));
            out.push('"');
        }
        other => out.push_str(&other.to_text().unwrap_or_default()),
    }
}

pub fn encode_header<S: AsRef<str>>(names: &[S], out: &mut String) {
    for (i, n) in names.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let n = n.as_ref();
        if needs_quotes(n) {
            out.push('"');
            out.push_str(&n.replace('"', "\"\""));
            out.push('"');
        } else {
            out.push_str(n);
        }
    }
    out.push('\n');
}

pub fn encode_row(row: &[Value], out: &mut String) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        encode_field(v, out);
    }
    out.push('\n');
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(rec: &[Field]) -> Vec<(&str, bool)> {
        rec.iter().map(|f| (f.text.as_str(), f.quoted)).collect()
    }

    #[test]
    fn distinguishes_quoted_empty() {
        let recs = parse("a,b,c\n1,,\"\"\n").unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(texts(&recs[1]), vec![("1", false), ("", false), ("", true)]);
    }

    #[test]
    fn handles_embedded_quotes_and_newlines() {
        let recs = parse("x\r\n\"a \"\"b\"\"\nc\"\r\n").unwrap();
        assert_eq!(recs[1][0].text, "a \"b\"\nc");
    }

    #[test]
    fn missing_trailing_newline() {
        let recs = parse("a,b\n1,2").unwrap();
        assert_eq!(recs.len(), 2);
    }

    #[test]
    fn blank_line_is_one_empty_field() {
        let recs = parse("a\n\n\"\"\n").unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(texts(&recs[1]), vec![("", false)]);
        assert_eq!(texts(&recs[2]), vec![("", true)]);
    }

    #[test]
    fn rejects_unterminated() {
        assert!(parse("a\n\"oops\n").is_err());
    }

    #[test]
    fn encode_roundtrip() {
        let row = vec![
            Value::Null,
            Value::text(""),
            Value::text("x,y"),
            Value::text("say \"hi\""),
            Value::Integer(3),
        ];
        let mut s = String::new();
        encode_row(&row, &mut s);
        assert_eq!(s, ",\"\",\"x,y\",\"say \"\"hi\"\"\",3\n");
        let recs = parse(&s).unwrap();
        assert_eq!(
            texts(&recs[0]),
            vec![
                ("", false),
                ("", true),
                ("x,y", true),
                ("say \"hi\"", true),
                ("3", false)
            ]
        );
    }
}
