//! Line-oriented fact files.
//!
//! ```text
//! # comment
//! ex:agent/alpha ex:usesPolicy ex:policy/FAST
//! ex:window/3 ex:confidence 0.88^^real
//! ex:constraint/land geo:asWKT "POLYGON((0 0,1 0,1 1,0 0))"^^wkt
//! - ex:constraint/old ex:kind "soft"
//! = ex:window/2 ex:confidence 0.5^^real
//! ```
//!
//! A leading `-` retracts the fact, `=` replaces every current value of the
//! subject/predicate pair, `+` (or nothing) asserts. Quoted literals may carry
//! a `^^real`, `^^int`, `^^wkt`, `^^json` or `^^datetime` suffix; unsuffixed
//! quoted text is a plain string. Unquoted objects containing `:` are entity
//! ids; other unquoted tokens must carry a suffix unless they are plain
//! integers or reals.

use super::{ChangeSet, EntityId, Fact, FactError, Value, WorldSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineOp {
    Assert,
    Retract,
    Replace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactLine {
    pub line: usize,
    pub op: LineOp,
    pub fact: Fact,
}

pub fn parse_fact_file(text: &str) -> Result<Vec<FactLine>, FactError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |reason: String| FactError::Parse { line, reason };
        let mut rest = raw.trim();
        if rest.is_empty() || rest.starts_with('#') {
            continue;
        }
        let op = match rest.as_bytes()[0] {
            b'-' => LineOp::Retract,
            b'=' => LineOp::Replace,
            b'+' => LineOp::Assert,
            _ => {
                // no prefix
                let fact = parse_triple(rest).map_err(err)?;
                out.push(FactLine {
                    line,
                    op: LineOp::Assert,
                    fact,
                });
                continue;
            }
        };
        rest = rest[1..].trim_start();
        let fact = parse_triple(rest).map_err(err)?;
        out.push(FactLine { line, op, fact });
    }
    Ok(out)
}

fn parse_triple(text: &str) -> Result<Fact, String> {
    let (subject, rest) = take_token(text)?;
    let (predicate, rest) = take_token(rest)?;
    let object = rest.trim();
    if object.is_empty() {
        return Err("expected `subject predicate object`".into());
    }
    let subject = EntityId::parse(subject).map_err(|e| e.to_string())?;
    let predicate = EntityId::parse(predicate).map_err(|e| e.to_string())?;
    let object = parse_object(object)?;
    Ok(Fact {
        subject,
        predicate,
        object,
    })
}

fn take_token(text: &str) -> Result<(&str, &str), String> {
    let text = text.trim_start();
    match text.find(char::is_whitespace) {
        Some(end) => Ok((&text[..end], &text[end..])),
        None => Err("expected `subject predicate object`".into()),
    }
}

fn parse_object(text: &str) -> Result<Value, String> {
    let (body, suffix, quoted) = if let Some(inner) = text.strip_prefix('"') {
        let mut body = String::new();
        let mut chars = inner.char_indices();
        let mut close = None;
        while let Some((i, c)) = chars.next() {
            match c {
                '\\' => match chars.next() {
                    Some((_, 'n')) => body.push('\n'),
                    Some((_, '"')) => body.push('"'),
                    Some((_, '\\')) => body.push('\\'),
                    Some((_, other)) => return Err(format!("unknown escape `\\{other}`")),
                    None => return Err("dangling escape".into()),
                },
                '"' => {
                    close = Some(i);
                    break;
                }
                c => body.push(c),
            }
        }
        let close = close.ok_or("unterminated string literal")?;
        let tail = inner[close + 1..].trim();
        let suffix = match tail {
            "" => None,
            t => Some(t.strip_prefix("^^").ok_or_else(|| format!("trailing text `{t}`"))?),
        };
        (body, suffix, true)
    } else {
        if text.contains(char::is_whitespace) {
            return Err(format!("unquoted object `{text}` contains whitespace"));
        }
        match text.split_once("^^") {
            Some((b, s)) => (b.to_string(), Some(s), false),
            None => (text.to_string(), None, false),
        }
    };
    let num_err = |kind: &str, b: &str| format!("`{b}` is not a valid {kind}");
    match suffix {
        Some("real") => body
            .parse::<f64>()
            .map(Value::Real)
            .map_err(|_| num_err("real", &body)),
        Some("int") => body
            .parse::<i64>()
            .map(Value::Int)
            .map_err(|_| num_err("int", &body)),
        Some("wkt") => Ok(Value::Wkt(body)),
        Some("json") => Ok(Value::Json(body)),
        Some("datetime") => Ok(Value::DateTime(body)),
        Some("string") => Ok(Value::Str(body)),
        Some(other) => Err(format!("unknown literal type `^^{other}`")),
        None if quoted => Ok(Value::Str(body)),
        None if body.contains(':') => EntityId::parse(&body)
            .map(Value::Entity)
            .map_err(|e| e.to_string()),
        None => {
            if let Ok(i) = body.parse::<i64>() {
                Ok(Value::Int(i))
            } else if let Ok(x) = body.parse::<f64>() {
                Ok(Value::Real(x))
            } else {
                Err(format!("untyped literal `{body}`; quote it or add a ^^type suffix"))
            }
        }
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub(super) fn format_value(v: &Value) -> String {
    match v {
        Value::Entity(e) => e.to_string(),
        Value::Str(s) => quote(s),
        Value::Int(i) => format!("{i}^^int"),
        Value::Real(x) => format!("{x:?}^^real"),
        Value::DateTime(s) => format!("{}^^datetime", quote(s)),
        Value::Wkt(s) => format!("{}^^wkt", quote(s)),
        Value::Json(s) => format!("{}^^json", quote(s)),
    }
}

/// Serializes every fact of a snapshot, one per line, sorted.
pub fn write_fact_file(snapshot: &WorldSnapshot) -> String {
    let mut out = format!("# world version {}\n", snapshot.version());
    for f in snapshot.facts() {
        out.push_str(&f.to_string());
        out.push('\n');
    }
    out
}

impl ChangeSet {
    /// Builds a change set from parsed lines; `=` lines consult `snapshot`
    /// for the values they replace.
    pub fn from_lines(snapshot: &WorldSnapshot, lines: Vec<FactLine>) -> ChangeSet {
        let mut cs = ChangeSet::new();
        for l in lines {
            match l.op {
                LineOp::Assert => {
                    cs.assert(l.fact);
                }
                LineOp::Retract => {
                    cs.retract(l.fact);
                }
                LineOp::Replace => {
                    cs.replace(snapshot, l.fact.subject, l.fact.predicate, l.fact.object);
                }
            }
        }
        cs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_all_literal_kinds() {
        let text = r#"
# header
ex:window/3 ex:confidence 0.88^^real
ex:window/3 ex:index 3^^int
ex:constraint/land geo:asWKT "POLYGON((0 0,1 0,1 1,0 0))"^^wkt
ex:policy/FAST ex:priors "{\"corridor\": 0.5}"^^json
ex:window/0 time:hasBeginning "2024-06-01T00:00:00Z"^^datetime
ex:agent/a1 ex:usesPolicy ex:policy/FAST
ex:agent/a1 ex:name "Alpha one"
- ex:agent/a1 ex:name "old"
= ex:window/2 ex:confidence 0.5
"#;
        let lines = parse_fact_file(text).unwrap();
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[0].line, 3);
        assert_eq!(lines[0].fact.object, Value::Real(0.88));
        assert_eq!(lines[1].fact.object, Value::Int(3));
        assert!(matches!(lines[2].fact.object, Value::Wkt(_)));
        assert_eq!(lines[3].fact.object, Value::Json("{\"corridor\": 0.5}".into()));
        assert!(matches!(lines[4].fact.object, Value::DateTime(_)));
        assert!(matches!(lines[5].fact.object, Value::Entity(_)));
        assert_eq!(lines[6].fact.object, Value::Str("Alpha one".into()));
        assert_eq!(lines[7].op, LineOp::Retract);
        assert_eq!(lines[8].op, LineOp::Replace);
        assert_eq!(lines[8].fact.object, Value::Real(0.5));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_fact_file("ex:a ex:name \"x\"\nex:a ex:index 3^^bogus\n").unwrap_err();
        assert_eq!(
            err,
            FactError::Parse {
                line: 2,
                reason: "unknown literal type `^^bogus`".into()
            }
        );
        assert!(parse_fact_file("ex:a ex:name").is_err());
        assert!(parse_fact_file("ex:a ex:name \"open").is_err());
        assert!(parse_fact_file("ex:a ex:name bare").is_err());
    }

    fn arb_value() -> impl Strategy<Value = Value> {
        prop_oneof![
            "[a-z]{1,8}(/[a-z0-9]{1,4})?".prop_map(|l| Value::Entity(EntityId::ex(l))),
            "[ -~]{0,12}".prop_map(Value::Str),
            any::<i64>().prop_map(Value::Int),
            any::<f64>()
                .prop_filter("NaN compares by bits", |x| !x.is_nan())
                .prop_map(Value::Real),
            "[ -~\n]{0,12}".prop_map(Value::Wkt),
            "[ -~]{0,12}".prop_map(Value::Json),
        ]
    }

    proptest! {
        #[test]
        fn format_then_parse_is_identity(v in arb_value()) {
            let fact = Fact::new(EntityId::ex("s"), EntityId::ex("p"), v);
            let text = fact.to_string();
            let parsed = parse_fact_file(&text).unwrap();
            prop_assert_eq!(parsed.len(), 1);
            prop_assert_eq!(&parsed[0].fact, &fact);
        }
    }
}
