//! Line tokenizer and cursor shared by the text formats (rules, properties,
//! scenarios, channel effects, priorities).

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(f64),
    Sym(&'static str),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(n) => write!(f, "`{n}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spanned {
    pub tok: Tok,
    pub col: usize,
}

const SYMS: [&str; 18] = [
    "->", "..", "!=", "<=", ">=", "=", "<", ">", "{", "}", "[", "]", ",", ":", "@", "(", ")", "%",
];

/// Splits one line into tokens. `#` starts a comment. Returns the 1-based
/// column of the offending character on failure.
pub fn lex_line(line: &str) -> Result<Vec<Spanned>, (usize, String)> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            break;
        }
        let starts_number =
            c.is_ascii_digit() || ((c == '-' || c == '+') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()));
        if starts_number {
            let mut j = i + 1;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            if j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
            }
            let text: String = chars[i..j].iter().collect();
            let n: f64 = text.parse().map_err(|_| (col, format!("bad number `{text}`")))?;
            out.push(Spanned { tok: Tok::Num(n), col });
            i = j;
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut j = i + 1;
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_' || chars[j] == '.') {
                // stop before a range separator such as `a..b`
                if chars[j] == '.' && chars.get(j + 1) == Some(&'.') {
                    break;
                }
                j += 1;
            }
            let mut text: String = chars[i..j].iter().collect();
            while text.ends_with('.') {
                text.pop();
                j -= 1;
            }
            out.push(Spanned {
                tok: Tok::Ident(text),
                col,
            });
            i = j;
            continue;
        }
        if c == '℃' {
            out.push(Spanned {
                tok: Tok::Ident("C".into()),
                col,
            });
            i += 1;
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                out.push(Spanned { tok: Tok::Sym(s), col });
                i += s.chars().count();
            }
            None => return Err((col, format!("unexpected character `{c}`"))),
        }
    }
    Ok(out)
}

/// Token cursor over a single line.
pub struct Cursor {
    toks: Vec<Spanned>,
    pos: usize,
    end_col: usize,
}

impl Cursor {
    pub fn new(toks: Vec<Spanned>, line_len: usize) -> Self {
        Cursor {
            toks,
            pos: 0,
            end_col: line_len + 1,
        }
    }

    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    pub fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |s| s.col)
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub fn describe_next(&self) -> String {
        match self.peek() {
            Some(t) => t.to_string(),
            None => "end of line".into(),
        }
    }

    /// Case-insensitive keyword test.
    pub fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s.eq_ignore_ascii_case(kw))
    }

    pub fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn is_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym)
    }

    pub fn eat_sym(&mut self, sym: &str) -> bool {
        if self.is_sym(sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn ident(&mut self) -> Option<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Some(s)
            }
            _ => None,
        }
    }

    pub fn num(&mut self) -> Option<f64> {
        match self.peek() {
            Some(Tok::Num(n)) => {
                let n = *n;
                self.pos += 1;
                Some(n)
            }
            _ => None,
        }
    }

    pub fn save(&self) -> usize {
        self.pos
    }

    pub fn restore(&mut self, pos: usize) {
        self.pos = pos;
    }
}

const VALUE_UNITS: [&str; 10] = ["c", "f", "ppm", "lux", "db", "percent", "pct", "degc", "degf", "mm"];

/// Consumes an optional unit after a numeric value (`80%`, `1000 ppm`, `16C`).
pub fn skip_value_unit(c: &mut Cursor) {
    if c.eat_sym("%") {
        return;
    }
    if let Some(Tok::Ident(s)) = c.peek() {
        let lower = s.to_ascii_lowercase();
        if VALUE_UNITS.contains(&lower.as_str()) {
            c.next();
        }
    }
}

/// Reads `<number>[unit]` where unit is s/sec/min/m/h/hr, returning seconds.
pub fn duration(c: &mut Cursor) -> Option<u32> {
    let n = c.num()?;
    let mult = match c.peek() {
        Some(Tok::Ident(s)) => match s.to_ascii_lowercase().as_str() {
            "s" | "sec" | "secs" | "second" | "seconds" => 1.0,
            "m" | "min" | "mins" | "minute" | "minutes" => 60.0,
            "h" | "hr" | "hrs" | "hour" | "hours" => 3600.0,
            _ => return (n >= 0.0).then(|| n.round() as u32),
        },
        _ => return (n >= 0.0).then(|| n.round() as u32),
    };
    c.next();
    let v = (n * mult).round();
    (v >= 0.0).then_some(v as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex_line(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn ranges_and_dotted_names() {
        assert_eq!(
            toks("ATTR t.value [0..40] C"),
            vec![
                Tok::Ident("ATTR".into()),
                Tok::Ident("t.value".into()),
                Tok::Sym("["),
                Tok::Num(0.0),
                Tok::Sym(".."),
                Tok::Num(40.0),
                Tok::Sym("]"),
                Tok::Ident("C".into()),
            ]
        );
    }

    #[test]
    fn arrows_signs_and_comments() {
        assert_eq!(
            toks("a=b -> x -1 +2 # tail"),
            vec![
                Tok::Ident("a".into()),
                Tok::Sym("="),
                Tok::Ident("b".into()),
                Tok::Sym("->"),
                Tok::Ident("x".into()),
                Tok::Num(-1.0),
                Tok::Num(2.0),
            ]
        );
    }

    #[test]
    fn durations() {
        let mut c = Cursor::new(lex_line("15min 10 min 900 1.5h").unwrap(), 0);
        assert_eq!(duration(&mut c), Some(900));
        assert_eq!(duration(&mut c), Some(600));
        assert_eq!(duration(&mut c), Some(900));
        assert_eq!(duration(&mut c), Some(5400));
    }

    #[test]
    fn bad_character() {
        assert_eq!(lex_line("a $ b").unwrap_err().0, 3);
    }
}
