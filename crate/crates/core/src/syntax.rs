//! A strict RFC 8259 syntax checker that reports where, and in what
//! parser state, a document stops being valid JSON. The lenient decoder
//! uses the state to propose repairs.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Container {
    Object,
    Array,
}

impl Container {
    pub(crate) fn closer(self) -> u8 {
        match self {
            Container::Object => b'}',
            Container::Array => b']',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Frame {
    pub kind: Container,
    pub open: usize,
    /// Start offset of the most recent value (member value or element).
    pub last_value_start: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Expect {
    Value,
    KeyOrEnd,
    Key,
    Colon,
    CommaOrEnd,
    ValueOrEnd,
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TokenKind {
    String { key: bool },
    Scalar,
    Close,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Token {
    pub start: usize,
    pub end: usize,
    pub kind: TokenKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct SyntaxError {
    pub offset: usize,
    pub expect: Expect,
    pub stack: Vec<Frame>,
    pub last_token: Option<Token>,
    pub last_comma: Option<usize>,
    /// Start of a string left open at `offset`, and whether it was a key.
    pub open_string: Option<(usize, bool)>,
}

struct Checker<'a> {
    b: &'a [u8],
    i: usize,
    expect: Expect,
    stack: Vec<Frame>,
    last_token: Option<Token>,
    last_comma: Option<usize>,
}

enum Scan {
    Done(usize),
    Fail { at: usize, open_string: bool },
}

pub(crate) fn check(text: &str) -> Result<(), SyntaxError> {
    Checker {
        b: text.as_bytes(),
        i: 0,
        expect: Expect::Value,
        stack: Vec::new(),
        last_token: None,
        last_comma: None,
    }
    .run()
}

impl Checker<'_> {
    fn fail(&self, at: usize, open_string: Option<(usize, bool)>) -> SyntaxError {
        SyntaxError {
            offset: at,
            expect: self.expect,
            stack: self.stack.clone(),
            last_token: self.last_token,
            last_comma: self.last_comma,
            open_string,
        }
    }

    fn after_value(&mut self) {
        self.expect = if self.stack.is_empty() {
            Expect::End
        } else {
            Expect::CommaOrEnd
        };
    }

    fn close(&mut self, at: usize, kind: Container) -> Result<(), SyntaxError> {
        match self.stack.last() {
            Some(f) if f.kind == kind => {
                self.stack.pop();
                self.last_token = Some(Token {
                    start: at,
                    end: at + 1,
                    kind: TokenKind::Close,
                });
                self.i = at + 1;
                self.after_value();
                Ok(())
            }
            _ => Err(self.fail(at, None)),
        }
    }

    fn begin_value(&mut self, at: usize) -> Result<(), SyntaxError> {
        if let Some(f) = self.stack.last_mut() {
            f.last_value_start = Some(at);
        }
        match self.b[at] {
            b'{' => {
                self.stack.push(Frame {
                    kind: Container::Object,
                    open: at,
                    last_value_start: None,
                });
                self.expect = Expect::KeyOrEnd;
                self.i = at + 1;
            }
            b'[' => {
                self.stack.push(Frame {
                    kind: Container::Array,
                    open: at,
                    last_value_start: None,
                });
                self.expect = Expect::ValueOrEnd;
                self.i = at + 1;
            }
            b'"' => {
                let end = self.string(at, false)?;
                self.i = end;
                self.after_value();
            }
            b'-' | b'0'..=b'9' => match number(self.b, at) {
                Scan::Done(end) => {
                    self.last_token = Some(Token {
                        start: at,
                        end,
                        kind: TokenKind::Scalar,
                    });
                    self.i = end;
                    self.after_value();
                }
                Scan::Fail { at: bad, .. } => return Err(self.fail(bad, None)),
            },
            b't' | b'f' | b'n' => {
                let lit: &[u8] = match self.b[at] {
                    b't' => b"true",
                    b'f' => b"false",
                    _ => b"null",
                };
                for (k, &c) in lit.iter().enumerate() {
                    if self.b.get(at + k) != Some(&c) {
                        return Err(self.fail(at + k, None));
                    }
                }
                self.last_token = Some(Token {
                    start: at,
                    end: at + lit.len(),
                    kind: TokenKind::Scalar,
                });
                self.i = at + lit.len();
                self.after_value();
            }
            _ => return Err(self.fail(at, None)),
        }
        Ok(())
    }

    fn string(&mut self, at: usize, key: bool) -> Result<usize, SyntaxError> {
        match string(self.b, at) {
            Scan::Done(end) => {
                self.last_token = Some(Token {
                    start: at,
                    end,
                    kind: TokenKind::String { key },
                });
                Ok(end)
            }
            Scan::Fail { at: bad, open_string } => {
                Err(self.fail(bad, open_string.then_some((at, key))))
            }
        }
    }

    fn run(mut self) -> Result<(), SyntaxError> {
        loop {
            while self.i < self.b.len() && matches!(self.b[self.i], b' ' | b'\t' | b'\n' | b'\r') {
                self.i += 1;
            }
            let at = self.i;
            let Some(&c) = self.b.get(at) else {
                return if self.expect == Expect::End {
                    Ok(())
                } else {
                    Err(self.fail(at, None))
                };
            };
            match self.expect {
                Expect::Value => self.begin_value(at)?,
                Expect::ValueOrEnd => {
                    if c == b']' {
                        self.close(at, Container::Array)?;
                    } else {
                        self.begin_value(at)?;
                    }
                }
                Expect::KeyOrEnd | Expect::Key => {
                    if c == b'"' {
                        self.i = self.string(at, true)?;
                        self.expect = Expect::Colon;
                    } else if c == b'}' && self.expect == Expect::KeyOrEnd {
                        self.close(at, Container::Object)?;
                    } else {
                        return Err(self.fail(at, None));
                    }
                }
                Expect::Colon => {
                    if c != b':' {
                        return Err(self.fail(at, None));
                    }
                    self.i = at + 1;
                    self.expect = Expect::Value;
                }
                Expect::CommaOrEnd => {
                    let top = self.stack.last().expect("inside a container").kind;
                    match (c, top) {
                        (b',', Container::Object) => {
                            self.last_comma = Some(at);
                            self.expect = Expect::Key;
                            self.i = at + 1;
                        }
                        (b',', Container::Array) => {
                            self.last_comma = Some(at);
                            self.expect = Expect::Value;
                            self.i = at + 1;
                        }
                        (b'}', Container::Object) => self.close(at, Container::Object)?,
                        (b']', Container::Array) => self.close(at, Container::Array)?,
                        _ => return Err(self.fail(at, None)),
                    }
                }
                Expect::End => return Err(self.fail(at, None)),
            }
        }
    }
}

fn string(b: &[u8], at: usize) -> Scan {
    let mut j = at + 1;
    while let Some(&c) = b.get(j) {
        match c {
            b'"' => return Scan::Done(j + 1),
            b'\\' => match b.get(j + 1) {
                Some(b'"' | b'\\' | b'/' | b'b' | b'f' | b'n' | b'r' | b't') => j += 2,
                Some(b'u') => {
                    for k in 0..4 {
                        match b.get(j + 2 + k) {
                            Some(h) if h.is_ascii_hexdigit() => {}
                            _ => {
                                return Scan::Fail {
                                    at: j + 2 + k,
                                    open_string: true,
                                }
                            }
                        }
                    }
                    j += 6;
                }
                _ => {
                    return Scan::Fail {
                        at: j + 1,
                        open_string: true,
                    }
                }
            },
            0x00..=0x1f => {
                return Scan::Fail {
                    at: j,
                    open_string: true,
                }
            }
            _ => j += 1,
        }
    }
    Scan::Fail {
        at: b.len(),
        open_string: true,
    }
}

fn number(b: &[u8], at: usize) -> Scan {
    let mut j = at;
    let digit = |j: usize| b.get(j).is_some_and(u8::is_ascii_digit);
    let fail = |j: usize| Scan::Fail {
        at: j,
        open_string: false,
    };
    if b[j] == b'-' {
        j += 1;
    }
    match b.get(j) {
        Some(b'0') => j += 1,
        Some(b'1'..=b'9') => {
            while digit(j) {
                j += 1;
            }
        }
        _ => return fail(j),
    }
    if b.get(j) == Some(&b'.') {
        j += 1;
        if !digit(j) {
            return fail(j);
        }
        while digit(j) {
            j += 1;
        }
    }
    if matches!(b.get(j), Some(b'e' | b'E')) {
        j += 1;
        if matches!(b.get(j), Some(b'+' | b'-')) {
            j += 1;
        }
        if !digit(j) {
            return fail(j);
        }
        while digit(j) {
            j += 1;
        }
    }
    Scan::Done(j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn accepts_valid_documents() {
        for ok in [
            "{}",
            "[]",
            " 1 ",
            "-0.5e+3",
            "\"a\\u00e9\\n\"",
            "{\"a\": [1, true, null, {\"b\": \"c\"}]}",
            "[[], {}, \"\"]",
        ] {
            assert!(check(ok).is_ok(), "{ok}");
        }
    }

    #[test]
    fn reports_offsets() {
        assert_eq!(check("{\"a\": 1").unwrap_err().offset, 7);
        assert_eq!(check("{\"a\": 1,}").unwrap_err().offset, 8);
        assert_eq!(check("[1 2]").unwrap_err().offset, 3);
        let e = check("{\"a\": \"x\ny\"}").unwrap_err();
        assert_eq!(e.offset, 8);
        assert_eq!(e.open_string, Some((6, false)));
        assert_eq!(check("01").unwrap_err().offset, 1);
        assert_eq!(check("").unwrap_err().offset, 0);
    }

    #[test]
    fn tracks_the_last_comma_and_value() {
        let e = check("{\"a\": [1, 2], {").unwrap_err();
        assert_eq!(e.expect, Expect::Key);
        assert_eq!(e.last_comma, Some(12));
        assert_eq!(e.stack[0].last_value_start, Some(6));
    }

    proptest! {
        // Agreement with serde_json on structurally noisy inputs.
        #[test]
        fn agrees_with_serde(s in "[\\[\\]{}:,\" a1\\-.e\\\\tnul]{0,24}") {
            let ours = check(&s).is_ok();
            let theirs = serde_json::from_str::<serde_json::Value>(&s).is_ok();
            prop_assert_eq!(ours, theirs, "input {:?}", s);
        }
    }
}
