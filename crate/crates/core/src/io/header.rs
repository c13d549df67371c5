use super::FormatError;

/// Whitespace-separated ASCII header tokens, as used by PFM and PNM.
pub(crate) struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    comments: bool,
}

impl<'a> HeaderReader<'a> {
    pub fn new(bytes: &'a [u8], comments: bool) -> Self {
        Self {
            bytes,
            pos: 0,
            comments,
        }
    }

    pub fn magic(
        &mut self,
        expected: &'static [&'static str],
        description: &'static str,
    ) -> Result<&'static str, FormatError> {
        let head = self.bytes.get(..2).unwrap_or(self.bytes);
        let found = expected.iter().find(|m| m.as_bytes() == head).copied();
        match found {
            Some(m) => {
                self.pos = 2;
                Ok(m)
            }
            None => Err(FormatError::BadMagic {
                offset: 0,
                expected: description,
                found: String::from_utf8_lossy(head).into_owned(),
            }),
        }
    }

    fn skip_space(&mut self) {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') if self.comments => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
    }

    /// Next token and the byte offset where it starts.
    pub fn token(&mut self, what: &str) -> Result<(usize, &'a str), FormatError> {
        let before = self.pos;
        self.skip_space();
        if self.pos == before {
            return Err(FormatError::BadHeader {
                offset: self.pos,
                message: format!("expected whitespace before {what}"),
            });
        }
        let start = self.pos;
        while matches!(self.bytes.get(self.pos), Some(b) if !b.is_ascii_whitespace()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(FormatError::BadHeader {
                offset: start,
                message: format!("missing {what}"),
            });
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| {
            FormatError::BadHeader {
                offset: start,
                message: format!("{what} is not ASCII"),
            }
        })?;
        Ok((start, text))
    }

    pub fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<(usize, T), FormatError> {
        let (offset, text) = self.token(what)?;
        text.parse::<T>()
            .map(|v| (offset, v))
            .map_err(|_| FormatError::BadHeader {
                offset,
                message: format!("invalid {what} {text:?}"),
            })
    }

    /// Consumes the single whitespace byte that terminates the header; returns the payload offset.
    pub fn end(&mut self) -> Result<usize, FormatError> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => Ok(self.pos + 1),
            _ => Err(FormatError::BadHeader {
                offset: self.pos,
                message: "header must end with a single whitespace byte".into(),
            }),
        }
    }
}
