//! Fixed-width binary codes.

use std::fmt;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

/// Widest code handled anywhere in the crate (input bit-vectors included).
pub const MAX_WIDTH: usize = 12;

/// A fixed-width binary code: the joint 0/1 output pattern of one layer's
/// neurons, or the input bit-vector at layer 0.
///
/// Codes render most-significant-bit first, so `"010"` has `bit(0) == false`,
/// `bit(1) == true` and numeric value 2. Ordering compares width first, then
/// numeric value; within one layer all widths agree, so ordering is numeric.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Code {
    width: u8,
    bits: u16,
}

impl Code {
    pub fn new(width: usize, bits: u16) -> Self {
        assert!(
            (1..=MAX_WIDTH).contains(&width),
            "code width {width} out of range 1..={MAX_WIDTH}"
        );
        assert!(
            (bits as u32) < (1u32 << width),
            "value {bits} does not fit in {width} bits"
        );
        Code {
            width: width as u8,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    /// Numeric value of the bit pattern, most-significant-bit first.
    pub fn value(&self) -> u16 {
        self.bits
    }

    /// Bit `j`, counting from the most significant end: neuron `j`'s output.
    pub fn bit(&self, j: usize) -> bool {
        assert!(j < self.width(), "bit index {j} out of width {}", self.width);
        (self.bits >> (self.width() - 1 - j)) & 1 == 1
    }

    /// The bits as 0/1 integers, most significant first.
    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.width()).map(|j| self.bit(j) as u8).collect()
    }

    /// All codes of the given width in ascending numeric order.
    pub fn all(width: usize) -> impl Iterator<Item = Code> {
        (0..1u32 << width).map(move |v| Code::new(width, v as u16))
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.width() {
            write!(f, "{}", self.bit(j) as u8)?;
        }
        Ok(())
    }
}

impl fmt::Debug for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Code({self})")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodeParseError {
    #[error("empty bitstring")]
    Empty,
    #[error("bitstring \"{0}\" longer than {MAX_WIDTH} bits")]
    TooWide(String),
    #[error("invalid character '{1}' in bitstring \"{0}\"")]
    InvalidChar(String, char),
}

impl FromStr for Code {
    type Err = CodeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Err(CodeParseError::Empty);
        }
        if s.len() > MAX_WIDTH {
            return Err(CodeParseError::TooWide(s.to_owned()));
        }
        let mut bits = 0u16;
        for c in s.chars() {
            bits <<= 1;
            match c {
                '0' => {}
                '1' => bits |= 1,
                other => return Err(CodeParseError::InvalidChar(s.to_owned(), other)),
            }
        }
        Ok(Code::new(s.len(), bits))
    }
}

impl Serialize for Code {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Code {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_is_msb_first() {
        let c = Code::new(3, 0b010);
        assert_eq!(c.to_string(), "010");
        assert!(!c.bit(0));
        assert!(c.bit(1));
        assert!(!c.bit(2));
        assert_eq!(c.to_bits(), vec![0, 1, 0]);
    }

    #[test]
    fn parse_round_trip() {
        for width in 1..=4 {
            for code in Code::all(width) {
                assert_eq!(code.to_string().parse::<Code>().unwrap(), code);
            }
        }
    }

    #[test]
    fn parse_rejects_bad_strings() {
        assert_eq!("".parse::<Code>(), Err(CodeParseError::Empty));
        assert!(matches!(
            "01a".parse::<Code>(),
            Err(CodeParseError::InvalidChar(_, 'a'))
        ));
        assert!(matches!(
            "0000000000000".parse::<Code>(),
            Err(CodeParseError::TooWide(_))
        ));
    }

    #[test]
    fn ordering_is_numeric_within_a_width() {
        let mut codes: Vec<Code> = Code::all(2).collect();
        codes.reverse();
        codes.sort();
        assert_eq!(
            codes.iter().map(Code::value).collect::<Vec<_>>(),
            vec![0, 1, 2, 3]
        );
    }
}
