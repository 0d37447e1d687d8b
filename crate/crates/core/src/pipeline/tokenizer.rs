//! Byte-level tokenizer with a reserved range for special tokens.
//!
//! Ids 0..=255 are raw bytes; the four specials sit directly above. This
//! keeps the desk-scale pipeline free of external tokenizer models while
//! preserving exact round-trips for any UTF-8 text.

use super::PipelineError;

/// Special token ids used by sequence assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecialTokens {
    pub bos: u32,
    pub sep: u32,
    pub eos: u32,
    pub pad: u32,
}

impl Default for SpecialTokens {
    fn default() -> Self {
        Self {
            bos: 256,
            sep: 257,
            eos: 258,
            pad: 259,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ByteTokenizer;

impl ByteTokenizer {
    /// Bytes plus the four specials.
    pub const VOCAB_SIZE: usize = 260;

    pub fn encode(&self, text: &str) -> Vec<u32> {
        text.bytes().map(u32::from).collect()
    }

    /// Decodes byte-range ids back to text; special ids are an error.
    pub fn decode(&self, tokens: &[u32]) -> Result<String, PipelineError> {
        let bytes: Vec<u8> = tokens
            .iter()
            .map(|&id| {
                u8::try_from(id).map_err(|_| PipelineError::UndecodableToken { id })
            })
            .collect::<Result<_, _>>()?;
        Ok(String::from_utf8(bytes)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn encode_is_utf8_bytes() {
        let tok = ByteTokenizer;
        assert_eq!(tok.encode("ab"), vec![97, 98]);
        assert_eq!(tok.encode("é"), vec![0xC3, 0xA9]);
    }

    #[test]
    fn specials_do_not_decode() {
        let tok = ByteTokenizer;
        let specials = SpecialTokens::default();
        assert!(matches!(
            tok.decode(&[97, specials.sep]),
            Err(PipelineError::UndecodableToken { id: 257 })
        ));
    }

    proptest! {
        #[test]
        fn roundtrip(text in "\\PC{0,64}") {
            let tok = ByteTokenizer;
            prop_assert_eq!(tok.decode(&tok.encode(&text)).unwrap(), text);
        }
    }
}
