//! Fixed-length chunk packing and the packed-chunk binary format.
//!
//! Packing is in-order first-fit: whole sequences are appended to the
//! current chunk while they fit, a sequence is never split, and each chunk
//! is padded to `chunk_len` with `pad_id`, mask false on padding.
//!
//! On disk each chunk is a length-prefixed record: `u32` little-endian
//! token count, that many `u32` little-endian token ids, then a loss-mask
//! bitmap of `ceil(n/8)` bytes, LSB first.

use std::io::{Read, Write};

use super::{PipelineError, TokenSequence};

/// Production chunk length for packed training sequences.
pub const DEFAULT_CHUNK_LEN: usize = 4096;

/// Packs sequences into `chunk_len`-sized chunks without splitting or
/// reordering. Errors if any input is longer than `chunk_len` or contains
/// `pad_id`.
pub fn pack_sequences(
    sequences: &[TokenSequence],
    chunk_len: usize,
    pad_id: u32,
) -> Result<Vec<TokenSequence>, PipelineError> {
    if chunk_len == 0 {
        return Err(PipelineError::ZeroChunkLen);
    }
    for (index, seq) in sequences.iter().enumerate() {
        if seq.len() > chunk_len {
            return Err(PipelineError::OversizedSequence {
                index,
                len: seq.len(),
                chunk_len,
            });
        }
        if seq.tokens.contains(&pad_id) {
            return Err(PipelineError::PadTokenInInput { index });
        }
    }

    let mut chunks = Vec::new();
    let mut tokens: Vec<u32> = Vec::with_capacity(chunk_len);
    let mut mask: Vec<bool> = Vec::with_capacity(chunk_len);
    for seq in sequences {
        if tokens.len() + seq.len() > chunk_len {
            chunks.push(finish_chunk(&mut tokens, &mut mask, chunk_len, pad_id));
        }
        tokens.extend_from_slice(&seq.tokens);
        mask.extend_from_slice(&seq.loss_mask);
    }
    if !tokens.is_empty() {
        chunks.push(finish_chunk(&mut tokens, &mut mask, chunk_len, pad_id));
    }
    Ok(chunks)
}

fn finish_chunk(
    tokens: &mut Vec<u32>,
    mask: &mut Vec<bool>,
    chunk_len: usize,
    pad_id: u32,
) -> TokenSequence {
    tokens.resize(chunk_len, pad_id);
    mask.resize(chunk_len, false);
    TokenSequence::new(std::mem::take(tokens), std::mem::take(mask)).expect("aligned lengths")
}

/// Serializes chunks in the length-prefixed binary format.
pub fn write_chunks(mut writer: impl Write, chunks: &[TokenSequence]) -> Result<(), PipelineError> {
    for chunk in chunks {
        let n = u32::try_from(chunk.len()).map_err(|_| {
            PipelineError::MalformedSequence("chunk longer than u32::MAX".into())
        })?;
        writer.write_all(&n.to_le_bytes())?;
        for &token in &chunk.tokens {
            writer.write_all(&token.to_le_bytes())?;
        }
        let mut bitmap = vec![0u8; chunk.len().div_ceil(8)];
        for (i, &m) in chunk.loss_mask.iter().enumerate() {
            if m {
                bitmap[i / 8] |= 1 << (i % 8);
            }
        }
        writer.write_all(&bitmap)?;
    }
    Ok(())
}

/// Reads every chunk record until EOF.
pub fn read_chunks(mut reader: impl Read) -> Result<Vec<TokenSequence>, PipelineError> {
    let mut chunks = Vec::new();
    loop {
        let mut len_buf = [0u8; 4];
        match reader.read_exact(&mut len_buf) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let n = u32::from_le_bytes(len_buf) as usize;
        let mut tokens = Vec::with_capacity(n);
        let mut tok_buf = [0u8; 4];
        for _ in 0..n {
            reader.read_exact(&mut tok_buf)?;
            tokens.push(u32::from_le_bytes(tok_buf));
        }
        let mut bitmap = vec![0u8; n.div_ceil(8)];
        reader.read_exact(&mut bitmap)?;
        let loss_mask = (0..n).map(|i| bitmap[i / 8] >> (i % 8) & 1 == 1).collect();
        chunks.push(TokenSequence::new(tokens, loss_mask)?);
    }
    Ok(chunks)
}
