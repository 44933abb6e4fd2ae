//! Byte-level tokenizer: every byte is its own token, plus three reserved
//! ids. No vocabulary to train, no out-of-vocabulary text, and
//! detokenize ∘ tokenize is the identity on byte strings.

/// Begin-of-sequence marker, prepended to every encoded text.
pub const BOS: usize = 256;
/// End-of-sequence marker, appended to every encoded text.
pub const EOS: usize = 257;
/// Padding token; excluded from attention and from the loss.
pub const PAD: usize = 258;
/// 256 byte tokens plus the three specials.
pub const VOCAB_SIZE: usize = 259;

/// Encodes a byte string as `[BOS, b0, b1, …, EOS]`.
pub fn tokenize_bytes(bytes: &[u8]) -> Vec<usize> {
    let mut ids = Vec::with_capacity(bytes.len() + 2);
    ids.push(BOS);
    ids.extend(bytes.iter().map(|&b| b as usize));
    ids.push(EOS);
    ids
}

/// Encodes UTF-8 text by its bytes.
pub fn tokenize(text: &str) -> Vec<usize> {
    tokenize_bytes(text.as_bytes())
}

/// Decodes token ids back to bytes, dropping the special tokens.
pub fn detokenize(ids: &[usize]) -> Vec<u8> {
    ids.iter()
        .filter(|&&id| id < 256)
        .map(|&id| id as u8)
        .collect()
}

/// Decodes to text, replacing any invalid UTF-8 with the replacement char.
pub fn detokenize_lossy(ids: &[usize]) -> String {
    String::from_utf8_lossy(&detokenize(ids)).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_text_is_just_the_markers() {
        assert_eq!(tokenize(""), vec![BOS, EOS]);
        assert_eq!(detokenize(&[BOS, EOS]), Vec::<u8>::new());
    }

    #[test]
    fn ascii_bytes_map_to_their_values() {
        assert_eq!(tokenize("ab"), vec![BOS, 97, 98, EOS]);
    }

    #[test]
    fn round_trip_is_exact_on_random_byte_strings() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let len = rng.gen_range(0..64);
            let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            assert_eq!(detokenize(&tokenize_bytes(&bytes)), bytes);
        }
    }

    #[test]
    fn special_ids_sit_above_the_byte_range() {
        assert!(BOS >= 256 && EOS >= 256 && PAD >= 256);
        assert_eq!(VOCAB_SIZE, 259);
    }
}
