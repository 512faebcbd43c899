//! The byte-to-character table used by byte-level BPE vocabularies
//! (GPT-2 style), where `Ġ` stands for a space and `Ã¼` for the two UTF-8
//! bytes of `ü`.

use std::collections::HashMap;
use std::sync::OnceLock;

fn byte_table() -> &'static ([char; 256], HashMap<char, u8>) {
    static TABLE: OnceLock<([char; 256], HashMap<char, u8>)> = OnceLock::new();
    TABLE.get_or_init(|| {
        let printable = |b: u8| (b'!'..=b'~').contains(&b) || (0xA1..=0xAC).contains(&b) || b >= 0xAE;
        let mut forward = ['\0'; 256];
        let mut extra = 0u32;
        for b in 0..=255u8 {
            forward[b as usize] = if printable(b) {
                char::from(b)
            } else {
                extra += 1;
                char::from_u32(255 + extra).expect("valid code point")
            };
        }
        let inverse = forward.iter().enumerate().map(|(b, &c)| (c, b as u8)).collect();
        (forward, inverse)
    })
}

/// Renders raw bytes in the byte-level alphabet.
pub fn encode(text: &str) -> String {
    let (forward, _) = byte_table();
    text.bytes().map(|b| forward[b as usize]).collect()
}

/// Decodes a byte-level surface back to text. Returns `None` when the
/// surface contains characters outside the alphabet or the bytes are not
/// valid UTF-8 (for instance a subword that ends inside a multi-byte char).
pub fn decode(surface: &str) -> Option<String> {
    let (_, inverse) = byte_table();
    let bytes: Option<Vec<u8>> = surface.chars().map(|c| inverse.get(&c).copied()).collect();
    String::from_utf8(bytes?).ok()
}

/// Decodes if possible, else returns the surface unchanged.
pub fn decode_lossy(surface: &str) -> String {
    decode(surface).unwrap_or_else(|| surface.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_forms() {
        assert_eq!(encode(" über"), "ĠÃ¼ber");
        assert_eq!(decode("Ã¼ber").as_deref(), Some("über"));
        assert_eq!(decode("Ġ99").as_deref(), Some(" 99"));
        assert_eq!(decode("Ã"), None);
    }

    #[test]
    fn table_is_a_bijection() {
        let (forward, inverse) = byte_table();
        assert_eq!(inverse.len(), 256);
        for (b, c) in forward.iter().enumerate() {
            assert_eq!(inverse[c] as usize, b);
        }
    }

    proptest! {
        #[test]
        fn roundtrip(s in "\\PC{0,20}") {
            prop_assert_eq!(decode(&encode(&s)), Some(s));
        }
    }
}
