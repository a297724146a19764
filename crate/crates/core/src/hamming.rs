//! Hamming(7,4) block code with single-error correction.
//!
//! Bit layout over positions 1..7: parity at 1, 2, 4 and data at 3, 5, 6, 7,
//! even parity throughout. Any single flipped bit is located by the syndrome
//! and corrected; double errors miscorrect silently, which is inherent to
//! the code.

/// 7-bit codeword carrying 4 data bits.
pub type Codeword = [u8; 7];

/// Encodes 4 data bits (values 0/1) into a codeword.
pub fn encode(data: [u8; 4]) -> Codeword {
    let [d1, d2, d3, d4] = data;
    let p1 = d1 ^ d2 ^ d4;
    let p2 = d1 ^ d3 ^ d4;
    let p4 = d2 ^ d3 ^ d4;
    [p1, p2, d1, p4, d2, d3, d4]
}

/// Syndrome-decodes a received word.
///
/// Returns the 4 data bits and whether a single-bit correction was applied.
pub fn decode(received: Codeword) -> ([u8; 4], bool) {
    let mut word = received;
    let s1 = word[0] ^ word[2] ^ word[4] ^ word[6];
    let s2 = word[1] ^ word[2] ^ word[5] ^ word[6];
    let s4 = word[3] ^ word[4] ^ word[5] ^ word[6];
    let position = (s4 << 2 | s2 << 1 | s1) as usize;
    let corrected = position != 0;
    if corrected {
        word[position - 1] ^= 1;
    }
    ([word[2], word[4], word[5], word[6]], corrected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nibble(v: u8) -> [u8; 4] {
        [(v >> 3) & 1, (v >> 2) & 1, (v >> 1) & 1, v & 1]
    }

    fn distance(a: Codeword, b: Codeword) -> usize {
        a.iter().zip(b.iter()).filter(|(x, y)| x != y).count()
    }

    #[test]
    fn zero_and_ones_codewords() {
        assert_eq!(encode([0, 0, 0, 0]), [0; 7]);
        assert_eq!(encode([1, 1, 1, 1]), [1; 7]);
    }

    /// Independent oracle: enumerate all 16 codewords, check the minimum
    /// pairwise distance is 3 and every codeword has zero syndrome.
    #[test]
    fn generator_oracle_min_distance_three() {
        let codewords: Vec<Codeword> = (0..16u8).map(|v| encode(nibble(v))).collect();
        let mut min_dist = usize::MAX;
        for i in 0..16 {
            for j in i + 1..16 {
                min_dist = min_dist.min(distance(codewords[i], codewords[j]));
            }
        }
        assert_eq!(min_dist, 3);
        for (v, cw) in codewords.iter().enumerate() {
            let (data, corrected) = decode(*cw);
            assert_eq!(data, nibble(v as u8));
            assert!(!corrected);
        }
    }

    /// All 112 single-bit corruptions decode back to the original nibble.
    #[test]
    fn exhaustive_single_error_correction() {
        for v in 0..16u8 {
            let data = nibble(v);
            let cw = encode(data);
            for flip in 0..7 {
                let mut corrupted = cw;
                corrupted[flip] ^= 1;
                let (decoded, corrected) = decode(corrupted);
                assert_eq!(decoded, data, "nibble {v:04b}, flipped bit {}", flip + 1);
                assert!(corrected);
            }
        }
    }

    #[test]
    fn zero_codeword_bit_one_flip() {
        let mut cw = encode([0, 0, 0, 0]);
        cw[0] ^= 1;
        let (data, corrected) = decode(cw);
        assert_eq!(data, [0, 0, 0, 0]);
        assert!(corrected);
    }

    #[test]
    fn spot_check_1011_against_oracle() {
        let cw = encode([1, 0, 1, 1]);
        // p1 = 1^0^1 = 0, p2 = 1^1^1 = 1, p4 = 0^1^1 = 0
        assert_eq!(cw, [0, 1, 1, 0, 0, 1, 1]);
        assert_eq!(decode(cw), ([1, 0, 1, 1], false));
    }
}
