//! 802.11 frame-synchronous scrambler, `S(x) = x^7 + x^4 + 1`.

/// Default seed; any nonzero 7-bit value is legal.
pub const DEFAULT_SEED: u8 = 0b101_1101;

#[derive(Clone, Debug)]
pub struct Scrambler {
    state: u8,
}

impl Scrambler {
    pub fn new(seed: u8) -> Self {
        debug_assert!(seed & 0x7f != 0, "scrambler seed must be nonzero");
        Self { state: seed & 0x7f }
    }

    pub fn next_bit(&mut self) -> u8 {
        let fb = ((self.state >> 6) ^ (self.state >> 3)) & 1;
        self.state = ((self.state << 1) | fb) & 0x7f;
        fb
    }

    pub fn apply(&mut self, bits: &mut [u8]) {
        for b in bits {
            *b ^= self.next_bit();
        }
    }
}

/// Pilot polarity sequence p_0..p_126 (scrambler from all ones, 0 → +1).
pub fn pilot_polarity() -> [f64; 127] {
    let mut s = Scrambler::new(0x7f);
    let mut p = [0.0; 127];
    for v in p.iter_mut() {
        *v = if s.next_bit() == 0 { 1.0 } else { -1.0 };
    }
    p
}

/// Seed that produced the first seven scrambled SERVICE bits (which are
/// zero before scrambling).
pub fn recover_seed(first_seven: &[u8]) -> Option<u8> {
    (1u8..128).find(|&seed| {
        let mut s = Scrambler::new(seed);
        first_seven.iter().all(|&b| s.next_bit() == b)
    })
}
