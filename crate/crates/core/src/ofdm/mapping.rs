//! Gray-coded constellation mapping and max-log soft demapping.

use num_complex::Complex64;

use super::params::Modulation;

/// (level, label) pairs for one axis; label bits are MSB-first in the order
/// they are taken from the coded stream.
fn axis(m: Modulation) -> &'static [(f64, u8)] {
    match m {
        Modulation::Bpsk | Modulation::Qpsk => &[(-1.0, 0b0), (1.0, 0b1)],
        Modulation::Qam16 => &[(-3.0, 0b00), (-1.0, 0b01), (1.0, 0b11), (3.0, 0b10)],
        Modulation::Qam64 => &[
            (-7.0, 0b000),
            (-5.0, 0b001),
            (-3.0, 0b011),
            (-1.0, 0b010),
            (1.0, 0b110),
            (3.0, 0b111),
            (5.0, 0b101),
            (7.0, 0b100),
        ],
    }
}

/// Normalisation giving unit average energy.
pub fn kmod(m: Modulation) -> f64 {
    match m {
        Modulation::Bpsk => 1.0,
        Modulation::Qpsk => 1.0 / 2f64.sqrt(),
        Modulation::Qam16 => 1.0 / 10f64.sqrt(),
        Modulation::Qam64 => 1.0 / 42f64.sqrt(),
    }
}

fn bits_per_axis(m: Modulation) -> usize {
    match m {
        Modulation::Bpsk => 1,
        _ => m.bits_per_symbol() / 2,
    }
}

fn axis_level(m: Modulation, bits: &[u8]) -> f64 {
    let label = bits.iter().fold(0u8, |acc, &b| (acc << 1) | b);
    axis(m)
        .iter()
        .find(|(_, l)| *l == label)
        .map(|(v, _)| *v)
        .expect("label in table")
}

/// Maps `bits.len() == bits_per_symbol` coded bits to one point.
pub fn map_point(m: Modulation, bits: &[u8]) -> Complex64 {
    let k = kmod(m);
    match m {
        Modulation::Bpsk => Complex64::new(axis_level(m, bits) * k, 0.0),
        _ => {
            let h = bits_per_axis(m);
            Complex64::new(axis_level(m, &bits[..h]) * k, axis_level(m, &bits[h..]) * k)
        }
    }
}

pub fn map_bits(m: Modulation, bits: &[u8]) -> Vec<Complex64> {
    bits.chunks(m.bits_per_symbol())
        .map(|c| map_point(m, c))
        .collect()
}

fn demap_axis(m: Modulation, y: f64, weight: f64, out: &mut Vec<f64>) {
    let table = axis(m);
    let nb = bits_per_axis(m);
    for bit in 0..nb {
        let shift = nb - 1 - bit;
        let (mut d0, mut d1) = (f64::INFINITY, f64::INFINITY);
        for &(level, label) in table {
            let d = (y - level).powi(2);
            if (label >> shift) & 1 == 1 {
                d1 = d1.min(d);
            } else {
                d0 = d0.min(d);
            }
        }
        out.push((d0 - d1) * weight);
    }
}

/// Soft values (positive = 1) for an equalised point `y`. `weight` is the
/// channel power |H|² of the bin, which scales reliability under ZF
/// equalisation.
pub fn demap_point(m: Modulation, y: Complex64, weight: f64, out: &mut Vec<f64>) {
    let k = kmod(m);
    // distances are computed in unnormalised units, so rescale the weight
    let w = weight * k * k;
    demap_axis(m, y.re / k, w, out);
    if m != Modulation::Bpsk {
        demap_axis(m, y.im / k, w, out);
    }
}
