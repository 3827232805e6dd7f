//! 5G NR Gray-coded QPSK and 16QAM mapping (TS 38.211, 5.1.3 and 5.1.4).
//!
//! Bits within a symbol are ordered `b0..b(m-1)` as in the standard. A bit
//! label is the integer with `b0` as its most significant bit, so integer
//! order on labels is lexicographic order on bit strings. Spins are
//! `s = 1 - 2b`.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::linalg::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "QAM16")]
    Qam16,
}

impl Modulation {
    /// Bits per symbol, `m = log2 M`.
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
        }
    }

    /// Constellation size `M`.
    pub fn order(self) -> usize {
        1 << self.bits_per_symbol()
    }

    /// Constellation points indexed by bit label.
    pub fn points(self) -> &'static [C64] {
        static QPSK: OnceLock<Vec<C64>> = OnceLock::new();
        static QAM16: OnceLock<Vec<C64>> = OnceLock::new();
        let cell = match self {
            Modulation::Qpsk => &QPSK,
            Modulation::Qam16 => &QAM16,
        };
        cell.get_or_init(|| {
            (0..self.order())
                .map(|label| self.map_spins_unchecked(&label_spins(label, self.bits_per_symbol())))
                .collect()
        })
    }

    /// Maps one symbol's bits `b0..b(m-1)` to its constellation point.
    pub fn map_bits(self, bits: &[u8]) -> Result<C64> {
        let m = self.bits_per_symbol();
        if bits.len() != m {
            return Err(Error::BitCount {
                expected: m,
                got: bits.len(),
            });
        }
        let spins: Vec<i8> = bits.iter().map(|&b| 1 - 2 * (b & 1) as i8).collect();
        Ok(self.map_spins_unchecked(&spins))
    }

    /// Spin form of the mapper; `spins.len()` must equal `m`.
    fn map_spins_unchecked(self, s: &[i8]) -> C64 {
        let s: Vec<f64> = s.iter().map(|&v| v as f64).collect();
        match self {
            Modulation::Qpsk => C64::new(s[0], s[1]) / 2f64.sqrt(),
            Modulation::Qam16 => {
                C64::new(s[0] * (2.0 - s[2]), s[1] * (2.0 - s[3])) / 10f64.sqrt()
            }
        }
    }

    pub fn label_to_symbol(self, label: usize) -> C64 {
        self.points()[label]
    }

    /// Nearest constellation label; ties go to the smallest label.
    pub fn slice_label(self, v: C64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (label, p) in self.points().iter().enumerate() {
            let d = (v - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = label;
            }
        }
        best
    }

    /// Bits `b0..b(m-1)` of a label.
    pub fn label_bits(self, label: usize) -> Vec<u8> {
        let m = self.bits_per_symbol();
        (0..m).map(|i| ((label >> (m - 1 - i)) & 1) as u8).collect()
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modulation::Qpsk => "QPSK",
            Modulation::Qam16 => "QAM16",
        })
    }
}

impl FromStr for Modulation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "QPSK" => Ok(Modulation::Qpsk),
            "QAM16" | "16QAM" => Ok(Modulation::Qam16),
            other => Err(Error::Config(format!("unsupported modulation `{other}`"))),
        }
    }
}

fn label_spins(label: usize, m: usize) -> Vec<i8> {
    (0..m)
        .map(|i| 1 - 2 * ((label >> (m - 1 - i)) & 1) as i8)
        .collect()
}

/// Blockwise Gray map: consecutive groups of `m` spins become one symbol.
pub fn map_block(spins: &[i8], modulation: Modulation) -> Result<Vec<C64>> {
    let m = modulation.bits_per_symbol();
    if spins.len() % m != 0 {
        return Err(Error::BitCount {
            expected: spins.len().div_ceil(m) * m,
            got: spins.len(),
        });
    }
    if spins.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::Shape("spins must be +1 or -1".into()));
    }
    Ok(spins
        .chunks(m)
        .map(|c| modulation.map_spins_unchecked(c))
        .collect())
}

/// Inverse of [`map_block`] for exact constellation points.
pub fn demap_block(symbols: &[C64], modulation: Modulation) -> Vec<i8> {
    symbols
        .iter()
        .flat_map(|&z| label_spins(modulation.slice_label(z), modulation.bits_per_symbol()))
        .collect()
}

/// Per-entry nearest-point decision.
pub fn slice(v: &[C64], modulation: Modulation) -> Vec<C64> {
    v.iter()
        .map(|&z| modulation.label_to_symbol(modulation.slice_label(z)))
        .collect()
}

/// Hard bit decisions for a symbol vector, concatenated per symbol.
pub fn symbols_to_bits(symbols: &[C64], modulation: Modulation) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|&z| modulation.label_bits(modulation.slice_label(z)))
        .collect()
}

/// Symbol labels encoded in a computational basis index.
///
/// Bit `r` (least significant first) of `index` is the bit of spin `r` in
/// the block, and spin `r` belongs to symbol `r / m` at position `r % m`.
pub fn index_labels(index: usize, n_symbols: usize, modulation: Modulation) -> impl Iterator<Item = usize> {
    let m = modulation.bits_per_symbol();
    (0..n_symbols).map(move |t| {
        (0..m).fold(0, |acc, i| (acc << 1) | ((index >> (t * m + i)) & 1))
    })
}

/// Spins `s_r = 1 - 2 b_r` of a basis index.
pub fn index_spins(index: usize, q: usize) -> Vec<i8> {
    (0..q).map(|r| 1 - 2 * ((index >> r) & 1) as i8).collect()
}

/// Basis index of a spin string (inverse of [`index_spins`]).
pub fn spins_index(spins: &[i8]) -> usize {
    spins
        .iter()
        .enumerate()
        .fold(0, |acc, (r, &s)| acc | (usize::from(s < 0) << r))
}

/// Sort key that orders basis indices lexicographically by `(b_1, .., b_q)`.
pub fn lex_key(index: usize, q: usize) -> usize {
    (0..q).fold(0, |acc, r| (acc << 1) | ((index >> r) & 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-15
    }

    #[test]
    fn sixteen_qam_reference_points() {
        let s10 = 10f64.sqrt();
        let m = Modulation::Qam16;
        assert!(close(m.map_bits(&[0, 0, 0, 0]).unwrap(), C64::new(1.0, 1.0) / s10));
        assert!(close(m.map_bits(&[0, 0, 1, 1]).unwrap(), C64::new(3.0, 3.0) / s10));
        assert!(close(m.map_bits(&[1, 1, 0, 0]).unwrap(), C64::new(-1.0, -1.0) / s10));
        assert!(close(m.map_bits(&[1, 0, 1, 0]).unwrap(), C64::new(-3.0, 1.0) / s10));
    }

    #[test]
    fn qpsk_reference_point() {
        let p = Modulation::Qpsk.map_bits(&[1, 1]).unwrap();
        assert!(close(p, C64::new(-1.0, -1.0) / 2f64.sqrt()));
    }

    #[test]
    fn wrong_bit_count_is_an_error() {
        assert!(Modulation::Qam16.map_bits(&[0, 1]).is_err());
        assert!(map_block(&[1, 1, 1], Modulation::Qam16).is_err());
    }

    #[test]
    fn unit_average_energy() {
        for m in [Modulation::Qpsk, Modulation::Qam16] {
            let e: f64 = m.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / m.order() as f64;
            assert!((e - 1.0).abs() < 1e-15, "{m}: {e}");
        }
    }

    #[test]
    fn gray_adjacency() {
        for m in [Modulation::Qpsk, Modulation::Qam16] {
            let pts = m.points();
            let dmin = pts
                .iter()
                .enumerate()
                .flat_map(|(i, a)| pts[i + 1..].iter().map(move |b| (a - b).norm()))
                .fold(f64::INFINITY, f64::min);
            for i in 0..pts.len() {
                for j in 0..pts.len() {
                    if i != j && ((pts[i] - pts[j]).norm() - dmin).abs() < 1e-12 {
                        assert_eq!((i ^ j).count_ones(), 1, "{m}: labels {i} {j}");
                    }
                }
            }
        }
    }

    #[test]
    fn block_round_trip_is_exhaustive_identity() {
        let m = Modulation::Qam16;
        for index in 0..256 {
            let spins = index_spins(index, 8);
            let z = map_block(&spins, m).unwrap();
            assert_eq!(demap_block(&z, m), spins);
            assert_eq!(spins_index(&spins), index);
            let labels: Vec<usize> = index_labels(index, 2, m).collect();
            for (t, &lab) in labels.iter().enumerate() {
                assert!(close(m.label_to_symbol(lab), z[t]));
            }
        }
    }

    #[test]
    fn all_plus_block() {
        let z = map_block(&[1; 8], Modulation::Qam16).unwrap();
        let p = C64::new(1.0, 1.0) / 10f64.sqrt();
        assert!(close(z[0], p) && close(z[1], p));
    }

    #[test]
    fn slice_fixed_points_and_ties() {
        let m = Modulation::Qam16;
        for (label, &p) in m.points().iter().enumerate() {
            assert_eq!(m.slice_label(p), label);
        }
        // Origin is equidistant from the four inner points; label 0 = (1+j)/sqrt10.
        assert_eq!(m.slice_label(C64::new(0.0, 0.0)), 0);
        assert_eq!(Modulation::Qpsk.slice_label(C64::new(0.0, 0.0)), 0);
    }

    #[test]
    fn lex_key_orders_bits_from_first_spin() {
        // index 1 has b_1 = 1, index 2 has b_2 = 1; (0,1,..) < (1,0,..)
        assert!(lex_key(2, 4) < lex_key(1, 4));
        assert_eq!(lex_key(0, 4), 0);
    }
}
