//! Channel uses: i.i.d. Rayleigh channel, uniform bits, complex AWGN.

use crate::constellation::Modulation;
use crate::error::{Error, Result};
use crate::model::linalg::{CMat, CVec, C64};
use crate::model::rng::RngStream;

/// Noise variance per receive antenna for a given SNR.
///
/// SNR is average received signal energy per antenna over noise variance,
/// with unit-energy symbols and unit-variance channel taps, so
/// `sigma2 = nt * 10^(-snr/10)`.
pub fn noise_variance(nt: usize, snr_db: f64) -> f64 {
    nt as f64 * 10f64.powf(-snr_db / 10.0)
}

/// One channel use `y = H x + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionInstance {
    pub h: CMat,
    pub tx_bits: Vec<u8>,
    pub x: CVec,
    pub noise: CVec,
    pub y: CVec,
    pub sigma2: f64,
    pub snr_db: f64,
    pub modulation: Modulation,
}

impl DetectionInstance {
    pub fn nt(&self) -> usize {
        self.h.cols()
    }

    pub fn nr(&self) -> usize {
        self.h.rows()
    }

    /// Builds an instance from given parts (noise is recovered as `y - Hx`).
    pub fn from_parts(
        h: CMat,
        tx_bits: Vec<u8>,
        y: CVec,
        sigma2: f64,
        snr_db: f64,
        modulation: Modulation,
    ) -> Result<Self> {
        let m = modulation.bits_per_symbol();
        if tx_bits.len() != h.cols() * m {
            return Err(Error::BitCount {
                expected: h.cols() * m,
                got: tx_bits.len(),
            });
        }
        let x = CVec(
            tx_bits
                .chunks(m)
                .map(|c| modulation.map_bits(c))
                .collect::<Result<_>>()?,
        );
        let noise = y.sub(&h.matvec(&x)?)?;
        Ok(DetectionInstance {
            h,
            tx_bits,
            x,
            noise,
            y,
            sigma2,
            snr_db,
            modulation,
        })
    }

    /// FNV-1a digest of the channel, bits and observation.
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for i in 0..self.h.rows() {
            for z in self.h.row(i) {
                eat(&z.re.to_bits().to_le_bytes());
                eat(&z.im.to_bits().to_le_bytes());
            }
        }
        eat(&self.tx_bits);
        for z in self.y.iter() {
            eat(&z.re.to_bits().to_le_bytes());
            eat(&z.im.to_bits().to_le_bytes());
        }
        h
    }
}

fn cn(rng: &mut RngStream, var: f64) -> C64 {
    let (a, b) = rng.normal_pair();
    let s = (var / 2.0).sqrt();
    C64::new(s * a, s * b)
}

/// Draws a channel use. The draw order is channel (row-major), bits, noise.
pub fn generate_instance(
    nt: usize,
    nr: usize,
    modulation: Modulation,
    snr_db: f64,
    rng: &mut RngStream,
) -> Result<DetectionInstance> {
    if nt == 0 || nr == 0 {
        return Err(Error::Dimension(format!("nt = {nt}, nr = {nr}")));
    }
    let h = CMat::from_fn(nr, nt, |_, _| cn(rng, 1.0));
    let m = modulation.bits_per_symbol();
    let tx_bits: Vec<u8> = (0..nt * m).map(|_| rng.bit()).collect();
    let x = CVec(
        tx_bits
            .chunks(m)
            .map(|c| modulation.map_bits(c))
            .collect::<Result<_>>()?,
    );
    let sigma2 = noise_variance(nt, snr_db);
    let noise = CVec::from_fn(nr, |_| cn(rng, sigma2));
    let hx = h.matvec(&x)?;
    let y = CVec(hx.iter().zip(noise.iter()).map(|(a, b)| a + b).collect());
    Ok(DetectionInstance {
        h,
        tx_bits,
        x,
        noise,
        y,
        sigma2,
        snr_db,
        modulation,
    })
}
