//! Bit strings for culture tags and immune systems.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BitString(Vec<u8>);

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Tribe {
    Blue,
    Red,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BitError {
    #[error("bit strings differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("tribe is undefined for an even-length culture string (length {0})")]
    EvenLength(usize),
    #[error("neighbour {0} has no culture string")]
    MissingNeighbor(u64),
    #[error("invalid bit string {0:?}: only '0' and '1' allowed")]
    Parse(String),
}

impl BitString {
    /// Builds a string from 0/1 values. Panics on any other byte.
    pub fn from_bits(bits: Vec<u8>) -> BitString {
        assert!(bits.iter().all(|&b| b <= 1), "bits must be 0 or 1");
        BitString(bits)
    }

    pub fn random(len: usize, rng: &mut impl Rng) -> BitString {
        BitString((0..len).map(|_| rng.random_range(0..=1u8)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, bit: u8) {
        assert!(bit <= 1);
        self.0[i] = bit;
    }

    pub fn ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{self}>")
    }
}

impl FromStr for BitString {
    type Err = BitError;

    fn from_str(s: &str) -> Result<BitString, BitError> {
        s.bytes()
            .map(|b| match b {
                b'0' => Ok(0),
                b'1' => Ok(1),
                _ => Err(BitError::Parse(s.to_string())),
            })
            .collect::<Result<Vec<u8>, _>>()
            .map(BitString)
    }
}

/// Blue when zeros outnumber ones, red otherwise.
pub fn tribe(culture: &BitString) -> Result<Tribe, BitError> {
    if culture.len().is_multiple_of(2) {
        return Err(BitError::EvenLength(culture.len()));
    }
    let ones = culture.ones();
    Ok(if culture.len() - ones > ones {
        Tribe::Blue
    } else {
        Tribe::Red
    })
}

/// Copies `other`'s bit at one uniformly chosen index into `original`.
pub fn flip_bit(original: &BitString, other: &BitString, rng: &mut impl Rng) -> Result<BitString, BitError> {
    if original.len() != other.len() {
        return Err(BitError::LengthMismatch(original.len(), other.len()));
    }
    let mut out = original.clone();
    if !out.is_empty() {
        let i = rng.random_range(0..out.len());
        out.0[i] = other.0[i];
    }
    Ok(out)
}

/// Left fold of [`flip_bit`] over `neighbors`, each contributing its own culture.
pub fn flip_tags<'c>(
    subject: &BitString,
    neighbors: &[u64],
    cultures: impl Fn(u64) -> Option<&'c BitString>,
    rng: &mut impl Rng,
) -> Result<BitString, BitError> {
    let mut acc = subject.clone();
    for &n in neighbors {
        let other = cultures(n).ok_or(BitError::MissingNeighbor(n))?;
        acc = flip_bit(&acc, other, rng)?;
    }
    Ok(acc)
}

/// True when `d` occurs as a contiguous run of `s`. The empty string occurs everywhere.
pub fn is_substring(d: &BitString, s: &BitString) -> bool {
    if d.is_empty() {
        return true;
    }
    if d.len() > s.len() {
        return false;
    }
    match (pack(&s.0), pack(&d.0)) {
        (Some(ps), Some(pd)) => {
            let mask = low_bits(d.len());
            (0..=s.len() - d.len()).any(|off| (ps >> off) & mask == pd)
        }
        _ => s.0.windows(d.len()).any(|w| w == d.0.as_slice()),
    }
}

/// Bit `i` of the result is `bits[i]`, for strings of at most 64 bits.
fn pack(bits: &[u8]) -> Option<u64> {
    (bits.len() <= 64).then(|| bits.iter().rev().fold(0u64, |acc, &b| acc << 1 | b as u64))
}

fn low_bits(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

pub fn hamming_distance(a: &BitString, b: &BitString) -> Result<usize, BitError> {
    if a.len() != b.len() {
        return Err(BitError::LengthMismatch(a.len(), b.len()));
    }
    Ok(window_distance(&a.0, &b.0))
}

fn window_distance(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// One immune-response step: the closest window of `immunity` (leftmost on
/// ties) has its first mismatching bit changed to match `disease`.
pub fn process_infection(immunity: &BitString, disease: &BitString) -> BitString {
    let mut out = immunity.clone();
    infect(&mut out, disease);
    out
}

/// [`process_infection`] in place.
fn infect(immunity: &mut BitString, disease: &BitString) {
    let n = disease.len();
    if n == 0 || n > immunity.len() {
        return;
    }
    if let (Some(pi), Some(pd)) = (pack(&immunity.0), pack(&disease.0)) {
        let mask = low_bits(n);
        let mut best = (u32::MAX, 0usize, 0u64);
        for offset in 0..=immunity.len() - n {
            let diff = ((pi >> offset) ^ pd) & mask;
            let d = diff.count_ones();
            if d < best.0 {
                best = (d, offset, diff);
                if d == 0 {
                    return;
                }
            }
        }
        let (_, offset, diff) = best;
        let i = diff.trailing_zeros() as usize;
        immunity.0[offset + i] = disease.0[i];
        return;
    }
    let mut best = (usize::MAX, 0usize);
    for (offset, w) in immunity.0.windows(n).enumerate() {
        let d = window_distance(w, &disease.0);
        if d < best.0 {
            best = (d, offset);
            if d == 0 {
                return;
            }
        }
    }
    let offset = best.1;
    if let Some(i) = (0..n).find(|&i| immunity.0[offset + i] != disease.0[i]) {
        immunity.0[offset + i] = disease.0[i];
    }
}

/// One agent's immune response: folds every disease into `immunity` and
/// returns how many of them were not already substrings of it beforehand.
pub fn respond(immunity: &mut BitString, diseases: &BTreeSet<BitString>) -> usize {
    let Some(mut packed) = pack(&immunity.0) else {
        let exposed = diseases.iter().filter(|d| !is_substring(d, immunity)).count();
        for d in diseases {
            infect(immunity, d);
        }
        return exposed;
    };
    let len = immunity.len();
    let windows = |packed: u64, d: &BitString| {
        let pd = pack(&d.0).expect("shorter than the immunity string");
        let mask = low_bits(d.len());
        (0..=len - d.len()).map(move |off| (off, ((packed >> off) ^ pd) & mask))
    };
    let fits = |d: &BitString| !d.is_empty() && d.len() <= len;
    let exposed = diseases
        .iter()
        .filter(|d| !d.is_empty() && (d.len() > len || !windows(packed, d).any(|(_, diff)| diff == 0)))
        .count();
    for d in diseases.iter().filter(|d| fits(d)) {
        if windows(packed, d).any(|(_, diff)| diff == 0) {
            continue;
        }
        let (off, diff) = windows(packed, d)
            .min_by_key(|&(off, diff)| (diff.count_ones(), off))
            .unwrap();
        let i = off + diff.trailing_zeros() as usize;
        packed ^= 1 << i;
        immunity.0[i] ^= 1;
    }
    exposed
}

/// Left fold of [`process_infection`] over `diseases` in the given order.
pub fn apply_diseases<'a>(immunity: &BitString, diseases: impl IntoIterator<Item = &'a BitString>) -> BitString {
    let mut out = immunity.clone();
    for d in diseases {
        infect(&mut out, d);
    }
    out
}
