use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest modality count a [`Combination`] bitmask can address.
pub const MAX_MODALITIES: usize = 16;

/// A set of modalities as a bitmask; bit `m` is modality `m` (0-based).
///
/// Non-empty combinations are numbered `s = mask`, so for `M` modalities the
/// `S = 2ᴹ − 1` combinations are `1..=S` and `s = S` is the full set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Combination(u32);

impl Combination {
    pub const EMPTY: Combination = Combination(0);

    pub fn from_mask(mask: u32) -> Self {
        Combination(mask)
    }

    pub fn full(m: usize) -> Self {
        Combination(((1u64 << m) - 1) as u32)
    }

    pub fn single(m: usize) -> Self {
        Combination(1 << m)
    }

    /// From 0-based modality indices.
    pub fn from_modalities(ms: &[usize]) -> Self {
        Combination(ms.iter().fold(0, |acc, &m| acc | (1 << m)))
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    /// Combination number `s`; equals the mask.
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, m: usize) -> bool {
        m < 32 && self.0 & (1 << m) != 0
    }

    pub fn with(self, m: usize) -> Self {
        Combination(self.0 | (1 << m))
    }

    pub fn union(self, other: Combination) -> Self {
        Combination(self.0 | other.0)
    }

    pub fn is_disjoint(self, other: Combination) -> bool {
        self.0 & other.0 == 0
    }

    pub fn modalities(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&m| self.0 & (1 << m) != 0)
    }

    /// Whether every member is below `m`.
    pub fn fits(self, m: usize) -> bool {
        m >= 32 || self.0 >> m == 0
    }

    /// All `2ᴹ − 1` non-empty combinations in index order.
    pub fn all(m: usize) -> impl Iterator<Item = Combination> {
        (1..=Combination::full(m).0).map(Combination)
    }

    /// Parses `"1,2"`-style 1-based member lists.
    pub fn parse_one_based(text: &str) -> Result<Self> {
        let mut c = Combination::EMPTY;
        for part in text.split([',', '+', ' ']).filter(|p| !p.is_empty()) {
            let m: usize = part
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad modality `{part}` in `{text}`")))?;
            if m == 0 || m > MAX_MODALITIES {
                return Err(Error::invalid(format!("modality {m} out of range in `{text}`")));
            }
            c = c.with(m - 1);
        }
        if c.is_empty() {
            return Err(Error::invalid(format!("empty combination `{text}`")));
        }
        Ok(c)
    }

    /// `"1,2"`-style 1-based member list.
    pub fn label(self) -> String {
        self.modalities()
            .map(|m| (m + 1).to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.label())
    }
}
