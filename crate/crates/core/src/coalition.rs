//! Coalitions as fixed-width bitmasks.
//!
//! A coalition is a subset of the players `0..n`. Keeping it in a single
//! machine word makes membership tests, insertion and hashing O(1), which
//! matters because every utility evaluation takes a coalition as argument.
//! Valuation rounds operate on at most 64 players at a time, so a `u64`
//! mask is enough; exact oracles restrict `n` further (see [`crate::game`]).

use std::fmt;

use thiserror::Error;

/// Largest player count a single coalition can represent.
pub const MAX_PLAYERS: usize = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoalitionError {
    #[error("player index {index} out of range for {n} players")]
    PlayerOutOfRange { index: usize, n: usize },
    #[error("player count {n} exceeds the {MAX_PLAYERS}-player coalition limit")]
    TooManyPlayers { n: usize },
    #[error("mask {mask:#x} uses bits above the low {n}")]
    MaskOutOfRange { mask: u64, n: usize },
}

/// A subset of the players `0..n`, encoded as the low `n` bits of a `u64`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Coalition {
    mask: u64,
    n: u8,
}

impl Coalition {
    /// The empty coalition over `n` players.
    pub fn empty(n: usize) -> Result<Self, CoalitionError> {
        if n > MAX_PLAYERS {
            return Err(CoalitionError::TooManyPlayers { n });
        }
        Ok(Self { mask: 0, n: n as u8 })
    }

    /// The grand coalition containing all `n` players.
    pub fn full(n: usize) -> Result<Self, CoalitionError> {
        let empty = Self::empty(n)?;
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        Ok(Self { mask, ..empty })
    }

    /// Builds a coalition from a raw mask, rejecting bits above the low `n`.
    pub fn from_mask(n: usize, mask: u64) -> Result<Self, CoalitionError> {
        let full = Self::full(n)?;
        if mask & !full.mask != 0 {
            return Err(CoalitionError::MaskOutOfRange { mask, n });
        }
        Ok(Self { mask, n: n as u8 })
    }

    /// Builds a coalition from explicit member indices.
    pub fn from_members(n: usize, members: &[usize]) -> Result<Self, CoalitionError> {
        let mut c = Self::empty(n)?;
        for &j in members {
            c = c.insert(j)?;
        }
        Ok(c)
    }

    /// Returns a coalition with player `j` added; the input is unchanged.
    pub fn insert(self, j: usize) -> Result<Self, CoalitionError> {
        if j >= self.n as usize {
            return Err(CoalitionError::PlayerOutOfRange { index: j, n: self.n as usize });
        }
        Ok(Self { mask: self.mask | (1u64 << j), n: self.n })
    }

    /// Returns a coalition with player `j` removed; the input is unchanged.
    pub fn remove(self, j: usize) -> Result<Self, CoalitionError> {
        if j >= self.n as usize {
            return Err(CoalitionError::PlayerOutOfRange { index: j, n: self.n as usize });
        }
        Ok(Self { mask: self.mask & !(1u64 << j), n: self.n })
    }

    pub fn contains(&self, j: usize) -> bool {
        j < self.n as usize && (self.mask >> j) & 1 == 1
    }

    /// Number of members.
    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    /// Player count of the underlying game, not the member count.
    pub fn player_count(&self) -> usize {
        self.n as usize
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    /// Member indices in increasing order.
    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        let mask = self.mask;
        (0..self.n as usize).filter(move |j| (mask >> j) & 1 == 1)
    }

    /// True when `self` is a subset of `other` (same player universe assumed).
    pub fn is_subset_of(&self, other: &Coalition) -> bool {
        self.mask & !other.mask == 0
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        let mut first = true;
        for j in self.members() {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
            first = false;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}
