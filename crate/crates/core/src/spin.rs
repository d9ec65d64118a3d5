//! Binary configurations, sample batches and the enumerated Hilbert space.
//!
//! Sites hold 0 (spin down) or 1 (spin up). Whenever configurations are
//! indexed as a vector, site 0 is the most significant bit, so `(0,1)` has
//! index 1 and `(1,0)` has index 2.

use std::ops::Deref;

use crate::error::{Error, Result};

/// Default cap on the number of sites that may be enumerated exhaustively.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 20;

fn validate_bits(what: &str, bits: &[u8]) -> Result<()> {
    match bits.iter().position(|&b| b > 1) {
        Some(i) => Err(Error::invalid(format!(
            "{what} entry {i} is {}, expected 0 or 1",
            bits[i]
        ))),
        None => Ok(()),
    }
}

/// Visible-layer configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinConfiguration(Vec<u8>);

impl SpinConfiguration {
    pub fn new(sites: Vec<u8>) -> Result<Self> {
        validate_bits("spin configuration", &sites)?;
        Ok(Self(sites))
    }

    /// Configuration with canonical index `index` on `n` sites.
    pub fn from_index(index: usize, n: usize) -> Self {
        let mut sites = vec![0u8; n];
        write_index_bits(index, &mut sites);
        Self(sites)
    }

    pub fn index(&self) -> usize {
        config_index(&self.0)
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.0
    }
}

impl Deref for SpinConfiguration {
    type Target = [u8];
    fn deref(&self) -> &[u8] {
        &self.0
    }
}

impl AsRef<[u8]> for SpinConfiguration {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

/// Hidden-layer configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HiddenConfiguration(Vec<u8>);

impl HiddenConfiguration {
    pub fn new(units: Vec<u8>) -> Result<Self> {
        validate_bits("hidden configuration", &units)?;
        Ok(Self(units))
    }
}

impl Deref for HiddenConfiguration {
    type Target = [u8];
    fn deref(&self) -> &[u8] {
        &self.0
    }
}

/// Canonical index of a configuration (site 0 most significant).
pub fn config_index(bits: &[u8]) -> usize {
    bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
}

/// Writes the bits of `index` into `out`, site 0 most significant.
pub fn write_index_bits(index: usize, out: &mut [u8]) {
    let n = out.len();
    for (j, slot) in out.iter_mut().enumerate() {
        *slot = ((index >> (n - 1 - j)) & 1) as u8;
    }
}

/// A batch of equal-width configurations stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleBatch {
    width: usize,
    data: Vec<u8>,
}

impl SampleBatch {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            data: Vec::new(),
        }
    }

    pub fn with_capacity(width: usize, rows: usize) -> Self {
        Self {
            width,
            data: Vec::with_capacity(width * rows),
        }
    }

    /// Builds a batch from a flat row-major buffer.
    pub fn from_flat(width: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 {
            return Err(Error::invalid("sample width must be at least 1"));
        }
        if !data.len().is_multiple_of(width) {
            return Err(Error::invalid(format!(
                "buffer of {} entries is not a whole number of rows of width {width}",
                data.len()
            )));
        }
        validate_bits("sample", &data)?;
        Ok(Self { width, data })
    }

    pub fn from_rows<I, R>(width: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[u8]>,
    {
        let mut batch = Self::new(width);
        for row in rows {
            batch.push(row.as_ref())?;
        }
        Ok(batch)
    }

    pub fn push(&mut self, row: &[u8]) -> Result<()> {
        if row.len() != self.width {
            return Err(Error::dims("sample width", self.width, row.len()));
        }
        validate_bits("sample", row)?;
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub(crate) fn push_unchecked(&mut self, row: &[u8]) {
        debug_assert_eq!(row.len(), self.width);
        self.data.extend_from_slice(row);
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        self.data.chunks_exact(self.width.max(1))
    }

    pub fn as_flat(&self) -> &[u8] {
        &self.data
    }

    /// Copies the selected rows into a new batch.
    pub fn select(&self, indices: &[usize]) -> SampleBatch {
        let mut out = SampleBatch::with_capacity(self.width, indices.len());
        for &i in indices {
            out.push_unchecked(self.row(i));
        }
        out
    }

    pub fn to_configurations(&self) -> Vec<SpinConfiguration> {
        self.iter().map(|r| SpinConfiguration(r.to_vec())).collect()
    }
}

/// The full set of `2^n` configurations in canonical order.
#[derive(Debug, Clone)]
pub struct HilbertSpace {
    batch: SampleBatch,
}

impl HilbertSpace {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_limit(n, DEFAULT_ENUMERATION_LIMIT)
    }

    pub fn with_limit(n: usize, limit: usize) -> Result<Self> {
        if n > limit {
            return Err(Error::Intractable { n, limit });
        }
        if n == 0 {
            return Err(Error::invalid("cannot enumerate zero sites"));
        }
        let size = 1usize << n;
        let mut data = vec![0u8; size * n];
        for (index, row) in data.chunks_exact_mut(n).enumerate() {
            write_index_bits(index, row);
        }
        Ok(Self {
            batch: SampleBatch { width: n, data },
        })
    }

    pub fn num_sites(&self) -> usize {
        self.batch.width
    }

    pub fn dimension(&self) -> usize {
        self.batch.len()
    }

    pub fn config(&self, index: usize) -> &[u8] {
        self.batch.row(index)
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        self.batch.iter()
    }

    pub fn as_batch(&self) -> &SampleBatch {
        &self.batch
    }
}

/// All `2^n` configurations in canonical order.
pub fn enumerate_configurations(n: usize) -> Result<Vec<SpinConfiguration>> {
    Ok(HilbertSpace::new(n)?.as_batch().to_configurations())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn enumerates_two_sites_in_order() {
        let got: Vec<Vec<u8>> = enumerate_configurations(2)
            .unwrap()
            .into_iter()
            .map(SpinConfiguration::into_inner)
            .collect();
        assert_eq!(got, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        let one: Vec<Vec<u8>> = enumerate_configurations(1)
            .unwrap()
            .into_iter()
            .map(SpinConfiguration::into_inner)
            .collect();
        assert_eq!(one, vec![vec![0], vec![1]]);
    }

    #[test]
    fn enumeration_is_complete_and_distinct() {
        for n in 1..=12 {
            let space = HilbertSpace::new(n).unwrap();
            assert_eq!(space.dimension(), 1 << n);
            let distinct: HashSet<&[u8]> = space.iter().collect();
            assert_eq!(distinct.len(), 1 << n);
            for (i, c) in space.iter().enumerate() {
                assert_eq!(config_index(c), i);
            }
        }
    }

    #[test]
    fn enumeration_limit_is_enforced() {
        assert!(matches!(
            HilbertSpace::new(21),
            Err(Error::Intractable { n: 21, limit: 20 })
        ));
        assert!(HilbertSpace::with_limit(5, 4).is_err());
    }

    #[test]
    fn rejects_non_binary_entries() {
        assert!(SpinConfiguration::new(vec![0, 2]).is_err());
        assert!(SampleBatch::from_flat(2, vec![0, 1, 1]).is_err());
        let mut b = SampleBatch::new(3);
        assert!(b.push(&[1, 0]).is_err());
    }

    #[test]
    fn index_round_trip() {
        for i in 0..16 {
            assert_eq!(SpinConfiguration::from_index(i, 4).index(), i);
        }
    }
}
