use crate::error::{Error, Result};

/// Keep/prune bits for one weight matrix, packed LSB-first into `u64` words.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LayerMask {
    name: String,
    dims: Vec<usize>,
    len: usize,
    words: Vec<u64>,
}

impl LayerMask {
    pub fn zeros(name: impl Into<String>, dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        Self {
            name: name.into(),
            dims,
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn ones(name: impl Into<String>, dims: Vec<usize>) -> Self {
        let mut m = Self::zeros(name, dims);
        for i in 0..m.len {
            m.set(i, true);
        }
        m
    }

    pub fn from_bools(name: impl Into<String>, dims: Vec<usize>, bits: &[bool]) -> Result<Self> {
        let mut m = Self::zeros(name, dims);
        if bits.len() != m.len {
            return Err(Error::Shape(format!(
                "mask of {} entries built from {} bits",
                m.len,
                bits.len()
            )));
        }
        for (i, &b) in bits.iter().enumerate() {
            m.set(i, b);
        }
        Ok(m)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Population size `m·n`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, keep: bool) {
        debug_assert!(i < self.len);
        let bit = 1u64 << (i % 64);
        if keep {
            self.words[i / 64] |= bit;
        } else {
            self.words[i / 64] &= !bit;
        }
    }

    /// Ticket size: number of kept weights.
    pub fn tau(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Size of the intersection with `other`.
    pub fn intersection_count(&self, other: &LayerMask) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    /// True if every kept position of `self` is also kept in `other`.
    pub fn is_subset_of(&self, other: &LayerMask) -> bool {
        self.len == other.len && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Indices of kept weights in ascending order.
    pub fn kept_indices(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.get(i)).collect()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Bitwise AND over several masks of identical shape.
    pub fn and_all<'a>(masks: impl IntoIterator<Item = &'a LayerMask>) -> Option<LayerMask> {
        let mut iter = masks.into_iter();
        let mut acc = iter.next()?.clone();
        for m in iter {
            for (a, b) in acc.words.iter_mut().zip(&m.words) {
                *a &= b;
            }
        }
        Some(acc)
    }

    /// Bitwise OR over several masks of identical shape.
    pub fn or_all<'a>(masks: impl IntoIterator<Item = &'a LayerMask>) -> Option<LayerMask> {
        let mut iter = masks.into_iter();
        let mut acc = iter.next()?.clone();
        for m in iter {
            for (a, b) in acc.words.iter_mut().zip(&m.words) {
                *a |= b;
            }
        }
        Some(acc)
    }
}

/// One [`LayerMask`] per parameterized layer: a lottery ticket.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    layers: Vec<LayerMask>,
}

impl Mask {
    pub fn new(layers: Vec<LayerMask>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[LayerMask] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> &LayerMask {
        &self.layers[i]
    }

    pub fn layers_mut(&mut self) -> &mut [LayerMask] {
        &mut self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn taus(&self) -> Vec<usize> {
        self.layers.iter().map(LayerMask::tau).collect()
    }

    /// Layer-wise subset test (mask nesting).
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| a.is_subset_of(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_counts_ones_across_words() {
        let mut m = LayerMask::zeros("l", vec![10, 13]);
        for i in (0..130).step_by(3) {
            m.set(i, true);
        }
        assert_eq!(m.tau(), 44);
        assert_eq!(LayerMask::ones("l", vec![130]).tau(), 130);
    }

    #[test]
    fn intersection_and_subset() {
        let a = LayerMask::from_bools("a", vec![4], &[true, true, false, false]).unwrap();
        let b = LayerMask::from_bools("b", vec![4], &[true, false, true, false]).unwrap();
        let c = LayerMask::from_bools("c", vec![4], &[true, false, false, false]).unwrap();
        assert_eq!(a.intersection_count(&b), 1);
        assert!(c.is_subset_of(&a));
        assert!(!b.is_subset_of(&a));
        assert_eq!(LayerMask::and_all([&a, &b]).unwrap().tau(), 1);
        assert_eq!(LayerMask::or_all([&a, &b]).unwrap().tau(), 3);
    }

    #[test]
    fn from_bools_checks_length() {
        assert!(LayerMask::from_bools("x", vec![3], &[true]).is_err());
    }
}
