//! Dense boolean rows packed into 64-bit words.

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct BitSet {
    len: usize,
    words: Vec<u64>,
}

impl BitSet {
    pub fn new(len: usize) -> Self {
        BitSet { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.words[i >> 6] >> (i & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize) {
        self.words[i >> 6] |= 1 << (i & 63);
    }

    #[inline]
    pub fn clear(&mut self, i: usize) {
        self.words[i >> 6] &= !(1 << (i & 63));
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn union_with(&mut self, other: &BitSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    /// Size of the intersection without materialising it.
    pub fn and_count(&self, other: &BitSet) -> usize {
        self.words.iter().zip(&other.words).map(|(a, b)| (a & b).count_ones() as usize).sum()
    }

    pub fn and(&self, other: &BitSet) -> BitSet {
        BitSet {
            len: self.len,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
        }
    }

    pub fn is_subset(&self, other: &BitSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Set bits in increasing order.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            let mut out = Vec::with_capacity(w.count_ones() as usize);
            while w != 0 {
                let t = w.trailing_zeros() as usize;
                out.push(k * 64 + t);
                w &= w - 1;
            }
            out
        })
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

/// Square boolean matrix stored row by row.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BitMatrix {
    rows: Vec<BitSet>,
}

impl BitMatrix {
    pub fn new(n: usize) -> Self {
        BitMatrix { rows: vec![BitSet::new(n); n] }
    }

    pub fn from_rows(rows: Vec<BitSet>) -> Self {
        BitMatrix { rows }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i].get(j)
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize) {
        self.rows[i].set(j)
    }

    pub fn row(&self, i: usize) -> &BitSet {
        &self.rows[i]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut BitSet {
        &mut self.rows[i]
    }

    pub fn transpose(&self) -> BitMatrix {
        let n = self.n();
        let mut t = BitMatrix::new(n);
        for i in 0..n {
            for j in self.rows[i].iter() {
                t.set(j, i);
            }
        }
        t
    }

    pub fn count_ones(&self) -> usize {
        self.rows.iter().map(BitSet::count).sum()
    }

    /// Row-major bit stream packed LSB-first into bytes, zero padded.
    pub fn row_major_bytes(&self) -> Vec<u8> {
        let n = self.n();
        let mut out = vec![0u8; (n * n).div_ceil(8)];
        for i in 0..n {
            for j in self.rows[i].iter() {
                let k = i * n + j;
                out[k >> 3] |= 1 << (k & 7);
            }
        }
        out
    }
}
