//! Dense GF(2) linear algebra, word-packed. Used for systematic encoding
//! and for targeted parity corruptions; small n only.

/// A rows x cols bit matrix.
#[derive(Clone, Debug)]
pub(crate) struct BitMatrix {
    pub rows: usize,
    pub cols: usize,
    row_words: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        let row_words = cols.div_ceil(64);
        BitMatrix {
            rows,
            cols,
            row_words,
            data: vec![0; rows * row_words],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.row_words + c / 64] >> (c % 64) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        let w = &mut self.data[r * self.row_words + c / 64];
        if v {
            *w |= 1 << (c % 64);
        } else {
            *w &= !(1 << (c % 64));
        }
    }

    fn xor_row(&mut self, dst: usize, src: usize) {
        let (d, s) = (dst * self.row_words, src * self.row_words);
        for i in 0..self.row_words {
            let v = self.data[s + i];
            self.data[d + i] ^= v;
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.row_words {
            self.data.swap(a * self.row_words + i, b * self.row_words + i);
        }
    }

    pub fn row_bits(&self, r: usize) -> Vec<usize> {
        (0..self.cols).filter(|&c| self.get(r, c)).collect()
    }
}

/// Solve A·X = B over GF(2) for square A (rows = cols = n). Returns X
/// (n x B.cols) or None when A is singular. Gauss-Jordan on the augmented
/// matrix.
pub(crate) fn solve(a: &BitMatrix, b: &BitMatrix) -> Option<BitMatrix> {
    let n = a.rows;
    assert_eq!(a.cols, n);
    assert_eq!(b.rows, n);
    let mut aug = BitMatrix::zero(n, n + b.cols);
    for r in 0..n {
        for c in 0..n {
            if a.get(r, c) {
                aug.set(r, c, true);
            }
        }
        for c in 0..b.cols {
            if b.get(r, c) {
                aug.set(r, n + c, true);
            }
        }
    }
    for col in 0..n {
        let pivot = (col..n).find(|&r| aug.get(r, col))?;
        aug.swap_rows(col, pivot);
        for r in 0..n {
            if r != col && aug.get(r, col) {
                aug.xor_row(r, col);
            }
        }
    }
    let mut x = BitMatrix::zero(n, b.cols);
    for r in 0..n {
        for c in 0..b.cols {
            if aug.get(r, n + c) {
                x.set(r, c, true);
            }
        }
    }
    Some(x)
}
