//! Dense row-major 2-D storage shared by matrices of counts and rates.

/// A rectangular grid indexed by `(row, col)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid<V> {
    rows: usize,
    cols: usize,
    data: Vec<V>,
}

impl<V: Copy> Grid<V> {
    /// Grid filled with one value.
    pub fn filled(rows: usize, cols: usize, value: V) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Grid from row-major data; `data.len()` must equal `rows * cols`.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<V>) -> Self {
        assert_eq!(data.len(), rows * cols, "grid data length mismatch");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> V {
        debug_assert!(row < self.rows && col < self.cols);
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: V) {
        debug_assert!(row < self.rows && col < self.cols);
        self.data[row * self.cols + col] = value;
    }

    /// Row-major view of the underlying data.
    pub fn raw(&self) -> &[V] {
        &self.data
    }

    /// One row as a slice.
    pub fn row(&self, row: usize) -> &[V] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[V]> {
        self.data.chunks(self.cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_is_row_major() {
        let mut g = Grid::filled(2, 3, 0u64);
        g.set(1, 2, 7);
        assert_eq!(g.at(1, 2), 7);
        assert_eq!(g.raw(), &[0, 0, 0, 0, 0, 7]);
        assert_eq!(g.row(1), &[0, 0, 7]);
    }
}
