//! Dense row-major grids and the count-map wrapper built on them.

mod io;
mod scalar;

pub use io::{decode_grid, encode_grid, read_grid, write_grid};
pub use scalar::Scalar;

use crate::error::{Error, Result};

/// Dense row-major array with an explicit shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T = f64> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Grid<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidShape(shape));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::mismatch("grid data length", &[len], &[data.len()]));
        }
        Ok(Self { shape, data })
    }

    /// Panics on an invalid shape; intended for internally computed shapes.
    pub fn filled(shape: &[usize], value: T) -> Self {
        assert!(
            !shape.is_empty() && shape.iter().all(|&d| d > 0),
            "invalid grid shape {shape:?}"
        );
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, T::ZERO)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::filled(shape, T::ONE)
    }

    pub fn from_fn2(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(h * w);
        for r in 0..h {
            for c in 0..w {
                data.push(f(r, c));
            }
        }
        Self::new(vec![h, w], data).expect("valid 2d shape")
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ndims(&self) -> usize {
        self.shape.len()
    }

    /// `(height, width)` of the two trailing dimensions.
    pub fn hw(&self) -> (usize, usize) {
        let n = self.shape.len();
        match n {
            0 => (1, 1),
            1 => (1, self.shape[0]),
            _ => (self.shape[n - 2], self.shape[n - 1]),
        }
    }

    /// Product of all dimensions before the trailing two.
    pub fn planes(&self) -> usize {
        let n = self.shape.len();
        if n <= 2 {
            1
        } else {
            self.shape[..n - 2].iter().product()
        }
    }

    pub fn get2(&self, r: usize, c: usize) -> T {
        let (_, w) = self.hw();
        self.data[r * w + c]
    }

    pub fn set2(&mut self, r: usize, c: usize, v: T) {
        let (_, w) = self.hw();
        self.data[r * w + c] = v;
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|v| v.to_f64()).sum()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::mismatch("zip_map", &self.shape, &other.shape));
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn cast<U: Scalar>(&self) -> Grid<U> {
        Grid {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }

    /// Copies one plane (index over the leading dimensions) as a 2D grid.
    pub fn plane(&self, index: usize) -> Grid<T> {
        let (h, w) = self.hw();
        let start = index * h * w;
        Grid {
            shape: vec![h, w],
            data: self.data[start..start + h * w].to_vec(),
        }
    }
}

/// Sums every `k x k` block of the two trailing dimensions.
pub fn block_sum<T: Scalar>(g: &Grid<T>, k: usize) -> Result<Grid<T>> {
    if k == 0 {
        return Err(Error::InvalidArgument("block size must be positive".into()));
    }
    let nd = g.ndims();
    let (h, w) = g.hw();
    if h % k != 0 {
        return Err(Error::ShapeNotDivisible {
            dim: nd.saturating_sub(2),
            size: h,
            k,
        });
    }
    if w % k != 0 {
        return Err(Error::ShapeNotDivisible {
            dim: nd - 1,
            size: w,
            k,
        });
    }
    if k == 1 {
        return Ok(g.clone());
    }
    let (oh, ow) = (h / k, w / k);
    let mut shape = g.shape.clone();
    shape[nd - 1] = ow;
    if nd >= 2 {
        shape[nd - 2] = oh;
    }
    let mut out = vec![T::ZERO; g.planes() * oh * ow];
    for p in 0..g.planes() {
        let src = &g.data[p * h * w..(p + 1) * h * w];
        let dst = &mut out[p * oh * ow..(p + 1) * oh * ow];
        for r in 0..h {
            let row = &src[r * w..(r + 1) * w];
            let drow = &mut dst[(r / k) * ow..(r / k + 1) * ow];
            for (c, &v) in row.iter().enumerate() {
                drow[c / k] += v;
            }
        }
    }
    Grid::new(shape, out)
}

/// Elementwise product of two grids of identical shape.
pub fn hadamard<T: Scalar>(a: &Grid<T>, b: &Grid<T>) -> Result<Grid<T>> {
    if a.shape != b.shape {
        return Err(Error::mismatch("hadamard", &a.shape, &b.shape));
    }
    a.zip_map(b, |x, y| x * y)
}

/// Non-negative per-cell counts, each cell summarizing a `cell_px` square.
#[derive(Clone, Debug, PartialEq)]
pub struct CountMap {
    grid: Grid<f64>,
    cell_px: usize,
}

impl CountMap {
    pub fn new(grid: Grid<f64>, cell_px: usize) -> Result<Self> {
        if grid.ndims() != 2 {
            return Err(Error::InvalidShape(grid.shape().to_vec()));
        }
        if cell_px == 0 || !cell_px.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "cell size {cell_px} is not a positive power of two"
            )));
        }
        if let Some(&v) = grid.data().iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::NegativeCount(v));
        }
        Ok(Self { grid, cell_px })
    }

    pub fn zeros(h: usize, w: usize, cell_px: usize) -> Self {
        Self::new(Grid::zeros(&[h, w]), cell_px).expect("zero count map")
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.grid
    }

    pub fn into_grid(self) -> Grid<f64> {
        self.grid
    }

    pub fn cell_px(&self) -> usize {
        self.cell_px
    }

    pub fn hw(&self) -> (usize, usize) {
        self.grid.hw()
    }

    pub fn total(&self) -> f64 {
        self.grid.sum()
    }

    /// Coarsens by summing `k x k` cells.
    pub fn coarsen(&self, k: usize) -> Result<CountMap> {
        CountMap::new(block_sum(&self.grid, k)?, self.cell_px * k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Grid {
        Grid::from_fn2(h, w, |_, _| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn block_sum_of_ones() {
        let g = Grid::<f64>::ones(&[2, 2]);
        let s = block_sum(&g, 2).unwrap();
        assert_eq!(s.shape(), &[1, 1]);
        assert_eq!(s.data(), &[4.0]);
    }

    #[test]
    fn block_sum_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_grid(&mut rng, 3, 5);
        assert_eq!(block_sum(&g, 1).unwrap(), g);
    }

    #[test]
    fn block_sum_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_grid(&mut rng, 4, 4);
        let s = block_sum(&g, 2).unwrap();
        for br in 0..2 {
            for bc in 0..2 {
                let mut acc = 0.0;
                for r in 0..2 {
                    for c in 0..2 {
                        acc += g.get2(br * 2 + r, bc * 2 + c);
                    }
                }
                assert!((s.get2(br, bc) - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn block_sum_reports_offending_dimension() {
        let g = Grid::<f64>::ones(&[4, 6]);
        match block_sum(&g, 4) {
            Err(Error::ShapeNotDivisible { dim, size, k }) => {
                assert_eq!((dim, size, k), (1, 6, 4));
            }
            other => panic!("unexpected {other:?}"),
        }
        let g = Grid::<f64>::ones(&[3, 4]);
        assert!(matches!(
            block_sum(&g, 2),
            Err(Error::ShapeNotDivisible { dim: 0, .. })
        ));
    }

    #[test]
    fn block_sum_over_channels() {
        let g = Grid::new(vec![2, 2, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        let s = block_sum(&g, 2).unwrap();
        assert_eq!(s.shape(), &[2, 1, 1]);
        assert_eq!(s.data(), &[10.0, 26.0]);
    }

    #[test]
    fn hadamard_identity_and_annihilator() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_grid(&mut rng, 3, 3);
        assert_eq!(hadamard(&a, &Grid::ones(&[3, 3])).unwrap(), a);
        assert_eq!(
            hadamard(&a, &Grid::zeros(&[3, 3])).unwrap().data().iter().map(|v| v.abs()).sum::<f64>(),
            0.0
        );
    }

    #[test]
    fn hadamard_matches_elementwise_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_grid(&mut rng, 3, 3);
        let b = random_grid(&mut rng, 3, 3);
        let p = hadamard(&a, &b).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert!((p.get2(r, c) - a.get2(r, c) * b.get2(r, c)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn hadamard_shape_mismatch() {
        let a = Grid::<f64>::ones(&[2, 2]);
        let b = Grid::<f64>::ones(&[2, 3]);
        assert!(matches!(hadamard(&a, &b), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(Grid::<f64>::new(vec![0, 2], vec![]).is_err());
        assert!(Grid::<f64>::new(vec![2, 2], vec![1.0; 3]).is_err());
    }

    #[test]
    fn count_map_validation() {
        assert!(CountMap::new(Grid::from_fn2(1, 1, |_, _| -0.1), 64).is_err());
        assert!(CountMap::new(Grid::zeros(&[2, 2]), 48).is_err());
        assert!(CountMap::new(Grid::zeros(&[1, 2, 2]), 64).is_err());
        let c = CountMap::new(Grid::ones(&[4, 4]), 16).unwrap();
        let coarse = c.coarsen(4).unwrap();
        assert_eq!(coarse.cell_px(), 64);
        assert_eq!(coarse.grid().data(), &[16.0]);
    }

    proptest! {
        #[test]
        fn block_sum_preserves_total(
            bh in 1usize..5, bw in 1usize..5, k in 1usize..5, seed in any::<u64>()
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_grid(&mut rng, bh * k, bw * k);
            let s = block_sum(&g, k).unwrap();
            let denom = g.data().iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            prop_assert!((s.sum() - g.sum()).abs() / denom < 1e-9);
        }

        #[test]
        fn hadamard_commutes_and_associates(h in 1usize..6, w in 1usize..6, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_grid(&mut rng, h, w);
            let b = random_grid(&mut rng, h, w);
            let c = random_grid(&mut rng, h, w);
            let ab = hadamard(&a, &b).unwrap();
            let ba = hadamard(&b, &a).unwrap();
            prop_assert_eq!(&ab, &ba);
            let l = hadamard(&ab, &c).unwrap();
            let r = hadamard(&a, &hadamard(&b, &c).unwrap()).unwrap();
            for (x, y) in l.data().iter().zip(r.data()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
