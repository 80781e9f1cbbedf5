//! Minimal dense 4-D tensor: `(batch, channels, height, width)`, row-major.

/// Owned f64 tensor in NCHW layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self {
            n,
            c,
            h,
            w,
            data: vec![0.0; n * c * h * w],
        }
    }

    pub fn from_data(n: usize, c: usize, h: usize, w: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * c * h * w, "tensor data length mismatch");
        Self { n, c, h, w, data }
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.n, self.c, self.h, self.w)
    }

    /// Elements per sample.
    pub fn sample_len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn sample(&self, index: usize) -> &[f64] {
        let len = self.sample_len();
        &self.data[index * len..(index + 1) * len]
    }

    pub fn sample_mut(&mut self, index: usize) -> &mut [f64] {
        let len = self.sample_len();
        &mut self.data[index * len..(index + 1) * len]
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> f64 {
        self.data[((n * self.c + c) * self.h + h) * self.w + w]
    }

    #[inline]
    pub fn at_mut(&mut self, n: usize, c: usize, h: usize, w: usize) -> &mut f64 {
        &mut self.data[((n * self.c + c) * self.h + h) * self.w + w]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Rows of a `(n, dim, 1, 1)` tensor as vectors.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        assert_eq!(self.h * self.w, 1, "to_rows wants a flat (n, dim, 1, 1) tensor");
        (0..self.n).map(|i| self.sample(i).to_vec()).collect()
    }
}
