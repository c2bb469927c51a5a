/// Row-major dense square matrix, used for per-part evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// `self * self` for a symmetric matrix.
    ///
    /// Every element accumulates its products in ascending inner index and
    /// only the upper triangle is computed, then mirrored, so the result is
    /// exactly symmetric and independent of thread scheduling.
    pub fn square_symmetric(&self) -> DenseMatrix {
        let n = self.n;
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            let a_i = self.row(i);
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for (k, &a_ik) in a_i.iter().enumerate() {
                if a_ik == 0.0 {
                    continue;
                }
                let a_k = &self.data[k * n..(k + 1) * n];
                for j in i..n {
                    out_row[j] += a_ik * a_k[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                out.data[i * n + j] = out.data[j * n + i];
            }
        }
        out
    }

    /// Entrywise `2 * self - sq`.
    pub fn double_minus(&self, sq: &DenseMatrix) -> DenseMatrix {
        debug_assert_eq!(self.n, sq.n);
        DenseMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&sq.data)
                .map(|(x, s)| 2.0 * x - s)
                .collect(),
        }
    }

    /// Zeroes every off-diagonal element with `|value| < tau`.
    pub fn threshold_in_place(&mut self, tau: f64) {
        if tau <= 0.0 {
            return;
        }
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                if i != j && self.data[i * n + j].abs() < tau {
                    self.data[i * n + j] = 0.0;
                }
            }
        }
    }
}
