use crate::vfield::C64;

/// Dense real matrix, row-major, with complex right-hand sides.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub n: usize,
    pub a: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Factored {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    pub det: f64,
}

impl Dense {
    pub fn zeros(n: usize) -> Self {
        Dense { n, a: vec![0.0; n * n] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] += v;
    }

    pub fn inf_norm(&self) -> f64 {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j).abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// LU with partial pivoting; the determinant is recorded even when it vanishes.
    pub fn factor(&self) -> Factored {
        let n = self.n;
        let mut lu = self.a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut det = 1.0;
        for c in 0..n {
            let p = (c..n).max_by(|&x, &y| lu[x * n + c].abs().total_cmp(&lu[y * n + c].abs())).unwrap_or(c);
            if p != c {
                for j in 0..n {
                    lu.swap(c * n + j, p * n + j);
                }
                perm.swap(c, p);
                det = -det;
            }
            let piv = lu[c * n + c];
            det *= piv;
            if piv == 0.0 {
                continue;
            }
            for r in c + 1..n {
                let f = lu[r * n + c] / piv;
                lu[r * n + c] = f;
                for j in c + 1..n {
                    lu[r * n + j] -= f * lu[c * n + j];
                }
            }
        }
        Factored { n, lu, perm, det }
    }
}

impl Factored {
    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            for c in 0..r {
                let f = self.lu[r * n + c];
                x[r] = x[r] - x[c] * f;
            }
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                let f = self.lu[r * n + c];
                x[r] = x[r] - x[c] * f;
            }
            x[r] /= self.lu[r * n + r];
        }
        x
    }

    /// ‖A‖∞‖A⁻¹‖∞
    pub fn condition(&self, a: &Dense) -> f64 {
        if self.det == 0.0 {
            return f64::INFINITY;
        }
        let n = self.n;
        let mut inv_rows = vec![0.0; n];
        for c in 0..n {
            let mut e = vec![C64::default(); n];
            e[c] = C64::new(1.0, 0.0);
            let col = self.solve(&e);
            for r in 0..n {
                inv_rows[r] += col[r].re.abs();
            }
        }
        a.inf_norm() * inv_rows.into_iter().fold(0.0, f64::max)
    }
}
