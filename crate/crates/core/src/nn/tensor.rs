use crate::{Error, Result};

/// Dense row-major array of `f64` with an explicit shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) && !data.is_empty() {
            return Err(Error::Shape(format!("shape {shape:?} has a zero dimension")));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Tensor::new"));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    /// Build a matrix from equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(vec![rows.len(), cols], rows.concat())
    }

    pub fn vector(data: Vec<f64>) -> Result<Self> {
        Self::new(vec![data.len()], data)
    }

    // Internal constructor for results the caller has already sized.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Number of rows of a matrix (first dimension).
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Number of columns of a matrix; a vector counts as one row.
    pub fn cols(&self) -> usize {
        match self.shape.len() {
            0 => 0,
            1 => self.shape[0],
            _ => self.shape[1..].iter().product(),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, op: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(op))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::from_parts(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, k: f64) -> Tensor {
        self.map(|v| v * k)
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.expect_same_shape(other, "add")?;
        Ok(Tensor::from_parts(
            self.shape.clone(),
            self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.expect_same_shape(other, "sub")?;
        Ok(Tensor::from_parts(
            self.shape.clone(),
            self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        self.expect_same_shape(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn expect_same_shape(&self, other: &Tensor, op: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "{op}: shapes {:?} and {:?} differ",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    fn expect_matrix(&self, op: &str) -> Result<(usize, usize)> {
        if self.shape.len() != 2 {
            return Err(Error::Shape(format!("{op}: expected a matrix, got shape {:?}", self.shape)));
        }
        Ok((self.shape[0], self.shape[1]))
    }

    /// `self · otherᵀ`: `(n×k) · (m×k)ᵀ -> n×m`.
    pub fn matmul_nt(&self, other: &Tensor) -> Result<Tensor> {
        let (n, k) = self.expect_matrix("matmul_nt")?;
        let (m, k2) = other.expect_matrix("matmul_nt")?;
        if k != k2 {
            return Err(Error::Shape(format!("matmul_nt: inner dims {k} and {k2} differ")));
        }
        let mut out = vec![0.0; n * m];
        for (i, out_row) in out.chunks_exact_mut(m).enumerate() {
            let a = &self.data[i * k..(i + 1) * k];
            for (j, o) in out_row.iter_mut().enumerate() {
                *o = dot(a, &other.data[j * k..(j + 1) * k]);
            }
        }
        Ok(Tensor::from_parts(vec![n, m], out))
    }

    /// `self · other`: `(n×k) · (k×m) -> n×m`.
    pub fn matmul_nn(&self, other: &Tensor) -> Result<Tensor> {
        let (n, k) = self.expect_matrix("matmul_nn")?;
        let (k2, m) = other.expect_matrix("matmul_nn")?;
        if k != k2 {
            return Err(Error::Shape(format!("matmul_nn: inner dims {k} and {k2} differ")));
        }
        let mut out = vec![0.0; n * m];
        for (i, out_row) in out.chunks_exact_mut(m).enumerate() {
            for (p, &a) in self.data[i * k..(i + 1) * k].iter().enumerate() {
                if a != 0.0 {
                    axpy(a, &other.data[p * m..(p + 1) * m], out_row);
                }
            }
        }
        Ok(Tensor::from_parts(vec![n, m], out))
    }

    /// `selfᵀ · other`: `(n×k)ᵀ · (n×m) -> k×m`.
    pub fn matmul_tn(&self, other: &Tensor) -> Result<Tensor> {
        let (n, k) = self.expect_matrix("matmul_tn")?;
        let (n2, m) = other.expect_matrix("matmul_tn")?;
        if n != n2 {
            return Err(Error::Shape(format!("matmul_tn: row counts {n} and {n2} differ")));
        }
        let mut out = vec![0.0; k * m];
        for i in 0..n {
            let b = &other.data[i * m..(i + 1) * m];
            for (p, &a) in self.data[i * k..(i + 1) * k].iter().enumerate() {
                if a != 0.0 {
                    axpy(a, b, &mut out[p * m..(p + 1) * m]);
                }
            }
        }
        Ok(Tensor::from_parts(vec![k, m], out))
    }

    /// Column sums of a matrix, as a vector.
    pub fn sum_rows(&self) -> Result<Tensor> {
        let (_, m) = self.expect_matrix("sum_rows")?;
        let mut out = vec![0.0; m];
        for row in self.data.chunks_exact(m) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        Ok(Tensor::from_parts(vec![m], out))
    }

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn concat_cols(parts: &[&Tensor]) -> Result<Tensor> {
        let n = parts.first().map_or(0, |t| t.rows());
        let mut widths = Vec::with_capacity(parts.len());
        for t in parts {
            let (r, c) = t.expect_matrix("concat_cols")?;
            if r != n {
                return Err(Error::Shape(format!("concat_cols: row counts {n} and {r} differ")));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(n * total);
        for i in 0..n {
            for (t, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&t.data[i * w..(i + 1) * w]);
            }
        }
        Ok(Tensor::from_parts(vec![n, total], out))
    }

    /// Split a matrix into a left block of `at` columns and the remainder.
    pub fn split_cols(&self, at: usize) -> Result<(Tensor, Tensor)> {
        let (n, m) = self.expect_matrix("split_cols")?;
        if at > m {
            return Err(Error::Shape(format!("split_cols: split point {at} beyond width {m}")));
        }
        let mut left = Vec::with_capacity(n * at);
        let mut right = Vec::with_capacity(n * (m - at));
        for row in self.data.chunks_exact(m) {
            left.extend_from_slice(&row[..at]);
            right.extend_from_slice(&row[at..]);
        }
        Ok((
            Tensor::from_parts(vec![n, at], left),
            Tensor::from_parts(vec![n, m - at], right),
        ))
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Tensor {
        let c = self.cols();
        let mut out = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            out.extend_from_slice(self.row(i));
        }
        let mut shape = self.shape.clone();
        if shape.is_empty() {
            shape.push(0);
        }
        shape[0] = idx.len();
        Tensor::from_parts(shape, out)
    }

    /// Little-endian bytes of every value, used for bit-exact comparisons.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four independent lanes so the loop vectorizes; summation order is fixed
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let m = b[0].len();
        a.iter()
            .map(|r| (0..m).map(|j| r.iter().zip(b).map(|(x, br)| x * br[j]).sum()).collect())
            .collect()
    }

    fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
        (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
    }

    #[test]
    fn rejects_bad_lengths_and_non_finite() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(matches!(
            Tensor::new(vec![1], vec![f64::NAN]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn matmul_variants_agree_with_naive_products() {
        let a = vec![vec![1.0, -2.0, 0.5, 3.0, 1.5], vec![0.0, 4.0, -1.0, 2.0, -0.5]];
        let b = vec![
            vec![2.0, 1.0, 0.0],
            vec![-1.0, 0.5, 3.0],
            vec![0.25, 0.0, -2.0],
            vec![1.0, 1.0, 1.0],
            vec![0.0, -3.0, 2.0],
        ];
        let ta = Tensor::from_rows(&a).unwrap();
        let tb = Tensor::from_rows(&b).unwrap();
        let expect = Tensor::from_rows(&naive(&a, &b)).unwrap();
        assert_eq!(ta.matmul_nn(&tb).unwrap(), expect);
        let tbt = Tensor::from_rows(&transpose(&b)).unwrap();
        assert_eq!(ta.matmul_nt(&tbt).unwrap(), expect);
        let tat = Tensor::from_rows(&transpose(&a)).unwrap();
        assert_eq!(tat.matmul_tn(&tb).unwrap(), expect);
    }

    #[test]
    fn concat_then_split_is_identity() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Tensor::from_rows(&[vec![5.0], vec![6.0]]).unwrap();
        let c = Tensor::concat_cols(&[&a, &b]).unwrap();
        assert_eq!(c.data(), &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
        let (l, r) = c.split_cols(2).unwrap();
        assert_eq!((l, r), (a, b));
    }
}
