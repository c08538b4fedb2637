use rand::Rng;

use super::{GradientSet, Mlp, MlpCache, Parameterized, Tensor};
use crate::{Error, Result};

/// Row-major `samples × slots` matrix of hashed feature indices.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct IndexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<usize>,
}

impl IndexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<usize>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Shape(format!(
                "index matrix {rows}×{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<'a>(cols: usize, rows: impl IntoIterator<Item = &'a [usize]>) -> Result<Self> {
        let mut data = Vec::new();
        let mut n = 0;
        for r in rows {
            if r.len() != cols {
                return Err(Error::Schema(format!("sample has {} slots, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
            n += 1;
        }
        Ok(Self { rows: n, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn select_rows(&self, idx: &[usize]) -> IndexMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        IndexMatrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }
}

/// Embedding rows for one feature slot.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub slot: String,
    /// `vocab_size × dim`
    pub rows: Tensor,
}

impl EmbeddingTable {
    pub fn new(slot: impl Into<String>, rows: Tensor) -> Result<Self> {
        if rows.shape().len() != 2 {
            return Err(Error::Shape("embedding table must be a matrix".into()));
        }
        Ok(Self { slot: slot.into(), rows })
    }

    /// Uniform(-0.01, 0.01) rows.
    pub fn init<R: Rng + ?Sized>(slot: impl Into<String>, vocab_size: usize, dim: usize, rng: &mut R) -> Self {
        let v = (0..vocab_size * dim).map(|_| rng.random_range(-0.01..0.01)).collect();
        Self {
            slot: slot.into(),
            rows: Tensor::from_parts(vec![vocab_size, dim], v),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.rows.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.rows.shape()[1]
    }
}

/// One embedding table per slot, all with the same width.
#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    tables: Vec<EmbeddingTable>,
    dim: usize,
}

impl Embeddings {
    pub fn new(tables: Vec<EmbeddingTable>) -> Result<Self> {
        let dim = tables.first().map_or(0, EmbeddingTable::dim);
        if tables.iter().any(|t| t.dim() != dim) {
            return Err(Error::Shape("embedding width differs across slots".into()));
        }
        Ok(Self { tables, dim })
    }

    pub fn init<R: Rng + ?Sized>(slots: &[(String, usize)], dim: usize, rng: &mut R) -> Self {
        let tables = slots
            .iter()
            .map(|(name, vocab)| EmbeddingTable::init(name.clone(), *vocab, dim, rng))
            .collect();
        Self { tables, dim }
    }

    pub fn tables(&self) -> &[EmbeddingTable] {
        &self.tables
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_slots(&self) -> usize {
        self.tables.len()
    }

    pub fn out_dim(&self) -> usize {
        self.dim * self.tables.len()
    }

    pub fn validate(&self, indices: &IndexMatrix) -> Result<()> {
        if indices.cols() != self.tables.len() {
            return Err(Error::Schema(format!(
                "samples carry {} slots, model has {}",
                indices.cols(),
                self.tables.len()
            )));
        }
        for i in 0..indices.rows() {
            for (t, &ix) in self.tables.iter().zip(indices.row(i)) {
                if ix >= t.vocab_size() {
                    return Err(Error::VocabBounds {
                        slot: t.slot.clone(),
                        index: ix,
                        vocab_size: t.vocab_size(),
                    });
                }
            }
        }
        Ok(())
    }

    /// `batch × (slots·dim)` tensor of per-slot rows concatenated in slot order.
    pub fn lookup(&self, indices: &IndexMatrix) -> Result<Tensor> {
        self.validate(indices)?;
        let d = self.dim;
        let mut out = Vec::with_capacity(indices.rows() * self.out_dim());
        for i in 0..indices.rows() {
            for (t, &ix) in self.tables.iter().zip(indices.row(i)) {
                out.extend_from_slice(&t.rows.data()[ix * d..(ix + 1) * d]);
            }
        }
        Ok(Tensor::from_parts(vec![indices.rows(), self.out_dim()], out))
    }

    /// Scatter-add of the output gradient into dense per-table gradients.
    pub fn backward(&self, indices: &IndexMatrix, grad_output: &Tensor) -> Result<GradientSet> {
        if grad_output.shape() != [indices.rows(), self.out_dim()] {
            return Err(Error::Shape(format!(
                "embedding grad shape {:?}, expected [{}, {}]",
                grad_output.shape(),
                indices.rows(),
                self.out_dim()
            )));
        }
        let d = self.dim;
        let mut grads: Vec<Tensor> = self.tables.iter().map(|t| Tensor::zeros(t.rows.shape())).collect();
        for i in 0..indices.rows() {
            let g = grad_output.row(i);
            for (s, (&ix, gt)) in indices.row(i).iter().zip(grads.iter_mut()).enumerate() {
                let dst = &mut gt.data_mut()[ix * d..(ix + 1) * d];
                for (a, b) in dst.iter_mut().zip(&g[s * d..(s + 1) * d]) {
                    *a += b;
                }
            }
        }
        Ok(GradientSet::new(grads))
    }
}

impl Parameterized for Embeddings {
    fn parameters(&self) -> Vec<&Tensor> {
        self.tables.iter().map(|t| &t.rows).collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.tables.iter_mut().map(|t| &mut t.rows).collect()
    }
}

/// Embedding front-end followed by an MLP: every bottom model, and the local DNN body.
#[derive(Clone, Debug, PartialEq)]
pub struct Tower {
    pub embeddings: Embeddings,
    pub mlp: Mlp,
}

#[derive(Clone, Debug)]
pub struct TowerCache {
    indices: IndexMatrix,
    mlp: MlpCache,
}

impl Tower {
    pub fn new(embeddings: Embeddings, mlp: Mlp) -> Result<Self> {
        if embeddings.out_dim() != mlp.in_dim() {
            return Err(Error::Shape(format!(
                "embedding width {} does not feed MLP input {}",
                embeddings.out_dim(),
                mlp.in_dim()
            )));
        }
        Ok(Self { embeddings, mlp })
    }

    pub fn out_dim(&self) -> usize {
        self.mlp.out_dim()
    }

    pub fn forward(&self, indices: &IndexMatrix) -> Result<(Tensor, TowerCache)> {
        let e = self.embeddings.lookup(indices)?;
        let (out, mlp) = self.mlp.forward(&e)?;
        Ok((
            out,
            TowerCache {
                indices: indices.clone(),
                mlp,
            },
        ))
    }

    pub fn infer(&self, indices: &IndexMatrix) -> Result<Tensor> {
        self.mlp.infer(&self.embeddings.lookup(indices)?)
    }

    /// Gradients for embedding tables followed by MLP parameters.
    pub fn backward(&self, cache: &TowerCache, grad_output: &Tensor) -> Result<GradientSet> {
        let (mlp_grads, grad_emb) = self.mlp.backward(&cache.mlp, grad_output)?;
        let emb_grads = self.embeddings.backward(&cache.indices, &grad_emb)?;
        Ok(emb_grads.chain(mlp_grads))
    }
}

impl Parameterized for Tower {
    fn parameters(&self) -> Vec<&Tensor> {
        let mut p = self.embeddings.parameters();
        p.extend(self.mlp.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.embeddings.parameters_mut();
        p.extend(self.mlp.parameters_mut());
        p
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn two_slots(dim: usize, seed: u64) -> Embeddings {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Embeddings::init(&[("a".into(), 8), ("b".into(), 12)], dim, &mut rng)
    }

    #[test]
    fn output_width_is_slots_times_dim() {
        let emb = two_slots(10, 0);
        let x = IndexMatrix::new(2, 2, vec![0, 1, 7, 11]).unwrap();
        assert_eq!(emb.lookup(&x).unwrap().shape(), &[2, 20]);
    }

    #[test]
    fn zero_tables_give_zero_output() {
        let tables = vec![
            EmbeddingTable::new("a", Tensor::zeros(&[4, 3])).unwrap(),
            EmbeddingTable::new("b", Tensor::zeros(&[5, 3])).unwrap(),
        ];
        let emb = Embeddings::new(tables).unwrap();
        let out = emb.lookup(&IndexMatrix::new(1, 2, vec![3, 4]).unwrap()).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lookup_concatenates_the_selected_rows() {
        let emb = two_slots(10, 5);
        let out = emb.lookup(&IndexMatrix::new(1, 2, vec![3, 7]).unwrap()).unwrap();
        let expected: Vec<f64> = emb.tables()[0].rows.row(3).iter().chain(emb.tables()[1].rows.row(7)).copied().collect();
        assert_eq!(out.data(), expected.as_slice());
    }

    #[test]
    fn out_of_range_and_slot_mismatch_are_errors() {
        let emb = two_slots(4, 0);
        assert!(matches!(
            emb.lookup(&IndexMatrix::new(1, 2, vec![8, 0]).unwrap()),
            Err(Error::VocabBounds { index: 8, .. })
        ));
        assert!(matches!(
            emb.lookup(&IndexMatrix::new(1, 3, vec![0, 0, 0]).unwrap()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn backward_accumulates_repeated_indices() {
        let emb = two_slots(2, 0);
        let x = IndexMatrix::new(2, 2, vec![1, 0, 1, 3]).unwrap();
        let g = Tensor::from_rows(&[vec![1.0, 2.0, 3.0, 4.0], vec![10.0, 20.0, 30.0, 40.0]]).unwrap();
        let grads = emb.backward(&x, &g).unwrap();
        assert_eq!(grads.tensors()[0].row(1), &[11.0, 22.0]);
        assert_eq!(grads.tensors()[1].row(0), &[3.0, 4.0]);
        assert_eq!(grads.tensors()[1].row(3), &[30.0, 40.0]);
    }
}
