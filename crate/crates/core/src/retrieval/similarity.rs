use crate::error::{Error, Result};
use crate::nn::Real;

/// Dense query × candidate scores with the class label of every row/column.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    scores: Vec<f64>,
    query_labels: Vec<usize>,
    candidate_labels: Vec<usize>,
}

impl SimilarityMatrix {
    /// Labels default to the identity pairing (query `i` matches candidate `i`).
    pub fn new(rows: usize, cols: usize, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} scores for a {rows}×{cols} matrix",
                scores.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Data("similarity scores must be finite".into()));
        }
        Ok(Self {
            rows,
            cols,
            scores,
            query_labels: (0..rows).collect(),
            candidate_labels: (0..cols).collect(),
        })
    }

    pub fn with_labels(mut self, query: Vec<usize>, candidate: Vec<usize>) -> Result<Self> {
        if query.len() != self.rows || candidate.len() != self.cols {
            return Err(Error::Shape("label vectors do not match the matrix shape".into()));
        }
        self.query_labels = query;
        self.candidate_labels = candidate;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
    pub fn row(&self, i: usize) -> &[f64] {
        &self.scores[i * self.cols..(i + 1) * self.cols]
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.scores[i * self.cols + j]
    }
    pub fn query_labels(&self) -> &[usize] {
        &self.query_labels
    }
    pub fn candidate_labels(&self) -> &[usize] {
        &self.candidate_labels
    }

    pub(crate) fn is_hit(&self, i: usize, j: usize) -> bool {
        self.query_labels[i] == self.candidate_labels[j]
    }
}

fn row_norms<T: Real>(x: &[T], dim: usize, what: &str) -> Result<Vec<f64>> {
    x.chunks_exact(dim)
        .enumerate()
        .map(|(i, r)| {
            let n = r.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt();
            if n > 0.0 && n.is_finite() {
                Ok(n)
            } else {
                Err(Error::Data(format!("{what} row {i} has zero or non-finite norm")))
            }
        })
        .collect()
}

/// `S[i, j] = ⟨e_i, v_j⟩ / (‖e_i‖ ‖v_j‖)`, accumulated in `f64`.
pub fn cosine_matrix<T: Real>(e: &[T], v: &[T], dim: usize) -> Result<SimilarityMatrix> {
    if dim == 0 || e.len() % dim != 0 || v.len() % dim != 0 {
        return Err(Error::Shape(format!(
            "embeddings of {} and {} values are not multiples of dim {dim}",
            e.len(),
            v.len()
        )));
    }
    let en = row_norms(e, dim, "query")?;
    let vn = row_norms(v, dim, "candidate")?;
    let mut scores = Vec::with_capacity(en.len() * vn.len());
    for (er, &a) in e.chunks_exact(dim).zip(&en) {
        for (vr, &b) in v.chunks_exact(dim).zip(&vn) {
            let dot: f64 = er.iter().zip(vr).map(|(x, y)| x.as_f64() * y.as_f64()).sum();
            scores.push((dot / (a * b)).clamp(-1.0, 1.0));
        }
    }
    SimilarityMatrix::new(en.len(), vn.len(), scores)
}

/// Fraction of queries whose best-ranked true-label candidate is within the
/// top `k`. Equal scores rank the lower candidate index first.
pub fn top_k_accuracy(s: &SimilarityMatrix, k: usize) -> Result<f64> {
    if k == 0 || k > s.cols {
        return Err(Error::Parameter(format!(
            "k = {k} outside 1..={} candidates",
            s.cols
        )));
    }
    if s.rows == 0 {
        return Err(Error::Parameter("no queries to evaluate".into()));
    }
    let mut hits = 0usize;
    for i in 0..s.rows {
        let row = s.row(i);
        let rank_of = |j: usize| {
            row.iter()
                .enumerate()
                .filter(|&(jj, &x)| x > row[j] || (x == row[j] && jj < j))
                .count()
        };
        let best = (0..s.cols).filter(|&j| s.is_hit(i, j)).map(rank_of).min();
        if best.is_some_and(|r| r < k) {
            hits += 1;
        }
    }
    Ok(hits as f64 / s.rows as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crafted_ranks() {
        // True candidate (diagonal) ranks 1, 1, 2, 4.
        let s = SimilarityMatrix::new(
            4,
            4,
            vec![
                0.9, 0.1, 0.2, 0.3, //
                0.1, 0.8, 0.2, 0.3, //
                0.1, 0.2, 0.5, 0.6, //
                0.4, 0.3, 0.2, 0.1, //
            ],
        )
        .unwrap();
        assert_eq!(top_k_accuracy(&s, 1).unwrap(), 0.5);
        assert_eq!(top_k_accuracy(&s, 2).unwrap(), 0.75);
        assert_eq!(top_k_accuracy(&s, 4).unwrap(), 1.0);
        assert!(matches!(top_k_accuracy(&s, 5), Err(Error::Parameter(_))));
        assert!(matches!(top_k_accuracy(&s, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn ties_go_to_the_lower_index() {
        let s = SimilarityMatrix::new(2, 2, vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        assert_eq!(top_k_accuracy(&s, 1).unwrap(), 0.5);
    }

    #[test]
    fn zero_row_rejected() {
        assert!(matches!(
            cosine_matrix(&[0.0f64, 0.0], &[1.0, 0.0], 2),
            Err(Error::Data(_))
        ));
    }
}
