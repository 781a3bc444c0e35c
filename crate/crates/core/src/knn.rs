//! Brute-force 1-nearest-neighbour classifier with euclidean distance.

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone)]
pub struct KnnIndex {
    points: DenseMatrix,
    labels: Vec<Label>,
}

impl KnnIndex {
    pub fn build(points: DenseMatrix, labels: Vec<Label>) -> Result<Self> {
        if points.rows() == 0 {
            return Err(Error::Empty("1-NN training set".into()));
        }
        if labels.len() != points.rows() {
            return Err(Error::Shape(format!(
                "{} points but {} labels",
                points.rows(),
                labels.len()
            )));
        }
        Ok(Self { points, labels })
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.points.cols()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// Row index of the nearest training point; earlier rows win ties.
    pub fn nearest(&self, query: &[f64]) -> Result<usize> {
        if query.len() != self.width() {
            return Err(Error::Shape(format!(
                "query width {} vs index width {}",
                query.len(),
                self.width()
            )));
        }
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.points.row_iter().enumerate() {
            let mut d = 0.0;
            for (a, b) in p.iter().zip(query) {
                let t = a - b;
                d += t * t;
            }
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best.0)
    }

    pub fn classify(&self, query: &[f64]) -> Result<Label> {
        Ok(self.labels[self.nearest(query)?])
    }

    pub fn classify_batch(&self, queries: &DenseMatrix) -> Result<Vec<Label>> {
        queries.row_iter().map(|q| self.classify(q)).collect()
    }
}
