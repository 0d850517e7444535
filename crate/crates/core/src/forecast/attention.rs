//! Scaled dot-product attention and its ProbSparse variant.

use nalgebra::{DMatrix, RowDVector};

use crate::error::{Error, Result};

/// Queries `L_Q x d`, keys `L_K x d`, values `L_K x d_v`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionInput {
    pub queries: DMatrix<f64>,
    pub keys: DMatrix<f64>,
    pub values: DMatrix<f64>,
}

impl AttentionInput {
    pub fn new(queries: DMatrix<f64>, keys: DMatrix<f64>, values: DMatrix<f64>) -> Result<Self> {
        let input = Self {
            queries,
            keys,
            values,
        };
        input.validate()?;
        Ok(input)
    }

    /// Self-attention: `Q = K = V = z`.
    pub fn self_attention(z: &DMatrix<f64>) -> Result<Self> {
        Self::new(z.clone(), z.clone(), z.clone())
    }

    fn validate(&self) -> Result<()> {
        let (lq, d) = self.queries.shape();
        let (lk, dk) = self.keys.shape();
        if d == 0 || lq == 0 || lk == 0 {
            return Err(Error::validation(format!(
                "attention needs non-empty inputs, got Q {lq}x{d}, K {lk}x{dk}"
            )));
        }
        if d != dk {
            return Err(Error::validation(format!(
                "query width {d} differs from key width {dk}"
            )));
        }
        if self.values.nrows() != lk || self.values.ncols() == 0 {
            return Err(Error::validation(format!(
                "values must have {lk} rows and at least one column, got {}x{}",
                self.values.nrows(),
                self.values.ncols()
            )));
        }
        Ok(())
    }

    /// Query-key scores `Q K^T / sqrt(d)`.
    pub fn scores(&self) -> DMatrix<f64> {
        let scale = (self.queries.ncols() as f64).sqrt();
        (&self.queries * self.keys.transpose()) / scale
    }
}

fn softmax_row(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    row.iter_mut().for_each(|x| *x /= sum);
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Row-stochastic attention weights.
pub fn attention_weights(input: &AttentionInput) -> Result<DMatrix<f64>> {
    input.validate()?;
    let scores = input.scores();
    let (rows, cols) = scores.shape();
    let mut weights = DMatrix::zeros(rows, cols);
    let mut buf = vec![0.0; cols];
    for i in 0..rows {
        buf.iter_mut()
            .zip(scores.row(i).iter())
            .for_each(|(b, &s)| *b = s);
        softmax_row(&mut buf);
        weights.row_mut(i).copy_from_slice(&buf);
    }
    Ok(weights)
}

/// `softmax(Q K^T / sqrt(d)) V`.
pub fn full_attention(input: &AttentionInput) -> Result<DMatrix<f64>> {
    Ok(attention_weights(input)? * &input.values)
}

/// `M(q, K) = log sum_j exp(q k_j / sqrt(d)) - mean_j(q k_j / sqrt(d))`.
pub fn sparsity_measure(q: &[f64], keys: &DMatrix<f64>, d: usize) -> Result<f64> {
    if q.len() != keys.ncols() || d == 0 {
        return Err(Error::validation(format!(
            "query of length {} against keys of width {}",
            q.len(),
            keys.ncols()
        )));
    }
    if keys.nrows() == 0 {
        return Err(Error::validation("key matrix is empty"));
    }
    let scale = (d as f64).sqrt();
    let scores: Vec<f64> = keys
        .row_iter()
        .map(|k| k.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() / scale)
        .collect();
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok(log_sum_exp(scores.iter().copied()) - mean)
}

/// Default number of active queries, `ceil(5 ln L_Q)` capped at `L_Q`.
pub fn default_active_queries(l_q: usize) -> usize {
    if l_q <= 1 {
        return l_q;
    }
    ((5.0 * (l_q as f64).ln()).ceil() as usize).min(l_q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbSparseOutput {
    pub output: DMatrix<f64>,
    /// Active query indices, ascending.
    pub selected: Vec<usize>,
}

/// Full attention for the `u` queries with the largest sparsity measure;
/// every other row receives the column mean of `V`.
pub fn probsparse_attention_detailed(input: &AttentionInput, u: usize) -> Result<ProbSparseOutput> {
    input.validate()?;
    let l_q = input.queries.nrows();
    if u > l_q {
        return Err(Error::validation(format!(
            "cannot select {u} active queries out of {l_q}"
        )));
    }
    let d = input.queries.ncols();
    let mut ranked = Vec::with_capacity(l_q);
    for i in 0..l_q {
        let q: Vec<f64> = input.queries.row(i).iter().copied().collect();
        ranked.push((i, sparsity_measure(&q, &input.keys, d)?));
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut selected: Vec<usize> = ranked[..u].iter().map(|&(i, _)| i).collect();
    selected.sort_unstable();

    let mean: RowDVector<f64> = input.values.row_mean();
    let mut output = DMatrix::zeros(l_q, input.values.ncols());
    for i in 0..l_q {
        output.row_mut(i).copy_from(&mean);
    }
    if !selected.is_empty() {
        let active = AttentionInput {
            queries: input.queries.select_rows(selected.iter()),
            keys: input.keys.clone(),
            values: input.values.clone(),
        };
        let rows = full_attention(&active)?;
        for (r, &i) in selected.iter().enumerate() {
            output.row_mut(i).copy_from(&rows.row(r));
        }
    }
    Ok(ProbSparseOutput { output, selected })
}

pub fn probsparse_attention(input: &AttentionInput, u: usize) -> Result<DMatrix<f64>> {
    probsparse_attention_detailed(input, u).map(|o| o.output)
}
