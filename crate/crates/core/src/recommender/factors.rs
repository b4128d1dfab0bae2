//! Regularized low-rank factorization of the rating matrix, trained by
//! alternating least squares on mean-centered observed entries.
//!
//! Minimizes `sum_(u,i) (r_ui - mu - p_u . q_i)^2 + lambda (|P|^2 + |Q|^2)`.
//! Each half-step solves the `k x k` ridge system of every row exactly, so the
//! objective never increases from one half-step to the next.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Rating, RecommendError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorParams {
    pub rank: usize,
    pub lambda: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for FactorParams {
    fn default() -> Self {
        Self {
            rank: 8,
            lambda: 0.1,
            iterations: 25,
            seed: 42,
        }
    }
}

/// Observed ratings with dense row/column indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RatingMatrix {
    pub users: Vec<String>,
    pub items: Vec<String>,
    /// `(user index, item index, rating)`.
    pub entries: Vec<(usize, usize, f64)>,
}

impl RatingMatrix {
    /// Builds from `user -> item -> rating`; ids are indexed in sorted order.
    pub fn from_nested(ratings: &BTreeMap<String, BTreeMap<String, Rating>>) -> Self {
        let users: Vec<String> = ratings
            .iter()
            .filter(|(_, row)| !row.is_empty())
            .map(|(u, _)| u.clone())
            .collect();
        let items: Vec<String> = ratings
            .values()
            .flat_map(|row| row.keys().cloned())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let item_index: BTreeMap<&str, usize> = items.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let entries = users
            .iter()
            .enumerate()
            .flat_map(|(ui, u)| {
                let item_index = &item_index;
                ratings[u]
                    .iter()
                    .map(move |(item, r)| (ui, item_index[item.as_str()], f64::from(r.get())))
            })
            .collect();
        Self { users, items, entries }
    }

    /// Builds from a dense matrix; `None` marks an unobserved cell.
    pub fn from_dense(rows: &[Vec<Option<f64>>]) -> Self {
        let n_items = rows.first().map_or(0, Vec::len);
        let entries = rows
            .iter()
            .enumerate()
            .flat_map(|(u, row)| row.iter().enumerate().filter_map(move |(i, r)| r.map(|r| (u, i, r))))
            .collect();
        Self {
            users: (0..rows.len()).map(|u| format!("u{u}")).collect(),
            items: (0..n_items).map(|i| format!("i{i}")).collect(),
            entries,
        }
    }
}

/// Objective and fit traces recorded during training.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    /// Objective at initialization, then after every half-step.
    pub objective: Vec<f64>,
    /// Training RMSE (unclamped) after every full iteration.
    pub rmse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub mu: f64,
    pub rank: usize,
    pub lambda: f64,
    pub iterations: usize,
    pub user_index: BTreeMap<String, usize>,
    pub item_index: BTreeMap<String, usize>,
    /// users x rank
    pub user_factors: DMatrix<f64>,
    /// items x rank
    pub item_factors: DMatrix<f64>,
    pub history: TrainingHistory,
}

impl FactorModel {
    /// Unclamped `mu + p_u . q_i` by dense index.
    pub fn raw(&self, user: usize, item: usize) -> f64 {
        self.mu + self.user_factors.row(user).dot(&self.item_factors.row(item))
    }

    /// Predicted rating clamped to `[1, 5]`. Unknown users or items fall
    /// back to the global mean.
    pub fn predict(&self, user: &str, item: &str) -> f64 {
        let raw = match (self.user_index.get(user), self.item_index.get(item)) {
            (Some(&u), Some(&i)) => self.raw(u, i),
            _ => self.mu,
        };
        raw.clamp(Rating::MIN, Rating::MAX)
    }

    pub fn rmse(&self, entries: &[(usize, usize, f64)]) -> f64 {
        if entries.is_empty() {
            return 0.0;
        }
        let sse: f64 = entries.iter().map(|&(u, i, r)| (r - self.raw(u, i)).powi(2)).sum();
        (sse / entries.len() as f64).sqrt()
    }
}

fn objective(entries: &[(usize, usize, f64)], mu: f64, p: &DMatrix<f64>, q: &DMatrix<f64>, lambda: f64) -> f64 {
    let sse: f64 = entries
        .iter()
        .map(|&(u, i, r)| (r - mu - p.row(u).dot(&q.row(i))).powi(2))
        .sum();
    sse + lambda * (p.norm_squared() + q.norm_squared())
}

/// Solves every row of `target` against the fixed `other` factors.
/// `by_row[row]` lists `(other index, centered rating)`.
fn solve_rows(target: &mut DMatrix<f64>, other: &DMatrix<f64>, by_row: &[Vec<(usize, f64)>], lambda: f64) {
    let k = other.ncols();
    for (row, observed) in by_row.iter().enumerate() {
        if observed.is_empty() {
            target.row_mut(row).fill(0.0);
            continue;
        }
        let mut a = DMatrix::<f64>::identity(k, k) * lambda;
        let mut b = DVector::<f64>::zeros(k);
        for &(j, r) in observed {
            let f = other.row(j).transpose();
            a += &f * f.transpose();
            b += f * r;
        }
        let solution = match a.clone().cholesky() {
            Some(ch) => ch.solve(&b),
            // singular only when lambda == 0 and the fixed factors are rank deficient
            None => a
                .svd(true, true)
                .solve(&b, 1e-12)
                .unwrap_or_else(|_| DVector::zeros(k)),
        };
        target.row_mut(row).copy_from(&solution.transpose());
    }
}

/// Trains an ALS factor model. The rank is capped at `min(users, items)`.
pub fn fit_factors(matrix: &RatingMatrix, params: &FactorParams) -> Result<FactorModel, RecommendError> {
    if matrix.entries.is_empty() {
        return Err(RecommendError::EmptyRatings);
    }
    let n_users = matrix.users.len();
    let n_items = matrix.items.len();
    let k = params.rank.min(n_users).min(n_items).max(1);
    let mu = matrix.entries.iter().map(|e| e.2).sum::<f64>() / matrix.entries.len() as f64;

    let mut by_user = vec![Vec::new(); n_users];
    let mut by_item = vec![Vec::new(); n_items];
    for &(u, i, r) in &matrix.entries {
        by_user[u].push((i, r - mu));
        by_item[i].push((u, r - mu));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let scale = 0.1;
    let mut p = DMatrix::from_fn(n_users, k, |_, _| rng.random_range(-scale..scale));
    let mut q = DMatrix::from_fn(n_items, k, |_, _| rng.random_range(-scale..scale));

    let mut history = TrainingHistory::default();
    history.objective.push(objective(&matrix.entries, mu, &p, &q, params.lambda));
    for _ in 0..params.iterations {
        solve_rows(&mut p, &q, &by_user, params.lambda);
        history.objective.push(objective(&matrix.entries, mu, &p, &q, params.lambda));
        solve_rows(&mut q, &p, &by_item, params.lambda);
        history.objective.push(objective(&matrix.entries, mu, &p, &q, params.lambda));

        let sse: f64 = matrix
            .entries
            .iter()
            .map(|&(u, i, r)| (r - mu - p.row(u).dot(&q.row(i))).powi(2))
            .sum();
        history.rmse.push((sse / matrix.entries.len() as f64).sqrt());
    }

    Ok(FactorModel {
        mu,
        rank: k,
        lambda: params.lambda,
        iterations: params.iterations,
        user_index: matrix.users.iter().enumerate().map(|(i, u)| (u.clone(), i)).collect(),
        item_index: matrix.items.iter().enumerate().map(|(i, u)| (u.clone(), i)).collect(),
        user_factors: p,
        item_factors: q,
        history,
    })
}
