use std::collections::VecDeque;
use std::io::Read;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::testfn::StateTable;

const ROW_SUM_TOL: f64 = 1e-12;

/// Finite-state chain with a row-stochastic transition matrix and a table
/// of test-function values, one row per state.
#[derive(Clone, Debug)]
pub struct FiniteChainModel {
    n: usize,
    matrix: Vec<f64>,
    cumulative: Vec<f64>,
    h: StateTable,
}

/// Smallest `j` with `u < cumulative[j]`, never landing on a zero-mass state.
pub(crate) fn inverse_cdf(cumulative: &[f64], u: f64) -> usize {
    match cumulative.iter().position(|&c| u < c) {
        Some(j) => j,
        // u exceeded the rounded total mass: fall back to the last state
        // that carries probability
        None => {
            let mut j = cumulative.len() - 1;
            while j > 0 && cumulative[j] == cumulative[j - 1] {
                j -= 1;
            }
            j
        }
    }
}

impl FiniteChainModel {
    /// `rows[i][j]` is the probability of moving from `i` to `j`.
    pub fn new(rows: Vec<Vec<f64>>, h: StateTable) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidModel("transition matrix is empty".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidModel(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::InvalidModel(format!("row {i} has entry {p} outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidModel(format!("row {i} sums to {s}, not 1")));
            }
        }
        if h.n_states() != n {
            return Err(Error::InvalidModel(format!(
                "test function table has {} rows for {n} states",
                h.n_states()
            )));
        }
        let matrix: Vec<f64> = rows.into_iter().flatten().collect();
        let mut cumulative = Vec::with_capacity(n * n);
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += matrix[i * n + j];
                cumulative.push(acc);
            }
        }
        let model = FiniteChainModel {
            n,
            matrix,
            cumulative,
            h,
        };
        if !model.is_irreducible() {
            return Err(Error::InvalidModel("chain is not irreducible".into()));
        }
        if model.period() != 1 {
            return Err(Error::InvalidModel(format!(
                "chain is periodic with period {}",
                model.period()
            )));
        }
        Ok(model)
    }

    /// Parse a transition matrix from CSV: header `to_0,...,to_{n-1}`,
    /// then one row per source state.
    pub fn read_matrix_csv<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        for (j, name) in headers.iter().enumerate() {
            if name != format!("to_{j}") {
                return Err(Error::Parse(format!(
                    "header column {j} is `{name}`, expected `to_{j}`"
                )));
            }
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let row = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("row {i}: `{f}`: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        if rows.len() != headers.len() {
            return Err(Error::Parse(format!(
                "{} rows for {} columns; the matrix must be square",
                rows.len(),
                headers.len()
            )));
        }
        Ok(rows)
    }

    /// Random chain with strictly positive entries (Dirichlet(1) rows) and
    /// standard Normal test-function values; always irreducible and aperiodic.
    pub fn random(n: usize, arity: usize, rng: &mut RngStream) -> Self {
        let rows = (0..n)
            .map(|_| {
                let e: Vec<f64> = (0..n).map(|_| rng.exponential(1.0) + 1e-3).collect();
                let s: f64 = e.iter().sum();
                let mut row: Vec<f64> = e.iter().map(|x| x / s).collect();
                // absorb rounding into the diagonal-free last entry
                let rest: f64 = row[..n - 1].iter().sum();
                row[n - 1] = 1.0 - rest;
                row
            })
            .collect();
        let h = StateTable::new((0..n * arity).map(|_| rng.std_normal()).collect(), arity);
        FiniteChainModel::new(rows, h).expect("positive stochastic matrix is valid")
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.n..(i + 1) * self.n]
    }

    pub(crate) fn cumulative_row(&self, i: usize) -> &[f64] {
        &self.cumulative[i * self.n..(i + 1) * self.n]
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n + j]
    }

    pub fn h(&self) -> &StateTable {
        &self.h
    }

    pub fn with_h(mut self, h: StateTable) -> Result<Self> {
        if h.n_states() != self.n {
            return Err(Error::InvalidModel("test function table size mismatch".into()));
        }
        self.h = h;
        Ok(self)
    }

    /// Sample the successor of `s` with the uniform `u`.
    pub fn step_with_uniform(&self, s: usize, u: f64) -> usize {
        inverse_cdf(self.cumulative_row(s), u)
    }

    fn reach_all(&self, forward: bool) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for v in 0..self.n {
                let p = if forward { self.prob(u, v) } else { self.prob(v, u) };
                if p > 0.0 && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    fn is_irreducible(&self) -> bool {
        self.reach_all(true) && self.reach_all(false)
    }

    /// Period of an irreducible chain: gcd of level(u) + 1 - level(v) over edges.
    fn period(&self) -> usize {
        let mut level = vec![usize::MAX; self.n];
        level[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for v in 0..self.n {
                if self.prob(u, v) > 0.0 && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        let mut g = 0usize;
        for u in 0..self.n {
            for v in 0..self.n {
                if self.prob(u, v) > 0.0 {
                    let diff = (level[u] + 1).abs_diff(level[v]);
                    g = gcd(g, diff);
                }
            }
        }
        g
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn finite_step(model: &FiniteChainModel, s: usize, rng: &mut RngStream) -> usize {
    model.step_with_uniform(s, rng.uniform())
}
