//! Fixed-radius neighbor enumeration on a uniform grid.
//!
//! `K0((X_j - X_i)/b0)` is nonzero only when `|X_j - X_i|_inf < b0/2`, so with
//! cells of width `b0/2` every contributing `j` sits in one of the `3^d`
//! cells around `X_i`. Neighbor lists are stored sorted by index so that sums
//! over them visit terms in the same order as a plain loop over `j`.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::ProductKernel;

/// Kernel weights between distinct observations, in CSR layout.
#[derive(Debug, Clone)]
pub struct NeighborGraph {
    b0: f64,
    offsets: Vec<usize>,
    index: Vec<usize>,
    weight: Vec<f64>,
}

fn cell_of(x: &[f64], width: f64) -> Vec<i64> {
    x.iter().map(|v| (v / width).floor() as i64).collect()
}

fn neighbor_offsets(dim: usize) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::with_capacity(dim)];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (-1..=1).map(move |o| {
                    let mut p = prefix.clone();
                    p.push(o);
                    p
                })
            })
            .collect();
    }
    out
}

impl NeighborGraph {
    /// `x` is row-major `n x dim`.
    pub fn build(x: &[f64], dim: usize, kernel: &ProductKernel, b0: f64) -> Result<Self> {
        if !(b0 > 0.0) || !b0.is_finite() {
            return Err(Error::InvalidBandwidth(b0));
        }
        if kernel.dim() != dim || !x.len().is_multiple_of(dim) {
            return Err(Error::DimensionError {
                expected: kernel.dim(),
                got: dim,
            });
        }
        let n = x.len() / dim;
        let row = |i: usize| &x[i * dim..(i + 1) * dim];
        let width = 0.5 * b0;

        let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for i in 0..n {
            cells.entry(cell_of(row(i), width)).or_default().push(i);
        }
        let offsets = neighbor_offsets(dim);

        let lists: Vec<Vec<(usize, f64)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let xi = row(i);
                let home = cell_of(xi, width);
                let mut found = Vec::new();
                let mut key = home.clone();
                for off in &offsets {
                    for (k, (h, o)) in home.iter().zip(off).enumerate() {
                        key[k] = h + o;
                    }
                    if let Some(members) = cells.get(&key) {
                        for &j in members {
                            if j == i {
                                continue;
                            }
                            let w = kernel.eval_scaled_diff(row(j), xi, b0);
                            if w != 0.0 {
                                found.push((j, w));
                            }
                        }
                    }
                }
                found.sort_unstable_by_key(|&(j, _)| j);
                found
            })
            .collect();

        let mut offsets_out = Vec::with_capacity(n + 1);
        offsets_out.push(0);
        let total: usize = lists.iter().map(Vec::len).sum();
        let mut index = Vec::with_capacity(total);
        let mut weight = Vec::with_capacity(total);
        for list in lists {
            for (j, w) in list {
                index.push(j);
                weight.push(w);
            }
            offsets_out.push(index.len());
        }
        Ok(Self {
            b0,
            offsets: offsets_out,
            index,
            weight,
        })
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Indices `j != i` with `K0((X_j - X_i)/b0) != 0`, ascending, and the
    /// matching kernel values.
    #[inline]
    pub fn neighbors(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.index[a..b], &self.weight[a..b])
    }

    pub fn total_pairs(&self) -> usize {
        self.index.len()
    }
}
