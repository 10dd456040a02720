use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::system::MarkovSystem;

/// Sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub rows: usize,
    pub cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists; duplicate columns are
    /// summed.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(u32, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        let n = rows.len();
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { rows: n, cols, row_ptr, col_idx, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().zip(&self.vals[r]).map(|(&c, &v)| (c as usize, v))
    }

    /// `A v`, each row summed in a fixed order.
    pub fn mul(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).into_par_iter().map(|i| self.row(i).map(|(j, a)| a * v[j]).sum()).collect()
    }

    /// `Aᵀ v`.
    pub fn mul_transpose(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (j, a) in self.row(i) {
                out[j] += a * v[i];
            }
        }
        out
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.mul_transpose(&vec![1.0; self.rows])
    }

    /// `(row, col, value)` triplets in row order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.rows).flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v))).collect()
    }
}

/// Ulam discretization of the transfer operator: entry `(i, j)` is the
/// fraction of bin `j` mapped into bin `i`, so columns carry mass and sum
/// to one.
#[derive(Debug, Clone)]
pub struct UlamOperator {
    pub n_bins: usize,
    pub space: Interval,
    pub map: String,
    pub matrix: CsrMatrix,
}

/// Header line documenting the matrix convention in exports.
pub const ULAM_CONVENTION: &str =
    "entry (row i, col j) = Lebesgue fraction of bin j mapped into bin i; columns sum to 1";

impl UlamOperator {
    pub fn bin_width(&self) -> f64 {
        self.space.length() / self.n_bins as f64
    }

    pub fn bin(&self, j: usize) -> Interval {
        Interval::right_open(self.edge(j), self.edge(j + 1))
    }

    pub fn edge(&self, j: usize) -> f64 {
        if j == self.n_bins {
            self.space.hi
        } else {
            self.space.lo + j as f64 * self.bin_width()
        }
    }

    pub fn bin_of(&self, x: f64) -> usize {
        (((x - self.space.lo) / self.bin_width()) as usize).min(self.n_bins - 1)
    }

    /// Push-forward of a vector of bin masses (or densities).
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.mul(v)
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.matrix.column_sums()
    }
}

/// Assembles the Ulam matrix from exact preimages of bin edges under each
/// monotone branch.
pub fn ulam_matrix(system: &dyn MarkovSystem, n_bins: usize) -> Result<UlamOperator> {
    if n_bins < 2 {
        return Err(Error::Parameter(format!("n_bins must be at least 2, got {n_bins}")));
    }
    let space = system.space();
    let h = space.length() / n_bins as f64;
    let edge = |k: usize| if k == n_bins { space.hi } else { space.lo + k as f64 * h };

    let per_element: Vec<Vec<(u32, u32, f64)>> = (0..system.element_count())
        .into_par_iter()
        .map(|e| -> Result<Vec<(u32, u32, f64)>> {
            let dom = system.element(e);
            let img = system.element_image(e);
            let mut out = Vec::new();
            if dom.length() == 0.0 {
                return Ok(out);
            }
            // Cut points: preimages of the bin edges that fall in the image.
            let mut cuts = Vec::with_capacity(n_bins + 1);
            for k in 0..=n_bins {
                let y = edge(k);
                let x = if y <= img.lo {
                    dom.lo
                } else if y >= img.hi {
                    dom.hi
                } else {
                    system.inverse(e, y)?.clamp(dom.lo, dom.hi)
                };
                cuts.push(x);
            }
            for i in 0..n_bins {
                let (a, b) = (cuts[i], cuts[i + 1]);
                if b <= a {
                    continue;
                }
                let mut j = (((a - space.lo) / h) as usize).min(n_bins - 1);
                while j < n_bins && edge(j) < b {
                    let piece = b.min(edge(j + 1)) - a.max(edge(j));
                    if piece > 0.0 {
                        out.push((i as u32, j as u32, piece));
                    }
                    j += 1;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_bins];
    for list in per_element {
        for (i, j, piece) in list {
            rows[i as usize].push((j, piece));
        }
    }
    let widths: Vec<f64> = (0..n_bins).map(|j| edge(j + 1) - edge(j)).collect();
    for r in rows.iter_mut() {
        for (j, v) in r.iter_mut() {
            *v /= widths[*j as usize];
        }
    }
    Ok(UlamOperator { n_bins, space, map: system.describe(), matrix: CsrMatrix::from_rows(n_bins, rows) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{doubling_map, lsv_map};

    #[test]
    fn doubling_two_bins() {
        let op = ulam_matrix(&doubling_map(), 2).unwrap();
        let t = op.matrix.triplets();
        assert_eq!(t, vec![(0, 0, 0.5), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 0.5)]);
    }

    #[test]
    fn columns_conserve_mass() {
        for (map, n) in [(lsv_map(0.5).unwrap(), 2048), (doubling_map(), 1000), (lsv_map(0.25).unwrap(), 777)] {
            let op = ulam_matrix(&map, n).unwrap();
            for (j, s) in op.column_sums().iter().enumerate() {
                assert!((s - 1.0).abs() <= 1e-12, "{} column {j}: {s}", map.name());
            }
            assert!(op.matrix.triplets().iter().all(|t| t.2 >= 0.0 && t.2 <= 1.0 + 1e-15));
        }
    }

    #[test]
    fn duality_with_composition() {
        // For bin-constant g, h: Σ_i (P g)_i h_i w = ∫ g(x) h(T x) dx.
        let lsv = lsv_map(0.5).unwrap();
        let n = 64;
        let op = ulam_matrix(&lsv, n).unwrap();
        let w = op.bin_width();
        let g: Vec<f64> = (0..n).map(|i| ((i * 7 % 11) as f64).sin()).collect();
        let hv: Vec<f64> = (0..n).map(|i| ((i * 5 % 13) as f64).cos()).collect();
        let lhs: f64 = op.apply(&g).iter().zip(&hv).map(|(a, b)| a * b * w).sum();
        let rhs_at = |m: usize| -> f64 {
            (0..m)
                .map(|k| {
                    let x = (k as f64 + 0.5) / m as f64;
                    g[op.bin_of(x)] * hv[op.bin_of(lsv.evaluate(x).unwrap())] / m as f64
                })
                .sum()
        };
        let (fine, coarse) = (rhs_at(1 << 22), rhs_at(1 << 21));
        let bound = 2.0 * (fine - coarse).abs();
        assert!((lhs - fine).abs() <= bound.max(1e-6), "{lhs} vs {fine} (bound {bound})");
    }
}
