//! Additive-predictor building blocks: linear terms, penalized spline
//! smooths, random-effect ridge blocks and Markov-random-field spatial
//! blocks, plus the per-equation assembly into a design matrix with
//! block-diagonal quadratic penalties.
//!
//! Univariate smooths use a cubic B-spline basis with knots at covariate
//! quantiles and a second-order divided-difference penalty taken with
//! respect to the Greville abscissae, so the penalty null space holds
//! exactly the constant and linear functions of the covariate. Smooth and
//! spatial blocks absorb the sum-to-zero identifiability constraint by the
//! reparameterization Z <- Z M, where M spans the null space of the column
//! sums.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Linear,
    Spline,
    RandomEffect,
    Mrf,
}

/// One additive term: its design columns, its (possibly absent) quadratic
/// penalty, and whatever is needed to rebuild rows for new data.
#[derive(Debug, Clone)]
pub struct DesignBlock {
    pub label: String,
    pub kind: BlockKind,
    pub z: DMatrix<f64>,
    /// Post-centering penalty; `None` for unpenalized linear terms.
    pub d: Option<DMatrix<f64>>,
    maker: Maker,
}

#[derive(Debug, Clone)]
enum Maker {
    Linear,
    Spline { basis: SplineBasis, m: DMatrix<f64> },
    RandomEffect { levels: Vec<String> },
    Mrf { regions: Vec<String>, m: DMatrix<f64> },
}

/// Covariate values for rebuilding a block's design rows.
pub enum BlockData<'a> {
    Continuous(&'a [f64]),
    Columns(&'a [Vec<f64>]),
    Labels(&'a [String]),
}

impl DesignBlock {
    pub fn width(&self) -> usize {
        self.z.ncols()
    }

    /// Design rows for new covariate values, in the same shape the block was
    /// built from.
    pub fn eval(&self, data: &BlockData) -> Result<DMatrix<f64>> {
        match (&self.maker, data) {
            (Maker::Spline { basis, m }, BlockData::Continuous(x)) => {
                Ok(basis.raw_design(x) * m)
            }
            (Maker::Linear, BlockData::Columns(cols)) => {
                if cols.len() != self.z.ncols() {
                    return Err(Error::InvalidInput(format!(
                        "term {}: expected {} columns, got {}",
                        self.label,
                        self.z.ncols(),
                        cols.len()
                    )));
                }
                let n = cols.first().map_or(0, |c| c.len());
                Ok(DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]))
            }
            (Maker::RandomEffect { levels }, BlockData::Labels(labels)) => {
                indicator(labels, levels, &self.label)
            }
            (Maker::Mrf { regions, m }, BlockData::Labels(labels)) => {
                Ok(indicator(labels, regions, &self.label)? * m)
            }
            _ => Err(Error::InvalidInput(format!(
                "term {}: covariate data of the wrong type",
                self.label
            ))),
        }
    }
}

fn indicator(labels: &[String], levels: &[String], term: &str) -> Result<DMatrix<f64>> {
    let mut z = DMatrix::zeros(labels.len(), levels.len());
    for (i, lab) in labels.iter().enumerate() {
        let j = levels
            .binary_search(lab)
            .map_err(|_| Error::InvalidInput(format!("term {term}: unknown level '{lab}'")))?;
        z[(i, j)] = 1.0;
    }
    Ok(z)
}

/// Unpenalized parametric columns (numeric covariates or pre-expanded factor
/// dummies). The intercept is never part of a block.
pub fn build_linear_block(label: &str, cols: &[Vec<f64>]) -> Result<DesignBlock> {
    let n = cols
        .first()
        .ok_or_else(|| Error::InvalidInput(format!("term {label}: no columns")))?
        .len();
    for c in cols {
        if c.len() != n || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "term {label}: ragged or non-finite column"
            )));
        }
    }
    Ok(DesignBlock {
        label: label.to_string(),
        kind: BlockKind::Linear,
        z: DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]),
        d: None,
        maker: Maker::Linear,
    })
}

/// Ridge-penalized one-hot block over the factor's levels (i.i.d. normal
/// random-effect analogue): Z = indicator matrix, D = I.
pub fn build_random_effect_block(label: &str, labels: &[String]) -> Result<DesignBlock> {
    let mut levels: Vec<String> = labels.to_vec();
    levels.sort();
    levels.dedup();
    if levels.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "term {label}: random effect needs at least 2 levels"
        )));
    }
    let z = indicator(labels, &levels, label)?;
    let d = DMatrix::identity(levels.len(), levels.len());
    Ok(DesignBlock {
        label: label.to_string(),
        kind: BlockKind::RandomEffect,
        z,
        d: Some(d),
        maker: Maker::RandomEffect { levels },
    })
}

/// Penalized cubic-spline smooth of a continuous covariate with `k` basis
/// functions (before centering). Requires at least `k` distinct values.
pub fn build_spline_block(label: &str, x: &[f64], k: usize) -> Result<DesignBlock> {
    let basis = SplineBasis::from_data(x, k)
        .map_err(|e| Error::InvalidInput(format!("term {label}: {e}")))?;
    let raw = basis.raw_design(x);
    let (z, d, m) = center(&raw, &basis.raw_penalty());
    Ok(DesignBlock {
        label: label.to_string(),
        kind: BlockKind::Spline,
        z,
        d: Some(d),
        maker: Maker::Spline { basis, m },
    })
}

/// Spatial block: region indicators with the neighborhood Laplacian penalty
/// (diagonal = neighbor count, -1 for each adjacent pair), centered.
pub fn build_mrf_block(label: &str, labels: &[String], adj: &Adjacency) -> Result<DesignBlock> {
    let raw = indicator(labels, &adj.regions, label).map_err(|_| {
        let missing = labels
            .iter()
            .find(|l| adj.regions.binary_search(l).is_err())
            .cloned()
            .unwrap_or_default();
        Error::InvalidInput(format!(
            "term {label}: region '{missing}' not in the adjacency list"
        ))
    })?;
    let r = adj.regions.len();
    let mut d = DMatrix::zeros(r, r);
    for (i, nbrs) in adj.neighbors.iter().enumerate() {
        d[(i, i)] = nbrs.len() as f64;
        for &j in nbrs {
            d[(i, j)] = -1.0;
        }
    }
    let (z, d, m) = center(&raw, &d);
    Ok(DesignBlock {
        label: label.to_string(),
        kind: BlockKind::Mrf,
        z,
        d: Some(d),
        maker: Maker::Mrf {
            regions: adj.regions.clone(),
            m,
        },
    })
}

/// Expand a factor column into 0/1 dummy columns, dropping the first level
/// alphabetically as the reference. Returns (level names kept, columns).
pub fn dummy_columns(labels: &[String]) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut levels: Vec<String> = labels.to_vec();
    levels.sort();
    levels.dedup();
    let kept: Vec<String> = levels[1..].to_vec();
    let cols = kept
        .iter()
        .map(|lv| labels.iter().map(|l| f64::from(l == lv)).collect())
        .collect();
    (kept, cols)
}

/// Symmetric neighborhood structure over named regions.
#[derive(Debug, Clone)]
pub struct Adjacency {
    /// Sorted region names.
    pub regions: Vec<String>,
    /// Sorted neighbor indices per region; no self-neighbors.
    pub neighbors: Vec<Vec<usize>>,
}

impl Adjacency {
    /// Build from undirected edges; isolated regions may be given as
    /// (name, name) pairs or via [`Adjacency::parse`] single-token lines.
    pub fn from_edges(edges: &[(String, String)]) -> Self {
        let mut regions: Vec<String> = edges
            .iter()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect();
        regions.sort();
        regions.dedup();
        let mut neighbors = vec![Vec::new(); regions.len()];
        for (a, b) in edges {
            if a == b {
                continue;
            }
            let i = regions.binary_search(a).unwrap();
            let j = regions.binary_search(b).unwrap();
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for nb in &mut neighbors {
            nb.sort();
            nb.dedup();
        }
        Adjacency { regions, neighbors }
    }

    /// Parse an edge-list text: one "regionA,regionB" pair per line; a line
    /// with a single token declares an isolated region. '#' starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            match parts.as_slice() {
                [a] => edges.push((a.to_string(), a.to_string())),
                [a, b] if !a.is_empty() && !b.is_empty() => {
                    edges.push((a.to_string(), b.to_string()))
                }
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "adjacency line {}: expected 'regionA,regionB'",
                        ln + 1
                    )))
                }
            }
        }
        if edges.is_empty() {
            return Err(Error::InvalidInput("adjacency list is empty".into()));
        }
        Ok(Self::from_edges(&edges))
    }
}

/// Cubic B-spline basis over quantile knots.
#[derive(Debug, Clone)]
pub struct SplineBasis {
    /// Full knot vector of length k + 4 (boundary knots repeated 4 times).
    pub knots: Vec<f64>,
    /// Number of raw basis functions.
    pub k: usize,
}

impl SplineBasis {
    pub fn from_data(x: &[f64], k: usize) -> Result<Self> {
        if k < 4 {
            return Err(Error::InvalidInput(format!(
                "spline basis needs k >= 4, got {k}"
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite covariate value".into()));
        }
        let mut xs = x.to_vec();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        if xs.len() < k {
            return Err(Error::InvalidInput(format!(
                "spline basis with k = {k} needs at least {k} distinct values, got {}",
                xs.len()
            )));
        }
        let (lo, hi) = (xs[0], xs[xs.len() - 1]);
        let n_int = k - 4;
        let mut knots = Vec::with_capacity(k + 4);
        knots.extend([lo; 4]);
        for j in 1..=n_int {
            knots.push(quantile_of(&xs, j as f64 / (n_int + 1) as f64));
        }
        knots.extend([hi; 4]);
        Ok(SplineBasis { knots, k })
    }

    /// Basis evaluations, one row per value; outside the knot range the
    /// boundary polynomial piece extrapolates.
    pub fn raw_design(&self, x: &[f64]) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(x.len(), self.k);
        for (i, &xi) in x.iter().enumerate() {
            let (start, vals) = self.basis_row(xi);
            for (r, v) in vals.iter().enumerate() {
                z[(i, start + r)] = *v;
            }
        }
        z
    }

    fn basis_row(&self, x: f64) -> (usize, [f64; 4]) {
        let t = &self.knots;
        let mut mu = 3;
        while mu < self.k - 1 && x >= t[mu + 1] {
            mu += 1;
        }
        let mut n = [0.0f64; 4];
        let mut left = [0.0f64; 4];
        let mut right = [0.0f64; 4];
        n[0] = 1.0;
        for j in 1..=3 {
            left[j] = x - t[mu + 1 - j];
            right[j] = t[mu + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let tmp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            n[j] = saved;
        }
        (mu - 3, n)
    }

    /// Greville abscissae: the coefficient sites at which the spline
    /// reproduces linear functions.
    pub fn greville(&self) -> Vec<f64> {
        (0..self.k)
            .map(|j| (self.knots[j + 1] + self.knots[j + 2] + self.knots[j + 3]) / 3.0)
            .collect()
    }

    /// Second-order divided-difference penalty C'C with respect to the
    /// Greville sites; annihilates coefficient sequences linear in them.
    pub fn raw_penalty(&self) -> DMatrix<f64> {
        let xi = self.greville();
        let k = self.k;
        let mut c = DMatrix::zeros(k - 2, k);
        for j in 1..k - 1 {
            let h0 = xi[j] - xi[j - 1];
            let h1 = xi[j + 1] - xi[j];
            c[(j - 1, j - 1)] = 1.0 / h0;
            c[(j - 1, j)] = -(1.0 / h0 + 1.0 / h1);
            c[(j - 1, j + 1)] = 1.0 / h1;
        }
        c.transpose() * c
    }
}

fn quantile_of(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

/// Absorb the sum-to-zero constraint: returns (Z M, M' D M, M) where M spans
/// the null space of the column-sum vector of Z.
fn center(z: &DMatrix<f64>, d: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let c = DVector::from_iterator(z.ncols(), (0..z.ncols()).map(|j| z.column(j).sum()));
    let m = null_basis(&c);
    let zc = z * &m;
    let mut dc = m.transpose() * d * &m;
    // keep exactly symmetric under roundoff
    let dt = dc.transpose();
    dc = (dc + dt) * 0.5;
    (zc, dc, m)
}

/// Orthonormal basis of {v : c'v = 0} from the Householder reflection that
/// maps c onto a multiple of e1.
fn null_basis(c: &DVector<f64>) -> DMatrix<f64> {
    let k = c.len();
    let mut m = DMatrix::zeros(k, k - 1);
    let norm = c.norm();
    if norm == 0.0 {
        for j in 1..k {
            m[(j, j - 1)] = 1.0;
        }
        return m;
    }
    let mut v = c.clone();
    v[0] += norm.copysign(c[0]);
    let vn2 = v.norm_squared();
    for col in 1..k {
        for row in 0..k {
            let id = f64::from(row == col);
            m[(row, col - 1)] = id - 2.0 * v[row] * v[col] / vn2;
        }
    }
    m
}

/// One equation's assembled design: intercept column first, then each block.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub z: DMatrix<f64>,
    /// (column offset, penalty matrix) per penalized block, in block order.
    pub penalties: Vec<(usize, DMatrix<f64>)>,
    /// (offset, width, label) per block, intercept excluded.
    pub spans: Vec<(usize, usize, String)>,
}

impl Assembled {
    /// Full penalty S_lambda = diag(0, lambda_1 D_1, ...) for given lambdas.
    pub fn penalty_matrix(&self, lambdas: &[f64]) -> DMatrix<f64> {
        assert_eq!(lambdas.len(), self.penalties.len());
        let p = self.z.ncols();
        let mut s = DMatrix::zeros(p, p);
        for ((off, d), &lam) in self.penalties.iter().zip(lambdas) {
            for i in 0..d.nrows() {
                for j in 0..d.ncols() {
                    s[(off + i, off + j)] += lam * d[(i, j)];
                }
            }
        }
        s
    }
}

/// Stack intercept and blocks into the equation design Z = [1 | Z_1 | ...].
pub fn assemble(n: usize, blocks: &[DesignBlock]) -> Result<Assembled> {
    let p = 1 + blocks.iter().map(DesignBlock::width).sum::<usize>();
    let mut z = DMatrix::zeros(n, p);
    z.column_mut(0).fill(1.0);
    let mut penalties = Vec::new();
    let mut spans = Vec::new();
    let mut off = 1;
    for b in blocks {
        if b.z.nrows() != n {
            return Err(Error::InvalidInput(format!(
                "term {}: {} rows, expected {n}",
                b.label,
                b.z.nrows()
            )));
        }
        z.view_mut((0, off), (n, b.width())).copy_from(&b.z);
        if let Some(d) = &b.d {
            penalties.push((off, d.clone()));
        }
        spans.push((off, b.width(), b.label.clone()));
        off += b.width();
    }
    Ok(Assembled {
        z,
        penalties,
        spans,
    })
}
