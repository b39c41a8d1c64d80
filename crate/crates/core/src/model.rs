//! Model specification and its realization against a dataset.
//!
//! A bivariate copula regression has one additive predictor per distribution
//! parameter, in the fixed order mu1, mu2, sigma1, sigma2, [nu1], [nu2],
//! theta (the nu equations exist only for three-parameter margins). The
//! concatenated coefficient vector follows the same order; [`CoefLayout`]
//! records where each equation and each quadratic penalty lives inside it.

use crate::copula::Copula;
use crate::data::{Column, Dataset};
use crate::error::{Error, Result};
use crate::margins::MarginFamily;
use crate::smooth::{self, Adjacency, Assembled, BlockData, DesignBlock};
use nalgebra::{DMatrix, DVector};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TermExpr {
    Linear { col: String },
    Spline { col: String, k: usize },
    Random { col: String },
    Mrf { col: String },
}

impl fmt::Display for TermExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermExpr::Linear { col } => write!(f, "{col}"),
            TermExpr::Spline { col, k } => write!(f, "s({col},k={k})"),
            TermExpr::Random { col } => write!(f, "random({col})"),
            TermExpr::Mrf { col } => write!(f, "mrf({col})"),
        }
    }
}

/// What a given equation's predictor feeds: one parameter of one margin, or
/// the copula dependence parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqTarget {
    Margin { side: usize, param: usize },
    Theta,
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub margin1: MarginFamily,
    pub margin2: MarginFamily,
    pub copula: Copula,
    pub y1: String,
    pub y2: String,
    /// Term lists in equation order; every equation has an implicit intercept.
    pub equations: Vec<Vec<TermExpr>>,
}

impl ModelSpec {
    pub fn n_equations(&self) -> usize {
        self.margin1.n_params() + self.margin2.n_params() + 1
    }

    pub fn equation_names(&self) -> Vec<&'static str> {
        let mut names = vec!["mu1", "mu2", "sigma1", "sigma2"];
        if self.margin1.n_params() == 3 {
            names.push("nu1");
        }
        if self.margin2.n_params() == 3 {
            names.push("nu2");
        }
        names.push("theta");
        names
    }

    pub fn eq_targets(&self) -> Vec<EqTarget> {
        let mut t = vec![
            EqTarget::Margin { side: 0, param: 0 },
            EqTarget::Margin { side: 1, param: 0 },
            EqTarget::Margin { side: 0, param: 1 },
            EqTarget::Margin { side: 1, param: 1 },
        ];
        if self.margin1.n_params() == 3 {
            t.push(EqTarget::Margin { side: 0, param: 2 });
        }
        if self.margin2.n_params() == 3 {
            t.push(EqTarget::Margin { side: 1, param: 2 });
        }
        t.push(EqTarget::Theta);
        t
    }

    pub fn validate(&self) -> Result<()> {
        if self.equations.len() != self.n_equations() {
            return Err(Error::Config(format!(
                "{} equations given but margins {}/{} with a copula need {} ({})",
                self.equations.len(),
                self.margin1,
                self.margin2,
                self.n_equations(),
                self.equation_names().join(", ")
            )));
        }
        for (name, terms) in self.equation_names().iter().zip(&self.equations) {
            for (i, t) in terms.iter().enumerate() {
                if terms[..i].contains(t) {
                    return Err(Error::Config(format!(
                        "equation {name}: duplicate term {t}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// How a term's design rows are rebuilt from a (possibly new) dataset.
#[derive(Debug, Clone)]
enum TermBinding {
    /// Spline input: one numeric column.
    Continuous { col: String },
    /// Linear numeric column.
    Column { col: String },
    /// Linear factor: dummies for `levels[1..]`, first level is the
    /// reference.
    Dummies { col: String, levels: Vec<String> },
    /// Random-effect / Markov-field labels.
    Labels { col: String },
}

#[derive(Debug, Clone)]
pub struct BuiltEquation {
    pub name: String,
    pub design: Assembled,
    blocks: Vec<DesignBlock>,
    bindings: Vec<TermBinding>,
}

impl BuiltEquation {
    pub fn width(&self) -> usize {
        self.design.z.ncols()
    }

    /// (offset, width) of each term's coefficient block within this
    /// equation, in term order; offset 0 is the intercept.
    pub fn term_spans(&self) -> Vec<(usize, usize)> {
        let mut off = 1;
        self.blocks
            .iter()
            .map(|b| {
                let span = (off, b.width());
                off += b.width();
                span
            })
            .collect()
    }

    /// Rebuild this equation's design matrix for new covariate rows.
    pub fn design_for(&self, data: &Dataset) -> Result<DMatrix<f64>> {
        let n = data.n;
        let mut z = DMatrix::zeros(n, self.width());
        z.column_mut(0).fill(1.0);
        let mut off = 1;
        for (b, binding) in self.blocks.iter().zip(&self.bindings) {
            let zb = match binding {
                TermBinding::Continuous { col } => {
                    b.eval(&BlockData::Continuous(data.numeric(col)?))?
                }
                TermBinding::Column { col } => {
                    let cols = vec![data.numeric(col)?.to_vec()];
                    b.eval(&BlockData::Columns(&cols))?
                }
                TermBinding::Dummies { col, levels } => {
                    let labels = data.factor(col)?;
                    for (i, l) in labels.iter().enumerate() {
                        if !levels.contains(l) {
                            return Err(Error::InvalidInput(format!(
                                "row {}: level '{l}' of {col} was not seen when the model was fitted",
                                i + 1
                            )));
                        }
                    }
                    let cols: Vec<Vec<f64>> = levels[1..]
                        .iter()
                        .map(|lv| labels.iter().map(|l| f64::from(l == lv)).collect())
                        .collect();
                    b.eval(&BlockData::Columns(&cols))?
                }
                TermBinding::Labels { col } => b.eval(&BlockData::Labels(data.factor(col)?))?,
            };
            z.view_mut((0, off), (n, b.width())).copy_from(&zb);
            off += b.width();
        }
        Ok(z)
    }
}

/// One quadratic penalty and its position in the full coefficient vector.
#[derive(Debug, Clone)]
pub struct Penalty {
    pub offset: usize,
    pub d: DMatrix<f64>,
    /// "equation:term", e.g. "theta:s(x2)".
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct CoefLayout {
    /// (offset, width) of each equation's coefficients.
    pub eq_spans: Vec<(usize, usize)>,
    pub total: usize,
    pub penalties: Vec<Penalty>,
}

impl CoefLayout {
    pub fn n_lambda(&self) -> usize {
        self.penalties.len()
    }

    /// S_lambda over the full coefficient vector.
    pub fn penalty_matrix(&self, lambdas: &[f64]) -> DMatrix<f64> {
        assert_eq!(lambdas.len(), self.penalties.len());
        let mut s = DMatrix::zeros(self.total, self.total);
        for (pen, &lam) in self.penalties.iter().zip(lambdas) {
            let k = pen.d.nrows();
            for i in 0..k {
                for j in 0..k {
                    s[(pen.offset + i, pen.offset + j)] += lam * pen.d[(i, j)];
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub spec: ModelSpec,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub n: usize,
    pub equations: Vec<BuiltEquation>,
    pub layout: CoefLayout,
}

impl BuiltModel {
    /// Per-equation linear predictors Z_e beta_e.
    pub fn linear_predictors(&self, delta: &DVector<f64>) -> Vec<DVector<f64>> {
        self.equations
            .iter()
            .zip(&self.layout.eq_spans)
            .map(|(eq, &(off, w))| &eq.design.z * delta.rows(off, w))
            .collect()
    }
}

fn build_equation(
    name: &str,
    terms: &[TermExpr],
    data: &Dataset,
    adjacency: Option<&Adjacency>,
) -> Result<BuiltEquation> {
    let mut blocks = Vec::new();
    let mut bindings = Vec::new();
    let ctx = |e: Error| match e {
        Error::InvalidInput(m) => Error::InvalidInput(format!("equation {name}: {m}")),
        other => other,
    };
    for t in terms {
        match t {
            TermExpr::Linear { col } => match data.column(col).map_err(ctx)? {
                Column::Numeric(v) => {
                    blocks.push(smooth::build_linear_block(col, &[v.clone()]).map_err(ctx)?);
                    bindings.push(TermBinding::Column { col: col.clone() });
                }
                Column::Factor(labels) => {
                    let (kept, cols) = smooth::dummy_columns(labels);
                    if kept.is_empty() {
                        return Err(Error::InvalidInput(format!(
                            "equation {name}: factor {col} has a single level"
                        )));
                    }
                    let mut levels: Vec<String> = labels.clone();
                    levels.sort();
                    levels.dedup();
                    blocks.push(smooth::build_linear_block(col, &cols).map_err(ctx)?);
                    bindings.push(TermBinding::Dummies {
                        col: col.clone(),
                        levels,
                    });
                }
            },
            TermExpr::Spline { col, k } => {
                let x = data.numeric(col).map_err(ctx)?;
                blocks.push(smooth::build_spline_block(&format!("s({col})"), x, *k).map_err(ctx)?);
                bindings.push(TermBinding::Continuous { col: col.clone() });
            }
            TermExpr::Random { col } => {
                let labels = data.factor(col).map_err(ctx)?;
                blocks.push(
                    smooth::build_random_effect_block(&format!("random({col})"), labels)
                        .map_err(ctx)?,
                );
                bindings.push(TermBinding::Labels { col: col.clone() });
            }
            TermExpr::Mrf { col } => {
                let adj = adjacency.ok_or_else(|| {
                    Error::Config(format!(
                        "equation {name}: term mrf({col}) needs an adjacency file"
                    ))
                })?;
                let labels = data.factor(col).map_err(ctx)?;
                blocks.push(
                    smooth::build_mrf_block(&format!("mrf({col})"), labels, adj).map_err(ctx)?,
                );
                bindings.push(TermBinding::Labels { col: col.clone() });
            }
        }
    }
    let design = smooth::assemble(data.n, &blocks)?;
    Ok(BuiltEquation {
        name: name.to_string(),
        design,
        blocks,
        bindings,
    })
}

/// Realize a model specification against a dataset: responses checked against
/// margin supports, one design per equation, and the coefficient layout.
pub fn build(spec: ModelSpec, data: &Dataset, adjacency: Option<&Adjacency>) -> Result<BuiltModel> {
    spec.validate()?;
    let y1 = data.numeric(&spec.y1)?.to_vec();
    let y2 = data.numeric(&spec.y2)?.to_vec();
    let check = |col: &str, m: MarginFamily, y: &[f64]| -> Result<()> {
        for (i, &v) in y.iter().enumerate() {
            m.check_y(v).map_err(|e| match e {
                Error::Domain(msg) => {
                    Error::Domain(format!("response {col}, row {}: {msg}", i + 1))
                }
                other => other,
            })?;
        }
        Ok(())
    };
    check(&spec.y1, spec.margin1, &y1)?;
    check(&spec.y2, spec.margin2, &y2)?;

    let names = spec.equation_names();
    let mut equations = Vec::with_capacity(names.len());
    for (name, terms) in names.iter().zip(&spec.equations) {
        equations.push(build_equation(name, terms, data, adjacency)?);
    }

    let mut eq_spans = Vec::with_capacity(equations.len());
    let mut penalties = Vec::new();
    let mut off = 0;
    for eq in &equations {
        eq_spans.push((off, eq.width()));
        for (local, d) in &eq.design.penalties {
            let label = eq
                .design
                .spans
                .iter()
                .find(|(o, _, _)| o == local)
                .map(|(_, _, l)| format!("{}:{}", eq.name, l))
                .unwrap_or_else(|| eq.name.clone());
            penalties.push(Penalty {
                offset: off + local,
                d: d.clone(),
                label,
            });
        }
        off += eq.width();
    }
    let layout = CoefLayout {
        eq_spans,
        total: off,
        penalties,
    };
    let n = data.n;
    Ok(BuiltModel {
        spec,
        y1,
        y2,
        n,
        equations,
        layout,
    })
}
