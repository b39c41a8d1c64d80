//! Versioned fit container: a self-describing text file holding the model
//! description (in config syntax) and every numeric result as raw IEEE-754
//! bits, so a reload is bit-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use copreg::error::{Error, Result};
use copreg::estimator::FitResult;
use copreg::model::ModelSpec;

use super::config;

const MAGIC: &str = "copreg fit v1";

#[derive(Debug)]
pub struct SavedFit {
    pub spec: ModelSpec,
    pub fit: FitResult,
    pub n: usize,
    /// Training data path, resolved against the fit file's directory.
    pub data: PathBuf,
    pub adjacency: Option<PathBuf>,
}

fn hex(x: f64) -> String {
    format!("{:#018x} # {x:e}", x.to_bits())
}

fn unhex(line: &str, what: &str) -> Result<f64> {
    let token = line.split('#').next().unwrap().trim();
    let digits = token
        .strip_prefix("0x")
        .ok_or_else(|| Error::InvalidInput(format!("{what}: expected 0x-prefixed bits, got '{token}'")))?;
    let bits = u64::from_str_radix(digits, 16)
        .map_err(|_| Error::InvalidInput(format!("{what}: bad float bits '{token}'")))?;
    Ok(f64::from_bits(bits))
}

/// Render the fit (plus the model it came from) into the container format.
pub fn render_fit(
    spec: &ModelSpec,
    fit: &FitResult,
    n: usize,
    data_rel: &str,
    adjacency_rel: Option<&str>,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "margin1 = {}", spec.margin1.tag());
    let _ = writeln!(s, "margin2 = {}", spec.margin2.tag());
    let _ = writeln!(s, "copula = {}", spec.copula.tag());
    let _ = writeln!(s, "y1 = {}", spec.y1);
    let _ = writeln!(s, "y2 = {}", spec.y2);
    for (name, terms) in spec.equation_names().iter().zip(&spec.equations) {
        let rhs: Vec<String> = terms.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(s, "eq {name} = {}", rhs.join(" + "));
    }
    let _ = writeln!(s, "data = {data_rel}");
    if let Some(adj) = adjacency_rel {
        let _ = writeln!(s, "adjacency = {adj}");
    }
    let _ = writeln!(s, "n = {n}");
    let _ = writeln!(s, "converged = {}", fit.converged);
    let _ = writeln!(s, "outer_iters = {}", fit.outer_iters);
    let _ = writeln!(s, "clamp_events = {}", fit.clamp_events);
    let _ = writeln!(s, "scalar loglik {}", hex(fit.loglik));
    let _ = writeln!(s, "scalar penalized_loglik {}", hex(fit.penalized_loglik));
    let _ = writeln!(s, "scalar edf {}", hex(fit.edf));
    let _ = writeln!(s, "scalar grad_norm {}", hex(fit.grad_norm));
    let _ = writeln!(s, "array delta {}", fit.delta.len());
    for v in fit.delta.iter() {
        let _ = writeln!(s, "{}", hex(*v));
    }
    let _ = writeln!(s, "array lambdas {}", fit.lambdas.len());
    for v in &fit.lambdas {
        let _ = writeln!(s, "{}", hex(*v));
    }
    let _ = writeln!(s, "names lambdas {}", fit.lambda_labels.len());
    for l in &fit.lambda_labels {
        let _ = writeln!(s, "{l}");
    }
    let _ = writeln!(s, "array edf_by_equation {}", fit.edf_by_equation.len());
    for (_, v) in &fit.edf_by_equation {
        let _ = writeln!(s, "{}", hex(*v));
    }
    let _ = writeln!(s, "array cov {}", fit.cov.len());
    for v in fit.cov.iter() {
        let _ = writeln!(s, "{}", hex(*v));
    }
    let _ = writeln!(s, "warnings {}", fit.warnings.len());
    for w in &fit.warnings {
        let _ = writeln!(s, "{w}");
    }
    s
}

pub fn save_fit(
    path: &Path,
    spec: &ModelSpec,
    fit: &FitResult,
    n: usize,
    data_rel: &str,
    adjacency_rel: Option<&str>,
) -> Result<()> {
    std::fs::write(path, render_fit(spec, fit, n, data_rel, adjacency_rel))?;
    Ok(())
}

pub fn load_fit(path: &Path) -> Result<SavedFit> {
    let text = std::fs::read_to_string(path)?;
    let saved = parse_fit(&text)?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    Ok(SavedFit {
        data: dir.join(&saved.data),
        adjacency: saved.adjacency.map(|a| dir.join(a)),
        ..saved
    })
}

pub fn parse_fit(text: &str) -> Result<SavedFit> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(MAGIC) {
        return Err(Error::InvalidInput(format!(
            "not a fit file (expected first line '{MAGIC}')"
        )));
    }

    // model-description lines reuse the config syntax
    let mut head = String::new();
    let mut tail: Vec<&str> = Vec::new();
    let mut n = None;
    let mut converged = None;
    let mut outer_iters = None;
    let mut clamp_events = 0usize;
    let mut in_head = true;
    for line in lines {
        let t = line.trim();
        if in_head {
            match t.split_once('=').map(|(k, v)| (k.trim(), v.trim())) {
                Some(("n", v)) => {
                    n = Some(parse_count(v, "n")?);
                    continue;
                }
                Some(("converged", v)) => {
                    converged = Some(v == "true");
                    continue;
                }
                Some(("outer_iters", v)) => {
                    outer_iters = Some(parse_count(v, "outer_iters")?);
                    continue;
                }
                Some(("clamp_events", v)) => {
                    clamp_events = parse_count(v, "clamp_events")?;
                    continue;
                }
                Some(_) => {
                    head.push_str(line);
                    head.push('\n');
                    continue;
                }
                None => in_head = false,
            }
        }
        tail.push(t);
    }
    let cfg = config::parse_config(&head).map_err(|errs| {
        let msgs: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
        Error::InvalidInput(format!("fit file model section: {}", msgs.join("; ")))
    })?;
    let n = n.ok_or_else(|| Error::InvalidInput("fit file missing 'n'".into()))?;
    let converged =
        converged.ok_or_else(|| Error::InvalidInput("fit file missing 'converged'".into()))?;
    let outer_iters =
        outer_iters.ok_or_else(|| Error::InvalidInput("fit file missing 'outer_iters'".into()))?;
    let data = cfg
        .data
        .ok_or_else(|| Error::InvalidInput("fit file missing 'data'".into()))?;

    let mut scalars = std::collections::HashMap::new();
    let mut arrays: std::collections::HashMap<String, Vec<f64>> = std::collections::HashMap::new();
    let mut names: std::collections::HashMap<String, Vec<String>> =
        std::collections::HashMap::new();
    let mut warnings = Vec::new();
    let mut it = tail.into_iter().filter(|l| !l.is_empty());
    while let Some(line) = it.next() {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("scalar") => {
                let key = parts.next().unwrap_or("").to_string();
                let rest: String = parts.collect::<Vec<_>>().join(" ");
                scalars.insert(key.clone(), unhex(&rest, &key)?);
            }
            Some("array") => {
                let key = parts.next().unwrap_or("").to_string();
                let len = parse_count(parts.next().unwrap_or(""), &key)?;
                let mut vals = Vec::with_capacity(len);
                for _ in 0..len {
                    let l = it
                        .next()
                        .ok_or_else(|| Error::InvalidInput(format!("array {key}: truncated")))?;
                    vals.push(unhex(l, &key)?);
                }
                arrays.insert(key, vals);
            }
            Some("names") => {
                let key = parts.next().unwrap_or("").to_string();
                let len = parse_count(parts.next().unwrap_or(""), &key)?;
                let mut vals = Vec::with_capacity(len);
                for _ in 0..len {
                    let l = it
                        .next()
                        .ok_or_else(|| Error::InvalidInput(format!("names {key}: truncated")))?;
                    vals.push(l.to_string());
                }
                names.insert(key, vals);
            }
            Some("warnings") => {
                let len = parse_count(parts.next().unwrap_or(""), "warnings")?;
                for _ in 0..len {
                    let l = it.next().ok_or_else(|| {
                        Error::InvalidInput("warnings: truncated".into())
                    })?;
                    warnings.push(l.to_string());
                }
            }
            Some(other) => {
                return Err(Error::InvalidInput(format!(
                    "unexpected fit-file section '{other}'"
                )))
            }
            None => {}
        }
    }

    let need = |k: &str| -> Result<Vec<f64>> {
        arrays
            .get(k)
            .cloned()
            .ok_or_else(|| Error::InvalidInput(format!("fit file missing array '{k}'")))
    };
    let scal = |k: &str| -> Result<f64> {
        scalars
            .get(k)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("fit file missing scalar '{k}'")))
    };
    let delta = DVector::from_vec(need("delta")?);
    let p = delta.len();
    let cov_vals = need("cov")?;
    if cov_vals.len() != p * p {
        return Err(Error::InvalidInput(format!(
            "cov has {} entries, expected {}",
            cov_vals.len(),
            p * p
        )));
    }
    // iteration order above matches DMatrix::iter (column-major)
    let cov = DMatrix::from_vec(p, p, cov_vals);
    let eq_names = cfg.spec.equation_names();
    let edf_vals = need("edf_by_equation")?;
    if edf_vals.len() != eq_names.len() {
        return Err(Error::InvalidInput(
            "edf_by_equation length does not match the equation count".into(),
        ));
    }
    let fit = FitResult {
        delta,
        lambdas: need("lambdas")?,
        lambda_labels: names.get("lambdas").cloned().unwrap_or_default(),
        loglik: scal("loglik")?,
        penalized_loglik: scal("penalized_loglik")?,
        edf: scal("edf")?,
        edf_by_equation: eq_names
            .iter()
            .map(|s| s.to_string())
            .zip(edf_vals)
            .collect(),
        cov,
        converged,
        outer_iters,
        grad_norm: scal("grad_norm")?,
        clamp_events,
        warnings,
    };
    Ok(SavedFit {
        spec: cfg.spec,
        fit,
        n,
        data,
        adjacency: cfg.adjacency,
    })
}

fn parse_count(v: &str, what: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| Error::InvalidInput(format!("{what}: bad count '{v}'")))
}
