//! Declarative model configuration: flat `key = value` lines plus one
//! `eq <name> = term + term + ...` line per parameter equation.
//!
//! Parsing is total: every problem in the file is reported with its line
//! and field, never just the first one.

use std::fmt;
use std::path::PathBuf;

use copreg::copula::{Copula, TAGS as COPULA_TAGS};
use copreg::estimator::FitOptions;
use copreg::margins::{MarginFamily, TAGS as MARGIN_TAGS};
use copreg::model::{ModelSpec, TermExpr};

#[derive(Debug, Clone)]
pub struct ConfigError {
    /// 1-based line, or 0 for file-level problems.
    pub line: usize,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {} [{}]: {}", self.line, self.field, self.message)
        } else {
            write!(f, "[{}]: {}", self.field, self.message)
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub spec: ModelSpec,
    pub options: FitOptions,
    pub data: Option<PathBuf>,
    pub adjacency: Option<PathBuf>,
}

/// Parse one term expression: a bare column name (linear), `linear(col)`,
/// `s(col)` / `s(col, k=N)`, `random(col)` or `mrf(col)`.
pub fn parse_term(s: &str) -> Result<TermExpr, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty term".into());
    }
    if let Some(inner) = call_body(s, "s").or_else(|| call_body(s, "spline")) {
        let mut parts = inner.splitn(2, ',');
        let col = ident(parts.next().unwrap_or(""))?;
        let k = match parts.next() {
            None => 10,
            Some(kv) => {
                let kv = kv.trim();
                let num = kv
                    .strip_prefix("k")
                    .and_then(|r| r.trim_start().strip_prefix('='))
                    .ok_or_else(|| format!("expected k=<number> in '{s}'"))?;
                num.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("bad basis size '{}' in '{s}'", num.trim()))?
            }
        };
        if k < 4 {
            return Err(format!("spline needs k >= 4, got {k}"));
        }
        return Ok(TermExpr::Spline { col, k });
    }
    if let Some(inner) = call_body(s, "random") {
        return Ok(TermExpr::Random { col: ident(inner)? });
    }
    if let Some(inner) = call_body(s, "mrf") {
        return Ok(TermExpr::Mrf { col: ident(inner)? });
    }
    if let Some(inner) = call_body(s, "linear") {
        return Ok(TermExpr::Linear { col: ident(inner)? });
    }
    Ok(TermExpr::Linear { col: ident(s)? })
}

fn call_body<'a>(s: &'a str, name: &str) -> Option<&'a str> {
    s.strip_prefix(name)
        .map(str::trim_start)
        .and_then(|r| r.strip_prefix('('))
        .and_then(|r| r.strip_suffix(')'))
}

fn ident(s: &str) -> Result<String, String> {
    let s = s.trim();
    let ok = !s.is_empty()
        && s.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && s.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '.');
    if ok {
        Ok(s.to_string())
    } else {
        Err(format!("'{s}' is not a valid column name"))
    }
}

/// Parse a full equation right-hand side; empty means intercept only.
pub fn parse_terms(rhs: &str) -> Result<Vec<TermExpr>, String> {
    let rhs = rhs.trim();
    if rhs.is_empty() {
        return Ok(Vec::new());
    }
    rhs.split('+').map(parse_term).collect()
}

fn copula_tag_help(tag: &str) -> String {
    let base: String = tag.chars().take_while(|c| c.is_alphabetic()).collect();
    let rotations: Vec<&str> = COPULA_TAGS
        .iter()
        .copied()
        .filter(|t| {
            t.strip_prefix(base.as_str())
                .is_some_and(|r| !r.is_empty() && r.chars().all(|c| c.is_ascii_digit()))
        })
        .collect();
    if !rotations.is_empty() {
        format!(
            "unknown copula tag '{tag}'; {base} rotations: {}",
            rotations.join(", ")
        )
    } else {
        format!(
            "unknown copula tag '{tag}'; valid tags: {}",
            COPULA_TAGS.join(", ")
        )
    }
}

struct RawLine {
    line: usize,
    key: String,
    value: String,
}

/// Parse the configuration text, collecting every error.
pub fn parse_config(text: &str) -> Result<ModelConfig, Vec<ConfigError>> {
    let mut errors: Vec<ConfigError> = Vec::new();
    let mut kvs: Vec<RawLine> = Vec::new();
    let mut eqs: Vec<(usize, String, String)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let Some((lhs, rhs)) = line.split_once('=') else {
            errors.push(ConfigError {
                line: ln,
                field: "syntax".into(),
                message: format!("expected 'key = value', got '{line}'"),
            });
            continue;
        };
        let lhs = lhs.trim();
        let rhs = rhs.trim();
        if let Some(eq_name) = lhs.strip_prefix("eq ").map(str::trim) {
            eqs.push((ln, eq_name.to_string(), rhs.to_string()));
        } else {
            kvs.push(RawLine {
                line: ln,
                key: lhs.to_string(),
                value: rhs.to_string(),
            });
        }
    }

    fn push_err(errors: &mut Vec<ConfigError>, line: usize, field: &str, message: String) {
        errors.push(ConfigError {
            line,
            field: field.into(),
            message,
        });
    }

    let mut margin1 = None;
    let mut margin2 = None;
    let mut copula = None;
    let mut y1 = None;
    let mut y2 = None;
    let mut data = None;
    let mut adjacency: Option<PathBuf> = None;
    let mut options = FitOptions::default();
    let mut seen: Vec<String> = Vec::new();

    for kv in &kvs {
        if seen.contains(&kv.key) {
            push_err(&mut errors, kv.line, &kv.key, "duplicate key".into());
            continue;
        }
        seen.push(kv.key.clone());
        let v = kv.value.as_str();
        match kv.key.as_str() {
            "margin1" | "margin2" => {
                let fam = MarginFamily::from_tag(v);
                if fam.is_none() {
                    push_err(&mut errors, 
                        kv.line,
                        &kv.key,
                        format!(
                            "unknown margin family '{v}'; valid tags: {}",
                            MARGIN_TAGS.join(", ")
                        ),
                    );
                }
                if kv.key == "margin1" {
                    margin1 = fam;
                } else {
                    margin2 = fam;
                }
            }
            "copula" => match Copula::from_tag(v) {
                Some(c) => copula = Some(c),
                None => push_err(&mut errors, kv.line, "copula", copula_tag_help(v)),
            },
            "y1" => match ident(v) {
                Ok(c) => y1 = Some(c),
                Err(e) => push_err(&mut errors, kv.line, "y1", e),
            },
            "y2" => match ident(v) {
                Ok(c) => y2 = Some(c),
                Err(e) => push_err(&mut errors, kv.line, "y2", e),
            },
            "data" => data = Some(PathBuf::from(v)),
            "adjacency" => adjacency = Some(PathBuf::from(v)),
            "max_outer" => parse_num(v, kv.line, "max_outer", &mut errors, |x| {
                options.max_outer = x
            }),
            "max_inner" => parse_num(v, kv.line, "max_inner", &mut errors, |x| {
                options.inner.max_iter = x
            }),
            "outer_tol" => parse_num(v, kv.line, "outer_tol", &mut errors, |x| {
                options.outer_tol = x
            }),
            "lambda_init" => parse_num(v, kv.line, "lambda_init", &mut errors, |x| {
                options.lambda_init = x
            }),
            "gtol" => parse_num(v, kv.line, "gtol", &mut errors, |x| options.inner.gtol = x),
            "ftol" => parse_num(v, kv.line, "ftol", &mut errors, |x| options.inner.ftol = x),
            "radius0" => parse_num(v, kv.line, "radius0", &mut errors, |x| {
                options.inner.radius0 = x
            }),
            "select_lambdas" => match v {
                "true" => options.select_lambdas = true,
                "false" => options.select_lambdas = false,
                _ => push_err(&mut errors, kv.line, "select_lambdas", format!("expected true or false, got '{v}'")),
            },
            other => push_err(&mut errors, kv.line, other, "unknown key".into()),
        }
    }

    for (name, field) in [(&margin1, "margin1"), (&margin2, "margin2")] {
        if name.is_none() && !seen.contains(&field.to_string()) {
            errors.push(ConfigError {
                line: 0,
                field: field.into(),
                message: "missing required key".into(),
            });
        }
    }
    for (opt, field) in [
        (copula.is_none(), "copula"),
        (y1.is_none(), "y1"),
        (y2.is_none(), "y2"),
    ] {
        if opt && !seen.contains(&field.to_string()) {
            errors.push(ConfigError {
                line: 0,
                field: field.into(),
                message: "missing required key".into(),
            });
        }
    }

    // term syntax is checked unconditionally; name/count checks need the
    // margins to be known (they decide how many equations exist)
    let mut parsed: Vec<(usize, &str, Vec<TermExpr>)> = Vec::new();
    for (ln, name, rhs) in &eqs {
        match parse_terms(rhs) {
            Ok(terms) => {
                if terms.iter().any(|t| matches!(t, TermExpr::Mrf { .. })) && adjacency.is_none() {
                    errors.push(ConfigError {
                        line: *ln,
                        field: format!("eq {name}"),
                        message: "mrf term needs an 'adjacency' path in the config".into(),
                    });
                }
                parsed.push((*ln, name, terms));
            }
            Err(e) => errors.push(ConfigError {
                line: *ln,
                field: format!("eq {name}"),
                message: e,
            }),
        }
    }

    let mut equations = Vec::new();
    if let (Some(m1), Some(m2), Some(cop)) = (margin1, margin2, copula) {
        let probe = ModelSpec {
            margin1: m1,
            margin2: m2,
            copula: cop,
            y1: String::new(),
            y2: String::new(),
            equations: Vec::new(),
        };
        let expected = probe.equation_names();
        let mut found: Vec<Option<Vec<TermExpr>>> = vec![None; expected.len()];
        for (ln, name, terms) in parsed {
            let Some(pos) = expected.iter().position(|e| *e == name) else {
                errors.push(ConfigError {
                    line: ln,
                    field: format!("eq {name}"),
                    message: format!(
                        "unknown equation for these margins; expected: {}",
                        expected.join(", ")
                    ),
                });
                continue;
            };
            if found[pos].is_some() {
                errors.push(ConfigError {
                    line: ln,
                    field: format!("eq {name}"),
                    message: "duplicate equation".into(),
                });
                continue;
            }
            found[pos] = Some(terms);
        }
        let missing: Vec<&str> = expected
            .iter()
            .zip(&found)
            .filter(|(_, f)| f.is_none())
            .map(|(n, _)| *n)
            .collect();
        if !missing.is_empty() {
            errors.push(ConfigError {
                line: 0,
                field: "equations".into(),
                message: format!(
                    "margins {m1}/{m2} need {} equations ({}); missing: {}",
                    expected.len(),
                    expected.join(", "),
                    missing.join(", ")
                ),
            });
        }
        equations = found.into_iter().map(|f| f.unwrap_or_default()).collect();
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(ModelConfig {
        spec: ModelSpec {
            margin1: margin1.unwrap(),
            margin2: margin2.unwrap(),
            copula: copula.unwrap(),
            y1: y1.unwrap(),
            y2: y2.unwrap(),
            equations,
        },
        options,
        data,
        adjacency,
    })
}

fn parse_num<T: std::str::FromStr>(
    v: &str,
    line: usize,
    field: &str,
    errors: &mut Vec<ConfigError>,
    mut set: impl FnMut(T),
) {
    match v.parse::<T>() {
        Ok(x) => set(x),
        Err(_) => errors.push(ConfigError {
            line,
            field: field.into(),
            message: format!("'{v}' is not a valid number"),
        }),
    }
}

/// Check that every term references an existing data column.
pub fn check_columns(cfg: &ModelConfig, data: &copreg::data::Dataset) -> Vec<ConfigError> {
    let mut errors = Vec::new();
    let mut need = vec![cfg.spec.y1.clone(), cfg.spec.y2.clone()];
    for (name, terms) in cfg.spec.equation_names().iter().zip(&cfg.spec.equations) {
        for t in terms {
            let col = match t {
                TermExpr::Linear { col }
                | TermExpr::Spline { col, .. }
                | TermExpr::Random { col }
                | TermExpr::Mrf { col } => col,
            };
            if data.column(col).is_err() {
                errors.push(ConfigError {
                    line: 0,
                    field: format!("eq {name}"),
                    message: format!("column '{col}' not in the data"),
                });
            }
        }
    }
    need.retain(|c| data.column(c).is_err());
    for c in need {
        errors.push(ConfigError {
            line: 0,
            field: "response".into(),
            message: format!("column '{c}' not in the data"),
        });
    }
    errors
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "\
# benchmark-style model
margin1 = LN
margin2 = SM
copula = J0
y1 = y1
y2 = y2
eq mu1 = x2 + x3
eq mu2 = x1 + s(x2, k=10)
eq sigma1 =
eq sigma2 =
eq nu2 = x3
eq theta = x1 + s(x2, k=10)
max_outer = 40
";

    #[test]
    fn parses_a_complete_config() {
        let cfg = parse_config(GOOD).unwrap();
        assert_eq!(cfg.spec.n_equations(), 6);
        assert_eq!(cfg.spec.equations[0].len(), 2);
        assert!(cfg.spec.equations[2].is_empty());
        assert_eq!(cfg.options.max_outer, 40);
        assert_eq!(
            cfg.spec.equations[5][1],
            TermExpr::Spline { col: "x2".into(), k: 10 }
        );
    }

    #[test]
    fn collects_every_error_with_context() {
        let bad = "\
margin1 = LN
margin2 = XX
copula = J45
y1 = y1
y2 = y2
eq mu1 = s(x2, k=2)
max_outer = soon
";
        let errs = parse_config(bad).unwrap_err();
        let text: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
        assert!(text.iter().any(|t| t.contains("line 2") && t.contains("XX")));
        assert!(
            text.iter()
                .any(|t| t.contains("J45") && t.contains("J0, J90, J180, J270")),
            "{text:?}"
        );
        assert!(text.iter().any(|t| t.contains("line 6") && t.contains("k >= 4")));
        assert!(text.iter().any(|t| t.contains("line 7") && t.contains("soon")));
        // margins unresolved, so no equation-count complaint is possible yet
        assert!(errs.len() >= 4);
    }

    #[test]
    fn three_parameter_margins_expect_seven_equations() {
        let bad = "\
margin1 = DAGUM
margin2 = SM
copula = N
y1 = a
y2 = b
eq mu1 =
eq mu2 =
eq sigma1 =
eq sigma2 =
eq theta =
";
        let errs = parse_config(bad).unwrap_err();
        let msg = errs
            .iter()
            .find(|e| e.field == "equations")
            .unwrap()
            .to_string();
        assert!(msg.contains("7 equations"), "{msg}");
        assert!(msg.contains("missing: nu1, nu2"), "{msg}");
    }

    #[test]
    fn term_expressions_round_trip_through_display() {
        for src in ["x1", "s(x2,k=8)", "random(g)", "mrf(region)"] {
            let t = parse_term(src).unwrap();
            assert_eq!(parse_term(&t.to_string()).unwrap(), t);
        }
        assert!(parse_term("s()").is_err());
        assert!(parse_term("s(x, j=3)").is_err());
        assert!(parse_term("2x").is_err());
    }

    #[test]
    fn mrf_requires_adjacency() {
        let bad = GOOD.replace("eq theta = x1 + s(x2, k=10)", "eq theta = mrf(x1)");
        let errs = parse_config(&bad).unwrap_err();
        assert!(errs[0].message.contains("adjacency"));
        let good = format!("{}\nadjacency = adj.txt", bad);
        assert!(parse_config(&good).is_ok());
    }
}
