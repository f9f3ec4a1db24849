//! Solution files and CSV tables.
//!
//! A solution file is a JSON envelope: a `meta` object (format version,
//! truncation, problem, parameters, solve diagnostics) and a `values` array
//! in lexicographic vertex order. Numbers are written as shortest
//! round-trip decimals, so reading a written file reproduces every bit.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calculus::Field;
use crate::energy::{Problem, ProblemKind};
use crate::error::{Error, Result};
use crate::lattice::{LatticeGraph, Truncation, Vertex};
use crate::model::{ModelParams, PotentialKind};
use crate::solver::{Constraint, SolveReport};

pub const FORMAT_NAME: &str = "logkirchhoff-solution";
pub const FORMAT_VERSION: u32 = 1;
pub const ORDERING: &str = "lexicographic (x1, x2, x3) over interior and halo";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemTag {
    WholeLattice,
    Domain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionMeta {
    pub format: String,
    pub version: u32,
    pub ordering: String,
    pub shape: Truncation,
    pub radius: u64,
    pub vertex_count: usize,
    pub problem: ProblemTag,
    pub omega: Vec<Vertex>,
    pub potential: Option<PotentialKind>,
    pub params: ModelParams,
    pub constraint: Option<Constraint>,
    pub level: Option<f64>,
    pub residual_sup: Option<f64>,
    pub nehari_residuals: Option<(f64, f64)>,
    pub seed: Option<String>,
    pub certified: Option<bool>,
}

impl SolutionMeta {
    /// Metadata for a bare field of `problem`.
    pub fn for_problem(problem: &Problem) -> Self {
        let g = problem.graph();
        let (tag, potential) = match problem.kind() {
            ProblemKind::WholeLattice { potential } => (ProblemTag::WholeLattice, Some(potential.kind)),
            ProblemKind::Domain { .. } => (ProblemTag::Domain, None),
        };
        SolutionMeta {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            ordering: ORDERING.into(),
            shape: g.shape(),
            radius: g.radius(),
            vertex_count: g.len(),
            problem: tag,
            omega: problem.well().omega().iter().copied().collect(),
            potential,
            params: *problem.params(),
            constraint: None,
            level: None,
            residual_sup: None,
            nehari_residuals: None,
            seed: None,
            certified: None,
        }
    }

    pub fn for_report(problem: &Problem, report: &SolveReport) -> Self {
        SolutionMeta {
            constraint: Some(report.constraint),
            level: Some(report.level),
            residual_sup: Some(report.residual_sup),
            nehari_residuals: Some(report.nehari_residuals),
            seed: Some(report.seed_name.clone()),
            certified: Some(report.certified),
            ..Self::for_problem(problem)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    meta: SolutionMeta,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct VersionProbe {
    meta: MetaProbe,
}

#[derive(Deserialize)]
struct MetaProbe {
    version: u32,
}

/// A field read back from disk together with its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub meta: SolutionMeta,
    pub field: Field,
}

pub fn solution_to_string(field: &Field, meta: &SolutionMeta) -> Result<String> {
    let env = Envelope {
        meta: meta.clone(),
        values: field.values().to_vec(),
    };
    let mut s = serde_json::to_string_pretty(&env)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize solution: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_field(field: &Field, meta: &SolutionMeta, path: &Path) -> Result<()> {
    std::fs::write(path, solution_to_string(field, meta)?)?;
    Ok(())
}

pub fn write_solution(report: &SolveReport, problem: &Problem, path: &Path) -> Result<()> {
    write_field(&report.minimizer, &SolutionMeta::for_report(problem, report), path)
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}

fn json_error(text: &str, e: serde_json::Error) -> Error {
    Error::Parse {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    }
}

pub fn parse_solution(text: &str) -> Result<Solution> {
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| json_error(text, e))?;
    if probe.meta.version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: probe.meta.version,
            expected: FORMAT_VERSION,
        });
    }
    let env: Envelope = serde_json::from_str(text).map_err(|e| json_error(text, e))?;
    let values_at = text.find("\"values\"").unwrap_or(0);
    if env.meta.format != FORMAT_NAME {
        return Err(Error::Parse {
            offset: text.find("\"format\"").unwrap_or(0),
            message: format!("unknown format '{}'", env.meta.format),
        });
    }
    let graph = Arc::new(LatticeGraph::new(env.meta.shape, env.meta.radius));
    if env.values.len() != graph.len() || env.meta.vertex_count != graph.len() {
        return Err(Error::Parse {
            offset: values_at,
            message: format!(
                "expected {} values for a {} truncation of radius {}, found {} (header says {})",
                graph.len(),
                env.meta.shape,
                env.meta.radius,
                env.values.len(),
                env.meta.vertex_count
            ),
        });
    }
    let field = Field::from_values(&graph, env.values).map_err(|e| Error::Parse {
        offset: values_at,
        message: e.to_string(),
    })?;
    Ok(Solution {
        meta: env.meta,
        field,
    })
}

pub fn read_solution(path: &Path) -> Result<Solution> {
    parse_solution(&std::fs::read_to_string(path)?)
}

/// Plain CSV with a fixed header; floats in shortest round-trip form.
pub fn csv_table(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let mut first = true;
        for x in row {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{x:?}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_box, DomainSpec};
    use crate::solver::limit_problem;

    fn sample() -> (Problem, Field) {
        let params = ModelParams::new(1.0, 1.0, 7.0, 1.0, 8.0).unwrap();
        let pb = limit_problem(params, DomainSpec::ball(1)).unwrap();
        let f = pb.restrict(&Field::from_fn(pb.graph(), |v| {
            (v.0[0] as f64 * 0.1 + 1.0 / 3.0).sin() * 1e-7f64.powi(v.0[1] as i32 + 1)
        }));
        (pb, f)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (pb, f) = sample();
        let text = solution_to_string(&f, &SolutionMeta::for_problem(&pb)).unwrap();
        let back = parse_solution(&text).unwrap();
        for (a, b) in f.values().iter().zip(back.field.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.meta, SolutionMeta::for_problem(&pb));
    }

    #[test]
    fn wrong_count_and_version() {
        let (pb, f) = sample();
        let mut meta = SolutionMeta::for_problem(&pb);
        let g = Arc::new(build_box(1));
        let short = Field::zeros(&g);
        let text = solution_to_string(&short, &meta).unwrap();
        assert!(matches!(parse_solution(&text), Err(Error::Parse { .. })));
        meta.version = 7;
        let text = solution_to_string(&f, &meta).unwrap();
        assert!(matches!(
            parse_solution(&text),
            Err(Error::UnsupportedVersion { found: 7, expected: 1 })
        ));
    }

    #[test]
    fn malformed_reports_offset() {
        let text = "{\n  \"meta\": {\n    \"version\": 1,\n    oops\n";
        match parse_solution(text) {
            Err(Error::Parse { offset, .. }) => assert_eq!(&text[offset..offset + 4], "oops"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_format() {
        let t = csv_table(&["a", "b"], &[vec![1.0, 0.1], vec![1e-300, -2.5]]);
        assert_eq!(t, "a,b\n1.0,0.1\n1e-300,-2.5\n");
    }
}
