//! JSON and DOT serialization of systems, complexes, verdicts, and homology
//! reports.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

use fractal_nerve_core::contact::{ContactWitness, Verdict};
use fractal_nerve_core::homology::{BettiReport, HomologyMethod};
use fractal_nerve_core::ifs::{GridIfs, Tail};
use fractal_nerve_core::nerve::{SimplicialComplex, VerdictMode};

/// On-disk description of a grid system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemDescriptor {
    pub d: usize,
    pub n: Vec<u32>,
    pub levels: Vec<Vec<Vec<u32>>>,
    pub tail: TailDescriptor,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TailDescriptor {
    Full,
    Periodic { period: usize },
    Truncate,
}

impl SystemDescriptor {
    pub fn to_ifs(&self) -> Result<GridIfs> {
        if self.d != self.n.len() {
            bail!(
                "descriptor d={} does not match n of length {}",
                self.d,
                self.n.len()
            );
        }
        let tail = match self.tail {
            TailDescriptor::Full => Tail::Full,
            TailDescriptor::Periodic { period } => Tail::Periodic(period),
            TailDescriptor::Truncate => Tail::Truncate,
        };
        GridIfs::new(self.n.clone(), self.levels.clone(), tail).context("invalid system descriptor")
    }

    pub fn from_ifs(ifs: &GridIfs) -> SystemDescriptor {
        let levels = (1..=ifs.horizon())
            .map(|t| {
                ifs.level(t)
                    .unwrap()
                    .digits()
                    .iter()
                    .map(|&id| ifs.digit_components(id))
                    .collect()
            })
            .collect();
        SystemDescriptor {
            d: ifs.dim(),
            n: ifs.subdiv().to_vec(),
            levels,
            tail: match ifs.tail() {
                Tail::Full => TailDescriptor::Full,
                Tail::Periodic(p) => TailDescriptor::Periodic { period: p },
                Tail::Truncate => TailDescriptor::Truncate,
            },
        }
    }
}

pub fn load_system(path: &std::path::Path) -> Result<GridIfs> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading system descriptor {}", path.display()))?;
    let descriptor: SystemDescriptor =
        serde_json::from_str(&text).context("parsing system descriptor")?;
    descriptor.to_ifs()
}

fn mode_str(mode: VerdictMode) -> &'static str {
    match mode {
        VerdictMode::Exact => "exact",
        VerdictMode::Outer => "outer",
        VerdictMode::Inner => "inner",
    }
}

/// `{"vertices": [...], "simplices": {"1": [...], "2": [...]}}` with each
/// vertex spelled as its digit tuples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexDump {
    pub j: usize,
    pub k: usize,
    pub verdict_mode: String,
    pub unknown_included: usize,
    pub unknown_excluded: usize,
    pub vertices: Vec<Vec<Vec<u32>>>,
    pub simplices: BTreeMap<String, Vec<Vec<u32>>>,
}

impl ComplexDump {
    pub fn from_complex(complex: &SimplicialComplex, ifs: Option<&GridIfs>) -> ComplexDump {
        let vertices = (0..complex.vertex_count() as u32)
            .map(|v| {
                complex
                    .vertex_digits(v)
                    .into_iter()
                    .map(|id| match ifs {
                        Some(ifs) => ifs.digit_components(id),
                        None => vec![id as u32],
                    })
                    .collect()
            })
            .collect();
        let mut simplices = BTreeMap::new();
        for q in 1..=complex.dim() {
            if let Some(list) = complex.simplices(q) {
                if !list.is_empty() {
                    simplices.insert(q.to_string(), list.iter().map(|s| s.to_vec()).collect());
                }
            }
        }
        ComplexDump {
            j: complex.j,
            k: complex.k,
            verdict_mode: mode_str(complex.verdict_mode).to_string(),
            unknown_included: complex.unknown_included,
            unknown_excluded: complex.unknown_excluded,
            vertices,
            simplices,
        }
    }
}

/// DOT rendering of the 1-skeleton; vertex labels are digit strings with
/// levels separated by dots.
pub fn complex_dot(complex: &SimplicialComplex, ifs: Option<&GridIfs>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "graph nerve_{}_{} {{", complex.j, complex.k);
    for v in 0..complex.vertex_count() as u32 {
        let label: Vec<String> = complex
            .vertex_digits(v)
            .into_iter()
            .map(|id| match ifs {
                Some(ifs) => ifs
                    .digit_components(id)
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(""),
                None => id.to_string(),
            })
            .collect();
        let _ = writeln!(out, "  v{} [label=\"{}\"];", v, label.join("."));
    }
    for [a, b] in complex.edges() {
        let _ = writeln!(out, "  v{} -- v{};", a, b);
    }
    out.push_str("}\n");
    out
}

/// Witness digit streams serialize as `{prefix: [...], cycle: [...]}` per
/// word, digits spelled as component tuples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamDump {
    pub start_level: usize,
    pub prefix: Vec<Vec<u32>>,
    pub cycle: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictDump {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certified_depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub persisted_depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<StreamDump>>,
}

impl VerdictDump {
    pub fn from_verdict(verdict: &Verdict, ifs: &GridIfs) -> VerdictDump {
        match verdict {
            Verdict::Nonempty(w) => VerdictDump {
                kind: "nonempty".into(),
                certified_depth: None,
                persisted_depth: None,
                witness: Some(witness_dump(w, ifs)),
            },
            Verdict::Empty { certified_depth } => VerdictDump {
                kind: "empty".into(),
                certified_depth: Some(*certified_depth),
                persisted_depth: None,
                witness: None,
            },
            Verdict::Unknown { persisted_depth } => VerdictDump {
                kind: "unknown".into(),
                certified_depth: None,
                persisted_depth: Some(*persisted_depth),
                witness: None,
            },
        }
    }
}

fn witness_dump(witness: &ContactWitness, ifs: &GridIfs) -> Vec<StreamDump> {
    witness
        .streams
        .iter()
        .map(|s| StreamDump {
            start_level: s.start_level,
            prefix: s
                .prefix
                .iter()
                .map(|&id| ifs.digit_components(id))
                .collect(),
            cycle: s.cycle.iter().map(|&id| ifs.digit_components(id)).collect(),
        })
        .collect()
}

/// `{"j":…, "k":…, "betti":[…], "torsion":[[…]], "method":"snf",
/// "verdict_mode":"exact|outer|inner"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BettiDump {
    pub j: usize,
    pub k: usize,
    pub betti: Vec<usize>,
    pub torsion: Vec<Vec<String>>,
    pub method: String,
    pub verdict_mode: String,
    pub euler_consistent: bool,
}

impl BettiDump {
    pub fn from_report(report: &BettiReport) -> BettiDump {
        BettiDump {
            j: report.j,
            k: report.k,
            betti: report.betti.clone(),
            torsion: report
                .torsion
                .iter()
                .map(|t| t.iter().map(|d| d.to_string()).collect())
                .collect(),
            method: match report.method {
                HomologyMethod::UnionFindEuler => "euler-graph".into(),
                HomologyMethod::Snf => "snf".into(),
            },
            verdict_mode: mode_str(report.verdict_mode).to_string(),
            euler_consistent: report.euler_consistent,
        }
    }
}
