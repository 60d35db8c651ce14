//! JSON interchange formats. JSON is the single source of truth for every
//! artifact this workspace emits; human-readable tables are renderings of
//! these structures.
//!
//! File schemas:
//!
//! * state: `{"n": int, "d": int, "amplitudes": [[re, im], …]}` — the
//!   loader renormalizes inputs within 1e-6 of unit norm and rejects
//!   anything farther out.
//! * code: `{"q": int, "n": int, "codewords": [[int, …], …]}` — the
//!   loader re-validates every code invariant.
//! * verification report:
//!   `{"n", "d", "is_ame", "subsets": [{"parties", "entropy", "pass"}],
//!     "worst_deviation"}`.
//! * scheme descriptor: `{"m", "L", "d", "resource": path, "dealers"}`,
//!   with a relative resource path resolved against the descriptor file.

use std::fs;
use std::path::{Path, PathBuf};

use ame_core::ame::{AmeReport, SubsetCheck};
use ame_core::codes::ClassicalCode;
use ame_core::qss::{SetCategory, SetClassification};
use ame_core::qstate::QuditState;
use ame_core::swap::{EquivVerdict, SwapChainResult, Witness};
use ame_core::teleport::TeleportRun;
use ame_core::Complex64;
use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Loader tolerance on the input norm before renormalization.
pub const LOAD_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Serialize, Deserialize)]
struct StateFile {
    n: usize,
    d: usize,
    amplitudes: Vec<[f64; 2]>,
}

pub fn save_state(path: &Path, state: &QuditState) -> Result<()> {
    let file = StateFile {
        n: state.n(),
        d: state.d(),
        amplitudes: state.amplitudes().iter().map(|a| [a.re, a.im]).collect(),
    };
    fs::write(path, serde_json::to_string_pretty(&file)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn load_state(path: &Path) -> Result<QuditState> {
    let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: StateFile =
        serde_json::from_str(&raw).with_context(|| format!("parsing {}", path.display()))?;
    let amps: Vec<Complex64> =
        file.amplitudes.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > LOAD_NORM_TOL {
        bail!("state norm {norm} deviates from 1 by more than {LOAD_NORM_TOL}");
    }
    QuditState::from_unnormalized(file.n, file.d, amps)
        .map_err(|e| anyhow!("invalid state file: {e}"))
}

#[derive(Debug, Serialize, Deserialize)]
struct CodeFile {
    q: usize,
    n: usize,
    codewords: Vec<Vec<u8>>,
}

pub fn save_code(path: &Path, code: &ClassicalCode) -> Result<()> {
    let file =
        CodeFile { q: code.q(), n: code.n(), codewords: code.codewords().to_vec() };
    fs::write(path, serde_json::to_string_pretty(&file)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn load_code(path: &Path) -> Result<ClassicalCode> {
    let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: CodeFile =
        serde_json::from_str(&raw).with_context(|| format!("parsing {}", path.display()))?;
    ClassicalCode::new(file.q, file.n, file.codewords)
        .map_err(|e| anyhow!("invalid code file: {e}"))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubsetJson {
    pub parties: Vec<usize>,
    pub entropy: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AmeReportJson {
    pub n: usize,
    pub d: usize,
    pub is_ame: bool,
    pub subsets: Vec<SubsetJson>,
    pub worst_deviation: f64,
}

impl From<&AmeReport> for AmeReportJson {
    fn from(report: &AmeReport) -> Self {
        AmeReportJson {
            n: report.n,
            d: report.d,
            is_ame: report.is_ame,
            subsets: report
                .checked_subsets
                .iter()
                .map(|c: &SubsetCheck| SubsetJson {
                    parties: c.parties.clone(),
                    entropy: c.entropy_dits,
                    pass: c.pass,
                })
                .collect(),
            worst_deviation: report.worst_deviation,
        }
    }
}

/// Scheme descriptor; `resource` is a state-file path, resolved against
/// the descriptor's directory when relative.
#[derive(Debug, Serialize, Deserialize)]
pub struct SchemeDescriptor {
    pub m: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub d: usize,
    pub resource: String,
    pub dealers: Vec<usize>,
}

impl SchemeDescriptor {
    pub fn resource_path(&self, descriptor_path: &Path) -> PathBuf {
        let p = PathBuf::from(&self.resource);
        if p.is_relative() {
            descriptor_path.parent().unwrap_or_else(|| Path::new(".")).join(p)
        } else {
            p
        }
    }
}

pub fn load_scheme(path: &Path) -> Result<SchemeDescriptor> {
    let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&raw).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClassificationJson {
    pub subset: Vec<usize>,
    pub category: String,
    pub mutual_info_dits: f64,
}

pub fn classification_json(c: &SetClassification) -> ClassificationJson {
    ClassificationJson {
        subset: c.subset.clone(),
        category: match c.category {
            SetCategory::Authorized => "authorized".into(),
            SetCategory::Forbidden => "forbidden".into(),
            SetCategory::Intermediate => "intermediate".into(),
        },
        mutual_info_dits: c.mutual_info_dits,
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RecoveryJson {
    pub outcomes: Vec<(usize, usize)>,
    pub set: Vec<usize>,
    pub fidelity: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QssReportJson {
    pub m: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub d: usize,
    pub dealers: Vec<usize>,
    pub secret: String,
    pub branches_tested: usize,
    pub min_fidelity: f64,
    pub recoveries: Vec<RecoveryJson>,
    pub classification: Vec<ClassificationJson>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TranscriptStepJson {
    pub actor: String,
    pub action: String,
    pub outcome: Option<(usize, usize)>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TeleportBranchJson {
    pub dealer_outcome: (usize, usize),
    pub a_outcome: Option<(usize, usize)>,
    pub probability: f64,
    pub fidelity: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TeleportReportJson {
    pub dealer: usize,
    pub set_a: Vec<usize>,
    pub destination: usize,
    pub min_fidelity: f64,
    pub branches: Vec<TeleportBranchJson>,
    pub transcript: Vec<TranscriptStepJson>,
    pub transcript_fidelity: f64,
}

pub fn teleport_json(run: &TeleportRun) -> TeleportReportJson {
    TeleportReportJson {
        dealer: run.dealer,
        set_a: run.set_a.clone(),
        destination: run.destination,
        min_fidelity: run.min_fidelity,
        branches: run
            .branches
            .iter()
            .map(|b| TeleportBranchJson {
                dealer_outcome: b.dealer_outcome,
                a_outcome: b.a_outcome,
                probability: b.probability,
                fidelity: b.fidelity,
            })
            .collect(),
        transcript: run
            .transcript
            .steps
            .iter()
            .map(|s| TranscriptStepJson {
                actor: s.actor.clone(),
                action: s.action.clone(),
                outcome: s.outcome,
            })
            .collect(),
        transcript_fidelity: run.transcript.final_fidelity,
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MonomialJson {
    pub basis_perm: Vec<usize>,
    pub phase_exponents: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WitnessJson {
    pub block_permutation: Vec<usize>,
    pub monomials: Vec<MonomialJson>,
}

pub fn witness_json(w: &Witness) -> WitnessJson {
    WitnessJson {
        block_permutation: w.block_permutation.clone(),
        monomials: w
            .monomials
            .iter()
            .map(|m| MonomialJson {
                basis_perm: m.basis_perm.clone(),
                phase_exponents: m.phase_exponents.clone(),
            })
            .collect(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SwapBranchJson {
    pub outcomes: Vec<Vec<(usize, usize)>>,
    pub corrected_fidelity: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SwapReportJson {
    pub hops: usize,
    pub outcomes: Vec<Vec<(usize, usize)>>,
    pub path_probability: f64,
    pub corrected_fidelity: f64,
    pub u_power_check: bool,
    pub final_is_ame: bool,
    pub witness: Option<WitnessJson>,
    pub spectrum_mismatch: Option<bool>,
    /// Per-branch corrected fidelities when full enumeration was requested.
    pub branch_table: Option<Vec<SwapBranchJson>>,
}

pub fn swap_json(
    result: &SwapChainResult,
    final_is_ame: bool,
    equiv: &EquivVerdict,
    branch_table: Option<Vec<SwapBranchJson>>,
) -> SwapReportJson {
    let (witness, spectrum_mismatch) = match equiv {
        EquivVerdict::Equivalent(w) => (Some(witness_json(w)), None),
        EquivVerdict::Unknown { spectrum_mismatch } => (None, Some(*spectrum_mismatch)),
    };
    SwapReportJson {
        hops: result.hops,
        outcomes: result.outcome_record.clone(),
        path_probability: result.path_probability,
        corrected_fidelity: result.corrected_fidelity,
        u_power_check: result.u_power_check,
        final_is_ame,
        witness,
        spectrum_mismatch,
        branch_table,
    }
}
