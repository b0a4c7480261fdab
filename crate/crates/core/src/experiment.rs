//! Seeded Monte-Carlo experiments, verdicts and result files.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::klcheck::{check_cross_syndrome_with, kl_report};
use crate::listdec::{build_list_table, mixture_channel, mixture_density, ErrorSet, ListTable};
use crate::moments::{
    self, dense_word_trace, expected_p0, expected_unnormalized_fidelity, gamma4, moment4_pauli, to_f64,
    trace_with_permutation, MomentValue,
};
use crate::pauli::PauliOperator;
use crate::protocol::{
    fidelity_series, multi_round, purity_epsilon_two_design, purity_test_epsilon, to_jsonl, Adversary,
    AdversarySpec, EncodedState, Protocol, ProtocolConfig, Tolerances,
};
use crate::randunitary::{derive_seed, format_seed, random_state, stream_rng, Seed, UnitaryKind, UnitarySource};
use crate::stabilizer::{library, StabilizerCode};
use crate::stats::{ols_slope, parallel_accumulate, Welford};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    Prop1,
    Prop2,
    Thm2,
    Kl,
    Listtable,
    Wg,
    Purity,
    Multiround,
}

impl ExperimentId {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::Prop1 => "prop1",
            ExperimentId::Prop2 => "prop2",
            ExperimentId::Thm2 => "thm2",
            ExperimentId::Kl => "kl",
            ExperimentId::Listtable => "listtable",
            ExperimentId::Wg => "wg",
            ExperimentId::Purity => "purity",
            ExperimentId::Multiround => "multiround",
        }
    }
}

/// One experiment. Unset fields take per-experiment defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_weight: Option<usize>,
    /// Smallest list length the decoding experiments must find.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_list: Option<usize>,
    /// Decode on the first syndrome whose list has exactly this length
    /// instead of the longest list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub list_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samplers: Vec<UnitaryKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub d_values: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub m_values: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentId) -> Self {
        Self {
            experiment,
            n: None,
            m: None,
            code: None,
            max_weight: None,
            min_list: None,
            list_length: None,
            samplers: Vec::new(),
            trials: None,
            d_values: Vec::new(),
            m_values: Vec::new(),
            rounds: None,
        }
    }

    fn n(&self) -> usize {
        self.n.unwrap_or(2)
    }

    fn m(&self) -> usize {
        self.m.unwrap_or(match self.experiment {
            ExperimentId::Prop1 => 2,
            _ => 3,
        })
    }

    fn code_spec(&self) -> String {
        self.code.clone().unwrap_or_else(|| {
            match self.experiment {
                ExperimentId::Prop1 => "c422^2",
                ExperimentId::Kl | ExperimentId::Listtable => "perfect5",
                _ => "steane7^5",
            }
            .to_string()
        })
    }

    fn max_weight(&self) -> usize {
        self.max_weight.unwrap_or(match self.experiment {
            ExperimentId::Prop1 | ExperimentId::Kl => 1,
            _ => 2,
        })
    }

    fn trials(&self) -> u64 {
        self.trials.unwrap_or(match self.experiment {
            ExperimentId::Prop1 => 20_000,
            ExperimentId::Prop2 => 5_000,
            ExperimentId::Thm2 => 40_000,
            ExperimentId::Purity => 10_000,
            _ => 1,
        })
    }

    fn list_length(&self) -> Option<usize> {
        self.list_length.or(match self.experiment {
            ExperimentId::Thm2 => Some(2),
            _ => None,
        })
    }

    fn samplers(&self) -> Vec<UnitaryKind> {
        if !self.samplers.is_empty() {
            return self.samplers.clone();
        }
        match self.experiment {
            ExperimentId::Prop1 => vec![UnitaryKind::KeyedHaar, UnitaryKind::KeyedClifford],
            ExperimentId::Purity => vec![UnitaryKind::KeyedClifford],
            _ => vec![UnitaryKind::KeyedHaar],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == Some(0) || self.rounds == Some(0) {
            return Err(Error::Config(format!("{}: trial counts must be at least 1", self.experiment.as_str())));
        }
        if matches!(
            self.experiment,
            ExperimentId::Prop1 | ExperimentId::Prop2 | ExperimentId::Thm2 | ExperimentId::Multiround
        ) || self.code.is_some()
        {
            library::resolve(&self.code_spec())?;
        }
        Ok(())
    }
}

/// A list of experiments sharing one master seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(rename = "experiment")]
    pub experiments: Vec<ExperimentConfig>,
}

impl SuiteConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Self::from_json(text)
        } else {
            Self::from_toml(text)
        }
    }

    /// Every experiment with its defaults.
    pub fn full() -> Self {
        use ExperimentId::*;
        Self {
            seed: None,
            threads: None,
            experiments: [Wg, Prop1, Prop2, Kl, Listtable, Thm2, Multiround, Purity]
                .into_iter()
                .map(ExperimentConfig::new)
                .collect(),
        }
    }

    /// SHA-256 of the canonical JSON serialization, as hex. The thread
    /// count is left out since it never changes results.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&Self {
            threads: None,
            ..self.clone()
        })
        .expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Check {
    /// `|mean − target| ≤ 3·stderr`.
    Statistical,
    /// `|mean − target| ≤ tolerance`.
    Absolute { tolerance: f64 },
    /// `mean ≤ target`.
    AtMost,
    /// `mean ≥ target`.
    AtLeast,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub experiment: String,
    pub metric: String,
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
    pub interval: [f64; 2],
    pub target: f64,
    pub target_provenance: String,
    pub check: Check,
    pub verdict: Verdict,
}

impl StatSummary {
    fn new(exp: ExperimentId, metric: impl Into<String>, w: &Welford, target: f64, provenance: &str, check: Check) -> Self {
        let stderr = if w.count > 1 { w.stderr() } else { 0.0 };
        Self::from_parts(exp, metric, w.mean, stderr, w.count, target, provenance, check)
    }

    fn exact(exp: ExperimentId, metric: impl Into<String>, value: f64, target: f64, provenance: &str, check: Check) -> Self {
        Self::from_parts(exp, metric, value, 0.0, 1, target, provenance, check)
    }

    #[allow(clippy::too_many_arguments)]
    fn from_parts(
        exp: ExperimentId,
        metric: impl Into<String>,
        mean: f64,
        stderr: f64,
        trials: u64,
        target: f64,
        provenance: &str,
        check: Check,
    ) -> Self {
        let ok = match check {
            Check::Statistical => (mean - target).abs() <= 3.0 * stderr,
            Check::Absolute { tolerance } => (mean - target).abs() <= tolerance,
            Check::AtMost => mean <= target,
            Check::AtLeast => mean >= target,
        };
        Self {
            experiment: exp.as_str().to_string(),
            metric: metric.into(),
            mean,
            stderr,
            trials,
            interval: [mean - 3.0 * stderr, mean + 3.0 * stderr],
            target,
            target_provenance: provenance.to_string(),
            check,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Everything a suite run produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResults {
    pub seed: String,
    pub config_hash: String,
    pub summaries: Vec<StatSummary>,
}

impl SuiteResults {
    pub fn all_pass(&self) -> bool {
        self.summaries.iter().all(StatSummary::passed)
    }
}

/// Threads from `QLD_THREADS`, else the config, else all cores.
pub fn thread_count(config: Option<usize>) -> usize {
    std::env::var("QLD_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&t: &usize| t > 0)
        .or(config)
        .unwrap_or_else(rayon::current_num_threads)
}

/// Seed of the `index`-th experiment of a suite.
pub fn experiment_seed(master: &Seed, index: usize, id: ExperimentId) -> Seed {
    derive_seed(master, &format!("{index}/{}", id.as_str()))
}

/// Runs every experiment of the suite inside a dedicated thread pool and,
/// when `out` is given, writes `results.json`, `results.csv`, `report.md`
/// and per-experiment artifacts there.
pub fn run_suite(cfg: &SuiteConfig, seed: &Seed, out: Option<&Path>) -> Result<SuiteResults> {
    for e in &cfg.experiments {
        e.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(cfg.threads))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }
    let mut summaries = Vec::new();
    for (i, e) in cfg.experiments.iter().enumerate() {
        let exp_seed = experiment_seed(seed, i, e.experiment);
        let (s, artifacts) = pool.install(|| run_experiment_with_artifacts(e, &exp_seed))?;
        if let Some(dir) = out {
            for (name, body) in artifacts {
                std::fs::write(dir.join(format!("{i:02}_{name}")), body)?;
            }
        }
        summaries.extend(s);
    }
    let results = SuiteResults {
        seed: format_seed(seed),
        config_hash: cfg.hash(),
        summaries,
    };
    if let Some(dir) = out {
        for fmt in [Format::Json, Format::Csv, Format::Md] {
            std::fs::write(dir.join(fmt.file_name()), emit_results(&results, fmt)?)?;
        }
    }
    Ok(results)
}

pub fn run_experiment(cfg: &ExperimentConfig, seed: &Seed) -> Result<Vec<StatSummary>> {
    Ok(run_experiment_with_artifacts(cfg, seed)?.0)
}

type Artifacts = Vec<(String, String)>;

fn run_experiment_with_artifacts(cfg: &ExperimentConfig, seed: &Seed) -> Result<(Vec<StatSummary>, Artifacts)> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentId::Wg => wg_experiment(cfg),
        ExperimentId::Prop1 => prop1_experiment(cfg, seed),
        ExperimentId::Prop2 => prop2_experiment(cfg, seed),
        ExperimentId::Thm2 => thm2_experiment(cfg, seed),
        ExperimentId::Kl => kl_experiment(cfg),
        ExperimentId::Listtable => listtable_experiment(cfg, seed),
        ExperimentId::Purity => purity_experiment(cfg, seed),
        ExperimentId::Multiround => multiround_experiment(cfg, seed),
    }
}

fn wg_experiment(cfg: &ExperimentConfig) -> Result<(Vec<StatSummary>, Artifacts)> {
    let ds = if cfg.d_values.is_empty() {
        vec![4, 8, 16]
    } else {
        cfg.d_values.clone()
    };
    let mut out = Vec::new();
    for &d in &ds {
        out.push(StatSummary::exact(
            ExperimentId::Wg,
            format!("orthogonality_max_error_d{d}"),
            moments::orthogonality_error(d)?,
            0.0,
            "Weingarten orthogonality: sum over S4 equals the identity indicator",
            Check::Absolute { tolerance: 1e-9 },
        ));
    }
    out.push(StatSummary::exact(
        ExperimentId::Wg,
        "wg_4cycle_d4",
        to_f64(&moments::wg_coefficient(&[4], 4)?),
        -5.0 / 5040.0,
        "closed form -5/(d(d^2-1)(d^2-4)(d^2-9)) at d=4",
        Check::Absolute { tolerance: 1e-15 },
    ));
    let artifacts = vec![
        ("wg_table.csv".to_string(), moments::wg_table_csv(&ds)?),
        ("orthogonality.csv".to_string(), moments::orthogonality_csv(&ds)?),
    ];
    Ok((out, artifacts))
}

/// Code, table and a syndrome list of at least `min_list` representatives.
struct DecodingSetup {
    code: Arc<StabilizerCode>,
    table: Arc<ListTable>,
    list: Vec<PauliOperator>,
    config: ProtocolConfig,
}

fn decoding_setup(cfg: &ExperimentConfig, kind: UnitaryKind) -> Result<DecodingSetup> {
    decoding_setup_with(cfg, kind, cfg.list_length())
}

fn decoding_setup_with(cfg: &ExperimentConfig, kind: UnitaryKind, length: Option<usize>) -> Result<DecodingSetup> {
    let code = library::resolve(&cfg.code_spec())?;
    let table = build_list_table(&code, &ErrorSet::new(code.n_physical(), cfg.max_weight()))?;
    let config = ProtocolConfig {
        n: cfg.n(),
        m: cfg.m(),
        code: cfg.code_spec(),
        max_weight: cfg.max_weight(),
        key: "0".into(),
        unitary_kind: kind,
        tolerances: Tolerances::default(),
    };
    let list = match length {
        None => {
            let adv = Adversary::new(AdversarySpec::worst_in_list(cfg.max_weight()), &code, &table)?;
            adv.worst_list().map(|(_, l)| l.to_vec()).unwrap_or_default()
        }
        Some(len) => table
            .iter()
            .map(|(_, l)| l.to_vec())
            .find(|l| l.len() == len)
            .ok_or_else(|| Error::Config(format!("no syndrome of {} has a list of length {len}", cfg.code_spec())))?,
    };
    let need = cfg.min_list.unwrap_or(2);
    if list.len() < need {
        return Err(Error::Config(format!(
            "{} with max weight {} has no list of length {need}",
            cfg.code_spec(),
            cfg.max_weight()
        )));
    }
    Ok(DecodingSetup {
        code: Arc::new(code),
        table: Arc::new(table),
        list,
        config,
    })
}

impl DecodingSetup {
    fn protocol<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Protocol> {
        let mut c = self.config.clone();
        c.key = crate::randunitary::format_key(rng.random::<u128>());
        Protocol::from_parts(&c, self.code.clone(), self.table.clone())
    }

    fn corrupted(&self, proto: &Protocol, phi: &crate::StateVector, true_index: usize) -> Result<EncodedState> {
        proto.encode(phi)?.apply_physical(&self.code, &self.list[true_index])
    }
}

fn prop1_experiment(cfg: &ExperimentConfig, seed: &Seed) -> Result<(Vec<StatSummary>, Artifacts)> {
    let (n, m) = (cfg.n() as u32, cfg.m() as u32);
    let target = expected_p0(n, m);
    let mut out = Vec::new();
    for kind in cfg.samplers() {
        let setup = decoding_setup(cfg, kind)?;
        let s = derive_seed(seed, &format!("{kind:?}"));
        let [w] = parallel_accumulate(cfg.trials(), |i| {
            let mut rng = stream_rng(&s, i);
            let proto = setup.protocol(&mut rng)?;
            let phi = random_state(&mut rng, 1 << n);
            let corrupted = setup.corrupted(&proto, &phi, 1)?;
            let split = setup.code.logical_split(&setup.list[0])?;
            Ok([proto.guess(&corrupted, &split)?.pass_probability])
        })?;
        out.push(StatSummary::new(
            ExperimentId::Prop1,
            format!("wrong_guess_pass_probability_{}", kind_label(kind)),
            &w,
            target,
            "closed form (2^n d - 1)/(d^2 - 1), d = 2^(n+m)",
            Check::Statistical,
        ));
    }
    Ok((out, Vec::new()))
}

fn kind_label(kind: UnitaryKind) -> &'static str {
    match kind {
        UnitaryKind::Haar | UnitaryKind::KeyedHaar => "haar",
        UnitaryKind::Clifford | UnitaryKind::KeyedClifford => "clifford",
        UnitaryKind::Fixed => "fixed",
    }
}

/// `Σ_π c_π α_π` with `c_π` from the Pauli fast path on the actual
/// residual Pauli and `α_π` from dense traces of `ρ_0` and `I − Π`.
fn structured_fidelity(t: &PauliOperator, n: usize, m: usize, rng: &mut impl Rng) -> Result<f64> {
    let nq = n + m;
    let d = 1usize << nq;
    let td = t.adjoint();
    let r = moment4_pauli(&[td.clone(), t.clone(), td, t.clone()])?;
    let MomentValue::PermutationBasis(coeffs) = r.value else {
        unreachable!("Pauli fast path returns permutation coefficients")
    };
    let phi = random_state(rng, 1 << n);
    let chi = crate::simengine::tensor(&phi, &crate::StateVector::zero(m));
    let v = nalgebra::DVector::from_column_slice(chi.amplitudes());
    let rho0 = &v * v.adjoint();
    let mut q = DMatrix::<Complex64>::identity(d, d);
    for i in (0..d).step_by(1 << m) {
        q[(i, i)] = Complex64::new(0.0, 0.0);
    }
    let factors = [rho0.clone(), q.clone(), rho0, q];
    let g = gamma4();
    let mut total = Complex64::new(0.0, 0.0);
    for (pi, c) in coeffs {
        if c.norm() == 0.0 {
            continue;
        }
        total += c * trace_with_permutation(&factors, &pi.compose(&g), dense_word_trace);
    }
    Ok(total.re)
}

fn prop2_experiment(cfg: &ExperimentConfig, seed: &Seed) -> Result<(Vec<StatSummary>, Artifacts)> {
    let (n, m) = (cfg.n(), cfg.m());
    let setup = decoding_setup(cfg, UnitaryKind::KeyedHaar)?;
    let residual = setup.list[0].adjoint().mul(&setup.list[1])?;
    let sign = if residual.mul(&residual)?.phase() == 0 { 1 } else { -1 };
    let exact = expected_unnormalized_fidelity(n as u32, m as u32, sign)?;
    let (p0, _) = setup.code.logical_split(&setup.list[0])?;
    let (p1, _) = setup.code.logical_split(&setup.list[1])?;
    let t = p0.adjoint().mul(&p1)?;
    let mut rng = stream_rng(&derive_seed(seed, "structured"), 0);
    let structured = structured_fidelity(&t, n, m, &mut rng)?;
    let s = derive_seed(seed, "trials");
    let [w] = parallel_accumulate(cfg.trials(), |i| {
        let mut rng = stream_rng(&s, i);
        let proto = setup.protocol(&mut rng)?;
        let phi = random_state(&mut rng, 1 << n);
        let corrupted = setup.corrupted(&proto, &phi, 1)?;
        let split = setup.code.logical_split(&setup.list[0])?;
        let g = proto.guess(&corrupted, &split)?;
        let f = match g.restored {
            Some(r) => corrupted.logical().inner(r.logical())?.norm_sqr(),
            None => 0.0,
        };
        Ok([f])
    })?;
    let c = (1.0 - exact) * 2f64.powi(m as i32);
    let out = vec![
        StatSummary::new(
            ExperimentId::Prop2,
            "unnormalized_restoration_fidelity_haar",
            &w,
            exact,
            "exact Weingarten sum over S4 x S4 with the T-word trace table",
            Check::Statistical,
        ),
        StatSummary::exact(
            ExperimentId::Prop2,
            "exact_vs_structured_moment",
            structured,
            exact,
            "order-4 moment of the residual Pauli via the permutation-basis fast path",
            Check::Absolute { tolerance: 1e-9 },
        ),
        StatSummary::exact(
            ExperimentId::Prop2,
            "fidelity_lower_bound_margin",
            exact - (1.0 - 2.0 * 2f64.powi(-(m as i32))),
            0.0,
            "exact value exceeds 1 - c 2^-m with c = 2",
            Check::AtLeast,
        ),
        StatSummary::exact(
            ExperimentId::Prop2,
            "required_constant_c",
            c,
            2.0,
            "smallest c with exact value >= 1 - c 2^-m, reported against c = 2",
            Check::AtMost,
        ),
    ];
    let leading = moments::leading_order_fidelity(n as u32, m as u32)?;
    let note = format!("quantity,value\nexact,{exact:e}\nleading_order,{leading:e}\nstructured,{structured:e}\nrequired_c,{c:e}\n");
    Ok((out, vec![("prop2_values.csv".into(), note)]))
}

fn thm2_experiment(cfg: &ExperimentConfig, seed: &Seed) -> Result<(Vec<StatSummary>, Artifacts)> {
    let n = cfg.n();
    let kind = cfg.samplers()[0];
    let setup = decoding_setup(cfg, kind)?;
    let l = setup.list.len();
    // correct guess first
    let s0 = derive_seed(seed, "correct");
    let mut min_fid = f64::INFINITY;
    let mut single_pass = f64::INFINITY;
    for i in 0..20 {
        let mut rng = stream_rng(&s0, i);
        let proto = setup.protocol(&mut rng)?;
        let phi = random_state(&mut rng, 1 << n);
        let corrupted = setup.corrupted(&proto, &phi, 0)?;
        let r = proto.run_algorithm1(&corrupted, Some(&phi), &mut rng)?;
        min_fid = min_fid.min(r.transcript.final_fidelity.unwrap_or(0.0));
        single_pass = single_pass.min(r.transcript.tried[0].pass_probability);
    }
    let s = derive_seed(seed, "trials");
    let [fail, fid, fail_vs_tree, fid_vs_tree] = parallel_accumulate(cfg.trials(), |i| {
        let mut rng = stream_rng(&s, i);
        let proto = setup.protocol(&mut rng)?;
        let phi = random_state(&mut rng, 1 << n);
        let true_index = rng.random_range(0..l);
        let corrupted = setup.corrupted(&proto, &phi, true_index)?;
        let tree = proto.branch_tree(&corrupted, Some(&phi))?;
        let r = proto.run_algorithm1(&corrupted, Some(&phi), &mut rng)?;
        let failed = if r.transcript.failed() { 1.0 } else { 0.0 };
        Ok([
            failed,
            r.transcript.final_fidelity.unwrap_or(f64::NAN),
            failed - tree.failure_probability(),
            r.transcript.final_fidelity.unwrap_or(0.0) - tree.expected_fidelity(),
        ])
    })?;
    let out = vec![
        StatSummary::exact(
            ExperimentId::Thm2,
            "correct_first_guess_min_fidelity",
            min_fid,
            1.0 - 1e-10,
            "exact Pauli inverse restores the input",
            Check::AtLeast,
        ),
        StatSummary::exact(
            ExperimentId::Thm2,
            "correct_first_guess_min_pass_probability",
            single_pass,
            1.0 - 1e-10,
            "exact Pauli inverse restores the input",
            Check::AtLeast,
        ),
        StatSummary::new(
            ExperimentId::Thm2,
            format!("decode_failure_rate_list{l}"),
            &fail,
            0.05,
            "threshold 5%",
            Check::AtMost,
        ),
        StatSummary::new(
            ExperimentId::Thm2,
            "mean_recovered_fidelity",
            &fid,
            0.9,
            "threshold 0.9 over successful decodes",
            Check::AtLeast,
        ),
        StatSummary::new(
            ExperimentId::Thm2,
            "sampled_minus_exact_failure",
            &fail_vs_tree,
            0.0,
            "follow-both-branches tree for the same key and state",
            Check::Statistical,
        ),
        StatSummary::new(
            ExperimentId::Thm2,
            "sampled_minus_exact_fidelity",
            &fid_vs_tree,
            0.0,
            "follow-both-branches tree for the same key and state, failures as zero",
            Check::Statistical,
        ),
    ];
    // exact tree averages for every list length the table offers
    let mut csv = String::from("list_length,trials,failure_probability,stderr,conditional_fidelity,stderr\n");
    let lengths: BTreeSet<usize> = setup.table.iter().map(|(_, l)| l.len()).filter(|&k| k >= 2).collect();
    for len in lengths {
        let st = decoding_setup_with(cfg, kind, Some(len))?;
        let sl = derive_seed(seed, &format!("list{len}"));
        let trials = cfg.trials().min(2000);
        let [f, q] = parallel_accumulate(trials, |i| {
            let mut rng = stream_rng(&sl, i);
            let proto = st.protocol(&mut rng)?;
            let phi = random_state(&mut rng, 1 << n);
            let true_index = rng.random_range(0..len);
            let tree = proto.branch_tree(&st.corrupted(&proto, &phi, true_index)?, Some(&phi))?;
            let success = 1.0 - tree.failure_probability();
            Ok([
                tree.failure_probability(),
                if success > 0.0 { tree.expected_fidelity() / success } else { f64::NAN },
            ])
        })?;
        let _ = writeln!(csv, "{len},{trials},{:e},{:e},{:e},{:e}", f.mean, f.stderr(), q.mean, q.stderr());
    }
    Ok((out, vec![("thm2_by_list_length.csv".into(), csv)]))
}

fn kl_experiment(cfg: &ExperimentConfig) -> Result<(Vec<StatSummary>, Artifacts)> {
    let code = library::resolve(&cfg.code_spec())?;
    let eset = ErrorSet::new(code.n_physical(), cfg.max_weight());
    let report = kl_report(&code, &eset)?;
    let dim = 1usize << code.n_physical();
    let control = check_cross_syndrome_with(&code, &eset, &DMatrix::identity(dim, dim))?;
    let out = vec![
        StatSummary::exact(
            ExperimentId::Kl,
            "cross_syndrome_max_norm",
            report.cross_syndrome_max_norm,
            1e-10,
            "Knill-Laflamme: projected cross-syndrome products vanish",
            Check::AtMost,
        ),
        StatSummary::exact(
            ExperimentId::Kl,
            "same_syndrome_max_defect",
            report.same_syndrome_max_defect,
            1e-12,
            "partial-isometry defect of same-syndrome products",
            Check::AtMost,
        ),
        StatSummary::exact(
            ExperimentId::Kl,
            "negative_control_max_norm",
            control.max_norm,
            0.5,
            "identity in place of the code projector must violate the condition",
            Check::AtLeast,
        ),
    ];
    let artifact = serde_json::to_string_pretty(&report)?;
    Ok((out, vec![("kl_report.json".into(), artifact)]))
}

/// Partitions each syndrome's members by pairwise stabilizer equivalence,
/// independent of the table's coset keys.
fn pairwise_list_lengths(code: &StabilizerCode, table: &ListTable) -> Result<Vec<usize>> {
    table
        .syndromes()
        .map(|s| {
            let mut reps: Vec<PauliOperator> = Vec::new();
            for e in table.members(s) {
                let mut found = false;
                for r in &reps {
                    if !code.stabilizer_distinct(r, &e)? {
                        found = true;
                        break;
                    }
                }
                if !found {
                    reps.push(e);
                }
            }
            Ok(reps.len())
        })
        .collect()
}

fn listtable_experiment(cfg: &ExperimentConfig, seed: &Seed) -> Result<(Vec<StatSummary>, Artifacts)> {
    let code = library::resolve(&cfg.code_spec())?;
    let eset = ErrorSet::new(code.n_physical(), cfg.max_weight());
    let table = build_list_table(&code, &eset)?;
    let lengths = pairwise_list_lengths(&code, &table)?;
    let table_lengths: Vec<usize> = table.iter().map(|(_, l)| l.len()).collect();
    let mismatches = lengths.iter().zip(&table_lengths).filter(|(a, b)| a != b).count();
    let mut rng = stream_rng(seed, 0);
    let mut dev: f64 = 0.0;
    if code.n_physical() <= crate::stabilizer::MAX_DENSE_CODE_QUBITS {
        let phi = random_state(&mut rng, 1 << code.n_logical());
        let encoded = code.encode_state(&phi)?;
        for (s, list) in table.iter() {
            let ens = mixture_channel(&code, &table, &phi, s)?;
            let dense = mixture_density(&encoded, list)?;
            dev = dev.max((ens.density_matrix() - dense).iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
    }
    let out = vec![
        StatSummary::exact(
            ExperimentId::Listtable,
            "l_max",
            table.l_max() as f64,
            *lengths.iter().max().unwrap_or(&0) as f64,
            "pairwise stabilizer-equivalence partition of every syndrome class",
            Check::Absolute { tolerance: 0.0 },
        ),
        StatSummary::exact(
            ExperimentId::Listtable,
            "list_length_mismatches",
            mismatches as f64,
            0.0,
            "pairwise stabilizer-equivalence partition of every syndrome class",
            Check::Absolute { tolerance: 0.0 },
        ),
        StatSummary::exact(
            ExperimentId::Listtable,
            "covered_errors",
            table.covered() as f64,
            eset.members().len() as f64,
            "size of the weight-bounded error set",
            Check::Absolute { tolerance: 0.0 },
        ),
        StatSummary::exact(
            ExperimentId::Listtable,
            "mixture_max_deviation",
            dev,
            1e-10,
            "dense density-matrix assembly of the uniform list mixture",
            Check::AtMost,
        ),
    ];
    Ok((out, vec![("list_table.json".into(), serde_json::to_string_pretty(&table.to_json())?)]))
}

fn purity_experiment(cfg: &ExperimentConfig, seed: &Seed) -> Result<(Vec<StatSummary>, Artifacts)> {
    let n = cfg.n();
    let ms = if cfg.m_values.is_empty() {
        vec![1, 2, 3]
    } else {
        cfg.m_values.clone()
    };
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for kind in cfg.samplers() {
        for &m in &ms {
            let src = UnitarySource::new(kind, n + m);
            let s = derive_seed(seed, &format!("{kind:?}/{m}"));
            let [w] = parallel_accumulate(cfg.trials(), |i| {
                let mut rng = stream_rng(&s, i);
                let (e, _) = purity_test_epsilon(&src, n, m, 1, &mut rng)?;
                Ok([e])
            })?;
            out.push(StatSummary::new(
                ExperimentId::Purity,
                format!("epsilon_{}_n{n}_m{m}", kind_label(kind)),
                &w,
                purity_epsilon_two_design(n, m),
                "2-design value (4^n - 1) 2^m / (4^(n+m) - 1)",
                Check::Statistical,
            ));
            if let Some((pm, pe)) = prev {
                let diff = Welford {
                    count: w.count,
                    mean: w.mean - pm,
                    m2: 0.0,
                };
                let se = (w.stderr().powi(2) + pe.powi(2)).sqrt();
                out.push(StatSummary::from_parts(
                    ExperimentId::Purity,
                    format!("epsilon_step_{}_n{n}_m{m}", kind_label(kind)),
                    diff.mean,
                    se,
                    w.count,
                    3.0 * se,
                    "monotone decrease in m: step below 3 sigma",
                    Check::AtMost,
                ));
            }
            prev = Some((w.mean, w.stderr()));
        }
        prev = None;
    }
    Ok((out, Vec::new()))
}

fn multiround_experiment(cfg: &ExperimentConfig, seed: &Seed) -> Result<(Vec<StatSummary>, Artifacts)> {
    let setup = decoding_setup(cfg, cfg.samplers()[0])?;
    let rounds = cfg.rounds.unwrap_or(200);
    let mut rng = stream_rng(seed, 0);
    let proto = setup.protocol(&mut rng)?;
    let adv = Adversary::new(AdversarySpec::adaptive(cfg.max_weight(), 0), &setup.code, &setup.table)?;
    let transcripts = multi_round(&proto, &adv, rounds, &mut rng)?;
    let series = fidelity_series(&transcripts);
    let (slope, se) = ols_slope(&series);
    let w: Welford = series.iter().copied().collect();
    let distinct: BTreeSet<String> = transcripts
        .iter()
        .filter_map(|t| t.injected_error.as_ref().map(|e| e.to_string()))
        .collect();
    let out = vec![
        StatSummary::from_parts(
            ExperimentId::Multiround,
            "fidelity_slope_per_round",
            slope,
            se,
            rounds as u64,
            0.0,
            "no drift under key reuse: OLS slope consistent with 0",
            Check::Statistical,
        ),
        StatSummary::exact(
            ExperimentId::Multiround,
            "adversary_distinct_errors",
            distinct.len() as f64,
            2.0,
            "adaptive adversary exercises at least two list members",
            Check::AtLeast,
        ),
        StatSummary::new(
            ExperimentId::Multiround,
            "mean_round_fidelity",
            &w,
            0.5,
            "threshold 0.5, failures counted as zero",
            Check::AtLeast,
        ),
    ];
    Ok((out, vec![("multiround.jsonl".into(), to_jsonl(&transcripts)?)]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Md,
}

impl Format {
    pub fn file_name(self) -> &'static str {
        match self {
            Format::Json => "results.json",
            Format::Csv => "results.csv",
            Format::Md => "report.md",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "md" => Ok(Format::Md),
            other => Err(Error::Parse(format!("unknown format {other}"))),
        }
    }
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Renders results; output depends only on `results`.
pub fn emit_results(results: &SuiteResults, format: Format) -> Result<String> {
    Ok(match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(results)?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = String::from("experiment,metric,mean,stderr,target,target_provenance,verdict\n");
            for r in &results.summaries {
                let _ = writeln!(
                    s,
                    "{},{},{:e},{:e},{:e},{},{}",
                    r.experiment,
                    csv_field(&r.metric),
                    r.mean,
                    r.stderr,
                    r.target,
                    csv_field(&r.target_provenance),
                    verdict_str(r.verdict)
                );
            }
            s
        }
        Format::Md => {
            let mut s = String::from("# Results\n\n");
            let _ = writeln!(s, "- seed: `{}`", results.seed);
            let _ = writeln!(s, "- config hash: `{}`\n", results.config_hash);
            s.push_str("| experiment | metric | mean | stderr | target | verdict | target provenance |\n");
            s.push_str("|---|---|---|---|---|---|---|\n");
            for r in &results.summaries {
                let _ = writeln!(
                    s,
                    "| {} | {} | {:.6e} | {:.2e} | {:.6e} | {} | {} |",
                    r.experiment,
                    r.metric,
                    r.mean,
                    r.stderr,
                    r.target,
                    verdict_str(r.verdict),
                    r.target_provenance
                );
            }
            s
        }
    })
}

pub fn parse_results_json(text: &str) -> Result<SuiteResults> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_results_emit_headers() {
        let r = SuiteResults {
            seed: "00".into(),
            config_hash: "ab".into(),
            summaries: Vec::new(),
        };
        assert_eq!(
            emit_results(&r, Format::Csv).unwrap(),
            "experiment,metric,mean,stderr,target,target_provenance,verdict\n"
        );
        assert_eq!(parse_results_json(&emit_results(&r, Format::Json).unwrap()).unwrap(), r);
        assert!(emit_results(&r, Format::Md).unwrap().contains("config hash: `ab`"));
    }

    #[test]
    fn suite_toml_parses() {
        let cfg = SuiteConfig::parse(
            "seed = \"abc\"\n[[experiment]]\nexperiment = \"wg\"\nd_values = [4, 8]\n[[experiment]]\nexperiment = \"prop1\"\ntrials = 10\n",
        )
        .unwrap();
        assert_eq!(cfg.experiments.len(), 2);
        assert_eq!(cfg.experiments[0].d_values, vec![4, 8]);
        assert!(SuiteConfig::parse("[[experiment]]\nexperiment = \"nope\"\n").is_err());
    }

    #[test]
    fn zero_trials_rejected() {
        let mut c = ExperimentConfig::new(ExperimentId::Prop1);
        c.trials = Some(0);
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
