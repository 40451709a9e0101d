//! Declarative experiment runs: a JSON configuration names profiles,
//! checks and sweeps; the runner evaluates every certificate and renders
//! canonical CSV and JSON reports.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{BoundCertificate, CertificateName, Certifier, DEFAULT_EPS_GRID};
use crate::error::{Error, Result};
use crate::functionals::FunctionalReport;
use crate::landau::landau_production_mc;
use crate::quadrature::QuadratureSettings;
use crate::radial::{ProfileLiteral, RadialProfile};
use crate::regularity::{construct_approx_r, estimate_c, verify_mollification, verify_ou_regularity, RadiusLaw};

/// A configuration problem, located by a JSON field path.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { path: path.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(flatten)]
    pub profile: ProfileLiteral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CheckSelection {
    /// The literal string `"all"`.
    All(String),
    Names(Vec<String>),
}

impl Default for CheckSelection {
    fn default() -> Self {
        CheckSelection::All("all".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { samples: 1_000_000, seed: 42 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub csv: Option<String>,
    #[serde(default)]
    pub json: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRef {
    pub seed: u64,
}

/// One radius-approximation setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxRCase {
    pub law: RadiusLaw,
    pub d: usize,
    pub epsilon: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub profiles: Vec<ProfileEntry>,
    /// Appends the standard corpus for this seed.
    #[serde(default)]
    pub corpus: Option<CorpusRef>,
    #[serde(default)]
    pub checks: CheckSelection,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    /// Grid for the maximum over ε in the regularity-free LSI bound.
    #[serde(default = "default_eps_grid")]
    pub eps_grid: Vec<f64>,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    /// Noise variances for the mollification check.
    #[serde(default = "default_sigma2")]
    pub mollify_sigma2: Vec<f64>,
    #[serde(default)]
    pub approx_r: Vec<ApproxRCase>,
    #[serde(default)]
    pub quadrature: QuadratureSettings,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_epsilons() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

fn default_eps_grid() -> Vec<f64> {
    DEFAULT_EPS_GRID.to_vec()
}

fn default_t_grid() -> Vec<f64> {
    vec![0.1, 0.5, 1.0]
}

fn default_sigma2() -> Vec<f64> {
    vec![0.5, 1.0]
}

fn check_positive(path: &str, xs: &[f64], allow_zero: bool) -> std::result::Result<(), ConfigError> {
    if xs.is_empty() {
        return Err(ConfigError::new(path, "must not be empty"));
    }
    for (i, &x) in xs.iter().enumerate() {
        let ok = x.is_finite() && (x > 0.0 || (allow_zero && x == 0.0));
        if !ok {
            return Err(ConfigError::new(format!("{path}[{i}]"), format!("must be positive, got {x}")));
        }
    }
    Ok(())
}

fn literal_error(index: usize, lit: &ProfileLiteral, e: &Error) -> ConfigError {
    let base = format!("profiles[{index}]");
    let msg = e.to_string();
    // locate indexed fields reported by the profile constructors
    for field in ["weights", "variances", "phi", "r"] {
        if let Some(pos) = msg.find(&format!("{field}[")) {
            let end = msg[pos..].find(']').map(|e| pos + e + 1).unwrap_or(msg.len());
            return ConfigError::new(format!("{base}.{}", &msg[pos..end]), msg);
        }
    }
    match (lit, e) {
        (_, Error::NegativeDensity { index: i, .. }) => ConfigError::new(format!("{base}.phi[{i}]"), msg),
        _ => ConfigError::new(base, msg),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| ConfigError::new(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> std::result::Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text)
    }

    /// Checks in canonical order.
    pub fn selected_checks(&self) -> std::result::Result<Vec<CertificateName>, ConfigError> {
        match &self.checks {
            CheckSelection::All(s) if s == "all" => Ok(CertificateName::ALL.to_vec()),
            CheckSelection::All(s) => Err(ConfigError::new("checks", format!("expected \"all\" or a list, got {s:?}"))),
            CheckSelection::Names(names) => {
                let mut out = Vec::new();
                for (i, n) in names.iter().enumerate() {
                    let name: CertificateName =
                        n.parse().map_err(|_| ConfigError::new(format!("checks[{i}]"), format!("unknown check {n:?}")))?;
                    if !out.contains(&name) {
                        out.push(name);
                    }
                }
                if out.is_empty() {
                    return Err(ConfigError::new("checks", "must not be empty"));
                }
                out.sort();
                Ok(out)
            }
        }
    }

    /// All profiles with their identifiers, corpus entries last.
    pub fn entries(&self) -> Vec<(String, ProfileLiteral)> {
        let mut out: Vec<(String, ProfileLiteral)> = self
            .profiles
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.clone().unwrap_or_else(|| format!("p{i}")), e.profile.clone()))
            .collect();
        if let Some(c) = self.corpus {
            out.extend(corpus(c.seed));
        }
        out
    }

    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        if self.profiles.is_empty() && self.corpus.is_none() {
            return Err(ConfigError::new("profiles", "must not be empty"));
        }
        self.selected_checks()?;
        check_positive("epsilons", &self.epsilons, false)?;
        check_positive("eps_grid", &self.eps_grid, false)?;
        check_positive("t_grid", &self.t_grid, true)?;
        check_positive("mollify_sigma2", &self.mollify_sigma2, false)?;
        if self.mc.samples < 2 {
            return Err(ConfigError::new("mc.samples", "need at least two samples"));
        }
        for (i, entry) in self.profiles.iter().enumerate() {
            RadialProfile::from_literal(&entry.profile, self.quadrature)
                .map_err(|e| literal_error(i, &entry.profile, &e))?;
        }
        let mut ids = std::collections::BTreeSet::new();
        for (id, _) in self.entries() {
            if !ids.insert(id.clone()) {
                return Err(ConfigError::new("profiles", format!("duplicate profile id {id:?}")));
            }
        }
        for (i, case) in self.approx_r.iter().enumerate() {
            case.law.validate().map_err(|e| ConfigError::new(format!("approx_r[{i}].law"), e.to_string()))?;
            if case.d < 2 {
                return Err(ConfigError::new(format!("approx_r[{i}].d"), "must be at least 2"));
            }
            if !(case.epsilon > 0.0 && case.epsilon < 1.0) {
                return Err(ConfigError::new(format!("approx_r[{i}].epsilon"), "must lie in (0, 1)"));
            }
            if !(case.t > 0.0 && case.t.is_finite()) {
                return Err(ConfigError::new(format!("approx_r[{i}].t"), "must be positive"));
            }
        }
        Ok(())
    }
}

/// Fixed mixture specifications of the standard corpus, each with
/// `Σ p_i σ_i² = 1`.
pub fn corpus_mixtures() -> Vec<(&'static str, Vec<f64>, Vec<f64>)> {
    vec![
        ("mix-a", vec![0.5, 0.5], vec![0.5, 1.5]),
        ("mix-b", vec![0.3, 0.7], vec![0.4, 0.88 / 0.7]),
        ("mix-c", vec![0.2, 0.5, 0.3], vec![0.25, 1.0, 1.5]),
    ]
}

pub const CORPUS_DIMS: [usize; 4] = [2, 3, 5, 8];
const TABULATED_POINTS: usize = 300;

/// The standard corpus: 12 fixed mixtures and two tabulated profiles
/// whose shape parameters and dimensions are drawn from `seed`.
pub fn corpus(seed: u64) -> Vec<(String, ProfileLiteral)> {
    let mut out = Vec::new();
    for (name, w, v) in corpus_mixtures() {
        for d in CORPUS_DIMS {
            out.push((
                format!("{name}-d{d}"),
                ProfileLiteral::GaussianMixture { d, weights: w.clone(), variances: v.clone() },
            ));
        }
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let dims = [2usize, 3, 5];
    // exp(-r²/2)(1 + αr² + βr⁴)
    let alpha: f64 = rng.random_range(0.1..0.6);
    let beta: f64 = rng.random_range(0.005..0.05);
    let d = dims[rng.random_range(0..dims.len())];
    let r_top = 11.0;
    let r: Vec<f64> = (0..TABULATED_POINTS).map(|i| r_top * i as f64 / (TABULATED_POINTS - 1) as f64).collect();
    let phi = r.iter().map(|&x| (-0.5 * x * x).exp() * (1.0 + alpha * x * x + beta * x.powi(4))).collect();
    out.push((format!("tab-poly-d{d}"), ProfileLiteral::Tabulated { d, r, phi }));
    // exp(-k√(1 + r²))
    let k: f64 = rng.random_range(1.5..3.0);
    let d = dims[rng.random_range(0..dims.len())];
    let r_top = 45.0 / k;
    let r: Vec<f64> = (0..TABULATED_POINTS).map(|i| r_top * i as f64 / (TABULATED_POINTS - 1) as f64).collect();
    let phi = r.iter().map(|&x| (-k * (1.0 + x * x).sqrt()).exp()).collect();
    out.push((format!("tab-exp-d{d}"), ProfileLiteral::Tabulated { d, r, phi }));
    out
}

/// One CSV/JSON row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub profile_id: String,
    pub d: usize,
    #[serde(flatten)]
    pub certificate: BoundCertificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunError {
    pub profile_id: String,
    pub check: String,
    pub message: String,
}

/// Landau Monte Carlo cross-check against the reduced quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandauCrossCheck {
    pub reduced: f64,
    pub reduced_err: f64,
    pub monte_carlo: f64,
    pub monte_carlo_err: f64,
    pub samples: usize,
    pub seed: u64,
    /// Difference in combined standard errors.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub hash: String,
    pub d: usize,
    pub kind: String,
    /// Functionals of the profile rescaled to `E|X|² = d`.
    pub functionals: FunctionalReport,
    pub c_hat: f64,
    pub c_used: f64,
    pub closed_form_deviation: Option<f64>,
    pub landau: Option<LandauCrossCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub rows: Vec<ReportRow>,
    pub profiles: BTreeMap<String, ProfileSummary>,
    pub errors: Vec<RunError>,
}

pub const CSV_HEADER: &str = "profile_id,d,check,epsilon,lhs,rhs,constant,margin,tolerance,pass";

fn e17(x: f64) -> String {
    format!("{x:.17e}")
}

impl RunReport {
    pub fn passed(&self) -> usize {
        self.rows.iter().filter(|r| r.certificate.pass).count()
    }

    pub fn failed(&self) -> usize {
        self.rows.len() - self.passed()
    }

    /// 0 when everything passes, 2 on a failed certificate, 1 on errors.
    pub fn exit_code(&self) -> i32 {
        if !self.errors.is_empty() {
            1
        } else if self.failed() > 0 {
            2
        } else {
            0
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for row in &self.rows {
            let c = &row.certificate;
            let eps = c.epsilon.map(e17).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                row.profile_id,
                row.d,
                c.name,
                eps,
                e17(c.lhs),
                e17(c.rhs),
                e17(c.constant_value),
                e17(c.margin),
                e17(c.tolerance),
                c.pass
            ));
        }
        s
    }

    /// Certificates keyed by `profile/hash/check/ε`, plus profile summaries.
    pub fn to_json(&self) -> String {
        let mut certs = BTreeMap::new();
        for row in &self.rows {
            let c = &row.certificate;
            let eps = c.epsilon.map(|e| format!("{e}")).unwrap_or_else(|| "-".into());
            let mut key = format!("{}/{}/{}/{}", row.profile_id, c.inputs_hash, c.name, eps);
            if let Some(t) = c.details.get("t").filter(|_| c.name == CertificateName::OuRegularity) {
                key.push_str(&format!("/t={t}"));
            }
            if let Some(s) = c.details.get("sigma2").filter(|_| c.name == CertificateName::Mollification) {
                key.push_str(&format!("/sigma2={s}"));
            }
            certs.insert(key, row);
        }
        let doc = serde_json::json!({
            "summary": {
                "certificates": self.rows.len(),
                "passed": self.passed(),
                "failed": self.failed(),
                "errors": self.errors.len(),
            },
            "certificates": certs,
            "profiles": self.profiles,
            "errors": self.errors,
        });
        let mut out = serde_json::to_string_pretty(&doc).expect("report serializes");
        out.push('\n');
        out
    }
}

// SplitMix64 finalizer; gives every corpus entry its own Monte Carlo seed.
fn entry_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy)]
enum Task {
    Eps(CertificateName, f64),
    Single(CertificateName),
    Sigma(f64),
    OuAll,
}

fn tasks_for(checks: &[CertificateName], cfg: &ExperimentConfig, analytic: bool) -> Vec<Task> {
    use CertificateName::*;
    let mut out = Vec::new();
    for &name in checks {
        match name {
            FisherJump | EntropyJump | EntropyJumpNoReg | LsiReg | ChiMoment => {
                out.extend(cfg.epsilons.iter().map(|&e| Task::Eps(name, e)))
            }
            MixtureExample if analytic => out.push(Task::Eps(name, 1.0)),
            MixtureExample | ApproxR => {}
            LsiNoReg | ImprovedStam | ImprovedLsi | DvLemma | DVsDeficit => out.push(Task::Single(name)),
            Mollification => out.extend(cfg.mollify_sigma2.iter().map(|&s| Task::Sigma(s))),
            OuRegularity => out.push(Task::OuAll),
        }
    }
    out
}

struct ProfileRun {
    summary: Option<ProfileSummary>,
    rows: Vec<ReportRow>,
    errors: Vec<RunError>,
}

fn run_profile(id: &str, lit: &ProfileLiteral, index: usize, checks: &[CertificateName], cfg: &ExperimentConfig) -> ProfileRun {
    let fail = |check: &str, e: Error| RunError { profile_id: id.to_string(), check: check.to_string(), message: e.to_string() };
    let setup: Result<(RadialProfile, Certifier, f64, f64)> = (|| {
        let profile = RadialProfile::from_literal(lit, cfg.quadrature)?;
        let reg = estimate_c(&profile)?;
        let cert = Certifier::new(&profile)?;
        Ok((profile, cert, reg.c_hat, reg.certified_c()))
    })();
    let (profile, cert, c_hat, c) = match setup {
        Ok(v) => v,
        Err(e) => return ProfileRun { summary: None, rows: Vec::new(), errors: vec![fail("setup", e)] },
    };
    let d = profile.dim();
    let tasks = tasks_for(checks, cfg, profile.is_analytic());
    let results: Vec<std::result::Result<Vec<BoundCertificate>, RunError>> = tasks
        .par_iter()
        .map(|task| {
            use CertificateName::*;
            let (label, out) = match *task {
                Task::Eps(name, e) => (
                    name.to_string(),
                    match name {
                        FisherJump => cert.fisher_jump(c, e),
                        EntropyJump => cert.entropy_jump_cert(c, e),
                        EntropyJumpNoReg => cert.entropy_jump_noreg(e),
                        LsiReg => cert.lsi_reg(c, e),
                        ChiMoment => cert.chi_moment(e, &cfg.t_grid),
                        MixtureExample => cert.mixture_example(e),
                        _ => unreachable!("not an ε-indexed check"),
                    }
                    .map(|c| vec![c]),
                ),
                Task::Single(name) => (
                    name.to_string(),
                    match name {
                        LsiNoReg => cert.lsi_noreg(&cfg.eps_grid),
                        ImprovedStam => cert.improved_stam(),
                        ImprovedLsi => cert.improved_lsi(),
                        DvLemma => cert.dv_lemma(),
                        DVsDeficit => cert.d_vs_deficit(),
                        _ => unreachable!("not a single check"),
                    }
                    .map(|c| vec![c]),
                ),
                Task::Sigma(s) => ("Mollification".into(), verify_mollification(&profile, s).map(|c| vec![c])),
                Task::OuAll => ("OuRegularity".into(), verify_ou_regularity(&profile, c, &cfg.t_grid)),
            };
            out.map_err(|e| fail(&label, e))
        })
        .collect();
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(certs) => rows.extend(certs.into_iter().map(|c| ReportRow { profile_id: id.to_string(), d, certificate: c })),
            Err(e) => errors.push(e),
        }
    }
    let landau = if checks.contains(&CertificateName::DvLemma) {
        let seed = entry_seed(cfg.mc.seed, index);
        match (cert.landau(), landau_production_mc(cert.standardized(), cfg.mc.samples, seed)) {
            (Ok(q), Ok(mc)) => Some(LandauCrossCheck {
                reduced: q.value,
                reduced_err: q.err,
                monte_carlo: mc.value,
                monte_carlo_err: mc.err,
                samples: cfg.mc.samples,
                seed,
                z: (mc.value - q.value) / (q.err * q.err + mc.err * mc.err).sqrt(),
            }),
            (Err(e), _) | (_, Err(e)) => {
                errors.push(fail("LandauMonteCarlo", e));
                None
            }
        }
    } else {
        None
    };
    let closed_form_deviation = cert.convolution().ok().and_then(|c| c.closed_form_deviation);
    let summary = ProfileSummary {
        hash: profile.content_hash(),
        d,
        kind: if profile.is_analytic() { "gaussian_mixture".into() } else { "tabulated".into() },
        functionals: *cert.report(),
        c_hat,
        c_used: c,
        closed_form_deviation,
        landau,
    };
    ProfileRun { summary: Some(summary), rows, errors }
}

fn approx_r_rows(cfg: &ExperimentConfig) -> (Vec<ReportRow>, Vec<RunError>) {
    let results: Vec<_> = cfg
        .approx_r
        .par_iter()
        .enumerate()
        .map(|(i, case)| (i, case, construct_approx_r(&case.law, case.d, case.epsilon, case.t)))
        .collect();
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (i, case, r) in results {
        let id = format!("approx_r[{i}]");
        match r {
            Ok(out) => {
                for c in [out.sandwich, out.regularity] {
                    rows.push(ReportRow { profile_id: id.clone(), d: case.d, certificate: c });
                }
            }
            Err(e) => errors.push(RunError { profile_id: id, check: "ApproxR".into(), message: e.to_string() }),
        }
    }
    (rows, errors)
}

/// Runs every selected check on every profile with at most `jobs` worker
/// threads. The report does not depend on `jobs`.
pub fn run(cfg: &ExperimentConfig, jobs: Option<usize>) -> std::result::Result<RunReport, ConfigError> {
    cfg.validate()?;
    let checks = cfg.selected_checks()?;
    let entries = cfg.entries();
    let work = || {
        let runs: Vec<ProfileRun> = entries
            .par_iter()
            .enumerate()
            .map(|(i, (id, lit))| run_profile(id, lit, i, &checks, cfg))
            .collect();
        let approx = if checks.contains(&CertificateName::ApproxR) { approx_r_rows(cfg) } else { (Vec::new(), Vec::new()) };
        (runs, approx)
    };
    let (runs, (approx_rows, approx_errors)) = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| ConfigError::new("--jobs", e.to_string()))?
            .install(work),
        None => work(),
    };
    let mut report = RunReport { rows: Vec::new(), profiles: BTreeMap::new(), errors: Vec::new() };
    for ((id, _), run) in entries.iter().zip(runs) {
        report.rows.extend(run.rows);
        report.errors.extend(run.errors);
        if let Some(s) = run.summary {
            report.profiles.insert(id.clone(), s);
        }
    }
    report.rows.extend(approx_rows);
    report.errors.extend(approx_errors);
    Ok(report)
}

/// Short content hash of a configuration text.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic() {
        let a = corpus(0);
        assert_eq!(a.len(), 14);
        assert_eq!(a, corpus(0));
        let b = corpus(1);
        assert_eq!(a[..12], b[..12]);
        assert_ne!(a[12..], b[12..]);
        for (_, lit) in &a {
            let p = RadialProfile::from_literal(lit, QuadratureSettings::default()).unwrap();
            assert!((p.mass() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn corpus_mixtures_have_unit_mean_variance() {
        for (_, w, v) in corpus_mixtures() {
            let s: f64 = w.iter().zip(&v).map(|(p, s)| p * s).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn config_errors_name_fields() {
        let bad = r#"{"profiles":[{"type":"gaussian_mixture","d":2,"weights":[0.5,-0.5],"variances":[1,2]}]}"#;
        let e = ExperimentConfig::from_json(bad).unwrap_err();
        assert_eq!(e.path, "profiles[0].weights[1]");
        let e = ExperimentConfig::from_json(r#"{"corpus":{"seed":0},"epsilons":[1,-2]}"#).unwrap_err();
        assert_eq!(e.path, "epsilons[1]");
        let e = ExperimentConfig::from_json(r#"{"corpus":{"seed":0},"checks":["FisherJump","Nope"]}"#).unwrap_err();
        assert_eq!(e.path, "checks[1]");
        let e = ExperimentConfig::from_json(r#"{"checks":"all"}"#).unwrap_err();
        assert_eq!(e.path, "profiles");
        let e = ExperimentConfig::from_json("{\n  \"corpus\": {\"seed\": 0},\n  \"bogus\": 1\n}").unwrap_err();
        assert!(e.path.starts_with("line 3"), "{e}");
    }

    #[test]
    fn gaussian_all_checks_pass() {
        let cfg = ExperimentConfig::from_json(
            r#"{"profiles":[{"id":"g","type":"gaussian_mixture","d":3,"weights":[1],"variances":[1]}],
                "mc":{"samples":20000,"seed":1}}"#,
        )
        .unwrap();
        let report = run(&cfg, Some(2)).unwrap();
        assert!(report.errors.is_empty(), "{:?}", report.errors);
        for row in &report.rows {
            let c = &row.certificate;
            assert!(c.pass, "{c:?}");
        }
        assert_eq!(report.exit_code(), 0);
        let csv = report.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), report.rows.len() + 1);
    }

    #[test]
    fn report_independent_of_worker_count() {
        let cfg = ExperimentConfig::from_json(
            r#"{"profiles":[{"type":"gaussian_mixture","d":2,"weights":[0.5,0.5],"variances":[0.5,1.5]}],
                "checks":["EntropyJump","DvLemma","LsiNoReg"],"mc":{"samples":20000,"seed":3}}"#,
        )
        .unwrap();
        let a = run(&cfg, Some(1)).unwrap();
        let b = run(&cfg, Some(4)).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn exit_codes_follow_contract() {
        use crate::quadrature::Estimate;
        let cert = |lhs: f64| {
            BoundCertificate::new(CertificateName::ImprovedStam, Estimate::exact(lhs), Estimate::exact(1.0), 1.0, "h".into())
        };
        let row = |lhs| ReportRow { profile_id: "x".into(), d: 2, certificate: cert(lhs) };
        let mut report = RunReport { rows: vec![row(2.0)], profiles: BTreeMap::new(), errors: Vec::new() };
        assert_eq!(report.exit_code(), 0);
        report.rows.push(row(0.5));
        assert_eq!(report.exit_code(), 2);
        report.errors.push(RunError { profile_id: "x".into(), check: "setup".into(), message: "bad".into() });
        assert_eq!(report.exit_code(), 1);
    }
}
