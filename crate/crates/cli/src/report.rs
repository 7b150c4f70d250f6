//! Report documents and their JSON and CSV forms.

use serde::{Deserialize, Serialize};
use speedwitness_core::prob::SpeedEstimate;
use speedwitness_core::sep::BoundCurve;
use speedwitness_core::witness::{DepthVerdict, RecordKind};

use crate::config::{Format, RunConfig};
use crate::error::{CliError, CliResult};

pub const TOOL: &str = "speedwitness";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub schema_version: String,
    pub command: String,
    pub config_hash: String,
    pub timestamp_unix: u64,
    pub warning_count: usize,
    pub warnings: Vec<String>,
}

impl Metadata {
    pub fn new(cfg: &RunConfig, warnings: Vec<String>) -> Self {
        let timestamp_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            schema_version: crate::config::SCHEMA_VERSION.into(),
            command: cfg.command.clone(),
            config_hash: cfg.hash(),
            timestamp_unix,
            warning_count: warnings.len(),
            warnings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessRow {
    pub line: usize,
    pub n_qubits: usize,
    pub kind: RecordKind,
    pub verdict: DepthVerdict,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlRow {
    pub m: u64,
    pub dtheta: f64,
    /// `2Nδθ/π`.
    pub dtheta_scaled: f64,
    pub true_dkl: f64,
    pub mean_est: Option<f64>,
    pub bias_pred: Option<f64>,
    pub bias_emp: Option<f64>,
    pub bias_cv: Option<f64>,
    pub var_pred: Option<f64>,
    pub var_emp: Option<f64>,
    pub kept: usize,
    pub discard_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlFit {
    pub m: u64,
    /// Fit of bias-corrected means.
    pub speed: SpeedEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlSummary {
    pub visibility: f64,
    pub n_qubits: usize,
    pub theta0: f64,
    pub trials: usize,
    pub seed: u64,
    pub rng: String,
    pub rows: Vec<KlRow>,
    pub fits: Vec<KlFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub state: String,
    pub hamiltonian: String,
    pub n_qubits: usize,
    pub epsilon: f64,
    pub quantum_speed: f64,
    pub analytic: Option<f64>,
    pub diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "kebab-case")]
pub enum Payload {
    Bounds(BoundCurve),
    Witness(Vec<WitnessRow>),
    SimulateKl(KlSummary),
    Oracle(Vec<OracleRow>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub metadata: Metadata,
    pub payload: Payload,
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

impl ReportDocument {
    pub fn to_json(&self) -> CliResult<String> {
        serde_json::to_string_pretty(self)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| CliError::Internal(format!("serializing report: {e}")))
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid report: {e}")))
    }

    pub fn render(&self, format: Format) -> CliResult<String> {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => Ok(self.to_csv()),
        }
    }

    /// Metadata as `#` comment lines, then one table.
    pub fn to_csv(&self) -> String {
        let m = &self.metadata;
        let mut out = format!(
            "# tool: {} {}\n# schema_version: {}\n# command: {}\n# config_hash: {}\n# timestamp_unix: {}\n# warning_count: {}\n",
            m.tool, m.version, m.schema_version, m.command, m.config_hash, m.timestamp_unix, m.warning_count
        );
        for w in &m.warnings {
            out.push_str(&format!("# warning: {w}\n"));
        }
        match &self.payload {
            Payload::Bounds(c) => bounds_csv(c, &mut out),
            Payload::Witness(rows) => witness_csv(rows, &mut out),
            Payload::SimulateKl(s) => kl_csv(s, &mut out),
            Payload::Oracle(rows) => oracle_csv(rows, &mut out),
        }
        out
    }
}

fn bounds_csv(c: &BoundCurve, out: &mut String) {
    out.push_str(&format!("# model: {}\n# n: {}\n", c.model.name(), c.n_qubits));
    out.push_str("epsilon,v2max_over_n,regime,upper_bound");
    out.push_str(if c.numeric.is_some() { ",numeric\n" } else { "\n" });
    for i in 0..c.epsilons.len() {
        out.push_str(&format!(
            "{},{},{},{}",
            num(c.epsilons[i]),
            num(c.values[i]),
            c.regimes[i],
            opt(c.upper_bounds[i])
        ));
        if let Some(n) = &c.numeric {
            out.push_str(&format!(",{}", num(n[i])));
        }
        out.push('\n');
    }
}

fn witness_csv(rows: &[WitnessRow], out: &mut String) {
    out.push_str(
        "line,n,kind,v2,stderr,separable_bound,depth_point,depth_conservative,depth_optimistic,genuine,lower_bound,straddles_bound,margins,note\n",
    );
    for r in rows {
        let v = &r.verdict;
        let margins: Vec<String> = v.margins.iter().map(|m| format!("{}:{}", m.k, num(m.margin))).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.line,
            r.n_qubits,
            r.kind,
            num(v.speed.value),
            num(v.speed.stderr),
            r.n_qubits,
            v.depth_point,
            v.depth_conservative,
            v.depth_optimistic,
            v.genuine,
            v.lower_bound,
            v.straddles_bound,
            margins.join(";"),
            r.note
        ));
    }
}

fn kl_csv(s: &KlSummary, out: &mut String) {
    out.push_str(&format!(
        "# visibility: {}\n# n: {}\n# theta0: {}\n# trials: {}\n# seed: {}\n# rng: {}\n",
        num(s.visibility),
        s.n_qubits,
        num(s.theta0),
        s.trials,
        s.seed,
        s.rng
    ));
    for f in &s.fits {
        out.push_str(&format!(
            "# fit m={}: v2={} stderr={}\n",
            f.m,
            num(f.speed.value),
            num(f.speed.stderr)
        ));
    }
    out.push_str("m,dtheta,dtheta_scaled,true_dkl,mean_est,bias_pred,bias_emp,bias_cv,var_pred,var_emp,kept,discard_count\n");
    for r in &s.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.m,
            num(r.dtheta),
            num(r.dtheta_scaled),
            num(r.true_dkl),
            opt(r.mean_est),
            opt(r.bias_pred),
            opt(r.bias_emp),
            opt(r.bias_cv),
            opt(r.var_pred),
            opt(r.var_emp),
            r.kept,
            r.discard_count
        ));
    }
}

fn oracle_csv(rows: &[OracleRow], out: &mut String) {
    out.push_str("state,hamiltonian,n,epsilon,quantum_speed,analytic,diff\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.state,
            r.hamiltonian,
            r.n_qubits,
            num(r.epsilon),
            num(r.quantum_speed),
            opt(r.analytic),
            opt(r.diff)
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn num_round_trips() {
        for x in [0.1, 1.0 / 3.0, 39.639_616_000_000_004, 1e-300, -2.5e17, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
