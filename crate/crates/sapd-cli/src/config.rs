//! Run configuration: a JSON file plus flag overrides, flags winning.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// toy-saddle | portfolio-synthetic | portfolio-csv | toy-multisol
    pub problem: String,
    /// naive | aware | multisol
    pub solver: String,
    pub iters: usize,
    pub seed: u64,
    pub n: usize,
    pub sectors: usize,
    pub kappa: f64,
    pub v: f64,
    pub eps_psd: f64,
    pub y_cap: f64,
    /// Slater relaxation for the multiple-solutions solver; defaults to
    /// 1/sqrt(iters) when unset.
    pub eps_relax: Option<f64>,
    pub c_alpha: Option<f64>,
    pub c_beta: Option<f64>,
    pub rho: f64,
    pub tau_bar: f64,
    pub gamma0: f64,
    /// Free parameters of the constant-step recipe; alpha defaults to the
    /// declared L_yx and beta to sqrt(2) L_yy.
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub data: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: "toy-saddle".into(),
            solver: "aware".into(),
            iters: 1000,
            seed: 42,
            n: 20,
            sectors: 10,
            kappa: sapd::portfolio::DEFAULT_KAPPA,
            v: sapd::portfolio::DEFAULT_V,
            eps_psd: sapd::portfolio::DEFAULT_EPS_PSD,
            y_cap: sapd::portfolio::DEFAULT_Y_CAP,
            eps_relax: None,
            c_alpha: None,
            c_beta: None,
            rho: 0.7,
            tau_bar: 1.0,
            gamma0: 1.0,
            alpha: None,
            beta: None,
            data: None,
            cache_dir: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &PathBuf) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let problems = ["toy-saddle", "portfolio-synthetic", "portfolio-csv", "toy-multisol"];
        if !problems.contains(&self.problem.as_str()) {
            return Err(CliError::Config(format!(
                "unknown problem {:?}; expected one of {problems:?}",
                self.problem
            )));
        }
        let solvers = ["naive", "aware", "multisol"];
        if !solvers.contains(&self.solver.as_str()) {
            return Err(CliError::Config(format!(
                "unknown solver {:?}; expected one of {solvers:?}",
                self.solver
            )));
        }
        if self.iters == 0 {
            return Err(CliError::Config("iters must be at least 1".into()));
        }
        let multisol_problem = self.problem == "toy-multisol";
        let multisol_solver = self.solver == "multisol";
        if multisol_problem != multisol_solver {
            return Err(CliError::Config(
                "the multisol solver pairs with the toy-multisol problem and vice versa".into(),
            ));
        }
        if self.problem == "portfolio-csv" && self.data.is_none() {
            return Err(CliError::Config(
                "portfolio-csv needs --data pointing at a returns CSV".into(),
            ));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(CliError::Config("rho must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Flat key-value echo for the summary; every field appears, defaults
    /// included.
    pub fn echo(&self) -> Vec<(String, serde_json::Value)> {
        use serde_json::{json, Value};
        let opt_f = |v: &Option<f64>| v.map(|x| json!(x)).unwrap_or(Value::Null);
        vec![
            ("config.problem".into(), json!(self.problem)),
            ("config.solver".into(), json!(self.solver)),
            ("config.iters".into(), json!(self.iters)),
            ("config.seed".into(), json!(self.seed)),
            ("config.n".into(), json!(self.n)),
            ("config.sectors".into(), json!(self.sectors)),
            ("config.kappa".into(), json!(self.kappa)),
            ("config.v".into(), json!(self.v)),
            ("config.eps_psd".into(), json!(self.eps_psd)),
            ("config.y_cap".into(), json!(self.y_cap)),
            ("config.eps_relax".into(), opt_f(&self.eps_relax)),
            ("config.c_alpha".into(), opt_f(&self.c_alpha)),
            ("config.c_beta".into(), opt_f(&self.c_beta)),
            ("config.rho".into(), json!(self.rho)),
            ("config.tau_bar".into(), json!(self.tau_bar)),
            ("config.gamma0".into(), json!(self.gamma0)),
            ("config.alpha".into(), opt_f(&self.alpha)),
            ("config.beta".into(), opt_f(&self.beta)),
            (
                "config.data".into(),
                self.data
                    .as_ref()
                    .map(|p| json!(p.display().to_string()))
                    .unwrap_or(Value::Null),
            ),
        ]
    }
}
