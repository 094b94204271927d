use std::path::Path;

use definetti_core::state::DEFAULT_MAX_DIM;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Human,
    Json,
}

/// Settings shared by every subcommand. Precedence: flags, then the config
/// file, then these defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub affine_tol: f64,
    pub cone_tol: f64,
    pub max_iter: usize,
    pub stall_window: usize,
    /// Seesaw random starts.
    pub restarts: usize,
    /// Seesaw iteration cap per start.
    pub iterations: usize,
    /// Random starts per block of the greedy measurement search.
    pub qstar_restarts: usize,
    pub oracle_restarts: usize,
    pub oracle_iterations: usize,
    pub max_dim: usize,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            affine_tol: 1e-8,
            cone_tol: 1e-8,
            max_iter: 20_000,
            stall_window: 200,
            restarts: 20,
            iterations: 200,
            qstar_restarts: 4,
            oracle_restarts: 100,
            oracle_iterations: 2000,
            max_dim: DEFAULT_MAX_DIM,
            format: Format::Human,
        }
    }
}

/// Flag values that override the file; `None` leaves the file's value.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// TOML file with any RunConfig fields.
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub affine_tol: Option<f64>,
    #[arg(long, global = true)]
    pub cone_tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub stall_window: Option<usize>,
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
    #[arg(long, global = true)]
    pub qstar_restarts: Option<usize>,
    #[arg(long, global = true)]
    pub oracle_restarts: Option<usize>,
    #[arg(long, global = true)]
    pub oracle_iterations: Option<usize>,
    #[arg(long, global = true)]
    pub max_dim: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn resolve(o: &Overrides) -> Result<Self, String> {
        let mut c = match &o.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { c.$f = v; } )* };
        }
        take!(format, seed, affine_tol, cone_tol, max_iter, stall_window, restarts, iterations);
        take!(qstar_restarts, oracle_restarts, oracle_iterations, max_dim);
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), String> {
        let tols = [("affine_tol", self.affine_tol), ("cone_tol", self.cone_tol)];
        if let Some((name, v)) = tols.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(format!("{name} must be positive, got {v}"));
        }
        let caps = [
            ("max_iter", self.max_iter),
            ("stall_window", self.stall_window),
            ("restarts", self.restarts),
            ("iterations", self.iterations),
            ("qstar_restarts", self.qstar_restarts),
            ("oracle_restarts", self.oracle_restarts),
            ("oracle_iterations", self.oracle_iterations),
            ("max_dim", self.max_dim),
        ];
        if let Some((name, _)) = caps.iter().find(|(_, v)| *v == 0) {
            return Err(format!("{name} must be positive"));
        }
        Ok(())
    }
}
