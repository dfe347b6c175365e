//! Scenario files. TOML by default; a `.json` extension selects the JSON
//! mirror of the same schema. Every numerical parameter must be spelled
//! out: the only defaults are in the templates under `configs/`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dhs_core::envelope::regularize;
use dhs_core::presets::preset_data;
use dhs_core::stepper::{Integrator, SolverConfig};
use dhs_core::store::read_field;
use dhs_core::{Grid, SpectralField};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dt: f64,
    pub t_end: f64,
    pub s: f64,
    pub integrator: Integrator,
    pub monitor_stride: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Write every `field_every`-th monitored field; 0 writes only the
    /// initial and final fields.
    pub field_every: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSection {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DifferenceSection {
    /// Data spec of the direction `δ`; the second datum is `u0 + ε δ`.
    pub direction: String,
    pub eps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearizedSection {
    /// `"rate"` for `w0 = u_t(0)`, otherwise a data spec.
    pub direction: String,
    /// Step sizes of the directional-derivative check; may be empty.
    pub eps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeSection {
    pub delta: f64,
    pub h_list: Vec<u32>,
    pub reference_h: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// `preset:<name>`, a bare preset name, or `file:<path>` to a field
    /// binary with its JSON sidecar. Relative paths resolve against the
    /// scenario file.
    pub data: String,
    pub seed: u64,
    /// Optional low-pass `P_{<h}` applied to the data.
    #[serde(default)]
    pub regularize: Option<u32>,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub output: OutputSection,
    #[serde(default)]
    pub picard: Option<PicardSection>,
    #[serde(default)]
    pub difference: Option<DifferenceSection>,
    #[serde(default)]
    pub linearized: Option<LinearizedSection>,
    #[serde(default)]
    pub envelope: Option<EnvelopeSection>,
    /// Directory of the scenario file, for relative data paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let mut scenario: Scenario = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        };
        scenario.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        scenario.solver_config()?;
        Ok(scenario)
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Ok(Grid::new(self.grid.n, self.grid.length)?)
    }

    pub fn solver_config(&self) -> Result<SolverConfig, CliError> {
        let s = &self.solver;
        Ok(SolverConfig::new(self.grid()?, s.dt, s.t_end, s.s)?
            .with_stride(s.monitor_stride)?
            .with_integrator(s.integrator))
    }

    /// Resolves a data spec on the scenario grid.
    pub fn resolve(&self, spec: &str) -> Result<SpectralField, CliError> {
        let grid = self.grid()?;
        let field = if let Some(file) = spec.strip_prefix("file:") {
            let path = self.base_dir.join(file);
            let f = read_field(&path)?;
            if *f.grid() != grid {
                return Err(CliError::Usage(format!(
                    "{} lives on {}, the scenario grid is {}",
                    path.display(),
                    f.grid(),
                    grid
                )));
            }
            f
        } else {
            preset_data(
                spec.strip_prefix("preset:").unwrap_or(spec),
                grid,
                self.seed,
            )?
        };
        Ok(field)
    }

    /// The initial data, regularized if requested.
    pub fn initial_data(&self) -> Result<SpectralField, CliError> {
        let u0 = self.resolve(&self.data)?;
        match self.regularize {
            Some(h) => Ok(regularize(&u0, h)?),
            None => Ok(u0),
        }
    }

    pub fn section<'a, T>(&self, section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        section
            .as_ref()
            .ok_or_else(|| CliError::Usage(format!("scenario lacks the [{name}] section")))
    }
}
