//! Run configuration: a flat `key = value` file with `[sections]`.
//!
//! ```ini
//! [run]
//! name = subcritical
//! seed = 42
//! n_particles = 200000
//! t_end = 5.0
//! substep = 0.05              # optional; default min(0.05, 0.5/(1+K))
//! record_times = 0.25:0.25:5  # range start:step:stop, or a comma list
//! s_moments = 2, 2.5
//!
//! [physics]
//! k = 1.0
//! gamma = 0.0
//! kernel = constant           # constant | quadratic | csv:<path>
//! source = beta               # beta | beta/3
//!
//! [initial]
//! law = maxwellian            # maxwellian | point:v1,v2,v3 | gaussian:d1,d2,d3
//! ```
//!
//! All quantities are in nondimensional units (unit background temperature).

use crate::error::{Error, Result};
use crate::kernels::{kernel_moments, CollisionKernel, KernelMoments};
use crate::moments::{build_operator, MomentOperator};
use crate::sim::{InitialCondition, SimConfig};
use ini::Ini;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Constant multiplying the identity source in the moment ODE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceChoice {
    /// c = β, the value consistent with the Monte Carlo dynamics.
    Beta,
    /// c = β/3, the alternative normalization (selected by `--paper-source`).
    BetaOverThree,
}

impl SourceChoice {
    pub fn source_c(self, km: &KernelMoments) -> f64 {
        match self {
            SourceChoice::Beta => km.beta,
            SourceChoice::BetaOverThree => km.beta / 3.0,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "beta" => Ok(SourceChoice::Beta),
            "beta/3" | "beta_over_3" | "beta_over_three" => Ok(SourceChoice::BetaOverThree),
            other => Err(Error::UnknownName(format!(
                "source constant '{other}' (expected 'beta' or 'beta/3')"
            ))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SourceChoice::Beta => "beta",
            SourceChoice::BetaOverThree => "beta/3",
        }
    }
}

/// One fully described run: everything a manifest needs to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub name: String,
    pub seed: u64,
    pub n_particles: usize,
    pub t_end: f64,
    pub substep: Option<f64>,
    pub record_times: Vec<f64>,
    pub s_moments: Vec<f64>,
    pub k: f64,
    pub gamma: f64,
    /// `constant`, `quadratic`, or `csv:<path>`.
    pub kernel: String,
    pub source: SourceChoice,
    /// `maxwellian`, `point:v1,v2,v3`, or `gaussian:d1,d2,d3`.
    pub initial: String,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            name: "run".into(),
            seed: 0,
            n_particles: 10_000,
            t_end: 1.0,
            substep: None,
            record_times: Vec::new(),
            s_moments: vec![2.0],
            k: 0.0,
            gamma: 0.0,
            kernel: "constant".into(),
            source: SourceChoice::Beta,
            initial: "maxwellian".into(),
        }
    }
}

impl RunSpec {
    pub fn from_file(path: &Path) -> Result<Self> {
        let ini = Ini::load_from_file(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        let mut spec = RunSpec::default();
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                // The parser always materializes a "general" section; it is
                // only an error if it actually holds keys.
                if props.iter().next().is_some() {
                    return Err(Error::InvalidConfig(format!(
                        "{}: keys must live in a [section]",
                        path.display()
                    )));
                }
                continue;
            };
            for (key, value) in props.iter() {
                let value = value.trim();
                if value.is_empty() {
                    continue;
                }
                apply_key(&mut spec, section, key, value).map_err(|e| {
                    Error::InvalidConfig(format!("{}: [{section}] {key}: {e}", path.display()))
                })?;
            }
        }
        if spec.record_times.is_empty() {
            spec.record_times = vec![spec.t_end];
        }
        Ok(spec)
    }

    pub fn kernel(&self) -> Result<CollisionKernel> {
        build_kernel(&self.kernel, self.gamma)
    }

    pub fn initial_condition(&self) -> Result<InitialCondition> {
        parse_initial(&self.initial)
    }

    pub fn to_sim_config(&self) -> Result<SimConfig> {
        let config = SimConfig {
            k: self.k,
            kernel: self.kernel()?,
            n_particles: self.n_particles,
            t_end: self.t_end,
            substep: self.substep,
            seed: self.seed,
            initial_condition: self.initial_condition()?,
            record_times: self.record_times.clone(),
            s_moments: self.s_moments.clone(),
        };
        config.validate()?;
        Ok(config)
    }

    /// Moment operator matching this run (exact closure for γ = 0).
    pub fn operator(&self) -> Result<MomentOperator> {
        let km = kernel_moments(&self.kernel()?)?;
        build_operator(&km, self.k, self.source.source_c(&km))
    }
}

fn apply_key(spec: &mut RunSpec, section: &str, key: &str, value: &str) -> Result<()> {
    let bad_key = || Err(Error::InvalidConfig("unknown key".into()));
    match section {
        "run" => match key {
            "name" => spec.name = value.to_string(),
            "seed" => spec.seed = parse_scalar(value)?,
            "n_particles" => spec.n_particles = parse_scalar(value)?,
            "t_end" => spec.t_end = parse_scalar(value)?,
            "substep" => spec.substep = Some(parse_scalar(value)?),
            "record_times" => spec.record_times = parse_f64_list(value)?,
            "s_moments" => spec.s_moments = parse_f64_list(value)?,
            _ => return bad_key(),
        },
        "physics" => match key {
            "k" => spec.k = parse_scalar(value)?,
            "gamma" => spec.gamma = parse_scalar(value)?,
            "kernel" => spec.kernel = value.to_string(),
            "source" => spec.source = SourceChoice::parse(value)?,
            _ => return bad_key(),
        },
        "initial" => match key {
            "law" => spec.initial = value.to_string(),
            _ => return bad_key(),
        },
        _ => {
            return Err(Error::InvalidConfig(format!(
                "unknown section [{section}]"
            )))
        }
    }
    Ok(())
}

fn parse_scalar<T: std::str::FromStr>(value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::InvalidConfig(format!("cannot parse '{value}': {e}")))
}

/// Parse `a, b, c` or an inclusive range `start:step:stop`.
pub fn parse_f64_list(value: &str) -> Result<Vec<f64>> {
    let value = value.trim();
    if value.contains(':') {
        let parts: Vec<&str> = value.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidConfig(format!(
                "range must be start:step:stop, got '{value}'"
            )));
        }
        let start: f64 = parse_scalar(parts[0])?;
        let step: f64 = parse_scalar(parts[1])?;
        let stop: f64 = parse_scalar(parts[2])?;
        if !(step > 0.0 && stop >= start) {
            return Err(Error::InvalidConfig(format!(
                "range '{value}' needs step > 0 and stop >= start"
            )));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| start + i as f64 * step).collect())
    } else {
        value.split(',').map(parse_scalar).collect()
    }
}

/// Build a kernel from its config string: a preset name or `csv:<path>`.
pub fn build_kernel(spec: &str, gamma: f64) -> Result<CollisionKernel> {
    let spec = spec.trim();
    if let Some(path) = spec.strip_prefix("csv:") {
        CollisionKernel::from_csv(Path::new(path.trim()), gamma)
    } else {
        CollisionKernel::preset(spec, gamma)
    }
}

/// Parse an initial-condition string.
pub fn parse_initial(spec: &str) -> Result<InitialCondition> {
    let spec = spec.trim();
    let triple = |body: &str| -> Result<[f64; 3]> {
        let values = parse_f64_list(body)?;
        values.as_slice().try_into().map_err(|_| {
            Error::InvalidConfig(format!("expected three components, got '{body}'"))
        })
    };
    if spec.eq_ignore_ascii_case("maxwellian") {
        Ok(InitialCondition::Maxwellian)
    } else if let Some(body) = spec.strip_prefix("point:") {
        Ok(InitialCondition::PointMass(triple(body)?))
    } else if let Some(body) = spec.strip_prefix("gaussian:") {
        Ok(InitialCondition::AnisotropicGaussian(triple(body)?))
    } else {
        Err(Error::UnknownName(format!(
            "initial condition '{spec}' (expected maxwellian, point:…, or gaussian:…)"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn parses_a_full_config() {
        let f = write_config(
            "# comment\n\
             [run]\n\
             name = demo\n\
             seed = 7\n\
             n_particles = 500\n\
             t_end = 2.0\n\
             record_times = 0.5:0.5:2\n\
             s_moments = 2, 2.5\n\
             [physics]\n\
             k = 1.5\n\
             gamma = 0.5\n\
             kernel = quadratic\n\
             source = beta/3\n\
             [initial]\n\
             law = point:2,0,0\n",
        );
        let spec = RunSpec::from_file(f.path()).unwrap();
        assert_eq!(spec.name, "demo");
        assert_eq!(spec.seed, 7);
        assert_eq!(spec.n_particles, 500);
        assert_eq!(spec.record_times, vec![0.5, 1.0, 1.5, 2.0]);
        assert_eq!(spec.s_moments, vec![2.0, 2.5]);
        assert_eq!(spec.k, 1.5);
        assert_eq!(spec.source, SourceChoice::BetaOverThree);
        assert_eq!(
            spec.initial_condition().unwrap(),
            InitialCondition::PointMass([2.0, 0.0, 0.0])
        );
        let config = spec.to_sim_config().unwrap();
        assert_eq!(config.kernel.gamma(), 0.5);
        assert_eq!(config.record_times.len(), 4);
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let f = write_config("[run]\nn_particles = 50\nt_end = 0.5\n");
        let spec = RunSpec::from_file(f.path()).unwrap();
        assert_eq!(spec.k, 0.0);
        assert_eq!(spec.kernel, "constant");
        assert_eq!(spec.source, SourceChoice::Beta);
        // record_times defaults to the end time.
        assert_eq!(spec.record_times, vec![0.5]);
        assert!(spec.to_sim_config().is_ok());
    }

    #[test]
    fn rejects_unknown_keys_and_sections() {
        let f = write_config("[run]\nn_partcles = 50\n");
        assert!(RunSpec::from_file(f.path()).is_err());
        let f = write_config("[rnu]\nseed = 1\n");
        assert!(RunSpec::from_file(f.path()).is_err());
    }

    #[test]
    fn list_and_range_syntax() {
        assert_eq!(parse_f64_list("1, 2,3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_f64_list("0:0.25:1").unwrap().len(), 5);
        assert_eq!(parse_f64_list("2:1:2").unwrap(), vec![2.0]);
        assert!(parse_f64_list("1:0:2").is_err());
        assert!(parse_f64_list("1:1").is_err());
        assert!(parse_f64_list("a,b").is_err());
    }

    #[test]
    fn source_choice_parsing() {
        assert_eq!(SourceChoice::parse("beta").unwrap(), SourceChoice::Beta);
        assert_eq!(
            SourceChoice::parse("Beta/3").unwrap(),
            SourceChoice::BetaOverThree
        );
        assert!(SourceChoice::parse("gamma").is_err());
    }

    #[test]
    fn initial_condition_strings() {
        assert_eq!(
            parse_initial("maxwellian").unwrap(),
            InitialCondition::Maxwellian
        );
        assert_eq!(
            parse_initial("gaussian:2,1,0.5").unwrap(),
            InitialCondition::AnisotropicGaussian([2.0, 1.0, 0.5])
        );
        assert!(parse_initial("point:1,2").is_err());
        assert!(parse_initial("ring:1").is_err());
    }

    #[test]
    fn operator_reflects_source_choice() {
        let mut spec = RunSpec {
            t_end: 1.0,
            ..RunSpec::default()
        };
        let op_beta = spec.operator().unwrap();
        spec.source = SourceChoice::BetaOverThree;
        let op_third = spec.operator().unwrap();
        assert!((op_beta.source_c() - 3.0 * op_third.source_c()).abs() < 1e-12);
    }
}
