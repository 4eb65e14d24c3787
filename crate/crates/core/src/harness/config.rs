use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::eigensolver::SolverOptions;
use crate::functionals::Exponent;
use crate::geometry::{DomainKind, DomainSpec};

/// Admissible exponents.
pub const P_RANGE: (f64, f64) = (1.1, 10.0);

/// Default coupling grid.
pub const DEFAULT_ALPHAS: [f64; 6] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];

/// Largest accepted layer metric `max(beta h_normal, sqrt(beta) h_tangential)`.
pub const MAX_LAYER_METRIC: f64 = 0.2;

/// Where the normal extension of a sweep comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CertificateSource {
    /// Closed form where one exists, the linear field on squares, mollified charts otherwise.
    Default,
    ClosedForm,
    Charts { charts: usize, sigma: f64 },
}

pub const DEFAULT_CHARTS: usize = 12;
pub const DEFAULT_SIGMA: f64 = 0.05;

/// Validated description of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub p: Exponent,
    pub alphas: Vec<f64>,
    /// Bulk mesh size; the boundary is graded to resolve the layer of the largest coupling.
    pub h: f64,
    /// Grade the mesh towards the boundary; a uniform mesh must resolve the layer on its own.
    pub graded: bool,
    pub solver: SolverOptions,
    pub certificate: CertificateSource,
    /// Warm-start each coupling from the previous minimizer instead of solving concurrently.
    pub warm: bool,
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(domain: DomainSpec, p: f64, alphas: Vec<f64>, h: f64) -> Result<Self, HarnessError> {
        let cfg = Self {
            domain,
            p: check_exponent(p)?,
            alphas,
            h,
            graded: true,
            solver: SolverOptions::default(),
            certificate: CertificateSource::Default,
            warm: false,
            csv: None,
            json: None,
            seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        check_exponent(self.p.get())?;
        if self.alphas.is_empty() {
            return Err(HarnessError::Config("at least one coupling is required".into()));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(HarnessError::Config(format!("couplings must be positive, got {a}")));
        }
        if self.alphas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(HarnessError::Config("couplings must be strictly ascending".into()));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(HarnessError::Config(format!("mesh size must be positive, got {}", self.h)));
        }
        self.domain.validate()?;
        self.solver.validate()?;
        if let CertificateSource::Charts { charts, sigma } = self.certificate {
            if charts == 0 || !(sigma > 0.0) {
                return Err(HarnessError::Config("charts need a positive count and smoothing length".into()));
            }
        }
        Ok(())
    }

    pub fn max_alpha(&self) -> f64 {
        *self.alphas.last().expect("validated config has couplings")
    }
}

pub fn check_exponent(p: f64) -> Result<Exponent, HarnessError> {
    if !(p >= P_RANGE.0 && p <= P_RANGE.1) {
        return Err(HarnessError::Config(format!("p must lie in [{}, {}], got {p}", P_RANGE.0, P_RANGE.1)));
    }
    Ok(Exponent::new(p)?)
}

/// Flat key-value settings shared by the configuration file and the command line.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlatConfig {
    pub domain: Option<String>,
    pub radius: Option<f64>,
    pub side: Option<f64>,
    pub half_length: Option<f64>,
    pub semi_axes: Option<Vec<f64>>,
    pub rounding_radius: Option<f64>,
    pub amplitude: Option<f64>,
    pub holder_exponent: Option<f64>,
    pub p: Option<f64>,
    pub alphas: Option<Vec<f64>>,
    pub h: Option<f64>,
    pub graded: Option<bool>,
    pub warm: Option<bool>,
    pub certificate: Option<String>,
    pub charts: Option<usize>,
    pub sigma: Option<f64>,
    pub max_iter: Option<usize>,
    pub tolerance: Option<f64>,
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub seed: Option<u64>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl FlatConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Values of `top` replace those of `self`.
    pub fn merge(mut self, top: FlatConfig) -> Self {
        overlay!(
            self, top, domain, radius, side, half_length, semi_axes, rounding_radius, amplitude, holder_exponent, p,
            alphas, h, graded, warm, certificate, charts, sigma, max_iter, tolerance, csv, json, seed
        );
        self
    }

    pub fn domain_spec(&self) -> Result<DomainSpec, HarnessError> {
        let kind: DomainKind = self.domain.as_deref().unwrap_or("disk").parse()?;
        let spec = match kind {
            DomainKind::Interval => DomainSpec::interval(self.half_length.unwrap_or(1.0)),
            DomainKind::Disk => DomainSpec::disk(self.radius.unwrap_or(1.0)),
            DomainKind::Ellipse => {
                let axes = self.semi_axes.clone().unwrap_or_else(|| vec![1.25, 0.8]);
                if axes.len() != 2 {
                    return Err(HarnessError::Config("semi_axes needs two values".into()));
                }
                DomainSpec::ellipse(axes[0], axes[1])
            }
            DomainKind::SmoothedPolygon => {
                DomainSpec::smoothed_square(self.side.unwrap_or(2.0), self.rounding_radius.unwrap_or(0.4))
            }
            DomainKind::RoughDisk => DomainSpec::rough_disk(
                self.radius.unwrap_or(1.0),
                self.amplitude.unwrap_or(0.1),
                self.holder_exponent.unwrap_or(0.5),
            ),
            DomainKind::Square => DomainSpec::square(self.side.unwrap_or(1.0)),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn certificate_source(&self) -> Result<CertificateSource, HarnessError> {
        match self.certificate.as_deref() {
            None | Some("default") => Ok(match (self.charts, self.sigma) {
                (None, None) => CertificateSource::Default,
                (c, s) => CertificateSource::Charts {
                    charts: c.unwrap_or(DEFAULT_CHARTS),
                    sigma: s.unwrap_or(DEFAULT_SIGMA),
                },
            }),
            Some("closed_form") => Ok(CertificateSource::ClosedForm),
            Some("charts") => Ok(CertificateSource::Charts {
                charts: self.charts.unwrap_or(DEFAULT_CHARTS),
                sigma: self.sigma.unwrap_or(DEFAULT_SIGMA),
            }),
            Some(other) => Err(HarnessError::Config(format!("unknown certificate source `{other}`"))),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        let mut o = SolverOptions::default();
        if let Some(m) = self.max_iter {
            o.max_iter = m;
        }
        if let Some(t) = self.tolerance {
            o.tolerance = t;
        }
        o
    }

    pub fn run_config(&self) -> Result<RunConfig, HarnessError> {
        let p = self.p.ok_or_else(|| HarnessError::Config("p is required".into()))?;
        let h = self.h.ok_or_else(|| HarnessError::Config("h is required".into()))?;
        let alphas = self.alphas.clone().unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
        let mut cfg = RunConfig::new(self.domain_spec()?, p, alphas, h)?;
        cfg.solver = self.solver_options();
        cfg.certificate = self.certificate_source()?;
        cfg.warm = self.warm.unwrap_or(false);
        cfg.graded = self.graded.unwrap_or(true);
        cfg.csv = self.csv.clone();
        cfg.json = self.json.clone();
        cfg.seed = self.seed.unwrap_or(0);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_the_file() {
        let file = FlatConfig::from_toml("domain = \"interval\"\np = 2.0\nh = 0.01\nalphas = [1.0, 2.0]\nseed = 4\n").unwrap();
        let flags = FlatConfig { h: Some(0.001), ..FlatConfig::default() };
        let cfg = file.merge(flags).run_config().unwrap();
        assert_eq!(cfg.h, 0.001);
        assert_eq!(cfg.alphas, vec![1.0, 2.0]);
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.domain, DomainSpec::interval(1.0));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(FlatConfig::from_toml("colour = 3\n").is_err());
    }

    #[test]
    fn default_grid_and_validation() {
        let flat = FlatConfig { p: Some(2.0), h: Some(0.1), ..FlatConfig::default() };
        assert_eq!(flat.run_config().unwrap().alphas, DEFAULT_ALPHAS.to_vec());
        for p in [1.05, 10.5, f64::NAN] {
            let f = FlatConfig { p: Some(p), ..flat.clone() };
            assert!(f.run_config().is_err());
        }
        for alphas in [vec![0.0], vec![2.0, 1.0], vec![], vec![1.0, 1.0]] {
            let f = FlatConfig { alphas: Some(alphas), ..flat.clone() };
            assert!(f.run_config().is_err());
        }
    }

    #[test]
    fn certificate_sources() {
        let mut f = FlatConfig::default();
        assert_eq!(f.certificate_source().unwrap(), CertificateSource::Default);
        f.sigma = Some(0.1);
        assert_eq!(f.certificate_source().unwrap(), CertificateSource::Charts { charts: DEFAULT_CHARTS, sigma: 0.1 });
        f.certificate = Some("closed_form".into());
        assert_eq!(f.certificate_source().unwrap(), CertificateSource::ClosedForm);
        f.certificate = Some("magic".into());
        assert!(f.certificate_source().is_err());
    }
}
