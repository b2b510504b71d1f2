use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::divergences::TargetPotential;
use crate::error::{Error, Result};
use crate::oracles::AffineMap;
use crate::rng::RunRng;
use crate::schemes::{InnerOptimizer, Sampler, SchemeConfig, SchemeKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Isotropic standard deviation.
    pub std: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// `γ = N(0, I)`, `V(x) = ‖x‖²/2`.
    #[default]
    StandardGaussian,
}

impl TargetKind {
    pub fn potential(self) -> TargetPotential {
        match self {
            TargetKind::StandardGaussian => TargetPotential::StandardGaussian,
        }
    }

    pub fn sample(self, dim: usize, n: usize, rng: &mut RunRng) -> PointCloud {
        match self {
            TargetKind::StandardGaussian => {
                let data = (0..n * dim).map(|_| StandardNormal.sample(rng)).collect();
                PointCloud::new(dim, data).expect("dim > 0")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_mixture")]
    pub mixture: Vec<MixtureComponent>,
    #[serde(default)]
    pub target: TargetKind,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_eval")]
    pub n_eval: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<SchemeConfig>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_eps_rule")]
    pub eps_rule: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_hidden_widths")]
    pub hidden_widths: Vec<usize>,
}

fn default_dim() -> usize {
    2
}

fn default_mixture() -> Vec<MixtureComponent> {
    let a = 2.0;
    [(a, a), (a, -a), (-a, a), (-a, -a)]
        .into_iter()
        .map(|(x, y)| MixtureComponent { weight: 0.25, mean: vec![x, y], std: 0.4 })
        .collect()
}

fn default_n_train() -> usize {
    100
}

fn default_n_eval() -> usize {
    10_000
}

fn default_seeds() -> Vec<u64> {
    (0..100).collect()
}

fn default_eps_rule() -> f64 {
    0.05
}

fn default_hidden_widths() -> Vec<usize> {
    vec![20, 20]
}

/// Methods (a)–(d): implicit, explicit, Euclidean GD and Adam.
pub fn default_methods() -> Vec<SchemeConfig> {
    let constrained = |kind| SchemeConfig {
        inner_optimizer: InnerOptimizer::Adam,
        ..SchemeConfig::new(kind, 0.4, 10).with_inner(100)
    };
    vec![
        constrained(SchemeKind::ImplicitConstrained),
        constrained(SchemeKind::ExplicitConstrained),
        SchemeConfig::new(SchemeKind::Euclidean, 0.001, 3000),
        SchemeConfig::new(SchemeKind::Adam, 0.05, 1000),
    ]
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dim: default_dim(),
            mixture: default_mixture(),
            target: TargetKind::default(),
            n_train: default_n_train(),
            n_eval: default_n_eval(),
            methods: default_methods(),
            seeds: default_seeds(),
            eps_rule: default_eps_rule(),
            output_dir: None,
            hidden_widths: default_hidden_widths(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidConfig(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.dim == 0 {
            return bad("dim must be positive".into());
        }
        if self.mixture.is_empty() {
            return bad("mixture needs at least one component".into());
        }
        let mut total = 0.0;
        for (i, c) in self.mixture.iter().enumerate() {
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return bad(format!("mixture component {i} has non-positive weight"));
            }
            if c.mean.len() != self.dim {
                return bad(format!("mixture component {i} mean has {} entries, dim is {}", c.mean.len(), self.dim));
            }
            if !(c.std >= 0.0 && c.std.is_finite()) || c.mean.iter().any(|v| !v.is_finite()) {
                return bad(format!("mixture component {i} has invalid mean or std"));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("mixture weights sum to {total}, not 1"));
        }
        if self.n_train < 2 {
            return bad("n_train must be at least 2".into());
        }
        if self.n_eval < 1 {
            return bad("n_eval must be positive".into());
        }
        if !(self.eps_rule > 0.0 && self.eps_rule.is_finite()) {
            return bad("eps_rule must be positive".into());
        }
        if self.hidden_widths.is_empty() || self.hidden_widths.contains(&0) {
            return bad("hidden_widths must be non-empty and positive".into());
        }
        let mut labels = std::collections::HashSet::new();
        for m in &self.methods {
            m.validate()?;
            if !labels.insert(m.label().to_string()) {
                return bad(format!("duplicate method label {}", m.label()));
            }
        }
        Ok(())
    }

    /// Methods with an unset batch size resolved to `n_train`.
    pub fn resolved_methods(&self) -> Vec<SchemeConfig> {
        self.methods
            .iter()
            .map(|m| {
                let mut m = m.clone();
                m.batch_n.get_or_insert(self.n_train);
                m
            })
            .collect()
    }

    pub fn method(&self, label: &str) -> Option<SchemeConfig> {
        self.resolved_methods().into_iter().find(|m| m.label() == label)
    }

    pub fn source(&self) -> GaussianMixture {
        GaussianMixture { dim: self.dim, components: self.mixture.clone() }
    }

    /// Closed-form transport map to the target when the source is a single
    /// nondegenerate Gaussian.
    pub fn oracle_map(&self) -> Option<AffineMap> {
        match (self.target, self.mixture.as_slice()) {
            (TargetKind::StandardGaussian, [c]) if c.std > 0.0 => {
                let mut map = AffineMap::identity(self.dim);
                map.matrix /= c.std;
                for (o, m) in map.offset.iter_mut().zip(&c.mean) {
                    *o = -m / c.std;
                }
                Some(map)
            }
            _ => None,
        }
    }
}

/// Finite mixture of isotropic Gaussians.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    pub dim: usize,
    pub components: Vec<MixtureComponent>,
}

impl GaussianMixture {
    /// Samples together with the component each came from.
    pub fn sample_labeled(&self, n: usize, rng: &mut RunRng) -> (PointCloud, Vec<usize>) {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        let mut data = Vec::with_capacity(n * self.dim);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = self.components.len() - 1;
            for (k, c) in self.components.iter().enumerate() {
                acc += c.weight;
                if u < acc {
                    pick = k;
                    break;
                }
            }
            let c = &self.components[pick];
            for &m in &c.mean {
                let z: f64 = StandardNormal.sample(rng);
                data.push(m + c.std * z);
            }
            labels.push(pick);
        }
        (PointCloud::new(self.dim, data).expect("dim > 0"), labels)
    }
}

impl Sampler for GaussianMixture {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, n: usize, rng: &mut RunRng) -> PointCloud {
        self.sample_labeled(n, rng).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn defaults_match_reference_experiment() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let labels: Vec<_> = cfg.methods.iter().map(|m| m.label().to_string()).collect();
        assert_eq!(labels, ["implicit", "explicit", "euclidean", "adam"]);
        assert_eq!(cfg.methods[0].tau, 0.4);
        assert_eq!(cfg.methods[1].inner_steps, 100);
        assert_eq!(cfg.methods[2].outer_steps, 3000);
        assert_eq!(cfg.methods[3].tau, 0.05);
        assert_eq!(cfg.seeds.len(), 100);
    }

    #[test]
    fn empty_toml_gives_defaults_and_round_trips() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn bad_configs_rejected() {
        assert!(ExperimentConfig::from_toml_str("n_train = 1").is_err());
        assert!(ExperimentConfig::from_toml_str("bogus_key = 3").is_err());
        let weights = r#"
            [[mixture]]
            weight = 0.5
            mean = [0.0, 0.0]
            std = 1.0
        "#;
        assert!(matches!(ExperimentConfig::from_toml_str(weights), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn zero_std_component_is_a_point_mass() {
        let m = GaussianMixture {
            dim: 2,
            components: vec![MixtureComponent { weight: 1.0, mean: vec![1.0, -3.0], std: 0.0 }],
        };
        let c = m.sample(50, &mut RunRng::seed_from_u64(0));
        assert!(c.rows().all(|r| r == [1.0, -3.0]));
    }

    #[test]
    fn mixture_sampling_is_seeded() {
        let m = ExperimentConfig::default().source();
        let a = m.sample(20, &mut RunRng::seed_from_u64(8));
        let b = m.sample(20, &mut RunRng::seed_from_u64(8));
        assert_eq!(a, b);
    }

    #[test]
    fn oracle_only_for_single_gaussian() {
        assert!(ExperimentConfig::default().oracle_map().is_none());
        let cfg = ExperimentConfig {
            dim: 1,
            mixture: vec![MixtureComponent { weight: 1.0, mean: vec![2.0], std: 2.0 }],
            ..ExperimentConfig::default()
        };
        let t = cfg.oracle_map().unwrap();
        assert!((t.apply(&[4.0])[0] - 1.0).abs() < 1e-15);
    }
}
