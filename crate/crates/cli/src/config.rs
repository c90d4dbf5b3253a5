//! Pipeline configuration from defaults, a `key = value` file and flags.
//!
//! Every configuration field has one flag and one file key of the same name
//! (`--hessian-threshold` / `hessian_threshold`). Flags win over the file.

use std::path::{Path, PathBuf};

use clap::Args;
use cmfd::descriptor::Smoothing;
use cmfd::{DescriptorKind, PipelineConfig};

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// File of `key = value` lines setting defaults for the flags below.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Pyramid octaves.
    #[arg(long)]
    pub n_octaves: Option<String>,
    /// Filter sizes per octave (at least 3).
    #[arg(long)]
    pub layers_per_octave: Option<String>,
    /// Minimum Hessian determinant on [0, 1] intensities.
    #[arg(long)]
    pub hessian_threshold: Option<String>,
    /// Sampling step of the first octave in pixels.
    #[arg(long)]
    pub initial_step: Option<String>,

    /// Comma-separated ring radii of the sampling pattern.
    #[arg(long)]
    pub ring_radii: Option<String>,
    /// Comma-separated point counts, one per ring.
    #[arg(long)]
    pub ring_counts: Option<String>,
    #[arg(long)]
    pub sigma_scale: Option<String>,
    /// Short-pair distance bound in pattern units.
    #[arg(long)]
    pub delta_max_coeff: Option<String>,
    /// Long-pair distance bound in pattern units.
    #[arg(long)]
    pub delta_min_coeff: Option<String>,
    /// Precomputed pattern orientations.
    #[arg(long)]
    pub rotations: Option<String>,
    /// Pattern smoothing: box or gaussian.
    #[arg(long)]
    pub smoothing: Option<String>,

    /// Distance-ratio threshold; matches with ratio <= rho are kept.
    #[arg(long)]
    pub rho: Option<String>,
    /// Neighbors closer than this many pixels to the query are ignored.
    #[arg(long)]
    pub min_pair_distance: Option<String>,
    /// Neighbors retrieved per query.
    #[arg(long)]
    pub k: Option<String>,

    /// Matched pairs needed for a forged verdict.
    #[arg(long)]
    pub verdict_min_pairs: Option<String>,
    /// brisk or surf_baseline.
    #[arg(long)]
    pub descriptor_kind: Option<String>,
    /// Correspondence tolerance in pixels when scoring against ground truth.
    #[arg(long)]
    pub tol_px: Option<String>,
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| format!("{key}: cannot parse `{value}`: {e}"))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(|v| num(key, v)).collect()
}

/// Sets one configuration field by name.
pub fn set(cfg: &mut PipelineConfig, key: &str, value: &str) -> Result<(), String> {
    let key = key.trim().replace('-', "_");
    let v = value.trim();
    match key.as_str() {
        "n_octaves" => cfg.detector.n_octaves = num(&key, v)?,
        "layers_per_octave" => cfg.detector.layers_per_octave = num(&key, v)?,
        "hessian_threshold" => cfg.detector.hessian_threshold = num(&key, v)?,
        "initial_step" => cfg.detector.initial_step = num(&key, v)?,
        "ring_radii" => cfg.descriptor.ring_radii = list(&key, v)?,
        "ring_counts" => cfg.descriptor.ring_counts = list(&key, v)?,
        "sigma_scale" => cfg.descriptor.sigma_scale = num(&key, v)?,
        "delta_max_coeff" => cfg.descriptor.delta_max_coeff = num(&key, v)?,
        "delta_min_coeff" => cfg.descriptor.delta_min_coeff = num(&key, v)?,
        "rotations" => cfg.descriptor.rotations = num(&key, v)?,
        "smoothing" => {
            cfg.descriptor.smoothing = match v {
                "box" => Smoothing::Box,
                "gaussian" => Smoothing::Gaussian,
                other => return Err(format!("smoothing: expected box or gaussian, got `{other}`")),
            }
        }
        "rho" => cfg.matcher.rho = num(&key, v)?,
        "min_pair_distance" => cfg.matcher.min_pair_distance = num(&key, v)?,
        "k" => cfg.matcher.k = num(&key, v)?,
        "verdict_min_pairs" => cfg.verdict_min_pairs = num(&key, v)?,
        "descriptor_kind" => cfg.descriptor_kind = v.parse::<DescriptorKind>()?,
        "tol_px" => cfg.tol_px = num(&key, v)?,
        _ => return Err(format!("unknown configuration key `{key}`")),
    }
    Ok(())
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_file(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl ConfigArgs {
    fn flags(&self) -> Vec<(&'static str, &String)> {
        let fields: [(&'static str, &Option<String>); 17] = [
            ("n_octaves", &self.n_octaves),
            ("layers_per_octave", &self.layers_per_octave),
            ("hessian_threshold", &self.hessian_threshold),
            ("initial_step", &self.initial_step),
            ("ring_radii", &self.ring_radii),
            ("ring_counts", &self.ring_counts),
            ("sigma_scale", &self.sigma_scale),
            ("delta_max_coeff", &self.delta_max_coeff),
            ("delta_min_coeff", &self.delta_min_coeff),
            ("rotations", &self.rotations),
            ("smoothing", &self.smoothing),
            ("rho", &self.rho),
            ("min_pair_distance", &self.min_pair_distance),
            ("k", &self.k),
            ("verdict_min_pairs", &self.verdict_min_pairs),
            ("descriptor_kind", &self.descriptor_kind),
            ("tol_px", &self.tol_px),
        ];
        fields.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k, v))).collect()
    }

    /// Defaults, then the config file, then flags; validated.
    pub fn resolve(&self) -> Result<PipelineConfig, String> {
        let mut cfg = PipelineConfig::default();
        if let Some(path) = &self.config {
            let text = read(path)?;
            for (k, v) in parse_file(&text).map_err(|e| format!("{}: {e}", path.display()))? {
                set(&mut cfg, &k, &v).map_err(|e| format!("{}: {e}", path.display()))?;
            }
        }
        for (k, v) in self.flags() {
            set(&mut cfg, k, v).map_err(|e| format!("--{}: {e}", k.replace('_', "-")))?;
        }
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}
