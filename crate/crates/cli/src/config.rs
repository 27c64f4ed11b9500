//! Experiment configuration: one TOML document with a block per
//! subcommand. Every field has a default, unknown keys are rejected, and
//! validation reports each offending key by its dotted path.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cgolab_core::grid::{Exponent, GridSpec, DEFAULT_MAX_POINTS};

/// The only environment override: the output directory.
pub const OUTPUT_DIR_ENV: &str = "CGOLAB_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub output_dir: String,
    /// Worker threads; 0 lets the pool pick.
    pub threads: usize,
    pub max_points: usize,
    pub verify_strichartz: StrichartzBlock,
    pub kernel_table: KernelBlock,
    pub bs_norm_sweep: BsBlock,
    pub cgo_build: CgoBlock,
    pub forward_evolve: ForwardBlock,
    pub identity_check: IdentityBlock,
    pub reconstruct: ReconstructBlock,
    pub counterexample_sweep: CounterexampleBlock,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 1,
            output_dir: "cgolab-out".into(),
            threads: 0,
            max_points: DEFAULT_MAX_POINTS,
            verify_strichartz: StrichartzBlock::default(),
            kernel_table: KernelBlock::default(),
            bs_norm_sweep: BsBlock::default(),
            cgo_build: CgoBlock::default(),
            forward_evolve: ForwardBlock::default(),
            identity_check: IdentityBlock::default(),
            reconstruct: ReconstructBlock::default(),
            counterexample_sweep: CounterexampleBlock::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub n: usize,
    pub box_time: f64,
    pub box_space: f64,
    pub pts_time: usize,
    pub pts_space: usize,
    /// Replace box_time by box_space²/π so that dτ = dξ².
    #[serde(default)]
    pub commensurate: bool,
}

impl GridBlock {
    pub const fn new(n: usize, box_time: f64, box_space: f64, pts_time: usize, pts_space: usize) -> Self {
        GridBlock { n, box_time, box_space, pts_time, pts_space, commensurate: false }
    }

    pub fn spec(&self) -> GridSpec {
        let box_time = if self.commensurate { self.box_space * self.box_space / PI } else { self.box_time };
        GridSpec { n: self.n, box_time, box_space: self.box_space, pts_time: self.pts_time, pts_space: self.pts_space }
    }

    fn validate(&self, path: &str, max_points: usize, errs: &mut Vec<String>) {
        if !(1..=3).contains(&self.n) {
            errs.push(format!("{path}.n: must be 1, 2 or 3"));
        }
        if !(self.box_space > 0.0 && self.box_space.is_finite()) {
            errs.push(format!("{path}.box_space: must be positive"));
        }
        if !self.commensurate && !(self.box_time > 0.0 && self.box_time.is_finite()) {
            errs.push(format!("{path}.box_time: must be positive"));
        }
        for (key, v) in [("pts_time", self.pts_time), ("pts_space", self.pts_space)] {
            if v < 8 || !v.is_power_of_two() {
                errs.push(format!("{path}.{key}: must be a power of two ≥ 8"));
            }
        }
        if (1..=3).contains(&self.n) {
            let total = self.pts_time.saturating_mul(self.pts_space.saturating_pow(self.n as u32));
            if total > max_points {
                errs.push(format!("{path}: {total} points exceed max_points = {max_points}"));
            }
        }
    }
}

fn check_exponent(s: &str, path: &str, errs: &mut Vec<String>) {
    match s.parse::<Exponent>() {
        Ok(e) if e.in_range() => {}
        _ => errs.push(format!("{path}: '{s}' is not an exponent in [1, ∞]")),
    }
}

fn check_positive(v: f64, path: &str, errs: &mut Vec<String>) {
    if !(v > 0.0 && v.is_finite()) {
        errs.push(format!("{path}: must be positive"));
    }
}

fn check_list(v: &[f64], path: &str, errs: &mut Vec<String>) {
    for (i, x) in v.iter().enumerate() {
        check_positive(*x, &format!("{path}[{i}]"), errs);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    Strichartz,
    Gain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub label: String,
    pub kind: SweepKind,
    pub grid: GridBlock,
    /// "fixed" or "natural".
    pub grid_mode: String,
    pub nus: Vec<f64>,
    /// (q, r) as strings such as "6/5"; empty means the standard pairs.
    #[serde(default)]
    pub pairs: Vec<[String; 2]>,
    pub family_count: usize,
    pub spread_ceiling: f64,
    /// Reported but excluded from the verdict.
    #[serde(default)]
    pub diagnostic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrichartzBlock {
    pub sweeps: Vec<SweepBlock>,
}

impl Default for StrichartzBlock {
    fn default() -> Self {
        let nus = vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
        let sweep = |label: &str, kind, grid, mode: &str, ceiling, diagnostic| SweepBlock {
            label: label.into(),
            kind,
            grid,
            grid_mode: mode.into(),
            nus: nus.clone(),
            pairs: Vec::new(),
            family_count: 12,
            spread_ceiling: ceiling,
            diagnostic,
        };
        StrichartzBlock {
            sweeps: vec![
                sweep("n2-natural", SweepKind::Strichartz, GridBlock::new(2, 8.0, 8.0, 16, 32), "natural", 10.0, false),
                sweep("n3-natural", SweepKind::Strichartz, GridBlock::new(3, 8.0, 8.0, 16, 16), "natural", 10.0, false),
                sweep("n2-gain", SweepKind::Gain, GridBlock::new(2, 8.0, 12.0, 32, 64), "fixed", 3.0, false),
                sweep("n2-fixed", SweepKind::Strichartz, GridBlock::new(2, 8.0, 8.0, 16, 32), "fixed", 10.0, true),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelBlock {
    pub sigmas: Vec<f64>,
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    pub quad_tol: f64,
    /// Largest accepted |closed form − quadrature|.
    pub abs_tol: f64,
    /// Multiplier on the interpolation bound L·h/2 for the change of the
    /// sampled sup|K_σ| under 2× refinement.
    pub sup_slack: f64,
}

impl Default for KernelBlock {
    fn default() -> Self {
        KernelBlock {
            sigmas: vec![-5.0, -1.0, -0.1, 0.1, 0.3, 0.5, 2.0, 10.0],
            x_min: -20.0,
            x_max: 20.0,
            points: 200,
            quad_tol: 1e-9,
            abs_tol: 1e-6,
            sup_slack: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    Gaussian,
    Cusp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialBlock {
    pub kind: PotentialKind,
    pub amp: f64,
    /// Gaussian width; ignored for the cusp.
    #[serde(default = "one")]
    pub width: f64,
    /// Cusp exponent; ignored for the Gaussian.
    #[serde(default = "half")]
    pub alpha: f64,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BsBlock {
    pub grid: GridBlock,
    pub potentials: Vec<PotentialBlock>,
    /// Time window [lo, hi] of the potential.
    pub window: [f64; 2],
    pub radius: f64,
    pub a: String,
    pub b: String,
    pub nus: Vec<f64>,
    pub tol: f64,
}

impl Default for BsBlock {
    fn default() -> Self {
        BsBlock {
            grid: GridBlock::new(2, 2.0, 4.0, 32, 32),
            potentials: vec![
                PotentialBlock { kind: PotentialKind::Gaussian, amp: -2.0, width: 1.0, alpha: 0.5 },
                PotentialBlock { kind: PotentialKind::Cusp, amp: -2.0, width: 1.0, alpha: 0.5 },
            ],
            window: [-1.5, 1.5],
            radius: 2.0,
            a: "2".into(),
            b: "2".into(),
            nus: vec![4.0, 8.0, 16.0, 32.0, 64.0],
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CgoBlock {
    pub grid: GridBlock,
    pub potential: PotentialBlock,
    pub window: [f64; 2],
    pub radius: f64,
    /// Axis of ν and of the wave packet's frequency line.
    pub axis: usize,
    pub packet_width: f64,
    pub nus: Vec<f64>,
    pub tol: f64,
    pub rho_max: f64,
    pub power_tol: f64,
}

impl Default for CgoBlock {
    fn default() -> Self {
        CgoBlock {
            grid: GridBlock { commensurate: true, ..GridBlock::new(2, 0.0, 4.0, 32, 16) },
            potential: PotentialBlock { kind: PotentialKind::Gaussian, amp: -4.0, width: 1.0, alpha: 0.5 },
            window: [-1.5, 1.5],
            radius: 2.0,
            axis: 1,
            packet_width: 0.5,
            nus: vec![16.0, 32.0, 64.0],
            tol: 1e-8,
            rho_max: 0.9,
            power_tol: 1e-6,
        }
    }
}

/// V(t, x) = amp·sin²(πt/T)·e^{−|x|²/width²} on [0, T].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BumpBlock {
    pub amp: f64,
    pub width: f64,
}

impl Default for BumpBlock {
    fn default() -> Self {
        BumpBlock { amp: 0.1, width: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForwardBlock {
    /// Only n, box_space and pts_space matter; the time axis is set by
    /// t_end and steps.
    pub grid: GridBlock,
    pub potential: BumpBlock,
    pub t_end: f64,
    pub steps: usize,
    /// "midpoint" or "cell-average".
    pub sampling: String,
    /// Initial datum e^{−|x|²/2w²}e^{ik·x₀}.
    pub packet_width: f64,
    pub packet_freq: f64,
    /// Largest accepted relative mass drift.
    pub mass_tol: f64,
}

impl Default for ForwardBlock {
    fn default() -> Self {
        ForwardBlock {
            grid: GridBlock::new(2, 1.0, 16.0, 8, 128),
            potential: BumpBlock::default(),
            t_end: 1.0,
            steps: 128,
            sampling: "midpoint".into(),
            packet_width: 1.0,
            packet_freq: 1.0,
            mass_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentityBlock {
    pub grid: GridBlock,
    pub potential: BumpBlock,
    pub t_end: f64,
    /// Step counts, each double the previous.
    pub steps: Vec<usize>,
    pub tol: f64,
    /// Allowed relative deviation of the residual ratio from 4.
    pub order_tol: f64,
}

impl Default for IdentityBlock {
    fn default() -> Self {
        IdentityBlock {
            grid: GridBlock::new(2, 1.0, 8.0, 8, 64),
            potential: BumpBlock::default(),
            t_end: 1.0,
            steps: vec![128, 256],
            tol: 1e-4,
            order_tol: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructBlock {
    pub grid: GridBlock,
    pub radius: f64,
    pub epsilons: Vec<f64>,
    pub width: f64,
    pub t_end: f64,
    pub steps: usize,
    pub born_threshold: f64,
    /// Largest accepted relative error at every ε.
    pub max_error: f64,
}

impl Default for ReconstructBlock {
    fn default() -> Self {
        ReconstructBlock {
            grid: GridBlock::new(2, 1.0, 8.0, 8, 64),
            radius: 8.0,
            epsilons: vec![0.1, 0.05, 0.025],
            width: 1.0,
            t_end: 1.0,
            steps: 64,
            born_threshold: 0.5,
            max_error: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleBlock {
    pub rhos: Vec<f64>,
    pub n: usize,
    pub q_dual: String,
    pub r_dual: String,
    pub member_box_time: f64,
    pub member_box_space: f64,
    pub member_pts_time: usize,
    pub member_pts_space: usize,
    pub trace_pts: usize,
    pub trace_half_width: f64,
    pub delta_min: f64,
    pub control_width: f64,
    pub threshold: f64,
    pub comparability: f64,
    pub control_spread: f64,
    pub scaling_tol: f64,
    pub smoothing_grid: GridBlock,
    pub smoothing_nus: Vec<f64>,
    pub smoothing_t_end: f64,
    pub smoothing_radius: f64,
    pub smoothing_family_count: usize,
    pub smoothing_max_spread: f64,
}

impl Default for CounterexampleBlock {
    fn default() -> Self {
        CounterexampleBlock {
            rhos: vec![4.0, 16.0, 64.0, 256.0, 1024.0],
            n: 2,
            q_dual: "4".into(),
            r_dual: "4".into(),
            member_box_time: 2.0,
            member_box_space: 32.0,
            member_pts_time: 128,
            member_pts_space: 128,
            trace_pts: 1 << 16,
            trace_half_width: 2.0,
            delta_min: 1e-3,
            control_width: 0.1,
            threshold: 1.15,
            comparability: 2.0,
            control_spread: 2.0,
            scaling_tol: 0.1,
            smoothing_grid: GridBlock::new(2, 4.0, 8.0, 32, 32),
            smoothing_nus: vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
            smoothing_t_end: 1.0,
            smoothing_radius: 1.0,
            smoothing_family_count: 12,
            smoothing_max_spread: 10.0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("config error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

impl Config {
    /// Parse a TOML document; type errors carry the dotted key path.
    pub fn from_toml(text: &str) -> Result<Config, ConfigError> {
        let value: toml::Value = toml::from_str(text)
            .map_err(|e| ConfigError::Parse { path: "<document>".into(), message: e.to_string() })?;
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            // The value deserializer repeats the path on a second line.
            let message = e.into_inner().to_string();
            ConfigError::Parse { path, message: message.lines().next().unwrap_or_default().to_string() }
        })
    }

    pub fn load(path: Option<&str>) -> Result<Config, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text =
                    std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.into(), source })?;
                Config::from_toml(&text)?
            }
            None => Config::default(),
        };
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                cfg.output_dir = dir;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the resolved configuration, excluding the output
    /// directory and thread count, which do not affect any number.
    pub fn hash(&self) -> String {
        let canonical = Config { output_dir: String::new(), threads: 0, ..self.clone() };
        Sha256::digest(canonical.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Every violated constraint, by key path.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut e = Vec::new();
        let mp = self.max_points;
        if self.output_dir.is_empty() {
            e.push("output_dir: must not be empty".into());
        }
        for (i, s) in self.verify_strichartz.sweeps.iter().enumerate() {
            let p = format!("verify_strichartz.sweeps[{i}]");
            s.grid.validate(&format!("{p}.grid"), mp, &mut e);
            if s.grid_mode != "fixed" && s.grid_mode != "natural" {
                e.push(format!("{p}.grid_mode: expected 'fixed' or 'natural'"));
            }
            check_list(&s.nus, &format!("{p}.nus"), &mut e);
            for (j, [q, r]) in s.pairs.iter().enumerate() {
                check_exponent(q, &format!("{p}.pairs[{j}][0]"), &mut e);
                check_exponent(r, &format!("{p}.pairs[{j}][1]"), &mut e);
            }
            check_positive(s.spread_ceiling, &format!("{p}.spread_ceiling"), &mut e);
        }
        let k = &self.kernel_table;
        if !(k.x_min < k.x_max) {
            e.push("kernel_table.x_max: must exceed x_min".into());
        }
        if k.points < 2 {
            e.push("kernel_table.points: must be at least 2".into());
        }
        for (i, s) in k.sigmas.iter().enumerate() {
            if *s == 0.0 || !s.is_finite() {
                e.push(format!("kernel_table.sigmas[{i}]: must be finite and nonzero"));
            }
        }
        for (key, v) in [("quad_tol", k.quad_tol), ("abs_tol", k.abs_tol), ("sup_slack", k.sup_slack)] {
            check_positive(v, &format!("kernel_table.{key}"), &mut e);
        }
        let b = &self.bs_norm_sweep;
        b.grid.validate("bs_norm_sweep.grid", mp, &mut e);
        check_exponent(&b.a, "bs_norm_sweep.a", &mut e);
        check_exponent(&b.b, "bs_norm_sweep.b", &mut e);
        check_list(&b.nus, "bs_norm_sweep.nus", &mut e);
        check_positive(b.radius, "bs_norm_sweep.radius", &mut e);
        check_positive(b.tol, "bs_norm_sweep.tol", &mut e);
        if !(b.window[0] < b.window[1]) {
            e.push("bs_norm_sweep.window: lower end must be below upper end".into());
        }
        for (i, p) in b.potentials.iter().enumerate() {
            check_positive(p.width, &format!("bs_norm_sweep.potentials[{i}].width"), &mut e);
        }
        let c = &self.cgo_build;
        c.grid.validate("cgo_build.grid", mp, &mut e);
        check_list(&c.nus, "cgo_build.nus", &mut e);
        check_positive(c.packet_width, "cgo_build.packet_width", &mut e);
        check_positive(c.radius, "cgo_build.radius", &mut e);
        check_positive(c.tol, "cgo_build.tol", &mut e);
        check_positive(c.power_tol, "cgo_build.power_tol", &mut e);
        if !(c.rho_max > 0.0 && c.rho_max < 1.0) {
            e.push("cgo_build.rho_max: must lie in (0, 1)".into());
        }
        if c.axis >= c.grid.n {
            e.push("cgo_build.axis: must be below grid.n".into());
        }
        if !(c.window[0] < c.window[1]) {
            e.push("cgo_build.window: lower end must be below upper end".into());
        }
        let f = &self.forward_evolve;
        f.grid.validate("forward_evolve.grid", mp, &mut e);
        check_positive(f.t_end, "forward_evolve.t_end", &mut e);
        check_positive(f.packet_width, "forward_evolve.packet_width", &mut e);
        check_positive(f.mass_tol, "forward_evolve.mass_tol", &mut e);
        check_positive(f.potential.width, "forward_evolve.potential.width", &mut e);
        if f.steps == 0 {
            e.push("forward_evolve.steps: must be positive".into());
        }
        if f.sampling != "midpoint" && f.sampling != "cell-average" {
            e.push("forward_evolve.sampling: expected 'midpoint' or 'cell-average'".into());
        }
        let id = &self.identity_check;
        id.grid.validate("identity_check.grid", mp, &mut e);
        check_positive(id.t_end, "identity_check.t_end", &mut e);
        check_positive(id.tol, "identity_check.tol", &mut e);
        check_positive(id.potential.width, "identity_check.potential.width", &mut e);
        if id.steps.is_empty() || id.steps.contains(&0) {
            e.push("identity_check.steps: must be a nonempty list of positive counts".into());
        }
        let r = &self.reconstruct;
        r.grid.validate("reconstruct.grid", mp, &mut e);
        check_positive(r.radius, "reconstruct.radius", &mut e);
        check_positive(r.width, "reconstruct.width", &mut e);
        check_positive(r.t_end, "reconstruct.t_end", &mut e);
        check_list(&r.epsilons, "reconstruct.epsilons", &mut e);
        if r.steps == 0 {
            e.push("reconstruct.steps: must be positive".into());
        }
        let x = &self.counterexample_sweep;
        check_list(&x.rhos, "counterexample_sweep.rhos", &mut e);
        if !(1..=3).contains(&x.n) {
            e.push("counterexample_sweep.n: must be 1, 2 or 3".into());
        }
        check_exponent(&x.q_dual, "counterexample_sweep.q_dual", &mut e);
        check_exponent(&x.r_dual, "counterexample_sweep.r_dual", &mut e);
        for (key, v) in [
            ("member_box_time", x.member_box_time),
            ("member_box_space", x.member_box_space),
            ("trace_half_width", x.trace_half_width),
            ("delta_min", x.delta_min),
            ("control_width", x.control_width),
            ("threshold", x.threshold),
            ("comparability", x.comparability),
            ("control_spread", x.control_spread),
            ("scaling_tol", x.scaling_tol),
            ("smoothing_t_end", x.smoothing_t_end),
            ("smoothing_radius", x.smoothing_radius),
            ("smoothing_max_spread", x.smoothing_max_spread),
        ] {
            check_positive(v, &format!("counterexample_sweep.{key}"), &mut e);
        }
        for (key, v) in [
            ("member_pts_time", x.member_pts_time),
            ("member_pts_space", x.member_pts_space),
            ("trace_pts", x.trace_pts),
        ] {
            if v < 8 || !v.is_power_of_two() {
                e.push(format!("counterexample_sweep.{key}: must be a power of two ≥ 8"));
            }
        }
        x.smoothing_grid.validate("counterexample_sweep.smoothing_grid", mp, &mut e);
        check_list(&x.smoothing_nus, "counterexample_sweep.smoothing_nus", &mut e);
        if e.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_and_validates() {
        let c = Config::default();
        c.validate().unwrap();
        assert_eq!(Config::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
    }

    #[test]
    fn type_error_names_the_key_path() {
        let err = Config::from_toml("[bs_norm_sweep.grid]\nn = 2\nbox_time = 1\nbox_space = 'x'\npts_time = 8\npts_space = 8\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("bs_norm_sweep.grid.box_space"), "{err}");
    }

    #[test]
    fn unknown_key_rejected_with_path() {
        let err = Config::from_toml("[reconstruct]\nepsilon = 0.1\n").unwrap_err().to_string();
        assert!(err.contains("reconstruct"), "{err}");
    }

    #[test]
    fn invalid_values_listed_by_path() {
        let mut c = Config::default();
        c.bs_norm_sweep.grid.box_space = -1.0;
        c.kernel_table.points = 1;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("bs_norm_sweep.grid.box_space"), "{msg}");
        assert!(msg.contains("kernel_table.points"), "{msg}");
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = Config::default();
        let b = Config { output_dir: "elsewhere".into(), threads: 3, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        let c = Config { seed: 2, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
    }
}
