//! The subcommands: each turns its configuration block into reports and
//! CSV artifacts. Writing happens in one place, after the run.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde_json::Value;

use cgolab_core::birman_schwinger::{bs_decay_sweep, cusp_potential, gaussian_potential, BsError, Potential};
use cgolab_core::cgo::{remainder_decay_sweep, CgoConfig, CgoError, WavePacket};
use cgolab_core::counterexample::{
    embedding_ratio_sweep, local_smoothing_check, EmbeddingSweep, MemberGrid, TraceParams,
};
use cgolab_core::estimates::{run_sweep, standard_family, EstimateKind, FamilySpec, GridMode, SweepConfig};
use cgolab_core::forward::{evolve, integral_identity_check, EvolveSettings, Sampling, SpaceTimeV};
use cgolab_core::grid::{Exponent, Field, GridSpec, Slice};
use cgolab_core::kernels::{eval_k_sigma, eval_k_sigma_quadrature, KernelError, KernelSample, Method};
use cgolab_core::reconstruction::{reconstruct_potential, BornConfig};
use cgolab_core::report::{data_hash, Check, EstimateReport, Record};
use cgolab_core::symbols::standard_pairs;
use cgolab_core::C64;

use crate::config::{BumpBlock, Config, PotentialBlock, PotentialKind, SweepKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    VerifyStrichartz,
    KernelTable,
    BsNormSweep,
    CgoBuild,
    ForwardEvolve,
    IdentityCheck,
    Reconstruct,
    CounterexampleSweep,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::VerifyStrichartz,
        Command::KernelTable,
        Command::BsNormSweep,
        Command::CgoBuild,
        Command::ForwardEvolve,
        Command::IdentityCheck,
        Command::Reconstruct,
        Command::CounterexampleSweep,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Command::VerifyStrichartz => "verify-strichartz",
            Command::KernelTable => "kernel-table",
            Command::BsNormSweep => "bs-norm-sweep",
            Command::CgoBuild => "cgo-build",
            Command::ForwardEvolve => "forward-evolve",
            Command::IdentityCheck => "identity-check",
            Command::Reconstruct => "reconstruct",
            Command::CounterexampleSweep => "counterexample-sweep",
        }
    }
}

/// A named report; diagnostic reports never decide the verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedReport {
    pub name: String,
    pub report: EstimateReport,
    pub diagnostic: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub reports: Vec<NamedReport>,
    /// Extra files: (file name, contents).
    pub artifacts: Vec<(String, String)>,
    /// Some iterative solve stopped before its tolerance.
    pub nonconverged: bool,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.reports.iter().filter(|r| !r.diagnostic).all(|r| r.report.verdict.passed())
    }

    pub fn report(&self, name: &str) -> Option<&EstimateReport> {
        self.reports.iter().find(|r| r.name == name).map(|r| &r.report)
    }

    fn push(&mut self, name: impl Into<String>, report: EstimateReport, diagnostic: bool) {
        self.reports.push(NamedReport { name: name.into(), report, diagnostic });
    }

    /// Every file the run writes, in a fixed order.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for r in &self.reports {
            out.push((format!("{}.json", r.name), r.report.to_json()));
            if !self.artifacts.iter().any(|(n, _)| n == &format!("{}.csv", r.name)) {
                out.push((format!("{}.csv", r.name), r.report.to_csv()));
            }
        }
        out.extend(self.artifacts.iter().cloned());
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Exit status: 0 pass, 1 verdict failure, 2 usage or configuration, 3 non-convergence.
pub fn exit_code(result: &Result<Outcome, RunError>) -> i32 {
    match result {
        Ok(o) if o.nonconverged => 3,
        Ok(o) if o.passed() => 0,
        Ok(_) => 1,
        Err(RunError::NonConvergence(_)) => 3,
        Err(_) => 2,
    }
}

fn config_err(e: impl std::fmt::Display) -> RunError {
    RunError::Config(e.to_string())
}

fn kernel_err(e: KernelError) -> RunError {
    match e {
        KernelError::Quad(q) => RunError::NonConvergence(q.to_string()),
        other => config_err(other),
    }
}

fn cgo_err(e: CgoError) -> RunError {
    match e {
        CgoError::NoConvergence(_) | CgoError::NotContractive { .. } => RunError::NonConvergence(e.to_string()),
        other => config_err(other),
    }
}

fn exponent(s: &str) -> Result<Exponent, RunError> {
    s.parse::<Exponent>().map_err(|_| RunError::Config(format!("bad exponent '{s}'")))
}

fn spec_of(g: &crate::config::GridBlock) -> Result<GridSpec, RunError> {
    let s = g.spec();
    s.validate(usize::MAX).map_err(config_err)?;
    Ok(s)
}

/// Shortest round-trip form, matching the JSON reports.
fn num(x: f64) -> String {
    Value::from(x).to_string()
}

/// CSV with exactly the given columns, one row per record.
pub fn columns_csv(rep: &EstimateReport, cols: &[&str]) -> String {
    let mut out = cols.join(",");
    out.push('\n');
    for r in &rep.records {
        let row: Vec<String> = cols
            .iter()
            .map(|c| match r.values.get(*c) {
                Some(Value::String(s)) => s.clone(),
                Some(v) => v.to_string(),
                None => String::new(),
            })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Run one subcommand. Reports carry the configuration hash.
pub fn run(cmd: Command, cfg: &Config) -> Result<Outcome, RunError> {
    let mut out = match cmd {
        Command::VerifyStrichartz => verify_strichartz(cfg)?,
        Command::KernelTable => kernel_table(cfg)?,
        Command::BsNormSweep => bs_norm_sweep(cfg)?,
        Command::CgoBuild => cgo_build(cfg)?,
        Command::ForwardEvolve => forward_evolve(cfg)?,
        Command::IdentityCheck => identity_check(cfg)?,
        Command::Reconstruct => reconstruct(cfg)?,
        Command::CounterexampleSweep => counterexample_sweep(cfg)?,
    };
    let hash = cfg.hash();
    for r in &mut out.reports {
        r.report.config_hash = hash.clone();
        r.report.param("command", cmd.id());
    }
    Ok(out)
}

/// Write every file of the outcome under `dir`.
pub fn write_outcome(out: &Outcome, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    let io = |p: &Path, source| RunError::Io { path: p.display().to_string(), source };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    for (name, contents) in out.files() {
        let p = dir.join(name);
        std::fs::write(&p, contents).map_err(|e| io(&p, e))?;
        written.push(p);
    }
    Ok(written)
}

fn verify_strichartz(cfg: &Config) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    for s in &cfg.verify_strichartz.sweeps {
        let spec = spec_of(&s.grid)?;
        let kind = match s.kind {
            SweepKind::Strichartz => EstimateKind::Strichartz,
            SweepKind::Gain => EstimateKind::Gain,
        };
        let mut sc = SweepConfig::new(kind, spec);
        sc.grid_mode = if s.grid_mode == "natural" { GridMode::Natural } else { GridMode::Fixed };
        sc.nus = s.nus.clone();
        sc.pairs = if s.pairs.is_empty() {
            standard_pairs(spec.n).iter().map(|p| (p.q, p.r)).collect()
        } else {
            s.pairs.iter().map(|[q, r]| Ok((exponent(q)?, exponent(r)?))).collect::<Result<_, RunError>>()?
        };
        sc.family = FamilySpec { count: s.family_count, ..FamilySpec::default() };
        sc.seed = cfg.seed;
        sc.spread_ceiling = s.spread_ceiling;
        sc.max_points = cfg.max_points;
        let mut rep = run_sweep(&sc).map_err(config_err)?;
        rep.param("label", s.label.as_str());
        rep.param("diagnostic", s.diagnostic);
        out.push(format!("verify-strichartz-{}", s.label), rep, s.diagnostic);
    }
    Ok(out)
}

fn kernel_rows(sigma: f64, xs: &[f64], tol: f64) -> Result<Vec<(KernelSample, KernelSample)>, RunError> {
    xs.iter()
        .map(|&x| Ok((eval_k_sigma(sigma, x).map_err(kernel_err)?, eval_k_sigma_quadrature(sigma, x, tol).map_err(kernel_err)?)))
        .collect()
}

fn kernel_table(cfg: &Config) -> Result<Outcome, RunError> {
    let k = &cfg.kernel_table;
    let grid = |m: usize| -> Vec<f64> {
        (0..m).map(|i| k.x_min + (k.x_max - k.x_min) * i as f64 / (m - 1) as f64).collect()
    };
    let xs = grid(k.points);
    let mut rep = EstimateReport::new("kernel-table");
    rep.param("sigmas", k.sigmas.clone());
    rep.param("x_range", vec![k.x_min, k.x_max]);
    rep.param("points", k.points as u64);
    rep.param("quad_tol", k.quad_tol);
    rep.param("sup_slack", k.sup_slack);
    let mut table = String::from("parameter,argument,re,im,method,err_est\n");
    let mut worst_diff: f64 = 0.0;
    let mut worst_sup: f64 = 0.0;
    let mut finite = true;
    for &sigma in &k.sigmas {
        let rows = kernel_rows(sigma, &xs, k.quad_tol)?;
        let mut diff: f64 = 0.0;
        let mut sup: f64 = 0.0;
        for (c, q) in &rows {
            diff = diff.max((c.value - q.value).norm());
            sup = sup.max(c.value.norm());
            for s in [c, q] {
                let method = match s.method {
                    Method::ClosedForm => "closed_form",
                    Method::Quadrature => "quadrature",
                };
                table.push_str(&format!(
                    "{},{},{},{},{method},{}\n",
                    num(sigma),
                    num(s.arg),
                    num(s.value.re),
                    num(s.value.im),
                    num(s.err_est)
                ));
            }
        }
        let sup_h = |m: usize| -> Result<Vec<f64>, RunError> {
            grid(m).iter().map(|&x| eval_k_sigma(sigma, x).map(|s| s.value.norm())).collect::<Result<_, _>>().map_err(kernel_err)
        };
        let sup_of = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
        let sup_2 = sup_of(&sup_h(2 * k.points - 1)?);
        let sup_4 = sup_of(&sup_h(4 * k.points - 3)?);
        // Lipschitz constant from finite differences on a 16× grid.
        let dense = sup_h(16 * k.points - 15)?;
        let hd = (k.x_max - k.x_min) / (dense.len() - 1) as f64;
        let lip = dense.windows(2).map(|w| (w[1] - w[0]).abs() / hd).fold(0.0, f64::max);
        let h = (k.x_max - k.x_min) / (k.points - 1) as f64;
        let change = (sup_2 - sup).abs();
        let bound = k.sup_slack * lip * h / 2.0;
        let change_next = (sup_4 - sup_2).abs();
        worst_diff = worst_diff.max(diff);
        if bound > 0.0 {
            worst_sup = worst_sup.max(change / bound).max(change_next / (bound / 2.0));
        }
        finite &= sup_4.is_finite();
        rep.records.push(
            Record::new(format!("sigma={sigma}"), None)
                .with("sigma", sigma)
                .with("max_abs_diff", diff)
                .with("sup", sup)
                .with("sup_2x", sup_2)
                .with("sup_4x", sup_4)
                .with("rel_change_2x", if sup > 0.0 { change / sup } else { 0.0 })
                .with("lipschitz", lip)
                .with("interp_bound", bound),
        );
    }
    rep.check(Check::at_most("max |closed − quadrature|", worst_diff, k.abs_tol));
    rep.check(Check::at_most("sup change under refinement / (L·h/2)", worst_sup, 1.0));
    rep.check(Check::holds("sampled sup finite", finite));
    rep.finish();
    let mut out = Outcome::default();
    out.push("kernel-table", rep, false);
    out.artifacts.push(("kernel-table.csv".into(), table));
    Ok(out)
}

fn potential_field(spec: GridSpec, p: &PotentialBlock, window: (f64, f64)) -> Field {
    match p.kind {
        PotentialKind::Gaussian => gaussian_potential(spec, p.amp, p.width, window),
        PotentialKind::Cusp => cusp_potential(spec, p.amp, p.alpha, window),
    }
}

fn potential_label(p: &PotentialBlock) -> &'static str {
    match p.kind {
        PotentialKind::Gaussian => "gaussian",
        PotentialKind::Cusp => "cusp",
    }
}

fn bs_norm_sweep(cfg: &Config) -> Result<Outcome, RunError> {
    let b = &cfg.bs_norm_sweep;
    let spec = spec_of(&b.grid)?;
    let window = (b.window[0], b.window[1]);
    let (a, bb) = (exponent(&b.a)?, exponent(&b.b)?);
    let mut out = Outcome::default();
    for (i, p) in b.potentials.iter().enumerate() {
        let v = potential_field(spec, p, window);
        let pot = Potential::new(v, b.radius, a, bb, window).map_err(config_err)?;
        let rep = bs_decay_sweep(&pot, &b.nus, b.tol, cfg.seed).map_err(|e| match e {
            BsError::Grid(_) | BsError::Multiplier(_) => config_err(e),
            other => config_err(other),
        })?;
        if rep.records.iter().any(|r| r.values.get("converged") == Some(&Value::Bool(false))) {
            out.nonconverged = true;
        }
        let name = format!("bs-norm-sweep-{i}-{}", potential_label(p));
        out.artifacts.push((
            format!("{name}.csv"),
            columns_csv(&rep, &["nu", "lambda", "norm_estimate", "iterations", "converged"]),
        ));
        out.push(name, rep, false);
    }
    Ok(out)
}

fn cgo_build(cfg: &Config) -> Result<Outcome, RunError> {
    let c = &cfg.cgo_build;
    let spec = spec_of(&c.grid)?;
    let window = (c.window[0], c.window[1]);
    let v = potential_field(spec, &c.potential, window);
    let pot = Potential::new(v, c.radius, Exponent::int(2), Exponent::int(2), window).map_err(config_err)?;
    let psi = WavePacket::gaussian(spec, c.axis, [0.0; 3], c.packet_width).map_err(cgo_err)?;
    let cc = CgoConfig { tol: c.tol, rho_max: c.rho_max, power_tol: c.power_tol, seed: cfg.seed };
    let rep = remainder_decay_sweep(&pot, &psi, &c.nus, &cc).map_err(cgo_err)?;
    let mut out = Outcome::default();
    out.push("cgo-build", rep, false);
    Ok(out)
}

fn bump(p: BumpBlock, t_end: f64) -> SpaceTimeV {
    let BumpBlock { amp, width } = p;
    SpaceTimeV::analytic(&format!("bump(amp={amp},width={width},T={t_end})"), move |t, x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        C64::new(amp * (PI * t / t_end).sin().powi(2) * (-r2 / (width * width)).exp(), 0.0)
    })
}

fn packet(spec: GridSpec, width: f64, freq: f64) -> Slice {
    Slice::from_fn(spec, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        C64::from_polar((-r2 / (2.0 * width * width)).exp(), freq * x[0])
    })
}

fn forward_evolve(cfg: &Config) -> Result<Outcome, RunError> {
    let f = &cfg.forward_evolve;
    let spec = spec_of(&f.grid)?;
    let v = bump(f.potential, f.t_end);
    let mut settings = EvolveSettings::new(f.t_end, f.steps);
    settings.sampling = if f.sampling == "cell-average" { Sampling::CellAverage } else { Sampling::Midpoint };
    let traj = evolve(&v, &packet(spec, f.packet_width, f.packet_freq), &settings).map_err(config_err)?;
    let mut rep = EstimateReport::new("forward-evolve");
    rep.grids.push(spec);
    rep.param("t_end", f.t_end);
    rep.param("steps", f.steps as u64);
    rep.param("sampling", f.sampling.as_str());
    rep.param("potential", v.hash());
    for (t, m) in traj.times.iter().zip(&traj.mass) {
        rep.records.push(Record::new(format!("t={t}"), None).with("t", *t).with("mass", *m));
    }
    rep.note("mass_drift", traj.mass_drift);
    rep.note("boundary_mass", traj.boundary_mass);
    rep.note("aliasing_warning", traj.aliasing_warning);
    rep.note("final_state_hash", data_hash(&traj.final_state().data));
    rep.check(Check::at_most("mass drift", traj.mass_drift, f.mass_tol));
    rep.check(Check::holds("no aliasing warning", !traj.aliasing_warning));
    rep.finish();
    let mut out = Outcome::default();
    out.push("forward-evolve", rep, false);
    Ok(out)
}

fn identity_check(cfg: &Config) -> Result<Outcome, RunError> {
    let c = &cfg.identity_check;
    let spec = spec_of(&c.grid)?;
    let v = bump(c.potential, c.t_end);
    let f = packet(spec, 1.0, 1.0);
    let g = packet(spec, 1.0, 0.0);
    let mut rep = EstimateReport::new("identity-check");
    rep.grids.push(spec);
    rep.param("t_end", c.t_end);
    rep.param("steps", c.steps.iter().map(|&s| s as u64).collect::<Vec<_>>());
    rep.param("potential", v.hash());
    let mut residuals = Vec::new();
    let mut last = f64::NAN;
    for &steps in &c.steps {
        let chk = integral_identity_check(&v, &SpaceTimeV::Zero, &f, &g, &EvolveSettings::new(c.t_end, steps))
            .map_err(config_err)?;
        residuals.push(chk.residual);
        last = chk.normalized;
        rep.records.push(
            Record::new(format!("steps={steps}"), None)
                .with("steps", steps as u64)
                .with("lhs_re", chk.lhs.re)
                .with("lhs_im", chk.lhs.im)
                .with("rhs_re", chk.rhs.re)
                .with("rhs_im", chk.rhs.im)
                .with("residual", chk.residual)
                .with("normalized", chk.normalized),
        );
    }
    rep.check(Check::at_most("normalized residual at finest step", last, c.tol));
    for w in residuals.windows(2) {
        let dev = (w[0] / w[1] / 4.0 - 1.0).abs();
        rep.check(Check::at_most("residual ratio vs 4 under step doubling", dev, c.order_tol));
    }
    rep.finish();
    let mut out = Outcome::default();
    out.push("identity-check", rep, false);
    Ok(out)
}

fn reconstruct(cfg: &Config) -> Result<Outcome, RunError> {
    let r = &cfg.reconstruct;
    let spec = spec_of(&r.grid)?;
    let born = BornConfig { t_end: r.t_end, steps: r.steps, born_threshold: r.born_threshold };
    let mut rep = EstimateReport::new("reconstruct");
    rep.grids.push(spec);
    rep.param("radius", r.radius);
    rep.param("epsilons", r.epsilons.clone());
    rep.param("t_end", r.t_end);
    rep.param("steps", r.steps as u64);
    let mut samples = String::from("eps,xi,amplitude_re,amplitude_im,truth_re,truth_im\n");
    let mut errs = Vec::new();
    let mut all_born = true;
    for &eps in &r.epsilons {
        let v = bump(BumpBlock { amp: eps, width: r.width }, r.t_end);
        let rec = reconstruct_potential(&v, spec, r.radius, &born, true).map_err(config_err)?;
        let err = rec.rel_error.unwrap_or(f64::NAN);
        errs.push(err);
        all_born &= rec.born_regime;
        for s in &rec.samples {
            let xi: Vec<String> = s.xi.iter().map(|&x| num(x)).collect();
            let t = s.truth.unwrap_or_default();
            samples.push_str(&format!(
                "{},{},{},{},{},{}\n",
                num(eps),
                xi.join(" "),
                num(s.amplitude.re),
                num(s.amplitude.im),
                num(t.re),
                num(t.im)
            ));
        }
        rep.records.push(
            Record::new(format!("eps={eps}"), None)
                .with("eps", eps)
                .with("rel_error", err)
                .with("born_indicator", rec.born_indicator)
                .with("born_regime", rec.born_regime)
                .with("samples", rec.samples.len() as u64)
                .with("v_est_hash", data_hash(&rec.v_est.data)),
        );
    }
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    rep.check(Check::at_most("largest relative error", worst, r.max_error));
    if errs.len() > 1 {
        rep.check(Check::holds("error decreases with ε", errs.windows(2).all(|w| w[1] < w[0])));
    }
    rep.check(Check::holds("all samples in the Born regime", all_born));
    rep.finish();
    let mut out = Outcome::default();
    out.push("reconstruct", rep, false);
    out.artifacts.push(("reconstruct-samples.csv".into(), samples));
    Ok(out)
}

fn counterexample_sweep(cfg: &Config) -> Result<Outcome, RunError> {
    let x = &cfg.counterexample_sweep;
    let sweep = EmbeddingSweep {
        rhos: x.rhos.clone(),
        n: x.n,
        q: exponent(&x.q_dual)?,
        r: exponent(&x.r_dual)?,
        grid: MemberGrid {
            box_time: x.member_box_time,
            box_space: x.member_box_space,
            pts_time: x.member_pts_time,
            pts_space: x.member_pts_space,
        },
        trace: TraceParams { pts: x.trace_pts, half_width: x.trace_half_width, delta_min: x.delta_min },
        control_width: x.control_width,
        threshold: x.threshold,
        comparability: x.comparability,
        control_spread: x.control_spread,
        scaling_tol: x.scaling_tol,
    };
    let rep = embedding_ratio_sweep(&sweep).map_err(config_err)?;
    let mut out = Outcome::default();
    for family in ["shifted", "centered", "control"] {
        let sub = EstimateReport {
            records: rep
                .records
                .iter()
                .filter(|r| r.values.get("family") == Some(&Value::String(family.into())))
                .cloned()
                .collect(),
            ..rep.clone()
        };
        out.artifacts.push((
            format!("counterexample-{family}.csv"),
            columns_csv(&sub, &["rho", "mixed_norm", "bourgain_norm", "ratio"]),
        ));
    }
    out.push("counterexample", rep, false);

    let spec = spec_of(&x.smoothing_grid)?;
    let fam = FamilySpec { count: x.smoothing_family_count, normalized: false, ..FamilySpec::default() };
    let samples: Vec<Field> = standard_family(spec.n, &fam, cfg.seed).iter().map(|(_, p)| p.sample(spec)).collect();
    let mut ls = local_smoothing_check(&samples, &x.smoothing_nus, x.smoothing_t_end, x.smoothing_radius, x.smoothing_max_spread)
        .map_err(config_err)?;
    ls.param("seed", cfg.seed);
    ls.param("family", serde_json::to_value(&fam).expect("family serializes"));
    out.push("local-smoothing", ls, false);
    Ok(out)
}
