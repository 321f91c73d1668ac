use std::path::Path;
use std::time::Instant;

use serde_json::json;

use super::config::ExperimentConfig;
use super::io::{write_dump, Table};
use super::report::{CriterionResult, ExperimentReport, SeedLayout};
use super::suites::{
    besov_ratios, cauchy_gff, cauchy_ou, decomposition_order, heat_bounds, invariance_run, partition_check,
    sqe_level_gaps, CauchySweep, LevelGaps,
};
use crate::dynamics::{solve_sqe_full, Equation, SqeConfig};
use crate::error::{Error, Result};
use crate::measures::{Estimate, Proposal, WeightedEnsemble};
use crate::random::{gff_sample, ou_path, purpose, RngStream};
use crate::spectral::{sobolev_norm, SpectralField};
use crate::wick::{CutoffProfile, WickParams};

/// Exit statuses of the command-line driver.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const CRITERION_FAILURE: i32 = 2;
    pub const CONFIG_ERROR: i32 = 3;
    pub const NUMERIC_GUARD: i32 = 4;
    /// I/O and anything else unexpected.
    pub const OTHER: i32 = 1;
}

/// Maps an error to its exit status.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::InvalidParameter { .. }
        | Error::InvalidGrid(_)
        | Error::LevelTooHigh { .. }
        | Error::TruncationTail { .. }
        | Error::InvalidTimes => exit::CONFIG_ERROR,
        Error::Overflow { .. }
        | Error::LowEss { .. }
        | Error::StepStability { .. }
        | Error::NonFinite(..)
        | Error::NegativeForcing { .. } => exit::NUMERIC_GUARD,
        _ => exit::OTHER,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    WickConverge,
    Sqe,
    Invariance,
    NormsBench,
    SampleGff,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::WickConverge => "wick-converge",
            Command::Sqe => "sqe",
            Command::Invariance => "invariance",
            Command::NormsBench => "norms-bench",
            Command::SampleGff => "sample-gff",
        }
    }

    /// Replica count used when neither the file nor the flags set one.
    pub fn default_replicas(&self) -> usize {
        match self {
            Command::WickConverge => 100,
            Command::Sqe => 50,
            Command::Invariance => 1000,
            Command::NormsBench => 200,
            Command::SampleGff => 100,
        }
    }
}

/// A finished command: the report plus the files it wants written.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub report: ExperimentReport,
    pub tables: Vec<Table>,
    pub dumps: Vec<(String, Vec<SpectralField>, RngStream)>,
}

impl Outcome {
    fn new(report: ExperimentReport) -> Self {
        Self {
            report,
            tables: Vec::new(),
            dumps: Vec::new(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.report.passed() {
            exit::PASS
        } else {
            exit::CRITERION_FAILURE
        }
    }

    /// Writes `report.json`, every table as CSV and every dump as `.bin`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.report.write(&dir.join("report.json"))?;
        for t in &self.tables {
            t.write(dir)?;
        }
        for (name, fields, stream) in &self.dumps {
            write_dump(&dir.join(format!("{name}.bin")), fields, stream)?;
        }
        Ok(())
    }
}

fn seeds(config: &ExperimentConfig, purposes: &[(&str, u32)], replicas: usize) -> SeedLayout {
    SeedLayout {
        seed: config.seed,
        purposes: purposes.iter().map(|(n, p)| (n.to_string(), *p)).collect(),
        replicas,
    }
}

/// Runs `command` and fills in the wall-clock time.
pub fn run_command(command: Command, config: &ExperimentConfig) -> Result<Outcome> {
    config.validate()?;
    let start = Instant::now();
    let mut out = match command {
        Command::WickConverge => cmd_wick_converge(config),
        Command::Sqe => cmd_sqe(config),
        Command::Invariance => cmd_invariance(config),
        Command::NormsBench => cmd_norms_bench(config),
        Command::SampleGff => cmd_sample_gff(config),
    }?;
    out.report.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(out)
}

fn cauchy_table(name: &str, sweep: &CauchySweep) -> Table {
    let mut t = Table::new(name, &CauchySweep::COLUMNS);
    for r in &sweep.rows {
        t.push(r.clone());
    }
    t
}

/// Level-to-level Cauchy decay of the Wick exponential for GFF draws and along
/// OU paths, `N = 1..=wick.N`, common noise across levels.
pub fn cmd_wick_converge(config: &ExperimentConfig) -> Result<Outcome> {
    if config.level < 3 {
        return Err(Error::Config("wick-converge sweeps N = 1..wick.N and needs wick.N >= 3".into()));
    }
    let grid = config.grid()?;
    let replicas = config.replicas_or(Command::WickConverge.default_replicas());
    let gff = cauchy_gff(&grid, config.alpha, config.beta, config.level, replicas, config.seed)
        .map_err(|e| match e {
            Error::LevelTooHigh { .. } | Error::TruncationTail { .. } => {
                Error::Config(format!("both profiles must resolve wick.N on grid.M: {e}"))
            }
            e => e,
        })?;
    let path = cauchy_ou(
        &grid,
        config.alpha,
        config.beta,
        config.level,
        config.horizon,
        config.dt,
        replicas,
        config.seed,
    )?;
    let mut report = ExperimentReport::new(
        Command::WickConverge.name(),
        config,
        seeds(
            config,
            &[
                ("gff", purpose::ENSEMBLE),
                ("ou-initial", purpose::INITIAL_DATUM),
                ("ou-noise", purpose::DRIVING_NOISE),
            ],
            replicas,
        ),
    );
    if config.alpha == 0.0 {
        report.push(CriterionResult::at_most(
            "alpha-zero-exact",
            gff.max_abs_difference.max(path.max_abs_difference),
            0.0,
            "all level differences vanish",
        ));
    } else {
        report.push(CriterionResult::at_least("gff-cauchy-rate", gff.lambda, 0.2, "fitted lambda, sharp profile"));
        report.push(CriterionResult::at_most(
            "cross-profile-gap",
            gff.cross_profile_gap.mean,
            gff.gaps[0].mean,
            format!("sharp vs smooth at N={} against sharp N=1 -> 2", config.level),
        ));
        report.push(CriterionResult::new(
            "path-cauchy-rate",
            path.lambda > 0.0,
            path.lambda,
            0.0,
            "fitted lambda in L2([0,T]; H^-beta)",
        ));
    }
    report.body.estimates = json!({ "gff": gff, "path": path });
    let mut out = Outcome::new(report);
    out.tables.push(cauchy_table("wick_gff_gaps", &gff));
    let mut t = Table::new("wick_path_gaps", &["level", "mean_gap_sq", "std_error"]);
    for (n, e) in path.levels.iter().zip(&path.gaps) {
        t.push(vec![*n as f64, e.mean, e.std_error]);
    }
    out.tables.push(t);
    Ok(out)
}

fn gap_table(gaps: &LevelGaps) -> Table {
    let mut t = Table::new("sqe_level_gaps", &LevelGaps::COLUMNS);
    for r in &gaps.rows {
        t.push(r.clone());
    }
    t
}

/// Full cutoff equation across `N = 1..=wick.N` with common noise, and the
/// splitting residual at `sqe.dt` and `sqe.dt / 2` at level `wick.N`.
pub fn cmd_sqe(config: &ExperimentConfig) -> Result<Outcome> {
    let grid = config.grid()?;
    let replicas = config.replicas_or(Command::Sqe.default_replicas());
    let params = config.params()?;
    let mut sqe = SqeConfig::new(config.horizon, config.dt, Equation::Full, params, config.profile()?);
    sqe.scheme = config.scheme;
    sqe.epsilon = config.epsilon;
    sqe.validate().map_err(|e| Error::Config(e.to_string()))?;
    let mut report = ExperimentReport::new(
        Command::Sqe.name(),
        config,
        seeds(
            config,
            &[("initial", purpose::INITIAL_DATUM), ("noise", purpose::DRIVING_NOISE)],
            replicas,
        ),
    );
    let mut out_tables = Vec::new();
    let gaps = if config.level >= 2 {
        let g = sqe_level_gaps(
            &grid,
            config.alpha,
            config.level,
            config.horizon,
            config.dt,
            config.epsilon,
            replicas,
            config.seed,
        )?;
        report.push(CriterionResult::new(
            "level-gaps-decreasing",
            g.strictly_decreasing,
            g.gaps.last().map_or(0.0, |e| e.mean),
            g.gaps.first().map_or(0.0, |e| e.mean),
            format!("{} of {} replicas hit a numeric guard", g.failed_replicas, replicas),
        ));
        out_tables.push(gap_table(&g));
        Some(g)
    } else {
        None
    };
    let decomposition = decomposition_order(
        &grid,
        config.alpha,
        config.level,
        config.horizon,
        config.dt,
        config.epsilon,
        replicas,
        config.seed,
    )?;
    if config.alpha == 0.0 {
        let phi = gff_sample(&grid, &RngStream::new(config.seed, purpose::INITIAL_DATUM));
        let stream = RngStream::new(config.seed, purpose::DRIVING_NOISE);
        let path = solve_sqe_full(&phi, &sqe, &stream)?;
        let ou = ou_path(&phi, &path.times, &stream)?;
        let table = sqe.psi.multiplier(config.level, &grid)?;
        let err = path
            .states
            .iter()
            .zip(ou.states())
            .fold(0.0f64, |m, (s, x)| m.max(s.max_abs_diff(&x.apply_multiplier(&table))));
        report.push(CriterionResult::at_most("alpha-zero-exact-ou", err, 1e-12, "P_N X against the solver"));
    } else {
        report.push(CriterionResult::at_least(
            "decomposition-order",
            decomposition.order,
            0.9,
            format!("residual {:.3e} -> {:.3e}", decomposition.residual.mean, decomposition.residual_half.mean),
        ));
    }
    report.body.estimates = json!({
        "level_gaps": gaps.as_ref().map(|g| json!({ "levels": g.levels, "gaps": g.gaps, "failed_replicas": g.failed_replicas })),
        "decomposition": decomposition,
    });
    report.body.replicas = json!({ "sup_gaps": gaps.as_ref().map(|g| &g.per_replica) });
    let mut out = Outcome::new(report);
    out.tables = out_tables;
    Ok(out)
}

/// Invariance of `mu_N` under the projected dynamics with the `C_N / 2`
/// control, plus partition-function and ESS diagnostics.
pub fn cmd_invariance(config: &ExperimentConfig) -> Result<Outcome> {
    let grid = config.grid()?;
    let replicas = config.replicas_or(Command::Invariance.default_replicas());
    let ensemble_size = 4 * replicas;
    if config.cutoff != "sharp" {
        return Err(Error::Config("invariance runs with the sharp profile".into()));
    }
    let run = invariance_run(
        &grid,
        config.alpha,
        config.level,
        config.horizon,
        config.dt,
        config.epsilon,
        replicas,
        ensemble_size,
        config.alpha != 0.0,
        config.seed,
    )?;
    let partition = partition_check(&grid, config.alpha, config.level, ensemble_size, config.seed)?;
    let mut ess_trend = Vec::new();
    for alpha in [0.5, 1.0, 1.5] {
        let psi = CutoffProfile::sharp();
        let p = WickParams::new(alpha, config.level, WickParams::default_beta(alpha), &psi, &grid)?;
        let e = WeightedEnsemble::draw(
            &grid,
            &p,
            &psi,
            ensemble_size,
            Proposal::FreeField,
            &RngStream::new(config.seed, purpose::ENSEMBLE),
        )?;
        ess_trend.push((alpha, e.ess()));
    }
    let mut report = ExperimentReport::new(
        Command::Invariance.name(),
        config,
        seeds(
            config,
            &[
                ("proposal", purpose::PROPOSAL),
                ("resample", purpose::RESAMPLE),
                ("noise", purpose::DRIVING_NOISE),
                ("partition", purpose::ENSEMBLE),
            ],
            replicas,
        ),
    );
    report.push(CriterionResult::at_most("invariance-z", run.report.max_abs_z, 3.0, "max |z| over observables"));
    if let Some(c) = &run.control {
        report.push(CriterionResult::new(
            "negative-control",
            c.max_abs_z > 3.0,
            c.max_abs_z,
            3.0,
            "C_N/2 in the drift must be detected",
        ));
    }
    report.push(CriterionResult::at_most("weights-bounded", partition.max_weight, 1.0, "max RN weight"));
    let Estimate { mean, std_error, .. } = partition.estimate;
    report.push(CriterionResult::at_least(
        "partition-jensen",
        mean,
        partition.jensen_bound * (1.0 - 3.0 * std_error / mean),
        "Z_N >= e^{-4 pi^2}",
    ));
    report.body.estimates = json!({
        "ensemble_size": ensemble_size,
        "ess": run.ess,
        "invariance": run.report,
        "control": run.control,
        "partition": partition,
        "ess_free_field_by_alpha": ess_trend,
    });
    let mut out = Outcome::new(report);
    let mut t = Table::new("invariance_z", &["observable", "paired_mean", "paired_z", "adjusted_mean", "z"]);
    for (i, r) in run.report.results.iter().enumerate() {
        t.push(vec![i as f64, r.paired.mean, r.paired_z, r.adjusted.mean, r.z]);
    }
    out.tables.push(t);
    Ok(out)
}

/// Besov/Sobolev equivalence constants and heat-semigroup ratio sweeps.
pub fn cmd_norms_bench(config: &ExperimentConfig) -> Result<Outcome> {
    let grid = config.grid()?;
    let fields = config.replicas_or(Command::NormsBench.default_replicas());
    let besov = besov_ratios(&grid, &[-1.0, -0.5, 0.0, 0.5, 1.0]);
    let deltas = [0.0, 0.25, 0.5, 0.75, 1.0];
    let heat: Vec<_> = [-0.5, 0.0, 0.5]
        .iter()
        .map(|&s| heat_bounds(&grid, s, &deltas, fields, config.seed))
        .collect::<Result<_>>()?;
    let mut report = ExperimentReport::new(
        Command::NormsBench.name(),
        config,
        seeds(config, &[("fields", purpose::SCRATCH + 2)], fields),
    );
    let zero = SpectralField::zeros(&grid);
    report.push(CriterionResult::at_most("zero-field", sobolev_norm(&zero, -1.0) + sobolev_norm(&zero, 1.0), 0.0, ""));
    let besov_ok = besov.iter().all(|b| b.min >= b.lower_bound && b.max <= b.upper_bound);
    let worst = besov.iter().fold(0.0f64, |m, b| m.max(b.max / b.min));
    let bracket = besov.iter().fold(0.0f64, |m, b| m.max(b.upper_bound / b.lower_bound));
    report.push(CriterionResult::new(
        "besov-sobolev-bounded",
        besov_ok,
        worst,
        bracket,
        "max/min ratio over s against the derived bracket",
    ));
    let heat_ok = heat.iter().flat_map(|h| &h.sweeps).all(|s| {
        s.smoothing_max <= s.smoothing_bound * (1.0 + 1e-12) && s.difference_max <= s.difference_bound * (1.0 + 1e-12)
    });
    let worst_heat = heat
        .iter()
        .flat_map(|h| &h.sweeps)
        .fold(0.0f64, |m, s| m.max(s.smoothing_max / s.smoothing_bound).max(s.difference_max / s.difference_bound));
    report.push(CriterionResult::new("heat-ratios-bounded", heat_ok, worst_heat, 1.0, "measured / exact bound"));
    let semigroup = heat.iter().fold(0.0f64, |m, h| m.max(h.semigroup_error));
    report.push(CriterionResult::at_most("semigroup-law", semigroup, 1e-12, ""));
    report.body.estimates = json!({ "besov": besov, "heat": heat });
    let mut out = Outcome::new(report);
    let mut t = Table::new("besov_ratios", &["s", "min", "max", "lower_bound", "upper_bound"]);
    for b in &besov {
        t.push(vec![b.s, b.min, b.max, b.lower_bound, b.upper_bound]);
    }
    out.tables.push(t);
    let mut t = Table::new("heat_ratios", &["s", "delta", "smoothing_max", "smoothing_bound", "difference_max", "difference_bound"]);
    for s in heat.iter().flat_map(|h| &h.sweeps) {
        t.push(vec![s.s, s.delta, s.smoothing_max, s.smoothing_bound, s.difference_max, s.difference_bound]);
    }
    out.tables.push(t);
    Ok(out)
}

/// Draws GFF samples, dumps their coefficients and checks the pooled variance.
pub fn cmd_sample_gff(config: &ExperimentConfig) -> Result<Outcome> {
    let grid = config.grid()?;
    let count = config.replicas_or(Command::SampleGff.default_replicas());
    let stream = RngStream::new(config.seed, purpose::GFF_DUMP);
    let fields: Vec<SpectralField> = (0..count).map(|i| gff_sample(&grid, &stream.for_replica(i as u64))).collect();
    let mut t = Table::new("gff_samples", &["replica", "mean", "l2", "h_neg_eps", "normalized_energy"]);
    let modes = (grid.modes() * grid.modes()) as f64;
    let mut energies = Vec::new();
    let mut defect = 0.0f64;
    for (i, f) in fields.iter().enumerate() {
        let e = f.weighted_energy(|k2| 1.0 + k2) / modes;
        energies.push(e);
        defect = defect.max(f.hermitian_defect());
        t.push(vec![i as f64, f.mean(), sobolev_norm(f, 0.0), sobolev_norm(f, -config.epsilon), e]);
    }
    let pooled = Estimate::from_samples(&energies);
    let mut report = ExperimentReport::new(
        Command::SampleGff.name(),
        config,
        seeds(config, &[("gff", purpose::GFF_DUMP)], count),
    );
    report.push(CriterionResult::at_most(
        "pooled-variance",
        pooled.z_against(1.0).abs(),
        3.0,
        "mean of |u(k)|^2 (1 + |k|^2) over modes and samples",
    ));
    report.push(CriterionResult::at_most("hermitian", defect, 0.0, "max |u(-k) - conj u(k)|"));
    report.body.estimates = json!({ "pooled_normalized_energy": pooled });
    let mut out = Outcome::new(report);
    out.tables.push(t);
    out.dumps.push(("gff".into(), fields, stream));
    Ok(out)
}
