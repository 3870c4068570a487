//! Subcommand execution and CSV emission.
//!
//! All CSVs are UTF-8 with LF line endings and start with a `#`-prefixed
//! comment block carrying the build identifier, the seed and a full config
//! echo, so any output file can reproduce its run.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

use share_core::baselines::music_spectrum;
use share_core::compression::compress;
use share_core::eval::{
    aggregate, beampattern, flop_model, monte_carlo, Algorithm, MonteCarloRun, TrialRecord,
};
use share_core::geometry::linspace;
use share_core::share::share_estimate;
use share_core::signal::synthesize;
use share_core::{baselines, EstimateSet, Scenario, SourceTruth, Spectrum1D};

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    /// Normalized array response over the angle grid -> spectrum.csv.
    Beampattern,
    /// Stage-1 combined spectrum of one synthesized trial -> spectrum.csv.
    Spectrum,
    /// Single-trial estimates -> estimates.csv (optionally the MUSIC
    /// pseudo-spectrum -> music_spectrum.csv).
    Estimate { dump_music_spectrum: bool },
    /// Monte Carlo benchmark -> metrics.csv.
    MonteCarlo,
    /// FLOP cost model -> flops.csv.
    Flops,
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub trials: Option<usize>,
    pub snr_db: Option<f64>,
    pub noiseless: bool,
}

pub fn apply_overrides(cfg: &mut RunConfig, ov: &Overrides) {
    if let Some(trials) = ov.trials {
        cfg.trials = trials;
    }
    if let Some(snr) = ov.snr_db {
        cfg.snr_db = snr;
        cfg.noiseless = false;
    }
    if ov.noiseless {
        cfg.noiseless = true;
    }
}

fn comment_header(cfg: &RunConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "# build = {} {}\n",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION")
    ));
    out.push_str(&format!("# seed = {}\n", cfg.seed));
    out.push_str("# config-begin\n");
    for line in cfg.to_config_text().lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str("# config-end\n");
    out
}

fn write_csv(path: &Path, cfg: &RunConfig, header: &str, rows: &[String]) -> anyhow::Result<()> {
    let mut buf = String::new();
    buf.push_str(&comment_header(cfg));
    buf.push_str(header);
    buf.push('\n');
    for row in rows {
        buf.push_str(row);
        buf.push('\n');
    }
    let mut file =
        fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    file.write_all(buf.as_bytes())
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn spectrum_rows(spec: &Spectrum1D) -> Vec<String> {
    spec.angles_deg
        .iter()
        .zip(spec.values.iter())
        .map(|(th, v)| format!("{th},{v}"))
        .collect()
}

fn metrics_rows(records: &[TrialRecord]) -> Vec<String> {
    records
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                r.trial,
                r.algorithm,
                r.snr_db,
                r.l,
                r.k,
                r.theta_rmse_deg,
                r.range_rmse_m,
                r.pos_rmse_m,
                u8::from(r.failed)
            )
        })
        .collect()
}

fn single_trial_scenario(cfg: &RunConfig) -> anyhow::Result<Scenario> {
    let sources = cfg
        .scenario_gen()
        .draw(cfg.seed)
        .context("drawing sources")?;
    Ok(Scenario {
        sources,
        n_snapshots: cfg.n,
        snr_db: cfg.effective_snr_db(),
        seed: cfg.seed,
    })
}

fn print_estimates(algorithm: &str, est: &EstimateSet, truth: &[SourceTruth]) {
    println!("{algorithm}: residual = {:.6e}", est.residual_norm);
    for (i, e) in est.entries.iter().enumerate() {
        println!("  source {i}: theta = {:.4} deg, range = {:.4} m", e.theta_deg, e.range_m);
    }
    if let Ok(matching) = share_core::eval::match_estimates(est, truth) {
        let rec = share_core::eval::rmse(est, truth, &matching);
        println!(
            "  vs truth: rmse_theta = {:.4} deg, rmse_range = {:.4} m, rmse_pos = {:.4} m",
            rec.rmse_theta_deg, rec.rmse_range_m, rec.rmse_pos_m
        );
    }
}

/// Runs one subcommand; every artifact lands in `out_dir`.
pub fn dispatch(cmd: &Subcommand, cfg: &RunConfig, out_dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    let array = cfg.array()?;
    let bank = cfg.bank()?;
    if !bank.is_orthogonal() {
        eprintln!(
            "warning: combiner weights are not orthogonal across instants; \
             estimators assume white effective noise and perform no whitening"
        );
    }

    match cmd {
        Subcommand::Beampattern => {
            let Some(&(theta, range)) = cfg.sources.first() else {
                bail!("beampattern needs a fixed source as target");
            };
            let target = SourceTruth::new(theta, range).context("beampattern target")?;
            let angles = linspace(cfg.grid_theta_min_deg, cfg.grid_theta_max_deg, cfg.beam_points);
            let spec = beampattern(&array, &target, &angles, target.r_m)?;
            let path = out_dir.join("spectrum.csv");
            write_csv(&path, cfg, "theta_deg,value", &spectrum_rows(&spec))?;
            println!("wrote {}", path.display());
        }
        Subcommand::Spectrum => {
            let sc = single_trial_scenario(cfg)?;
            let (y, _) = synthesize(&array, &sc)?;
            let ytil = compress(&bank, &y)?;
            let spec =
                share_core::share::stage1_spectrum(&bank, &array, &ytil, &cfg.coarse_grid()?)?;
            let path = out_dir.join("spectrum.csv");
            write_csv(&path, cfg, "theta_deg,value", &spectrum_rows(&spec))?;
            println!("wrote {}", path.display());
        }
        Subcommand::Estimate { dump_music_spectrum } => {
            let sc = single_trial_scenario(cfg)?;
            let (y, _) = synthesize(&array, &sc)?;
            let ytil = compress(&bank, &y)?;
            let grid = cfg.global_grid()?;
            let l = sc.sources.len();

            let mut rows = Vec::new();
            for algo in &cfg.algorithms {
                let est = match algo {
                    Algorithm::Share => {
                        share_estimate(&bank, &array, &ytil, &cfg.share_params()?)?
                    }
                    Algorithm::Omp2d => {
                        baselines::omp2d_estimate(&bank, &array, &ytil, &grid, l)?
                    }
                    Algorithm::Music2d => baselines::music2d_estimate(&array, &y, &grid, l)?,
                };
                print_estimates(algo.tag(), &est, &sc.sources);
                for (i, e) in est.entries.iter().enumerate() {
                    rows.push(format!("{},{},{},{}", algo.tag(), i, e.theta_deg, e.range_m));
                }
            }
            let path = out_dir.join("estimates.csv");
            write_csv(&path, cfg, "algorithm,source_index,theta_deg,range_m", &rows)?;
            println!("wrote {}", path.display());

            if *dump_music_spectrum {
                let spec = music_spectrum(&array, &y, &grid, l)?;
                let mut rows = Vec::with_capacity(spec.theta_deg.len() * spec.range_m.len());
                for (it, th) in spec.theta_deg.iter().enumerate() {
                    for (ir, r) in spec.range_m.iter().enumerate() {
                        rows.push(format!("{th},{r},{}", spec.value(it, ir)));
                    }
                }
                let path = out_dir.join("music_spectrum.csv");
                write_csv(&path, cfg, "theta_deg,range_m,value", &rows)?;
                println!("wrote {}", path.display());
            }
        }
        Subcommand::MonteCarlo => {
            let run = MonteCarloRun {
                cfg: array,
                bank,
                scenario: cfg.scenario_gen(),
                n_snapshots: cfg.n,
                snr_db: cfg.effective_snr_db(),
                share: cfg.share_params()?,
                global_grid: cfg.global_grid()?,
                algorithms: cfg.algorithms.clone(),
                trials: cfg.trials,
                base_seed: cfg.seed,
            };
            let records = monte_carlo(&run)?;
            let path = out_dir.join("metrics.csv");
            write_csv(
                &path,
                cfg,
                "trial,algorithm,snr_db,L,K,theta_rmse_deg,range_rmse_m,pos_rmse_m,failed",
                &metrics_rows(&records),
            )?;
            for algo in &cfg.algorithms {
                let agg = aggregate(&records, *algo, "run");
                println!(
                    "{}: trials = {}, failures = {}, rmse_theta = {:.4} deg, rmse_range = {:.4} m, rmse_pos = {:.4} m",
                    agg.algorithm, agg.trials, agg.failures, agg.rmse_theta_deg, agg.rmse_range_m, agg.rmse_pos_m
                );
            }
            println!("wrote {}", path.display());
        }
        Subcommand::Flops => {
            let estimates = flop_model(&cfg.flop_params())?;
            let rows: Vec<String> = estimates
                .iter()
                .map(|e| format!("{},{}", e.algorithm, e.flops))
                .collect();
            let path = out_dir.join("flops.csv");
            write_csv(&path, cfg, "algorithm,flops", &rows)?;
            for e in &estimates {
                println!("{}: {:.3e} flops", e.algorithm, e.flops);
            }
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

/// Convenience wrapper returning the process exit code instead of an error.
pub fn dispatch_exit_code(cmd: &Subcommand, cfg: &RunConfig, out_dir: &PathBuf) -> i32 {
    match dispatch(cmd, cfg, out_dir) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    }
}
