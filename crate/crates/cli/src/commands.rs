use std::path::Path;
use std::sync::Arc;

use cns_core::cns::{ablate_schedule, build_schedule, cns_sample_chains, CnsSchedule};
use cns_core::diagnostics::svg::{heatmap, line_chart, Series};
use cns_core::diagnostics::{energy_drift, noise_persistence, null_cosines, spectral_gap};
use cns_core::gamma::{compute_gamma, load_gamma, save_gamma, write_band_table};
use cns_core::interpolant::{CleanShrink, RadialPull, ScoreError, ScoreShrink};
use cns_core::rng::{chain_rng, root_rng};
use cns_core::solvers::store::{read_fields, write_fields, write_trajectory};
use cns_core::solvers::{
    sample_chains, terminals, Inits, MbmNoise, Record, SolverConfig, Trajectory,
};
use cns_core::spectral::{build_band_map, psd};
use cns_core::{BandMap, Field, GaussianMixtureOracle, VelocityModel};

use crate::config::{Config, Method, Perturbation};
use crate::error::CliError;
use crate::manifest::RunRecorder;

/// Stream used for ablation transforms, apart from the per-chain streams.
const ABLATION_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

fn band_map(cfg: &Config, oracle: &GaussianMixtureOracle) -> Result<BandMap, CliError> {
    Ok(build_band_map(oracle.shape(), cfg.bands)?)
}

fn model_with(
    oracle: GaussianMixtureOracle,
    perturbation: Option<&Perturbation>,
    map: &BandMap,
) -> Result<Box<dyn VelocityModel>, CliError> {
    Ok(match perturbation {
        Some(p) => Box::new(CleanShrink::new(oracle, map.clone(), p.alphas.clone())?),
        None => Box::new(oracle),
    })
}

/// Reference set: `n` oracle draws from stream 0 of the run seed, which
/// chains never use.
fn target_set(oracle: &GaussianMixtureOracle, n: usize, seed: u64, rec: &mut RunRecorder, file: Option<&Path>) -> Result<Vec<Field>, CliError> {
    match file {
        Some(p) => {
            rec.input(p);
            Ok(read_fields(p)?)
        }
        None => {
            if n == 0 {
                return Err(CliError::Config("`target_samples` must be positive".into()));
            }
            let mut rng = root_rng(seed);
            Ok((0..n).map(|_| oracle.sample(&mut rng)).collect())
        }
    }
}

fn write_oracle(oracle: &GaussianMixtureOracle, rec: &mut RunRecorder) -> Result<(), CliError> {
    let text = serde_json::to_string(&oracle.to_spec()).expect("oracle serializes");
    rec.write_text("oracle.json", &(text + "\n"))
}

pub fn gen_gamma(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let gcfg = cfg.gamma_config()?;
    let oracle = cfg.oracle()?;
    let map = band_map(cfg, &oracle)?;
    let mut rec = RunRecorder::new("gen-gamma", out);
    let est = compute_gamma(&oracle, &gcfg, &map, "gaussian_mixture_oracle")?;
    let gamma_path = rec.output("gamma.csv");
    save_gamma(&est.matrix, &gamma_path)?;
    rec.output("gamma.meta.json");
    write_band_table(&rec.output("gamma_stderr.csv"), &est.matrix.times, &est.std_error)?;
    map.write_csv(&rec.output("band_map.csv"))?;
    write_oracle(&oracle, &mut rec)?;
    rec.write_text("gamma.svg", &heatmap("progress index per band", &est.matrix.values))?;
    rec.finish(cfg)?;
    Ok(())
}

fn load_inits(path: &Path, chains: usize, rec: &mut RunRecorder) -> Result<Vec<Field>, CliError> {
    rec.input(path);
    let inits = read_fields(path)?;
    if inits.len() != chains {
        return Err(CliError::Config(format!(
            "{}: {} initial states for {chains} chains",
            path.display(),
            inits.len()
        )));
    }
    Ok(inits)
}

pub fn sample(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let s = cfg.sample_section()?;
    let oracle = cfg.oracle()?;
    let map = band_map(cfg, &oracle)?;
    let mut rec = RunRecorder::new("sample", out);
    write_oracle(&oracle, &mut rec)?;
    let model = model_with(oracle, s.perturbation.as_ref(), &map)?;
    let record = if s.record_chains > 0 { Record::Full } else { Record::Endpoints };
    let solver = SolverConfig::new(s.scheme(), s.steps, cfg.seed)
        .with_record(record)
        .with_energy_scale(s.energy_scale);
    let init_store;
    let inits = match &s.init_file {
        Some(p) => {
            init_store = load_inits(p, s.chains, &mut rec)?;
            Inits::Given(&init_store)
        }
        None => Inits::White,
    };
    let diffusion = match s.method {
        Method::Ode => cns_core::solvers::DiffusionSpec::none(),
        _ => s.diffusion.clone(),
    };
    let trajectories: Vec<Trajectory> = match s.method {
        Method::Ode | Method::Sde => sample_chains(&*model, &diffusion, &solver, s.chains, inits)?,
        Method::Mbm => {
            let hurst = s.hurst.expect("validated");
            hurst.validate().map_err(|e| CliError::Config(e.to_string()))?;
            let solver = solver.with_noise(Arc::new(MbmNoise { schedule: hurst, map: map.clone() }));
            sample_chains(&*model, &diffusion, &solver, s.chains, inits)?
        }
        Method::Cns => {
            let schedule = match (&s.beta_file, &s.gamma_file) {
                (Some(p), _) => {
                    rec.input(p);
                    CnsSchedule::load_csv(p, &map)?
                }
                (None, Some(p)) => {
                    rec.input(p);
                    let gamma = load_gamma(p)?;
                    build_schedule(&gamma, &map, &s.relaxation, Some(s.steps))?
                }
                (None, None) => unreachable!("validated"),
            };
            schedule.save_csv(&rec.output("schedule.csv"))?;
            cns_sample_chains(&*model, &diffusion, &schedule, &map, &solver, s.chains, inits, s.whiten)?
        }
    };
    write_fields(&rec.output("samples.bin"), &terminals(&trajectories))?;
    let starts: Vec<Field> = trajectories.iter().map(|t| t.initial().clone()).collect();
    write_fields(&rec.output("inits.bin"), &starts)?;
    if trajectories.iter().all(|t| t.cumulative_noise.is_some()) {
        let injected: Vec<Field> = trajectories
            .iter()
            .map(|t| t.cumulative_noise.clone().expect("checked"))
            .collect();
        write_fields(&rec.output("injected.bin"), &injected)?;
    }
    for (i, t) in trajectories.iter().take(s.record_chains).enumerate() {
        let states = rec.output(&format!("trajectory_{i}.bin"));
        let energy = rec.output(&format!("trajectory_{i}_energy.csv"));
        write_trajectory(&states, &energy, t)?;
    }
    rec.finish(cfg)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

pub fn analyze(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let a = cfg.analyze_section()?;
    let oracle = cfg.oracle()?;
    let map = band_map(cfg, &oracle)?;
    let mut rec = RunRecorder::new("analyze", out);
    rec.input(&a.samples);
    let generated = read_fields(&a.samples)?;
    let target = target_set(&oracle, a.target_samples, cfg.seed, &mut rec, a.target.as_deref())?;
    let gap = spectral_gap(&generated, &target, &map)?;
    gap.write_csv(&rec.output("spectral_gap.csv"))?;
    if a.svg {
        let chart = line_chart(
            "radial power spectrum",
            "band radius",
            "log10 PSD",
            &[
                Series { name: "generated", x: &gap.radii, y: &gap.s_generated.iter().map(|v| v.log10()).collect::<Vec<_>>() },
                Series { name: "target", x: &gap.radii, y: &gap.s_target.iter().map(|v| v.log10()).collect::<Vec<_>>() },
            ],
        );
        rec.write_text("psd.svg", &chart)?;
    }
    if let Some(p) = &a.inits {
        rec.input(p);
        let inits = read_fields(p)?;
        let injected = match &a.injected {
            Some(q) => {
                rec.input(q);
                Some(read_fields(q)?)
            }
            None => None,
        };
        if inits.len() != generated.len() || injected.as_ref().is_some_and(|v| v.len() != generated.len()) {
            return Err(CliError::Config("inits, injected and samples must hold the same number of fields".into()));
        }
        let trajectories: Vec<Trajectory> = (0..generated.len())
            .map(|i| Trajectory {
                times: vec![0.0, 1.0],
                states: vec![inits[i].clone(), generated[i].clone()],
                increments: Vec::new(),
                cumulative_noise: injected.as_ref().map(|v| v[i].clone()),
                per_step_energy: Vec::new(),
            })
            .collect();
        let report = noise_persistence(&trajectories, &map)?;
        report.write_csv(&rec.output("persistence.csv"))?;
        let mut rng = chain_rng(cfg.seed, u64::MAX - 1);
        let (null_mean, null_sd) = null_cosines(&map, a.null_samples.max(2), &mut rng)?;
        let rows: Vec<Vec<f64>> = null_mean.iter().zip(&null_sd).map(|(m, s)| vec![*m, *s]).collect();
        let bands: Vec<f64> = (0..map.band_count()).map(|b| b as f64).collect();
        write_null_csv(&rec.output("persistence_null.csv"), &rows)?;
        if a.svg {
            let init: Vec<f64> = report.init_cosine.iter().map(|v| fmt_opt(*v)).collect();
            let mut series = vec![
                Series { name: "init vs final", x: &bands, y: &init },
                Series { name: "null mean", x: &bands, y: &null_mean },
            ];
            let inj: Vec<f64>;
            if let Some(v) = &report.injected_cosine {
                inj = v.iter().map(|c| fmt_opt(*c)).collect();
                series.push(Series { name: "injected vs final", x: &bands, y: &inj });
            }
            rec.write_text("cosine.svg", &line_chart("band cosine similarity", "band", "cosine", &series))?;
        }
    }
    if let Some(d) = &a.drift {
        let s_target = psd(&target, &map)?;
        let error: Box<dyn ScoreError> = match &d.error {
            crate::config::ErrorModel::ScoreShrink { alphas } => Box::new(ScoreShrink::new(map.clone(), alphas.clone())?),
            crate::config::ErrorModel::RadialPull { alphas } => {
                let noise = vec![1.0; map.band_count()];
                Box::new(RadialPull::new(map.clone(), alphas.clone(), &s_target, &noise)?)
            }
        };
        let record = energy_drift(&oracle, &*error, &d.diffusion, &map, &d.drift_config(cfg.seed))?;
        record.write_bands_csv(&rec.output("drift_bands.csv"))?;
        record.write_steps_csv(&rec.output("drift_steps.csv"))?;
    }
    rec.finish(cfg)?;
    Ok(())
}

fn write_null_csv(path: &Path, rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut text = String::from("band,null_mean,null_sd\n");
    for (b, r) in rows.iter().enumerate() {
        text.push_str(&format!("{b},{},{}\n", r[0], r[1]));
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn ablate(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let a = cfg.ablate_section()?;
    let oracle = cfg.oracle()?;
    let map = band_map(cfg, &oracle)?;
    let mut rec = RunRecorder::new("ablate", out);
    rec.input(&a.gamma_file);
    let gamma = load_gamma(&a.gamma_file)?;
    let base = build_schedule(&gamma, &map, &a.relaxation, Some(a.steps))?;
    let target = target_set(&oracle, a.target_samples, cfg.seed, &mut rec, a.target.as_deref())?;
    let model = model_with(oracle, a.perturbation.as_ref(), &map)?;
    let solver = SolverConfig::new(a.solver, a.steps, cfg.seed);
    let mut text = String::from("mode,log_mae,excluded_bands\n");
    for (j, mode) in a.modes.iter().enumerate() {
        let mut rng = chain_rng(cfg.seed.wrapping_add(ABLATION_SEED_OFFSET), j as u64);
        let schedule = ablate_schedule(&base, *mode, &map, &mut rng)?;
        let runs = cns_sample_chains(&*model, &a.diffusion, &schedule, &map, &solver, a.chains, Inits::White, a.whiten)?;
        let gap = spectral_gap(&terminals(&runs), &target, &map)?;
        text.push_str(&format!("{},{},{}\n", mode.label(), gap.log_mae, gap.excluded));
    }
    rec.write_text("ablation.csv", &text)?;
    rec.finish(cfg)?;
    Ok(())
}
