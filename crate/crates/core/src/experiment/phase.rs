//! Uniform vs adapted phase-transition sweeps.

use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use rayon::prelude::*;

use super::config::{CoherenceChoice, ExperimentConfig, NetSource, Scheme};
use crate::coherence::{coherence_exact_pieces, coherence_heuristic, CoherenceVector};
use crate::error::{Error, Result};
use crate::generative_model::{
    enumerate_pieces, lowpass_gaussian_init, random_gaussian_init, EnumerationMode,
    GenerativeNetwork,
};
use crate::io;
use crate::recovery::{complex_gaussian_noise, measure, recover, rre, RecoveryConfig};
use crate::rng;
use crate::sampling::{
    build_preconditioner, draw_block_plan, draw_plan, optimal_probabilities, ProbabilityVector,
};
use crate::transform::UnitaryOperator;
use crate::Real;

/// Recovery counts as successful below this relative error.
pub const SUCCESS_RRE: f64 = 3e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    /// 1-based trial number.
    pub trial: usize,
    pub scheme: String,
    pub m: usize,
    pub rre: f64,
    /// Squared objective, the quantity being minimised.
    pub objective: f64,
    /// Unsquared objective at the recovered code.
    pub eps_hat: f64,
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub scheme: String,
    pub m: usize,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub median_rre: f64,
    pub mean_rre: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseResults {
    /// Sorted by scheme (config order), `m`, then trial.
    pub rows: Vec<ResultRow>,
    pub schemes: Vec<String>,
    /// Coherences used by the adapted scheme, if any.
    pub coherence: Option<CoherenceVector<f64>>,
}

impl PhaseResults {
    /// Median and mean rre and the success proportion per (scheme, m).
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut out: Vec<SummaryRow> = Vec::new();
        for row in &self.rows {
            match out.last_mut() {
                Some(s) if s.scheme == row.scheme && s.m == row.m => {
                    s.trials += 1;
                    s.successes += row.success as usize;
                }
                _ => out.push(SummaryRow {
                    scheme: row.scheme.clone(),
                    m: row.m,
                    trials: 1,
                    successes: row.success as usize,
                    success_rate: 0.0,
                    median_rre: 0.0,
                    mean_rre: 0.0,
                }),
            }
        }
        for s in &mut out {
            let mut r: Vec<f64> = self
                .rows
                .iter()
                .filter(|row| row.scheme == s.scheme && row.m == s.m)
                .map(|row| row.rre)
                .collect();
            r.sort_by(f64::total_cmp);
            let n = r.len();
            s.median_rre = if n % 2 == 1 {
                r[n / 2]
            } else {
                0.5 * (r[n / 2 - 1] + r[n / 2])
            };
            s.mean_rre = r.iter().sum::<f64>() / n as f64;
            s.success_rate = s.successes as f64 / s.trials as f64;
        }
        out
    }

    /// Success proportion of `scheme` at `m`.
    pub fn success_rate(&self, scheme: &str, m: usize) -> Option<f64> {
        self.summary()
            .into_iter()
            .find(|s| s.scheme == scheme && s.m == m)
            .map(|s| s.success_rate)
    }
}

pub fn build_network(source: &NetSource, n_hint: Option<usize>) -> Result<GenerativeNetwork<f64>> {
    match source {
        NetSource::File(path) => io::read_network(path),
        NetSource::Gaussian { widths, seed } => random_gaussian_init(
            widths,
            n_hint.unwrap_or(*widths.last().unwrap_or(&0)),
            *seed,
        ),
        NetSource::Lowpass { widths, rows, seed } => lowpass_gaussian_init(
            widths,
            n_hint.unwrap_or(*widths.last().unwrap_or(&0)),
            *rows,
            *seed,
        ),
    }
}

/// Runs every (scheme, m, trial) cell. Trials are paired across schemes
/// and `m`: trial `t` uses the same signal, noise and recovery starts in
/// every cell, and plans for equal `m` share their uniform draws.
pub fn run_phase_transition(config: &ExperimentConfig) -> Result<PhaseResults> {
    config.validate()?;
    let net = build_network(&config.net, None)?;
    let n = net.output_dim();
    let op: UnitaryOperator<f64> = config.transform.build(n)?;
    let m_grid = config.m_grid_for(n);
    if let Some(&m) = m_grid.iter().find(|&&m| m % config.blocks != 0) {
        return Err(Error::Config(format!(
            "m = {m} is not a multiple of sampling.blocks = {}",
            config.blocks
        )));
    }

    let coherence = if config.schemes.contains(&Scheme::Adapted) {
        Some(match config.coherence {
            CoherenceChoice::Exact => {
                let pieces = enumerate_pieces(&net, EnumerationMode::Exhaustive)?;
                coherence_exact_pieces(&op, &pieces)?
            }
            CoherenceChoice::Heuristic { batch } => {
                coherence_heuristic(&net, &op, batch, rng::derive_seed(config.seed, &[1]))?
            }
        })
    } else {
        None
    };
    let mut distributions = Vec::new();
    for scheme in &config.schemes {
        let p = match scheme {
            Scheme::Uniform => ProbabilityVector::uniform(n)?,
            Scheme::Adapted => optimal_probabilities(coherence.as_ref().expect("computed above"))?,
            Scheme::Custom(path) => io::read_probabilities(io::open(path)?)?,
        };
        if p.len() != n {
            return Err(Error::DimensionMismatch {
                what: "probability vector",
                expected: n,
                got: p.len(),
            });
        }
        distributions.push((scheme.label(), p));
    }

    let fixed_signal = match (&config.signal_file, config.in_range) {
        (Some(path), false) => {
            let x = io::read_vector::<f64>(path)?;
            if x.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "signal",
                    expected: n,
                    got: x.len(),
                });
            }
            Some(x)
        }
        _ => None,
    };

    let cells: Vec<(usize, usize, usize)> = (0..distributions.len())
        .flat_map(|s| {
            m_grid
                .iter()
                .flat_map(move |&m| (0..config.trials).map(move |t| (s, m, t)))
        })
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(s, m, t)| -> Result<ResultRow> {
            let (label, p) = &distributions[s];
            let trial_seed = rng::derive_seed(config.seed, &[10, t as u64]);
            let x0 = match &fixed_signal {
                Some(x) => x.clone(),
                None => {
                    let mut r = rng::stream(trial_seed, 0);
                    let z: Vec<f64> = rng::gaussian_vec(&mut r, net.latent_dim());
                    net.forward(&z)?
                }
            };
            let cell_seed = rng::derive_seed(trial_seed, &[m as u64]);
            let plan = if config.blocks > 1 {
                draw_block_plan(p, config.blocks, m / config.blocks, cell_seed)?
            } else {
                draw_plan(p, m, cell_seed)?
            };
            let eta = if config.noise > 0.0 {
                complex_gaussian_noise(m, config.noise, rng::derive_seed(cell_seed, &[1]))
            } else {
                vec![Complex::default(); m]
            };
            let meas = measure(&x0, &plan, &op, &eta)?;
            let precond = build_preconditioner(&plan)?;
            let rc = RecoveryConfig {
                seed: rng::derive_seed(trial_seed, &[2]),
                ..config.recovery.clone()
            };
            let res = recover(&net, &op, &meas, &precond, &rc)?;
            let e = rre(&x0, &res.x_hat)?;
            Ok(ResultRow {
                trial: t + 1,
                scheme: label.clone(),
                m,
                rre: e,
                objective: res.eps_hat * res.eps_hat,
                eps_hat: res.eps_hat,
                success: e < SUCCESS_RRE,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseResults {
        rows,
        schemes: distributions.into_iter().map(|(l, _)| l).collect(),
        coherence,
    })
}

pub fn write_results<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "trial",
        "scheme",
        "m",
        "rre",
        "objective",
        "eps_hat",
        "success",
    ])?;
    for r in rows {
        wtr.write_record([
            r.trial.to_string(),
            r.scheme.clone(),
            r.m.to_string(),
            r.rre.to_text(),
            r.objective.to_text(),
            r.eps_hat.to_text(),
            (r.success as u8).to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_results<R: std::io::Read>(r: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let want = [
        "trial",
        "scheme",
        "m",
        "rre",
        "objective",
        "eps_hat",
        "success",
    ];
    if header != want {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header '{}'", want.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |what: &str| Error::Parse {
            line,
            msg: format!("invalid {what}"),
        };
        if rec.len() != want.len() {
            return Err(bad("field count"));
        }
        let num = |j: usize, what: &str| rec[j].parse::<f64>().map_err(|_| bad(what));
        rows.push(ResultRow {
            trial: rec[0].parse().map_err(|_| bad("trial"))?,
            scheme: rec[1].to_string(),
            m: rec[2].parse().map_err(|_| bad("m"))?,
            rre: num(3, "rre")?,
            objective: num(4, "objective")?,
            eps_hat: num(5, "eps_hat")?,
            success: match &rec[6] {
                "1" => true,
                "0" => false,
                _ => return Err(bad("success flag")),
            },
        });
    }
    Ok(rows)
}

pub fn write_summary<W: Write>(summary: &[SummaryRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "scheme",
        "m",
        "trials",
        "successes",
        "success_rate",
        "median_rre",
        "mean_rre",
    ])?;
    for s in summary {
        wtr.write_record([
            s.scheme.clone(),
            s.m.to_string(),
            s.trials.to_string(),
            s.successes.to_string(),
            s.success_rate.to_text(),
            s.median_rre.to_text(),
            s.mean_rre.to_text(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes `results.csv`, `summary.csv`, `coherence.csv` (when available)
/// and the plots into `dir`. Returns the files written.
pub fn write_outputs(results: &PhaseResults, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join("results.csv");
    write_results(&results.rows, io::create(&path)?)?;
    written.push(path);
    let path = dir.join("summary.csv");
    write_summary(&results.summary(), io::create(&path)?)?;
    written.push(path);
    if let Some(c) = &results.coherence {
        let path = dir.join("coherence.csv");
        io::write_coherence(c, io::create(&path)?)?;
        written.push(path);
    }
    written.extend(super::plot::emit_plots(results, dir)?);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn small_config() -> ExperimentConfig {
        let text = "\
net.widths = 2, 6, 16
m = 4, 16
trials = 3
coherence.method = exact
recovery.iterations = 400
recovery.lr = 0.01
recovery.restarts = 2
";
        super::super::config::parse_config(text, Path::new("")).unwrap()
    }

    #[test]
    fn rows_are_sorted_and_flags_consistent() {
        let res = run_phase_transition(&small_config()).unwrap();
        assert_eq!(res.rows.len(), 2 * 2 * 3);
        let keys: Vec<(usize, usize, usize)> = res
            .rows
            .iter()
            .map(|r| {
                let s = res.schemes.iter().position(|x| *x == r.scheme).unwrap();
                (s, r.m, r.trial)
            })
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        for r in &res.rows {
            assert_eq!(r.success, r.rre < SUCCESS_RRE);
            assert!((r.objective - r.eps_hat * r.eps_hat).abs() <= 1e-12 * r.objective.max(1.0));
        }
        assert!(res.coherence.is_some());
    }

    #[test]
    fn csv_round_trip() {
        let res = run_phase_transition(&small_config()).unwrap();
        let mut buf = Vec::new();
        write_results(&res.rows, &mut buf).unwrap();
        assert_eq!(read_results(&buf[..]).unwrap(), res.rows);
    }

    #[test]
    fn summary_statistics() {
        let row = |trial, rre: f64| ResultRow {
            trial,
            scheme: "uniform".into(),
            m: 8,
            rre,
            objective: 0.0,
            eps_hat: 0.0,
            success: rre < SUCCESS_RRE,
        };
        let res = PhaseResults {
            rows: vec![row(1, 1e-4), row(2, 0.5), row(3, 2e-3), row(4, 0.1)],
            schemes: vec!["uniform".into()],
            coherence: None,
        };
        let s = &res.summary()[0];
        assert_eq!(s.trials, 4);
        assert_eq!(s.successes, 2);
        assert_eq!(s.success_rate, 0.5);
        assert!((s.median_rre - 0.051).abs() < 1e-15);
        assert!((s.mean_rre - (1e-4 + 0.5 + 2e-3 + 0.1) / 4.0).abs() < 1e-15);
    }
}
