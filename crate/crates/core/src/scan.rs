//! Laser scans: one cascade per beam position on a shared equilibrium.

use std::io::Write;
use std::time::{Duration, Instant};

use log::{info, warn};
use rayon::prelude::*;

use crate::cascade::Equilibrium;
use crate::config::RunConfig;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "x0_scaled,x0_um,uD2_scaled,uD_volts,bounds_ok,iters_phip0";

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub x0: f64,
    pub x0_um: f64,
    /// NaN when the point failed.
    pub ud2: f64,
    pub ud_volts: f64,
    pub bounds_ok: bool,
    pub iters_phip0: usize,
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    /// One row per scan point in increasing x₀.
    pub rows: Vec<ScanRow>,
    /// (point index, x₀, error message)
    pub failures: Vec<(usize, f64, String)>,
    pub elapsed: Duration,
}

impl ScanResult {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
                r.x0, r.x0_um, r.ud2, r.ud_volts, r.bounds_ok, r.iters_phip0
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }

    pub fn all_bounds_ok(&self) -> bool {
        self.failures.is_empty() && self.rows.iter().all(|r| r.bounds_ok)
    }

    pub fn signal(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.ud2).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanOptions {
    /// Worker threads; 0 lets the pool decide, 1 runs serially.
    pub threads: usize,
    pub fail_fast: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { threads: 0, fail_fast: false }
    }
}

pub fn run_scan(config: &RunConfig, options: ScanOptions) -> Result<ScanResult> {
    let range = config
        .scan
        .ok_or_else(|| Error::Config("scan.start, scan.stop and scan.step are required for a scan".into()))?;
    scan_positions(config, &range.positions(), options)
}

/// Scans the given beam positions (scaled) in order.
pub fn scan_positions(config: &RunConfig, positions: &[f64], options: ScanOptions) -> Result<ScanResult> {
    let start = Instant::now();
    let grid = config.build_grid()?;
    let eq = Equilibrium::new(&grid, &config.model, &config.doping, &config.cascade)?;
    let d2 = config.model.delta * config.model.delta;
    let vth = config.scaled.thermal_voltage;

    let point = |x0: f64| eq.solve(&config.laser.at(x0));
    let outcomes: Vec<Result<_>> = if options.threads == 1 {
        positions.iter().map(|&x| point(x)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| positions.par_iter().map(|&x| point(x)).collect())
    };

    let mut rows = Vec::with_capacity(positions.len());
    let mut failures = Vec::new();
    for (k, (&x0, outcome)) in positions.iter().zip(outcomes).enumerate() {
        let x0_um = config.scaled.length_um(x0);
        match outcome {
            Ok(sol) => rows.push(ScanRow {
                x0,
                x0_um,
                ud2: sol.ud2,
                ud_volts: vth * d2 * sol.ud2,
                bounds_ok: sol.bounds_ok(),
                iters_phip0: sol.phip0_report.iterations,
            }),
            Err(e) => {
                warn!("scan point {k} (x0 = {x0}) failed: {e}");
                if options.fail_fast {
                    return Err(e);
                }
                failures.push((k, x0, e.to_string()));
                rows.push(ScanRow {
                    x0,
                    x0_um,
                    ud2: f64::NAN,
                    ud_volts: f64::NAN,
                    bounds_ok: false,
                    iters_phip0: 0,
                });
            }
        }
    }
    let elapsed = start.elapsed();
    info!("scan points={} failures={} elapsed={:?}", rows.len(), failures.len(), elapsed);
    Ok(ScanResult { rows, failures, elapsed })
}

/// Index of the largest non-constant DFT magnitude of `signal`.
pub fn dominant_frequency(signal: &[f64]) -> usize {
    let n = signal.len();
    let mean = signal.iter().sum::<f64>() / n as f64;
    (1..=n / 2)
        .map(|k| {
            let (re, im) = signal.iter().enumerate().fold((0.0, 0.0), |(re, im), (j, v)| {
                let a = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                (re + (v - mean) * a.cos(), im + (v - mean) * a.sin())
            });
            (k, re * re + im * im)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(0, |(k, _)| k)
}
