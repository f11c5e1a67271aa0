//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::ao::RegionPoint;
use crate::error::{Error, Result};
use crate::io::{write_region_csv, write_trace, Manifest};
use crate::region::{solve_point, sweep_region, tdma_timesharing, Access, SchemeConfig, SweepPoint};
use crate::scenario::{available_realizations, load_fixed_realization, ChannelSource, ScenarioConfig};
use crate::validate::{run_suite, SUITES};

#[derive(Parser, Debug)]
#[command(name = "rate-region", version, about = "Rate regions of RIS-assisted broadcast channels with IQI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep weight vectors for one or more schemes and write a CSV.
    Region {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Comma-separated scheme labels (PT, IT, PR, IR, *_IR, TS).
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<SchemeConfig>>,
        #[arg(long)]
        alpha_points: Option<usize>,
        #[arg(long)]
        ts_points: Option<usize>,
        /// Also run the RIS-enabled variant of every listed scheme.
        #[arg(long)]
        ris: bool,
        #[arg(long)]
        out: PathBuf,
        /// Directory for per-point objective traces.
        #[arg(long)]
        traces: Option<PathBuf>,
        /// Defaults to the CSV path with a `.manifest.json` extension.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Solve one weight vector for one scheme and print the rates.
    SinglePoint {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        scheme: SchemeConfig,
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run invariant suites and print a pass/fail summary.
    Validate {
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Print the shipped channel realizations.
    Fixtures {
        #[arg(long)]
        name: Option<String>,
    },
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// TOML configuration, or a JSON run manifest to replay.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shipped realization name (C1..C5).
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    power_db: Option<f64>,
    #[arg(long)]
    ris_elements: Option<usize>,
    /// Use the configured IQI instead of perfect transceivers.
    #[arg(long)]
    iqi: bool,
    #[arg(long)]
    seed: Option<u64>,
}

const DEFAULT_RIS_ELEMENTS: usize = 16;

impl ScenarioArgs {
    fn resolve(&self) -> Result<ScenarioConfig> {
        let mut config = match &self.config {
            Some(path) if path.extension().is_some_and(|e| e == "json") => Manifest::read(path)?.scenario()?,
            Some(path) => ScenarioConfig::from_toml(&fs::read_to_string(path)?)?,
            None => ScenarioConfig::fixed(self.scenario.as_deref().unwrap_or("C1")),
        };
        if let (Some(name), Some(_)) = (&self.scenario, &self.config) {
            config.channels = ChannelSource::Fixed {
                realization: name.clone(),
                seed: self.seed.unwrap_or(0),
            };
        }
        if let Some(p) = self.power_db {
            config.power_db = p;
        }
        if let Some(n) = self.ris_elements {
            config.ris_elements = n;
        }
        if self.iqi {
            config.impaired = true;
        }
        if let Some(s) = self.seed {
            match &mut config.channels {
                ChannelSource::Fixed { seed, .. } | ChannelSource::Generative { seed, .. } => *seed = s,
            }
            config.ao.seed = s;
        }
        config.validate()?;
        Ok(config)
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Region {
            scenario,
            schemes,
            alpha_points,
            ts_points,
            ris,
            out,
            traces,
            manifest,
        } => {
            let mut config = scenario.resolve()?;
            if let Some(s) = schemes {
                config.sweep.schemes = s;
            }
            if ris {
                let extra: Vec<SchemeConfig> = config
                    .sweep
                    .schemes
                    .iter()
                    .filter(|s| !s.ris)
                    .map(|s| SchemeConfig { ris: true, ..*s })
                    .filter(|s| !config.sweep.schemes.contains(s))
                    .collect();
                config.sweep.schemes.extend(extra);
                if config.ris_elements == 0 {
                    config.ris_elements = DEFAULT_RIS_ELEMENTS;
                }
            }
            if let Some(n) = alpha_points {
                config.sweep.alpha_points = n;
            }
            if let Some(n) = ts_points {
                config.sweep.ts_points = n;
            }
            config.validate()?;
            run_region(&config, &out, traces.as_deref(), manifest)?;
            Ok(0)
        }
        Command::SinglePoint {
            scenario,
            scheme,
            alpha,
            trace,
        } => {
            let config = scenario.resolve()?;
            check_ris(&config, &[scheme])?;
            let scene = config.scene()?;
            let profile = config.profile(&scene);
            if scheme.access == Access::TdmaTs {
                let ts = tdma_timesharing(&scene, &profile, scheme.ris, config.sweep.ts_points, &config.ao)?;
                println!("single-user rates {:?}", ts.single_user);
                println!("objective {}", ts.objective(&alpha));
                return Ok(0);
            }
            let out = solve_point(&scene, &profile, &scheme, &alpha, &config.ao)?;
            println!("scheme {scheme}");
            println!("objective {}", out.state.objective);
            println!("rates {:?}", out.rates);
            println!("private {:?} common {}", out.private, out.common);
            println!("converged {} after {} iterations", out.converged(), out.state.iteration);
            if let Some(path) = trace {
                write_trace(&path, &out.state.trace)?;
            }
            Ok(0)
        }
        Command::Validate { suite } => {
            if !SUITES.contains(&suite.as_str()) {
                return Err(Error::Config(format!("unknown suite `{suite}` (available: {})", SUITES.join(", "))));
            }
            let checks = run_suite(&suite)?;
            let mut failed = 0;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            println!("{} passed, {failed} failed", checks.len() - failed);
            Ok(i32::from(failed > 0))
        }
        Command::Fixtures { name } => {
            let names: Vec<String> = match name {
                Some(n) => vec![n],
                None => available_realizations().iter().map(|s| s.to_string()).collect(),
            };
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            for n in names {
                let scene = load_fixed_realization(&n)?;
                writeln!(w, "{n}")?;
                for (k, f) in scene.direct.iter().enumerate() {
                    writeln!(w, "  F{}:", k + 1)?;
                    for row in f.row_iter() {
                        let cells: Vec<String> = row.iter().map(|z| format!("{:+.4}{:+.4}i", z.re, z.im)).collect();
                        writeln!(w, "    {}", cells.join("  "))?;
                    }
                }
            }
            Ok(0)
        }
    }
}

fn check_ris(config: &ScenarioConfig, schemes: &[SchemeConfig]) -> Result<()> {
    if config.ris_elements == 0 {
        if let Some(s) = schemes.iter().find(|s| s.ris) {
            return Err(Error::Config(format!("{s} needs an RIS; set --ris-elements")));
        }
    }
    Ok(())
}

/// Runs every configured scheme and writes the CSV, traces and manifest.
pub fn run_region(config: &ScenarioConfig, out: &Path, traces: Option<&Path>, manifest: Option<PathBuf>) -> Result<Vec<RegionPoint>> {
    check_ris(config, &config.sweep.schemes)?;
    let scene = config.scene()?;
    let profile = config.profile(&scene);
    let mut rows: Vec<SweepPoint> = Vec::new();
    for scheme in &config.sweep.schemes {
        let points = if scheme.access == Access::TdmaTs {
            tdma_timesharing(&scene, &profile, scheme.ris, config.sweep.ts_points, &config.ao)?.segment
        } else {
            sweep_region(&scene, &profile, scheme, config.sweep.alpha_points, &config.ao)?
        };
        for p in points.iter().filter(|p| p.error.is_some()) {
            eprintln!("warning: {} at alpha {:?}: {}", scheme, p.point.alpha, p.error.as_deref().unwrap_or(""));
        }
        rows.extend(points);
    }
    let points: Vec<RegionPoint> = rows.iter().map(|r| r.point.clone()).collect();
    write_region_csv(fs::File::create(out)?, &points)?;

    let mut outputs = vec![out.to_path_buf()];
    if let Some(dir) = traces {
        fs::create_dir_all(dir)?;
        for (i, r) in rows.iter().enumerate().filter(|(_, r)| !r.trace.is_empty()) {
            let path = dir.join(format!("{}_{i:03}.txt", r.point.scheme));
            write_trace(&path, &r.trace)?;
            outputs.push(path);
        }
    }
    let manifest_path = manifest.unwrap_or_else(|| out.with_extension("manifest.json"));
    Manifest::new(config, outputs)?.write(&manifest_path)?;
    Ok(points)
}
