//! Command-line front end.
//!
//! Layout under `--out`: `design/`, `pattern/`, `capacity/`, `link/` and
//! `manifest.json`. Data files are deterministic; only the manifest
//! carries timing.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::beams::{BeamKind, BeamSpec};
use crate::capacity::{capacity_sweep, BeamSetEntry};
use crate::channel::SurfaceProfile;
use crate::error::{Error, Result};
use crate::farfield::{angle_grid, farfield_cut, isolation, main_lobe, MainLobe};
use crate::hologram::{design, excite, quantize, QuantizerSpec};
use crate::link::{run_link, Modulation};
use crate::output::{fmt_f64, write_csv, write_json, Column, CsvSchema, OutputSet, RunManifest};
use crate::scenario::{load_scenario, Scenario, ScenarioFile, DEFAULT_RADIUS_WAVELENGTHS};

#[derive(Debug, Parser)]
#[command(
    name = "holosim",
    version,
    about = "Holographic meta-surface link simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a scenario and list every violated invariant.
    Validate { scenario: PathBuf },
    /// Synthesise the phase-only hologram and write phase maps.
    Design {
        scenario: PathBuf,
        /// Phase quantizer resolution in bits.
        #[arg(long)]
        quantize: Option<u32>,
        #[arg(long, default_value_t = 0.0)]
        amplitude_loss_db: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Far-field cut and main lobe for each excited Tx.
    Pattern {
        scenario: PathBuf,
        /// Tx indices to excite (default: all).
        #[arg(long, value_delimiter = ',')]
        excite: Vec<usize>,
        #[arg(long)]
        quantize: Option<u32>,
        /// Use a plain mirror instead of the designed hologram.
        #[arg(long)]
        uniform_profile: bool,
        #[arg(long, default_value_t = -90.0, allow_hyphen_values = true)]
        min_deg: f64,
        #[arg(long, default_value_t = 90.0, allow_hyphen_values = true)]
        max_deg: f64,
        #[arg(long, default_value_t = 0.05)]
        step_deg: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Capacity versus SNR for several beam sets.
    Capacity {
        scenario: PathBuf,
        /// `START:STOP:STEP` in dB, inclusive.
        #[arg(long, default_value = "0:30:2", allow_hyphen_values = true)]
        snr: String,
        /// Semicolon-separated beam sets: `dir` or comma-separated modes.
        #[arg(long, default_value = "dir;-1,1", allow_hyphen_values = true)]
        modes: String,
        /// Pair counts to evaluate, comma-separated.
        #[arg(long, value_delimiter = ',')]
        pairs: Vec<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Monte-Carlo BER/EVM through the designed surface.
    Link {
        scenario: PathBuf,
        #[arg(long, default_value = "qpsk")]
        scheme: String,
        #[arg(long, default_value = "0:20:1", allow_hyphen_values = true)]
        snr: String,
        #[arg(long, default_value_t = 1_000_000)]
        bits: usize,
        /// Quantizer bits for the surface; 0 keeps continuous phase.
        #[arg(long, default_value_t = 2)]
        quantize: u32,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Isolation table: received power per Tx at each Rx.
    Report {
        scenario: PathBuf,
        #[arg(long)]
        quantize: Option<u32>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Sizes the global worker pool from `HOLOSIM_THREADS` (0 or unset means
/// one per core).
pub fn configure_threads() -> Result<()> {
    let n = match std::env::var("HOLOSIM_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::invalid("HOLOSIM_THREADS", format!("`{v}` is not a count")))?,
        _ => 0,
    };
    // A pool may already exist when called twice in one process; keep it.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Validate { scenario } => validate(&scenario),
        Command::Design {
            scenario,
            quantize,
            amplitude_loss_db,
            out,
        } => timed("design", &scenario, &out, |s, o| {
            cmd_design(s, o, quantize, amplitude_loss_db)
        }),
        Command::Pattern {
            scenario,
            excite,
            quantize,
            uniform_profile,
            min_deg,
            max_deg,
            step_deg,
            out,
        } => timed("pattern", &scenario, &out, |s, o| {
            let angles = angle_grid(min_deg, max_deg, step_deg)?;
            cmd_pattern(s, o, &excite, quantize, uniform_profile, &angles)
        }),
        Command::Capacity {
            scenario,
            snr,
            modes,
            pairs,
            out,
        } => timed("capacity", &scenario, &out, |s, o| {
            cmd_capacity(s, o, &parse_grid(&snr)?, &modes, &pairs)
        }),
        Command::Link {
            scenario,
            scheme,
            snr,
            bits,
            quantize,
            out,
        } => timed("link", &scenario, &out, |s, o| {
            let scheme: Modulation = scheme.parse()?;
            cmd_link(s, o, scheme, &parse_grid(&snr)?, bits, quantize)
        }),
        Command::Report {
            scenario,
            quantize,
            out,
        } => timed("report", &scenario, &out, |s, o| cmd_report(s, o, quantize)),
    }
}

fn timed(
    name: &str,
    scenario_path: &Path,
    out: &Path,
    body: impl FnOnce(&Scenario, &mut OutputSet) -> Result<()>,
) -> Result<()> {
    let start = Instant::now();
    let scenario = load_scenario(scenario_path)?;
    let mut outputs = OutputSet::new(out)?;
    body(&scenario, &mut outputs)?;
    let root = outputs.root().to_path_buf();
    let manifest = RunManifest {
        command: name.to_string(),
        scenario_hash: scenario.content_hash(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: scenario.seed,
        outputs: outputs.into_files(),
        duration_s: start.elapsed().as_secs_f64(),
    };
    write_json(&root.join("manifest.json"), &manifest)
}

fn validate(path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file = ScenarioFile::parse(&text, &path.display().to_string())?;
    let violations = file.violations();
    if !violations.is_empty() {
        for v in &violations {
            println!("violation: {v}");
        }
        let first = violations.into_iter().next().expect("non-empty");
        return Err(Error::InvalidInput {
            field: first.field,
            reason: first.reason,
        });
    }
    let scenario = file.into_scenario()?;
    println!(
        "ok: {} Tx, {} Rx, {} pairs, {}x{} surface, hash {}",
        scenario.n_tx(),
        scenario.n_rx(),
        scenario.pairs.len(),
        scenario.geometry.rows,
        scenario.geometry.cols,
        scenario.content_hash()
    );
    Ok(())
}

/// Designed hologram, optionally quantized.
pub fn designed_profile(
    scenario: &Scenario,
    bits: Option<u32>,
    loss_db: f64,
) -> Result<SurfaceProfile> {
    let profile = design(scenario)?;
    match bits {
        Some(b) if b > 0 => Ok(quantize(&profile, QuantizerSpec::new(b, loss_db)?).profile),
        _ => Ok(profile),
    }
}

fn phase_schema() -> CsvSchema {
    CsvSchema::new(&[
        ("m", Column::Int),
        ("n", Column::Int),
        ("phase_rad", Column::Float),
        ("quant_index", Column::OptFloat),
    ])
}

fn cmd_design(
    scenario: &Scenario,
    out: &mut OutputSet,
    bits: Option<u32>,
    loss_db: f64,
) -> Result<()> {
    let profile = design(scenario)?;
    let g = &scenario.geometry;
    let phases: Vec<f64> = profile
        .values
        .iter()
        .map(|v| v.arg().rem_euclid(2.0 * std::f64::consts::PI))
        .collect();
    let rows: Vec<Vec<String>> = g
        .elements()
        .zip(&phases)
        .map(|((m, n, _), p)| vec![m.to_string(), n.to_string(), fmt_f64(*p), String::new()])
        .collect();
    write_csv(
        &out.path("design/phase_continuous.csv"),
        &phase_schema(),
        &rows,
    )?;

    if let Some(b) = bits.filter(|&b| b > 0) {
        let spec = QuantizerSpec::new(b, loss_db)?;
        let q = quantize(&profile, spec);
        let rows: Vec<Vec<String>> = g
            .elements()
            .zip(&q.indices)
            .map(|((m, n, _), &i)| {
                vec![
                    m.to_string(),
                    n.to_string(),
                    fmt_f64(i as f64 * spec.step()),
                    i.to_string(),
                ]
            })
            .collect();
        write_csv(
            &out.path(&format!("design/phase_{b}bit.csv")),
            &phase_schema(),
            &rows,
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct LobeSummary {
    tx: usize,
    #[serde(flatten)]
    lobe: MainLobe,
}

fn cmd_pattern(
    scenario: &Scenario,
    out: &mut OutputSet,
    excite_list: &[usize],
    bits: Option<u32>,
    uniform: bool,
    angles: &[f64],
) -> Result<()> {
    let profile = if uniform {
        SurfaceProfile::uniform(scenario.geometry.rows, scenario.geometry.cols)
    } else {
        designed_profile(scenario, bits, 0.0)?
    };
    let txs: Vec<usize> = if excite_list.is_empty() {
        (1..=scenario.n_tx()).collect()
    } else {
        excite_list.to_vec()
    };
    let schema = CsvSchema::new(&[
        ("angle_deg", Column::Float),
        ("mag_db", Column::Float),
        ("phase_rad", Column::Float),
    ]);
    let mut lobes = Vec::new();
    for t in txs {
        let aperture = excite(scenario, &profile, t)?;
        let cut = farfield_cut(&aperture, &scenario.geometry, scenario.wavenumber(), angles)?;
        let rows: Vec<Vec<String>> = cut
            .rows()
            .iter()
            .map(|r| r.iter().map(|v| fmt_f64(*v)).collect())
            .collect();
        write_csv(&out.path(&format!("pattern/cut_tx{t}.csv")), &schema, &rows)?;
        lobes.push(LobeSummary {
            tx: t,
            lobe: main_lobe(&cut)?,
        });
    }
    write_json(&out.path("pattern/lobes.json"), &lobes)
}

fn cmd_report(scenario: &Scenario, out: &mut OutputSet, bits: Option<u32>) -> Result<()> {
    let profile = designed_profile(scenario, bits, 0.0)?;
    let table = isolation(scenario, &profile)?;
    write_json(&out.path("pattern/isolation.json"), &table)
}

/// Parses `START:STOP:STEP` (inclusive) or a single value.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::invalid("snr", format!("`{text}` is not START:STOP:STEP"));
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match parts.as_slice() {
        [v] if v.is_finite() => Ok(vec![*v]),
        [a, b, s] if a.is_finite() && b.is_finite() && *s > 0.0 && b >= a => {
            let n = ((b - a) / s + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| a + i as f64 * s).collect())
        }
        _ => Err(bad()),
    }
}

/// Expands `--modes` and `--pairs` into beam sets.
pub fn parse_beam_sets(
    scenario: &Scenario,
    modes: &str,
    pairs: &[usize],
) -> Result<Vec<BeamSetEntry>> {
    let template = scenario
        .tx_nodes
        .iter()
        .map(|t| &t.beam)
        .find(|b| b.kind.is_vortex());
    let (kind, radius, q) = match template {
        Some(b) => (b.kind, b.radius_wavelengths, b.pattern_exponent),
        None => (BeamKind::BesselVortex, DEFAULT_RADIUS_WAVELENGTHS, 1.0),
    };
    let dir_q = scenario
        .tx_nodes
        .iter()
        .map(|t| &t.beam)
        .find(|b| !b.kind.is_vortex())
        .map(|b| b.pattern_exponent)
        .unwrap_or(1.0);
    let lambda = scenario.wavelength();

    let mut vortex_sets = Vec::new();
    let mut want_dir = false;
    for item in modes.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        if item.eq_ignore_ascii_case("dir") {
            want_dir = true;
            continue;
        }
        let ls: Vec<i32> = item
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<i32>()
                    .map_err(|_| Error::invalid("modes", format!("`{item}` is not a mode list")))
            })
            .collect::<Result<_>>()?;
        let mut sorted = ls.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("modes", format!("`{item}` repeats a mode")));
        }
        vortex_sets.push(ls);
    }

    let mut counts: Vec<usize> = if pairs.is_empty() {
        vortex_sets.iter().map(Vec::len).collect()
    } else {
        pairs.to_vec()
    };
    if counts.is_empty() {
        counts.push(scenario.pairs.len());
    }
    counts.sort_unstable();
    counts.dedup();

    let mut sets = Vec::new();
    for &n in &counts {
        if n == 0 {
            return Err(Error::invalid("pairs", "pair counts must be positive"));
        }
        if want_dir {
            sets.push(BeamSetEntry {
                label: "directional".into(),
                beams: vec![BeamSpec::directional(dir_q); n],
            });
        }
        for ls in vortex_sets.iter().filter(|ls| ls.len() == n) {
            let label = format!(
                "{}:{}",
                kind.label(),
                ls.iter()
                    .map(|l| l.to_string())
                    .collect::<Vec<_>>()
                    .join("/")
            );
            let beams = ls
                .iter()
                .map(|&l| BeamSpec::vortex(kind, l, radius, q, lambda))
                .collect();
            sets.push(BeamSetEntry { label, beams });
        }
    }
    if sets.is_empty() {
        return Err(Error::invalid(
            "modes",
            "no beam set matches the requested pair counts",
        ));
    }
    Ok(sets)
}

fn cmd_capacity(
    scenario: &Scenario,
    out: &mut OutputSet,
    snr: &[f64],
    modes: &str,
    pairs: &[usize],
) -> Result<()> {
    let sets = parse_beam_sets(scenario, modes, pairs)?;
    let table = capacity_sweep(scenario, &sets, snr)?;
    let schema = CsvSchema::new(&[
        ("snr_db", Column::Float),
        ("pairs", Column::Int),
        ("beam_set", Column::Text),
        ("capacity_bps_hz", Column::Float),
        ("cond_number", Column::Float),
    ]);
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.snr_db),
                r.pairs.to_string(),
                r.beam_set.clone(),
                fmt_f64(r.capacity_bps_hz),
                fmt_f64(r.cond_number),
            ]
        })
        .collect();
    write_csv(&out.path("capacity/capacity.csv"), &schema, &rows)
}

fn cmd_link(
    scenario: &Scenario,
    out: &mut OutputSet,
    scheme: Modulation,
    snr: &[f64],
    bits: usize,
    quant_bits: u32,
) -> Result<()> {
    let profile = designed_profile(scenario, Some(quant_bits), 0.0)?;
    let report = run_link(scenario, &profile, scheme, snr, bits)?;
    let schema = CsvSchema::new(&[
        ("user", Column::Int),
        ("snr_db", Column::Float),
        ("ber", Column::Float),
        ("evm_pct", Column::Float),
        ("sinr_db", Column::Float),
        ("bits", Column::Int),
    ]);
    let rows: Vec<Vec<String>> = report
        .points
        .iter()
        .map(|p| {
            vec![
                p.user.to_string(),
                fmt_f64(p.snr_db),
                fmt_f64(p.ber),
                fmt_f64(p.evm_pct),
                fmt_f64(p.sinr_db),
                p.bits.to_string(),
            ]
        })
        .collect();
    let name = scheme.name();
    write_csv(&out.path(&format!("link/ber_{name}.csv")), &schema, &rows)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        scheme: &'a str,
        seed: u64,
        bits_per_point: usize,
        fec_limit: f64,
        users: &'a [crate::link::UserSummary],
    }
    write_json(
        &out.path(&format!("link/summary_{name}.json")),
        &Summary {
            scheme: name,
            seed: report.seed,
            bits_per_point: report.bits_per_point,
            fec_limit: report.fec_limit,
            users: &report.users,
        },
    )
}
