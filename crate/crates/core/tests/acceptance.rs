//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if
//! any criterion fails.

mod common;

use std::path::Path;
use std::process::Command;

use holosim::beams::BeamSpec;
use holosim::capacity::{capacity, capacity_sweep, BeamSetEntry};
use holosim::channel::{element_cascade_field, received_power, SurfaceProfile};
use holosim::cli::designed_profile;
use holosim::farfield::{angle_grid, farfield_cut, isolation, main_lobe};
use holosim::hologram::{design, excite, object_wave, pair_targets};
use holosim::link::{run_link, simulate_awgn, Modulation, FEC_LIMIT};
use holosim::scenario::parse_scenario;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
type BerOracle = fn(f64) -> f64;

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 hologram identity", hologram_identity),
        ("2 beam steering", beam_steering),
        ("3 isolation", isolation_criterion),
        ("4 capacity dominance", capacity_dominance),
        ("5 water-filling oracle", water_filling_oracle),
        ("6 AWGN BER oracle", awgn_ber),
        ("7 end-to-end link", end_to_end_link),
        ("8 roundtrip power identity", roundtrip_power),
        ("9 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = std::time::Instant::now();
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} criterion {name}: {detail} [{:.2} s]",
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn hologram_identity() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        // An odd-by-odd grid has an element on every node's boresight,
        // where a vortex beam has its null and the recording is singular.
        let rows = 2 * rng.random_range(1..=10);
        let cols = rng.random_range(2..=20);
        let tx = [
            rng.random_range(0.2..1.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
        ];
        let mode = rng.random_range(-4..=4);
        let theta: f64 = rng.random_range(0.0..75.0);
        let phi: f64 = rng.random_range(-180.0..180.0);
        let s = parse_scenario(
            &serde_json::json!({
                "frequency_hz": rng.random_range(5e9..30e9),
                "surface": {"rows": rows, "cols": cols, "dy_m": rng.random_range(0.004..0.02), "dz_m": rng.random_range(0.004..0.02)},
                "tx_nodes": [{"position_m": tx, "beam": {"type": "bessel_vortex", "mode": mode}}],
                "rx_users": [{"direction_deg": [theta, phi], "range_m": rng.random_range(1.0..5.0)}],
                "pairs": [[1, 1]], "noise_variance_w": 1e-12, "seed": 1
            })
            .to_string(),
            "inline",
        )
        .map_err(|e| e.to_string())?;
        let prof = design(&s).map_err(|e| e.to_string())?;
        let t = pair_targets(&s).map_err(|e| e.to_string())?[0];
        let out = excite(&s, &prof, 1).map_err(|e| e.to_string())?;
        let obj = object_wave(&s.geometry, s.wavenumber(), t.theta, t.phi);
        for (a, b) in out.values.iter().zip(&obj.values) {
            worst = worst.max(common::wrap_pi(a.arg() - b.arg()).abs());
        }
    }
    check(
        worst < 1e-9,
        format!("worst phase error {worst:.3e} rad over 50 scenarios (limit 1e-9)"),
    )
}

fn beam_steering() -> Outcome {
    let s = common::two_pair_scenario();
    let grid = angle_grid(-90.0, 90.0, 0.05).map_err(|e| e.to_string())?;
    let targets = [45.0, -10.0];
    let mut ok = true;
    let mut parts = Vec::new();
    let mut peaks = [[0.0; 2]; 2];
    for (v, bits) in [None, Some(2)].into_iter().enumerate() {
        let prof = designed_profile(&s, bits, 0.0).map_err(|e| e.to_string())?;
        for (t, want) in targets.iter().enumerate() {
            let ap = excite(&s, &prof, t + 1).map_err(|e| e.to_string())?;
            let cut =
                farfield_cut(&ap, &s.geometry, s.wavenumber(), &grid).map_err(|e| e.to_string())?;
            let lobe = main_lobe(&cut).map_err(|e| e.to_string())?;
            ok &= (lobe.angle_deg - want).abs() <= 2.0;
            peaks[v][t] = lobe.peak_db;
            parts.push(format!(
                "{} Tx{} {:.2} deg",
                if bits.is_some() {
                    "2-bit"
                } else {
                    "continuous"
                },
                t + 1,
                lobe.angle_deg
            ));
        }
    }
    for (t, (cont, quant)) in peaks[0].iter().zip(&peaks[1]).enumerate() {
        let loss = cont - quant;
        ok &= loss < 1.0;
        parts.push(format!("Tx{} quantization loss {loss:.2} dB", t + 1));
    }
    check(
        ok,
        format!("{} (targets 45/-10 +-2 deg, loss < 1 dB)", parts.join(", ")),
    )
}

fn isolation_criterion() -> Outcome {
    let s = common::two_pair_scenario();
    let prof = design(&s).map_err(|e| e.to_string())?;
    let table = isolation(&s, &prof).map_err(|e| e.to_string())?;
    let values: Vec<f64> = table.rows.iter().filter_map(|r| r.isolation_db).collect();
    let ok = values.len() == 2 && values.iter().all(|&v| v >= 18.0);
    check(ok, format!("isolation {values:.2?} dB (limit >= 18 dB)"))
}

fn capacity_dominance() -> Outcome {
    let s = common::sweep_scenario();
    let lambda = s.wavelength();
    let bessel = |ls: &[i32]| {
        ls.iter()
            .map(|&l| BeamSpec::bessel(l, 0.65, lambda))
            .collect::<Vec<_>>()
    };
    let snr: Vec<f64> = (0..=15).map(|i| 2.0 * i as f64).collect();
    let mut violations = Vec::new();
    for modes in [&[-1, 1][..], &[1, 2, 3], &[1, 2, 3, 4]] {
        let n = modes.len();
        let sets = [
            BeamSetEntry {
                label: "directional".into(),
                beams: vec![BeamSpec::directional(1.0); n],
            },
            BeamSetEntry {
                label: "vortex".into(),
                beams: bessel(modes),
            },
        ];
        let rows = capacity_sweep(&s, &sets, &snr).map_err(|e| e.to_string())?;
        let (dir, vor) = rows.split_at(snr.len());
        let bad: Vec<String> = dir
            .iter()
            .zip(vor)
            .filter(|(d, v)| v.capacity_bps_hz < d.capacity_bps_hz)
            .map(|(d, _)| format!("{}", d.snr_db))
            .collect();
        if !bad.is_empty() {
            violations.push(format!(
                "{n} pairs: vortex below directional at {} dB",
                bad.join("/")
            ));
        }
    }
    let intervals: Vec<BeamSetEntry> = (1..=3)
        .map(|d| BeamSetEntry {
            label: format!("interval {d}"),
            beams: bessel(&(0..4).map(|i| 1 + d * i).collect::<Vec<_>>()),
        })
        .collect();
    let rows = capacity_sweep(&s, &intervals, &snr).map_err(|e| e.to_string())?;
    let bad: Vec<String> = (0..snr.len())
        .filter(|&i| {
            let c: Vec<f64> = (0..3)
                .map(|d| rows[d * snr.len() + i].capacity_bps_hz)
                .collect();
            c[1] < c[0] || c[2] < c[1]
        })
        .map(|i| format!("{}", snr[i]))
        .collect();
    if !bad.is_empty() {
        violations.push(format!(
            "4 pairs: interval order broken at {} dB",
            bad.join("/")
        ));
    }
    check(
        violations.is_empty(),
        if violations.is_empty() {
            "vortex >= directional for 2/3/4 pairs and interval 3 >= 2 >= 1 at 0..30 dB".into()
        } else {
            violations.join("; ")
        },
    )
}

fn water_filling_oracle() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(505);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (r, c) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let h = common::random_matrix(&mut rng, r, c);
        let p: f64 = 10f64.powf(rng.random_range(-1.0..2.0));
        let noise: f64 = 10f64.powf(rng.random_range(-1.0..1.0));
        let report = capacity(&h, p, noise).map_err(|e| e.to_string())?;
        let grid = common::grid_capacity(&report.singular_values, p, noise, 1000);
        worst = worst.max((report.capacity_bps_hz - grid).abs());
    }
    check(
        worst <= 1e-3,
        format!("worst gap {worst:.3e} bps/Hz over 200 channels (limit 1e-3)"),
    )
}

fn qam16_ber(eb_n0: f64) -> f64 {
    let u = (0.8 * eb_n0).sqrt();
    let q = common::q_function;
    (3.0 * q(u) + 2.0 * q(3.0 * u) - q(5.0 * u)) / 4.0
}

fn qpsk_ber(eb_n0: f64) -> f64 {
    common::q_function((2.0 * eb_n0).sqrt())
}

fn awgn_ber() -> Outcome {
    let bits = 1_000_000;
    let mut worst = 0.0f64;
    let schemes: [(Modulation, BerOracle); 2] =
        [(Modulation::Qpsk, qpsk_ber), (Modulation::Qam16, qam16_ber)];
    for (m, oracle) in schemes {
        for (i, eb_db) in [0.0, 2.0, 4.0, 6.0, 8.0].iter().enumerate() {
            let p = oracle(10f64.powf(eb_db / 10.0));
            let es_db = eb_db + 10.0 * (m.bits_per_symbol() as f64).log10();
            let got = simulate_awgn(m, bits, es_db, 606, i)
                .map_err(|e| e.to_string())?
                .ber;
            let sigma = (p * (1.0 - p) / bits as f64).sqrt();
            worst = worst.max((got - p).abs() / sigma);
        }
    }
    check(
        worst <= 3.0,
        format!("worst deviation {worst:.2} sigma over QPSK and 16-QAM at 0..8 dB (limit 3)"),
    )
}

fn end_to_end_link() -> Outcome {
    let s = common::two_pair_scenario();
    let prof = designed_profile(&s, Some(2), 0.0).map_err(|e| e.to_string())?;
    let grid: Vec<f64> = (0..=20).map(f64::from).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for (m, limit) in [(Modulation::Qpsk, 12.0), (Modulation::Qam16, 16.0)] {
        let report = run_link(&s, &prof, m, &grid, 1_000_000).map_err(|e| e.to_string())?;
        for u in &report.users {
            let curve = report.curve(u.user);
            let monotone = curve.windows(2).all(|w| w[1].ber <= w[0].ber);
            let crossing = curve.iter().find(|p| p.ber <= FEC_LIMIT).map(|p| p.snr_db);
            let pass = crossing.is_some_and(|c| c <= limit) && (m != Modulation::Qpsk || monotone);
            ok &= pass;
            let at_limit = curve
                .iter()
                .find(|p| p.snr_db == limit)
                .map_or(f64::NAN, |p| p.ber);
            parts.push(format!(
                "{} user {}: crossing {} (limit {limit} dB, BER {at_limit:.2e} there){}",
                m.name(),
                u.user,
                crossing.map_or("none".into(), |c| format!("{c} dB")),
                if m == Modulation::Qpsk {
                    format!(", monotone {monotone}")
                } else {
                    String::new()
                }
            ));
        }
    }
    check(ok, parts.join("; "))
}

fn roundtrip_power() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(808);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let tx = [
            rng.random_range(0.05..3.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let rx = [
            rng.random_range(0.05..3.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let g = [
            rng.random_range(0.1..10.0),
            rng.random_range(0.1..10.0),
            rng.random_range(0.1..10.0),
        ];
        let (freq, dy) = (rng.random_range(1e9..1e11), rng.random_range(0.001..0.05));
        let (q_el, p_t) = (rng.random_range(0.0..3.0), rng.random_range(0.01..10.0));
        let amp: f64 = rng.random_range(0.01..1.0);
        let s = common::single_element(freq, dy, tx, rx, q_el, g, p_t);
        let prof = SurfaceProfile::from_values(
            1,
            1,
            vec![Complex64::from_polar(amp, rng.random_range(-3.0..3.0))],
        )
        .map_err(|e| e.to_string())?;
        let e = element_cascade_field(&s, &prof, 1, 1, 1, 1).map_err(|e| e.to_string())?;
        let got = received_power(&s, 1, e).map_err(|e| e.to_string())?;
        let want = common::cascade_power(freq, dy, tx, rx, q_el, g, p_t, amp);
        worst = worst.max((got - want).abs() / want);
    }
    check(
        worst <= 1e-12,
        format!("worst relative error {worst:.3e} over 1000 configurations (limit 1e-12)"),
    )
}

fn run_cli(args: &[&str], threads: &str) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_holosim"))
        .args(args)
        .env("HOLOSIM_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`{}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn data_files(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).into_iter().flatten().flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n != "manifest.json") {
                let rel = path
                    .strip_prefix(root)
                    .unwrap_or(&path)
                    .display()
                    .to_string();
                files.push((rel, std::fs::read(&path).unwrap_or_default()));
            }
        }
    }
    files.sort();
    files
}

fn determinism() -> Outcome {
    let two_pair = common::scenario_dir()
        .join("two_pair.json")
        .display()
        .to_string();
    let sweep = common::scenario_dir()
        .join("capacity_sweep.json")
        .display()
        .to_string();
    let base = std::env::temp_dir().join(format!("holosim-acceptance-{}", std::process::id()));
    let mut runs = Vec::new();
    for threads in ["1", "4", "1", "4"] {
        let dir = base.join(format!("run{}", runs.len()));
        let d = dir.display().to_string();
        let mut stdout = run_cli(&["validate", &two_pair], threads)?;
        stdout.extend(run_cli(
            &["design", &two_pair, "--quantize", "2", "--out", &d],
            threads,
        )?);
        stdout.extend(run_cli(&["pattern", &two_pair, "--out", &d], threads)?);
        stdout.extend(run_cli(
            &[
                "capacity",
                &sweep,
                "--modes",
                "dir;-1,1;1,2,3;1,2,3,4",
                "--out",
                &d,
            ],
            threads,
        )?);
        stdout.extend(run_cli(
            &["link", &two_pair, "--scheme", "qpsk", "--out", &d],
            threads,
        )?);
        stdout.extend(run_cli(
            &["link", &two_pair, "--scheme", "qam16", "--out", &d],
            threads,
        )?);
        stdout.extend(run_cli(
            &["report", &two_pair, "--quantize", "2", "--out", &d],
            threads,
        )?);
        runs.push((stdout, data_files(&dir)));
    }
    let _ = std::fs::remove_dir_all(&base);
    let n_files = runs[0].1.len();
    let identical = runs.iter().all(|r| r == &runs[0]);
    check(
        identical && n_files > 0,
        format!("{n_files} data files and stdout compared over 4 runs at 1 and 4 threads, identical: {identical}"),
    )
}
