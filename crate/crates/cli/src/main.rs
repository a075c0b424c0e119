use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use lorajam::detect::{self, delivery_log, DeliveryRecord, DetectorConfig};
use lorajam::experiments::{self, Matrix, AIRTIME_SIZES, MATRIX_SIZES, SPREADING_FACTORS};
use lorajam::phy::{time_on_air, LatencyModel, Micros, RadioParams};
use lorajam::scenario::Scenario;
use lorajam::sim::{self, read_records, Record};
use lorajam::trace::{self, TraceRecord};

/// Discrete-event LoRaWAN jamming simulator.
#[derive(Parser)]
#[command(name = "lorajam", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Overrides the scenario or experiment seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write reports here instead of stdout.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Text,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Text => "txt",
        }
    }
}

#[derive(clap::Args)]
struct Radio {
    #[arg(long, value_delimiter = ',', default_values_t = SPREADING_FACTORS)]
    sfs: Vec<u8>,
    #[arg(long, default_value_t = 125_000)]
    bandwidth: u32,
    /// Coding rate index: 1..=4 for 4/5..4/8.
    #[arg(long, default_value_t = 1)]
    coding_rate: u8,
    #[arg(long, default_value_t = 8)]
    preamble: u16,
}

impl Radio {
    fn base(&self) -> anyhow::Result<RadioParams> {
        Ok(RadioParams::new(self.sfs.first().copied().unwrap_or(7), self.bandwidth)?
            .with_coding_rate(self.coding_rate)?
            .with_preamble(self.preamble)?)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Time on air per spreading factor and PHY payload size.
    Airtime {
        #[command(flatten)]
        radio: Radio,
        #[arg(long, value_delimiter = ',', default_values_t = AIRTIME_SIZES)]
        sizes: Vec<usize>,
    },
    /// Read point and jamming window per spreading factor and size.
    Window {
        #[command(flatten)]
        radio: Radio,
        #[arg(long, value_delimiter = ',', default_values_t = MATRIX_SIZES)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        read_bytes: usize,
    },
    /// Predicted and simulated S/M/F jammability grid for a wormhole.
    Matrix {
        #[arg(long, default_value = "100830us")]
        latency_mean: Micros,
        #[arg(long, default_value = "1700us")]
        latency_std: Micros,
        #[arg(long, default_value_t = 5)]
        read_bytes: usize,
        /// Simulated frames per cell; 0 skips the simulation.
        #[arg(long, default_value_t = 100)]
        frames: u32,
        #[arg(long, value_delimiter = ',', default_values_t = SPREADING_FACTORS)]
        sfs: Vec<u8>,
        #[arg(long, value_delimiter = ',', default_values_t = MATRIX_SIZES)]
        sizes: Vec<usize>,
    },
    /// Runs a scenario file.
    Run { scenario: PathBuf },
    /// Jam rate as a function of the jammer/victim RSSI differential.
    RssiSweep {
        /// Scenario to sweep; the built-in SF12 setup when omitted.
        scenario: Option<PathBuf>,
        #[arg(long, default_value = "target")]
        victim: String,
        #[arg(long, default_value = "jammer")]
        jammer: String,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, default_value_t = 50.0, allow_negative_numbers = true)]
        to: f64,
        #[arg(long, default_value_t = 2.0)]
        step: f64,
        /// SF12 co-channel threshold of the built-in scenario, in dB.
        #[arg(long, default_value_t = 36.0)]
        threshold: f64,
        /// Frames per step in the built-in scenario.
        #[arg(long, default_value_t = 100)]
        frames: u32,
    },
    /// Traffic statistics of a trace CSV or an event log (.jsonl).
    AnalyzeTrace { log: PathBuf },
    /// Jamming alarms from a trace CSV or an event log (.jsonl).
    Detect {
        log: PathBuf,
        /// Known reporting period; selects the known-rate detector.
        #[arg(long, conflicts_with = "warmup")]
        period: Option<Micros>,
        /// Warm-up span for the learned-rate detector.
        #[arg(long)]
        warmup: Option<Micros>,
        #[arg(long, default_value_t = 3)]
        k: u32,
        #[arg(long, default_value_t = 2.0)]
        z: f64,
        /// Ignore rejected frames as evidence.
        #[arg(long)]
        hide_rejects: bool,
    },
}

enum Fail {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

trait Classify<T> {
    fn invalid(self) -> Result<T, Fail>;
    fn runtime(self) -> Result<T, Fail>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> Result<T, Fail> {
        self.map_err(|e| Fail::Invalid(e.into()))
    }
    fn runtime(self) -> Result<T, Fail> {
        self.map_err(|e| Fail::Runtime(e.into()))
    }
}

/// One report in all three encodings; the caller picks one.
struct Report {
    name: &'static str,
    default: Format,
    csv: String,
    json: serde_json::Value,
    text: String,
}

impl Report {
    fn table(name: &'static str, rows: &[impl Serialize]) -> Result<Self, Fail> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).runtime()?;
        }
        let csv = String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}")).runtime()?).runtime()?;
        Ok(Self { name, default: Format::Csv, text: csv.replace(',', "\t"), json: serde_json::to_value(rows).runtime()?, csv })
    }
}

fn emit(cli: &Cli, r: Report) -> Result<(), Fail> {
    let f = cli.format.unwrap_or(r.default);
    let body = match f {
        Format::Csv => r.csv,
        Format::Json => serde_json::to_string_pretty(&r.json).runtime()? + "\n",
        Format::Text => r.text,
    };
    match &cli.out_dir {
        Some(dir) => write_file(&dir.join(format!("{}.{}", r.name, f.ext())), &body),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, body: &str) -> Result<(), Fail> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).runtime()?;
    }
    fs::write(path, body).with_context(|| format!("writing {}", path.display())).runtime()
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<Scenario, Fail> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).invalid()?;
    let mut s = Scenario::from_toml(&text).with_context(|| path.display().to_string()).invalid()?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn is_event_log(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("jsonl" | "ndjson"))
}

fn load_records(path: &Path) -> Result<Vec<Record>, Fail> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display())).invalid()?;
    read_records(BufReader::new(f)).with_context(|| path.display().to_string()).invalid()
}

fn load_trace(path: &Path) -> Result<Vec<TraceRecord>, Fail> {
    if is_event_log(path) {
        return Ok(trace::from_event_log(&load_records(path)?));
    }
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display())).invalid()?;
    trace::read_csv(f).with_context(|| path.display().to_string()).invalid()
}

#[derive(Serialize)]
struct AirtimeRow {
    sf: u8,
    size: usize,
    airtime_us: u64,
    airtime_ms: f64,
}

fn execute(cli: &Cli) -> Result<(), Fail> {
    match &cli.cmd {
        Cmd::Airtime { radio, sizes } => {
            let base = radio.base().invalid()?;
            let mut rows = Vec::new();
            for &sf in &radio.sfs {
                let p = RadioParams::new(sf, radio.bandwidth)
                    .and_then(|p| p.with_coding_rate(base.coding_rate()))
                    .and_then(|p| p.with_preamble(base.preamble_symbols()))
                    .invalid()?;
                for &size in sizes {
                    let t = time_on_air(&p, size).invalid()?;
                    rows.push(AirtimeRow { sf, size, airtime_us: t.0, airtime_ms: t.as_millis_f64() });
                }
            }
            emit(cli, Report::table("airtime", &rows)?)
        }
        Cmd::Window { radio, sizes, read_bytes } => {
            let rows = experiments::timing_table(&radio.base().invalid()?, &radio.sfs, sizes, *read_bytes).invalid()?;
            emit(cli, Report::table("window", &rows)?)
        }
        Cmd::Matrix { latency_mean, latency_std, read_bytes, frames, sfs, sizes } => {
            let latency = LatencyModel::new(*latency_mean, *latency_std);
            let mut m = Matrix::predict(sfs, sizes, *read_bytes, latency).invalid()?;
            if *frames > 0 {
                m.simulate(*frames, cli.seed.unwrap_or(1)).runtime()?;
            }
            let mut text = m.grid();
            for n in m.notes() {
                let _ = writeln!(text, "note: {n}");
            }
            let cells: Vec<_> = m
                .cells
                .iter()
                .map(|(&(sf, size), c)| {
                    serde_json::json!({
                        "sf": sf, "size": size, "predicted": c.predicted,
                        "observed": c.observed_class(), "jammed_sent": c.observed,
                    })
                })
                .collect();
            let json = serde_json::json!({ "latency": latency, "read_bytes": read_bytes, "cells": cells, "notes": m.notes() });
            emit(cli, Report { name: "matrix", default: Format::Text, csv: m.csv(), json, text })
        }
        Cmd::Run { scenario } => {
            let s = load_scenario(scenario, cli.seed)?;
            let out = sim::run(&s).runtime()?;
            if let Some(dir) = &cli.out_dir {
                if s.outputs.event_log {
                    write_file(&dir.join("events.jsonl"), &out.log.text())?;
                }
                if s.outputs.metrics {
                    write_file(&dir.join("metrics.json"), &(serde_json::to_string_pretty(&out.metrics).runtime()? + "\n"))?;
                }
            }
            let m = &out.metrics;
            let mut text = format!("seed {}  events {}  digest {}\n", m.seed, m.events, m.digest);
            for (name, d) in &m.devices {
                let _ = writeln!(
                    text,
                    "{name}: sent {} delivered {} crc_failed {} not_heard {} jam {:.2}% accepted {}",
                    d.sent,
                    d.delivered,
                    d.crc_failed,
                    d.not_heard,
                    d.jam_pct(),
                    d.accepted
                );
                if d.replay_accepted + d.replay_rejected > 0 {
                    let _ = writeln!(text, "{name}: replays accepted {} rejected {}", d.replay_accepted, d.replay_rejected);
                }
            }
            let json = serde_json::to_value(m).runtime()?;
            emit(cli, Report { name: "devices", default: Format::Text, csv: m.devices_csv(), json, text })
        }
        Cmd::RssiSweep { scenario, victim, jammer, from, to, step, threshold, frames } => {
            if !(from.is_finite() && to.is_finite() && *step > 0.0 && from <= to) {
                return Err(Fail::Invalid(anyhow!("sweep range must be finite with from <= to and step > 0")));
            }
            let base = match scenario {
                Some(p) => load_scenario(p, cli.seed)?,
                None => experiments::rssi_sweep_scenario(*threshold, *frames, cli.seed.unwrap_or(1)),
            };
            let steps = ((to - from) / step + 1e-9).floor() as usize;
            let diffs: Vec<f64> = (0..=steps).map(|i| from + i as f64 * step).collect();
            let pts = experiments::rssi_sweep(&base, victim, jammer, &diffs).runtime()?;
            emit(cli, Report::table("rssi_sweep", &pts)?)
        }
        Cmd::AnalyzeTrace { log } => {
            let stats = trace::analyze::<f64>(&load_trace(log)?).invalid()?;
            let mut text = format!(
                "messages {}  devices {}  mean wire {:.2} B  mean payload {:.2} B\n",
                stats.message_count, stats.distinct_devices, stats.mean_wire_length, stats.mean_payload_length
            );
            for (ch, share) in &stats.channel_histogram {
                let _ = writeln!(text, "{:.1} MHz  {:5.1}%", *ch as f64 / 1e6, 100.0 * share);
            }
            let csv = "channel_hz,fraction\n".to_string()
                + &stats.channel_histogram.iter().map(|(c, f)| format!("{c},{f}\n")).collect::<String>();
            let json = serde_json::to_value(&stats).runtime()?;
            let r = Report { name: "trace_stats", default: Format::Json, csv, json, text };
            emit(cli, r)
        }
        Cmd::Detect { log, period, warmup, k, z, hide_rejects } => {
            let deliveries: Vec<DeliveryRecord> = if is_event_log(log) {
                delivery_log(&load_records(log)?)
            } else {
                load_trace(log)?
                    .into_iter()
                    .map(|t| DeliveryRecord {
                        t: Micros(t.timestamp_us),
                        dev_addr: t.dev_addr,
                        accepted: t.status == "accept",
                        channel_hz: t.channel_hz,
                        sf: t.sf,
                    })
                    .collect()
            };
            let mut cfg = match (period, warmup) {
                (Some(p), None) => DetectorConfig::<f64>::known(*p, *k),
                (None, Some(w)) => DetectorConfig::learned(*w, *k, *z),
                _ => return Err(Fail::Invalid(anyhow!("give exactly one of --period or --warmup"))),
            };
            cfg.hide_rejects = *hide_rejects;
            let alarms = detect::detect(&deliveries, cfg).invalid()?;
            emit(cli, Report::table("alarms", &alarms)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Fail::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
