//! Command-line front end for the `dnszombie` toolkit.

pub mod config;
pub mod report;

use std::ffi::OsString;
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use dnszombie::classify::{batch_classify, ZombieVerdict};
use dnszombie::dataio::{
    load_epochs, load_linkage_input, load_observations, load_rdap, load_serving, load_verdicts,
    observation_span, save_epochs, save_jsonl, save_verdicts, sha256_file, DatasetManifest, DigestReader, Endpoints,
    FetchConfig, FileEntry, GroupedObservations, RdapFetcher, CACHE_DIR_ENV, MANIFEST_FILE,
};
use dnszombie::epoch::{EpochTimeline, ObservationWindow};
use dnszombie::linkage::Ecosystem;
use dnszombie::pipeline::{group_rdap, infer_all, infer_streaming, linkages_from_input, timelines_by_domain};
use dnszombie::stats::{kaplan_meier, mann_whitney_u_with, MwuMethod, SurvivalObs};
use dnszombie::synth::{emit_observations, generate_world, NoiseModel, WorldParams};
use dnszombie::DayDate;

use config::{FileConfig, FlagOverrides, RunConfig};
use report::{analyze, run_report, sort_verdicts, write_tables, TableKind};

/// Environment variable naming the default output directory for `report`.
pub const OUT_DIR_ENV: &str = "DNSZOMBIE_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// An invocation problem: bad flag combination or invalid configuration.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn parse_day(s: &str) -> Result<DayDate, String> {
    s.parse().map_err(|e: dnszombie::Error| e.to_string())
}

fn parse_ecosystem(s: &str) -> Result<Ecosystem, String> {
    s.parse().map_err(|e: dnszombie::Error| e.to_string())
}

fn parse_mwu(s: &str) -> Result<MwuMethod, String> {
    match s {
        "auto" => Ok(MwuMethod::Auto),
        "exact" => Ok(MwuMethod::Exact),
        "asymptotic" => Ok(MwuMethod::Asymptotic),
        _ => Err(format!("unknown method `{s}` (expected auto, exact or asymptotic)")),
    }
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "dnszombie", version, about = "Ownership epochs and zombie linkages of DNS names")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by the analysis commands. Flags win over `--config`.
#[derive(Debug, Args, Clone, Default)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Gap (days) below which adjacent runs merge.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    gap_threshold: Option<u32>,
    /// Days an RDAP date may sit from a run start and still close it.
    #[arg(long)]
    grace: Option<u32>,
    /// Add Grace Period length in days.
    #[arg(long)]
    agp_days: Option<u32>,
    #[arg(long, value_parser = parse_day)]
    as_of: Option<DayDate>,
    #[arg(long, value_parser = parse_day)]
    window_start: Option<DayDate>,
    #[arg(long, value_parser = parse_day)]
    window_end: Option<DayDate>,
    /// TXT prefix marking a gasless ENS record.
    #[arg(long)]
    gasless_prefix: Option<String>,
    /// auto, exact or asymptotic.
    #[arg(long, value_parser = parse_mwu)]
    mwu_method: Option<MwuMethod>,
}

impl Common {
    fn flags(&self) -> FlagOverrides {
        FlagOverrides {
            gap_threshold: self.gap_threshold.map(|v| v as i32),
            grace: self.grace.map(|v| v as i32),
            agp_days: self.agp_days.map(|v| v as i32),
            as_of: self.as_of,
            window_start: self.window_start,
            window_end: self.window_end,
            gasless_prefix: self.gasless_prefix.clone(),
            mwu_method: self.mwu_method,
        }
    }

    fn resolve(&self) -> anyhow::Result<(RunConfig, serde_json::Value)> {
        self.resolve_with(self.config.as_deref())
    }

    fn resolve_with(&self, path: Option<&Path>) -> anyhow::Result<(RunConfig, serde_json::Value)> {
        let file = match path {
            Some(p) => FileConfig::load(p).map_err(|e| usage(format!("{e:#}")))?,
            None => FileConfig::default(),
        };
        let flags = self.flags();
        let cfg = RunConfig::resolve(&file, &flags).map_err(|e| usage(format!("{e:#}")))?;
        let json = cfg.manifest_value(&file, &flags);
        Ok((cfg, json))
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Infer ownership epochs from observations and RDAP records.
    Infer {
        /// Observation CSV grouped by domain, or `-` for stdin.
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        rdap: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Classify linkages against inferred epochs.
    Classify {
        #[arg(long)]
        epochs: PathBuf,
        /// Raw ecosystem records (certificates, ENS claims, Maven versions or TXT records).
        #[arg(long)]
        linkages: PathBuf,
        #[arg(long, value_parser = parse_ecosystem)]
        ecosystem: Ecosystem,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Statistics over verdicts or raw samples.
    Stats {
        #[command(subcommand)]
        which: StatsCommand,
    },
    /// Attack-surface evidence and the indicator matrix.
    Indicators {
        #[arg(long)]
        verdicts: PathBuf,
        #[arg(long)]
        serving: Option<PathBuf>,
        /// Configuration file holding [design.*] and [min_fraction] sections.
        #[arg(long)]
        design_config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic world and its observation files.
    Synth {
        /// World parameters (TOML, or JSON with a .json extension).
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        /// Seed for observation noise; defaults to the world seed.
        #[arg(long)]
        noise_seed: Option<u64>,
        #[arg(long, default_value = "1", value_parser = parse_fraction)]
        zone_coverage: f64,
        #[arg(long, default_value = "0", value_parser = parse_fraction)]
        scan_coverage: f64,
        #[arg(long, default_value = "1", value_parser = parse_fraction)]
        rdap_coverage: f64,
        #[arg(long, default_value = "0", value_parser = parse_fraction)]
        rdap_date_omission: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Query RDAP servers for domains, with an on-disk response cache.
    FetchRdap {
        /// File with one domain per line.
        #[arg(long)]
        domains: PathBuf,
        /// IANA RDAP bootstrap file (dns.json).
        #[arg(long)]
        bootstrap: Option<PathBuf>,
        /// Extra endpoint as SUFFIX=BASE_URL; repeatable.
        #[arg(long = "endpoint")]
        endpoints: Vec<String>,
        #[arg(long, env = CACHE_DIR_ENV)]
        cache_dir: PathBuf,
        /// Date recorded as the query time; defaults to today (UTC).
        #[arg(long, value_parser = parse_day)]
        query_date: Option<DayDate>,
        /// Permit network requests; without it only cached responses are used.
        #[arg(long)]
        allow_network: bool,
        /// Minimum spacing between requests to one server, in milliseconds.
        #[arg(long, default_value_t = 1000)]
        min_interval_ms: u64,
        #[arg(long, default_value_t = 4)]
        max_retries: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the whole pipeline on a directory and write every report table.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, env = OUT_DIR_ENV)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Subcommand)]
enum StatsCommand {
    /// Kaplan-Meier curve from a `time,event` CSV.
    Km {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two-sided Mann-Whitney U test of two samples, one value per line.
    Mwu {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, value_parser = parse_mwu, default_value = "auto")]
        method: MwuMethod,
        #[arg(long)]
        out: PathBuf,
    },
    /// Daily zombie fraction per ecosystem.
    Fraction(VerdictStats),
    /// Kaplan-Meier curves of DNS lifespans by linkage cohort.
    Cohorts(VerdictStats),
    /// Zombie duration distributions of certificates.
    Durations(VerdictStats),
    /// Registration-to-linkage gaps, zombie vs. live.
    Gaps(VerdictStats),
}

#[derive(Debug, Args)]
struct VerdictStats {
    #[arg(long)]
    verdicts: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_DATA
            }
        }
    }
}

fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Infer { obs, rdap, out, common } => cmd_infer(&obs, rdap.as_deref(), &out, &common),
        Command::Classify { epochs, linkages, ecosystem, out, common } => {
            cmd_classify(&epochs, &linkages, ecosystem, &out, &common)
        }
        Command::Stats { which } => cmd_stats(which),
        Command::Indicators { verdicts, serving, design_config, out, common } => {
            cmd_indicators(&verdicts, serving.as_deref(), design_config.as_deref(), &out, &common)
        }
        Command::Synth {
            params,
            seed,
            noise_seed,
            zone_coverage,
            scan_coverage,
            rdap_coverage,
            rdap_date_omission,
            out,
        } => {
            let noise = NoiseModel { zone_coverage, scan_coverage, rdap_coverage, rdap_date_omission };
            cmd_synth(params.as_deref(), seed, noise_seed.unwrap_or(seed), noise, &out)
        }
        Command::FetchRdap {
            domains,
            bootstrap,
            endpoints,
            cache_dir,
            query_date,
            allow_network,
            min_interval_ms,
            max_retries,
            out,
        } => {
            let config = FetchConfig {
                min_interval: Duration::from_millis(min_interval_ms),
                max_retries,
                allow_network,
                ..FetchConfig::default()
            };
            cmd_fetch_rdap(&domains, bootstrap.as_deref(), &endpoints, &cache_dir, query_date, config, &out)
        }
        Command::Report { input, out, common } => {
            let (cfg, json) = common.resolve()?;
            if same_dir(&input, &out) {
                return Err(usage("--in and --out must be different directories"));
            }
            let a = run_report(&input, &out, &cfg, json)?;
            info!("report for {} written to {} (as of {})", input.display(), out.display(), a.as_of);
            Ok(())
        }
    }
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

/// Sidecar manifest path for a single-file output.
pub fn sidecar_manifest(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(OsString::from).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn write_sidecar(
    out: &Path,
    records: u64,
    inputs: &[(&Path, Option<u64>)],
    window: Option<ObservationWindow>,
    config: serde_json::Value,
) -> anyhow::Result<()> {
    let base = base_dir(out);
    let mut m = DatasetManifest::new();
    m.window = window;
    m.config = config;
    for (p, n) in inputs {
        m.add_input(&base, p, *n)?;
    }
    m.add_output(&base, out, Some(records))?;
    m.save(&sidecar_manifest(out))?;
    Ok(())
}

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

/// `--obs -` reads observations from standard input.
fn is_stdin(path: &Path) -> bool {
    path.as_os_str() == "-"
}

fn cmd_infer(obs: &Path, rdap: Option<&Path>, out: &Path, common: &Common) -> anyhow::Result<()> {
    let (cfg, json) = common.resolve()?;
    let records = match rdap {
        Some(p) => load_rdap(p)?,
        None => Vec::new(),
    };
    let n_rdap = records.len() as u64;
    let rdap_map = group_rdap(records);
    let stdin = is_stdin(obs);
    let window = match (cfg.window_start, cfg.window_end) {
        (Some(first), Some(last)) => ObservationWindow::new(first, last)?,
        _ if stdin => return Err(usage("reading observations from stdin needs --window-start and --window-end")),
        (first, last) => {
            let Some((lo, hi)) = observation_span(obs)? else {
                bail!("{} contains no observations", obs.display());
            };
            ObservationWindow::new(first.unwrap_or(lo), last.unwrap_or(hi))?
        }
    };

    let mut timelines = Vec::new();
    let mut push = |tl| {
        timelines.push(tl);
        Ok(())
    };
    let streamed = if stdin {
        let mut reader = DigestReader::new(std::io::stdin().lock());
        let groups = GroupedObservations::from_reader(Path::new("<stdin>"), &mut reader)?;
        infer_streaming(groups, &rdap_map, &cfg.params, window, &mut push).map(|n| (n, reader.hex_digest()))
    } else {
        let f = std::fs::File::open(obs).with_context(|| format!("opening {}", obs.display()))?;
        let mut reader = DigestReader::new(BufReader::with_capacity(1 << 16, f));
        let groups = GroupedObservations::from_reader(obs, &mut reader)?;
        infer_streaming(groups, &rdap_map, &cfg.params, window, &mut push).map(|n| (n, reader.hex_digest()))
    };
    let (domains, obs_digest) = match streamed {
        Ok(done) => done,
        Err(dnszombie::Error::NotGrouped { domain, .. }) if !stdin => {
            info!("{} is not grouped by domain (`{domain}` recurs); loading it whole", obs.display());
            let set = load_observations(obs)?;
            timelines = infer_all(&set, &rdap_map, &cfg.params, window)?;
            (set.len(), sha256_file(obs)?)
        }
        Err(e) => return Err(e.into()),
    };
    if domains == 0 {
        bail!("{} contains no observations", obs.display());
    }
    timelines.sort_by(|a, b| a.domain.cmp(&b.domain));
    ensure_parent(out)?;
    let n = save_epochs(out, &timelines)?;

    let base = base_dir(out);
    let mut m = DatasetManifest::new();
    m.window = Some(window);
    m.config = json;
    m.inputs.push(FileEntry {
        path: obs.strip_prefix(&base).unwrap_or(obs).to_path_buf(),
        records: Some(domains as u64),
        sha256: obs_digest,
    });
    if let Some(p) = rdap {
        m.add_input(&base, p, Some(n_rdap))?;
    }
    m.add_output(&base, out, Some(n))?;
    m.save(&sidecar_manifest(out))?;
    info!("{n} timelines written to {}", out.display());
    Ok(())
}

fn timelines_window(timelines: &[EpochTimeline]) -> Option<ObservationWindow> {
    let first = timelines.iter().map(|t| t.window.first).min()?;
    let last = timelines.iter().map(|t| t.window.last).max()?;
    Some(ObservationWindow { first, last })
}

fn cmd_classify(epochs: &Path, linkages: &Path, eco: Ecosystem, out: &Path, common: &Common) -> anyhow::Result<()> {
    let (cfg, json) = common.resolve()?;
    let timelines = load_epochs(epochs)?;
    let n_tl = timelines.len() as u64;
    let window = timelines_window(&timelines);
    let as_of = match (cfg.as_of, window) {
        (Some(d), _) => d,
        (None, Some(w)) => w.last,
        (None, None) => return Err(usage("no timelines to take a window from; pass --as-of")),
    };
    let input = load_linkage_input(linkages, eco)?;
    let n_in = input.len() as u64;
    let linkages_list = linkages_from_input(&input, &cfg.suffix_rules()?, &cfg.gasless_prefix)?;
    let mut verdicts = batch_classify(&linkages_list, &timelines_by_domain(timelines), as_of).verdicts;
    sort_verdicts(&mut verdicts);
    ensure_parent(out)?;
    let n = save_verdicts(out, &verdicts)?;
    write_sidecar(out, n, &[(epochs, Some(n_tl)), (linkages, Some(n_in))], window, json)?;
    Ok(())
}

fn load_sorted_verdicts(path: &Path) -> anyhow::Result<Vec<ZombieVerdict>> {
    let mut v = load_verdicts(path)?;
    sort_verdicts(&mut v);
    Ok(v)
}

fn verdicts_as_of(verdicts: &[ZombieVerdict], cfg: &RunConfig) -> anyhow::Result<DayDate> {
    match (cfg.as_of, verdicts.first()) {
        (Some(d), _) => Ok(d),
        (None, Some(v)) => Ok(v.as_of),
        (None, None) => Err(usage("verdict file is empty; pass --as-of")),
    }
}

fn cmd_stats(which: StatsCommand) -> anyhow::Result<()> {
    let (s, kind) = match which {
        StatsCommand::Km { input, out } => return stats_km(&input, &out),
        StatsCommand::Mwu { a, b, method, out } => return stats_mwu(&a, &b, method, &out),
        StatsCommand::Fraction(s) => (s, TableKind::Series),
        StatsCommand::Cohorts(s) => (s, TableKind::Lifespans),
        StatsCommand::Durations(s) => (s, TableKind::Durations),
        StatsCommand::Gaps(s) => (s, TableKind::Gaps),
    };
    let (cfg, json) = s.common.resolve()?;
    let verdicts = load_sorted_verdicts(&s.verdicts)?;
    let as_of = verdicts_as_of(&verdicts, &cfg)?;
    let from = cfg
        .window_start
        .or_else(|| verdicts.iter().map(|v| v.linkage.birth).min())
        .unwrap_or(as_of);
    let to = cfg.window_end.map_or(as_of, |e| e.min(as_of));
    let analysis = analyze(&verdicts, &[], &cfg, from, to)?;
    ensure_parent(&s.out)?;
    let n = report::write_table(&analysis, kind, &s.out)?;
    write_sidecar(&s.out, n, &[(&s.verdicts, Some(verdicts.len() as u64))], None, json)
}

fn stats_km(input: &Path, out: &Path) -> anyhow::Result<()> {
    let mut reader = csv::Reader::from_path(input).with_context(|| format!("reading {}", input.display()))?;
    let mut obs = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let time: i32 = rec
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .with_context(|| format!("{}:{line}: bad time", input.display()))?;
        let event = match rec.get(1).map(str::trim) {
            Some("1" | "true") => true,
            Some("0" | "false") => false,
            _ => bail!("{}:{line}: event must be 0/1 or true/false", input.display()),
        };
        obs.push(SurvivalObs { time, event });
    }
    let curve = kaplan_meier(&obs)?;
    ensure_parent(out)?;
    let mut w = csv::Writer::from_path(out)?;
    w.write_record(["time", "survival", "at_risk", "events", "censored"])?;
    for p in &curve.points {
        w.write_record([
            p.time.to_string(),
            p.survival.to_string(),
            p.at_risk.to_string(),
            p.events.to_string(),
            p.censored.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn read_sample(path: &Path) -> anyhow::Result<Vec<f64>> {
    let f = std::fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: f64 = t
            .parse()
            .with_context(|| format!("{}:{}: `{t}` is not a number", path.display(), i + 1))?;
        if !v.is_finite() {
            bail!("{}:{}: value must be finite", path.display(), i + 1);
        }
        out.push(v);
    }
    Ok(out)
}

fn stats_mwu(a: &Path, b: &Path, method: MwuMethod, out: &Path) -> anyhow::Result<()> {
    let r = mann_whitney_u_with(&read_sample(a)?, &read_sample(b)?, method)?;
    ensure_parent(out)?;
    let mut text = serde_json::to_string_pretty(&r)?;
    text.push('\n');
    std::fs::write(out, text).with_context(|| format!("writing {}", out.display()))
}

fn cmd_indicators(
    verdicts_path: &Path,
    serving_path: Option<&Path>,
    design: Option<&Path>,
    out: &Path,
    common: &Common,
) -> anyhow::Result<()> {
    if design.is_some() && common.config.is_some() {
        return Err(usage("give either --design-config or --config, not both"));
    }
    let (cfg, json) = common.resolve_with(design.or(common.config.as_deref()))?;
    let verdicts = load_sorted_verdicts(verdicts_path)?;
    let serving = match serving_path {
        Some(p) => load_serving(p)?,
        None => Vec::new(),
    };
    let as_of = verdicts_as_of(&verdicts, &cfg)?;
    let analysis = analyze(&verdicts, &serving, &cfg, as_of, as_of)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let kinds = [TableKind::Matrix, TableKind::Served, TableKind::MavenBreakdown, TableKind::Summary];
    let tables = write_tables(&analysis, &kinds, out)?;
    let mut m = DatasetManifest::new();
    m.config = json;
    m.add_input(out, verdicts_path, Some(verdicts.len() as u64))?;
    if let Some(p) = serving_path {
        m.add_input(out, p, Some(serving.len() as u64))?;
    }
    for (p, n) in tables {
        m.add_output(out, &p, Some(n))?;
    }
    m.save(&out.join(MANIFEST_FILE))?;
    Ok(())
}

fn load_world_params(path: Option<&Path>) -> anyhow::Result<WorldParams> {
    let Some(path) = path else { return Ok(WorldParams::default()) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let params: WorldParams = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| usage(format!("{}: {}", path.display(), e.message())))?
    };
    params.validate().map_err(|e| usage(e.to_string()))?;
    Ok(params)
}

fn cmd_synth(params: Option<&Path>, seed: u64, noise_seed: u64, noise: NoiseModel, out: &Path) -> anyhow::Result<()> {
    let wp = load_world_params(params)?;
    noise.validate().map_err(|e| usage(e.to_string()))?;
    let world = generate_world(&wp, seed)?;
    let files = emit_observations(&world, &noise, noise_seed, out)?;
    let mut m = DatasetManifest::new();
    m.window = Some(wp.window());
    m.config = serde_json::json!({
        "seed": seed,
        "noise_seed": noise_seed,
        "noise": noise,
        "params": wp,
    });
    for p in [
        &files.observations,
        &files.rdap,
        &files.certificates,
        &files.ens_claims,
        &files.maven_versions,
        &files.gasless_txt,
        &files.serving,
        &files.truth,
        &files.world,
    ] {
        m.add_output(out, p, None)?;
    }
    m.save(&out.join(MANIFEST_FILE))?;
    info!("{} domains written to {}", world.domains.len(), out.display());
    Ok(())
}

fn today() -> DayDate {
    DayDate::from(chrono::Utc::now().date_naive())
}

fn cmd_fetch_rdap(
    domains_path: &Path,
    bootstrap: Option<&Path>,
    extra: &[String],
    cache_dir: &Path,
    query_date: Option<DayDate>,
    config: FetchConfig,
    out: &Path,
) -> anyhow::Result<()> {
    let mut endpoints = match bootstrap {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Endpoints::from_bootstrap(&text)?
        }
        None => Endpoints::default(),
    };
    for e in extra {
        let Some((suffix, url)) = e.split_once('=') else {
            return Err(usage(format!("--endpoint `{e}` must look like SUFFIX=URL")));
        };
        endpoints.insert(suffix, url);
    }
    if endpoints.0.is_empty() {
        return Err(usage("no RDAP endpoints: pass --bootstrap or --endpoint"));
    }
    let text = std::fs::read_to_string(domains_path).with_context(|| format!("reading {}", domains_path.display()))?;
    let domains: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_ascii_lowercase)
        .collect();
    let mut fetcher = RdapFetcher::new(endpoints, cache_dir, config)?;
    let outcome = fetcher.fetch(&domains, query_date.unwrap_or_else(today))?;
    ensure_parent(out)?;
    let n = save_jsonl(out, &outcome.records)?;
    if outcome.is_partial() {
        warn!(
            "partial result: {} skipped, {} throttled, {} not cached, {} failed",
            outcome.skipped.len(),
            outcome.throttled.len(),
            outcome.uncached.len(),
            outcome.failed.len()
        );
    }
    let json = serde_json::json!({
        "partial": outcome.is_partial(),
        "skipped": outcome.skipped,
        "throttled": outcome.throttled,
        "uncached": outcome.uncached,
        "failed": outcome.failed,
        "network_calls": outcome.network_calls,
    });
    write_sidecar(out, n, &[(domains_path, Some(domains.len() as u64))], None, json)
}
