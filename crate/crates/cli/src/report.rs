//! Full-pipeline analysis of an input directory and the CSV tables written
//! from it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use dnszombie::classify::{batch_classify, summarize, EcosystemSummary, ZombieVerdict};
use dnszombie::dataio::{
    load_epochs, load_linkage_input, load_linkages, load_observations, load_rdap, load_serving,
    load_verdicts, save_verdicts, DatasetManifest, MANIFEST_FILE,
};
use dnszombie::epoch::{EpochTimeline, ObservationWindow};
use dnszombie::indicators::{
    agp_death_stats, indicator_matrix, maven_activity_breakdown, revocation_comparison,
    served_after_death, served_after_rereg, AgpStats, IndicatorMatrix, MavenActivityBreakdown,
    ReregServedReport, RevocationComparison, ServedReport, ServingObservation,
};
use dnszombie::linkage::{Ecosystem, Linkage};
use dnszombie::pipeline::{group_rdap, infer_all, linkages_from_input, observed_window, timelines_by_domain};
use dnszombie::stats::{
    cohort_lifespans, duration_distributions, registration_to_linkage_gaps, zombie_fraction_series,
    CohortLifespans, CohortSpec, DurationDistributions, Ecdf, GapReport, TimeSeries,
};
use dnszombie::DayDate;

use crate::config::RunConfig;

pub const VERDICTS_FILE: &str = "verdicts.jsonl";
pub const EPOCHS_FILE: &str = "epochs.jsonl";
pub const LINKAGES_FILE: &str = "linkages.jsonl";
pub const OBSERVATIONS_FILE: &str = "observations.csv";
pub const RDAP_FILE: &str = "rdap.jsonl";
pub const SERVING_FILE: &str = "serving.csv";

/// Raw ecosystem inputs recognised in an input directory.
pub const ECOSYSTEM_FILES: [(&str, Ecosystem); 4] = [
    ("certificates.jsonl", Ecosystem::Webpki),
    ("ens_claims.jsonl", Ecosystem::EnsOnchain),
    ("gasless_txt.jsonl", Ecosystem::EnsGasless),
    ("maven_versions.jsonl", Ecosystem::Maven),
];

/// Verdicts and serving data ready for aggregation, plus the files they
/// came from.
#[derive(Debug)]
pub struct LoadedInputs {
    pub verdicts: Vec<ZombieVerdict>,
    pub serving: Vec<ServingObservation>,
    pub series_from: DayDate,
    pub as_of: DayDate,
    pub window: Option<ObservationWindow>,
    pub files: Vec<(PathBuf, Option<u64>)>,
}

/// Sort key that makes every aggregate independent of input order.
fn verdict_key(v: &ZombieVerdict) -> impl Ord + '_ {
    let l = &v.linkage;
    (l.ecosystem, &l.dns_name, &l.linked_name, l.birth, &l.fqdn, l.death)
}

pub fn sort_verdicts(verdicts: &mut [ZombieVerdict]) {
    verdicts.sort_by(|a, b| verdict_key(a).cmp(&verdict_key(b)));
}

fn window_from_manifest(dir: &Path) -> anyhow::Result<Option<ObservationWindow>> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(None);
    }
    Ok(DatasetManifest::load(&path)?.window)
}

fn configured_window(cfg: &RunConfig, fallback: Option<ObservationWindow>) -> anyhow::Result<Option<ObservationWindow>> {
    let first = cfg.window_start.or(fallback.map(|w| w.first));
    let last = cfg.window_end.or(fallback.map(|w| w.last));
    Ok(match (first, last) {
        (Some(f), Some(l)) => Some(ObservationWindow::new(f, l)?),
        _ => None,
    })
}

/// Linkages from `linkages.jsonl` and any raw ecosystem files in `dir`.
fn load_dir_linkages(
    dir: &Path,
    cfg: &RunConfig,
    files: &mut Vec<(PathBuf, Option<u64>)>,
) -> anyhow::Result<Option<Vec<Linkage>>> {
    let mut found = false;
    let mut linkages = Vec::new();
    let normalized = dir.join(LINKAGES_FILE);
    if normalized.exists() {
        let v = load_linkages(&normalized)?;
        files.push((normalized, Some(v.len() as u64)));
        linkages.extend(v);
        found = true;
    }
    let rules = cfg.suffix_rules()?;
    for (name, eco) in ECOSYSTEM_FILES {
        let path = dir.join(name);
        if !path.exists() {
            continue;
        }
        let input = load_linkage_input(&path, eco)?;
        files.push((path, Some(input.len() as u64)));
        linkages.extend(linkages_from_input(&input, &rules, &cfg.gasless_prefix)?);
        found = true;
    }
    Ok(found.then_some(linkages))
}

/// Timelines from `epochs.jsonl`, or inferred from `observations.csv` and
/// an optional `rdap.jsonl`.
fn load_dir_timelines(
    dir: &Path,
    cfg: &RunConfig,
    manifest_window: Option<ObservationWindow>,
    files: &mut Vec<(PathBuf, Option<u64>)>,
) -> anyhow::Result<Option<(Vec<EpochTimeline>, Option<ObservationWindow>)>> {
    let epochs = dir.join(EPOCHS_FILE);
    if epochs.exists() {
        let timelines = load_epochs(&epochs)?;
        files.push((epochs, Some(timelines.len() as u64)));
        let first = timelines.iter().map(|t| t.window.first).min();
        let last = timelines.iter().map(|t| t.window.last).max();
        let span = first.zip(last).map(|(first, last)| ObservationWindow { first, last });
        return Ok(Some((timelines, configured_window(cfg, manifest_window.or(span))?)));
    }
    let obs_path = dir.join(OBSERVATIONS_FILE);
    if !obs_path.exists() {
        return Ok(None);
    }
    let obs = load_observations(&obs_path)?;
    files.push((obs_path.clone(), Some(obs.len() as u64)));
    let rdap_path = dir.join(RDAP_FILE);
    let rdap = if rdap_path.exists() {
        let r = load_rdap(&rdap_path)?;
        files.push((rdap_path, Some(r.len() as u64)));
        r
    } else {
        Vec::new()
    };
    let window = configured_window(cfg, manifest_window.or_else(|| observed_window(&obs))).context("window")?;
    let Some(window) = window else {
        bail!("{} has no observations; cannot determine the observation window", obs_path.display());
    };
    let timelines = infer_all(&obs, &group_rdap(rdap), &cfg.params, window)?;
    Ok(Some((timelines, Some(window))))
}

/// Loads whatever the directory offers: precomputed verdicts, or timelines
/// (given or inferred) plus linkages.
pub fn load_inputs(dir: &Path, cfg: &RunConfig) -> anyhow::Result<LoadedInputs> {
    if !dir.is_dir() {
        bail!("input directory {} does not exist", dir.display());
    }
    let manifest_window = window_from_manifest(dir)?;
    let mut files = Vec::new();
    let verdicts_path = dir.join(VERDICTS_FILE);
    let (verdicts, window) = if verdicts_path.exists() {
        let v = load_verdicts(&verdicts_path)?;
        files.push((verdicts_path, Some(v.len() as u64)));
        (v, configured_window(cfg, manifest_window)?)
    } else {
        let linkages = load_dir_linkages(dir, cfg, &mut files)?;
        let timelines = load_dir_timelines(dir, cfg, manifest_window, &mut files)?;
        let (linkages, (timelines, window)) = match (linkages, timelines) {
            (Some(l), Some(t)) => (l, t),
            (None, None) => bail!(
                "{} contains no recognised inputs (expected {VERDICTS_FILE}, or linkage files with {EPOCHS_FILE} or {OBSERVATIONS_FILE})",
                dir.display()
            ),
            (None, Some(_)) => bail!("{} has epoch data but no linkage files", dir.display()),
            (Some(_), None) => bail!("{} has linkages but no {EPOCHS_FILE} or {OBSERVATIONS_FILE}", dir.display()),
        };
        let as_of = match (cfg.as_of, window) {
            (Some(d), _) => d,
            (None, Some(w)) => w.last,
            (None, None) => bail!("no as-of date: set as_of or provide a window"),
        };
        let outcome = batch_classify(&linkages, &timelines_by_domain(timelines), as_of);
        (outcome.verdicts, window)
    };
    let serving_path = dir.join(SERVING_FILE);
    let serving = if serving_path.exists() {
        let s = load_serving(&serving_path)?;
        files.push((serving_path, Some(s.len() as u64)));
        s
    } else {
        Vec::new()
    };
    let as_of = match cfg.as_of {
        Some(d) => d,
        None => match verdicts.first() {
            Some(v) => v.as_of,
            None => window.map(|w| w.last).context("no verdicts and no as-of date")?,
        },
    };
    let series_from = window
        .map(|w| w.first)
        .or_else(|| verdicts.iter().map(|v| v.linkage.birth).min())
        .unwrap_or(as_of);
    let mut verdicts = verdicts;
    sort_verdicts(&mut verdicts);
    Ok(LoadedInputs { verdicts, serving, series_from, as_of, window, files })
}

/// Every aggregate the report tables are built from.
#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub as_of: DayDate,
    pub summary: BTreeMap<Ecosystem, EcosystemSummary>,
    pub series: TimeSeries,
    pub lifespans: BTreeMap<Ecosystem, CohortLifespans>,
    pub durations: DurationDistributions,
    pub served: ServedReport,
    pub served_rereg: ReregServedReport,
    pub revocation: RevocationComparison,
    pub maven: MavenActivityBreakdown,
    pub matrix: IndicatorMatrix,
    pub gaps: BTreeMap<Ecosystem, GapReport>,
    pub agp: BTreeMap<Ecosystem, AgpStats>,
}

/// Aggregates sorted verdicts. The daily series runs from `series_from`
/// through `as_of`.
pub fn analyze(
    verdicts: &[ZombieVerdict],
    serving: &[ServingObservation],
    cfg: &RunConfig,
    series_from: DayDate,
    as_of: DayDate,
) -> anyhow::Result<Analysis> {
    let mut by_eco: BTreeMap<Ecosystem, Vec<ZombieVerdict>> = BTreeMap::new();
    for v in verdicts {
        by_eco.entry(v.linkage.ecosystem).or_default().push(v.clone());
    }
    let empty = Vec::new();
    let webpki = by_eco.get(&Ecosystem::Webpki).unwrap_or(&empty);
    let mut lifespans = BTreeMap::new();
    let mut gaps = BTreeMap::new();
    let mut agp = BTreeMap::new();
    for (eco, vs) in &by_eco {
        let width = cfg.cohort_years.get(eco).copied().unwrap_or(1);
        lifespans.insert(*eco, cohort_lifespans(vs, CohortSpec::new(width)?)?);
        gaps.insert(*eco, registration_to_linkage_gaps(vs, cfg.mwu_method));
        agp.insert(*eco, agp_death_stats(vs, cfg.agp_days));
    }
    Ok(Analysis {
        as_of,
        summary: summarize(verdicts),
        series: zombie_fraction_series(verdicts, series_from, as_of),
        lifespans,
        durations: duration_distributions(webpki),
        served: served_after_death(serving, webpki),
        served_rereg: served_after_rereg(serving, webpki),
        revocation: revocation_comparison(webpki),
        maven: maven_activity_breakdown(verdicts),
        matrix: indicator_matrix(verdicts, &Ecosystem::ALL, &cfg.design, cfg.agp_days)?,
        gaps,
        agp,
    })
}

/// One CSV table of the report.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableKind {
    Series,
    Lifespans,
    Durations,
    Served,
    Matrix,
    MavenBreakdown,
    Gaps,
    Summary,
}

impl TableKind {
    pub const ALL: [TableKind; 8] = [
        TableKind::Series,
        TableKind::Lifespans,
        TableKind::Durations,
        TableKind::Served,
        TableKind::Matrix,
        TableKind::MavenBreakdown,
        TableKind::Gaps,
        TableKind::Summary,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            TableKind::Series => "fig3_series.csv",
            TableKind::Lifespans => "fig4_lifespans.csv",
            TableKind::Durations => "fig5_durations.csv",
            TableKind::Served => "fig6_served.csv",
            TableKind::Matrix => "table4_matrix.csv",
            TableKind::MavenBreakdown => "table5_breakdown.csv",
            TableKind::Gaps => "appd_gaps.csv",
            TableKind::Summary => "summary.csv",
        }
    }

    fn header(self) -> &'static [&'static str] {
        match self {
            TableKind::Series => &["date", "ecosystem", "active", "zombies", "fraction"],
            TableKind::Lifespans => &["ecosystem", "cohort", "time", "survival", "at_risk", "events", "censored"],
            TableKind::Durations => &["series", "value", "cdf"],
            TableKind::Served => &["series", "days", "cdf"],
            TableKind::Matrix => &["attack", "ecosystem", "indicator", "supporting_count", "population"],
            TableKind::MavenBreakdown => &["row", "depth", "count", "share_of_total"],
            TableKind::Gaps => &["ecosystem", "group", "gap_days", "count"],
            TableKind::Summary => &["metric", "ecosystem", "value"],
        }
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

type Row = Vec<String>;

fn ecdf_rows(out: &mut Vec<Row>, series: &str, e: &Ecdf) {
    for (x, p) in e.points() {
        out.push(vec![series.to_string(), x.to_string(), p.to_string()]);
    }
}

/// Data rows of one table, without the header.
pub fn table_rows(a: &Analysis, kind: TableKind) -> Vec<Row> {
    let mut out: Vec<Row> = Vec::new();
    match kind {
        TableKind::Series => {
            for (eco, rows) in &a.series.by_ecosystem {
                for r in rows {
                    out.push(vec![
                        r.date.to_string(),
                        eco.to_string(),
                        r.active.to_string(),
                        r.zombies.to_string(),
                        r.fraction.to_string(),
                    ]);
                }
            }
        }
        TableKind::Lifespans => {
            for (eco, l) in &a.lifespans {
                let labelled = l
                    .cohorts
                    .iter()
                    .map(|c| {
                        let label = if c.first_year == c.last_year {
                            c.first_year.to_string()
                        } else {
                            format!("{}-{}", c.first_year, c.last_year)
                        };
                        (label, &c.curve)
                    })
                    .chain(l.overall.iter().map(|c| ("all".to_string(), c)));
                for (label, curve) in labelled {
                    for p in &curve.points {
                        out.push(vec![
                            eco.to_string(),
                            label.clone(),
                            p.time.to_string(),
                            p.survival.to_string(),
                            p.at_risk.to_string(),
                            p.events.to_string(),
                            p.censored.to_string(),
                        ]);
                    }
                }
            }
        }
        TableKind::Durations => {
            let d = &a.durations;
            ecdf_rows(&mut out, "remaining_validity", &d.remaining_validity);
            ecdf_rows(&mut out, "observed", &d.observed);
            ecdf_rows(&mut out, "revoked_observed", &d.revoked_observed);
            ecdf_rows(&mut out, "revoked_reduction", &d.revoked_reduction);
            ecdf_rows(&mut out, "revoked_reduction_share", &d.revoked_reduction_share);
        }
        TableKind::Served => {
            ecdf_rows(&mut out, "after_death", &a.served.days_served);
            ecdf_rows(&mut out, "after_rereg", &a.served_rereg.days_served);
        }
        TableKind::Matrix => {
            for c in &a.matrix.cells {
                out.push(vec![
                    c.attack.as_str().to_string(),
                    c.ecosystem.to_string(),
                    c.indicator.as_str().to_string(),
                    opt(c.supporting_count),
                    opt(c.population),
                ]);
            }
        }
        TableKind::MavenBreakdown => {
            for (label, depth, count) in a.maven.rows() {
                let share = if a.maven.total == 0 { 0.0 } else { count as f64 / a.maven.total as f64 };
                out.push(vec![label.to_string(), depth.to_string(), count.to_string(), share.to_string()]);
            }
        }
        TableKind::Gaps => {
            for (eco, g) in &a.gaps {
                for (group, values) in [("zombie", &g.zombie), ("non_zombie", &g.non_zombie)] {
                    let mut hist: BTreeMap<i32, u64> = BTreeMap::new();
                    for &v in values {
                        *hist.entry(v).or_default() += 1;
                    }
                    for (gap, n) in hist {
                        out.push(vec![eco.to_string(), group.to_string(), gap.to_string(), n.to_string()]);
                    }
                }
            }
        }
        TableKind::Summary => {
            for (metric, eco, value) in summary_rows(a) {
                out.push(vec![metric.to_string(), eco, value]);
            }
        }
    }
    out
}

/// Writes one table to `path`; returns the number of data rows.
pub fn write_table(a: &Analysis, kind: TableKind, path: &Path) -> anyhow::Result<u64> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(kind.header())?;
    let rows = table_rows(a, kind);
    for r in &rows {
        w.write_record(r)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(rows.len() as u64)
}

/// Writes `kinds` into `dir` and returns each file with its row count.
pub fn write_tables(a: &Analysis, kinds: &[TableKind], dir: &Path) -> anyhow::Result<Vec<(PathBuf, u64)>> {
    kinds
        .iter()
        .map(|&k| {
            let path = dir.join(k.file_name());
            let n = write_table(a, k, &path)?;
            Ok((path, n))
        })
        .collect()
}

/// `(metric, ecosystem, value)` rows of `summary.csv`.
pub fn summary_rows(a: &Analysis) -> Vec<(&'static str, String, String)> {
    let mut rows: Vec<(&'static str, String, String)> = Vec::new();
    let all = "all".to_string();
    rows.push(("as_of", all.clone(), a.as_of.to_string()));
    for (eco, s) in &a.summary {
        let e = eco.to_string();
        rows.push(("linkages", e.clone(), s.total.to_string()));
        rows.push(("active", e.clone(), s.active.to_string()));
        rows.push(("zombies", e.clone(), s.zombies.to_string()));
        rows.push(("active_zombies", e.clone(), s.active_zombies.to_string()));
        rows.push(("live", e.clone(), s.live.to_string()));
        rows.push(("indeterminate", e.clone(), s.indeterminate.to_string()));
        rows.push(("exempt", e.clone(), s.exempt.to_string()));
        rows.push(("zombie_fraction", e.clone(), s.zombie_fraction().to_string()));
    }
    for (eco, s) in &a.agp {
        let e = eco.to_string();
        rows.push(("agp_zombies", e.clone(), s.zombies.to_string()));
        rows.push(("agp_within", e.clone(), s.within_agp.to_string()));
        rows.push(("agp_fraction", e, s.fraction().to_string()));
    }
    for (eco, g) in &a.gaps {
        let e = eco.to_string();
        rows.push(("gap_zombie_n", e.clone(), g.zombie.len().to_string()));
        rows.push(("gap_non_zombie_n", e.clone(), g.non_zombie.len().to_string()));
        rows.push(("gap_zombie_median", e.clone(), opt(g.zombie_median)));
        rows.push(("gap_non_zombie_median", e.clone(), opt(g.non_zombie_median)));
        if let Some(m) = &g.mwu {
            rows.push(("gap_mwu_u_zombie", e.clone(), m.u_a.to_string()));
            rows.push(("gap_mwu_u_non_zombie", e.clone(), m.u_b.to_string()));
            rows.push(("gap_mwu_z", e.clone(), m.z.to_string()));
            rows.push(("gap_mwu_p", e.clone(), m.p_two_sided.to_string()));
            let method = serde_json::to_value(m.method).ok().and_then(|v| v.as_str().map(str::to_string));
            rows.push(("gap_mwu_method", e, method.unwrap_or_default()));
        }
    }
    let web = Ecosystem::Webpki.to_string();
    let r = &a.revocation;
    rows.push(("revocation_rereg_total", web.clone(), r.rereg_total.to_string()));
    rows.push(("revocation_rereg_revoked", web.clone(), r.rereg_revoked.to_string()));
    rows.push(("revocation_rereg_rate", web.clone(), r.rate_rereg().to_string()));
    rows.push(("revocation_no_rereg_total", web.clone(), r.no_rereg_total.to_string()));
    rows.push(("revocation_no_rereg_revoked", web.clone(), r.no_rereg_revoked.to_string()));
    rows.push(("revocation_no_rereg_rate", web.clone(), r.rate_no_rereg().to_string()));
    rows.push(("revocation_ratio", web.clone(), opt(r.ratio())));
    let d = &a.durations;
    rows.push(("duration_zombies", web.clone(), d.zombies().to_string()));
    rows.push(("duration_revoked_fraction", web.clone(), d.revoked_fraction().to_string()));
    rows.push(("duration_observed_median", web.clone(), opt(d.observed.median())));
    let s = &a.served;
    rows.push(("served_certificates", web.clone(), s.days_served.len().to_string()));
    rows.push(("served_never_fraction", web.clone(), s.never_served_fraction().to_string()));
    rows.push(("served_60_days_fraction", web.clone(), s.served_at_least_fraction(60).to_string()));
    rows.push(("served_ignored_observations", web.clone(), s.ignored_observations.to_string()));
    let sr = &a.served_rereg;
    rows.push(("rereg_zombies", web.clone(), sr.zombies.to_string()));
    rows.push(("rereg_overlapping", web.clone(), sr.overlapping.to_string()));
    rows.push(("rereg_served_past", web.clone(), sr.served_past.to_string()));
    rows.push(("rereg_served_median_days", web, opt(sr.days_served.median())));
    rows
}

/// Runs the whole analysis for `in_dir` and writes tables, verdicts and a
/// manifest into `out_dir`.
pub fn run_report(in_dir: &Path, out_dir: &Path, cfg: &RunConfig, config_json: serde_json::Value) -> anyhow::Result<Analysis> {
    let inputs = load_inputs(in_dir, cfg)?;
    let analysis = analyze(&inputs.verdicts, &inputs.serving, cfg, inputs.series_from, inputs.as_of)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let tables = write_tables(&analysis, &TableKind::ALL, out_dir)?;
    let verdicts_out = out_dir.join(VERDICTS_FILE);
    let n = save_verdicts(&verdicts_out, &inputs.verdicts)?;

    let mut manifest = DatasetManifest::new();
    manifest.window = inputs.window;
    manifest.config = config_json;
    for (path, records) in &inputs.files {
        manifest.add_input(in_dir, path, *records)?;
    }
    for (path, rows) in tables {
        manifest.add_output(out_dir, &path, Some(rows))?;
    }
    manifest.add_output(out_dir, &verdicts_out, Some(n))?;
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(analysis)
}
