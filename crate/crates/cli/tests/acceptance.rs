//! Acceptance harness: prints one PASS/FAIL line per criterion.
//!
//! Exits non-zero when a criterion fails that is not listed in
//! `KNOWN_UNATTAINABLE`.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use dnszombie::classify::{batch_classify, classify_linkage, VerdictStatus};
use dnszombie::dataio::{self, DatasetManifest, LinkageInput};
use dnszombie::epoch::{
    apply_rdap_negatives, apply_rdap_positives, infer_epochs, merge_adjacent, EpochInferenceParams,
    EpochTimeline, ObservationWindow, OwnershipInterval, ParamsByTld, RdapRecord,
};
use dnszombie::linkage::{Ecosystem, Linkage};
use dnszombie::pipeline::{group_rdap, infer_all, linkages_from_input, timelines_by_domain};
use dnszombie::stats::{kaplan_meier, mann_whitney_u_with, MwuMethod, SurvivalObs};
use dnszombie::suffix::SuffixRules;
use dnszombie::synth::{
    emit_observations, generate_world, oracle_evaluate, EmittedFiles, NoiseModel, VerdictKey, WorldGenerator,
    WorldParams,
};
use dnszombie::DayDate;
use dnszombie_cli::config::{FileConfig, FlagOverrides, RunConfig};
use dnszombie_cli::report::{analyze, TableKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

/// Criteria that cannot be met as stated, with the reason.
const KNOWN_UNATTAINABLE: &[(u32, &str)] = &[(
    5,
    "the continuity-corrected normal approximation is off by up to 0.088 (n=2), 0.038 (n=3) and 0.031 (n=4) from exact enumeration",
)];

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn d(s: &str) -> DayDate {
    s.parse().unwrap()
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn default_config() -> RunConfig {
    RunConfig::resolve(&FileConfig::default(), &FlagOverrides::default()).unwrap()
}

fn load_all_linkages(files: &EmittedFiles) -> Result<Vec<Linkage>, String> {
    let rules = SuffixRules::builtin();
    let mut out = Vec::new();
    for (path, eco) in [
        (&files.certificates, Ecosystem::Webpki),
        (&files.ens_claims, Ecosystem::EnsOnchain),
        (&files.maven_versions, Ecosystem::Maven),
        (&files.gasless_txt, Ecosystem::EnsGasless),
    ] {
        let input: LinkageInput = dataio::load_linkage_input(path, eco).map_err(e)?;
        out.extend(linkages_from_input(&input, &rules, "ENS1").map_err(e)?);
    }
    Ok(out)
}

// 1

fn clean_world(seed: u64) -> Result<Duration, String> {
    let started = Instant::now();
    let params = WorldParams { domains: 1000, ..Default::default() };
    let world = generate_world(&params, seed).map_err(e)?;
    let dir = tempfile::tempdir().map_err(e)?;
    let files = emit_observations(&world, &NoiseModel::clean(), seed, dir.path()).map_err(e)?;
    let window = params.window();
    let as_of = window.last;

    let obs = dataio::load_observations(&files.observations).map_err(e)?;
    let rdap = group_rdap(dataio::load_rdap(&files.rdap).map_err(e)?);
    let timelines = infer_all(&obs, &rdap, &ParamsByTld::default(), window).map_err(e)?;
    let linkages = load_all_linkages(&files)?;
    let batch = batch_classify(&linkages, &timelines_by_domain(timelines.clone()), as_of);
    let serving = dataio::load_serving(&files.serving).map_err(e)?;
    let a = analyze(&batch.verdicts, &serving, &default_config(), window.first, as_of).map_err(e)?;
    let elapsed = started.elapsed();
    let oracle = oracle_evaluate(&world, as_of).map_err(e)?;

    ensure!(timelines.len() == oracle.timelines.len(), "seed {seed}: {} timelines, oracle {}", timelines.len(), oracle.timelines.len());
    for tl in &timelines {
        let got: Vec<_> = tl.intervals.iter().map(|i| (i.start, i.end, i.right_censored, i.end_confirmed)).collect();
        let want: Vec<_> = oracle.timelines[&tl.domain]
            .iter()
            .map(|i| (i.start, i.end, i.right_censored, i.end_confirmed))
            .collect();
        ensure!(got == want, "seed {seed}: timeline of {} differs", tl.domain);
    }
    ensure!(batch.verdicts.len() == oracle.verdicts.len(), "seed {seed}: verdict count differs");
    for v in &batch.verdicts {
        let key = VerdictKey {
            ecosystem: v.linkage.ecosystem,
            dns_name: v.linkage.dns_name.clone(),
            linked_name: v.linkage.linked_name.clone(),
            birth: v.linkage.birth,
        };
        let want = oracle.verdicts.get(&key).ok_or(format!("seed {seed}: {key:?} not in oracle"))?;
        ensure!(
            (v.status, v.zombie_birth, &v.rereg) == (want.status, want.zombie_birth, &want.rereg),
            "seed {seed}: verdict of {key:?} differs"
        );
    }
    ensure!(a.summary == oracle.summary, "seed {seed}: summary differs");
    ensure!(a.series == oracle.series, "seed {seed}: zombie fraction series differs");
    for (eco, obs) in &oracle.lifespans {
        let want = kaplan_meier(obs).map_err(e)?;
        ensure!(a.lifespans[eco].overall.as_ref() == Some(&want), "seed {seed}: {eco} lifespan curve differs");
    }
    for (eco, g) in &a.gaps {
        let want = oracle.gaps.get(eco).cloned().unwrap_or_default();
        ensure!((&g.zombie, &g.non_zombie) == (&want.0, &want.1), "seed {seed}: {eco} gaps differ");
    }
    for (eco, s) in &a.agp {
        let want = oracle.agp.get(eco).copied().unwrap_or_default();
        ensure!((s.zombies, s.within_agp) == want, "seed {seed}: {eco} grace-period counts differ");
    }
    let served: BTreeMap<_, _> = a.served.per_certificate.iter().cloned().collect();
    ensure!(served == oracle.served_after_death, "seed {seed}: served-after-death differs");
    let served: BTreeMap<_, _> = a.served_rereg.per_certificate.iter().cloned().collect();
    ensure!(served == oracle.served_after_rereg, "seed {seed}: served-after-rereg differs");
    ensure!(a.revocation == oracle.revocation, "seed {seed}: revocation comparison differs");
    ensure!(a.maven == oracle.maven, "seed {seed}: maven breakdown differs");
    let mut compared = 0;
    for cell in &a.matrix.cells {
        if let (Some(count), Some(pop)) = (cell.supporting_count, cell.population) {
            let want = oracle.evidence.get(&(cell.attack, cell.ecosystem)).copied().unwrap_or_default();
            ensure!((count, pop) == want, "seed {seed}: evidence for {:?}/{} differs", cell.attack, cell.ecosystem);
            compared += 1;
        }
    }
    ensure!(compared > 0, "seed {seed}: no evidence cells were computed");
    Ok(elapsed)
}

fn criterion_1() -> Check {
    let mut slowest = Duration::ZERO;
    for seed in 1..=20 {
        slowest = slowest.max(clean_world(seed)?);
    }
    ensure!(slowest < Duration::from_secs(60), "slowest world took {slowest:?}");
    Ok(format!("20 worlds x 1000 domains equal the oracle; slowest {:.2}s", slowest.as_secs_f64()))
}

// 2

fn criterion_2() -> Check {
    let noise = NoiseModel { zone_coverage: 0.95, scan_coverage: 0.0, rdap_coverage: 0.0, rdap_date_omission: 0.0 };
    let (mut domains, mut false_splits, mut excess, mut merged) = (0, 0, 0, 0);
    let (mut zombies, mut oracle_zombies) = (0, 0);
    for seed in 200..210 {
        let params = WorldParams { domains: 1000, ..Default::default() };
        let world = generate_world(&params, seed).map_err(e)?;
        let dir = tempfile::tempdir().map_err(e)?;
        let files = emit_observations(&world, &noise, seed, dir.path()).map_err(e)?;
        let window = params.window();
        let obs = dataio::load_observations(&files.observations).map_err(e)?;
        let timelines = infer_all(&obs, &HashMap::new(), &ParamsByTld::default(), window).map_err(e)?;
        let by_domain = timelines_by_domain(timelines);
        for truth in &world.domains {
            let Some(tl) = by_domain.get(&truth.domain) else { continue };
            domains += 1;
            let visible = truth.epochs.iter().filter(|x| x.end >= window.first && x.start <= window.last).count();
            if tl.intervals.len() > visible {
                excess += 1;
            }
            if tl.intervals.len() < visible {
                merged += 1;
            }
            for pair in tl.intervals.windows(2) {
                let reregistered = truth.epochs.iter().any(|x| pair[0].end < x.start && x.start <= pair[1].start);
                false_splits += usize::from(!reregistered);
            }
        }
        let linkages = load_all_linkages(&files)?;
        let batch = batch_classify(&linkages, &by_domain, window.last);
        let oracle = oracle_evaluate(&world, window.last).map_err(e)?;
        for (eco, s) in &batch.summary {
            let want = oracle.summary.get(eco).map_or(0, |o| o.zombies);
            ensure!(s.zombies <= want, "seed {seed}: {eco} reports {} zombies, oracle {want}", s.zombies);
            zombies += s.zombies;
            oracle_zombies += want;
        }
    }
    ensure!(false_splits == 0, "{false_splits} false re-registrations");
    ensure!(excess == 0, "{excess} domains with more epochs than truth");
    Ok(format!(
        "10 worlds, {domains} domains: 0 false re-registrations, {merged} under-split; zombies {zombies} <= oracle {oracle_zombies}"
    ))
}

// 3

fn iv(start: &str, end: &str) -> OwnershipInterval {
    OwnershipInterval::open(d(start), d(end))
}

fn criterion_3() -> Check {
    let window = ObservationWindow::new(d("2025-01-01"), d("2025-12-31")).map_err(e)?;
    let params = EpochInferenceParams::default();
    let g = params.grace_window_days;

    // split at the registration date
    let got = apply_rdap_positives(
        vec![iv("2025-01-01", "2025-06-01")],
        &[RdapRecord::positive("x.com", d("2025-04-01"), d("2025-03-15"))],
        g,
        window,
    )
    .map_err(e)?;
    let right = OwnershipInterval { start_closed: true, ..iv("2025-03-15", "2025-06-01") };
    ensure!(got == vec![iv("2025-01-01", "2025-03-14"), right], "split: got {got:?}");

    // registration within the grace window closes the start
    let got = apply_rdap_positives(
        vec![iv("2025-01-01", "2025-06-01")],
        &[RdapRecord::positive("x.com", d("2025-04-01"), d("2025-01-02"))],
        g,
        window,
    )
    .map_err(e)?;
    ensure!(
        got == vec![OwnershipInterval { start_closed: true, ..iv("2025-01-01", "2025-06-01") }],
        "grace close: got {got:?}"
    );

    // split, then merge_next from the registration to the query interval
    let got = apply_rdap_positives(
        vec![iv("2025-01-01", "2025-01-10"), iv("2025-03-01", "2025-03-10")],
        &[RdapRecord::positive("x.com", d("2025-03-05"), d("2025-01-05"))],
        g,
        window,
    )
    .map_err(e)?;
    let bridged = OwnershipInterval { start_closed: true, merge_next: true, ..iv("2025-01-05", "2025-01-10") };
    ensure!(
        got == vec![iv("2025-01-01", "2025-01-04"), bridged, iv("2025-03-01", "2025-03-10")],
        "merge_next range: got {got:?}"
    );

    // negatives
    let two = vec![iv("2025-01-01", "2025-01-10"), iv("2025-05-01", "2025-05-10")];
    let got = apply_rdap_negatives(two.clone(), &[RdapRecord::negative("x.com", d("2025-03-01"))], g);
    let closed = OwnershipInterval { start_closed: true, ..iv("2025-05-01", "2025-05-10") };
    ensure!(got == vec![two[0].clone(), closed], "negative in gap: got {got:?}");
    let got = apply_rdap_negatives(two.clone(), &[RdapRecord::negative("x.com", d("2025-01-11"))], g);
    ensure!(got == two, "negative within grace: got {got:?}");
    let got = apply_rdap_negatives(two.clone(), &[RdapRecord::negative("x.com", d("2025-08-01"))], g);
    ensure!(got == two, "negative after all intervals: got {got:?}");

    // merge guard: merge_next bridges a long gap, a closed start blocks a short one
    let a = iv("2025-01-01", "2025-01-10");
    let far = iv("2025-04-21", "2025-04-30");
    let near = iv("2025-01-21", "2025-01-30");
    let merged = merge_adjacent(vec![a.clone(), near.clone()], &params);
    ensure!(merged == vec![iv("2025-01-01", "2025-01-30")], "gap 10: got {merged:?}");
    let kept = merge_adjacent(vec![a.clone(), far.clone()], &params);
    ensure!(kept.len() == 2, "gap 100 without merge_next merged");
    let bridged = merge_adjacent(vec![OwnershipInterval { merge_next: true, ..a.clone() }, far], &params);
    ensure!(bridged == vec![iv("2025-01-01", "2025-04-30")], "gap 100 with merge_next: got {bridged:?}");
    let closed = OwnershipInterval { start_closed: true, ..near };
    let blocked = merge_adjacent(vec![OwnershipInterval { merge_next: true, ..a }, closed], &params);
    ensure!(blocked.len() == 2, "closed start did not block the merge: {blocked:?}");

    // end to end on the hand-traced fixture
    let obs = dataio::load_observations(&common::fixture("w1/observations.csv")).map_err(e)?;
    let rdap = group_rdap(dataio::load_rdap(&common::fixture("w1/rdap.jsonl")).map_err(e)?);
    let w1 = ObservationWindow::new(d("2024-01-01"), d("2024-06-29")).map_err(e)?;
    let got = infer_all(&obs, &rdap, &ParamsByTld::default(), w1).map_err(e)?;
    let want: Vec<EpochTimeline> = dataio::load_epochs(&common::fixture("w1/epochs.golden.jsonl")).map_err(e)?;
    ensure!(got == want, "hand-traced fixture differs");
    Ok(format!("split, grace close, merge guard and {} hand-traced timelines match", want.len()))
}

// 4

fn criterion_4() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=200);
        let times: Vec<i32> = (0..n).map(|_| rng.gen_range(0..=60)).collect();
        let obs: Vec<_> = times.iter().map(|&t| SurvivalObs::event(t)).collect();
        let curve = kaplan_meier(&obs).map_err(e)?;
        for t in -1..=61 {
            let empirical = times.iter().filter(|&&x| x > t).count() as f64 / n as f64;
            worst = worst.max((curve.survival_at(t) - empirical).abs());
        }
    }
    ensure!(worst <= 1e-12, "largest deviation from the empirical survival function {worst:e}");
    let hand = kaplan_meier(&[
        SurvivalObs::event(1),
        SurvivalObs::censored(2),
        SurvivalObs::event(3),
        SurvivalObs::censored(4),
    ])
    .map_err(e)?;
    let (s1, s3) = (hand.survival_at(1), hand.survival_at(3));
    ensure!((s1 - 0.75).abs() <= 1e-12 && (s3 - 0.375).abs() <= 1e-12, "S(1)={s1}, S(3)={s3}");
    Ok(format!("1000 uncensored inputs within {worst:e} of the empirical curve; S(1)={s1}, S(3)={s3}"))
}

// 5

/// Two-sided permutation p-value by enumerating every split of the pooled
/// sample.
fn brute_force_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let u = |mask: u32| -> f64 {
        let mut u = 0.0;
        for i in (0..n).filter(|i| mask & (1 << i) != 0) {
            for j in (0..n).filter(|j| mask & (1 << j) == 0) {
                u += match pooled[i].partial_cmp(&pooled[j]).unwrap() {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                };
            }
        }
        u
    };
    let mean = (a.len() * b.len()) as f64 / 2.0;
    let observed = (u((1 << a.len()) - 1) - mean).abs();
    let (mut total, mut extreme) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == a.len() {
            total += 1;
            extreme += u64::from((u(mask) - mean).abs() >= observed - 1e-9);
        }
    }
    extreme as f64 / total as f64
}

fn criterion_5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..1000 {
        let (na, nb) = (rng.gen_range(1..=40), rng.gen_range(1..=40));
        let tied = i % 2 == 0;
        let mut draw = || if tied { f64::from(rng.gen_range(0..8)) } else { rng.gen::<f64>() };
        let a: Vec<f64> = (0..na).map(|_| draw()).collect();
        let b: Vec<f64> = (0..nb).map(|_| draw()).collect();
        let r = mann_whitney_u_with(&a, &b, MwuMethod::Asymptotic).map_err(e)?;
        ensure!(r.u_a + r.u_b == (na * nb) as f64, "U_A + U_B = {} for {na}x{nb}", r.u_a + r.u_b);
    }

    let sep = mann_whitney_u_with(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], MwuMethod::Auto).map_err(e)?;
    ensure!(sep.u_a == 0.0 && sep.u_b == 9.0, "complete separation gave U={}", sep.u_a);

    let mut worst = Vec::new();
    for n in 1..=6usize {
        let mut max_diff: f64 = 0.0;
        for mask in 0u32..(1 << (2 * n)) {
            if mask.count_ones() as usize != n {
                continue;
            }
            let (a, b): (Vec<usize>, Vec<usize>) = (0..2 * n).partition(|i| mask & (1 << i) != 0);
            let a: Vec<f64> = a.into_iter().map(|x| x as f64).collect();
            let b: Vec<f64> = b.into_iter().map(|x| x as f64).collect();
            let exact = brute_force_p(&a, &b);
            let ours = mann_whitney_u_with(&a, &b, MwuMethod::Exact).map_err(e)?.p_two_sided;
            ensure!((ours - exact).abs() < 1e-12, "exact method {ours} vs enumeration {exact} at n={n}");
            let approx = mann_whitney_u_with(&a, &b, MwuMethod::Asymptotic).map_err(e)?.p_two_sided;
            max_diff = max_diff.max((approx - exact).abs());
        }
        worst.push((n, max_diff));
    }
    let table = worst.iter().map(|(n, m)| format!("n={n}:{m:.4}")).collect::<Vec<_>>().join(" ");
    let over: Vec<_> = worst.iter().filter(|(_, m)| *m > 0.02).collect();
    ensure!(over.is_empty(), "U sums and separation hold, but approximate vs exact p exceeds 0.02: {table}");
    Ok(format!("U sums on 1000 inputs; separation U=0; approximate vs exact p {table}"))
}

// 6

fn truncated_timeline(
    domain: &str,
    obs: &dataio::DomainObservations,
    rdap: &[RdapRecord],
    window: ObservationWindow,
) -> Option<EpochTimeline> {
    let zone: Vec<DayDate> = obs.zone.range(..=window.last).copied().collect();
    let scan: Vec<DayDate> = obs.scan.range(..=window.last).copied().collect();
    let rdap: Vec<RdapRecord> = rdap.iter().filter(|r| r.query_time <= window.last).cloned().collect();
    infer_epochs(domain, &zone, &scan, &rdap, &EpochInferenceParams::default(), window).ok()
}

fn monotone_world(seed: u64, linkage_days: &mut u64) -> Result<(), String> {
    let params = WorldParams { domains: 250, ens_prob: 0.3, maven_prob: 0.3, ..Default::default() };
    let world = generate_world(&params, seed).map_err(e)?;
    let noise = NoiseModel { zone_coverage: 0.97, scan_coverage: 0.2, rdap_coverage: 0.6, rdap_date_omission: 0.1 };
    let dir = tempfile::tempdir().map_err(e)?;
    let files = emit_observations(&world, &noise, seed, dir.path()).map_err(e)?;
    let obs = dataio::load_observations(&files.observations).map_err(e)?;
    let rdap = group_rdap(dataio::load_rdap(&files.rdap).map_err(e)?);
    let linkages: Vec<Linkage> = load_all_linkages(&files)?
        .into_iter()
        .filter(|l| matches!(l.ecosystem, Ecosystem::EnsOnchain | Ecosystem::Maven))
        .collect();
    let no_rdap = Vec::new();
    let mut last: HashMap<usize, VerdictStatus> = HashMap::new();
    let mut as_of = params.window_start + 30;
    while as_of <= params.window_end {
        let window = ObservationWindow::new(params.window_start, as_of).map_err(e)?;
        let mut cache: HashMap<&str, Option<EpochTimeline>> = HashMap::new();
        for (i, l) in linkages.iter().enumerate().filter(|(_, l)| l.birth <= as_of) {
            let tl = cache.entry(l.dns_name.as_str()).or_insert_with(|| {
                let o = obs.get(&l.dns_name)?;
                truncated_timeline(&l.dns_name, o, rdap.get(&l.dns_name).unwrap_or(&no_rdap), window)
            });
            let Some(tl) = tl else { continue };
            let status = classify_linkage(l, tl, as_of).map_err(e)?.status;
            *linkage_days += 1;
            if let Some(prev) = last.insert(i, status) {
                ensure!(
                    !(prev == VerdictStatus::Zombie && status == VerdictStatus::Live),
                    "seed {seed}: {} {} flipped zombie -> live at {as_of}",
                    l.dns_name,
                    l.linked_name
                );
            }
        }
        as_of = as_of + 5;
    }
    Ok(())
}

fn criterion_6() -> Check {
    use proptest::test_runner::{Config, TestCaseError, TestRunner};
    let mut runner = TestRunner::new(Config { cases: 8, failure_persistence: None, ..Config::default() });
    let total = std::cell::Cell::new(0u64);
    let result = runner.run(&proptest::num::u64::ANY, |seed| {
        let mut n = 0;
        let r = monotone_world(seed, &mut n);
        total.set(total.get() + n);
        r.map_err(TestCaseError::fail)
    });
    result.map_err(|err| err.to_string())?;
    let linkage_days = total.get();
    ensure!(linkage_days >= 100_000, "only {linkage_days} linkage-days checked");
    Ok(format!("no zombie -> live flips over {linkage_days} linkage-days in 8 random worlds"))
}

// 7

fn criterion_7() -> Check {
    let dir = tempfile::tempdir().map_err(e)?;
    let template = common::load_template(&common::fixture("published/template.toml"));
    let input = dir.path().join("in");
    common::expand_template(&template, &input);
    let out = dir.path().join("out");
    let cfg = common::fixture("published/report.toml");
    let status = Command::new(env!("CARGO_BIN_EXE_dnszombie"))
        .args(["report", "--in"])
        .arg(&input)
        .arg("--out")
        .arg(&out)
        .arg("--config")
        .arg(&cfg)
        .status()
        .map_err(e)?;
    ensure!(status.success(), "report exited with {status}");
    let s = common::read_summary(&out.join("summary.csv"));
    let get = |m: &str, eco: &str| -> Result<usize, String> {
        s.get(&(m.to_string(), eco.to_string()))
            .ok_or(format!("summary lacks {m}/{eco}"))?
            .parse()
            .map_err(e)
    };
    let ens = (get("active_zombies", "ens_onchain")?, get("active", "ens_onchain")?);
    let maven = (get("active_zombies", "maven")?, get("active", "maven")?);
    ensure!(ens == (425, 1882), "ENS {ens:?}");
    ensure!(maven == (4842, 31853), "Maven {maven:?}");
    let rows = common::read_rows(&out.join("table5_breakdown.csv"));
    let row = |name: &str| rows.iter().find(|r| r[0] == name).map(|r| r[2].clone()).unwrap_or_default();
    let t5 = (row("new_versions_while_zombie"), row("reregistered"), row("new_versions_after_rereg"));
    ensure!(t5 == ("547".into(), "290".into(), "214".into()), "table 5 rows {t5:?}");
    let rereg = (get("revocation_rereg_revoked", "webpki")?, get("revocation_rereg_total", "webpki")?);
    let plain = (get("revocation_no_rereg_revoked", "webpki")?, get("revocation_no_rereg_total", "webpki")?);
    ensure!(rereg == (29, 250) && plain == (39, 1000), "revocation {rereg:?} vs {plain:?}");
    let pct = |(a, b): (usize, usize)| 100.0 * a as f64 / b as f64;
    Ok(format!(
        "ENS 425/1882 = {:.1}%, Maven 4842/31853 = {:.1}%, table 5 547/290/214, revocation {:.1}% vs {:.1}%",
        pct(ens),
        pct(maven),
        pct(rereg),
        pct(plain)
    ))
}

// 8

const PERF_DOMAINS: usize = 1_000_000;

fn perf_params() -> WorldParams {
    WorldParams { domains: PERF_DOMAINS, ..Default::default() }
}

/// Writes the RDAP records a clean observer would collect: one positive per
/// registration and one negative per unregistered stretch in the window.
fn write_perf_rdap(path: &Path, seed: u64) -> Result<u64, String> {
    let params = perf_params();
    let window = params.window();
    let mut w = BufWriter::new(File::create(path).map_err(e)?);
    let mut n = 0;
    for truth in WorldGenerator::new(params, seed).map_err(e)? {
        let mut gap_from = window.first;
        for x in &truth.epochs {
            if gap_from < x.start {
                serde_json::to_writer(&mut w, &RdapRecord::negative(truth.domain.clone(), gap_from)).map_err(e)?;
                w.write_all(b"\n").map_err(e)?;
                n += 1;
            }
            let query = x.start.max(window.first);
            serde_json::to_writer(&mut w, &RdapRecord::positive(truth.domain.clone(), query, x.start)).map_err(e)?;
            w.write_all(b"\n").map_err(e)?;
            n += 1;
            gap_from = x.end.succ();
        }
        if gap_from <= window.last {
            serde_json::to_writer(&mut w, &RdapRecord::negative(truth.domain.clone(), gap_from)).map_err(e)?;
            w.write_all(b"\n").map_err(e)?;
            n += 1;
        }
    }
    w.flush().map_err(e)?;
    Ok(n)
}

/// Streams every registered day of every domain as a zone row.
fn stream_perf_observations(out: impl Write, seed: u64) -> std::io::Result<(u64, u64)> {
    let params = perf_params();
    let window = params.window();
    let labels: Vec<String> = window.first.through(window.last).map(|day| format!(",{day},zone\n")).collect();
    let mut w = BufWriter::with_capacity(1 << 20, out);
    w.write_all(b"domain,date,source\n")?;
    let (mut rows, mut bytes) = (0u64, 0u64);
    for truth in WorldGenerator::new(params, seed).map_err(std::io::Error::other)? {
        for x in &truth.epochs {
            let (first, last) = (x.start.max(window.first), x.end.min(window.last));
            if first > last {
                continue;
            }
            for i in first.days_since(window.first)..=last.days_since(window.first) {
                let label = &labels[i as usize];
                w.write_all(truth.domain.as_bytes())?;
                w.write_all(label.as_bytes())?;
                rows += 1;
                bytes += (truth.domain.len() + label.len()) as u64;
            }
        }
    }
    w.flush()?;
    Ok((rows, bytes))
}

/// Waits for `pid` and returns its peak resident set size in bytes.
#[cfg(target_os = "linux")]
fn wait_peak_rss(pid: u32) -> Result<(i32, u64), String> {
    let mut status = 0;
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    // SAFETY: plain syscall on our own child with valid out-pointers.
    let r = unsafe { libc::wait4(pid as libc::pid_t, &mut status, 0, &mut usage) };
    ensure!(r == pid as libc::pid_t, "wait4 failed: {}", std::io::Error::last_os_error());
    let code = if libc::WIFEXITED(status) { libc::WEXITSTATUS(status) } else { -1 };
    Ok((code, usage.ru_maxrss as u64 * 1024))
}

#[cfg(not(target_os = "linux"))]
fn wait_peak_rss(_pid: u32) -> Result<(i32, u64), String> {
    Err("peak memory measurement needs Linux".into())
}

fn criterion_8() -> Check {
    let seed = 8;
    let dir = tempfile::tempdir().map_err(e)?;
    let rdap = dir.path().join("rdap.jsonl");
    let n_rdap = write_perf_rdap(&rdap, seed)?;
    let out = dir.path().join("epochs.jsonl");
    let window = perf_params().window();

    let started = Instant::now();
    let mut child = Command::new(env!("CARGO_BIN_EXE_dnszombie"))
        .args(["infer", "--obs", "-", "--rdap"])
        .arg(&rdap)
        .args(["--window-start", &window.first.to_string(), "--window-end", &window.last.to_string()])
        .arg("--out")
        .arg(&out)
        .stdin(Stdio::piped())
        .spawn()
        .map_err(e)?;
    let stdin = child.stdin.take().expect("piped stdin");
    let (rows, bytes) = stream_perf_observations(stdin, seed).map_err(e)?;
    let (code, peak) = wait_peak_rss(child.id())?;
    let elapsed = started.elapsed();
    ensure!(code == 0, "infer exited with {code}");

    // the output must match the truth it was generated from
    let mut lines = BufReader::new(File::open(&out).map_err(e)?).lines();
    let mut checked = 0;
    // generation order is sorted order for these zero-padded names
    for truth in WorldGenerator::new(perf_params(), seed).map_err(e)? {
        let line = lines.next().ok_or("fewer timelines than domains")?.map_err(e)?;
        let tl: EpochTimeline = serde_json::from_str(&line).map_err(e)?;
        ensure!(tl.domain == truth.domain, "timeline order: {} vs {}", tl.domain, truth.domain);
        let got: Vec<_> = tl.intervals.iter().map(|i| (i.start, i.end)).collect();
        let want: Vec<_> = truth
            .epochs
            .iter()
            .filter(|x| x.end >= window.first && x.start <= window.last)
            // RDAP creation dates reach back before the window
            .map(|x| (x.start, x.end.min(window.last)))
            .collect();
        ensure!(got == want, "{} timeline {got:?} differs from truth {want:?}", tl.domain);
        checked += 1;
    }
    ensure!(lines.next().is_none(), "more timelines than domains");

    let gib = |b: u64| b as f64 / f64::from(1u32 << 30);
    let summary = format!(
        "{checked} domains, {rows} rows ({:.1} GiB streamed), {n_rdap} RDAP records: {:.0}s, peak {:.2} GiB",
        gib(bytes),
        elapsed.as_secs_f64(),
        gib(peak)
    );
    ensure!(elapsed < Duration::from_secs(600), "too slow: {summary}");
    ensure!(peak < 8 << 30, "too much memory: {summary}");
    ensure!(peak < bytes / 4, "peak memory is not small next to the stream: {summary}");
    Ok(summary)
}

// 9

/// Rewrites `src` into `dst` with its data lines in a seeded random order.
fn permute_lines(src: &Path, dst: &Path, header: bool, seed: u64) -> Result<(), String> {
    use rand::seq::SliceRandom;
    let text = std::fs::read_to_string(src).map_err(e)?;
    let mut lines: Vec<&str> = text.lines().collect();
    let head = if header && !lines.is_empty() { Some(lines.remove(0)) } else { None };
    lines.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = String::new();
    for l in head.into_iter().chain(lines) {
        out.push_str(l);
        out.push('\n');
    }
    std::fs::write(dst, out).map_err(e)
}

fn round_trips(files: &EmittedFiles, scratch: &Path) -> Result<usize, String> {
    let copy = scratch.join("copy");
    let same = |a: &Path, what: &str| -> Result<(), String> {
        ensure!(std::fs::read(a).map_err(e)? == std::fs::read(&copy).map_err(e)?, "{what} changed on save");
        Ok(())
    };
    let obs = dataio::load_observations(&files.observations).map_err(e)?;
    dataio::save_observations(&copy, &obs).map_err(e)?;
    same(&files.observations, "observations")?;
    ensure!(dataio::load_observations(&copy).map_err(e)? == obs, "observations reload differs");

    let rdap = dataio::load_rdap(&files.rdap).map_err(e)?;
    dataio::save_jsonl(&copy, &rdap).map_err(e)?;
    same(&files.rdap, "rdap")?;
    ensure!(dataio::load_rdap(&copy).map_err(e)? == rdap, "rdap reload differs");

    for (path, eco) in [
        (&files.certificates, Ecosystem::Webpki),
        (&files.ens_claims, Ecosystem::EnsOnchain),
        (&files.maven_versions, Ecosystem::Maven),
        (&files.gasless_txt, Ecosystem::EnsGasless),
    ] {
        let input = dataio::load_linkage_input(path, eco).map_err(e)?;
        input.save(&copy).map_err(e)?;
        same(path, "linkage input")?;
        ensure!(dataio::load_linkage_input(&copy, eco).map_err(e)? == input, "{eco} input reload differs");
    }

    let serving = dataio::load_serving(&files.serving).map_err(e)?;
    dataio::save_serving(&copy, &serving).map_err(e)?;
    same(&files.serving, "serving")?;
    ensure!(dataio::load_serving(&copy).map_err(e)? == serving, "serving reload differs");

    let window = DatasetManifest::load_verified(files.observations.parent().unwrap()).map_err(e)?.window.unwrap();
    let timelines = infer_all(&obs, &group_rdap(rdap), &ParamsByTld::default(), window).map_err(e)?;
    dataio::save_epochs(&copy, &timelines).map_err(e)?;
    ensure!(dataio::load_epochs(&copy).map_err(e)? == timelines, "epochs reload differs");
    let linkages = load_all_linkages(files)?;
    dataio::save_linkages(&copy, &linkages).map_err(e)?;
    ensure!(dataio::load_linkages(&copy).map_err(e)? == linkages, "linkages reload differs");
    let verdicts = batch_classify(&linkages, &timelines_by_domain(timelines), window.last).verdicts;
    dataio::save_verdicts(&copy, &verdicts).map_err(e)?;
    ensure!(dataio::load_verdicts(&copy).map_err(e)? == verdicts, "verdicts reload differs");
    Ok(11)
}

fn criterion_9() -> Check {
    let dir = tempfile::tempdir().map_err(e)?;
    let world = dir.path().join("world");
    let params = dir.path().join("params.toml");
    std::fs::write(&params, "domains = 600\n").map_err(e)?;
    let bin = env!("CARGO_BIN_EXE_dnszombie");
    let ok = Command::new(bin)
        .args(["synth", "--params"])
        .arg(&params)
        .args(["--seed", "9", "--zone-coverage", "0.9", "--scan-coverage", "0.3", "--rdap-coverage", "0.6", "--out"])
        .arg(&world)
        .status()
        .map_err(e)?;
    ensure!(ok.success(), "synth failed");
    let formats = round_trips(&EmittedFiles::in_dir(&world), dir.path())?;

    let permuted = dir.path().join("permuted");
    std::fs::create_dir(&permuted).map_err(e)?;
    std::fs::copy(world.join(dataio::MANIFEST_FILE), permuted.join(dataio::MANIFEST_FILE)).map_err(e)?;
    let names = [
        ("observations.csv", true),
        ("serving.csv", true),
        ("rdap.jsonl", false),
        ("certificates.jsonl", false),
        ("ens_claims.jsonl", false),
        ("maven_versions.jsonl", false),
        ("gasless_txt.jsonl", false),
    ];
    for (i, (name, header)) in names.iter().enumerate() {
        permute_lines(&world.join(name), &permuted.join(name), *header, 90 + i as u64)?;
    }
    let report = |input: &Path, out: &Path| -> Result<(), String> {
        let s = Command::new(bin).args(["report", "--in"]).arg(input).arg("--out").arg(out).status().map_err(e)?;
        ensure!(s.success(), "report on {} failed", input.display());
        Ok(())
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    report(&world, &a)?;
    report(&permuted, &b)?;
    let mut compared = 0;
    for name in TableKind::ALL.map(TableKind::file_name).into_iter().chain(["verdicts.jsonl"]) {
        let (x, y) = (std::fs::read(a.join(name)).map_err(e)?, std::fs::read(b.join(name)).map_err(e)?);
        ensure!(x == y, "{name} differs after permuting the inputs");
        compared += 1;
    }
    Ok(format!("{formats} formats round-trip; {compared} report files byte-identical under permutation"))
}

type Criterion = (u32, &'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "oracle equivalence on clean worlds", criterion_1),
        (2, "conservatism under degradation", criterion_2),
        (3, "epoch inference hand-traced semantics", criterion_3),
        (4, "Kaplan-Meier correctness", criterion_4),
        (5, "Mann-Whitney correctness", criterion_5),
        (6, "validate-once monotonicity", criterion_6),
        (7, "fixture regression against published aggregates", criterion_7),
        (8, "performance at one million domains", criterion_8),
        (9, "round-trip and determinism", criterion_9),
    ];
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut unexpected = 0;
    for (n, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {n} {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                let known = KNOWN_UNATTAINABLE.iter().find(|(k, _)| *k == n);
                match known {
                    Some((_, why)) => println!("FAIL {n} {name} ({secs:.1}s): {detail} [known: {why}]"),
                    None => {
                        unexpected += 1;
                        println!("FAIL {n} {name} ({secs:.1}s): {detail}");
                    }
                }
            }
        }
    }
    if unexpected > 0 {
        std::process::exit(1);
    }
}
