use std::collections::BTreeMap;

use dnszombie::classify::batch_classify;
use dnszombie::dataio::{self, LinkageInput};
use dnszombie::epoch::ParamsByTld;
use dnszombie::linkage::Ecosystem;
use dnszombie::pipeline::{group_rdap, infer_all, linkages_from_input, timelines_by_domain};
use dnszombie::suffix::SuffixRules;
use dnszombie::synth::{emit_observations, generate_world, oracle_evaluate, NoiseModel, VerdictKey, WorldParams};

#[test]
fn clean_world_matches_oracle() {
    let params = WorldParams { domains: 300, ..Default::default() };
    let world = generate_world(&params, 42).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_observations(&world, &NoiseModel::clean(), 1, dir.path()).unwrap();

    let obs = dataio::load_observations(&files.observations).unwrap();
    let rdap = group_rdap(dataio::load_rdap(&files.rdap).unwrap());
    let window = params.window();
    let timelines = infer_all(&obs, &rdap, &ParamsByTld::default(), window).unwrap();
    let oracle = oracle_evaluate(&world, window.last).unwrap();

    let mut got = BTreeMap::new();
    for tl in &timelines {
        let ivs: Vec<_> = tl
            .intervals
            .iter()
            .map(|i| (i.start, i.end, i.right_censored, i.end_confirmed))
            .collect();
        got.insert(tl.domain.clone(), ivs);
    }
    let want: BTreeMap<_, _> = oracle
        .timelines
        .iter()
        .map(|(d, v)| (d.clone(), v.iter().map(|i| (i.start, i.end, i.right_censored, i.end_confirmed)).collect::<Vec<_>>()))
        .collect();
    assert_eq!(got, want);

    let rules = SuffixRules::builtin();
    let mut linkages = Vec::new();
    for (path, eco) in [
        (&files.certificates, Ecosystem::Webpki),
        (&files.ens_claims, Ecosystem::EnsOnchain),
        (&files.maven_versions, Ecosystem::Maven),
        (&files.gasless_txt, Ecosystem::EnsGasless),
    ] {
        let input: LinkageInput = dataio::load_linkage_input(path, eco).unwrap();
        linkages.extend(linkages_from_input(&input, &rules, "ENS1").unwrap());
    }
    let batch = batch_classify(&linkages, &timelines_by_domain(timelines), window.last);
    assert_eq!(batch.verdicts.len(), oracle.verdicts.len());
    for v in &batch.verdicts {
        let key = VerdictKey {
            ecosystem: v.linkage.ecosystem,
            dns_name: v.linkage.dns_name.clone(),
            linked_name: v.linkage.linked_name.clone(),
            birth: v.linkage.birth,
        };
        let want = &oracle.verdicts[&key];
        assert_eq!((v.status, v.zombie_birth, &v.rereg), (want.status, want.zombie_birth, &want.rereg), "{key:?}");
    }
    assert_eq!(batch.summary, oracle.summary);
}
