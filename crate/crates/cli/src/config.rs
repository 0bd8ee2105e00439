//! Run configuration: TOML file values, command-line overrides and the
//! effective settings recorded in every manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use dnszombie::epoch::{EpochInferenceParams, ParamsByTld};
use dnszombie::indicators::{Attack, DesignConfig, DesignFacts, DEFAULT_AGP_DAYS};
use dnszombie::linkage::{Ecosystem, DEFAULT_GASLESS_PREFIX};
use dnszombie::stats::MwuMethod;
use dnszombie::DayDate;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TldOverride {
    pub gap_threshold: Option<i32>,
    pub grace: Option<i32>,
}

/// Everything a config file may set. Absent keys fall back to defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub gap_threshold: Option<i32>,
    pub grace: Option<i32>,
    pub agp_days: Option<i32>,
    pub as_of: Option<DayDate>,
    pub window_start: Option<DayDate>,
    pub window_end: Option<DayDate>,
    pub gasless_prefix: Option<String>,
    pub mwu_method: Option<MwuMethod>,
    /// Public Suffix List file; a small built-in list is used otherwise.
    pub suffix_list: Option<PathBuf>,
    #[serde(default)]
    pub cohort_years: BTreeMap<Ecosystem, u32>,
    #[serde(default)]
    pub tld: BTreeMap<String, TldOverride>,
    #[serde(default)]
    pub design: BTreeMap<Ecosystem, DesignFacts>,
    #[serde(default)]
    pub min_fraction: BTreeMap<Attack, f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {}", path.display(), e.message()))
    }
}

/// Values given on the command line; they win over the file.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FlagOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_threshold: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grace: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agp_days: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub as_of: Option<DayDate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_start: Option<DayDate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_end: Option<DayDate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gasless_prefix: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mwu_method: Option<MwuMethod>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: ParamsByTld,
    pub agp_days: i32,
    pub as_of: Option<DayDate>,
    pub window_start: Option<DayDate>,
    pub window_end: Option<DayDate>,
    pub gasless_prefix: String,
    pub mwu_method: MwuMethod,
    pub suffix_list: Option<PathBuf>,
    pub cohort_years: BTreeMap<Ecosystem, u32>,
    pub design: DesignConfig,
}

pub fn default_cohort_years() -> BTreeMap<Ecosystem, u32> {
    [
        (Ecosystem::Webpki, 1),
        (Ecosystem::EnsOnchain, 2),
        (Ecosystem::EnsGasless, 2),
        (Ecosystem::Maven, 4),
    ]
    .into_iter()
    .collect()
}

impl RunConfig {
    pub fn resolve(file: &FileConfig, flags: &FlagOverrides) -> anyhow::Result<Self> {
        let defaults = EpochInferenceParams::default();
        let default = EpochInferenceParams {
            gap_threshold_days: flags.gap_threshold.or(file.gap_threshold).unwrap_or(defaults.gap_threshold_days),
            grace_window_days: flags.grace.or(file.grace).unwrap_or(defaults.grace_window_days),
        };
        let overrides = file
            .tld
            .iter()
            .map(|(suffix, o)| {
                let p = EpochInferenceParams {
                    gap_threshold_days: o.gap_threshold.unwrap_or(default.gap_threshold_days),
                    grace_window_days: o.grace.unwrap_or(default.grace_window_days),
                };
                (suffix.trim_start_matches('.').to_ascii_lowercase(), p)
            })
            .collect();
        let params = ParamsByTld { default, overrides };
        params.validate()?;

        let mut design = DesignConfig::standard();
        for (eco, facts) in &file.design {
            design.ecosystems.insert(*eco, facts.clone());
        }
        design.min_fraction = file.min_fraction.clone();
        design.validate()?;

        let mut cohort_years = default_cohort_years();
        cohort_years.extend(file.cohort_years.iter().map(|(k, v)| (*k, *v)));
        if let Some((eco, _)) = cohort_years.iter().find(|(_, w)| **w == 0) {
            anyhow::bail!("cohort width for {eco} must be at least 1 year");
        }

        let agp_days = flags.agp_days.or(file.agp_days).unwrap_or(DEFAULT_AGP_DAYS);
        if agp_days < 0 {
            anyhow::bail!("agp_days must be non-negative, got {agp_days}");
        }
        let gasless_prefix = flags
            .gasless_prefix
            .clone()
            .or_else(|| file.gasless_prefix.clone())
            .unwrap_or_else(|| DEFAULT_GASLESS_PREFIX.to_string());
        if gasless_prefix.trim().is_empty() {
            anyhow::bail!("gasless_prefix must be non-empty");
        }
        Ok(RunConfig {
            params,
            agp_days,
            as_of: flags.as_of.or(file.as_of),
            window_start: flags.window_start.or(file.window_start),
            window_end: flags.window_end.or(file.window_end),
            gasless_prefix,
            mwu_method: flags.mwu_method.or(file.mwu_method).unwrap_or_default(),
            suffix_list: file.suffix_list.clone(),
            cohort_years,
            design,
        })
    }

    pub fn suffix_rules(&self) -> anyhow::Result<dnszombie::suffix::SuffixRules> {
        Ok(match &self.suffix_list {
            Some(p) => dnszombie::suffix::SuffixRules::load(p)?,
            None => dnszombie::suffix::SuffixRules::builtin(),
        })
    }

    /// JSON echoed into manifests: the effective values plus where they
    /// came from.
    pub fn manifest_value(&self, file: &FileConfig, flags: &FlagOverrides) -> serde_json::Value {
        serde_json::json!({
            "effective": self,
            "file": file,
            "flags": flags,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> anyhow::Result<FileConfig> {
        toml::from_str(text).map_err(|e| anyhow::anyhow!(e.message().to_string()))
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::resolve(&parse("").unwrap(), &FlagOverrides::default()).unwrap();
        assert_eq!(c.params.default.gap_threshold_days, 80);
        assert_eq!(c.params.default.grace_window_days, 2);
        assert_eq!(c.agp_days, 5);
        assert_eq!(c.gasless_prefix, "ENS1");
    }

    #[test]
    fn tld_override_only_applies_to_that_tld() {
        let f = parse("[tld.de]\ngap_threshold = 30\n").unwrap();
        let c = RunConfig::resolve(&f, &FlagOverrides::default()).unwrap();
        assert_eq!(c.params.for_domain("example.de").gap_threshold_days, 30);
        assert_eq!(c.params.for_domain("example.com").gap_threshold_days, 80);
    }

    #[test]
    fn flags_win_over_file() {
        let f = parse("gap_threshold = 60\ngrace = 3\n").unwrap();
        let flags = FlagOverrides { gap_threshold: Some(90), ..Default::default() };
        let c = RunConfig::resolve(&f, &flags).unwrap();
        assert_eq!(c.params.default.gap_threshold_days, 90);
        assert_eq!(c.params.default.grace_window_days, 3);
        let m = c.manifest_value(&f, &flags);
        assert_eq!(m["file"]["gap_threshold"], 60);
        assert_eq!(m["flags"]["gap_threshold"], 90);
    }

    #[test]
    fn unknown_key_lists_valid_keys() {
        let err = parse("gap_treshold = 60\n").unwrap_err().to_string();
        assert!(err.contains("gap_treshold"), "{err}");
        assert!(err.contains("gap_threshold"), "{err}");
    }

    #[test]
    fn design_section_parses() {
        let f = parse(
            "[design.maven]\nresource_independence = false\ninsufficient_data = [\"linked_name_takeover\"]\n\n[min_fraction]\nbulk_linked_name_creation = 0.05\n",
        )
        .unwrap();
        let c = RunConfig::resolve(&f, &FlagOverrides::default()).unwrap();
        assert_eq!(c.design.ecosystems[&Ecosystem::Maven].insufficient_data, vec![Attack::LinkedNameTakeover]);
        assert_eq!(c.design.min_fraction[&Attack::BulkLinkedNameCreation], 0.05);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::resolve(&parse("gap_threshold = 0").unwrap(), &FlagOverrides::default()).is_err());
        assert!(RunConfig::resolve(&parse("[cohort_years]\nmaven = 0").unwrap(), &FlagOverrides::default()).is_err());
    }
}
