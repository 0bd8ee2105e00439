//! Registrable-domain (eTLD+1) normalization using Public Suffix List rules.
//!
//! The rule grammar follows the publicsuffix.org format: one rule per line,
//! `//` comments, `*.` wildcards and `!` exceptions. A name with no matching
//! rule falls back to the implicit `*` rule (its last label is the suffix).

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

const BUILTIN_RULES: &str = "\
// generic
com
net
org
info
biz
io
xyz
top
dev
app
eth
// country codes and common second-level registries
de
nl
ee
fr
uk
co.uk
org.uk
ac.uk
jp
co.jp
au
com.au
br
com.br
cn
com.cn
";

#[derive(Clone, Debug, Default)]
pub struct SuffixRules {
    exact: HashSet<String>,
    wildcard: HashSet<String>,
    exception: HashSet<String>,
}

impl SuffixRules {
    pub fn parse(text: &str) -> Self {
        let mut rules = SuffixRules::default();
        for line in text.lines() {
            let rule = line.split_whitespace().next().unwrap_or("");
            if rule.is_empty() || rule.starts_with("//") {
                continue;
            }
            let rule = rule.to_ascii_lowercase();
            if let Some(rest) = rule.strip_prefix('!') {
                rules.exception.insert(rest.to_string());
            } else if let Some(rest) = rule.strip_prefix("*.") {
                rules.wildcard.insert(rest.to_string());
            } else {
                rules.exact.insert(rule);
            }
        }
        rules
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    /// A small built-in rule set covering the suffixes used by fixtures.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_RULES)
    }

    /// Number of trailing labels forming the public suffix of `labels`.
    fn suffix_len(&self, labels: &[&str]) -> usize {
        let n = labels.len();
        let mut best = 1;
        for k in 1..=n {
            let candidate = labels[n - k..].join(".");
            if self.exception.contains(&candidate) {
                return k - 1;
            }
            if self.exact.contains(&candidate) {
                best = best.max(k);
            }
            if k < n {
                let parent = labels[n - k..].join(".");
                if self.wildcard.contains(&parent) {
                    best = best.max(k + 1);
                }
            }
        }
        best
    }

    /// Lowercases, strips a trailing dot and reduces `name` to its
    /// registrable domain.
    pub fn registrable_domain(&self, name: &str) -> Result<String> {
        let cleaned = name.trim().trim_end_matches('.').to_ascii_lowercase();
        let labels: Vec<&str> = cleaned.split('.').collect();
        if cleaned.is_empty() || labels.iter().any(|l| l.is_empty()) {
            return Err(Error::NotRegistrable(name.to_string()));
        }
        let suffix = self.suffix_len(&labels);
        if labels.len() <= suffix {
            return Err(Error::NotRegistrable(name.to_string()));
        }
        Ok(labels[labels.len() - suffix - 1..].join("."))
    }
}
