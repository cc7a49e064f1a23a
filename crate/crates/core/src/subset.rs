//! Conjunctive case/tissue predicates selecting the slice of an evaluation
//! run a ranking is computed over.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{CaseMetadata, Domain, Pathology};
use crate::volume::TissueLabel;

/// All predicates optional; an empty filter selects everything.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SubsetFilter {
    pub institutions: Option<BTreeSet<String>>,
    pub domain: Option<Domain>,
    pub pathology: Option<Pathology>,
    pub quality: Option<u8>,
    pub sr_method: Option<String>,
    pub tissues: Option<BTreeSet<TissueLabel>>,
}

impl SubsetFilter {
    pub fn everything() -> SubsetFilter {
        SubsetFilter::default()
    }

    pub fn with_domain(domain: Domain) -> SubsetFilter {
        SubsetFilter { domain: Some(domain), ..SubsetFilter::default() }
    }

    pub fn with_quality(quality: u8) -> SubsetFilter {
        SubsetFilter { quality: Some(quality), ..SubsetFilter::default() }
    }

    pub fn with_pathology(pathology: Pathology) -> SubsetFilter {
        SubsetFilter { pathology: Some(pathology), ..SubsetFilter::default() }
    }

    pub fn with_sr_method(sr: &str) -> SubsetFilter {
        SubsetFilter { sr_method: Some(sr.to_string()), ..SubsetFilter::default() }
    }

    pub fn with_tissue(tissue: TissueLabel) -> SubsetFilter {
        SubsetFilter {
            tissues: Some(BTreeSet::from([tissue])),
            ..SubsetFilter::default()
        }
    }

    /// Restricts this filter to one tissue on top of its case predicates.
    pub fn and_tissue(&self, tissue: TissueLabel) -> SubsetFilter {
        let mut out = self.clone();
        out.tissues = Some(BTreeSet::from([tissue]));
        out
    }

    pub fn matches_case(&self, meta: &CaseMetadata) -> bool {
        if let Some(insts) = &self.institutions {
            if !insts.contains(&meta.institution.to_string()) {
                return false;
            }
        }
        if let Some(domain) = self.domain {
            if meta.domain != domain {
                return false;
            }
        }
        if let Some(pathology) = self.pathology {
            if meta.pathology != pathology {
                return false;
            }
        }
        if let Some(quality) = self.quality {
            if meta.quality != quality {
                return false;
            }
        }
        if let Some(sr) = &self.sr_method {
            if !meta.sr_method.to_string().eq_ignore_ascii_case(sr) {
                return false;
            }
        }
        true
    }

    pub fn matches(&self, meta: &CaseMetadata, tissue: TissueLabel) -> bool {
        if let Some(tissues) = &self.tissues {
            if !tissues.contains(&tissue) {
                return false;
            }
        }
        self.matches_case(meta)
    }

    /// Stable printable form, also used in report file names.
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if let Some(insts) = &self.institutions {
            let list: Vec<&str> = insts.iter().map(|s| s.as_str()).collect();
            parts.push(format!("institution={}", list.join("+")));
        }
        if let Some(domain) = self.domain {
            parts.push(format!("domain={domain}"));
        }
        if let Some(pathology) = self.pathology {
            parts.push(format!("pathology={pathology}"));
        }
        if let Some(quality) = self.quality {
            parts.push(format!("quality={quality}"));
        }
        if let Some(sr) = &self.sr_method {
            parts.push(format!("sr_method={sr}"));
        }
        if let Some(tissues) = &self.tissues {
            let list: Vec<&str> = tissues.iter().map(|t| t.name()).collect();
            parts.push(format!("tissue={}", list.join("+")));
        }
        if parts.is_empty() {
            "all".to_string()
        } else {
            parts.join("&")
        }
    }

    /// Parses one `key=value` predicate into this filter.
    pub fn apply_predicate(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim().to_ascii_lowercase().as_str() {
            "institution" => {
                self.institutions
                    .get_or_insert_with(BTreeSet::new)
                    .insert(value.trim().to_string());
            }
            "domain" => {
                self.domain = Some(Domain::parse(value).ok_or_else(|| {
                    Error::Subset(format!("unknown domain {value:?} (use in/out)"))
                })?);
            }
            "pathology" => {
                self.pathology = Some(Pathology::parse(value).ok_or_else(|| {
                    Error::Subset(format!("unknown pathology {value:?}"))
                })?);
            }
            "quality" => {
                let q: u8 = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::Subset(format!("bad quality {value:?}")))?;
                if !(1..=3).contains(&q) {
                    return Err(Error::Subset(format!("quality must be 1..=3, got {q}")));
                }
                self.quality = Some(q);
            }
            "sr_method" => self.sr_method = Some(value.trim().to_string()),
            "tissue" => {
                let tissue = TissueLabel::from_name(value)
                    .filter(|t| *t != TissueLabel::Background)
                    .ok_or_else(|| Error::Subset(format!("unknown tissue {value:?}")))?;
                self.tissues.get_or_insert_with(BTreeSet::new).insert(tissue);
            }
            other => {
                return Err(Error::Subset(format!(
                    "unknown subset key {other:?} (expected institution, domain, pathology, quality, sr_method, or tissue)"
                )))
            }
        }
        Ok(())
    }
}
