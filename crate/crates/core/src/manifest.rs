//! Case metadata and the CSV manifests driving a batch evaluation.
//!
//! Two files describe a challenge run: the ground-truth manifest
//! (`case_id,gt_path,institution,domain,ga_weeks,pathology,quality,sr_method`)
//! and the team predictions table (`team_id,case_id,prediction_path`).
//! Relative paths resolve against the CSV's own directory.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Imaging site. The four challenge institutions are known; others parse as
/// [`Institution::Other`] and skip the domain-consistency check.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Institution {
    Kispi,
    Vienna,
    Chuv,
    Ucsf,
    Other(String),
}

impl Institution {
    pub fn parse(token: &str) -> Institution {
        match token.trim().to_ascii_lowercase().as_str() {
            "kispi" => Institution::Kispi,
            "vienna" => Institution::Vienna,
            "chuv" => Institution::Chuv,
            "ucsf" => Institution::Ucsf,
            _ => Institution::Other(token.trim().to_string()),
        }
    }

    /// The challenge's institution-to-domain mapping, when known.
    pub fn expected_domain(&self) -> Option<Domain> {
        match self {
            Institution::Kispi | Institution::Vienna => Some(Domain::InDomain),
            Institution::Chuv | Institution::Ucsf => Some(Domain::OutOfDomain),
            Institution::Other(_) => None,
        }
    }
}

impl fmt::Display for Institution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Institution::Kispi => write!(f, "Kispi"),
            Institution::Vienna => write!(f, "Vienna"),
            Institution::Chuv => write!(f, "CHUV"),
            Institution::Ucsf => write!(f, "UCSF"),
            Institution::Other(name) => write!(f, "{name}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    InDomain,
    OutOfDomain,
}

impl Domain {
    pub fn parse(token: &str) -> Option<Domain> {
        match token.trim().to_ascii_lowercase().as_str() {
            "in_domain" | "in" | "id" => Some(Domain::InDomain),
            "out_of_domain" | "out" | "ood" => Some(Domain::OutOfDomain),
            _ => None,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::InDomain => write!(f, "in_domain"),
            Domain::OutOfDomain => write!(f, "out_of_domain"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pathology {
    Normal,
    Pathological,
}

impl Pathology {
    pub fn parse(token: &str) -> Option<Pathology> {
        match token.trim().to_ascii_lowercase().as_str() {
            "normal" => Some(Pathology::Normal),
            "pathological" | "pathology" => Some(Pathology::Pathological),
            _ => None,
        }
    }
}

impl fmt::Display for Pathology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pathology::Normal => write!(f, "normal"),
            Pathology::Pathological => write!(f, "pathological"),
        }
    }
}

/// Super-resolution reconstruction method; extensible like [`Institution`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SrMethod {
    IrtkSimple,
    Mialsrtk,
    Niftymic,
    Other(String),
}

impl SrMethod {
    pub fn parse(token: &str) -> SrMethod {
        match token.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "irtk_simple" | "irtksimple" => SrMethod::IrtkSimple,
            "mialsrtk" | "mial_srtk" => SrMethod::Mialsrtk,
            "niftymic" => SrMethod::Niftymic,
            _ => SrMethod::Other(token.trim().to_string()),
        }
    }
}

impl fmt::Display for SrMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SrMethod::IrtkSimple => write!(f, "irtk_simple"),
            SrMethod::Mialsrtk => write!(f, "mialsrtk"),
            SrMethod::Niftymic => write!(f, "niftymic"),
            SrMethod::Other(name) => write!(f, "{name}"),
        }
    }
}

/// Per-case attributes driving the subset rankings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseMetadata {
    pub case_id: String,
    pub institution: Institution,
    pub domain: Domain,
    pub ga_weeks: f64,
    pub pathology: Pathology,
    /// Reconstruction quality rating: 1 = poor, 2 = good, 3 = excellent.
    pub quality: u8,
    pub sr_method: SrMethod,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtEntry {
    pub meta: CaseMetadata,
    pub gt_path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeamEntry {
    pub team_id: String,
    pub case_id: String,
    pub prediction_path: PathBuf,
}

/// Validated pairing of ground-truth cases with team predictions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub gt_entries: Vec<GtEntry>,
    pub team_entries: Vec<TeamEntry>,
}

impl Manifest {
    pub fn case(&self, case_id: &str) -> Option<&GtEntry> {
        self.gt_entries.iter().find(|e| e.meta.case_id == case_id)
    }

    /// Distinct team ids in first-appearance order.
    pub fn team_ids(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for entry in &self.team_entries {
            if seen.insert(entry.team_id.clone()) {
                out.push(entry.team_id.clone());
            }
        }
        out
    }
}

fn resolve(base: &Path, raw: &str) -> PathBuf {
    let p = Path::new(raw);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn field(record: &csv::StringRecord, idx: usize) -> &str {
    record.get(idx).unwrap_or("").trim()
}

const GT_HEADER: [&str; 8] = [
    "case_id",
    "gt_path",
    "institution",
    "domain",
    "ga_weeks",
    "pathology",
    "quality",
    "sr_method",
];
const TEAM_HEADER: [&str; 3] = ["team_id", "case_id", "prediction_path"];

fn check_header(record: &csv::StringRecord, expected: &[&str], path: &Path) -> Result<()> {
    let got: Vec<String> = record.iter().map(|f| f.trim().to_ascii_lowercase()).collect();
    if got != expected {
        return Err(Error::Manifest(format!(
            "{}: header must be {:?}, got {:?}",
            path.display(),
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

/// Parses and validates the ground-truth manifest CSV.
pub fn load_gt_manifest(path: &Path) -> Result<Vec<GtEntry>> {
    let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;

    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        let row = row_idx + 1;
        if row == 1 {
            check_header(&record, &GT_HEADER, path)?;
            continue;
        }
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if record.len() != GT_HEADER.len() {
            return Err(Error::Manifest(format!(
                "{}: row {row}: expected {} fields, got {}",
                path.display(),
                GT_HEADER.len(),
                record.len()
            )));
        }
        let bad = |what: &str, tok: &str| {
            Error::Manifest(format!("{}: row {row}: unknown {what} {tok:?}", path.display()))
        };
        let case_id = field(&record, 0).to_string();
        if case_id.is_empty() {
            return Err(Error::Manifest(format!("{}: row {row}: empty case_id", path.display())));
        }
        if !seen.insert(case_id.clone()) {
            return Err(Error::Manifest(format!(
                "{}: row {row}: duplicate case_id {case_id:?}",
                path.display()
            )));
        }
        let institution = Institution::parse(field(&record, 2));
        let domain = Domain::parse(field(&record, 3))
            .ok_or_else(|| bad("domain", field(&record, 3)))?;
        if let Some(expected) = institution.expected_domain() {
            if expected != domain {
                return Err(Error::Manifest(format!(
                    "{}: row {row}: institution {institution} implies {expected} but row says {domain}",
                    path.display()
                )));
            }
        }
        let ga_weeks: f64 = field(&record, 4)
            .parse()
            .map_err(|_| bad("ga_weeks", field(&record, 4)))?;
        let pathology = Pathology::parse(field(&record, 5))
            .ok_or_else(|| bad("pathology", field(&record, 5)))?;
        let quality: u8 = field(&record, 6)
            .parse()
            .map_err(|_| bad("quality", field(&record, 6)))?;
        if !(1..=3).contains(&quality) {
            return Err(Error::Manifest(format!(
                "{}: row {row}: quality must be 1..=3, got {quality}",
                path.display()
            )));
        }
        let sr_method = SrMethod::parse(field(&record, 7));
        entries.push(GtEntry {
            meta: CaseMetadata {
                case_id,
                institution,
                domain,
                ga_weeks,
                pathology,
                quality,
                sr_method,
            },
            gt_path: resolve(&base, field(&record, 1)),
        });
    }
    Ok(entries)
}

/// Parses the team predictions CSV.
pub fn load_team_entries(path: &Path) -> Result<Vec<TeamEntry>> {
    let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    let mut entries = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        let row = row_idx + 1;
        if row == 1 {
            check_header(&record, &TEAM_HEADER, path)?;
            continue;
        }
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if record.len() != TEAM_HEADER.len() {
            return Err(Error::Manifest(format!(
                "{}: row {row}: expected {} fields, got {}",
                path.display(),
                TEAM_HEADER.len(),
                record.len()
            )));
        }
        let team_id = field(&record, 0).to_string();
        let case_id = field(&record, 1).to_string();
        if team_id.is_empty() || case_id.is_empty() {
            return Err(Error::Manifest(format!(
                "{}: row {row}: team_id and case_id must be nonempty",
                path.display()
            )));
        }
        entries.push(TeamEntry {
            team_id,
            case_id,
            prediction_path: resolve(&base, field(&record, 2)),
        });
    }
    Ok(entries)
}

/// Loads and cross-validates the manifest pair. `predictions` may be absent
/// for a ground-truth-only inspection run.
pub fn load_manifest(gt_csv: &Path, predictions_csv: Option<&Path>) -> Result<Manifest> {
    let gt_entries = load_gt_manifest(gt_csv)?;
    let team_entries = match predictions_csv {
        Some(path) => load_team_entries(path)?,
        None => Vec::new(),
    };
    let known: HashSet<&str> = gt_entries.iter().map(|e| e.meta.case_id.as_str()).collect();
    let mut pair_seen = HashSet::new();
    for entry in &team_entries {
        if !known.contains(entry.case_id.as_str()) {
            return Err(Error::Manifest(format!(
                "prediction for team {:?} references unknown case {:?}",
                entry.team_id, entry.case_id
            )));
        }
        if !pair_seen.insert((entry.team_id.clone(), entry.case_id.clone())) {
            return Err(Error::Manifest(format!(
                "duplicate prediction entry for team {:?}, case {:?}",
                entry.team_id, entry.case_id
            )));
        }
    }
    Ok(Manifest { gt_entries, team_entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &Path, name: &str, contents: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    const GT_HEADER_LINE: &str =
        "case_id,gt_path,institution,domain,ga_weeks,pathology,quality,sr_method\n";

    #[test]
    fn parses_valid_manifest_pair() {
        let dir = tempfile::tempdir().unwrap();
        let gt = write_file(
            dir.path(),
            "gt.csv",
            &format!(
                "{GT_HEADER_LINE}c1,vols/c1.nii.gz,Kispi,in_domain,25.5,normal,3,mialsrtk\n\
                 c2,vols/c2.nii.gz,CHUV,out_of_domain,30.0,pathological,2,niftymic\n"
            ),
        );
        let preds = write_file(
            dir.path(),
            "preds.csv",
            "team_id,case_id,prediction_path\nalpha,c1,alpha/c1.nii.gz\nalpha,c2,alpha/c2.nii.gz\n",
        );
        let manifest = load_manifest(&gt, Some(&preds)).unwrap();
        assert_eq!(manifest.gt_entries.len(), 2);
        assert_eq!(manifest.team_entries.len(), 2);
        assert_eq!(manifest.team_ids(), vec!["alpha".to_string()]);
        assert_eq!(manifest.gt_entries[0].meta.quality, 3);
        assert_eq!(manifest.gt_entries[0].gt_path, dir.path().join("vols/c1.nii.gz"));
        assert_eq!(manifest.gt_entries[1].meta.domain, Domain::OutOfDomain);
    }

    #[test]
    fn empty_predictions_is_a_valid_gt_only_run() {
        let dir = tempfile::tempdir().unwrap();
        let gt = write_file(
            dir.path(),
            "gt.csv",
            &format!("{GT_HEADER_LINE}c1,c1.nii,Vienna,in_domain,22.0,normal,1,irtk_simple\n"),
        );
        let manifest = load_manifest(&gt, None).unwrap();
        assert_eq!(manifest.gt_entries.len(), 1);
        assert!(manifest.team_entries.is_empty());
    }

    #[test]
    fn duplicate_case_id_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let gt = write_file(
            dir.path(),
            "gt.csv",
            &format!(
                "{GT_HEADER_LINE}c1,a.nii,Kispi,in_domain,25.0,normal,3,mialsrtk\n\
                 c1,b.nii,Kispi,in_domain,26.0,normal,3,mialsrtk\n"
            ),
        );
        let err = load_manifest(&gt, None).unwrap_err();
        assert!(matches!(err, Error::Manifest(_)));
        assert!(err.to_string().contains("duplicate case_id"));
    }

    #[test]
    fn quality_out_of_range_names_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let gt = write_file(
            dir.path(),
            "gt.csv",
            &format!("{GT_HEADER_LINE}c1,a.nii,Kispi,in_domain,25.0,normal,4,mialsrtk\n"),
        );
        let err = load_manifest(&gt, None).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
        assert!(err.to_string().contains("quality"));
    }

    #[test]
    fn unknown_enum_token_names_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let gt = write_file(
            dir.path(),
            "gt.csv",
            &format!("{GT_HEADER_LINE}c1,a.nii,Kispi,in_domain,25.0,weird,3,mialsrtk\n"),
        );
        let err = load_manifest(&gt, None).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
        assert!(err.to_string().contains("pathology"));
    }

    #[test]
    fn domain_must_match_known_institution() {
        let dir = tempfile::tempdir().unwrap();
        let gt = write_file(
            dir.path(),
            "gt.csv",
            &format!("{GT_HEADER_LINE}c1,a.nii,Kispi,out_of_domain,25.0,normal,3,mialsrtk\n"),
        );
        assert!(load_manifest(&gt, None).is_err());
        // unknown institutions skip the check
        let gt2 = write_file(
            dir.path(),
            "gt2.csv",
            &format!("{GT_HEADER_LINE}c1,a.nii,Elsewhere,out_of_domain,25.0,normal,3,mialsrtk\n"),
        );
        assert!(load_manifest(&gt2, None).is_ok());
    }

    #[test]
    fn prediction_for_unknown_case_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let gt = write_file(
            dir.path(),
            "gt.csv",
            &format!("{GT_HEADER_LINE}c1,a.nii,Kispi,in_domain,25.0,normal,3,mialsrtk\n"),
        );
        let preds = write_file(
            dir.path(),
            "preds.csv",
            "team_id,case_id,prediction_path\nalpha,ghost,x.nii\n",
        );
        let err = load_manifest(&gt, Some(&preds)).unwrap_err();
        assert!(err.to_string().contains("unknown case"));
    }

    #[test]
    fn one_hundred_sixty_cases_split_across_institutions() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from(GT_HEADER_LINE);
        let sites = [
            ("Kispi", "in_domain", "mialsrtk"),
            ("Vienna", "in_domain", "niftymic"),
            ("CHUV", "out_of_domain", "mialsrtk"),
            ("UCSF", "out_of_domain", "niftymic"),
        ];
        for (s, (inst, dom, sr)) in sites.iter().enumerate() {
            for i in 0..40 {
                body.push_str(&format!(
                    "case_{s}_{i},vols/case_{s}_{i}.nii.gz,{inst},{dom},{ga:.1},normal,{q},{sr}\n",
                    ga = 20.0 + i as f64 * 0.3,
                    q = 1 + (i % 3),
                ));
            }
        }
        let gt = write_file(dir.path(), "gt.csv", &body);
        let manifest = load_manifest(&gt, None).unwrap();
        assert_eq!(manifest.gt_entries.len(), 160);
        let in_domain = manifest
            .gt_entries
            .iter()
            .filter(|e| e.meta.domain == Domain::InDomain)
            .count();
        assert_eq!(in_domain, 80);
    }
}
