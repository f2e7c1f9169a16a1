//! Laundered-manifest expansion, laundered utterance naming and corpus accounting.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use launderbench_core::eval::{Key, Trial, TrialSet};

use crate::grid::{AttackFamily, AttackGrid, AttackSpec};

/// Separator between the original utterance id and the condition tag.
pub const LAUNDERED_SEPARATOR: &str = "__";

pub fn laundered_utt_id(orig_utt_id: &str, tag: &str) -> String {
    format!("{orig_utt_id}{LAUNDERED_SEPARATOR}{tag}")
}

/// Splits a laundered id into `(orig_utt_id, tag)`; `None` for clean ids.
pub fn parse_laundered_utt_id(id: &str) -> Option<(&str, &str)> {
    id.rsplit_once(LAUNDERED_SEPARATOR).filter(|(orig, tag)| !orig.is_empty() && !tag.is_empty())
}

/// Condition tag of a (possibly laundered) utterance id; clean ids map to `clean`.
pub fn condition_of(id: &str) -> &str {
    parse_laundered_utt_id(id).map(|(_, tag)| tag).unwrap_or("clean")
}

/// Cross product of trials and specs, stored as index pairs in spec-major order.
#[derive(Debug, Clone)]
pub struct LaunderedManifest<'a> {
    pub trials: &'a TrialSet,
    pub specs: &'a [AttackSpec],
    tags: Vec<String>,
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow<'a> {
    pub trial: &'a Trial,
    pub spec_index: usize,
    pub tag: &'a str,
}

impl ManifestRow<'_> {
    pub fn orig_utt_id(&self) -> &str {
        &self.trial.utt_id
    }

    pub fn laundered_utt_id(&self) -> String {
        laundered_utt_id(&self.trial.utt_id, self.tag)
    }

    pub fn key(&self) -> Key {
        self.trial.key
    }

    /// The protocol line of the laundered utterance.
    pub fn laundered_trial(&self) -> Trial {
        Trial { utt_id: self.laundered_utt_id(), ..self.trial.clone() }
    }
}

pub fn expand_grid<'a>(grid: &'a AttackGrid, trials: &'a TrialSet) -> LaunderedManifest<'a> {
    LaunderedManifest { trials, specs: &grid.specs, tags: grid.specs.iter().map(AttackSpec::tag).collect() }
}

impl<'a> LaunderedManifest<'a> {
    pub fn len(&self) -> usize {
        self.trials.len() * self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn row(&self, i: usize) -> ManifestRow<'_> {
        let n = self.trials.len();
        let spec_index = i / n;
        ManifestRow { trial: &self.trials.entries()[i % n], spec_index, tag: &self.tags[spec_index] }
    }

    pub fn rows(&self) -> impl Iterator<Item = ManifestRow<'_>> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    /// `(bonafide, spoof)` row counts per attack family, by direct enumeration.
    pub fn family_counts(&self) -> BTreeMap<AttackFamily, (usize, usize)> {
        let nb = self.trials.count(Key::Bonafide);
        let ns = self.trials.count(Key::Spoof);
        let mut counts: BTreeMap<AttackFamily, (usize, usize)> = BTreeMap::new();
        for s in self.specs {
            let e = counts.entry(s.family()).or_default();
            e.0 += nb;
            e.1 += ns;
        }
        counts
    }

    /// Tab-separated `orig_utt_id tag laundered_utt_id key` lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("orig_utt_id\ttag\tlaundered_utt_id\tkey\n");
        for r in self.rows() {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", r.orig_utt_id(), r.tag, r.laundered_utt_id(), r.key());
        }
        out
    }
}

/// Published per-family `(bonafide, spoof)` counts of the laundered evaluation corpus,
/// with the LPF spoof count read as 63,882 (printed as "63,88").
pub const PUBLISHED_COUNTS: [(AttackFamily, usize, usize); 5] = [
    (AttackFamily::Reverberation, 22_065, 191_646),
    (AttackFamily::AdditiveNoise, 132_390, 1_149_876),
    (AttackFamily::Recompression, 44_130, 383_292),
    (AttackFamily::Resampling, 29_420, 255_288),
    (AttackFamily::LowPass, 7_355, 63_882),
];
/// Size of the standard evaluation protocol the published counts refer to.
pub const PUBLISHED_EVAL_TRIALS: (usize, usize) = (7_355, 63_882);

/// Comparison of one family's counts with the published ones.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyAccount {
    pub family: AttackFamily,
    pub copies: usize,
    pub bonafide: usize,
    pub spoof: usize,
    pub published: Option<(usize, usize)>,
}

impl FamilyAccount {
    pub fn matches_published(&self) -> Option<bool> {
        self.published.map(|p| p == (self.bonafide, self.spoof))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Accounting {
    pub families: Vec<FamilyAccount>,
    pub notes: Vec<String>,
}

fn thousands(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn ratio(count: usize, base: usize) -> String {
    let r = count as f64 / base as f64;
    if r.fract() == 0.0 {
        format!("{r}")
    } else {
        format!("{r:.4}")
    }
}

/// Per-family counts of the manifest; compared with the published table when the
/// protocol has the standard evaluation size. Discrepancies become flagged notes.
pub fn accounting(manifest: &LaunderedManifest<'_>) -> Accounting {
    let nb = manifest.trials.count(Key::Bonafide);
    let ns = manifest.trials.count(Key::Spoof);
    let standard = (nb, ns) == PUBLISHED_EVAL_TRIALS;
    let counts = manifest.family_counts();
    let mut families = Vec::new();
    let mut notes = Vec::new();
    for family in AttackFamily::ALL {
        let Some(&(b, s)) = counts.get(&family) else { continue };
        let copies = if nb + ns == 0 { 0 } else { (b + s) / (nb + ns) };
        let published = PUBLISHED_COUNTS.iter().find(|p| p.0 == family).map(|p| (p.1, p.2)).filter(|_| standard);
        let acc = FamilyAccount { family, copies, bonafide: b, spoof: s, published };
        if let (Some(false), Some((pb, ps))) = (acc.matches_published(), published) {
            notes.push(format!(
                "FLAG {}: grid yields {} copies = {} bonafide + {} spoof, published table prints {} + {} (bonafide x{}, spoof x{}); not reconciled",
                family.short_name(),
                copies,
                thousands(b),
                thousands(s),
                thousands(pb),
                thousands(ps),
                ratio(pb, nb),
                ratio(ps, ns),
            ));
        }
        families.push(acc);
    }
    if standard && counts.contains_key(&AttackFamily::LowPass) {
        notes.push("NOTE LPF: published spoof count is printed as 63,88 and read as 63,882".into());
    }
    Accounting { families, notes }
}

impl Accounting {
    pub fn render(&self) -> String {
        let mut out = String::from("family\tcopies\tbonafide\tspoof\tpublished\n");
        for f in &self.families {
            let published = match (f.published, f.matches_published()) {
                (Some((b, s)), Some(true)) => format!("{} / {} (match)", thousands(b), thousands(s)),
                (Some((b, s)), _) => format!("{} / {} (MISMATCH)", thousands(b), thousands(s)),
                (None, _) => "n/a".into(),
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                f.family.short_name(),
                f.copies,
                thousands(f.bonafide),
                thousands(f.spoof),
                published
            );
        }
        for n in &self.notes {
            out += n;
            out.push('\n');
        }
        out
    }
}
