//! Goal categories, stimulus words, frequency corpora and balanced selection.
//!
//! A stimulus set is 5 exemplars for each of 7 goal categories plus 5
//! neutral controls. Words are chosen so that the per-category mean length
//! and mean log frequency are as close as possible, since short frequent
//! words are detected more easily regardless of their meaning.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Exemplars per category in the standard design.
pub const EXEMPLARS_PER_CATEGORY: usize = 5;
/// Trials in the standard design.
pub const STANDARD_SET_SIZE: usize = 40;

/// Above this many candidate subsets the selector falls back to hill-climbing.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

const TIE_EPS: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("file contains no rows")]
    Empty,
    #[error("unknown goal category '{0}'")]
    UnknownCategory(String),
    #[error("invalid word '{0}': words must be non-empty and alphabetic")]
    InvalidWord(String),
    #[error("category {category} has {available} candidates, {required} required")]
    InsufficientCandidates {
        category: GoalCategory,
        available: usize,
        required: usize,
    },
    #[error("no usable frequency for '{0}'")]
    UnknownFrequency(String),
    #[error("structural error: {0}")]
    Structural(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// The seven goal categories plus the neutral control category.
///
/// Variants are declared in id order so the derived `Ord` sorts by id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalCategory {
    Acceptance,
    Achievement,
    Belonging,
    Existential,
    FeelingBetter,
    Neutral,
    Power,
    Safety,
}

impl GoalCategory {
    pub const ALL: [GoalCategory; 8] = [
        GoalCategory::Acceptance,
        GoalCategory::Achievement,
        GoalCategory::Belonging,
        GoalCategory::Existential,
        GoalCategory::FeelingBetter,
        GoalCategory::Neutral,
        GoalCategory::Power,
        GoalCategory::Safety,
    ];

    pub const GOALS: [GoalCategory; 7] = [
        GoalCategory::Acceptance,
        GoalCategory::Achievement,
        GoalCategory::Belonging,
        GoalCategory::Existential,
        GoalCategory::FeelingBetter,
        GoalCategory::Power,
        GoalCategory::Safety,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GoalCategory::Acceptance => "acceptance",
            GoalCategory::Achievement => "achievement",
            GoalCategory::Belonging => "belonging",
            GoalCategory::Existential => "existential",
            GoalCategory::FeelingBetter => "feeling_better",
            GoalCategory::Neutral => "neutral",
            GoalCategory::Power => "power",
            GoalCategory::Safety => "safety",
        }
    }

    pub fn is_goal(self) -> bool {
        self != GoalCategory::Neutral
    }

    pub fn description(self) -> &'static str {
        match self {
            GoalCategory::Safety => {
                "feeling emotionally safe with a trusted, warm and reliable person"
            }
            GoalCategory::Acceptance => {
                "accepting self, others and life events without judgment"
            }
            GoalCategory::Belonging => "having somebody who cares for, listens to, likes or loves them",
            GoalCategory::Power => "controlling situations or people, being right, being above others",
            GoalCategory::Achievement => "accomplishing, producing, advancing and prospering",
            GoalCategory::Existential => "finding meaning, purpose, aim and plan in life",
            GoalCategory::FeelingBetter => "positive change in feelings, symptoms or progress",
            GoalCategory::Neutral => "control words with no goal content",
        }
    }
}

impl fmt::Display for GoalCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GoalCategory {
    type Err = LexiconError;

    /// Accepts canonical ids and the alias `growth` for achievement.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_lowercase();
        if key == "growth" {
            return Ok(GoalCategory::Achievement);
        }
        GoalCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == key)
            .ok_or_else(|| LexiconError::UnknownCategory(s.to_string()))
    }
}

/// Case-folds a stimulus word, rejecting anything that is not purely alphabetic.
pub fn fold_word(raw: &str) -> Result<String, LexiconError> {
    let word = raw.trim().to_lowercase();
    if word.is_empty() || !word.chars().all(char::is_alphabetic) {
        return Err(LexiconError::InvalidWord(raw.to_string()));
    }
    Ok(word)
}

/// `log10(f + 1)`, the frequency scale used for balancing.
pub fn log_frequency(freq_per_million: f64) -> f64 {
    (freq_per_million + 1.0).log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub word: String,
    pub category: GoalCategory,
    pub length: usize,
    pub freq_per_million: f64,
    pub source: String,
}

impl LexiconEntry {
    pub fn new(
        word: &str,
        category: GoalCategory,
        freq_per_million: f64,
        source: impl Into<String>,
    ) -> Result<Self, LexiconError> {
        let word = fold_word(word)?;
        Ok(LexiconEntry {
            length: word.chars().count(),
            word,
            category,
            freq_per_million,
            source: source.into(),
        })
    }

    pub fn log_freq(&self) -> f64 {
        log_frequency(self.freq_per_million)
    }

    fn has_known_frequency(&self) -> bool {
        self.freq_per_million.is_finite() && self.freq_per_million >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyCorpus {
    pub name: String,
    lookup: HashMap<String, f64>,
}

impl FrequencyCorpus {
    pub fn get(&self, word: &str) -> Option<f64> {
        self.lookup.get(&word.trim().to_lowercase()).copied()
    }

    pub fn len(&self) -> usize {
        self.lookup.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lookup.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.lookup.keys().map(String::as_str)
    }
}

/// Parses the two-column `word<TAB>freq_per_million` corpus format.
///
/// Later rows for the same (case-folded) word overwrite earlier ones.
pub fn parse_corpus(name: &str, text: &str) -> Result<FrequencyCorpus, LexiconError> {
    let mut lookup = HashMap::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 2 {
            return Err(LexiconError::Malformed {
                line: line_no,
                reason: format!("expected 2 tab-separated columns, found {}", cols.len()),
            });
        }
        let word = cols[0].trim().to_lowercase();
        if word.is_empty() {
            return Err(LexiconError::Malformed {
                line: line_no,
                reason: "empty word".into(),
            });
        }
        let freq: f64 = cols[1].trim().parse().map_err(|_| LexiconError::Malformed {
            line: line_no,
            reason: format!("non-numeric frequency '{}'", cols[1]),
        })?;
        if !freq.is_finite() || freq < 0.0 {
            return Err(LexiconError::Malformed {
                line: line_no,
                reason: format!("frequency must be a non-negative number, got '{}'", cols[1]),
            });
        }
        lookup.insert(word, freq);
    }
    if lookup.is_empty() {
        return Err(LexiconError::Empty);
    }
    Ok(FrequencyCorpus {
        name: name.to_string(),
        lookup,
    })
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<FrequencyCorpus, LexiconError> {
    let path = path.as_ref();
    let text = read(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_corpus(&name, &text)
}

fn read(path: &Path) -> Result<String, LexiconError> {
    std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// One row of a lexicon file, before frequencies are attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconRow {
    pub word: String,
    pub category: GoalCategory,
    pub source: String,
}

/// Parses the three-column `word<TAB>category<TAB>source` lexicon format
/// (header row required).
pub fn parse_lexicon(text: &str) -> Result<Vec<LexiconRow>, LexiconError> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((i, l)) => break (i + 1, l.trim_end_matches('\r')),
            None => return Err(LexiconError::Empty),
        }
    };
    let cols: Vec<String> = header.1.split('\t').map(|c| c.trim().to_lowercase()).collect();
    if cols != ["word", "category", "source"] {
        return Err(LexiconError::Malformed {
            line: header.0,
            reason: "expected header 'word<TAB>category<TAB>source'".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, raw_line) in lines {
        let line_no = i + 1;
        let line = raw_line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(LexiconError::Malformed {
                line: line_no,
                reason: format!("expected 3 tab-separated columns, found {}", cols.len()),
            });
        }
        let word = fold_word(cols[0]).map_err(|_| LexiconError::Malformed {
            line: line_no,
            reason: format!("invalid word '{}'", cols[0]),
        })?;
        let category = cols[1].parse().map_err(|_| LexiconError::Malformed {
            line: line_no,
            reason: format!("unknown category '{}'", cols[1]),
        })?;
        rows.push(LexiconRow {
            word,
            category,
            source: cols[2].trim().to_string(),
        });
    }
    if rows.is_empty() {
        return Err(LexiconError::Empty);
    }
    Ok(rows)
}

pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Vec<LexiconRow>, LexiconError> {
    parse_lexicon(&read(path.as_ref())?)
}

/// Attaches corpus frequencies and groups rows by category.
pub fn attach_frequencies(
    rows: &[LexiconRow],
    corpus: &FrequencyCorpus,
) -> Result<BTreeMap<GoalCategory, Vec<LexiconEntry>>, LexiconError> {
    let mut out: BTreeMap<GoalCategory, Vec<LexiconEntry>> = BTreeMap::new();
    for row in rows {
        let freq = corpus
            .get(&row.word)
            .ok_or_else(|| LexiconError::UnknownFrequency(row.word.clone()))?;
        out.entry(row.category).or_default().push(LexiconEntry::new(
            &row.word,
            row.category,
            freq,
            row.source.clone(),
        )?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub length: f64,
    pub log_freq: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            length: 1.0,
            log_freq: 0.5,
        }
    }
}

impl Tolerances {
    fn check(&self) -> Result<(), LexiconError> {
        if !(self.length > 0.0 && self.log_freq > 0.0) {
            return Err(LexiconError::InvalidParameter(
                "tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub per_category_mean_length: BTreeMap<GoalCategory, f64>,
    pub per_category_mean_log_freq: BTreeMap<GoalCategory, f64>,
    pub max_length_spread: f64,
    pub max_log_freq_spread: f64,
    pub within_tolerance: bool,
}

impl BalanceReport {
    /// Balance objective: each spread scaled by its tolerance, summed.
    pub fn objective(&self, tol: Tolerances) -> f64 {
        self.max_length_spread / tol.length + self.max_log_freq_spread / tol.log_freq
    }
}

fn spread<'a>(values: impl Iterator<Item = &'a f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

/// Computes balance statistics over whatever categories appear in `entries`.
pub fn balance_report(entries: &[LexiconEntry], tol: Tolerances) -> BalanceReport {
    let mut sums: BTreeMap<GoalCategory, (f64, f64, usize)> = BTreeMap::new();
    for e in entries {
        let s = sums.entry(e.category).or_insert((0.0, 0.0, 0));
        s.0 += e.length as f64;
        s.1 += e.log_freq();
        s.2 += 1;
    }
    let per_category_mean_length: BTreeMap<_, _> =
        sums.iter().map(|(c, s)| (*c, s.0 / s.2 as f64)).collect();
    let per_category_mean_log_freq: BTreeMap<_, _> =
        sums.iter().map(|(c, s)| (*c, s.1 / s.2 as f64)).collect();
    let max_length_spread = spread(per_category_mean_length.values());
    let max_log_freq_spread = spread(per_category_mean_log_freq.values());
    BalanceReport {
        within_tolerance: max_length_spread <= tol.length && max_log_freq_spread <= tol.log_freq,
        per_category_mean_length,
        per_category_mean_log_freq,
        max_length_spread,
        max_log_freq_spread,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusSet {
    pub entries: Vec<LexiconEntry>,
    pub balance_report: BalanceReport,
}

impl StimulusSet {
    /// Builds a set from entries, sorting them by (category, word) and
    /// computing its balance report. Every category present must hold the
    /// same number of words and no word may repeat.
    pub fn from_entries(
        mut entries: Vec<LexiconEntry>,
        tol: Tolerances,
    ) -> Result<Self, LexiconError> {
        entries.sort_by(|a, b| (a.category, &a.word).cmp(&(b.category, &b.word)));
        check_structure(&entries, None)?;
        let balance_report = balance_report(&entries, tol);
        Ok(StimulusSet {
            entries,
            balance_report,
        })
    }

    /// Builds the standard 8 × 5 set from lexicon rows and a corpus.
    pub fn from_rows(
        rows: &[LexiconRow],
        corpus: &FrequencyCorpus,
        tol: Tolerances,
    ) -> Result<Self, LexiconError> {
        let grouped = attach_frequencies(rows, corpus)?;
        let set = Self::from_entries(grouped.into_values().flatten().collect(), tol)?;
        set.check_design()?;
        Ok(set)
    }

    /// Checks the standard design: all 8 categories, 5 words each.
    pub fn check_design(&self) -> Result<(), LexiconError> {
        check_structure(&self.entries, Some(EXEMPLARS_PER_CATEGORY))?;
        for c in GoalCategory::ALL {
            if !self.entries.iter().any(|e| e.category == c) {
                return Err(LexiconError::Structural(format!("category {c} has no entries")));
            }
        }
        Ok(())
    }

    pub fn words_in(&self, category: GoalCategory) -> impl Iterator<Item = &LexiconEntry> {
        self.entries.iter().filter(move |e| e.category == category)
    }

    pub fn entry(&self, word: &str) -> Option<&LexiconEntry> {
        self.entries.iter().find(|e| e.word == word)
    }

    /// SHA-256 over the canonical (category, word, frequency) rows.
    pub fn content_hash(&self) -> String {
        let mut rows: Vec<_> = self
            .entries
            .iter()
            .map(|e| format!("{}\t{}\t{}\n", e.category, e.word, e.freq_per_million))
            .collect();
        rows.sort();
        let mut hasher = Sha256::new();
        for r in rows {
            hasher.update(r.as_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

fn check_structure(entries: &[LexiconEntry], per_category: Option<usize>) -> Result<(), LexiconError> {
    let mut seen = BTreeSet::new();
    let mut counts: BTreeMap<GoalCategory, usize> = BTreeMap::new();
    for e in entries {
        if !seen.insert(e.word.as_str()) {
            return Err(LexiconError::Structural(format!("duplicate word '{}'", e.word)));
        }
        if e.length != e.word.chars().count() {
            return Err(LexiconError::Structural(format!(
                "length of '{}' recorded as {}",
                e.word, e.length
            )));
        }
        *counts.entry(e.category).or_default() += 1;
    }
    let expected = per_category.or_else(|| counts.values().next().copied());
    if let Some(k) = expected {
        if let Some((c, n)) = counts.iter().find(|(_, n)| **n != k) {
            return Err(LexiconError::Structural(format!(
                "category {c} has {n} entries, expected {k}"
            )));
        }
    }
    Ok(())
}

/// Recomputes the balance report of a standard 8 × 5 set.
pub fn validate_set(set: &StimulusSet, tol: Tolerances) -> Result<BalanceReport, LexiconError> {
    tol.check()?;
    set.check_design()?;
    Ok(balance_report(&set.entries, tol))
}

struct CategoryPool<'a> {
    category: GoalCategory,
    /// Sorted by word.
    entries: Vec<&'a LexiconEntry>,
}

/// Per-category selection state: chosen indices, sorted ascending.
type Selection = Vec<Vec<usize>>;

fn subset_means(pool: &CategoryPool<'_>, idx: &[usize]) -> (f64, f64) {
    let k = idx.len() as f64;
    let (l, f) = idx.iter().fold((0.0, 0.0), |(l, f), &i| {
        (l + pool.entries[i].length as f64, f + pool.entries[i].log_freq())
    });
    (l / k, f / k)
}

fn selection_means(pools: &[CategoryPool<'_>], sel: &Selection) -> Vec<(f64, f64)> {
    pools.iter().zip(sel).map(|(p, idx)| subset_means(p, idx)).collect()
}

fn objective_of(means: &[(f64, f64)], tol: Tolerances) -> f64 {
    let ls = spread(means.iter().map(|m| &m.0));
    let fs = spread(means.iter().map(|m| &m.1));
    ls / tol.length + fs / tol.log_freq
}

fn selection_key<'a>(pools: &[CategoryPool<'a>], sel: &Selection) -> Vec<&'a str> {
    let mut words: Vec<&str> = pools
        .iter()
        .zip(sel)
        .flat_map(|(p, idx)| idx.iter().map(|&i| p.entries[i].word.as_str()))
        .collect();
    words.sort_unstable();
    words
}

/// True when `cand` should replace `best`: strictly lower objective, or an
/// equal objective with a lexicographically smaller sorted word list.
fn better(
    pools: &[CategoryPool<'_>],
    cand: (f64, &Selection),
    best: (f64, &Selection),
) -> bool {
    if cand.0 < best.0 - TIE_EPS {
        return true;
    }
    if cand.0 > best.0 + TIE_EPS {
        return false;
    }
    selection_key(pools, cand.1) < selection_key(pools, best.1)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn exhaustive(pools: &[CategoryPool<'_>], k: usize, tol: Tolerances) -> Selection {
    let combos: Vec<Vec<Vec<usize>>> = pools.iter().map(|p| combinations(p.entries.len(), k)).collect();
    let combo_means: Vec<Vec<(f64, f64)>> = pools
        .iter()
        .zip(&combos)
        .map(|(p, cs)| {
            cs.iter().map(|c| subset_means(p, c)).collect()
        })
        .collect();

    let mut odometer = vec![0usize; pools.len()];
    let mut best_sel: Selection = odometer.iter().enumerate().map(|(c, &i)| combos[c][i].clone()).collect();
    let mut best_j = f64::INFINITY;
    let mut means = vec![(0.0, 0.0); pools.len()];
    loop {
        for (c, &i) in odometer.iter().enumerate() {
            means[c] = combo_means[c][i];
        }
        let j = objective_of(&means, tol);
        if j <= best_j + TIE_EPS {
            let sel: Selection = odometer.iter().enumerate().map(|(c, &i)| combos[c][i].clone()).collect();
            if better(pools, (j, &sel), (best_j, &best_sel)) {
                best_j = j;
                best_sel = sel;
            }
        }
        // advance odometer
        let mut c = pools.len();
        loop {
            if c == 0 {
                return best_sel;
            }
            c -= 1;
            odometer[c] += 1;
            if odometer[c] < combos[c].len() {
                break;
            }
            odometer[c] = 0;
        }
    }
}

fn hill_climb(pools: &[CategoryPool<'_>], k: usize, tol: Tolerances) -> Selection {
    let mut sel: Selection = pools.iter().map(|_| (0..k).collect()).collect();
    let mut current = objective_of(&selection_means(pools, &sel), tol);
    loop {
        let mut best: Option<(f64, Selection)> = None;
        for (c, pool) in pools.iter().enumerate() {
            for pos in 0..k {
                for cand in 0..pool.entries.len() {
                    if sel[c].contains(&cand) {
                        continue;
                    }
                    let mut next = sel.clone();
                    next[c][pos] = cand;
                    next[c].sort_unstable();
                    let j = objective_of(&selection_means(pools, &next), tol);
                    if j >= current - TIE_EPS {
                        continue;
                    }
                    let replace = match &best {
                        None => true,
                        Some((bj, bs)) => better(pools, (j, &next), (*bj, bs)),
                    };
                    if replace {
                        best = Some((j, next));
                    }
                }
            }
        }
        match best {
            Some((j, next)) => {
                current = j;
                sel = next;
            }
            None => return sel,
        }
    }
}

/// Chooses `k` words per category minimising the balance objective.
///
/// Exhaustive when the number of candidate subsets is at most
/// [`EXHAUSTIVE_LIMIT`], otherwise steepest-descent 1-swap hill-climbing from
/// the alphabetically first `k` words of each category.
pub fn balance_select(
    candidates: &BTreeMap<GoalCategory, Vec<LexiconEntry>>,
    k: usize,
    tol: Tolerances,
) -> Result<StimulusSet, LexiconError> {
    if k == 0 {
        return Err(LexiconError::InvalidParameter("k must be positive".into()));
    }
    tol.check()?;
    let mut seen = BTreeSet::new();
    let mut pools = Vec::with_capacity(candidates.len());
    for (&category, list) in candidates {
        for e in list {
            if !e.has_known_frequency() {
                return Err(LexiconError::UnknownFrequency(e.word.clone()));
            }
            if !seen.insert(e.word.as_str()) {
                return Err(LexiconError::Structural(format!(
                    "candidate '{}' appears more than once",
                    e.word
                )));
            }
        }
        if list.len() < k {
            return Err(LexiconError::InsufficientCandidates {
                category,
                available: list.len(),
                required: k,
            });
        }
        let mut entries: Vec<&LexiconEntry> = list.iter().collect();
        entries.sort_by(|a, b| a.word.cmp(&b.word));
        pools.push(CategoryPool { category, entries });
    }
    if pools.is_empty() {
        return Err(LexiconError::InvalidParameter("no candidate categories".into()));
    }

    let total = pools
        .iter()
        .try_fold(1u128, |acc, p| acc.checked_mul(binomial(p.entries.len(), k)))
        .unwrap_or(u128::MAX);
    let sel = if total <= EXHAUSTIVE_LIMIT {
        exhaustive(&pools, k, tol)
    } else {
        hill_climb(&pools, k, tol)
    };

    let chosen: Vec<LexiconEntry> = pools
        .iter()
        .zip(&sel)
        .flat_map(|(p, idx)| idx.iter().map(|&i| p.entries[i].clone()))
        .collect();
    debug_assert!(pools.iter().all(|p| chosen.iter().any(|e| e.category == p.category)));
    StimulusSet::from_entries(chosen, tol)
}

const DEFAULT_LEXICON: &str = include_str!("../data/default_lexicon.tsv");
const DEFAULT_CORPUS: &str = include_str!("../data/default_corpus.tsv");
const NEUTRAL_POOL: &str = include_str!("../data/neutral_pool.tsv");

/// Built-in illustrative corpus covering the default lexicon and neutral pool.
pub fn default_corpus() -> FrequencyCorpus {
    parse_corpus("default", DEFAULT_CORPUS).expect("bundled corpus parses")
}

pub fn default_lexicon_rows() -> Vec<LexiconRow> {
    parse_lexicon(DEFAULT_LEXICON).expect("bundled lexicon parses")
}

/// Built-in 40-word stimulus set.
pub fn default_set() -> StimulusSet {
    StimulusSet::from_rows(&default_lexicon_rows(), &default_corpus(), Tolerances::default())
        .expect("bundled lexicon is a valid set")
}

/// Built-in neutral words for the calibration pre-block (disjoint from the default set).
pub fn default_neutral_pool() -> Vec<LexiconEntry> {
    let rows = parse_lexicon(NEUTRAL_POOL).expect("bundled pool parses");
    attach_frequencies(&rows, &default_corpus())
        .expect("bundled pool has frequencies")
        .into_values()
        .flatten()
        .collect()
}
