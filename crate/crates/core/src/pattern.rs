//! Disruptiveness pattern mining.
//!
//! Interrupted-task records of a single task type are discretized into an
//! item alphabet of characteristics (`initiator=self`, `time_of_day=morning`,
//! ...) and disruptiveness levels (`D3=high`, ...). A level-wise Apriori pass
//! then finds every *mixed* item set, one holding at least one item from each
//! side, whose support reaches `min_support`. Single-sided sets such as
//! `{D1=high, D3=high}` are never candidates beyond the seeding level. Each
//! frequent mixed set `S` yields the rule `chars(S) => levels(S)` with
//! confidence `support(S) / support(chars(S))`.
//!
//! Supports and confidences are exact fractions of record counts.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::items::{CharacteristicItem, DisruptivenessItem, Item, Level, Measure};
use crate::ratio::{self, fraction, Fraction, Threshold};
use crate::task::TaskType;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MiningError {
    #[error("no records to mine")]
    EmptyInput,
    #[error("no records for task type {0}")]
    NoRecords(TaskType),
    #[error("threshold for {0} is not finite")]
    InvalidThreshold(Measure),
    #[error("record has more than one value for {0}")]
    DuplicateKey(String),
    #[error("invalid rule: {0}")]
    InvalidRule(&'static str),
}

/// Anything that belongs to one task type.
pub trait TaskTyped {
    fn task_type(&self) -> TaskType;
}

/// One interruption episode before discretization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub task_type: TaskType,
    pub characteristics: BTreeSet<CharacteristicItem>,
    /// D1, task fragments.
    pub fragments: Option<u32>,
    /// D2, seconds.
    pub resumption_lag: Option<f64>,
    /// D3, seconds.
    pub interruption_lag: Option<f64>,
}

impl RawRecord {
    pub fn measure(&self, m: Measure) -> Option<f64> {
        match m {
            Measure::D1 => self.fragments.map(f64::from),
            Measure::D2 => self.resumption_lag,
            Measure::D3 => self.interruption_lag,
        }
    }
}

impl TaskTyped for RawRecord {
    fn task_type(&self) -> TaskType {
        self.task_type
    }
}

/// A row of the task-characteristics matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "MiningRecordWire", into = "MiningRecordWire")]
pub struct MiningRecord {
    task_type: TaskType,
    characteristics: BTreeSet<CharacteristicItem>,
    disruptiveness: BTreeSet<DisruptivenessItem>,
}

#[derive(Serialize, Deserialize)]
struct MiningRecordWire {
    task_type: TaskType,
    characteristics: BTreeSet<CharacteristicItem>,
    disruptiveness: BTreeSet<DisruptivenessItem>,
}

impl TryFrom<MiningRecordWire> for MiningRecord {
    type Error = MiningError;

    fn try_from(w: MiningRecordWire) -> Result<Self, Self::Error> {
        MiningRecord::new(w.task_type, w.characteristics, w.disruptiveness)
    }
}

impl From<MiningRecord> for MiningRecordWire {
    fn from(r: MiningRecord) -> Self {
        MiningRecordWire {
            task_type: r.task_type,
            characteristics: r.characteristics,
            disruptiveness: r.disruptiveness,
        }
    }
}

impl MiningRecord {
    pub fn new(
        task_type: TaskType,
        characteristics: impl IntoIterator<Item = CharacteristicItem>,
        disruptiveness: impl IntoIterator<Item = DisruptivenessItem>,
    ) -> Result<Self, MiningError> {
        let characteristics: BTreeSet<_> = characteristics.into_iter().collect();
        let disruptiveness: BTreeSet<_> = disruptiveness.into_iter().collect();
        let mut keys = HashSet::new();
        for c in &characteristics {
            if !keys.insert(c.key()) {
                return Err(MiningError::DuplicateKey(c.key().to_string()));
            }
        }
        let mut measures = HashSet::new();
        for d in &disruptiveness {
            if !measures.insert(d.measure) {
                return Err(MiningError::DuplicateKey(d.measure.to_string()));
            }
        }
        Ok(MiningRecord {
            task_type,
            characteristics,
            disruptiveness,
        })
    }

    pub fn characteristics(&self) -> &BTreeSet<CharacteristicItem> {
        &self.characteristics
    }

    pub fn disruptiveness(&self) -> &BTreeSet<DisruptivenessItem> {
        &self.disruptiveness
    }

    pub fn items(&self) -> impl Iterator<Item = Item> + '_ {
        self.characteristics
            .iter()
            .map(|&c| Item::from(c))
            .chain(self.disruptiveness.iter().map(|&d| Item::from(d)))
    }

    pub fn contains(&self, item: &Item) -> bool {
        match item {
            Item::Characteristic(c) => self.characteristics.contains(c),
            Item::Disruptiveness(d) => self.disruptiveness.contains(d),
        }
    }
}

impl TaskTyped for MiningRecord {
    fn task_type(&self) -> TaskType {
        self.task_type
    }
}

/// How one measure is split into low/high. Values strictly above the
/// threshold are high.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMode {
    /// Threshold is the median of the observed values.
    Median,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discretization {
    pub d1: ThresholdMode,
    pub d2: ThresholdMode,
    pub d3: ThresholdMode,
}

impl Default for Discretization {
    fn default() -> Self {
        Discretization::median()
    }
}

impl Discretization {
    pub fn median() -> Self {
        Discretization {
            d1: ThresholdMode::Median,
            d2: ThresholdMode::Median,
            d3: ThresholdMode::Median,
        }
    }

    pub fn fixed(d1: f64, d2: f64, d3: f64) -> Self {
        Discretization {
            d1: ThresholdMode::Fixed(d1),
            d2: ThresholdMode::Fixed(d2),
            d3: ThresholdMode::Fixed(d3),
        }
    }

    pub fn mode(&self, m: Measure) -> ThresholdMode {
        match m {
            Measure::D1 => self.d1,
            Measure::D2 => self.d2,
            Measure::D3 => self.d3,
        }
    }
}

impl fmt::Display for Discretization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = Measure::ALL
            .iter()
            .map(|&m| match self.mode(m) {
                ThresholdMode::Median => "median".to_string(),
                ThresholdMode::Fixed(v) => v.to_string(),
            })
            .collect();
        if parts.iter().all(|p| p == "median") {
            f.write_str("median")
        } else {
            write!(f, "fixed:{}", parts.join(","))
        }
    }
}

/// Parses `median` or `fixed:<d1>,<d2>,<d3>` where any entry may itself be `median`.
impl FromStr for Discretization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "median" {
            return Ok(Discretization::median());
        }
        let rest = s
            .strip_prefix("fixed:")
            .ok_or_else(|| format!("unknown discretization `{s}`"))?;
        let modes = rest
            .split(',')
            .map(|p| match p.trim() {
                "median" => Ok(ThresholdMode::Median),
                v => match v.parse::<f64>() {
                    Ok(x) if x.is_finite() => Ok(ThresholdMode::Fixed(x)),
                    _ => Err(format!("bad threshold `{v}`")),
                },
            })
            .collect::<Result<Vec<_>, _>>()?;
        match modes[..] {
            [d1, d2, d3] => Ok(Discretization { d1, d2, d3 }),
            _ => Err("fixed discretization needs three thresholds".to_string()),
        }
    }
}

impl Serialize for Discretization {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Discretization {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Median of `values`: middle element, or mean of the two middle elements.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Resolved thresholds per measure; `None` where no record carries the measure.
pub fn resolve_thresholds(
    records: &[RawRecord],
    disc: &Discretization,
) -> Result<BTreeMap<Measure, f64>, MiningError> {
    let mut out = BTreeMap::new();
    for &m in Measure::ALL {
        let t = match disc.mode(m) {
            ThresholdMode::Fixed(t) => Some(t),
            ThresholdMode::Median => {
                let values: Vec<f64> = records.iter().filter_map(|r| r.measure(m)).collect();
                median(&values)
            }
        };
        if let Some(t) = t {
            if !t.is_finite() {
                return Err(MiningError::InvalidThreshold(m));
            }
            out.insert(m, t);
        }
    }
    Ok(out)
}

/// Maps every present measure to `low` or `high`.
pub fn discretize(
    records: &[RawRecord],
    disc: &Discretization,
) -> Result<Vec<MiningRecord>, MiningError> {
    if records.is_empty() {
        return Err(MiningError::EmptyInput);
    }
    let thresholds = resolve_thresholds(records, disc)?;
    records
        .iter()
        .map(|r| {
            let levels = Measure::ALL.iter().filter_map(|&m| {
                let v = r.measure(m)?;
                let t = thresholds[&m];
                let level = if v > t { Level::High } else { Level::Low };
                Some(DisruptivenessItem::new(m, level))
            });
            MiningRecord::new(r.task_type, r.characteristics.iter().copied(), levels)
        })
        .collect()
}

pub fn filter_by_type<R: TaskTyped + Clone>(records: &[R], task_type: TaskType) -> Vec<R> {
    records
        .iter()
        .filter(|r| r.task_type() == task_type)
        .cloned()
        .collect()
}

/// Fraction of records containing every item of `itemset`.
pub fn support(itemset: &[Item], records: &[MiningRecord]) -> Result<Fraction, MiningError> {
    if records.is_empty() {
        return Err(MiningError::EmptyInput);
    }
    let count = records
        .iter()
        .filter(|r| itemset.iter().all(|i| r.contains(i)))
        .count();
    Ok(fraction(count as u64, records.len() as u64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiningParams {
    pub task_type: TaskType,
    pub min_support: Threshold,
    pub min_confidence: Threshold,
    pub discretization: Discretization,
}

impl MiningParams {
    pub fn new(task_type: TaskType, min_support: Threshold, min_confidence: Threshold) -> Self {
        MiningParams {
            task_type,
            min_support,
            min_confidence,
            discretization: Discretization::default(),
        }
    }

    pub fn with_discretization(mut self, disc: Discretization) -> Self {
        self.discretization = disc;
        self
    }
}

/// A frequent mixed item set with its record count.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrequentSet {
    /// Sorted, characteristics first.
    pub items: Vec<Item>,
    pub count: u64,
    #[serde(with = "ratio::exact")]
    pub support: Fraction,
}

/// Bitset of record indices.
#[derive(Debug, Clone, PartialEq, Eq)]
struct TidSet(Vec<u64>);

impl TidSet {
    fn empty(n: usize) -> Self {
        TidSet(vec![0; n.div_ceil(64)])
    }

    fn full(n: usize) -> Self {
        let mut s = TidSet::empty(n);
        for i in 0..n {
            s.insert(i);
        }
        s
    }

    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn intersect(&self, other: &TidSet) -> TidSet {
        TidSet(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    fn len(&self) -> u64 {
        self.0.iter().map(|w| u64::from(w.count_ones())).sum()
    }
}

/// Vertical index: item alphabet and one tid-set per item.
struct Index {
    items: Vec<Item>,
    tids: Vec<TidSet>,
    n: usize,
}

impl Index {
    fn build(records: &[MiningRecord]) -> Self {
        let alphabet: BTreeSet<Item> = records.iter().flat_map(|r| r.items()).collect();
        let items: Vec<Item> = alphabet.into_iter().collect();
        let n = records.len();
        let mut tids = vec![TidSet::empty(n); items.len()];
        for (row, r) in records.iter().enumerate() {
            for item in r.items() {
                let id = items.binary_search(&item).expect("item in alphabet");
                tids[id].insert(row);
            }
        }
        Index { items, tids, n }
    }

    fn id(&self, item: &Item) -> Option<usize> {
        self.items.binary_search(item).ok()
    }

    fn tidset(&self, ids: &[usize]) -> TidSet {
        ids.iter()
            .fold(TidSet::full(self.n), |acc, &id| acc.intersect(&self.tids[id]))
    }

    /// Records containing every item; zero if some item never occurs.
    fn count(&self, items: &[Item]) -> u64 {
        let ids: Option<Vec<usize>> = items.iter().map(|i| self.id(i)).collect();
        ids.map_or(0, |ids| self.tidset(&ids).len())
    }

    fn is_mixed(&self, ids: &[usize]) -> bool {
        let chars = ids.iter().filter(|&&i| self.items[i].is_characteristic()).count();
        chars > 0 && chars < ids.len()
    }
}

/// Level-wise Apriori restricted to mixed item sets.
///
/// `records` must already be filtered to `params.task_type`. Output is sorted
/// by set size and then by items.
pub fn mine_frequent(records: &[MiningRecord], params: &MiningParams) -> Vec<FrequentSet> {
    let n = records.len() as u64;
    if n == 0 {
        return Vec::new();
    }
    let index = Index::build(records);
    let min = params.min_support;

    // Seeding level: single items are counted but never emitted.
    let singles: Vec<usize> = (0..index.items.len())
        .filter(|&i| min.admits(index.tids[i].len(), n))
        .collect();
    let (chars, levels): (Vec<usize>, Vec<usize>) = singles
        .iter()
        .partition(|&&i| index.items[i].is_characteristic());

    let mut out = Vec::new();
    let mut level: Vec<(Vec<usize>, TidSet)> = Vec::new();
    for &c in &chars {
        for &d in &levels {
            let tids = index.tids[c].intersect(&index.tids[d]);
            if min.admits(tids.len(), n) {
                level.push((vec![c, d], tids));
            }
        }
    }

    while !level.is_empty() {
        level.sort_by(|a, b| a.0.cmp(&b.0));
        for (ids, tids) in &level {
            let count = tids.len();
            out.push(FrequentSet {
                items: ids.iter().map(|&i| index.items[i]).collect(),
                count,
                support: fraction(count, n),
            });
        }
        level = next_level(&index, &level, min, n);
    }
    out
}

/// Joins pairs of frequent mixed k-sets that differ in one item, keeps
/// mixed (k+1)-candidates whose mixed k-subsets are all frequent, and counts them.
fn next_level(
    index: &Index,
    level: &[(Vec<usize>, TidSet)],
    min: Threshold,
    n: u64,
) -> Vec<(Vec<usize>, TidSet)> {
    let k = match level.first() {
        Some((ids, _)) => ids.len(),
        None => return Vec::new(),
    };
    let known: HashSet<&[usize]> = level.iter().map(|(ids, _)| ids.as_slice()).collect();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut next = Vec::new();
    for (i, (a, ta)) in level.iter().enumerate() {
        for (b, tb) in &level[i + 1..] {
            let union: Vec<usize> = a
                .iter()
                .chain(b.iter())
                .copied()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            if union.len() != k + 1 || !index.is_mixed(&union) || seen.contains(&union) {
                continue;
            }
            let closed = (0..union.len()).all(|skip| {
                let sub: Vec<usize> = union
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != skip)
                    .map(|(_, &v)| v)
                    .collect();
                !index.is_mixed(&sub) || known.contains(sub.as_slice())
            });
            if !closed {
                seen.insert(union);
                continue;
            }
            let tids = ta.intersect(tb);
            if min.admits(tids.len(), n) {
                next.push((union.clone(), tids));
            }
            seen.insert(union);
        }
    }
    next
}

/// A mined rule `antecedent => consequent` for one task type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RuleWire", into = "RuleWire")]
pub struct AssociationRule {
    task_type: TaskType,
    antecedent: Vec<CharacteristicItem>,
    consequent: Vec<DisruptivenessItem>,
    support: Fraction,
    confidence: Fraction,
}

impl AssociationRule {
    pub fn new(
        task_type: TaskType,
        antecedent: impl IntoIterator<Item = CharacteristicItem>,
        consequent: impl IntoIterator<Item = DisruptivenessItem>,
        support: Fraction,
        confidence: Fraction,
    ) -> Result<Self, MiningError> {
        let antecedent: Vec<_> = antecedent.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let consequent: Vec<_> = consequent.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        if antecedent.is_empty() {
            return Err(MiningError::InvalidRule("empty antecedent"));
        }
        if consequent.is_empty() {
            return Err(MiningError::InvalidRule("empty consequent"));
        }
        // Records hold one value per key and per measure, so no rule can hold two.
        if antecedent.windows(2).any(|w| w[0].key() == w[1].key()) {
            return Err(MiningError::InvalidRule("two values for one characteristic"));
        }
        if consequent.windows(2).any(|w| w[0].measure == w[1].measure) {
            return Err(MiningError::InvalidRule("two levels for one measure"));
        }
        let one = Fraction::from_integer(1);
        if support > one || confidence > one {
            return Err(MiningError::InvalidRule("support and confidence must lie in [0, 1]"));
        }
        if confidence < support {
            return Err(MiningError::InvalidRule("confidence below support"));
        }
        Ok(AssociationRule {
            task_type,
            antecedent,
            consequent,
            support,
            confidence,
        })
    }

    pub fn task_type(&self) -> TaskType {
        self.task_type
    }

    pub fn antecedent(&self) -> &[CharacteristicItem] {
        &self.antecedent
    }

    pub fn consequent(&self) -> &[DisruptivenessItem] {
        &self.consequent
    }

    pub fn support(&self) -> Fraction {
        self.support
    }

    pub fn confidence(&self) -> Fraction {
        self.confidence
    }

    /// Antecedent and consequent as one sorted item set.
    pub fn items(&self) -> Vec<Item> {
        self.antecedent
            .iter()
            .map(|&c| Item::from(c))
            .chain(self.consequent.iter().map(|&d| Item::from(d)))
            .collect()
    }

    /// Output order: confidence desc, support desc, then antecedent and consequent ascending.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .confidence
            .cmp(&self.confidence)
            .then_with(|| other.support.cmp(&self.support))
            .then_with(|| self.antecedent.cmp(&other.antecedent))
            .then_with(|| self.consequent.cmp(&other.consequent))
    }
}

impl fmt::Display for AssociationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |items: Vec<String>| items.join(", ");
        write!(
            f,
            "[{}] {{{}}} => {{{}}} (support {}, confidence {})",
            self.task_type,
            join(self.antecedent.iter().map(ToString::to_string).collect()),
            join(self.consequent.iter().map(ToString::to_string).collect()),
            ratio::format_exact(self.support),
            ratio::format_exact(self.confidence),
        )
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleWire {
    task_type: TaskType,
    antecedent: Vec<CharacteristicItem>,
    consequent: Vec<DisruptivenessItem>,
    support: f64,
    support_exact: String,
    confidence: f64,
    confidence_exact: String,
}

impl From<AssociationRule> for RuleWire {
    fn from(r: AssociationRule) -> Self {
        RuleWire {
            task_type: r.task_type,
            antecedent: r.antecedent,
            consequent: r.consequent,
            support: ratio::to_f64(r.support),
            support_exact: ratio::format_exact(r.support),
            confidence: ratio::to_f64(r.confidence),
            confidence_exact: ratio::format_exact(r.confidence),
        }
    }
}

impl TryFrom<RuleWire> for AssociationRule {
    type Error = String;

    fn try_from(w: RuleWire) -> Result<Self, Self::Error> {
        let support = ratio::parse_exact(&w.support_exact).map_err(|e| e.to_string())?;
        let confidence = ratio::parse_exact(&w.confidence_exact).map_err(|e| e.to_string())?;
        AssociationRule::new(w.task_type, w.antecedent, w.consequent, support, confidence)
            .map_err(|e| e.to_string())
    }
}

/// Turns frequent mixed sets into rules whose confidence reaches `min_confidence`.
pub fn derive_rules(
    frequent: &[FrequentSet],
    records: &[MiningRecord],
    params: &MiningParams,
) -> Vec<AssociationRule> {
    let n = records.len() as u64;
    if n == 0 {
        return Vec::new();
    }
    let index = Index::build(records);
    let mut rules: Vec<AssociationRule> = frequent
        .iter()
        .filter_map(|set| {
            let (z, y): (Vec<Item>, Vec<Item>) =
                set.items.iter().partition(|i| i.is_characteristic());
            let z_count = index.count(&z);
            let s_count = index.count(&set.items);
            if z.is_empty() || y.is_empty() || z_count == 0 {
                return None;
            }
            if !params.min_confidence.admits(s_count, z_count) {
                return None;
            }
            let antecedent = z.into_iter().filter_map(|i| match i {
                Item::Characteristic(c) => Some(c),
                Item::Disruptiveness(_) => None,
            });
            let consequent = y.into_iter().filter_map(|i| match i {
                Item::Disruptiveness(d) => Some(d),
                Item::Characteristic(_) => None,
            });
            AssociationRule::new(
                params.task_type,
                antecedent,
                consequent,
                fraction(s_count, n),
                fraction(s_count, z_count),
            )
            .ok()
        })
        .collect();
    rules.sort_by(AssociationRule::rank_cmp);
    rules
}

/// Filter by type, discretize, mine frequent mixed sets and derive strong rules.
pub fn mine(records: &[RawRecord], params: &MiningParams) -> Result<Vec<AssociationRule>, MiningError> {
    let typed = filter_by_type(records, params.task_type);
    if typed.is_empty() {
        return Err(MiningError::NoRecords(params.task_type));
    }
    let discrete = discretize(&typed, &params.discretization)?;
    let frequent = mine_frequent(&discrete, params);
    Ok(derive_rules(&frequent, &discrete, params))
}

/// Rules whose item set is not strictly contained in another rule's item set.
pub fn maximal_rules(rules: &[AssociationRule]) -> Vec<&AssociationRule> {
    let sets: Vec<BTreeSet<Item>> = rules.iter().map(|r| r.items().into_iter().collect()).collect();
    rules
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            !sets
                .iter()
                .enumerate()
                .any(|(j, s)| j != *i && s.len() > sets[*i].len() && sets[*i].is_subset(s))
        })
        .map(|(_, r)| r)
        .collect()
}
