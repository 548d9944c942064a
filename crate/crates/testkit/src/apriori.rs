//! Exhaustive frequent-set and rule enumeration over a small item universe.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::Rng;
use switchlens_core::items::{CharacteristicItem, CharacteristicKey, DisruptivenessItem, Item, Level, Measure};
use switchlens_core::pattern::MiningRecord;
use switchlens_core::TaskType;

/// `(items, count, support)` for one frequent set.
pub type OracleSet = (BTreeSet<Item>, u64, Ratio<u64>);

/// `(antecedent, consequent, support, confidence)`.
pub type OracleRule = (
    BTreeSet<CharacteristicItem>,
    BTreeSet<DisruptivenessItem>,
    Ratio<u64>,
    Ratio<u64>,
);

fn count(records: &[MiningRecord], set: &BTreeSet<Item>) -> u64 {
    records
        .iter()
        .filter(|r| set.iter().all(|i| r.items().any(|x| x == *i)))
        .count() as u64
}

fn is_mixed(set: &BTreeSet<Item>) -> bool {
    set.iter().any(Item::is_characteristic) && set.iter().any(|i| !i.is_characteristic())
}

/// Every item occurring in some record.
pub fn universe(records: &[MiningRecord]) -> Vec<Item> {
    let set: BTreeSet<Item> = records.iter().flat_map(|r| r.items().collect::<Vec<_>>()).collect();
    set.into_iter().collect()
}

/// All mixed sets of size >= 2 whose support is at least `min_support`.
pub fn frequent_sets(records: &[MiningRecord], min_support: Ratio<u64>) -> BTreeMap<BTreeSet<Item>, (u64, Ratio<u64>)> {
    let n = records.len() as u64;
    let items = universe(records);
    assert!(items.len() <= 16, "oracle universe too large");
    let mut out = BTreeMap::new();
    if n == 0 {
        return out;
    }
    for mask in 1u32..(1 << items.len()) {
        let set: BTreeSet<Item> = (0..items.len())
            .filter(|b| mask & (1 << b) != 0)
            .map(|b| items[b])
            .collect();
        if set.len() < 2 || !is_mixed(&set) {
            continue;
        }
        let c = count(records, &set);
        let s = Ratio::new(c, n);
        if c > 0 && s >= min_support {
            out.insert(set, (c, s));
        }
    }
    out
}

/// Rules `chars(S) => levels(S)` of every frequent set with confidence at least `min_confidence`.
pub fn rules(records: &[MiningRecord], min_support: Ratio<u64>, min_confidence: Ratio<u64>) -> BTreeSet<OracleRule> {
    let n = records.len() as u64;
    let mut out = BTreeSet::new();
    for (set, (c, _)) in frequent_sets(records, min_support) {
        let z: BTreeSet<Item> = set.iter().copied().filter(Item::is_characteristic).collect();
        let zc = count(records, &z);
        let conf = Ratio::new(c, zc);
        if conf < min_confidence {
            continue;
        }
        let ante = set
            .iter()
            .filter_map(|i| match i {
                Item::Characteristic(c) => Some(*c),
                Item::Disruptiveness(_) => None,
            })
            .collect();
        let cons = set
            .iter()
            .filter_map(|i| match i {
                Item::Disruptiveness(d) => Some(*d),
                Item::Characteristic(_) => None,
            })
            .collect();
        out.insert((ante, cons, Ratio::new(c, n), conf));
    }
    out
}

/// A random record set over at most `max_items` distinct items and `max_records` rows.
///
/// Items are grouped by key so every row holds at most one value per key.
pub fn random_records<R: Rng>(rng: &mut R, max_records: usize, max_items: usize) -> Vec<MiningRecord> {
    let mut groups: Vec<Vec<Item>> = Vec::new();
    let mut keys: Vec<CharacteristicKey> = CharacteristicKey::ALL.to_vec();
    keys.shuffle(rng);
    let mut measures: Vec<Measure> = Measure::ALL.to_vec();
    measures.shuffle(rng);
    let mut budget = rng.gen_range(2..=max_items);
    // At least one item from each side so mixed sets are possible.
    let mut side = 0;
    while budget > 0 {
        let take_char = side % 2 == 0 || measures.is_empty();
        side += 1;
        if take_char {
            let Some(key) = keys.pop() else { break };
            let mut values: Vec<&str> = key.vocabulary().to_vec();
            values.shuffle(rng);
            let k = rng.gen_range(1..=values.len().min(2).min(budget));
            groups.push(
                values[..k]
                    .iter()
                    .map(|v| Item::from(CharacteristicItem::new(key, v).unwrap()))
                    .collect(),
            );
            budget -= k;
        } else {
            let m = measures.pop().unwrap();
            let k = rng.gen_range(1..=2usize.min(budget));
            let mut levels = vec![Level::Low, Level::High];
            levels.shuffle(rng);
            groups.push(
                levels[..k]
                    .iter()
                    .map(|&l| Item::from(DisruptivenessItem::new(m, l)))
                    .collect(),
            );
            budget -= k;
        }
    }
    let n = rng.gen_range(1..=max_records);
    (0..n)
        .map(|_| {
            let mut chars = Vec::new();
            let mut levels = Vec::new();
            for g in &groups {
                if rng.gen_bool(0.25) {
                    continue;
                }
                match *g.choose(rng).unwrap() {
                    Item::Characteristic(c) => chars.push(c),
                    Item::Disruptiveness(d) => levels.push(d),
                }
            }
            MiningRecord::new(TaskType::Modeling, chars, levels).unwrap()
        })
        .collect()
}

/// A random threshold `num / den` in (0, 1] with a small denominator.
pub fn random_threshold<R: Rng>(rng: &mut R) -> Ratio<u64> {
    let den = rng.gen_range(1..=10u64);
    let num = rng.gen_range(1..=den);
    Ratio::new(num, den)
}
