use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Category, SelectionPlan, StudyError};

/// Allowed lags (`second slot - first slot`) of a vigilance repeat.
pub const VIGILANCE_LAGS: [usize; 2] = [2, 3];
/// Smallest lag of a target repeat.
pub const MIN_TARGET_LAG: usize = 9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceSlot {
    pub video_id: String,
    pub category: Category,
    pub is_repeat: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentationSequence {
    pub slots: Vec<SequenceSlot>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub slot: usize,
    pub video_id: String,
    pub message: String,
}

/// Places one pair with `j - i` in `lags` on free slots, choosing the first
/// slot uniformly among those that admit a partner.
fn place_pair(free: &[bool], lags: impl Fn(usize) -> bool, rng: &mut ChaCha8Rng) -> Option<(usize, usize)> {
    let n = free.len();
    let partners = |i: usize| (i + 1..n).filter(|&j| free[j] && lags(j - i)).collect::<Vec<_>>();
    let mut starts: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
    starts.shuffle(rng);
    for i in starts {
        let js = partners(i);
        if !js.is_empty() {
            return Some((i, js[rng.random_range(0..js.len())]));
        }
    }
    None
}

fn attempt(plan: &SelectionPlan, rng: &mut ChaCha8Rng) -> Option<PresentationSequence> {
    let mut vigilance = plan.ids_in(Category::Vigilance);
    let mut targets = plan.ids_in(Category::Target);
    let mut fillers = plan.ids_in(Category::Filler);
    let n = 2 * (vigilance.len() + targets.len()) + fillers.len();
    let mut slots: Vec<Option<SequenceSlot>> = vec![None; n];
    let mut free = vec![true; n];
    vigilance.shuffle(rng);
    targets.shuffle(rng);
    fillers.shuffle(rng);

    // tightest constraint first
    let pairs = vigilance
        .into_iter()
        .map(|id| (id, Category::Vigilance))
        .chain(targets.into_iter().map(|id| (id, Category::Target)));
    for (id, category) in pairs {
        let (i, j) = match category {
            Category::Vigilance => place_pair(&free, |lag| VIGILANCE_LAGS.contains(&lag), rng)?,
            _ => place_pair(&free, |lag| lag >= MIN_TARGET_LAG, rng)?,
        };
        free[i] = false;
        free[j] = false;
        slots[i] = Some(SequenceSlot { video_id: id.to_string(), category, is_repeat: false });
        slots[j] = Some(SequenceSlot { video_id: id.to_string(), category, is_repeat: true });
    }
    let mut fill = fillers.into_iter();
    for s in slots.iter_mut().filter(|s| s.is_none()) {
        *s = Some(SequenceSlot { video_id: fill.next()?.to_string(), category: Category::Filler, is_repeat: false });
    }
    Some(PresentationSequence { slots: slots.into_iter().collect::<Option<Vec<_>>>()? })
}

/// Randomized constructive placement: vigilance pairs, then target pairs,
/// on free slots, fillers in the rest; a dead end restarts the attempt.
pub fn generate_sequence(plan: &SelectionPlan, seed: u64, max_attempts: usize) -> Result<PresentationSequence, StudyError> {
    if let Some(v) = plan.videos.iter().find(|v| v.category.is_none()) {
        return Err(StudyError::InvalidPlan(format!("video {} has no category", v.video_id)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..max_attempts {
        if let Some(seq) = attempt(plan, &mut rng) {
            debug_assert!(validate_sequence(&seq).is_empty());
            return Ok(seq);
        }
    }
    Err(StudyError::ConstraintUnsatisfiable(max_attempts))
}

/// Every broken constraint of a sequence, by slot.
pub fn validate_sequence(seq: &PresentationSequence) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut category: BTreeMap<&str, Category> = BTreeMap::new();
    for (i, s) in seq.slots.iter().enumerate() {
        seen.entry(&s.video_id).or_default().push(i);
        match category.get(s.video_id.as_str()) {
            Some(&c) if c != s.category => out.push(Violation {
                slot: i,
                video_id: s.video_id.clone(),
                message: format!("category {:?} differs from earlier {:?}", s.category, c),
            }),
            _ => {
                category.insert(&s.video_id, s.category);
            }
        }
    }
    for (id, at) in &seen {
        let cat = category[id];
        let mut v = |slot: usize, message: String| out.push(Violation { slot, video_id: id.to_string(), message });
        for (k, &slot) in at.iter().enumerate() {
            if seq.slots[slot].is_repeat != (k > 0) {
                v(slot, format!("repeat flag {} on showing {}", seq.slots[slot].is_repeat, k + 1));
            }
        }
        let shows = if cat == Category::Filler { 1 } else { 2 };
        if at.len() != shows {
            v(at[shows.min(at.len() - 1)], format!("{cat:?} shown {} times, expected {shows}", at.len()));
            continue;
        }
        if shows == 2 {
            let lag = at[1] - at[0];
            match cat {
                Category::Vigilance if !VIGILANCE_LAGS.contains(&lag) => v(at[1], format!("vigilance repeat at lag {lag}")),
                Category::Target if lag < MIN_TARGET_LAG => v(at[1], format!("target repeat at lag {lag}")),
                _ => {}
            }
        }
    }
    out.sort_by(|a, b| a.slot.cmp(&b.slot).then(a.video_id.cmp(&b.video_id)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::study::PlannedVideo;

    fn plan(t: usize, v: usize, f: usize) -> SelectionPlan {
        let mk = |prefix: &'static str, n: usize, c: Category| {
            (0..n).map(move |i| PlannedVideo { video_id: format!("{prefix}{i}"), cluster: 0, bin: 0, category: Some(c) })
        };
        SelectionPlan {
            videos: mk("t", t, Category::Target).chain(mk("v", v, Category::Vigilance)).chain(mk("f", f, Category::Filler)).collect(),
        }
    }

    #[test]
    fn study_plan_sequences_validate() {
        let p = plan(20, 40, 80);
        for seed in 0..50 {
            let s = generate_sequence(&p, seed, 10_000).unwrap();
            assert_eq!(s.slots.len(), 200);
            assert_eq!(validate_sequence(&s), vec![]);
        }
        assert_eq!(generate_sequence(&p, 3, 10_000), generate_sequence(&p, 3, 10_000));
    }

    fn permutations(items: Vec<usize>) -> Vec<Vec<usize>> {
        if items.len() <= 1 {
            return vec![items];
        }
        let mut out = Vec::new();
        for i in 0..items.len() {
            let mut rest = items.clone();
            let x = rest.remove(i);
            for mut p in permutations(rest) {
                p.insert(0, x);
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn degenerate_plan_only_emits_valid_orders() {
        // one vigilance pair and two fillers fill four slots
        let p = plan(0, 1, 2);
        let tokens = ["v0", "v0", "f0", "f1"];
        let mut valid = std::collections::BTreeSet::new();
        for perm in permutations(vec![0, 1, 2, 3]) {
            let ids: Vec<&str> = perm.iter().map(|&k| tokens[k]).collect();
            let first = ids.iter().position(|&x| x == "v0").unwrap();
            let slots = ids
                .iter()
                .enumerate()
                .map(|(i, &id)| SequenceSlot {
                    video_id: id.to_string(),
                    category: if id == "v0" { Category::Vigilance } else { Category::Filler },
                    is_repeat: id == "v0" && i != first,
                })
                .collect();
            let seq = PresentationSequence { slots };
            if validate_sequence(&seq).is_empty() {
                valid.insert(ids.join(","));
            }
        }
        // v0 at (0, 2), (1, 3) or (0, 3), each with two filler orders
        assert_eq!(valid.len(), 6);
        let mut emitted = std::collections::BTreeSet::new();
        for seed in 0..200 {
            let s = generate_sequence(&p, seed, 100).unwrap();
            let key: Vec<&str> = s.slots.iter().map(|x| x.video_id.as_str()).collect();
            assert!(valid.contains(&key.join(",")));
            emitted.insert(key.join(","));
        }
        assert_eq!(emitted, valid);
    }

    #[test]
    fn impossible_plan_gives_up() {
        // a lone vigilance pair fits only at lag 1
        assert_eq!(generate_sequence(&plan(0, 1, 0), 0, 50), Err(StudyError::ConstraintUnsatisfiable(50)));
        // a target pair needs ten slots
        assert_eq!(generate_sequence(&plan(1, 0, 7), 0, 50), Err(StudyError::ConstraintUnsatisfiable(50)));
    }

    #[test]
    fn validator_reports_bad_lags_and_repeated_fillers() {
        let p = plan(1, 0, 8);
        let mut s = generate_sequence(&p, 1, 100).unwrap();
        assert!(validate_sequence(&s).is_empty());
        // move the target repeat to lag 5 by swapping with a filler
        let first = s.slots.iter().position(|x| x.video_id == "t0").unwrap();
        let second = s.slots.iter().rposition(|x| x.video_id == "t0").unwrap();
        s.slots.swap(second, first + 5);
        let v = validate_sequence(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].slot, first + 5);
        assert!(v[0].message.contains("lag 5"));

        let mut s = generate_sequence(&p, 2, 100).unwrap();
        let f = s.slots.iter().position(|x| x.category == Category::Filler).unwrap();
        let other = s.slots.iter().rposition(|x| x.category == Category::Filler).unwrap();
        s.slots[other] = SequenceSlot { is_repeat: true, ..s.slots[f].clone() };
        let v = validate_sequence(&s);
        assert!(v.iter().any(|x| x.message.contains("shown 2 times")));
    }
}
