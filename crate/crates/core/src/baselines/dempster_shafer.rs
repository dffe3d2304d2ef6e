//! Two-level Dempster-Shafer combination baseline.
//!
//! Level one classifies the object's metal content; the chosen level is then
//! analyzed at level two to separate mine from friendly. Mass functions live
//! on small frames encoded as bitmask subsets.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::types::TypeDistribution;

/// Normalizer below this is treated as total conflict.
const CONFLICT_TOLERANCE: f64 = 1e-12;

/// A basic belief assignment over subsets of a frame of discernment.
///
/// Subsets are bitmasks over frame elements 0..frame_size; the empty set
/// never carries mass.
#[derive(Debug, Clone, PartialEq)]
pub struct MassFunction {
    frame_size: usize,
    masses: BTreeMap<u32, f64>,
}

impl MassFunction {
    pub fn new(frame_size: usize, masses: BTreeMap<u32, f64>) -> Result<Self> {
        if frame_size == 0 || frame_size > 31 {
            return Err(Error::Argument(format!(
                "frame size {frame_size} outside 1..=31"
            )));
        }
        let full = (1u32 << frame_size) - 1;
        let mut sum = 0.0;
        for (&subset, &mass) in &masses {
            if subset == 0 {
                return Err(Error::Argument("empty set cannot carry mass".into()));
            }
            if subset > full {
                return Err(Error::Argument(format!(
                    "subset {subset:#b} outside frame of {frame_size} elements"
                )));
            }
            if !(0.0..=1.0 + 1e-12).contains(&mass) {
                return Err(Error::Argument(format!(
                    "mass {mass} outside [0, 1]"
                )));
            }
            sum += mass;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!(
                "masses sum to {sum}, expected 1"
            )));
        }
        Ok(Self { frame_size, masses })
    }

    /// Total ignorance: all mass on the full frame.
    pub fn vacuous(frame_size: usize) -> Self {
        let full = (1u32 << frame_size) - 1;
        Self {
            frame_size,
            masses: BTreeMap::from([(full, 1.0)]),
        }
    }

    pub fn frame_size(&self) -> usize {
        self.frame_size
    }

    pub fn mass(&self, subset: u32) -> f64 {
        self.masses.get(&subset).copied().unwrap_or(0.0)
    }

    /// Mass on the singleton {element}.
    pub fn singleton(&self, element: usize) -> f64 {
        self.mass(1u32 << element)
    }

    pub fn is_vacuous(&self) -> bool {
        let full = (1u32 << self.frame_size) - 1;
        self.masses.len() == 1 && (self.mass(full) - 1.0).abs() <= 1e-12
    }

    /// Dempster's rule of combination: normalized conjunctive pooling with
    /// the conflict mass renormalized away.
    pub fn combine(&self, other: &MassFunction) -> Result<MassFunction> {
        if self.frame_size != other.frame_size {
            return Err(Error::Argument(format!(
                "frame sizes differ: {} vs {}",
                self.frame_size, other.frame_size
            )));
        }
        let mut combined: BTreeMap<u32, f64> = BTreeMap::new();
        let mut agreement = 0.0;
        for (&a, &ma) in &self.masses {
            for (&b, &mb) in &other.masses {
                let c = a & b;
                let w = ma * mb;
                if c == 0 {
                    continue;
                }
                agreement += w;
                *combined.entry(c).or_insert(0.0) += w;
            }
        }
        if agreement <= CONFLICT_TOLERANCE {
            return Err(Error::TotalConflict);
        }
        for mass in combined.values_mut() {
            *mass /= agreement;
        }
        MassFunction::new(self.frame_size, combined)
    }

    /// Pignistic probability: each subset's mass split uniformly over its
    /// elements.
    pub fn pignistic(&self) -> Result<TypeDistribution> {
        let mut probs = vec![0.0f64; self.frame_size];
        for (&subset, &mass) in &self.masses {
            let card = subset.count_ones() as f64;
            for (e, slot) in probs.iter_mut().enumerate() {
                if subset & (1u32 << e) != 0 {
                    *slot += mass / card;
                }
            }
        }
        TypeDistribution::normalize(&probs)
    }
}

/// Dempster's rule as a free function.
pub fn ds_combine(m1: &MassFunction, m2: &MassFunction) -> Result<MassFunction> {
    m1.combine(m2)
}

fn fold_combine(frame_size: usize, masses: &[MassFunction]) -> Result<MassFunction> {
    let mut acc = MassFunction::vacuous(frame_size);
    for m in masses {
        acc = acc.combine(m)?;
    }
    Ok(acc)
}

/// Maps a binary {mine, friendly} mass function onto the m-type frame:
/// mine stays a singleton at type 0, friendly becomes the composite of all
/// non-mine types, and binary ignorance becomes full ignorance.
fn embed_binary_mass(mass: &MassFunction, m: usize) -> Result<MassFunction> {
    if mass.frame_size() != 2 {
        return Err(Error::Argument(format!(
            "expected a binary frame, got {}",
            mass.frame_size()
        )));
    }
    if m < 2 {
        return Err(Error::Argument(format!("need at least 2 types, got {m}")));
    }
    let full = (1u32 << m) - 1;
    let friendly = full & !1u32;
    let mut embedded = BTreeMap::new();
    for (bits, target) in [(0b01u32, 1u32), (0b10, friendly), (0b11, full)] {
        let v = mass.mass(bits);
        if v > 0.0 {
            *embedded.entry(target).or_insert(0.0) += v;
        }
    }
    MassFunction::new(m, embedded)
}

fn classify_from_combined(
    level1: &MassFunction,
    level2_by_level: &[MassFunction],
    m: usize,
) -> Result<TypeDistribution> {
    if level2_by_level.len() != level1.frame_size() {
        return Err(Error::Argument(format!(
            "{} level-two mass sets for a frame of {} metal levels",
            level2_by_level.len(),
            level1.frame_size()
        )));
    }
    // hard choice of the best-supported metal level (lowest index on ties)
    let mut chosen = 0usize;
    for level in 1..level1.frame_size() {
        if level1.singleton(level) > level1.singleton(chosen) {
            chosen = level;
        }
    }
    embed_binary_mass(&level2_by_level[chosen], m)?.pignistic()
}

/// Two-level classification: combine the level-one masses over metal
/// content, pick the best-supported level, combine that level's
/// mine-vs-friendly masses, and convert to a type distribution by a
/// pignistic transform over the full type frame.
pub fn ds_classify(
    level1_masses: &[MassFunction],
    level2_masses_by_level: &[Vec<MassFunction>],
    m: usize,
) -> Result<TypeDistribution> {
    let levels = level2_masses_by_level.len();
    if levels == 0 {
        return Err(Error::Precondition("no metal levels".into()));
    }
    let level1 = fold_combine(levels, level1_masses)?;
    let level2: Vec<MassFunction> = level2_masses_by_level
        .iter()
        .map(|masses| fold_combine(2, masses))
        .collect::<Result<_>>()?;
    classify_from_combined(&level1, &level2, m)
}

/// Incremental two-level fusion state for an episode: running combinations
/// of the level-one evidence and of each metal level's level-two evidence.
#[derive(Debug, Clone)]
pub struct TwoLevelFusion {
    level1: MassFunction,
    level2: Vec<MassFunction>,
    m: usize,
}

impl TwoLevelFusion {
    pub fn new(metal_levels: usize, m: usize) -> Self {
        Self {
            level1: MassFunction::vacuous(metal_levels),
            level2: vec![MassFunction::vacuous(2); metal_levels],
            m,
        }
    }

    /// Folds in one signal's evidence: a metal-content mass and one
    /// mine-vs-friendly mass per candidate metal level.
    pub fn absorb(
        &mut self,
        level1_evidence: &MassFunction,
        level2_evidence: &[MassFunction],
    ) -> Result<()> {
        if level2_evidence.len() != self.level2.len() {
            return Err(Error::Argument(format!(
                "{} level-two masses for {} metal levels",
                level2_evidence.len(),
                self.level2.len()
            )));
        }
        self.level1 = self.level1.combine(level1_evidence)?;
        for (acc, ev) in self.level2.iter_mut().zip(level2_evidence) {
            *acc = acc.combine(ev)?;
        }
        Ok(())
    }

    pub fn classify(&self) -> Result<TypeDistribution> {
        classify_from_combined(&self.level1, &self.level2, self.m)
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    fn mass(frame: usize, entries: &[(u32, f64)]) -> MassFunction {
        MassFunction::new(frame, entries.iter().copied().collect()).unwrap()
    }

    #[test]
    fn combination_matches_hand_computation() {
        // frames over {A, B}: A = 0b01, full = 0b11
        let m1 = mass(2, &[(0b01, 0.6), (0b11, 0.4)]);
        let m2 = mass(2, &[(0b01, 0.5), (0b11, 0.5)]);
        let c = ds_combine(&m1, &m2).unwrap();
        assert_abs_diff_eq!(c.mass(0b01), 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(c.mass(0b11), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn vacuous_mass_is_the_combination_identity() {
        let m1 = mass(3, &[(0b001, 0.3), (0b110, 0.5), (0b111, 0.2)]);
        let c = ds_combine(&m1, &MassFunction::vacuous(3)).unwrap();
        assert_eq!(c, m1);
    }

    #[test]
    fn total_conflict_is_an_error() {
        let m1 = mass(2, &[(0b01, 1.0)]);
        let m2 = mass(2, &[(0b10, 1.0)]);
        assert!(matches!(ds_combine(&m1, &m2), Err(Error::TotalConflict)));
    }

    #[test]
    fn pignistic_splits_composite_masses_uniformly() {
        let m = mass(2, &[(0b01, 0.6), (0b11, 0.4)]);
        let p = m.pignistic().unwrap();
        assert_abs_diff_eq!(p.get(0), 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(p.get(1), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn vacuous_evidence_classifies_to_uniform() {
        let out = ds_classify(
            &[MassFunction::vacuous(3)],
            &[
                vec![MassFunction::vacuous(2)],
                vec![MassFunction::vacuous(2)],
                vec![MassFunction::vacuous(2)],
            ],
            3,
        )
        .unwrap();
        for p in out.iter() {
            assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn certain_evidence_chain_classifies_one_hot_mine() {
        let level1 = vec![mass(3, &[(0b100, 1.0)])];
        let certain_mine = mass(2, &[(0b01, 1.0)]);
        let level2 = vec![
            vec![MassFunction::vacuous(2)],
            vec![MassFunction::vacuous(2)],
            vec![certain_mine],
        ];
        let out = ds_classify(&level1, &level2, 3).unwrap();
        assert_abs_diff_eq!(out.get(0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.get(1), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn classification_propagates_total_conflict() {
        let level1 = vec![mass(3, &[(0b001, 1.0)]), mass(3, &[(0b010, 1.0)])];
        let level2 = vec![
            vec![MassFunction::vacuous(2)],
            vec![MassFunction::vacuous(2)],
            vec![MassFunction::vacuous(2)],
        ];
        assert!(matches!(
            ds_classify(&level1, &level2, 3),
            Err(Error::TotalConflict)
        ));
    }

    #[test]
    fn incremental_fusion_matches_batch_classification() {
        let l1 = [
            mass(3, &[(0b100, 0.5), (0b111, 0.5)]),
            mass(3, &[(0b100, 0.3), (0b010, 0.2), (0b111, 0.5)]),
        ];
        let l2 = [
            [
                mass(2, &[(0b01, 0.2), (0b10, 0.4), (0b11, 0.4)]),
                mass(2, &[(0b10, 0.7), (0b11, 0.3)]),
            ],
            [
                mass(2, &[(0b01, 0.5), (0b11, 0.5)]),
                mass(2, &[(0b01, 0.6), (0b10, 0.1), (0b11, 0.3)]),
            ],
            [
                mass(2, &[(0b01, 0.8), (0b11, 0.2)]),
                mass(2, &[(0b01, 0.9), (0b11, 0.1)]),
            ],
        ];
        let mut fusion = TwoLevelFusion::new(3, 3);
        for i in 0..2 {
            fusion
                .absorb(&l1[i], &[l2[0][i].clone(), l2[1][i].clone(), l2[2][i].clone()])
                .unwrap();
        }
        let batch = ds_classify(
            &l1,
            &[l2[0].to_vec(), l2[1].to_vec(), l2[2].to_vec()],
            3,
        )
        .unwrap();
        let incremental = fusion.classify().unwrap();
        for (a, b) in incremental.iter().zip(batch.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    fn arb_mass() -> impl Strategy<Value = MassFunction> {
        prop::collection::vec(0.05f64..1.0, 7).prop_map(|weights| {
            // frame of 3: subsets 1..=7 all carry some mass, so combinations
            // can never fully conflict
            let total: f64 = weights.iter().sum();
            let masses: BTreeMap<u32, f64> = weights
                .iter()
                .enumerate()
                .map(|(i, w)| ((i + 1) as u32, w / total))
                .collect();
            MassFunction::new(3, masses).unwrap()
        })
    }

    proptest! {
        #[test]
        fn combination_is_commutative(a in arb_mass(), b in arb_mass()) {
            let ab = ds_combine(&a, &b).unwrap();
            let ba = ds_combine(&b, &a).unwrap();
            for subset in 1u32..8 {
                prop_assert!((ab.mass(subset) - ba.mass(subset)).abs() <= 1e-12);
            }
        }

        #[test]
        fn combination_is_associative(a in arb_mass(), b in arb_mass(), c in arb_mass()) {
            let left = ds_combine(&ds_combine(&a, &b).unwrap(), &c).unwrap();
            let right = ds_combine(&a, &ds_combine(&b, &c).unwrap()).unwrap();
            for subset in 1u32..8 {
                prop_assert!((left.mass(subset) - right.mass(subset)).abs() <= 1e-12);
            }
        }

        #[test]
        fn pignistic_outputs_live_on_the_simplex(a in arb_mass(), b in arb_mass()) {
            let p = ds_combine(&a, &b).unwrap().pignistic().unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
}
