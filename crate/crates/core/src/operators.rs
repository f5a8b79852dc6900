//! Pairwise neighborhood moves on permutations and incremental objective deltas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sched::{adjacency, g_at, Instance, ObjectiveConfig, Permutation};

/// Two distinct 0-based positions to exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairAction {
    pub i: usize,
    pub k: usize,
}

impl PairAction {
    pub fn new(i: usize, k: usize) -> Self {
        Self { i, k }
    }

    pub fn check(&self, n: usize) -> Result<()> {
        let reason = if self.i >= n || self.k >= n {
            "position out of range"
        } else if self.i == self.k {
            "positions must differ"
        } else {
            return Ok(());
        };
        Err(Error::RejectedAction {
            i: self.i,
            k: self.k,
            len: n,
            reason,
        })
    }

    /// Row-major index into an `n x n` matrix.
    pub fn flat(&self, n: usize) -> usize {
        self.i * n + self.k
    }

    pub fn from_flat(idx: usize, n: usize) -> Self {
        Self {
            i: idx / n,
            k: idx % n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Towards the end of the sequence.
    Forward,
    /// Towards the start of the sequence.
    Backward,
}

/// Exchanges the jobs at positions `a.i` and `a.k`.
pub fn swap(perm: &Permutation, a: PairAction) -> Result<Permutation> {
    let mut out = perm.clone();
    swap_in_place(&mut out, a)?;
    Ok(out)
}

/// In-place [`swap`] for hot loops.
#[inline]
pub fn swap_in_place(perm: &mut Permutation, a: PairAction) -> Result<()> {
    a.check(perm.len())?;
    perm.swap_in_place(a.i, a.k);
    debug_assert!(perm.is_valid());
    Ok(())
}

/// Moves the job at `position` one step in `direction`.
pub fn shift(perm: &Permutation, position: usize, direction: Direction) -> Result<Permutation> {
    let n = perm.len();
    let target = match direction {
        Direction::Forward if position + 1 < n => position + 1,
        Direction::Backward if position > 0 && position < n => position - 1,
        _ => {
            return Err(Error::RejectedAction {
                i: position,
                k: position,
                len: n,
                reason: "shift leaves the sequence",
            })
        }
    };
    swap(perm, PairAction::new(position, target))
}

/// Removes the job at `from` and reinserts it at `to`, shifting the jobs between.
pub fn insert(perm: &Permutation, from: usize, to: usize) -> Result<Permutation> {
    PairAction::new(from, to).check(perm.len())?;
    let mut out = perm.clone();
    let order = out.order_mut();
    if from < to {
        order[from..=to].rotate_left(1);
    } else {
        order[to..=from].rotate_right(1);
    }
    debug_assert!(out.is_valid());
    Ok(out)
}

/// `f2(swap(perm, a)) - f2(perm)`, touching only the adjacencies around `a.i` and `a.k`.
pub fn f2_swap_delta(inst: &Instance, perm: &Permutation, a: PairAction) -> Result<f64> {
    perm.check_len(inst)?;
    a.check(perm.len())?;
    Ok(f2_swap_delta_unchecked(inst, perm, a))
}

pub(crate) fn f2_swap_delta_unchecked(inst: &Instance, perm: &Permutation, a: PairAction) -> f64 {
    let n = perm.len();
    // Left ends of the affected adjacencies, deduplicated.
    let mut lefts = [usize::MAX; 4];
    let mut m = 0;
    for p in [a.i.wrapping_sub(1), a.i, a.k.wrapping_sub(1), a.k] {
        if p < n.saturating_sub(1) && !lefts[..m].contains(&p) {
            lefts[m] = p;
            m += 1;
        }
    }
    let order = perm.as_slice();
    let swapped = |p: usize| {
        if p == a.i {
            order[a.k]
        } else if p == a.k {
            order[a.i]
        } else {
            order[p]
        }
    };
    lefts[..m]
        .iter()
        .map(|&p| {
            adjacency(inst, swapped(p), swapped(p + 1)) - adjacency(inst, order[p], order[p + 1])
        })
        .sum()
}

/// `f1(swap(perm, a)) - f1(perm)`; only the two swapped positions change.
pub fn f1_swap_delta(
    inst: &Instance,
    perm: &Permutation,
    a: PairAction,
    cfg: &ObjectiveConfig,
) -> Result<f64> {
    perm.check_len(inst)?;
    a.check(perm.len())?;
    Ok(f1_swap_delta_unchecked(inst, perm, a, cfg))
}

pub(crate) fn f1_swap_delta_unchecked(
    inst: &Instance,
    perm: &Permutation,
    a: PairAction,
    cfg: &ObjectiveConfig,
) -> f64 {
    let (ji, jk) = (perm.job_at(a.i), perm.job_at(a.k));
    let g = |job, pos| g_at(inst, job, pos, cfg).0;
    (g(jk, a.i) + g(ji, a.k)) - (g(ji, a.i) + g(jk, a.k))
}

/// Change of the combined objective caused by swapping `a`.
pub fn fc_swap_delta(
    inst: &Instance,
    perm: &Permutation,
    a: PairAction,
    cfg: &ObjectiveConfig,
) -> Result<f64> {
    perm.check_len(inst)?;
    a.check(perm.len())?;
    Ok(fc_swap_delta_unchecked(inst, perm, a, cfg))
}

#[inline]
pub(crate) fn fc_swap_delta_unchecked(
    inst: &Instance,
    perm: &Permutation,
    a: PairAction,
    cfg: &ObjectiveConfig,
) -> f64 {
    // fc rises when f1 falls and when f2 rises.
    -cfg.alpha1 * f1_swap_delta_unchecked(inst, perm, a, cfg)
        + cfg.alpha2 * f2_swap_delta_unchecked(inst, perm, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sched::{objective_f1, objective_f2, Job};
    use proptest::prelude::*;

    fn p(v: &[usize]) -> Permutation {
        Permutation::from_one_based(v).unwrap()
    }

    #[test]
    fn swap_examples() {
        assert_eq!(
            swap(&p(&[1, 2, 3]), PairAction::new(0, 2)).unwrap(),
            p(&[3, 2, 1])
        );
        let s = p(&[4, 2, 6, 1, 5, 3]);
        let out = swap(&s, PairAction::new(2, 5)).unwrap();
        assert_eq!(out, p(&[4, 2, 3, 1, 5, 6]));
        assert_eq!(swap(&out, PairAction::new(2, 5)).unwrap(), s);
        assert!(swap(&s, PairAction::new(1, 1)).is_err());
        assert!(swap(&s, PairAction::new(0, 6)).is_err());
    }

    #[test]
    fn shift_examples() {
        let s = p(&[1, 2, 3]);
        assert_eq!(shift(&s, 1, Direction::Forward).unwrap(), p(&[1, 3, 2]));
        assert!(shift(&s, 0, Direction::Backward).is_err());
        assert!(shift(&s, 2, Direction::Forward).is_err());
        assert_eq!(shift(&s, 1, Direction::Backward).unwrap(), p(&[2, 1, 3]));
    }

    #[test]
    fn insert_examples() {
        assert_eq!(insert(&p(&[1, 2, 3, 4]), 0, 2).unwrap(), p(&[2, 3, 1, 4]));
        assert_eq!(insert(&p(&[1, 2, 3, 4]), 3, 1).unwrap(), p(&[1, 4, 2, 3]));
        assert!(insert(&p(&[1, 2]), 0, 0).is_err());
        assert!(insert(&p(&[1, 2]), 0, 5).is_err());
    }

    fn two_job(a: &[f64], b: &[f64]) -> Instance {
        Instance {
            id: "two".into(),
            station_time: 10.0,
            jobs: vec![
                Job {
                    processing_times: a.to_vec(),
                    due_date: 5.0,
                },
                Job {
                    processing_times: b.to_vec(),
                    due_date: 5.0,
                },
            ],
        }
    }

    #[test]
    fn delta_edge_cases() {
        let cfg = ObjectiveConfig::default();
        let inst = two_job(&[1.0, 9.0], &[4.0, 2.0]);
        let id = Permutation::identity(2);
        let a = PairAction::new(0, 1);
        assert_eq!(f2_swap_delta(&inst, &id, a).unwrap(), 0.0);
        // Equal due dates.
        assert_eq!(f1_swap_delta(&inst, &id, a, &cfg).unwrap(), 0.0);
        let same = two_job(&[3.0, 3.0], &[3.0, 3.0]);
        assert_eq!(f2_swap_delta(&same, &id, a).unwrap(), 0.0);
    }

    fn arb_case() -> impl Strategy<Value = (Instance, Permutation, PairAction)> {
        (2usize..12, 1usize..5).prop_flat_map(|(n, w)| {
            (
                proptest::collection::vec(
                    (proptest::collection::vec(0.0f64..100.0, w), 1.0f64..3000.0),
                    n,
                ),
                Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
                0..n,
                0..n - 1,
            )
                .prop_map(move |(jobs, order, i, k)| {
                    let k = if k >= i { k + 1 } else { k };
                    let inst = Instance {
                        id: "prop".into(),
                        station_time: 100.0,
                        jobs: jobs
                            .into_iter()
                            .map(|(p, d)| Job {
                                processing_times: p,
                                due_date: d,
                            })
                            .collect(),
                    };
                    (
                        inst,
                        Permutation::new(order).unwrap(),
                        PairAction::new(i, k),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn operators_preserve_bijection((inst, perm, a) in arb_case()) {
            let _ = inst;
            prop_assert!(swap(&perm, a).unwrap().is_valid());
            prop_assert!(insert(&perm, a.i, a.k).unwrap().is_valid());
            let back = insert(&insert(&perm, a.i, a.k).unwrap(), a.k, a.i).unwrap();
            prop_assert_eq!(back, perm.clone());
            prop_assert_eq!(swap(&swap(&perm, a).unwrap(), a).unwrap(), perm.clone());
            if a.i + 1 < perm.len() {
                prop_assert_eq!(
                    shift(&perm, a.i, Direction::Forward).unwrap(),
                    swap(&perm, PairAction::new(a.i, a.i + 1)).unwrap()
                );
                prop_assert_eq!(
                    insert(&perm, a.i, a.i + 1).unwrap(),
                    swap(&perm, PairAction::new(a.i, a.i + 1)).unwrap()
                );
            }
        }

        #[test]
        fn incremental_deltas_match_full((inst, perm, a) in arb_case()) {
            let cfg = ObjectiveConfig { alpha1: 1.0, alpha2: 0.01, tardiness_scale: 500.0 };
            let next = swap(&perm, a).unwrap();
            let full2 = objective_f2(&inst, &next).unwrap() - objective_f2(&inst, &perm).unwrap();
            let full1 = objective_f1(&inst, &next, &cfg).unwrap() - objective_f1(&inst, &perm, &cfg).unwrap();
            let d2 = f2_swap_delta(&inst, &perm, a).unwrap();
            let d1 = f1_swap_delta(&inst, &perm, a, &cfg).unwrap();
            prop_assert!((d2 - full2).abs() <= 1e-9 * full2.abs().max(1.0));
            prop_assert!((d1 - full1).abs() <= 1e-9 * full1.abs().max(1.0));
        }
    }
}
