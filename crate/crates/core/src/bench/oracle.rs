use serde::{Deserialize, Serialize};

use crate::baselines::edd_sort;
use crate::error::{Error, Result};
use crate::sched::{objective_f1, objective_f2, Instance, ObjectiveConfig, Permutation, Reference};

/// Largest job count the exhaustive search accepts.
pub const BRUTE_FORCE_LIMIT: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleObjective {
    /// Minimize `f1`.
    F1,
    /// Maximize `f2`.
    F2,
    /// Maximize `fc` relative to the EDD order.
    Fc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub perm: Permutation,
    pub value: f64,
    pub evaluated: u64,
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let Some(i) = (0..n - 1).rev().find(|&i| p[i] < p[i + 1]) else {
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).unwrap();
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}

/// Exhaustive optimum over all `N!` permutations. Among equal values the
/// lexicographically smallest permutation wins.
pub fn brute_force_best(
    inst: &Instance,
    obj: &ObjectiveConfig,
    which: OracleObjective,
) -> Result<OracleResult> {
    let n = inst.n_jobs();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    obj.validate()?;
    let reference = Reference::of(inst, &edd_sort(inst), obj)?;
    let score = |p: &Permutation| -> Result<f64> {
        Ok(match which {
            OracleObjective::F1 => -objective_f1(inst, p, obj)?,
            OracleObjective::F2 => objective_f2(inst, p)?,
            OracleObjective::Fc => reference.evaluate(inst, p, obj)?.fc,
        })
    };
    let mut order: Vec<usize> = (0..n).collect();
    let mut best = Permutation::identity(n);
    let mut best_score = score(&best)?;
    let mut evaluated = 1;
    while next_permutation(&mut order) {
        let p = Permutation::new(order.clone())?;
        let s = score(&p)?;
        evaluated += 1;
        if s > best_score {
            best_score = s;
            best = p;
        }
    }
    let value = if which == OracleObjective::F1 {
        -best_score
    } else {
        best_score
    };
    Ok(OracleResult {
        perm: best,
        value,
        evaluated,
    })
}
