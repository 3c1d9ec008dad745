//! Union, intersection and difference of sets over `1..=2^19`, held as
//! bit vectors.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{VectorMachine, WorkloadRun};
use crate::analog::ReliabilityModel;
use crate::bits::BitRow;
use crate::error::{Error, Result};
use crate::ops::BitwiseOp;

pub const DOMAIN: u32 = 1 << 19;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetResult {
    pub union: Vec<u32>,
    pub intersection: Vec<u32>,
    /// Elements of the first set in none of the others.
    pub difference: Vec<u32>,
}

pub fn random_sets<R: Rng + ?Sized>(k: usize, size: usize, rng: &mut R) -> Vec<BTreeSet<u32>> {
    (0..k)
        .map(|_| (0..size).map(|_| rng.gen_range(1..=DOMAIN)).collect())
        .collect()
}

fn to_bits(set: &BTreeSet<u32>) -> Result<BitRow> {
    let mut row = BitRow::zeros(DOMAIN as usize);
    for &e in set {
        if e == 0 || e > DOMAIN {
            return Err(Error::InvalidParameter(format!(
                "set element {e} outside 1..={DOMAIN}"
            )));
        }
        row.set(e as usize - 1, true);
    }
    Ok(row)
}

fn to_elements(row: &BitRow) -> Vec<u32> {
    row.ones_indices()
        .into_iter()
        .map(|i| i as u32 + 1)
        .collect()
}

pub fn set_ops(
    sets: &[BTreeSet<u32>],
    row_bits: usize,
    reliability: ReliabilityModel,
) -> Result<(SetResult, WorkloadRun)> {
    if sets.len() < 2 {
        return Err(Error::InvalidParameter(
            "set operations need at least two sets".into(),
        ));
    }
    let mut vm = VectorMachine::new(DOMAIN as usize, row_bits, reliability);
    let stored = sets
        .iter()
        .map(|s| vm.store(&to_bits(s)?))
        .collect::<Result<Vec<_>>>()?;

    let union = vm.apply(BitwiseOp::Or, stored[0], Some(stored[1]))?;
    let inter = vm.apply(BitwiseOp::And, stored[0], Some(stored[1]))?;
    for &s in &stored[2..] {
        vm.bop(BitwiseOp::Or, union, union, Some(s))?;
        vm.bop(BitwiseOp::And, inter, inter, Some(s))?;
    }
    // s1 AND NOT s2 AND ... AND NOT sk, with the NOTs merged by De Morgan.
    let mut rest = stored[1];
    if stored.len() > 2 {
        let acc = vm.apply(BitwiseOp::Or, stored[1], Some(stored[2]))?;
        for &s in &stored[3..] {
            vm.bop(BitwiseOp::Or, acc, acc, Some(s))?;
        }
        rest = acc;
    }
    let not_rest = vm.apply(BitwiseOp::Not, rest, None)?;
    let diff = vm.apply(BitwiseOp::And, stored[0], Some(not_rest))?;

    let result = SetResult {
        union: to_elements(&vm.load(union)?),
        intersection: to_elements(&vm.load(inter)?),
        difference: to_elements(&vm.load(diff)?),
    };
    Ok((result, vm.finish()))
}
