//! Bitmap-index analytics: weekly active users and male weekly active users.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{VectorMachine, WorkloadRun};
use crate::analog::ReliabilityModel;
use crate::bits::BitRow;
use crate::error::{Error, Result};
use crate::ops::BitwiseOp;

pub const DAYS_PER_WEEK: usize = 7;

/// Per-user bitmaps: one activity bitmap per day plus a gender bitmap.
#[derive(Debug, Clone, PartialEq)]
pub struct BitmapIndexSet {
    pub users: usize,
    /// `days[w][d]`: users active on day `d` of week `w`.
    pub days: Vec<[BitRow; DAYS_PER_WEEK]>,
    pub male: BitRow,
}

impl BitmapIndexSet {
    pub fn random<R: Rng + ?Sized>(users: usize, weeks: usize, activity: f64, rng: &mut R) -> Self {
        let days = (0..weeks)
            .map(|_| std::array::from_fn(|_| BitRow::random_with_density(users, activity, rng)))
            .collect();
        let male = BitRow::random_with_density(users, 0.5, rng);
        BitmapIndexSet { users, days, male }
    }

    pub fn weeks(&self) -> usize {
        self.days.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitmapResult {
    /// Users active in every one of the last `n` weeks.
    pub unique_weekly_active: u64,
    /// Male users active in each week, oldest first.
    pub male_weekly_active: Vec<u64>,
}

/// Query over the most recent `weeks` weeks.
pub fn bitmap_query(
    idx: &BitmapIndexSet,
    weeks: usize,
    row_bits: usize,
    reliability: ReliabilityModel,
) -> Result<(BitmapResult, WorkloadRun)> {
    if weeks == 0 || weeks > idx.weeks() {
        return Err(Error::InsufficientBitmaps {
            needed: weeks.max(1),
            available: idx.weeks(),
        });
    }
    let mut vm = VectorMachine::new(idx.users, row_bits, reliability);
    let male = vm.store(&idx.male)?;
    let mut week_vectors = Vec::with_capacity(weeks);
    for days in &idx.days[idx.weeks() - weeks..] {
        let stored = days
            .iter()
            .map(|d| vm.store(d))
            .collect::<Result<Vec<_>>>()?;
        let acc = vm.apply(BitwiseOp::Or, stored[0], Some(stored[1]))?;
        for &d in &stored[2..] {
            vm.bop(BitwiseOp::Or, acc, acc, Some(d))?;
        }
        week_vectors.push(acc);
    }
    let all = vm.alloc()?;
    let mut every = week_vectors[0];
    let mut male_weekly_active = Vec::with_capacity(weeks);
    for (i, &w) in week_vectors.iter().enumerate() {
        if i > 0 {
            vm.bop(BitwiseOp::And, all, every, Some(w))?;
            every = all;
        }
        let m = vm.apply(BitwiseOp::And, male, Some(w))?;
        male_weekly_active.push(vm.bitcount(m)?);
    }
    let unique_weekly_active = vm.bitcount(every)?;
    Ok((
        BitmapResult {
            unique_weekly_active,
            male_weekly_active,
        },
        vm.finish(),
    ))
}
