//! Range predicate `c1 <= v <= c2` over a vertically bit-sliced column.

use rand::Rng;
use serde::Serialize;

use super::{Vector, VectorMachine, WorkloadRun};
use crate::analog::ReliabilityModel;
use crate::bits::BitRow;
use crate::error::{Error, Result};
use crate::ops::BitwiseOp;

pub const MAX_BITS: u32 = 32;

/// Column of `r` values of `b` bits, stored as `b` bit vectors; `slices[0]`
/// holds the most significant bit of every value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitSlicedColumn {
    pub bits: u32,
    pub len: usize,
    pub slices: Vec<BitRow>,
}

impl BitSlicedColumn {
    pub fn from_values(bits: u32, values: &[u32]) -> Result<Self> {
        if bits == 0 || bits > MAX_BITS {
            return Err(Error::InvalidParameter(format!(
                "bits per value must be 1..={MAX_BITS}, got {bits}"
            )));
        }
        if let Some(&v) = values.iter().find(|&&v| u64::from(v) >> bits != 0) {
            return Err(Error::ConstantOutOfRange {
                value: u64::from(v),
                bits,
            });
        }
        let slices = (0..bits)
            .map(|i| {
                let shift = bits - 1 - i;
                BitRow::from_bits(values.iter().map(|v| (v >> shift) & 1 == 1))
            })
            .collect();
        Ok(BitSlicedColumn {
            bits,
            len: values.len(),
            slices,
        })
    }

    pub fn random<R: Rng + ?Sized>(bits: u32, len: usize, rng: &mut R) -> Result<Self> {
        let max = (1u64 << bits) - 1;
        let values: Vec<u32> = (0..len).map(|_| rng.gen_range(0..=max) as u32).collect();
        Self::from_values(bits, &values)
    }

    pub fn values(&self) -> Vec<u32> {
        (0..self.len)
            .map(|k| {
                self.slices
                    .iter()
                    .fold(0u32, |acc, s| (acc << 1) | u32::from(s.get(k)))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScanResult {
    #[serde(skip)]
    pub matches: BitRow,
    pub count: u64,
}

/// Less-than and equality masks against one constant, refined MSB first.
struct Masks {
    lt: Vector,
    eq: Vector,
    lt_current: Vector,
    eq_current: Vector,
}

pub fn bitweaving_scan(
    col: &BitSlicedColumn,
    c1: u64,
    c2: u64,
    row_bits: usize,
    reliability: ReliabilityModel,
) -> Result<(ScanResult, WorkloadRun)> {
    for c in [c1, c2] {
        if c >> col.bits != 0 {
            return Err(Error::ConstantOutOfRange {
                value: c,
                bits: col.bits,
            });
        }
    }
    if c1 > c2 {
        return Err(Error::ConstantOutOfRange {
            value: c1,
            bits: col.bits,
        });
    }
    let mut vm = VectorMachine::new(col.len, row_bits, reliability);
    let slices = col
        .slices
        .iter()
        .map(|s| vm.store(s))
        .collect::<Result<Vec<_>>>()?;
    let zero = vm.constant(false)?;
    let one = vm.constant(true)?;
    let not_slice = vm.alloc()?;
    let same = vm.alloc()?;
    let term = vm.alloc()?;
    let mut masks = Vec::with_capacity(2);
    for _ in 0..2 {
        masks.push(Masks {
            lt: vm.alloc()?,
            eq: vm.alloc()?,
            lt_current: zero,
            eq_current: one,
        });
    }
    for (i, &slice) in slices.iter().enumerate() {
        let shift = col.bits - 1 - i as u32;
        vm.bop(BitwiseOp::Not, not_slice, slice, None)?;
        for (m, c) in masks.iter_mut().zip([c1, c2]) {
            let cb = if (c >> shift) & 1 == 1 { one } else { zero };
            vm.bop(BitwiseOp::Xnor, same, slice, Some(cb))?;
            vm.bop(BitwiseOp::And, term, m.eq_current, Some(cb))?;
            vm.bop(BitwiseOp::And, term, term, Some(not_slice))?;
            vm.bop(BitwiseOp::Or, m.lt, m.lt_current, Some(term))?;
            vm.bop(BitwiseOp::And, m.eq, m.eq_current, Some(same))?;
            m.lt_current = m.lt;
            m.eq_current = m.eq;
        }
    }
    let at_least_c1 = vm.apply(BitwiseOp::Not, masks[0].lt, None)?;
    let at_most_c2 = vm.apply(BitwiseOp::Or, masks[1].lt, Some(masks[1].eq))?;
    let result = vm.apply(BitwiseOp::And, at_least_c1, Some(at_most_c2))?;
    let count = vm.bitcount(result)?;
    let matches = vm.load(result)?;
    Ok((ScanResult { matches, count }, vm.finish()))
}
