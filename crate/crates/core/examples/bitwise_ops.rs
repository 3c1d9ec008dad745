//! Compile each operation to AAP/AP commands and run it on one subarray.

use buddysim::command::{compile_bitwise, execute};
use buddysim::subarray::{RowSlot, SubarrayConfig};
use buddysim::{BitRow, BitwiseOp, RowAddress, SubarrayState};

fn main() -> buddysim::Result<()> {
    let bits = 16;
    let a = BitRow::from_bits((0..bits).map(|i| i % 4 < 2));
    let b = BitRow::from_bits((0..bits).map(|i| i % 2 == 0));
    let show = |r: &BitRow| {
        r.iter()
            .map(|x| if x { '1' } else { '0' })
            .collect::<String>()
    };
    println!("a     = {}", show(&a));
    println!("b     = {}", show(&b));

    for op in BitwiseOp::ALL {
        let mut sub = SubarrayState::new(SubarrayConfig::with_row_bits(bits));
        sub.load_row(RowSlot::D(0), a.clone())?;
        sub.load_row(RowSlot::D(1), b.clone())?;
        let src2 = op.is_binary().then_some(RowAddress::D(1));
        let trace = compile_bitwise(op, RowAddress::D(2), RowAddress::D(0), src2)?;
        let report = execute(&trace, &mut sub)?;
        let s = trace.summary();
        println!(
            "{op:<5} = {}  ({} AAP, {} AP, {} commands)",
            show(&sub.row(RowSlot::D(2))?),
            s.aaps,
            s.aps,
            report.commands
        );
    }

    let trace = compile_bitwise(BitwiseOp::Not, RowAddress::D(2), RowAddress::D(0), None)?;
    print!("\nnot as JSON lines:\n{}", trace.to_jsonl());
    Ok(())
}
