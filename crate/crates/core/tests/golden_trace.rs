//! Field names and order of the JSON-lines trace format.

use buddysim::command::compile_bitwise;
use buddysim::{BitwiseOp, RowAddress};

const NOT_TRACE: &str = r#"{"seq":0,"kind":"ACTIVATE","addr":"D0","wordlines":["D0"],"wordline_count":1,"annotation":"aap_first","source":"compiler","op":0}
{"seq":1,"kind":"ACTIVATE","addr":"B5","wordlines":["DCC0_N"],"wordline_count":1,"annotation":"aap_second","source":"compiler","op":0}
{"seq":2,"kind":"PRECHARGE","annotation":"aap_precharge","source":"compiler","op":0}
{"seq":3,"kind":"ACTIVATE","addr":"B4","wordlines":["DCC0"],"wordline_count":1,"annotation":"aap_first","source":"compiler","op":0}
{"seq":4,"kind":"ACTIVATE","addr":"D2","wordlines":["D2"],"wordline_count":1,"annotation":"aap_second","source":"compiler","op":0}
{"seq":5,"kind":"PRECHARGE","annotation":"aap_precharge","source":"compiler","op":0}
"#;

#[test]
fn not_trace_golden() {
    let trace = compile_bitwise(BitwiseOp::Not, RowAddress::D(2), RowAddress::D(0), None).unwrap();
    assert_eq!(trace.to_jsonl(), NOT_TRACE);
}

#[test]
fn xor_trace_uses_triple_rows() {
    let trace = compile_bitwise(
        BitwiseOp::Xor,
        RowAddress::D(2),
        RowAddress::D(0),
        Some(RowAddress::D(1)),
    )
    .unwrap();
    let lines: Vec<serde_json::Value> = trace
        .to_jsonl()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let triples: Vec<&str> = lines
        .iter()
        .filter(|v| v["wordline_count"] == 3)
        .map(|v| v["addr"].as_str().unwrap())
        .collect();
    assert_eq!(triples, ["B14", "B15", "B13"]);
}
