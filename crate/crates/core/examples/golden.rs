//! Regenerates `data/golden.json`: parameter sweeps around every builtin's
//! default point and the per-gap Hofstadter values. The builtin defaults
//! are read off these sweeps (a resolved, stable value away from any gap
//! minimum).
//!
//!     cargo run --release --example golden > crates/core/data/golden.json

use serde_json::{json, Value};
use std::time::Instant;

fn run(args: &[&str]) -> Value {
    let t = Instant::now();
    let mut full = vec!["tenfold"];
    full.extend_from_slice(args);
    let out = tenfold::cli::run_args(full);
    eprintln!("{:>7.1}s  {}", t.elapsed().as_secs_f64(), args.join(" "));
    let mut v: Value = serde_json::from_str(&out.stdout).unwrap_or_else(|_| json!({"stderr": out.stderr}));
    if let Some(points) = v.get_mut("points").and_then(|p| p.as_array_mut()) {
        for p in points {
            if let Some(g) = p.get_mut("bulk_gap") {
                *g = json!((g.as_f64().unwrap_or(0.0) * 1e6).round() / 1e6);
            }
        }
    }
    json!({"args": args, "exit": out.code, "result": v})
}

fn invariant_summary(args: &[&str]) -> Value {
    let r = run(args);
    let res = &r["result"];
    let levels: Vec<Value> = res["levels"].as_array().cloned().unwrap_or_default().iter().map(|l| {
        json!({"l": l["l"], "value": l["value"], "chern": l["chern"]["value"].as_f64().map(|c| (c * 1e4).round() / 1e4)})
    }).collect();
    json!({"args": args, "exit": r["exit"], "group": res["group"], "value": res["value"], "stable": res["stable"], "levels": levels})
}

fn main() {
    let mut hof = Vec::new();
    for (p, q, gaps) in [("1", "3", 2), ("1", "4", 2)] {
        for g in 1..=gaps {
            let (pp, qq, gg) = (format!("p={p}"), format!("q={q}"), format!("gap={g}"));
            hof.push(invariant_summary(&["invariant", "--builtin", "hofstadter", "--param", &pp, "--param", &qq, "--param", &gg]));
        }
    }
    let sweeps = vec![
        run(&["sweep", "--builtin", "kane_mele", "--grid", "lambda_so=0:0.3:13", "--schedule", "8,10,12"]),
        run(&["sweep", "--builtin", "haldane", "--grid", "mass=0:1.6:9", "--schedule", "6,8,10,12"]),
        run(&["sweep", "--builtin", "threed_ct", "--grid", "m=1.4:2.2:5"]),
        run(&["sweep", "--builtin", "threed_t_only", "--grid", "m=1.5:2.5:3"]),
    ];
    let out = json!({"hofstadter": hof, "sweeps": sweeps});
    println!("{}", serde_json::to_string_pretty(&out).unwrap());
}
