//! Acceptance gate: one PASS/FAIL line per criterion with its timing.
//! Run with `cargo test --release --test acceptance`.

use serde_json::Value;
use std::collections::BTreeMap;
use std::time::{Duration, Instant};
use tenfold::class::{symmetry_class, verify_class};
use tenfold::cli;
use tenfold::clifford::{abs_index_group, check_graded_rep, exterior_rep, ko_group, stable_reduce, CliffordClass, Field, GradedMatrixRep, GroupTag};
use tenfold::linalg;
use tenfold::model::{self, LatticeModel};
use tenfold::pairing::{self, PairingOptions};
use tenfold::symmetry::{classify, SymmetrySpec};

const REL_TOL: f64 = 1e-12;
const CHERN_TOL: f64 = 0.05;
const DISORDER_FRACTION: f64 = 0.2;
const DISORDER_SEEDS: u64 = 5;
const RANDOM_DRAWS: u64 = 20;

struct Gate {
    failures: usize,
}

impl Gate {
    fn run(&mut self, id: u32, name: &str, budget: Duration, f: impl FnOnce() -> Result<String, String>) {
        let t = Instant::now();
        let res = f();
        let dt = t.elapsed();
        let (ok, msg) = match res {
            Ok(m) if dt <= budget => (true, m),
            Ok(m) => (false, format!("{m}; over time budget")),
            Err(m) => (false, m),
        };
        if !ok {
            self.failures += 1;
        }
        println!(
            "[{}] {id} {name}: {msg} ({:.2} s, budget {} s)",
            if ok { "PASS" } else { "FAIL" },
            dt.as_secs_f64(),
            budget.as_secs()
        );
    }
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn builtin(name: &str, params: &[(&str, f64)]) -> LatticeModel {
    let given: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    model::builtin(name, &given).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Table 2 typed in by hand, rows in table order.
const TABLE: [(&str, [&str; 4]); 10] = [
    ("{T:+1}", ["Z", "0", "0", "0"]),
    ("{T:+1, C:+1}", ["Z2", "Z", "0", "0"]),
    ("{C:+1}", ["Z2", "Z2", "Z", "0"]),
    ("{T:-1, C:+1}", ["0", "Z2", "Z2", "Z"]),
    ("{T:-1}", ["(2)Z", "0", "Z2", "Z2"]),
    ("{T:-1, C:-1}", ["0", "(2)Z", "0", "Z2"]),
    ("{C:-1}", ["0", "0", "(2)Z", "0"]),
    ("{T:+1, C:-1}", ["0", "0", "0", "(2)Z"]),
    ("{}", ["Z", "0", "Z", "0"]),
    ("{S}", ["0", "Z", "0", "Z"]),
];

fn table() -> Result<String, String> {
    let rows = cli::table_rows();
    let mut cells = 0;
    for (row, (sym, groups)) in rows.iter().zip(TABLE.iter()) {
        ensure(row.symmetry == *sym, format!("row order: {} vs {sym}", row.symmetry))?;
        for d in 0..4 {
            ensure(row.groups[d] == groups[d], format!("{sym} d={d}: {} vs {}", row.groups[d], groups[d]))?;
            cells += 1;
        }
    }
    ensure(cells == 40, format!("{cells} cells"))?;
    ensure(cli::render_table(cli::Format::Text) == cli::GOLDEN_TABLE_TEXT, "text table differs from golden file")?;
    ensure(cli::render_table(cli::Format::Json) == cli::GOLDEN_TABLE_JSON, "JSON table differs from golden file")?;
    Ok(format!("{cells}/40 cells match"))
}

/// `Cl(r,s)` on the exterior algebra of `R^{r+s}`: right generators for the
/// positive part, left ones for the negative part.
fn rs_rep(r: usize, s: usize) -> GradedMatrixRep {
    let ext = exterior_rep(r + s);
    let mut generators: Vec<linalg::CMat> = (0..r).map(|j| ext.gamma(j).clone()).collect();
    generators.extend((r..r + s).map(|j| ext.rho(j).clone()));
    let mut signs = vec![1i8; r];
    signs.extend(vec![-1i8; s]);
    GradedMatrixRep { field: Field::Real, generators, signs, grading: ext.grading.clone() }
}

fn clifford_suite() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    let mut reps = 0;
    for d in 0..=6 {
        let ext = exterior_rep(d);
        for rep in [&ext.left, &ext.right] {
            let rr = check_graded_rep(rep).map_err(|e| e.to_string())?;
            ensure(rr.is_valid(), format!("d={d}: {:?}", rr.violations))?;
            worst = worst.max(rr.max_residual);
        }
        for i in 0..d {
            for j in 0..d {
                worst = worst.max(linalg::anticomm_res(ext.rho(i).as_ref(), ext.gamma(j).as_ref()));
            }
        }
    }
    for n in 0..=6 {
        for r in 0..=n {
            let rep = rs_rep(r, n - r);
            let rr = check_graded_rep(&rep).map_err(|e| e.to_string())?;
            ensure(rr.is_valid(), format!("Cl({r},{}): {:?}", n - r, rr.violations))?;
            ensure(rep.class() == CliffordClass::real(r, n - r), format!("class of Cl({r},{})", n - r))?;
            worst = worst.max(rr.max_residual);
            let cl = CliffordClass::real(r, n - r);
            ensure(stable_reduce(stable_reduce(cl)) == stable_reduce(cl), "stable_reduce not idempotent")?;
            ensure(stable_reduce(cl).stable_class() == (r as i64 - (n - r) as i64).rem_euclid(8) as usize, "stable class")?;
            reps += 1;
        }
        let c = CliffordClass::complex(n);
        ensure(stable_reduce(stable_reduce(c)) == stable_reduce(c), "complex stable_reduce")?;
    }
    for k in -24..24 {
        ensure(ko_group(k) == ko_group(k + 8), format!("ko_group period at {k}"))?;
    }
    ensure(worst < REL_TOL, format!("residual {worst:e}"))?;
    Ok(format!("{reps} Cl(r,s) reps and exterior d<=6, max residual {worst:.1e}"))
}

fn hofstadter() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for q in [3.0, 4.0] {
        let gaps = model::bulk_gaps(&builtin("hofstadter", &[("q", q)]), model::default_nk(2)).len();
        ensure(gaps > 0, format!("q={q}: no gaps"))?;
        for g in 1..=gaps {
            let m = builtin("hofstadter", &[("q", q), ("gap", g as f64)]);
            let r = pairing::invariant(&m, &[14, 16, 18], &PairingOptions::default()).map_err(|e| format!("q={q} gap {g}: {e}"))?;
            ensure(r.stable, format!("q={q} gap {g}: unstable {:?}", r.values()))?;
            let v = r.value.unwrap();
            let ch = r.levels.last().and_then(|l| l.chern).ok_or("no Chern trace")?;
            let dev = (ch.value - v as f64).abs();
            worst = worst.max(dev);
            ensure(dev < CHERN_TOL, format!("q={q} gap {g}: chern {:.4} vs index {v}", ch.value))?;
            count += 1;
        }
    }
    Ok(format!("{count} gaps stable over L=14,16,18, max |chern-index| {worst:.4}"))
}

fn kane_mele() -> Result<String, String> {
    let mut out = Vec::new();
    for (label, params, want) in [("nontrivial", vec![], 1), ("trivial", vec![("lambda_so", 0.0)], 0)] {
        let m = builtin("kane_mele", &params);
        let r = pairing::invariant(&m, &[8, 10, 12], &PairingOptions::default()).map_err(|e| format!("{label}: {e}"))?;
        ensure(r.group == GroupTag::Z2, "group")?;
        for lv in &r.levels {
            ensure(lv.value == Some(want), format!("{label} L={}: value {:?}", lv.l, lv.value))?;
            ensure(lv.cross_check == Some(want), format!("{label} L={}: dim_C ker(P(X1+iX2)P) mod 2 = {:?}", lv.l, lv.cross_check))?;
        }
        out.push(format!("{label}={want}"));
    }
    Ok(format!("{} at L=8,10,12, both formulas agree", out.join(" ")))
}

fn golden() -> Value {
    serde_json::from_str(include_str!("../data/golden.json")).expect("golden.json")
}

/// Value recorded in the golden sweeps for `builtin` at `param = x`.
fn golden_value(g: &Value, builtin: &str, param: &str, x: f64) -> Option<i64> {
    g["sweeps"].as_array()?.iter().find(|s| s["args"][2] == builtin).and_then(|s| {
        s["result"]["points"].as_array()?.iter().find(|p| (p["params"][param].as_f64().unwrap_or(f64::NAN) - x).abs() < 1e-9)?["value"].as_i64()
    })
}

fn threed() -> Result<String, String> {
    let g = golden();
    let mut out = Vec::new();
    for (name, class, group) in [("threed_ct", CliffordClass::real(3, 0), GroupTag::Z), ("threed_t_only", CliffordClass::real(4, 0), GroupTag::Z2)] {
        let m = builtin(name, &[]);
        ensure(classify(&m.spec).unwrap() == class, format!("{name}: class {}", classify(&m.spec).unwrap()))?;
        ensure(abs_index_group(class.field, class.stable_class(), 3) == group, format!("{name}: group"))?;
        let ht = model::truncate(&m, 1).map_err(|e| e.to_string())?;
        let f = model::fermi_open(&ht, m.mu);
        let data = symmetry_class(&ht, &f, &m.ops).map_err(|e| format!("{name}: {e}"))?;
        let rep = verify_class(&data);
        ensure(rep.is_valid(), format!("{name}: verify_class {:?}", rep.relations.violations))?;
        let schedule = pairing::model_schedule(&m);
        let r = pairing::invariant(&m, &schedule, &PairingOptions::default()).map_err(|e| format!("{name}: {e}"))?;
        ensure(r.stable, format!("{name}: unstable {:?} over {schedule:?}", r.values()))?;
        let v = r.value.unwrap();
        ensure(group.contains(v), format!("{name}: {v} not in {group}"))?;
        let gold = golden_value(&g, name, "m", model::builtin_defaults(name).unwrap()[0].1);
        ensure(gold == Some(v), format!("{name}: {v} vs golden {gold:?}"))?;
        out.push(format!("{name} {class} {group}={v} over L={schedule:?}"));
    }
    Ok(out.join("; "))
}

fn random_classes() -> Result<String, String> {
    let mut n = 0;
    for spec in SymmetrySpec::all() {
        for seed in 0..RANDOM_DRAWS {
            let m = model::random_compatible(&spec, 1, 8, 0.2, 1000 + seed).map_err(|e| e.to_string())?;
            let ht = model::truncate(&m, 1).map_err(|e| e.to_string())?;
            let f = model::fermi(&ht, 0.0).map_err(|e| format!("{spec} seed {seed}: {e}"))?;
            let data = symmetry_class(&ht, &f, &m.ops).map_err(|e| format!("{spec} seed {seed}: {e}"))?;
            let rep = verify_class(&data);
            ensure(rep.is_valid(), format!("{spec} seed {seed}: {:?}", rep.relations.violations))?;
            ensure(
                stable_reduce(data.class) == stable_reduce(classify(&spec).unwrap()),
                format!("{spec}: constructed {} vs {}", data.class, classify(&spec).unwrap()),
            )?;
            n += 1;
        }
    }
    Ok(format!("{n} draws (10 types x {RANDOM_DRAWS}, 8x8 per site) verify"))
}

fn disorder() -> Result<String, String> {
    let cases: [(&str, Vec<(&str, f64)>, usize); 3] = [("hofstadter", vec![], 18), ("kane_mele", vec![], 10), ("threed_ct", vec![], 4)];
    let mut out = Vec::new();
    for (name, params, l) in cases {
        let clean = builtin(name, &params);
        let base = pairing::invariant(&clean, &[l], &PairingOptions::default()).map_err(|e| format!("{name}: {e}"))?;
        let v0 = base.value.ok_or(format!("{name}: clean value unresolved at L={l}"))?;
        ensure(v0 != 0, format!("{name}: clean value is trivial"))?;
        let gap = model::bulk_gap_at(&clean, clean.mu, model::default_nk(clean.d));
        let sigma = DISORDER_FRACTION * gap;
        for seed in 0..DISORDER_SEEDS {
            let m = model::add_disorder(&clean, sigma, seed, gap).map_err(|e| e.to_string())?;
            let r = pairing::invariant(&m, &[l], &PairingOptions::default()).map_err(|e| format!("{name} seed {seed}: {e}"))?;
            ensure(r.value == Some(v0), format!("{name} seed {seed}: {:?} vs clean {v0}", r.value))?;
        }
        out.push(format!("{name}={v0} (L={l}, sigma={sigma:.3})"));
    }
    Ok(format!("{} unchanged over {DISORDER_SEEDS} seeds", out.join(" ")))
}

fn zero_cells() -> Result<String, String> {
    let mut out = Vec::new();
    for spec in [SymmetrySpec::t(1), SymmetrySpec::chiral()] {
        let cl = classify(&spec).unwrap();
        ensure(abs_index_group(cl.field, cl.stable_class(), 2) == GroupTag::Zero, format!("{spec} d=2 is not a 0 cell"))?;
        let m = model::random_compatible(&spec, 2, 4, 0.3, 5).map_err(|e| e.to_string())?;
        let r = pairing::invariant(&m, &pairing::default_schedule(2), &PairingOptions::default()).map_err(|e| e.to_string())?;
        ensure(r.value == Some(0) && r.stable, format!("{spec}: {:?} stable={}", r.value, r.stable))?;
        out.push(format!("{spec} d=2 -> 0"));
    }
    Ok(out.join(", ") + " (stable)")
}

fn main() {
    let mut gate = Gate { failures: 0 };
    gate.run(1, "periodic table", Duration::from_secs(1), table);
    gate.run(2, "Clifford engine", Duration::from_secs(10), clifford_suite);
    gate.run(3, "Hofstadter index vs Chern trace", Duration::from_secs(120), hofstadter);
    gate.run(4, "Kane-Mele Z2", Duration::from_secs(180), kane_mele);
    gate.run(5, "3D examples", Duration::from_secs(300), threed);
    gate.run(6, "symmetry-class construction", Duration::from_secs(30), random_classes);
    gate.run(7, "disorder stability", Duration::from_secs(300), disorder);
    gate.run(8, "zero cells", Duration::from_secs(60), zero_cells);
    println!("acceptance: {} of 8 criteria failed", gate.failures);
    if gate.failures > 0 {
        std::process::exit(1);
    }
}
