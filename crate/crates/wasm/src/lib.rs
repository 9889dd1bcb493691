//! wasm-bindgen surface for the static demo page in `www/`.
//!
//! Three calls: the periodic table, classification of a symmetry spec and
//! the invariant of a small model file. The `*_str` functions carry the
//! logic so they can be tested natively.

use tenfold::cli::{self, Format};
use tenfold::model::{self, ModelFile};
use tenfold::pairing::{self, PairingOptions};
use wasm_bindgen::prelude::*;

/// Largest truncated matrix the page will diagonalize.
pub const PAGE_MAX_DIM: usize = 1500;

pub fn table_str() -> String {
    cli::render_table(Format::Json)
}

pub fn classify_str(symmetry_json: &str) -> Result<String, String> {
    let sym: model::SymmetryFile = serde_json::from_str(symmetry_json).map_err(|e| e.to_string())?;
    let spec = sym.spec();
    let row = cli::class_row(&spec).map_err(|e| e.to_string())?;
    Ok(cli::class_line(&row))
}

pub fn invariant_str(model_json: &str) -> Result<String, String> {
    let file = ModelFile::from_json(model_json).map_err(|e| e.to_string())?;
    let m = model::build(&file).map_err(|e| e.to_string())?;
    let schedule = pairing::model_schedule(&m);
    let last = *schedule.last().expect("non-empty schedule");
    if m.truncate_dim(last) > PAGE_MAX_DIM {
        return Err(format!("box dimension {} at L={last} is too large for the page (limit {PAGE_MAX_DIM})", m.truncate_dim(last)));
    }
    let r = pairing::invariant(&m, &schedule, &PairingOptions::default()).map_err(|e| e.to_string())?;
    Ok(cli::render_invariant(&r, Format::Json))
}

#[wasm_bindgen]
pub fn periodic_table() -> String {
    table_str()
}

#[wasm_bindgen]
pub fn classify(symmetry_json: &str) -> Result<String, JsError> {
    classify_str(symmetry_json).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn invariant(model_json: &str) -> Result<String, JsError> {
    invariant_str(model_json).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_the_cli_table() {
        assert_eq!(table_str(), cli::GOLDEN_TABLE_JSON);
    }

    #[test]
    fn classify_line() {
        assert_eq!(classify_str(r#"{"T":-1}"#).unwrap(), "Cℓ_{4,0}; d=0:(2)Z d=1:0 d=2:Z2 d=3:Z2");
        assert!(classify_str(r#"{"T":3}"#).is_err());
    }

    #[test]
    fn ssh_invariant() {
        let js = include_str!("../../core/data/models/ssh.json");
        let v: serde_json::Value = serde_json::from_str(&invariant_str(js).unwrap()).unwrap();
        assert_eq!(v["stable"], true);
        assert_eq!(v["value"].as_i64().map(i64::abs), Some(1));
    }

    #[test]
    fn large_boxes_refused() {
        let js = r#"{"dimension":3,"internal_rank":4,"terms":[{"offset":[1,0,0],"matrix":[[[1,0],[0,0],[0,0],[0,0]],[[0,0],[1,0],[0,0],[0,0]],[[0,0],[0,0],[1,0],[0,0]],[[0,0],[0,0],[0,0],[1,0]]]}],"mu":5}"#;
        assert!(invariant_str(js).unwrap_err().contains("too large"));
    }
}
