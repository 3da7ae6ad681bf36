use std::fs;
use std::path::PathBuf;

use beacon_core::catalog::{load_catalog, stats};
use beacon_core::error::CatalogError;
use beacon_core::r3::{parse_recipe, FoodRole};

fn shipped() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/recipes")
}

fn doc(name: &str, role: &str) -> String {
    format!(r#"{{"recipe_name": "{name}", "food_role": ["{role}"]}}"#)
}

#[test]
fn loads_in_file_name_order() {
    let dir = tempfile::tempdir().unwrap();
    for (i, name) in ["b", "a", "c", "e", "d", "f", "h", "g", "j", "i"].iter().enumerate() {
        fs::write(dir.path().join(format!("{name}.json")), doc(&format!("R {name} {i}"), "Side")).unwrap();
    }
    fs::write(dir.path().join("notes.txt"), "not a recipe").unwrap();
    let c = load_catalog(dir.path()).unwrap();
    assert_eq!(c.len(), 10);
    let names: Vec<&str> = c.recipes().iter().map(|r| &r.recipe_name[..3]).collect();
    assert_eq!(names, ["R a", "R b", "R c", "R d", "R e", "R f", "R g", "R h", "R i", "R j"]);
}

#[test]
fn empty_directory_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_catalog(dir.path()).unwrap_err();
    assert!(matches!(err, CatalogError::Empty(_)));
    assert!(err.to_string().contains("empty catalog"));
}

#[test]
fn one_bad_file_aborts_and_is_named() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.json"), doc("A", "Side")).unwrap();
    fs::write(dir.path().join("b.json"), r#"{"recipe_name": "B", "food_role": []}"#).unwrap();
    fs::write(dir.path().join("c.json"), doc("C", "Dessert")).unwrap();
    match load_catalog(dir.path()).unwrap_err() {
        CatalogError::Recipe { file, source } => {
            assert!(file.ends_with("b.json"));
            assert_eq!(source.path(), Some("food_role"));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn shipped_catalog_table_rows() {
    let c = load_catalog(shipped()).unwrap();
    assert!(c.len() >= 50);
    let rows = stats(&c);
    let row = |name: &str| rows.iter().find(|r| r.category == name).unwrap().clone();
    let tb = row("Taco Bell");
    assert_eq!((tb.pct_nuts, tb.pct_meat, tb.pct_dairy, tb.total), (0.0, 60.0, 100.0, 10));
    let soul = row("Soul Food");
    assert_eq!((soul.pct_nuts, soul.pct_meat, soul.pct_dairy, soul.total), (0.0, 0.0, 0.0, 2));
    let mcd = row("McDonald's");
    assert_eq!((mcd.pct_nuts, mcd.pct_meat, mcd.pct_dairy, mcd.total), (9.1, 63.6, 90.9, 11));
    assert_eq!(row("all").total, c.len());
}

#[test]
fn shipped_documents_are_canonical() {
    for entry in fs::read_dir(shipped()).unwrap() {
        let path = entry.unwrap().path();
        let raw = fs::read_to_string(&path).unwrap();
        let r = parse_recipe(&raw).unwrap();
        assert_eq!(r.to_canonical_json(), raw, "{}", path.display());
        assert_eq!(parse_recipe(&r.to_canonical_json()).unwrap(), r);
    }
}

#[test]
fn every_role_is_available() {
    let c = load_catalog(shipped()).unwrap();
    for role in FoodRole::ALL {
        assert!(!c.eligible(role).is_empty(), "{role}");
    }
    let total: usize = FoodRole::ALL.iter().map(|&r| c.eligible(r).len()).sum();
    let multi = c.recipes().iter().any(|r| r.roles().len() > 1);
    assert!(total >= c.len());
    assert_eq!(total == c.len(), !multi);
}

#[test]
fn schema_doc_lists_every_serialized_key() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/r3-schema.json");
    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let props = schema["properties"].as_object().unwrap();
    let cat = load_catalog(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/recipes")).unwrap();
    for r in cat.recipes() {
        let doc = serde_json::to_value(r).unwrap();
        for key in doc.as_object().unwrap().keys() {
            assert!(props.contains_key(key), "schema lacks `{key}`");
        }
    }
    for req in schema["required"].as_array().unwrap() {
        assert!(props.contains_key(req.as_str().unwrap()));
    }
}
