use std::path::Path;

use datakit::corpus::{load_dataset, Format};
use datakit::{Grammar, GrammarConfig};

#[test]
fn readme_examples_reproduce_in_legacy_mode() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/scan_readme_examples.txt");
    let d = load_dataset(&path, Format::Scan).unwrap();
    assert_eq!(d.len(), 7);
    let g = Grammar::new(GrammarConfig::scan_legacy()).unwrap();
    for ex in &d {
        let cmd = g.parse(&ex.input).unwrap();
        assert_eq!(g.interpret(&cmd).unwrap(), ex.output, "{}", ex.input_text());
        assert_eq!(g.serialize(&cmd).unwrap(), ex.input);
    }
}

#[test]
fn legacy_mode_rejects_scan_star_only_commands() {
    let g = Grammar::new(GrammarConfig::scan_legacy()).unwrap();
    assert!(g.parse_str("walk and run and look").is_err());
    assert!(g.parse_str("xaa twice").is_err());
    assert!(g.parse_str("turn").is_err());
}
