mod common;

use common::CORPUS;
use tarski_qe::corpus::{corpus_run, entries, import, CorpusEntry, Expected, RunOptions};
use tarski_qe::classify::Quadrant;
use tarski_qe::sexp::{parse_document, parse_formula, print_formula, print_theorem};

#[test]
fn corpus_files_round_trip() {
    for (name, text) in CORPUS {
        let doc = parse_document(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        if let Some(t) = &doc.theorem {
            let printed = print_theorem(t, &doc.declarations);
            let again = parse_document(&printed).unwrap();
            assert_eq!(again.theorem.as_ref(), Some(t), "{name}");
            assert_eq!(print_theorem(again.theorem.as_ref().unwrap(), &again.declarations), printed);
        }
        for f in &doc.assertions {
            let printed = print_formula(f);
            assert_eq!(&parse_formula(&printed).unwrap(), f, "{name}");
        }
    }
}

#[test]
fn every_corpus_file_is_an_entry() {
    let names: Vec<String> = entries().into_iter().map(|e| e.name).collect();
    for (name, _) in CORPUS {
        assert!(names.iter().any(|n| n == name), "{name}");
    }
}

#[test]
fn import_reads_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in CORPUS {
        std::fs::write(dir.path().join(format!("{name}.sexp")), text).unwrap();
    }
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let imported = import(dir.path()).unwrap();
    assert_eq!(imported.len(), CORPUS.len());
    assert!(imported.windows(2).all(|w| w[0].name < w[1].name));

    std::fs::write(dir.path().join("broken.sexp"), "; expect: True\n(assert-theorem").unwrap();
    assert!(import(dir.path()).is_err());
}

#[test]
fn wrong_expectation_fails_by_name() {
    let mut es: Vec<CorpusEntry> = entries().into_iter().filter(|e| e.name == "hicks").collect();
    es[0].expected = Expected::Quadrant(Quadrant::Mixed);
    let report = corpus_run(&es, None, &RunOptions::default());
    assert!(!report.all_passed());
    assert_eq!(report.rows[0].name, "hicks");
    assert!(report.table().lines().any(|l| l.starts_with("hicks") && l.contains("FAIL")));
}
