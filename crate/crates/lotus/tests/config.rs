use std::fs;

use lotus::config::{Overrides, RunConfig};

#[test]
fn defaults_validate() {
    let cfg = RunConfig::default();
    cfg.validate().unwrap();
    assert_eq!(cfg.gw_rank, 10);
    assert_eq!(cfg.rope, 0.01);
}

#[test]
fn file_is_read_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    fs::write(&path, "# tuning\nbudget = 7\ngw_rank=4  # small\nrope = 0.05\n").unwrap();
    let flags = Overrides {
        budget: Some(9),
        ..Overrides::default()
    };
    let cfg = RunConfig::resolve(Some(&path), &flags).unwrap();
    assert_eq!(cfg.budget, 9);
    assert_eq!(cfg.gw_rank, 4);
    assert_eq!(cfg.rope, 0.05);
}

#[test]
fn unknown_keys_and_bad_values_fail() {
    let mut cfg = RunConfig::default();
    assert!(cfg.apply_text("colour = red").is_err());
    assert!(cfg.apply_text("budget = many").is_err());
    assert!(cfg.apply_text("budget").is_err());

    for bad in ["rope = 0.6", "budget = 0", "gw_eps = 0", "gw_rank = 1"] {
        let mut cfg = RunConfig::default();
        cfg.apply_text(bad).unwrap();
        assert!(cfg.validate().is_err(), "{bad}");
    }
}
