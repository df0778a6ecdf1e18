use std::fs;

use abundancy_core::sieve::{
    load_table, save_table, sidecar_path, sieve_b, SieveConfig, SieveError,
};

fn saved(ell: u32, nmax: u64) -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(format!("b{ell}.csv"));
    save_table(&sieve_b(ell, nmax, &SieveConfig::default()).unwrap(), &path).unwrap();
    (dir, path)
}

#[test]
fn round_trip() {
    let table = sieve_b(2, 1000, &SieveConfig::default()).unwrap();
    let (_dir, path) = saved(2, 1000);
    assert_eq!(load_table(&path, Some(2)).unwrap(), table);
    assert_eq!(load_table(&path, None).unwrap(), table);
    assert!(sidecar_path(&path).exists());
}

#[test]
fn big_values_round_trip() {
    let table = sieve_b(30, 64, &SieveConfig::default()).unwrap();
    assert!(!table.is_fixed_width());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b30.csv");
    save_table(&table, &path).unwrap();
    assert_eq!(load_table(&path, Some(30)).unwrap(), table);
}

#[test]
fn files_are_byte_identical_across_saves() {
    let (_a, pa) = saved(3, 500);
    let (_b, pb) = saved(3, 500);
    assert_eq!(fs::read(&pa).unwrap(), fs::read(&pb).unwrap());
    assert_eq!(
        fs::read(sidecar_path(&pa)).unwrap(),
        fs::read(sidecar_path(&pb)).unwrap()
    );
    let csv = fs::read_to_string(&pa).unwrap();
    assert!(csv.starts_with("n,value\n1,1\n"));
    assert!(csv.ends_with('\n') && !csv.lines().any(|l| l.ends_with(' ')));
}

#[test]
fn truncated_file_fails_checksum() {
    let (_dir, path) = saved(2, 1000);
    let data = fs::read(&path).unwrap();
    fs::write(&path, &data[..data.len() / 2]).unwrap();
    assert!(matches!(
        load_table(&path, Some(2)),
        Err(SieveError::ChecksumMismatch { .. })
    ));
}

#[test]
fn wrong_ell_is_rejected() {
    let (_dir, path) = saved(3, 100);
    assert!(matches!(
        load_table(&path, Some(2)),
        Err(SieveError::MetadataMismatch { field: "ell", .. })
    ));
}

#[test]
fn version_and_sidecar_problems() {
    let (_dir, path) = saved(2, 50);
    let side = sidecar_path(&path);
    let meta = fs::read_to_string(&side).unwrap();
    fs::write(
        &side,
        meta.replace("\"format_version\": 1", "\"format_version\": 7"),
    )
    .unwrap();
    assert!(matches!(
        load_table(&path, Some(2)),
        Err(SieveError::VersionMismatch { .. })
    ));
    fs::write(&side, "{").unwrap();
    assert!(matches!(
        load_table(&path, Some(2)),
        Err(SieveError::Json { .. })
    ));
    fs::remove_file(&side).unwrap();
    assert!(matches!(
        load_table(&path, Some(2)),
        Err(SieveError::Io { .. })
    ));
}

#[test]
fn tampered_rows_are_rejected() {
    let (_dir, path) = saved(2, 20);
    let csv = fs::read_to_string(&path).unwrap();
    fs::write(&path, csv.replace("6,12\n", "6,13\n")).unwrap();
    assert!(load_table(&path, Some(2)).is_err());
}
