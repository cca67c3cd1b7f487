use std::fs;
use std::path::Path;

use esda_core::lattice::{parse_lattice, DEFAULT_ID_PROPERTY};
use esda_core::pipeline::{run_file, Manifest, Prepared};
use esda_core::synthetic::{grid_geojson, write_demo_fixture};
use esda_core::{Error, ErrorCategory};

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

/// 3x3 grid, one LISA analysis on hurricane_risk, no points.
fn three_by_three(dir: &Path, feature: &str) {
    write(dir, "grid.geojson", &grid_geojson(3, 3, 1.0, 0.0, 0.0));
    let ids = parse_lattice(grid_geojson(3, 3, 1.0, 0.0, 0.0).as_bytes(), DEFAULT_ID_PROPERTY)
        .unwrap()
        .ids();
    let mut csv = String::from("region_id,hurricane_risk\n");
    for (k, id) in ids.iter().enumerate() {
        csv.push_str(&format!("{id},{}\n", [9, 8, 1, 7, 5, 2, 3, 1, 0][k]));
    }
    write(dir, "attrs.csv", &csv);
    write(
        dir,
        "run.toml",
        &format!(
            "lattice = \"grid.geojson\"\nseed = 7\n[[attributes]]\npath = \"attrs.csv\"\n\
             [[analysis]]\nname = \"h\"\nkind = \"lisa\"\nfeatures = [\"{feature}\"]\n"
        ),
    );
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn lisa_on_3x3_emits_five_files_of_nine_rows() {
    let tmp = tempfile::tempdir().unwrap();
    three_by_three(tmp.path(), "hurricane_risk");
    let summary = run_file(&tmp.path().join("run.toml")).unwrap();
    let files = listing(&summary.output_dir);
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        vec!["h_clusters.geojson", "h_global.csv", "h_lisa.csv", "imputation_audit.csv", "manifest.json"]
    );
    let lisa = String::from_utf8(files[2].1.clone()).unwrap();
    assert_eq!(lisa.lines().count(), 1 + 9);
    let geo: serde_json::Value = serde_json::from_slice(&files[0].1).unwrap();
    assert_eq!(geo["features"].as_array().unwrap().len(), 9);
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    write_demo_fixture(tmp.path()).unwrap();
    let config = tmp.path().join("run.toml");
    let first = listing(&run_file(&config).unwrap().output_dir);
    let second = listing(&run_file(&config).unwrap().output_dir);
    assert_eq!(first, second);
}

#[test]
fn missing_feature_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    three_by_three(tmp.path(), "flood_risk");
    let err = run_file(&tmp.path().join("run.toml")).unwrap_err();
    assert!(matches!(err.root(), Error::MissingFeature(f) if f == "flood_risk"));
    assert_eq!(err.category(), ErrorCategory::Input);
    assert_eq!(err.exit_code(), 2);
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn constant_feature_is_a_statistical_error() {
    let tmp = tempfile::tempdir().unwrap();
    three_by_three(tmp.path(), "hurricane_risk");
    let csv = fs::read_to_string(tmp.path().join("attrs.csv")).unwrap();
    let constant: String = csv
        .lines()
        .enumerate()
        .map(|(k, l)| if k == 0 { format!("{l}\n") } else { format!("{},4\n", l.split(',').next().unwrap()) })
        .collect();
    write(tmp.path(), "attrs.csv", &constant);
    let err = run_file(&tmp.path().join("run.toml")).unwrap_err();
    assert!(matches!(err.root(), Error::ZeroVariance));
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn failed_write_removes_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    three_by_three(tmp.path(), "hurricane_risk");
    // a directory where the audit file should go makes that write fail
    fs::create_dir_all(tmp.path().join("out/imputation_audit.csv")).unwrap();
    let err = run_file(&tmp.path().join("run.toml")).unwrap_err();
    assert_eq!(err.exit_code(), 4);
    let left: Vec<String> = fs::read_dir(tmp.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(left, vec!["imputation_audit.csv".to_string()]);
}

#[test]
fn config_hash_tracks_fields_and_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    three_by_three(tmp.path(), "hurricane_risk");
    let config = tmp.path().join("run.toml");
    let base = Prepared::load(&config).unwrap().config_hash();
    assert_eq!(Prepared::load(&config).unwrap().config_hash(), base);

    let text = fs::read_to_string(&config).unwrap();
    fs::write(&config, format!("# a comment\n{text}")).unwrap();
    assert_eq!(Prepared::load(&config).unwrap().config_hash(), base);

    fs::write(&config, text.replace("seed = 7", "seed = 8")).unwrap();
    assert_ne!(Prepared::load(&config).unwrap().config_hash(), base);
    fs::write(&config, &text).unwrap();

    let attrs = fs::read_to_string(tmp.path().join("attrs.csv")).unwrap();
    write(tmp.path(), "attrs.csv", &attrs.replacen(",9\n", ",10\n", 1));
    assert_ne!(Prepared::load(&config).unwrap().config_hash(), base);
}

#[test]
fn manifest_records_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    write_demo_fixture(tmp.path()).unwrap();
    let summary = run_file(&tmp.path().join("run.toml")).unwrap();
    let manifest: Manifest =
        serde_json::from_slice(&fs::read(summary.output_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest, summary.manifest);
    assert_eq!(manifest.seed, 42);
    assert_eq!(manifest.outputs.len(), summary.files.len() - 1);
    let inputs: Vec<&str> = manifest.inputs.iter().map(|d| d.path.as_str()).collect();
    assert_eq!(
        inputs,
        vec![
            "tracts.geojson",
            "tracts.csv",
            "county_outages.csv",
            "tract_county.csv",
            "facilities.csv",
            "weights.cfg"
        ]
    );
}

#[test]
fn demo_broadcast_and_imputation() {
    let tmp = tempfile::tempdir().unwrap();
    write_demo_fixture(tmp.path()).unwrap();
    let prepared = Prepared::load(&tmp.path().join("run.toml")).unwrap();
    let outages = prepared.table.feature("total_outages").unwrap();
    // county c00 covers the four tracts at the origin corner
    let idx = |id: &str| prepared.lattice.index_of(id).unwrap();
    let c00: Vec<Option<f64>> = ["r000c000", "r000c001", "r001c000", "r001c001"].iter().map(|id| outages[idx(id)]).collect();
    assert!(c00[0].is_some() && c00.iter().all(|v| *v == c00[0]));
    // county c22 has no record
    assert!(outages[idx("r004c004")].is_none());

    let computed = prepared.compute().unwrap();
    let filled = computed.table.feature("total_outages").unwrap();
    assert!(filled.iter().all(Option::is_some));
    let (_, audit) = computed.imputations.iter().find(|(f, _)| f == "total_outages").unwrap();
    assert_eq!(audit.len(), 4);
}

#[test]
fn island_is_undefined_in_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    // 2x2 block plus a detached square
    let mut geo = grid_geojson(2, 2, 1.0, 0.0, 0.0);
    geo = geo.replace(
        "\n]}",
        ",\n{\"type\":\"Feature\",\"properties\":{\"region_id\":\"island\",\"name\":\"far\"},\"geometry\":{\"type\":\"Polygon\",\"coordinates\":[[[5,5],[6,5],[6,6],[5,6],[5,5]]]}}\n]}",
    );
    write(tmp.path(), "grid.geojson", &geo);
    write(
        tmp.path(),
        "attrs.csv",
        "region_id,v\nr000c000,1\nr000c001,2\nr001c000,4\nr001c001,8\nisland,3\n",
    );
    write(
        tmp.path(),
        "run.toml",
        "lattice = \"grid.geojson\"\n[[attributes]]\npath = \"attrs.csv\"\n[[analysis]]\nname = \"v\"\nkind = \"lisa\"\nfeatures = [\"v\"]\n",
    );
    let summary = run_file(&tmp.path().join("run.toml")).unwrap();
    let lisa = fs::read_to_string(summary.output_dir.join("v_lisa.csv")).unwrap();
    assert!(lisa.ends_with("island,,,UNDEF\n"));
    let geo: serde_json::Value =
        serde_json::from_slice(&fs::read(summary.output_dir.join("v_clusters.geojson")).unwrap()).unwrap();
    let island = &geo["features"][4];
    assert!(island["properties"]["local_I"].is_null());
    assert_eq!(island["properties"]["cluster"], "UNDEF");
    assert_eq!(island["properties"]["name"], "far");
    assert_eq!(island["geometry"]["coordinates"][0][2], serde_json::json!([6, 6]));
}
