use std::fs;
use std::path::{Path, PathBuf};

use chemkit_core::report::{run_manifest, PipelineManifest, StepStatus};
use chemkit_core::ModelCatalogue;

fn toy() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../toy")
}

#[test]
fn toy_manifest_runs_every_step() {
    let base = toy();
    let m = PipelineManifest::from_json(&fs::read_to_string(base.join("manifest.json")).unwrap(), &base).unwrap();
    let out = tempfile::tempdir().unwrap();
    let rec = run_manifest(&m, &base, out.path()).unwrap();
    for s in &rec.steps {
        assert_eq!(s.status, StepStatus::Ok, "{}", s.step_id);
        assert!(s.warnings.iter().all(|w| !w.starts_with("unused key")), "{}: {:?}", s.step_id, s.warnings);
    }

    let cat = ModelCatalogue::from_json(&fs::read_to_string(out.path().join("catalogue.json")).unwrap()).unwrap();
    assert_eq!(cat.instrument, "toy5d");
    assert_eq!(cat.identifier.as_deref(), Some("toy5d-mapping-catalogue"));
    let rmse: Vec<f64> = cat.models.iter().map(|e| e.performance.cv.rmse).collect();
    assert!(rmse.windows(2).all(|w| w[0] <= w[1]));

    let report = fs::read_to_string(out.path().join("catalogue_report.md")).unwrap();
    assert!(!report.contains("{{"));
    let qalys = fs::read_to_string(out.path().join("qalys.csv")).unwrap();
    assert!(qalys.starts_with("uid,u_start,u_end,days,qalys\n"));
    assert!(qalys.lines().count() > 1);
}
