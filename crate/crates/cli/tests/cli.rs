use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cvekit_core::data_model::labels_to_string;
use cvekit_core::meshvol::shapes::unit_cube;

fn cvekit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvekit"))
        .args(args)
        .env_remove("CVE_WORKERS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: &str = "frames.train=3\nframes.val=2\nframes.test=6\npool.train=6\npool.val=2\npool.test=4\npersons.min=2\npersons.max=8\n";

fn small_dataset(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("scene.cfg");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.join("ds");
    let r = cvekit(&["gen", "--config", p(&cfg), "--seed", "5", "--out", p(&out)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    out
}

#[test]
fn help_exits_zero_everywhere() {
    assert_eq!(code(&cvekit(&["--help"])), 0);
    for sub in ["gen", "label", "maps", "eval", "stats", "sample"] {
        assert_eq!(code(&cvekit(&[sub, "--help"])), 0, "{sub}");
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&cvekit(&["--no-such-flag"])), 2);
    assert_eq!(code(&cvekit(&["gen", "--out", "x", "--bogus"])), 2);
    assert_eq!(code(&cvekit(&[])), 2);
}

#[test]
fn label_unit_cube_and_open_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let cube = unit_cube();
    let obj = dir.path().join("cube.obj");
    let labels = dir.path().join("cube.labels");
    cube.write_obj(&obj).unwrap();
    fs::write(&labels, labels_to_string(&vec![1; cube.vertices.len()])).unwrap();
    let r = cvekit(&["label", "--mesh", p(&obj), "--labels", p(&labels)]);
    assert_eq!(code(&r), 0);
    let text = stdout(&r);
    assert!(text.starts_with("part_id,name,volume_dm3\n"));
    let total: f64 = text.lines().last().unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!((total - 1000.0).abs() < 1e-9, "{text}");

    let mut open = cube.clone();
    open.faces.pop();
    open.write_obj(&obj).unwrap();
    let r = cvekit(&["label", "--mesh", p(&obj), "--labels", p(&labels)]);
    assert_eq!(code(&r), 4);
    assert!(String::from_utf8_lossy(&r.stderr).contains("offending edges"));
}

#[test]
fn dumped_humanoid_labels_match_analytic_parts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scene.cfg");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("ds");
    assert_eq!(code(&cvekit(&["gen", "--config", p(&cfg), "--out", p(&out), "--dump-meshes", "2"])), 0);
    for id in ["c0000", "c0001"] {
        let meshes = out.join("meshes");
        let r = cvekit(&[
            "label",
            "--mesh",
            p(&meshes.join(format!("{id}.obj"))),
            "--labels",
            p(&meshes.join(format!("{id}.labels"))),
        ]);
        assert_eq!(code(&r), 0);
        let expected = fs::read_to_string(meshes.join(format!("{id}.parts.csv"))).unwrap();
        for (got, want) in stdout(&r).lines().zip(expected.lines()).skip(1) {
            let g: f64 = got.rsplit(',').next().unwrap().parse().unwrap();
            let w: f64 = want.rsplit(',').next().unwrap().parse().unwrap();
            assert!((g - w).abs() <= 5e-3 * w, "{got} vs {want}");
        }
    }
}

#[test]
fn gen_is_repeatable_and_reports_failures() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_dataset(&dir.path().join("a").tap_mkdir());
    let b = small_dataset(&dir.path().join("b").tap_mkdir());
    for name in ["manifest.txt", "train.jsonl", "val.jsonl", "test.jsonl"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let manifest = fs::read_to_string(a.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed=5") && manifest.contains("config_sha256="));

    let empty = dir.path().join("empty.cfg");
    fs::write(&empty, "persons.min=0\npersons.max=0\nframes.train=2\nframes.val=1\nframes.test=1\n").unwrap();
    let r = cvekit(&["gen", "--config", p(&empty), "--out", p(&dir.path().join("e"))]);
    assert_eq!(code(&r), 0);
    let train = fs::read_to_string(dir.path().join("e/train.jsonl")).unwrap();
    assert_eq!(train.lines().count(), 2);
    assert!(train.contains("\"persons\":[]"));

    let crowded = dir.path().join("crowded.cfg");
    fs::write(&crowded, "persons.min=60\npersons.max=60\narea.x_min=0\narea.x_max=1\narea.y_min=8\narea.y_max=9\nplacement_retries=10\n").unwrap();
    assert_eq!(code(&cvekit(&["gen", "--config", p(&crowded), "--out", p(&dir.path().join("c"))])), 3);

    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "persons.min=9\npersons.max=2\n").unwrap();
    assert_eq!(code(&cvekit(&["gen", "--config", p(&bad), "--out", p(&dir.path().join("d"))])), 2);
}

trait TapMkdir {
    fn tap_mkdir(self) -> Self;
}

impl TapMkdir for std::path::PathBuf {
    fn tap_mkdir(self) -> Self {
        fs::create_dir_all(&self).unwrap();
        self
    }
}

#[test]
fn maps_and_eval_protocols() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_dataset(dir.path());
    let test = ds.join("test.jsonl");
    assert_eq!(code(&cvekit(&["maps", "--annotations", p(&dir.path().join("nope.jsonl")), "--out", "m"])), 2);

    let whole = dir.path().join("whole");
    let parts = dir.path().join("parts");
    let exact = dir.path().join("exact");
    assert_eq!(code(&cvekit(&["maps", "--annotations", p(&test), "--out", p(&whole)])), 0);
    assert_eq!(code(&cvekit(&["maps", "--annotations", p(&test), "--out", p(&parts), "--per-part"])), 0);
    assert_eq!(code(&cvekit(&["maps", "--annotations", p(&test), "--out", p(&exact), "--sigma", "0"])), 0);
    let sums = |d: &Path| -> Vec<f64> {
        fs::read_to_string(d.join("conservation.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
            .collect()
    };
    for (a, b) in sums(&whole).iter().zip(sums(&parts)) {
        assert!((a - b).abs() <= 1e-6 * a);
    }

    let full = dir.path().join("full");
    assert_eq!(code(&cvekit(&["eval", "--gt", p(&test), "--preds", p(&whole), "--out", p(&full)])), 0);
    assert!(fs::read_to_string(full.join("report.csv")).unwrap().starts_with("metric,value,k\nmae,"));

    let sc = dir.path().join("scatter");
    let r = cvekit(&["eval", "--gt", p(&test), "--baseline", "oracular", "--protocol", "scatter", "--out", p(&sc)]);
    assert_eq!(code(&r), 0);
    let svg = fs::read_to_string(sc.join("scatter.svg")).unwrap();
    let frames = fs::read_to_string(&test).unwrap().lines().count();
    assert_eq!(svg.matches("<circle").count(), frames);

    let dec = dir.path().join("dec");
    let r = cvekit(&["eval", "--gt", p(&test), "--preds", p(&exact), "--protocol", "decoupling", "--out", p(&dec)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let report = fs::read_to_string(dec.join("report.csv")).unwrap();
    // Maps are stored as binary32, so exact volumes come back to within f32 rounding.
    let ppmae: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("ppmae,"))
        .and_then(|rest| rest.split(',').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(ppmae <= 1e-4, "{report}");
    assert!(report.lines().any(|l| l.starts_with("misses,0")), "{report}");

    let bins = dir.path().join("bins");
    let r = cvekit(&["eval", "--gt", p(&test), "--baseline", "oracular", "--protocol", "bins", "--edges", "1,4,8,inf", "--out", p(&bins)]);
    assert_eq!(code(&r), 0);
    assert!(bins.join("bins.csv").exists() && bins.join("bins.svg").exists());

    let missing = dir.path().join("missing.csv");
    fs::write(&missing, "frame_id,V_pred_dm3\ntest_000000,10\n").unwrap();
    let r = cvekit(&["eval", "--gt", p(&test), "--preds", p(&missing), "--out", p(&dir.path().join("x"))]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("test_000001"));
}

#[test]
fn stats_and_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_dataset(dir.path());
    let r = cvekit(&["stats", "--annotations", p(&ds.join("train.jsonl"))]);
    assert_eq!(code(&r), 0);
    let text = stdout(&r);
    let vbar: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("mean_person_volume_dm3,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!((40.0..=110.0).contains(&vbar), "{vbar}");

    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    assert_eq!(code(&cvekit(&["stats", "--annotations", p(&empty)])), 2);

    let before = dir.path().join("before.csv");
    let after = dir.path().join("after.csv");
    assert_eq!(code(&cvekit(&["sample", "--n", "4000", "--seed", "1", "--narrow", "5", "--out", p(&before)])), 0);
    assert_eq!(
        code(&cvekit(&["sample", "--n", "4000", "--seed", "1", "--narrow", "5", "--rescale", "--out", p(&after)])),
        0
    );
    let r = cvekit(&["stats", "--samples", p(&before), "--after", p(&after)]);
    assert_eq!(code(&r), 0);
    let rows: Vec<String> = stdout(&r).lines().skip(1).map(String::from).collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        let pct: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!(pct < 0.0, "{row}");
    }
}

#[test]
fn worker_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scene.cfg");
    fs::write(&cfg, SMALL).unwrap();
    let mut outputs = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.path().join(format!("w{workers}"));
        assert_eq!(code(&cvekit(&["--workers", workers, "gen", "--config", p(&cfg), "--out", p(&out)])), 0);
        let maps = out.join("maps");
        assert_eq!(
            code(&cvekit(&["--workers", workers, "maps", "--annotations", p(&out.join("train.jsonl")), "--out", p(&maps)])),
            0
        );
        let mut bytes = Vec::new();
        for name in ["train.jsonl", "val.jsonl", "test.jsonl", "manifest.txt", "maps/conservation.csv", "maps/train_000000.vdm"] {
            bytes.push(fs::read(out.join(name)).unwrap());
        }
        outputs.push(bytes);
    }
    assert_eq!(outputs[0], outputs[1]);
}
