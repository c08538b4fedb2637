use std::fs;
use std::path::Path;

use fedud::experiment::*;
use fedud::metrics::{auc, logloss, PredictionSet, Slice};
use fedud::trainer::Method;
use fedud::Error;

const SMALL: &str = r#"
[data]
n_val = 300
n_test = 300
split_seed = 5

[data.synthetic]
n_samples = 3000
aligned_fraction = 0.6
seed = 5

[model]
embedding_dim = 4
bottom_dims = [16, 8]
top_dims = [8]
rep_dims = [8, 8]

[training]
batch_size = 128
max_epochs = 2
seed = 3
"#;

fn small(method: Method) -> ExperimentConfig {
    let mut c = ExperimentConfig::from_toml(SMALL).unwrap();
    c.training.method = method;
    c
}

#[test]
fn unknown_keys_are_rejected_with_their_name() {
    let cases = [
        ("bogus = 1", "bogus"),
        ("[training]\nalpah = 0.5", "alpah"),
        ("[data.synthetic]\nn_sample = 10", "n_sample"),
        ("[model]\nrep_dim = [4]", "rep_dim"),
    ];
    for (text, key) in cases {
        match ExperimentConfig::from_toml(text) {
            Err(Error::Config(m)) => assert!(m.contains(key), "{m}"),
            other => panic!("{text}: {other:?}"),
        }
    }
    assert!(ExperimentConfig::from_toml("").is_ok());
    assert!(matches!(ExperimentConfig::from_toml("[training]\nalpha = \"x\""), Err(Error::Config(_))));
}

#[test]
fn load_reports_the_file_path() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    fs::write(&p, "[eval]\nseeds = []\n").unwrap();
    match ExperimentConfig::load(&p) {
        Err(Error::Config(m)) => assert!(m.contains("bad.toml") && m.contains("eval.seeds"), "{m}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn gen_data_is_deterministic_and_counts_aligned_keys() {
    let mut cfg = small(Method::Fedud);
    cfg.data.synthetic.n_samples = 10_000;
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let m = cmd_gen_data(&cfg, &a).unwrap();
    cmd_gen_data(&cfg, &b).unwrap();
    assert_eq!(m.n_aligned, 6000);
    assert_eq!(m.n_host_rows, 10_000);
    for f in ["host.csv", "guest.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let back: Manifest = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(back, m);
}

#[test]
fn generated_csv_files_load_into_the_same_split() {
    let syn_cfg = small(Method::Fedud);
    let dir = tempfile::tempdir().unwrap();
    cmd_gen_data(&syn_cfg, dir.path()).unwrap();
    let s = &syn_cfg.data.synthetic;
    let text = format!(
        "{SMALL}\n[data.host]\npath = \"host.csv\"\nslots = [{}]\nvocab_size = {v}\n\n[data.guest]\npath = \"guest.csv\"\nslots = [{}]\nvocab_size = {v}\n",
        (0..s.host_slots).map(|i| format!("\"h{i}\"")).collect::<Vec<_>>().join(", "),
        (0..s.guest_slots).map(|i| format!("\"g{i}\"")).collect::<Vec<_>>().join(", "),
        v = s.vocab_size,
    )
    .replace("[data]\n", "[data]\nsource = \"csv\"\n");
    let cfg_path = dir.path().join("csv.toml");
    fs::write(&cfg_path, text).unwrap();
    let csv_cfg = ExperimentConfig::load(&cfg_path).unwrap();

    let a = load_split(&syn_cfg).unwrap();
    let b = load_split(&csv_cfg).unwrap();
    for (pa, pb) in [(&a.train, &b.train), (&a.val, &b.val), (&a.test, &b.test)] {
        assert_eq!(pa.aligned.keys(), pb.aligned.keys());
        assert_eq!(pa.unaligned.keys(), pb.unaligned.keys());
        let all = |n: usize| (0..n).collect::<Vec<_>>();
        assert_eq!(pa.aligned.batch(&all(pa.aligned.len())), pb.aligned.batch(&all(pb.aligned.len())));
        assert_eq!(pa.unaligned.batch(&all(pa.unaligned.len())), pb.unaligned.batch(&all(pb.unaligned.len())));
    }
}

fn log_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split('\t').map(str::to_owned).collect())
        .collect()
}

#[test]
fn train_logs_record_phases_losses_and_traffic() {
    let dir = tempfile::tempdir().unwrap();
    let local = cmd_train(&small(Method::LocalDnn), &dir.path().join("local")).unwrap();
    let rows = log_rows(&local.log);
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[0] == "single" && r[6] == "0" && r[7] == "0" && r[8] == "0"));
    assert!(fs::read_to_string(&local.transcript).unwrap().is_empty());

    let fed = cmd_train(&small(Method::Fedud), &dir.path().join("fedud")).unwrap();
    assert_eq!(fed.checkpoints.len(), 2);
    assert!(fed.final_checkpoint.ends_with("step2.ckpt"));
    let header = fs::read_to_string(&fed.log).unwrap();
    assert!(header.starts_with("# method=fedud init_seed=3 shuffle_seed=3 config_digest="));
    let rows = log_rows(&fed.log);
    let step1: Vec<_> = rows.iter().filter(|r| r[0] == "step1").collect();
    let step2: Vec<_> = rows.iter().filter(|r| r[0] == "step2").collect();
    assert!(!step1.is_empty() && !step2.is_empty());
    assert!(step1.iter().all(|r| r[2] != "-" && r[3] != "-" && r[4] == "-"));
    assert!(step2.iter().all(|r| r[4] != "-" && r[3] == "-"));
    assert!(rows.iter().all(|r| r[6].parse::<u64>().unwrap() > 0));
}

#[test]
fn zero_alpha_step1_validation_matches_the_split_network() {
    let dir = tempfile::tempdir().unwrap();
    let mut fed = small(Method::Fedud);
    fed.training.alpha = 0.0;
    let a = cmd_train(&fed, &dir.path().join("a")).unwrap();
    let b = cmd_train(&small(Method::Fedsplitnn), &dir.path().join("b")).unwrap();
    let val = |rows: Vec<Vec<String>>, phase: &str| -> Vec<String> {
        rows.into_iter().filter(|r| r[0] == phase).map(|r| r[5].clone()).collect()
    };
    assert_eq!(val(log_rows(&a.log), "step1"), val(log_rows(&b.log), "single"));
}

#[test]
fn eval_report_matches_the_emitted_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(Method::Fedud);
    let art = cmd_train(&cfg, &dir.path().join("train")).unwrap();
    let r1 = cmd_eval(&cfg, &art.final_checkpoint, &dir.path().join("e1")).unwrap();
    let r2 = cmd_eval(&cfg, &art.final_checkpoint, &dir.path().join("e2")).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(
        fs::read(dir.path().join("e1/metrics.json")).unwrap(),
        fs::read(dir.path().join("e2/metrics.json")).unwrap()
    );
    assert_eq!(r1.method, "fedud");
    assert_eq!(r1.config_digest, cfg.digest());
    let s = &r1.slices;
    assert_eq!(s.overall.n, 300);
    assert_eq!(s.aligned.n + s.unaligned.n, s.overall.n);

    let preds = PredictionSet::read_csv(&dir.path().join("e1/predictions.csv")).unwrap();
    let check = |rows: Vec<(f64, f64)>, want_auc: Option<f64>, want_ll: Option<f64>| {
        let (sc, y): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
        assert_eq!(auc(&sc, &y).ok(), want_auc);
        assert_eq!(logloss(&sc, &y).ok(), want_ll);
    };
    check(preds.rows.iter().map(|p| (p.score, p.label)).collect(), s.overall.auc, s.overall.logloss);
    check(preds.slice(Slice::Aligned).map(|p| (p.score, p.label)).collect(), s.aligned.auc, s.aligned.logloss);
    check(preds.slice(Slice::Unaligned).map(|p| (p.score, p.label)).collect(), s.unaligned.auc, s.unaligned.logloss);
}

#[test]
fn eval_rejects_an_incompatible_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let art = cmd_train(&small(Method::Fedsplitnn), &dir.path().join("t")).unwrap();
    let out = dir.path().join("e");
    assert!(matches!(cmd_eval(&small(Method::Fedud), &art.final_checkpoint, &out), Err(Error::Checkpoint(_))));
    let mut wider = small(Method::Fedsplitnn);
    wider.model.top_dims = vec![12];
    assert!(matches!(cmd_eval(&wider, &art.final_checkpoint, &out), Err(Error::Checkpoint(_))));
    let mut more_slots = small(Method::Fedsplitnn);
    more_slots.data.synthetic.guest_slots += 1;
    assert!(matches!(cmd_eval(&more_slots, &art.final_checkpoint, &out), Err(Error::Checkpoint(_))));
}

#[test]
fn single_value_single_seed_sweep_has_one_row_per_method_and_slice() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(Method::Fedud);
    let rows = cmd_sweep(&cfg, Some(SweepAxis::Alpha), Some(vec!["1".into()]), Some(vec![7]), dir.path()).unwrap();
    assert_eq!(rows.len(), Method::ALL.len() * 3);
    for m in Method::ALL {
        for s in ["overall", "aligned", "unaligned"] {
            assert_eq!(rows.iter().filter(|r| r.method == m.as_str() && r.slice == s).count(), 1);
        }
    }
    assert!(rows.iter().all(|r| r.error.is_none() && r.seed == 7 && !r.config_digest.is_empty()));
    let table = fs::read_to_string(dir.path().join("sweep_alpha.csv")).unwrap();
    assert!(table.starts_with("axis,axis_value,seed,method,slice,auc,logloss,n,config_digest,error"));
    assert_eq!(table.lines().count(), rows.len() + 1);
}

#[test]
fn failing_sweep_cells_are_recorded_and_the_rest_continue() {
    let cfg = small(Method::Fedud);
    let rows = run_sweep(&cfg, SweepAxis::Beta, &["-1".into(), "0.5".into()], &[1], &[Method::Fedud]).unwrap();
    assert_eq!(rows.len(), 1 + 3);
    assert!(rows[0].error.as_deref().unwrap().contains("-1"));
    assert!(rows[1..].iter().all(|r| r.error.is_none() && r.auc.is_some()));
}

#[test]
fn no_unaligned_samples_behaves_like_zero_beta() {
    let cfg = small(Method::Fedud);
    let a = run_sweep(&cfg, SweepAxis::UnalignedSamples, &["0".into()], &[2], &[Method::Fedud]).unwrap();
    let b = run_sweep(&cfg, SweepAxis::Beta, &["0".into()], &[2], &[Method::Fedud]).unwrap();
    let aucs = |r: &[SweepRow]| r.iter().map(|x| (x.slice.clone(), x.auc, x.logloss)).collect::<Vec<_>>();
    assert_eq!(aucs(&a), aucs(&b));
}

#[test]
fn unaligned_counts_parse_as_percentages_or_absolutes() {
    assert_eq!(parse_count("25%", 1000).unwrap(), 250);
    assert_eq!(parse_count("100%", 7).unwrap(), 7);
    assert_eq!(parse_count("0", 7).unwrap(), 0);
    assert_eq!(parse_count("5000", 7).unwrap(), 7);
    assert!(parse_count("150%", 7).is_err());
    assert!(parse_count("x", 7).is_err());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n > 0);
}
