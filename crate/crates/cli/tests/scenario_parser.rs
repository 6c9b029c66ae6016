use std::path::{Path, PathBuf};

use oqho_cli::scenario::{Driver, ModelSource, Overrides, Scenario, Task};

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn parse(text: &str) -> Result<Scenario, String> {
    Scenario::parse(text, "t", &scenarios_dir()).map_err(|e| e.0)
}

const DAMPED: &str = r#"
theta = [[0.0, 1.0], [-1.0, 0.0]]
energy = [[0.5, 0.0], [0.0, 0.5]]
coupling = [[0.7, 0.0], [0.0, 0.7]]
"#;

fn with_model(body: &str) -> String {
    format!("{body}\n{DAMPED}")
}

fn err_of(text: &str) -> String {
    parse(text).expect_err("schema error expected")
}

#[test]
fn bundled_scenarios_parse() {
    let mut count = 0;
    for entry in std::fs::read_dir(scenarios_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 6);
}

#[test]
fn defaults_and_inline_model() {
    let sc = parse(&with_model("task = \"forward\"\ndriver = \"zero\"")).unwrap();
    assert_eq!(sc.task, Task::Forward);
    assert_eq!((sc.horizon, sc.steps, sc.seed, sc.refinement_levels), (1.0, 16, 0, 1));
    assert_eq!(sc.driver, Driver::Zero);
    assert!(matches!(sc.model, ModelSource::EnergyCoupling { .. }));
    assert_eq!(sc.output_dir, PathBuf::from("out"));
}

#[test]
fn refinement_levels_double_the_steps() {
    let sc = parse(&with_model("task = \"forward\"\ndriver = \"zero\"\nsteps = 5\nrefinement_levels = 4")).unwrap();
    assert_eq!(sc.level_steps(), vec![5, 10, 20, 40]);
}

#[test]
fn unknown_keys_are_rejected() {
    let e = err_of(&with_model("task = \"forward\"\ndriver = \"zero\"\nstep = 4"));
    assert!(e.contains("step"), "{e}");
}

#[test]
fn task_is_required_and_closed() {
    assert!(err_of(DAMPED).contains("task"));
    assert!(err_of(&with_model("task = \"simulate\"")).contains("simulate"));
}

#[test]
fn exactly_one_model_source() {
    assert!(err_of("task = \"oracle\"").contains("exactly one"));
    let both = with_model("task = \"oracle\"\nrandom_model = [2, 2]");
    assert!(err_of(&both).contains("exactly one"));
    let partial = "task = \"oracle\"\ntheta = [[0.0, 1.0], [-1.0, 0.0]]\nenergy = [[1.0, 0.0], [0.0, 1.0]]";
    assert!(err_of(partial).contains("coupling"));
    let mixed = format!("{}\ndrift = [[-1.0, 0.0], [0.0, -1.0]]", with_model("task = \"oracle\""));
    assert!(parse(&mixed).is_err());
}

#[test]
fn matrix_literals_are_checked() {
    let ragged = "task = \"oracle\"\ntheta = [[0.0, 1.0], [-1.0]]\nenergy = [[1.0]]\ncoupling = [[1.0]]";
    assert!(err_of(ragged).contains("row 1"));
    let empty = "task = \"oracle\"\ntheta = []\nenergy = [[1.0]]\ncoupling = [[1.0]]";
    assert!(err_of(empty).contains("nonempty"));
    let e = err_of(&with_model("task = \"spde\"\npi = [[1.0, 0.0, 0.0]]"));
    assert!(e.contains("pi"), "{e}");
    let odd = "task = \"oracle\"\ntheta = [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]\nenergy = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]\ncoupling = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]";
    assert!(err_of(odd).contains("even"));
    let wrong_coupling = "task = \"oracle\"\ntheta = [[0.0, 1.0], [-1.0, 0.0]]\nenergy = [[1.0, 0.0], [0.0, 1.0]]\ncoupling = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]";
    assert!(err_of(wrong_coupling).contains("coupling"));
    assert!(err_of("task = \"oracle\"\nrandom_model = [3, 2]").contains("even"));
}

#[test]
fn task_requirements() {
    assert!(err_of(&with_model("task = \"spde\"")).contains("requires `pi`"));
    assert!(err_of(&with_model("task = \"forward\"")).contains("requires `pi`"));
    assert!(err_of(&with_model("task = \"inverse\"\ndriver = \"atomic\"\npi = [[1.0, 0.0], [0.0, 1.0]]")).contains("lebesgue"));
    assert!(err_of(&with_model("task = \"spde\"\ndriver = \"zero\"\npi = [[1.0, 0.0], [0.0, 1.0]]")).contains("atomic"));
    // inverse defaults to the Lebesgue driver
    let sc = parse(&with_model("task = \"inverse\"\npi = [[1.0, 0.0], [0.0, 1.0]]")).unwrap();
    assert_eq!(sc.driver, Driver::Lebesgue);
}

#[test]
fn scalar_ranges() {
    for bad in ["horizon = 0.0", "horizon = -1.0", "steps = 0", "refinement_levels = 0", "tolerance = 0.0", "cases = 0"] {
        let text = with_model(&format!("task = \"oracle\"\n{bad}"));
        assert!(parse(&text).is_err(), "{bad}");
    }
    assert!(parse(&with_model("task = \"oracle\"\nsteps = -3")).is_err());
}

#[test]
fn drift_dispersion_inline() {
    let text = "task = \"validate\"\ntheta = [[0.0, 1.0], [-1.0, 0.0]]\ndrift = [[-0.5, 0.0], [0.0, -0.5]]\ndispersion = [[1.0, 0.0], [0.0, 1.0]]\npr_override = true";
    let sc = parse(text).unwrap();
    assert!(matches!(sc.model, ModelSource::DriftDispersion { pr_override: true, .. }));
    let stray = with_model("task = \"validate\"\npr_override = true");
    assert!(err_of(&stray).contains("pr_override"));
}

#[test]
fn model_files() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| std::fs::write(dir.path().join(name), body).unwrap();
    write("km.toml", "n = 2\nm = 2\ntheta = [0.0, 1.0, -1.0, 0.0]\nK = [1.0, 0.0, 0.0, 1.0]\nM = [0.5, 0.0, 0.0, 0.5]\n");
    write("ab.toml", "n = 2\nm = 2\ntheta = [0.0, 1.0, -1.0, 0.0]\nA = [-1.0, 0.0, 0.0, -1.0]\nB = [1.0, 0.0, 0.0, 1.0]\n");
    write("short.toml", "n = 2\nm = 2\ntheta = [0.0, 1.0, -1.0]\nK = [1.0, 0.0, 0.0, 1.0]\nM = [0.5, 0.0, 0.0, 0.5]\n");
    write("extra.toml", "n = 2\nm = 2\ntheta = [0.0, 1.0, -1.0, 0.0]\nK = [1.0, 0.0, 0.0, 1.0]\nM = [0.5, 0.0, 0.0, 0.5]\nname = \"x\"\n");
    let load = |file: &str| Scenario::parse(&format!("task = \"validate\"\nmodel_file = \"{file}\""), "t", dir.path()).map_err(|e| e.0);
    assert!(matches!(load("km.toml").unwrap().model, ModelSource::EnergyCoupling { .. }));
    assert!(load("ab.toml").unwrap_err().contains("pr_override"));
    assert!(load("short.toml").unwrap_err().contains("theta"));
    assert!(load("extra.toml").unwrap_err().contains("name"));
    assert!(load("missing.toml").unwrap_err().contains("cannot read"));
}

#[test]
fn overrides_replace_fields() {
    let mut sc = parse(&with_model("task = \"forward\"\ndriver = \"zero\"\nseed = 4")).unwrap();
    sc.apply(&Overrides { output_dir: Some("elsewhere".into()), levels: Some(3), seed: Some(9) }).unwrap();
    assert_eq!((sc.refinement_levels, sc.seed), (3, 9));
    assert_eq!(sc.output_dir, PathBuf::from("elsewhere"));
    assert!(sc.apply(&Overrides { levels: Some(0), ..Default::default() }).is_err());
}

#[test]
fn random_models_depend_on_the_seed_only() {
    let a = parse("task = \"validate\"\nrandom_model = [2, 2]\nseed = 8").unwrap().build_model().unwrap();
    let b = parse("task = \"validate\"\nrandom_model = [2, 2]\nseed = 8\ncases = 3").unwrap().build_model().unwrap();
    let c = parse("task = \"validate\"\nrandom_model = [2, 2]\nseed = 9").unwrap().build_model().unwrap();
    assert_eq!(a.drift(), b.drift());
    assert_ne!(a.drift(), c.drift());
}
