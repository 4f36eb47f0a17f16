use hierpop::io::{write_det_solution_csv, write_qsd_solution_csv, write_sweep_csv};
use hierpop::qsd::QsdConfig;
use hierpop::{det, experiments, qsd, ModelParams};

fn unit_competition() -> ModelParams {
    let beta0 = 30.0 / (10.0 * 31f64.ln());
    ModelParams::hyperbolic_linear(1.0, 10.0, 1.0, beta0, 1.0)
}

#[test]
fn large_area_size_law_approaches_deterministic() {
    let cfg = QsdConfig::default();
    let d = det::solve_bbar(&unit_competition()).unwrap();
    let mut prev = f64::INFINITY;
    for area in [1.0, 10.0, 100.0] {
        let p = unit_competition().with_area(area);
        let q = qsd::solve_bbar(&p, &cfg).unwrap();
        let worst = [0.5, 2.0, 5.0, 10.0, 20.0]
            .iter()
            .map(|&x| (q.size_cdf(x, &p, &cfg).unwrap() - d.size_cdf(x, &p).unwrap()).abs())
            .fold(0.0, f64::max);
        assert!(worst < prev, "area {area}: {worst} >= {prev}");
        prev = worst;
    }
    assert!(prev < 0.01, "{prev}");
}

#[test]
fn solutions_export_one_row_per_table_point() {
    let dir = tempdir();
    let cfg = QsdConfig::default();
    let p = unit_competition();
    let d = det::solve_bbar(&p).unwrap();
    let q = qsd::solve_bbar(&p, &cfg).unwrap();
    write_det_solution_csv(&dir.join("d.csv"), &d).unwrap();
    write_qsd_solution_csv(&dir.join("q.csv"), &q).unwrap();
    let rows = experiments::sweep_area(&p, &[1.0, 2.0], &cfg, None).unwrap();
    write_sweep_csv(&dir.join("s.csv"), &rows).unwrap();
    let lines = |f: &str| {
        std::fs::read_to_string(dir.join(f))
            .unwrap()
            .lines()
            .count()
    };
    assert_eq!(lines("d.csv"), 1 + d.ages.len());
    assert_eq!(lines("q.csv"), 1 + q.ages.len());
    assert_eq!(lines("s.csv"), 3);
    std::fs::remove_dir_all(&dir).unwrap();
}

fn tempdir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("hierpop-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
