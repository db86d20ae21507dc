use std::path::PathBuf;
use std::process::{Command, Output};

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qae-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn qae(args: &[&str], dir: &PathBuf) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qae"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn solve_writes_the_result_table() {
    let dir = workdir("solve");
    std::fs::write(dir.join("p.json"), r#"{"preset": "harmonic", "d": 1}"#).unwrap();
    let o = qae(&["solve", "--problem", "p.json", "--K", "8", "--seed", "3", "--out", "r.csv"], &dir);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.join("r.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "state_index,energy_qae,energy_oracle,abs_error,best_lambda,raw_norm,K,B,d,solver,seed"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[6..], ["8", "3", "1", "partitioned", "3"]);
    assert!(row[3].parse::<f64>().unwrap() <= 1.0);
}

#[test]
fn solve_morse_excited_state() {
    let dir = workdir("morse");
    std::fs::write(dir.join("m.json"), r#"{"preset": "morse"}"#).unwrap();
    let o = qae(&["solve", "--problem", "m.json", "--K", "8", "--states", "2"], &dir);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn oracle_reads_matrix_files() {
    let dir = workdir("oracle");
    std::fs::write(dir.join("m.json"), r#"{"n": 2, "upper": [2.0, 1.0, 2.0]}"#).unwrap();
    let o = qae(&["oracle", "--matrix", "m.json"], &dir);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "index,eigenvalue\n0,1\n1,3\n");
}

#[test]
fn exported_qubo_round_trips_through_solve_qubo() {
    let dir = workdir("qubo");
    std::fs::write(dir.join("p.json"), r#"{"preset": "harmonic", "d": 1}"#).unwrap();
    let o = qae(&["export-qubo", "--problem", "p.json", "--K", "3", "--lambda", "500", "--out", "q.txt"], &dir);
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.join("q.txt")).unwrap();
    assert!(text.starts_with("n 9\n"));
    let exact = qae(&["solve-qubo", "--qubo", "q.txt", "--solver", "exact"], &dir);
    let tabu = qae(&["solve-qubo", "--qubo", "q.txt", "--solver", "tabu"], &dir);
    assert!(exact.status.success() && tabu.status.success());
    let energy = |o: &Output| stdout(o).lines().nth(1).unwrap().split(',').next().unwrap().to_string();
    assert_eq!(energy(&exact), energy(&tabu));
    assert!(energy(&exact).parse::<f64>().unwrap() < 0.0);
}

#[test]
fn experiment_exit_codes() {
    let dir = workdir("exit");
    std::fs::write(
        dir.join("partial.json"),
        r#"{"kind": "k_sweep", "k_grid": [1, 4], "seeds": [0],
            "scan": {"lambda_min": 380, "n_lambda": 10, "d_lambda": 10, "small_k_d_lambda": {"4": 10}}}"#,
    )
    .unwrap();
    let o = qae(&["k-sweep", "--config", "partial.json"], &dir);
    assert_eq!(o.status.code(), Some(2));
    let text = stdout(&o);
    assert!(text.contains("all trivial") && text.lines().count() == 3);

    let o = qae(&["noise", "--config", "partial.json"], &dir);
    assert_eq!(o.status.code(), Some(1));
    let o = qae(&["k-sweep"], &dir);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn experiment_csv_is_reproducible() {
    let dir = workdir("repro");
    std::fs::write(
        dir.join("noise.json"),
        r#"{"kind": "noise", "k_grid": [3, 5], "noise_scales": [0, 2], "seeds": [1, 2],
            "solver": {"kind": "tabu", "n_rep": 500}}"#,
    )
    .unwrap();
    let a = qae(&["noise", "--config", "noise.json", "--out", "a.csv", "--threads", "2"], &dir);
    let b = qae(&["noise", "--config", "noise.json", "--out", "b.csv", "--threads", "3"], &dir);
    assert!(a.status.success() && b.status.success());
    let read = |f: &str| std::fs::read_to_string(dir.join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a_summary.csv"), read("b_summary.csv"));
    assert_eq!(read("a.csv").lines().count(), 1 + 2 * 2 * 2);
}
