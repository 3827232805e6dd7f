use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::OnceLock;

use bqamd::detector::{detect, DetectorConfig, SolverMode};
use bqamd::model::linalg::{CMat, CVec, C64};
use bqamd::objective::{block_observation, mmse_hard, BlockProblem, LambdaSchedule};
use bqamd::preprocess::preprocess;
use bqamd::qaoa::{QaoaParams, TrainBudget};
use bqamd::transfer::bank::{mean_gap, reference_set, select_templates, BankConfig, BANK_VERSION};
use bqamd::transfer::{
    build_bank, load_bank, save_bank, solve_block_direct, solve_block_transfer, BankEntry, Template, TemplateBank,
};
use bqamd::{generate_instance, Modulation, RngStream};
use rand::Rng;

fn single_point_config(snr: f64) -> BankConfig {
    BankConfig {
        snr_grid: vec![snr],
        ..BankConfig::table1()
    }
}

/// Table I bank restricted to the 18 dB grid point, built once.
fn bank_18db() -> &'static (BankConfig, TemplateBank) {
    static BANK: OnceLock<(BankConfig, TemplateBank)> = OnceLock::new();
    BANK.get_or_init(|| {
        let cfg = single_point_config(18.0);
        let bank = build_bank(&cfg).unwrap();
        (cfg, bank)
    })
}

fn tiny_config() -> BankConfig {
    BankConfig {
        nt: 4,
        nr: 4,
        depth: 1,
        k_temp: 3,
        n_ref: 3,
        snr_grid: vec![4.0, 10.0],
        budget: TrainBudget {
            evals_per_start: 20,
            restarts: 1,
        },
        ..BankConfig::table1()
    }
}

/// Random full-size block of a fresh 16x16 channel, conditioned on the true suffix.
fn conditioned_block(snr: f64, rng: &mut RngStream) -> BlockProblem {
    let inst = generate_instance(16, 16, Modulation::Qam16, snr, rng).unwrap();
    let plan = preprocess(&inst.h, &inst.y, 2).unwrap();
    let ell = rng.gen_range(0..plan.num_blocks());
    let z = plan.permute(&inst.x);
    let range = plan.block_range(ell);
    let anchor = plan.permute(&mmse_hard(&inst.h, &inst.y, inst.sigma2, inst.modulation).unwrap());
    BlockProblem::new(
        ell,
        block_observation(&plan, ell, &z[range.end..]).unwrap(),
        plan.diag_block(ell),
        Some(anchor[range].to_vec()),
        LambdaSchedule::TABLE1.lambda(snr),
        Modulation::Qam16,
    )
    .unwrap()
}

fn exhaustive_min(prob: &BlockProblem) -> f64 {
    prob.cost_table().unwrap().into_iter().fold(f64::INFINITY, f64::min)
}

#[test]
fn save_load_round_trip_is_bit_exact() {
    let bank = build_bank(&tiny_config()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bank.json");
    save_bank(&bank, &path).unwrap();
    let back = load_bank(&path).unwrap();
    assert_eq!(back, bank);
    for (a, b) in back.entries.iter().zip(&bank.entries) {
        for (ta, tb) in a.templates.iter().zip(&b.templates) {
            let bits = |t: &Template| t.gammas.iter().chain(&t.betas).map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(ta), bits(tb));
        }
    }
}

#[test]
fn build_is_deterministic() {
    assert_eq!(build_bank(&tiny_config()).unwrap(), build_bank(&tiny_config()).unwrap());
}

const FIXTURE: &str = r#"{
  "version": 1,
  "depth": 2,
  "qubits": 8,
  "block_size": 2,
  "modulation": "QAM16",
  "k_temp": 1,
  "lambda": [0.005, 0.45, 13.0, 0.55],
  "master_seed": 99,
  "n_ref": 1,
  "entries": [
    { "snr_db": 12.0, "templates": [ { "gammas": [0.1, 0.2], "betas": [0.3, 0.05], "score": 0.25 } ] }
  ]
}"#;

#[test]
fn hand_written_fixture_loads_and_serves() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fixture.json");
    std::fs::write(&path, FIXTURE).unwrap();
    let bank = load_bank(&path).unwrap();
    assert_eq!(bank.depth, 2);
    assert_eq!(bank.offline_budget, None);
    for rho in [-5.0, 12.0, 30.0] {
        let t = bank.lookup(rho).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].gammas, vec![0.1, 0.2]);
        assert_eq!(t[0].betas, vec![0.3, 0.05]);
    }
}

#[test]
fn invalid_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let cases = [
        FIXTURE.replace("\"depth\": 2", "\"depth\": 3"),
        FIXTURE.replace("\"version\": 1", "\"version\": 2"),
        FIXTURE.replace("\"qubits\": 8", "\"qubits\": 6"),
        FIXTURE.replace("\"betas\": [0.3, 0.05]", "\"betas\": [0.3]"),
        FIXTURE[..FIXTURE.len() / 2].to_string(),
    ];
    for text in cases {
        std::fs::write(&path, &text).unwrap();
        assert!(load_bank(&path).is_err(), "{text}");
    }
}

#[test]
fn no_selection_pressure_keeps_everything_sorted() {
    let cfg = tiny_config();
    let bank = build_bank(&cfg).unwrap();
    for (g, entry) in bank.entries.iter().enumerate() {
        assert_eq!(entry.templates.len(), cfg.n_ref);
        assert!(entry.templates.windows(2).all(|w| w[0].score <= w[1].score));
        let costs = reference_set(&cfg, g, 0, cfg.n_ref).unwrap();
        for t in &entry.templates {
            assert_eq!(t.score, mean_gap(&t.params(), &costs));
        }
    }
}

#[test]
fn identical_instances_score_identically() {
    let cfg = tiny_config();
    let c = reference_set(&cfg, 0, 0, 1).unwrap().remove(0);
    let p = QaoaParams::new(vec![0.3], vec![0.2]).unwrap();
    let sel = select_templates(&[p.clone(), p], &[c.clone(), c], 2);
    assert_eq!(sel[0].score, sel[1].score);
}

#[test]
fn templates_beat_random_parameters() {
    let (cfg, bank) = bank_18db();
    let validation = reference_set(cfg, 0, 1, 32).unwrap();
    let mut rng = RngStream::new(64);
    let mut random: Vec<f64> = (0..64)
        .map(|_| {
            let g = (0..4).map(|_| rng.gen_range(-PI..PI)).collect();
            let b = (0..4).map(|_| rng.gen_range(-FRAC_PI_2..FRAC_PI_2)).collect();
            mean_gap(&QaoaParams::new(g, b).unwrap(), &validation)
        })
        .collect();
    random.sort_by(f64::total_cmp);
    let median = 0.5 * (random[31] + random[32]);
    for t in &bank.entries[0].templates {
        let gap = mean_gap(&t.params(), &validation);
        assert!(gap <= median, "template gap {gap} vs random median {median}");
    }
}

#[test]
fn transfer_finds_block_optimum() {
    let (_, bank) = bank_18db();
    let mut rng = RngStream::new(1818);
    let mut hits = 0;
    for _ in 0..100 {
        let prob = conditioned_block(18.0, &mut rng);
        let list = solve_block_transfer(&prob, bank, 18.0, 4, 1024, &mut rng).unwrap();
        assert_eq!(list.optimizer_evals, 0);
        assert_eq!(list.qaoa_inferences, 4);
        let best = list.candidates[0].exact_metric;
        let opt = exhaustive_min(&prob);
        assert!(best >= opt);
        hits += usize::from(best == opt);
    }
    assert!(hits >= 90, "optimum found on {hits}/100 blocks");
}

#[test]
fn transfer_detection_never_trains() {
    let (_, bank) = bank_18db();
    let cfg = DetectorConfig::table1(SolverMode::Transfer);
    let inst = generate_instance(16, 16, Modulation::Qam16, 18.0, &mut RngStream::new(3)).unwrap();
    let d = detect(&inst, &cfg, Some(bank), &mut RngStream::new(4)).unwrap();
    assert_eq!(d.counters.optimizer_evals, 0);
    assert_eq!(d.counters.qaoa_inferences, 4 * d.counters.local_calls);
}

/// QPSK single-symbol bank whose one template drives a `Z + Z` cost to a basis state.
fn qpsk_point_bank() -> (BlockProblem, TemplateBank) {
    // Cost = const + s0 + s1 for this observation.
    let y = -C64::new(1.0, 1.0) / 2f64.sqrt();
    let prob = BlockProblem::new(
        0,
        CVec(vec![y]),
        CMat::identity(1),
        None,
        0.0,
        Modulation::Qpsk,
    )
    .unwrap();
    let bank = TemplateBank {
        version: BANK_VERSION,
        depth: 1,
        qubits: 2,
        block_size: 1,
        modulation: Modulation::Qpsk,
        k_temp: 1,
        lambda: [0.0, 0.0, 0.0, 1.0],
        master_seed: 0,
        n_ref: 1,
        offline_budget: None,
        entries: vec![BankEntry {
            snr_db: 0.0,
            templates: vec![Template {
                gammas: vec![FRAC_PI_4],
                betas: vec![FRAC_PI_4],
                score: 0.0,
            }],
        }],
    };
    (prob, bank)
}

#[test]
fn concentrated_state_gives_single_candidate() {
    let (prob, bank) = qpsk_point_bank();
    let list = solve_block_transfer(&prob, &bank, 0.0, 4, 1024, &mut RngStream::new(0)).unwrap();
    assert_eq!(list.candidates.len(), 1);
    assert_eq!(list.candidates[0].freq, 1.0);
    assert_eq!(list.candidates[0].spins, vec![1, 1]);
}

#[test]
fn transfer_rejects_mismatched_blocks() {
    let (_, bank) = qpsk_point_bank();
    let prob = conditioned_block(10.0, &mut RngStream::new(5));
    assert!(solve_block_transfer(&prob, &bank, 10.0, 4, 16, &mut RngStream::new(0)).is_err());
    let (prob, _) = qpsk_point_bank();
    assert!(solve_block_transfer(&prob, &bank, 0.0, 0, 16, &mut RngStream::new(0)).is_err());
}

#[test]
fn direct_solver_contracts() {
    let budget = TrainBudget {
        evals_per_start: 60,
        restarts: 1,
    };
    let mut rng = RngStream::new(21);
    for _ in 0..5 {
        let prob = conditioned_block(12.0, &mut rng);
        let run = |t| solve_block_direct(&prob, 4, t, 1024, budget, &mut RngStream::new(8)).unwrap();
        let (a, b) = (run(4), run(4));
        assert_eq!(a, b);
        assert!(a.candidates[0].exact_metric >= exhaustive_min(&prob));
        assert_eq!(a.optimizer_evals, 120);
        let all = run(256);
        assert!(all.candidates.windows(2).all(|w| w[0].exact_metric <= w[1].exact_metric));
        let total: f64 = all.candidates.iter().map(|c| c.freq).sum();
        assert!((total - 1.0).abs() < 1e-12, "every sampled assignment is kept");
    }
}
