mod common;

use common::{
    consistent_system, dot, kaczmarz_project, linearized_bregman_step, max_abs_diff, soft,
};
use rowaction::scenarios::{gen_gaussian_cs, gen_phantom, NormalSampler};
use rowaction::solvers::{
    block_step, kkt_residual, online_run, run, sparse_kaczmarz_step, tv_kaczmarz_run,
    BlockStepsize, Granularity, OnlineOptions, Schedule, TvOptions,
};
use rowaction::{
    BlockPartition, ControlMode, ImageShape, RowSystem, ShrinkMode, SolveOptions, SolverState,
    StepKind,
};

#[test]
fn state_invariant_after_every_step() {
    for mode in [ShrinkMode::Signed, ShrinkMode::Nonnegative] {
        let mut s = NormalSampler::new(3);
        let x_true: Vec<f64> = s.vector(12).iter().map(|v| v.abs()).collect();
        let (rows, b) = common::gaussian_rows(&mut s, 6, &x_true);
        let sys = RowSystem::from_rows(12, &rows, &b).unwrap();
        let mut st = SolverState::new(12, mode);
        for k in 0..300 {
            let i = k % 6;
            if k % 3 == 0 {
                block_step(&mut st, sys.block(0..3), 0.5, BlockStepsize::Dynamic).unwrap();
            } else {
                sparse_kaczmarz_step(&mut st, sys.row(i), b[i], 0.5, StepKind::Exact).unwrap();
            }
            assert!(st.invariant_holds(0.5));
            if mode == ShrinkMode::Nonnegative {
                assert!(st.x.iter().all(|&v| v >= 0.0));
            }
        }
    }
}

#[test]
fn exact_step_interpolates_the_row() {
    let mut s = NormalSampler::new(8);
    let mut st = SolverState::new(30, ShrinkMode::Signed);
    for _ in 0..200 {
        let a = s.vector(30);
        let beta = 2.0 * s.sample();
        sparse_kaczmarz_step(&mut st, &a, beta, 0.7, StepKind::Exact).unwrap();
        assert!((dot(&a, &st.x) - beta).abs() <= 1e-10 * (1.0 + beta.abs()));
    }
}

#[test]
fn without_shrinkage_sparse_kaczmarz_is_kaczmarz() {
    let sys = consistent_system(21, 8, 20);
    let mut st = SolverState::new(20, ShrinkMode::Signed);
    let mut x = vec![0.0; 20];
    for k in 0..500 {
        let i = k % sys.m();
        sparse_kaczmarz_step(&mut st, sys.row(i), sys.rhs()[i], 0.0, StepKind::Dynamic).unwrap();
        kaczmarz_project(&mut x, sys.row(i), sys.rhs()[i]);
        assert!(max_abs_diff(&st.x, &x) <= 1e-12);
    }
}

#[test]
fn singleton_block_step_is_sparse_kaczmarz_step() {
    let sys = consistent_system(22, 10, 25);
    let mut a = SolverState::new(25, ShrinkMode::Signed);
    let mut b = a.clone();
    for k in 0..500 {
        let i = (7 * k) % sys.m();
        block_step(&mut a, sys.block(i..i + 1), 0.3, BlockStepsize::Dynamic).unwrap();
        sparse_kaczmarz_step(&mut b, sys.row(i), sys.rhs()[i], 0.3, StepKind::Dynamic).unwrap();
        assert!(max_abs_diff(&a.x, &b.x) <= 1e-12);
    }
}

#[test]
fn whole_block_step_is_linearized_bregman() {
    let sys = consistent_system(23, 10, 25);
    let rows: Vec<Vec<f64>> = sys.rows().map(<[f64]>::to_vec).collect();
    let mut st = SolverState::new(25, ShrinkMode::Signed);
    let (mut z, mut x) = (vec![0.0; 25], vec![0.0; 25]);
    for _ in 0..500 {
        block_step(&mut st, sys.full(), 0.3, BlockStepsize::Dynamic).unwrap();
        linearized_bregman_step(&mut z, &mut x, &rows, sys.rhs(), 0.3);
        assert!(max_abs_diff(&st.x, &x) <= 1e-12);
    }
    assert_eq!(x, z.iter().map(|&v| soft(v, 0.3)).collect::<Vec<_>>());
}

#[test]
fn residual_decreases_for_every_rule() {
    for seed in 0..5 {
        let sys = consistent_system(100 + seed, 20, 50);
        let start = sys.residual_norm_rel(&vec![0.0; 50]).unwrap();
        let cases = [
            (StepKind::Exact, BlockPartition::singletons(20)),
            (StepKind::Dynamic, BlockPartition::singletons(20)),
            (StepKind::Dynamic, BlockPartition::uniform(20, 5).unwrap()),
            (StepKind::Constant, BlockPartition::uniform(20, 5).unwrap()),
        ];
        for (step, partition) in cases {
            let opts = SolveOptions {
                lambda: 1.0,
                step,
                max_steps: 50 * partition.len() as u64,
                tol: 0.0,
                log_every: partition.len() as u64,
                ..SolveOptions::default()
            };
            let out = run(&sys, &partition, &opts, None).unwrap();
            let end = out.trace.last().unwrap().residual;
            assert!(
                end < start,
                "{step:?} with {} blocks: {end} vs {start}",
                partition.len()
            );
        }
    }
}

#[test]
fn final_iterate_is_optimal() {
    for seed in 0..3 {
        let sys = consistent_system(200 + seed, 20, 50);
        let opts = SolveOptions {
            lambda: 1.0,
            step: StepKind::Exact,
            max_steps: 10_000,
            tol: 0.0,
            log_every: 10_000,
            ..SolveOptions::default()
        };
        let out = run(&sys, &BlockPartition::singletons(20), &opts, None).unwrap();
        let kkt = kkt_residual(&sys, &out.x, 1.0);
        assert!(kkt <= 1e-5, "seed {seed}: {kkt:e}");
    }
}

#[test]
fn nonnegative_runs_stay_nonnegative() {
    let mut s = NormalSampler::new(4);
    let x_true: Vec<f64> = s.vector(40).iter().map(|v| v.max(0.0)).collect();
    let (rows, b) = common::gaussian_rows(&mut s, 15, &x_true);
    let sys = RowSystem::from_rows(40, &rows, &b).unwrap();
    for control in [ControlMode::Cyclic, ControlMode::UniformRandom] {
        let opts = SolveOptions {
            lambda: 0.1,
            shrink_mode: ShrinkMode::Nonnegative,
            control,
            step: StepKind::Dynamic,
            max_steps: 3000,
            tol: 0.0,
            ..SolveOptions::default()
        };
        let out = run(
            &sys,
            &BlockPartition::uniform(15, 3).unwrap(),
            &opts,
            Some(&x_true),
        )
        .unwrap();
        assert_eq!(out.trace.len(), 3000);
        assert!(out.trace.records.iter().all(|r| r.min_x >= 0.0));
    }
}

#[test]
fn online_runs_are_deterministic() {
    let go = || {
        let (truth, stream) = gen_gaussian_cs(60, 4, 9).unwrap();
        let opts = OnlineOptions {
            solve: SolveOptions {
                lambda: 1.0,
                control: ControlMode::UniformRandom,
                seed: 77,
                ..SolveOptions::default()
            },
            granularity: Granularity::Rows,
            schedule: Schedule::Steps(30),
            ..OnlineOptions::default()
        };
        online_run(
            RowSystem::new(60),
            stream.blocks().take(40),
            &opts,
            Some(truth.as_slice()),
        )
        .unwrap()
    };
    let (a, b) = (go(), go());
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.x, b.x);
    assert_eq!(a.stop_step, b.stop_step);
    assert_eq!(a.trace.to_csv_string(), b.trace.to_csv_string());
}

#[test]
fn online_stream_from_another_thread() {
    let (truth, stream) = gen_gaussian_cs(50, 3, 2).unwrap();
    let (tx, rx) = std::sync::mpsc::channel();
    let producer = std::thread::spawn(move || {
        for block in stream.blocks().take(30) {
            tx.send(block).unwrap();
        }
    });
    let opts = OnlineOptions::default();
    let threaded = online_run(RowSystem::new(50), rx, &opts, Some(truth.as_slice())).unwrap();
    producer.join().unwrap();
    let (_, stream) = gen_gaussian_cs(50, 3, 2).unwrap();
    let direct = online_run(
        RowSystem::new(50),
        stream.blocks().take(30),
        &opts,
        Some(truth.as_slice()),
    )
    .unwrap();
    assert_eq!(threaded.trace, direct.trace);
    assert_eq!(threaded.system.m(), 30);
}

#[test]
fn tv_without_gradient_steps_is_kaczmarz() {
    let shape = ImageShape::new(5, 4);
    let sys = consistent_system(31, 8, shape.pixels());
    let out = tv_kaczmarz_run(
        &sys,
        shape,
        &TvOptions {
            lambda: 0.1,
            sweeps: 3,
            lb_steps_per_sweep: 0,
        },
        None,
    )
    .unwrap();
    let mut x = vec![0.0; shape.pixels()];
    for _ in 0..3 {
        for k in 0..sys.m() {
            kaczmarz_project(&mut x, sys.row(k), sys.rhs()[k]);
        }
    }
    assert!(max_abs_diff(&out.u.data, &x) <= 1e-12);
}

#[test]
fn tv_more_gradient_steps_lower_the_split_residual() {
    let shape = ImageShape::square(16);
    let phantom = gen_phantom(16, 16);
    let geom = rowaction::scenarios::TomoGeometry::new(shape, 5, 23).unwrap();
    let sys = geom.system_for(&phantom).unwrap();
    let split = |lb| {
        let opts = TvOptions {
            lambda: 1.0,
            sweeps: 100,
            lb_steps_per_sweep: lb,
        };
        *tv_kaczmarz_run(&sys, shape, &opts, Some(&phantom))
            .unwrap()
            .split_residuals
            .last()
            .unwrap()
    };
    assert!(split(100) < 0.5 * split(1));
}
