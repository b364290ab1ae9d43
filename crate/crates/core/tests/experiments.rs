use rowaction::experiments::{run_tomo, TomoConfig};

#[test]
fn more_gradient_steps_reach_a_smaller_residual() {
    let residual = |lb_steps| {
        let cfg = TomoConfig {
            lb_steps,
            sweeps: 500,
            ..TomoConfig::default()
        };
        run_tomo(&cfg)
            .unwrap()
            .output
            .trace
            .last()
            .unwrap()
            .residual
    };
    let (one, hundred) = (residual(1), residual(100));
    assert!(hundred < one, "{hundred:e} vs {one:e}");
}
