mod common;

#[test]
fn optimizer_is_near_the_exhaustive_optimum() {
    let cases = common::oracle_cases();
    assert_eq!(cases.len(), 20);
    let mut close = 0;
    for c in &cases {
        assert!(c.comp_size <= 10);
        // the optimizer's answer is a feasible subset, so it can never beat the optimum
        assert!(c.best_loss >= c.optimum - 1e-9, "setup {} node {}: {} < {}", c.setup, c.node, c.best_loss, c.optimum);
        if c.best_loss - c.optimum <= 0.05 {
            close += 1;
        }
    }
    assert!(close >= 18, "{close}/20 within 0.05");
}
