mod common;

use common::tiny_gradient_check;

#[test]
fn tiny_model_gradients_match_finite_differences() {
    for seed in [1, 2, 3] {
        let (worst, count) = tiny_gradient_check(seed, 1e-5);
        assert_eq!(count, 3 * 3 * 4 * 2 + 2 + 18 * 8 + 8 + 8 * 3 + 3);
        assert!(worst < 1e-5, "seed {seed}: worst relative error {worst:e}");
    }
}
