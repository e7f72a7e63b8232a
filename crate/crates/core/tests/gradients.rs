mod common;

use common::*;
use lidargait::encoder::{Architecture, EncoderParams};
use lidargait::projection::ProjectionView;

#[test]
fn micro_net_gradients_match_central_differences() {
    let arch = micro_arch(2);
    for s in 0..5u64 {
        let params = check_params(&arch, s);
        let inputs: Vec<_> = (0..4)
            .map(|i| random_sequence(1, 2, 6, 6, 100 * s + i))
            .collect();
        let r = check_gradients(
            &params,
            &inputs,
            &[0, 0, 1, 1],
            &BOTH_LOSSES,
            1e-3,
            usize::MAX,
            s,
        );
        assert!(r.max_rel_error < 1e-6, "seed {s}: {r:?}");
        assert!(r.checked >= 2 * r.skipped, "seed {s}: {r:?}");
    }
}

#[test]
fn full_encoder_gradients_match_central_differences() {
    let arch = Architecture::standard(vec![ProjectionView::RangeView], 2);
    for s in 0..3u64 {
        let params = check_params(&arch, s);
        let inputs: Vec<_> = (0..4)
            .map(|i| random_sequence(1, 1, 8, 8, 10 * s + i))
            .collect();
        let r = check_gradients(&params, &inputs, &[0, 0, 1, 1], &BOTH_LOSSES, 1e-3, 8, s);
        eprintln!("seed {s}: {r:?}");
        assert!(r.max_rel_error < 1e-4, "seed {s}: {r:?}");
        assert!(r.checked >= r.skipped / 2, "seed {s}: {r:?}");
    }
}

#[test]
fn two_view_encoder_gradients_match_central_differences() {
    let arch = Architecture::standard(
        vec![ProjectionView::RangeView, ProjectionView::RightSideView],
        3,
    );
    let params = check_params(&arch, 7);
    let inputs: Vec<_> = (0..6)
        .map(|i| random_sequence(2, 2, 8, 8, 40 + i))
        .collect();
    let r = check_gradients(
        &params,
        &inputs,
        &[0, 0, 1, 1, 2, 2],
        &BOTH_LOSSES,
        1e-3,
        6,
        7,
    );
    eprintln!("{r:?}");
    assert!(r.max_rel_error < 1e-4, "{r:?}");
    assert!(r.checked >= 30, "{r:?}");
}

#[test]
fn unused_parameters_get_zero_gradient() {
    // With beta = 0 the classifier never reaches the loss.
    let arch = micro_arch(2);
    let params = EncoderParams::<f64>::init(&arch, 3).unwrap();
    let inputs: Vec<_> = (0..4).map(|i| random_sequence(1, 1, 6, 6, i)).collect();
    let spec = LossSpec {
        alpha: 1.0,
        beta: 0.0,
        margin: 0.2,
    };
    let g = analytic_gradient(&params, &inputs, &[0, 0, 1, 1], &spec);
    assert!(g.classifier.iter().all(|&v| v == 0.0));
    assert!(g.part_maps.iter().any(|&v| v != 0.0));
}
