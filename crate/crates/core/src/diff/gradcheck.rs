//! Central finite differences against tape gradients (test only).

use super::{DiffError, Mat, ParamSet, Tape, Var};

/// `build` records a scalar loss for the given parameters. Returns the
/// largest `|analytic - numeric| / max(1, |analytic|)` over all scalars.
pub fn max_rel_error<F>(params: &ParamSet, step: f64, build: F) -> f64
where
    F: Fn(&mut Tape, &ParamSet, bool) -> Result<(Var, Option<super::Bound>), DiffError>,
{
    let mut tape = Tape::new();
    let (loss, bound) = build(&mut tape, params, true).unwrap();
    tape.backward(loss).unwrap();
    let analytic: Vec<Mat> = params.grads(&tape, &bound.expect("bound params"));

    let eval = |p: &ParamSet| {
        let mut t = Tape::new();
        let (l, _) = build(&mut t, p, false).unwrap();
        t.scalar(l)
    };
    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    for (k, g) in analytic.iter().enumerate() {
        for idx in 0..g.len() {
            let orig = probe.values()[k].as_slice().unwrap()[idx];
            probe.values_mut()[k].as_slice_mut().unwrap()[idx] = orig + step;
            let up = eval(&probe);
            probe.values_mut()[k].as_slice_mut().unwrap()[idx] = orig - step;
            let down = eval(&probe);
            probe.values_mut()[k].as_slice_mut().unwrap()[idx] = orig;
            let numeric = (up - down) / (2.0 * step);
            let a = g.as_slice().unwrap()[idx];
            worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::{uniform, Affine, LstmParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bind(tape: &mut Tape, p: &ParamSet, grad: bool) -> Result<super::super::Bound, DiffError> {
        if grad {
            p.bind(tape)
        } else {
            p.bind_frozen(tape)
        }
    }

    #[test]
    fn lstm_ten_step_unroll_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut set = ParamSet::new();
        let lstm = LstmParams::new(&mut set, "l", 3, 4, &mut rng);
        let inputs: Vec<Mat> = (0..10).map(|_| uniform(2, 3, 1.0, &mut rng)).collect();
        let err = max_rel_error(&set, 1e-5, |tape, p, grad| {
            let b = bind(tape, p, grad)?;
            let cell = lstm.bind(tape, &b)?;
            let mut h = tape.constant(Mat::zeros((2, 4)))?;
            let mut c = tape.constant(Mat::zeros((2, 4)))?;
            for x in &inputs {
                let x = tape.constant(x.clone())?;
                (h, c) = cell.step(tape, x, h, c)?;
            }
            let sq = tape.mul(h, h)?;
            let s = tape.sum(sq)?;
            let sc = tape.sum(c)?;
            let loss = tape.add(s, sc)?;
            Ok((loss, Some(b)))
        });
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn affine_and_pointwise_ops_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut set = ParamSet::new();
        let l1 = Affine::new(&mut set, "a", 3, 5, &mut rng);
        let l2 = Affine::new(&mut set, "b", 5, 5, &mut rng);
        let l3 = Affine::new(&mut set, "c", 5, 2, &mut rng);
        let x = uniform(4, 3, 2.0, &mut rng);
        let err = max_rel_error(&set, 1e-5, |tape, p, grad| {
            let b = bind(tape, p, grad)?;
            let x = tape.constant(x.clone())?;
            let h = l1.apply(tape, &b, x)?;
            let h1 = tape.tanh(h)?;
            let h2 = tape.sigmoid(h)?;
            let h3 = tape.leaky_relu(h, 0.2)?;
            let h4 = tape.relu(h)?;
            let mix = tape.mul(h1, h2)?;
            let mix = tape.add(mix, h3)?;
            let mix = tape.sub(mix, h4)?;
            let y = l2.apply(tape, &b, mix)?;
            let y = tape.scale(y, 0.7)?;
            let z = l3.apply(tape, &b, y)?;
            let parts = [tape.slice_cols(z, 0, 1)?, tape.slice_cols(z, 1, 2)?];
            let m = tape.min_of(&parts)?;
            let bce = tape.bce_with_logits(m, 1.0)?;
            let rows = tape.sum_cols(z)?;
            let top = tape.slice_rows(rows, 0, 3)?;
            let bottom = tape.slice_rows(rows, 3, 4)?;
            let rows = tape.concat_rows(&[bottom, top])?;
            let both = tape.concat_cols(&[bce, rows])?;
            let loss = tape.mean(both)?;
            Ok((loss, Some(b)))
        });
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn gradients_are_linear_in_the_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut set = ParamSet::new();
        let l = Affine::new(&mut set, "a", 3, 3, &mut rng);
        let x = uniform(2, 3, 1.0, &mut rng);
        let grads = |wa: f64, wb: f64| {
            let mut tape = Tape::new();
            let b = set.bind(&mut tape).unwrap();
            let xv = tape.constant(x.clone()).unwrap();
            let y = l.apply(&mut tape, &b, xv).unwrap();
            let t = tape.tanh(y).unwrap();
            let l1 = tape.sum(t).unwrap();
            let sq = tape.mul(y, y).unwrap();
            let l2 = tape.mean(sq).unwrap();
            let a = tape.scale(l1, wa).unwrap();
            let c = tape.scale(l2, wb).unwrap();
            let loss = tape.add(a, c).unwrap();
            tape.backward(loss).unwrap();
            set.grads(&tape, &b)
        };
        let g1 = grads(1.0, 0.0);
        let g2 = grads(0.0, 1.0);
        let combo = grads(2.5, -0.75);
        for ((a, b), c) in g1.iter().zip(&g2).zip(&combo) {
            let expect = a * 2.5 + b * -0.75;
            assert!((&expect - c).iter().all(|d| d.abs() < 1e-10));
        }
    }

    #[test]
    fn forward_is_bit_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut set = ParamSet::new();
        let lstm = LstmParams::new(&mut set, "l", 2, 3, &mut rng);
        let run = || crate::diff::lstm_step(&lstm, &set, &[0.3, -0.1], &[0.2, 0.1, 0.0], &[0.5, -0.5, 0.1]).unwrap();
        assert_eq!(run(), run());
    }
}
