use crate::diff::{DiffError, Tape, Var};
use crate::trajectory::PRED_LEN;

/// Sum of row-wise BCE against `target`, divided by `denom`.
fn bce_sum(tape: &mut Tape, logits: Var, target: f64, denom: f64) -> Result<Var, DiffError> {
    let l = tape.bce_with_logits(logits, target)?;
    let s = tape.sum(l)?;
    tape.scale(s, 1.0 / denom)
}

/// Real rows are labelled 1 and fake rows 0. Dividing by `denom = 2n` gives
/// the mean over every scored row; a smaller slice of a batch passes the
/// full batch's denominator so slice losses add up.
pub fn discriminator_loss(tape: &mut Tape, real: Var, fake: Var, denom: f64) -> Result<Var, DiffError> {
    let r = bce_sum(tape, real, 1.0, denom)?;
    let f = bce_sum(tape, fake, 0.0, denom)?;
    tape.add(r, f)
}

/// Per row, the smallest over samples of the mean squared point distance
/// to `truth`. Returns an `n × 1` node.
pub fn variety_l2(tape: &mut Tape, samples: &[Vec<Var>], truth: &[Var]) -> Result<Var, DiffError> {
    let mut per_sample = Vec::with_capacity(samples.len());
    for sample in samples {
        let mut acc: Option<Var> = None;
        for (&p, &t) in sample.iter().zip(truth) {
            let d = tape.sub(p, t)?;
            let sq = tape.mul(d, d)?;
            let s = tape.sum_cols(sq)?;
            acc = Some(match acc {
                None => s,
                Some(a) => tape.add(a, s)?,
            });
        }
        let total = acc.ok_or(DiffError::Invalid("empty prediction".into()))?;
        per_sample.push(tape.scale(total, 1.0 / PRED_LEN as f64)?);
    }
    tape.min_of(&per_sample)
}

/// Generator objective and its two parts, each already divided by the batch
/// size.
#[derive(Debug, Clone, Copy)]
pub struct GenLoss {
    pub total: Var,
    pub adv: Var,
    pub l2: Var,
}

/// `adv_weight · BCE(fake, 1) + l2_weight · variety L2`, summed over rows and
/// divided by `denom`.
pub fn generator_loss(
    tape: &mut Tape,
    fake_scores: Var,
    samples: &[Vec<Var>],
    truth: &[Var],
    l2_weight: f64,
    adv_weight: f64,
    denom: f64,
) -> Result<GenLoss, DiffError> {
    let adv = bce_sum(tape, fake_scores, 1.0, denom)?;
    let l2_rows = variety_l2(tape, samples, truth)?;
    let l2_sum = tape.sum(l2_rows)?;
    let l2 = tape.scale(l2_sum, 1.0 / denom)?;
    let a = tape.scale(adv, adv_weight)?;
    let b = tape.scale(l2, l2_weight)?;
    let total = tape.add(a, b)?;
    Ok(GenLoss { total, adv, l2 })
}

/// Both losses on one tape, averaged over the batch.
pub fn gan_losses(
    tape: &mut Tape,
    real_scores: Var,
    fake_scores: Var,
    preds: &[Vec<Var>],
    truths: &[Var],
    l2_weight: f64,
) -> Result<(Var, Var), DiffError> {
    let n = tape.value(real_scores).nrows() as f64;
    let d = discriminator_loss(tape, real_scores, fake_scores, 2.0 * n)?;
    let g = generator_loss(tape, fake_scores, preds, truths, l2_weight, 1.0, n)?;
    Ok((d, g.total))
}
