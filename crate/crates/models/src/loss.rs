//! Self-supervised objectives, recorded on a tape. Every function returns a
//! `1 x 1` loss to minimize.

use lpssl_autodiff::{Mat, Tape, Var};

use crate::config::Anchor;
use crate::error::{ModelError, Result};

/// `n x m` matrix of cosine similarities between rows of `a` and rows of `b`,
/// divided by `tau`.
fn scaled_cosines(tape: &mut Tape, a_hat: Var, b_hat: Var, tau: f64) -> Var {
    let s = tape.matmul_nt(a_hat, b_hat);
    tape.scalar_mul(s, 1.0 / tau)
}

/// Constant with `-inf` at `(i, i)` for `i < min(rows, cols)`, zero elsewhere.
fn diagonal_mask(tape: &mut Tape, rows: usize, cols: usize) -> Var {
    let mut m = Mat::zeros((rows, cols));
    for i in 0..rows.min(cols) {
        m[[i, i]] = f64::NEG_INFINITY;
    }
    tape.constant(m)
}

/// One direction of the node-level InfoNCE term, summed over anchors:
/// `sum_i [theta(u_i, v_i) - ln(sum_k e^theta(u_i, v_k) + sum_{k != i} e^theta(u_i, u_k))]`
/// with `theta` the cosine divided by `tau`. Inputs are row-normalized.
fn grace_direction(tape: &mut Tape, u_hat: Var, v_hat: Var, tau: f64) -> Var {
    let n = tape.shape(u_hat).0;
    let between = scaled_cosines(tape, u_hat, v_hat, tau);
    let reflect = scaled_cosines(tape, u_hat, u_hat, tau);
    let mask = diagonal_mask(tape, n, n);
    let reflect = tape.add(reflect, mask);
    let all = tape.concat_cols(&[between, reflect]);
    let lse = tape.logsumexp_rows(all);
    let prod = tape.mul(u_hat, v_hat);
    let pos = tape.row_sum(prod);
    let pos = tape.scalar_mul(pos, 1.0 / tau);
    let terms = tape.sub(pos, lse);
    tape.sum(terms)
}

/// GRACE objective on projected embeddings of the same nodes in two views:
/// `-(1 / 2N) sum_i [l(u_i, v_i) + l(v_i, u_i)]`.
pub fn grace_loss(tape: &mut Tape, u: Var, v: Var, tau: f64) -> Result<Var> {
    check_tau(tau)?;
    let (n, d) = tape.shape(u);
    if tape.shape(v) != (n, d) || n == 0 {
        return Err(ModelError::Shape(format!(
            "grace_loss: views {:?} and {:?}",
            (n, d),
            tape.shape(v)
        )));
    }
    let u_hat = tape.row_l2_normalize(u);
    let v_hat = tape.row_l2_normalize(v);
    let a = grace_direction(tape, u_hat, v_hat, tau);
    let b = grace_direction(tape, v_hat, u_hat, tau);
    let total = tape.add(a, b);
    Ok(tape.scalar_mul(total, -1.0 / (2.0 * n as f64)))
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 {
        Ok(())
    } else {
        Err(ModelError::Config(format!("tau = {tau} must be positive")))
    }
}

/// Options of the link-level contrastive objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkContrast {
    pub anchor: Anchor,
    /// Add the positive pair's own term to the denominator.
    pub include_positive: bool,
}

impl Default for LinkContrast {
    fn default() -> Self {
        Self {
            anchor: Anchor::Positive,
            include_positive: false,
        }
    }
}

/// One direction of the link-level term, summed over positive links:
/// numerator `cos(pos_a_i, pos_b_i) / tau`; denominator sums over every
/// negative of the other view and every negative `k != i` of the same view,
/// each compared with the anchor.
fn lgrace_direction(
    tape: &mut Tape,
    pos_a: Var,
    pos_b: Var,
    neg_a: Var,
    neg_b: Var,
    tau: f64,
    opts: LinkContrast,
) -> Var {
    let p = tape.shape(pos_a).0;
    let q = tape.shape(neg_a).0;
    let prod = tape.mul(pos_a, pos_b);
    let pos = tape.row_sum(prod);
    let pos = tape.scalar_mul(pos, 1.0 / tau);
    let anchor = match opts.anchor {
        Anchor::Positive => pos_a,
        Anchor::Negative => neg_a,
    };
    let between = scaled_cosines(tape, anchor, neg_b, tau);
    let reflect = scaled_cosines(tape, anchor, neg_a, tau);
    let mask = diagonal_mask(tape, p, q);
    let reflect = tape.add(reflect, mask);
    let mut parts = vec![between, reflect];
    if opts.include_positive {
        parts.push(pos);
    }
    let all = tape.concat_cols(&parts);
    let lse = tape.logsumexp_rows(all);
    let terms = tape.sub(pos, lse);
    tape.sum(terms)
}

/// L-GRACE objective on link representations of the shared positive links
/// (`z1_pos`, `z2_pos`, aligned rows) and sampled negative links (`z1_neg`,
/// `z2_neg`, aligned rows), symmetrized over the two views. Only
/// `|pos| x |neg|` similarity matrices are formed.
pub fn lgrace_loss(
    tape: &mut Tape,
    z1_pos: Var,
    z2_pos: Var,
    z1_neg: Var,
    z2_neg: Var,
    tau: f64,
    opts: LinkContrast,
) -> Result<Var> {
    check_tau(tau)?;
    let (p, d) = tape.shape(z1_pos);
    let q = tape.shape(z1_neg).0;
    if q == 0 {
        return Err(ModelError::NoNegatives);
    }
    if p == 0 || tape.shape(z2_pos) != (p, d) || tape.shape(z2_neg) != (q, d) || tape.shape(z1_neg).1 != d {
        return Err(ModelError::Shape(format!(
            "lgrace_loss: positives {:?}/{:?}, negatives {:?}/{:?}",
            tape.shape(z1_pos),
            tape.shape(z2_pos),
            tape.shape(z1_neg),
            tape.shape(z2_neg)
        )));
    }
    if opts.anchor == Anchor::Negative && q != p {
        return Err(ModelError::Shape(format!(
            "negative anchors need |neg| = |pos|, got {q} and {p}"
        )));
    }
    let [p1, p2, n1, n2] = [z1_pos, z2_pos, z1_neg, z2_neg].map(|z| tape.row_l2_normalize(z));
    let a = lgrace_direction(tape, p1, p2, n1, n2, tau, opts);
    let b = lgrace_direction(tape, p2, p1, n2, n1, tau, opts);
    let total = tape.add(a, b);
    Ok(tape.scalar_mul(total, -1.0 / (2.0 * p as f64)))
}

/// `-(2 / N) sum_i cos(online_i, target_i)`, with the target detached.
pub fn bgrl_loss(tape: &mut Tape, online_pred: Var, target: Var) -> Result<Var> {
    let (n, d) = tape.shape(online_pred);
    if tape.shape(target) != (n, d) || n == 0 {
        return Err(ModelError::Shape(format!(
            "bgrl_loss: online {:?}, target {:?}",
            (n, d),
            tape.shape(target)
        )));
    }
    let target = tape.detach(target);
    let cos = tape.row_cosine_similarity(online_pred, target);
    let total = tape.sum(cos);
    Ok(tape.scalar_mul(total, -2.0 / n as f64))
}

/// Both directions of the asymmetric objective, averaged:
/// `(bgrl(p1, t2) + bgrl(p2, t1)) / 2`.
pub fn symmetric_bgrl_loss(tape: &mut Tape, p1: Var, t2: Var, p2: Var, t1: Var) -> Result<Var> {
    let a = bgrl_loss(tape, p1, t2)?;
    let b = bgrl_loss(tape, p2, t1)?;
    let total = tape.add(a, b);
    Ok(tape.scalar_mul(total, 0.5))
}

/// L-BGRL: the asymmetric objective on aligned link representations.
pub fn lbgrl_loss(tape: &mut Tape, z1: Var, h2: Var) -> Result<Var> {
    bgrl_loss(tape, z1, h2)
}

/// Decoder objective on positive and negative logits.
///
/// * `Bce`: `-mean ln sigma(z_pos) - mean ln sigma(-z_neg)`.
/// * `LogSig`: `-mean_i ln sigma(z_pos_i - z_neg_i)` over aligned pairs.
pub fn decoder_loss(tape: &mut Tape, pos: Var, neg: Var, kind: crate::config::DecoderLoss) -> Var {
    match kind {
        crate::config::DecoderLoss::Bce => {
            let lp = tape.log_sigmoid(pos);
            let nneg = tape.neg(neg);
            let ln = tape.log_sigmoid(nneg);
            let mp = tape.mean(lp);
            let mn = tape.mean(ln);
            let s = tape.add(mp, mn);
            tape.neg(s)
        }
        crate::config::DecoderLoss::LogSig => {
            let diff = tape.sub(pos, neg);
            let l = tape.log_sigmoid(diff);
            let m = tape.mean(l);
            tape.neg(m)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn eval_grace(u: Mat, v: Mat, tau: f64) -> f64 {
        let mut t = Tape::new();
        let (a, b) = (t.constant(u), t.constant(v));
        let l = grace_loss(&mut t, a, b, tau).unwrap();
        t.scalar(l)
    }

    #[test]
    fn grace_single_node_is_zero() {
        assert_eq!(eval_grace(array![[0.3, -1.0]], array![[2.0, 0.1]], 0.5), 0.0);
    }

    #[test]
    fn grace_two_nodes_example() {
        let e = std::f64::consts::E;
        let l = eval_grace(array![[1.0, 0.0], [0.0, 1.0]], array![[1.0, 0.0], [0.0, 1.0]], 1.0);
        assert_abs_diff_eq!(l, -(1.0 - (e + 2.0).ln()), epsilon = 1e-14);
        assert_abs_diff_eq!(l, 0.5514, epsilon = 1e-4);
    }

    #[test]
    fn grace_rejects_bad_tau() {
        let mut t = Tape::new();
        let a = t.constant(array![[1.0]]);
        assert!(grace_loss(&mut t, a, a, 0.0).is_err());
    }

    fn eval_lgrace(p1: Mat, p2: Mat, n1: Mat, n2: Mat, tau: f64, opts: LinkContrast) -> f64 {
        let mut t = Tape::new();
        let v = [p1, p2, n1, n2].map(|m| t.constant(m));
        let l = lgrace_loss(&mut t, v[0], v[1], v[2], v[3], tau, opts).unwrap();
        t.scalar(l)
    }

    #[test]
    fn lgrace_single_link_example() {
        let l = eval_lgrace(
            array![[1.0, 0.0]],
            array![[1.0, 0.0]],
            array![[0.0, 1.0]],
            array![[0.0, 1.0]],
            1.0,
            LinkContrast::default(),
        );
        assert_abs_diff_eq!(l, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn lgrace_decreases_with_tau() {
        let pos = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let neg = array![[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]];
        let mut prev = f64::INFINITY;
        for k in (1..=9).rev() {
            let l = eval_lgrace(pos.clone(), pos.clone(), neg.clone(), neg.clone(), k as f64 / 10.0, LinkContrast::default());
            assert!(l < prev, "tau {} loss {l} not below {prev}", k as f64 / 10.0);
            prev = l;
        }
    }

    #[test]
    fn lgrace_empty_negatives_rejected() {
        let mut t = Tape::new();
        let p = t.constant(array![[1.0, 0.0]]);
        let n = t.constant(Mat::zeros((0, 2)));
        assert!(matches!(
            lgrace_loss(&mut t, p, p, n, n, 0.5, LinkContrast::default()),
            Err(ModelError::NoNegatives)
        ));
    }

    #[test]
    fn bgrl_examples() {
        let mut t = Tape::new();
        let a = t.constant(array![[1.0, 2.0], [-3.0, 0.5]]);
        let na = t.neg(a);
        let o = t.constant(array![[1.0, 2.0], [1.0, 6.0]]);
        let o_perp = t.constant(array![[2.0, -1.0], [-6.0, 1.0]]);
        let same = symmetric_bgrl_loss(&mut t, a, a, a, a).unwrap();
        let opposite = symmetric_bgrl_loss(&mut t, a, na, na, a).unwrap();
        let orth = bgrl_loss(&mut t, o, o_perp).unwrap();
        assert_abs_diff_eq!(t.scalar(same), -2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(t.scalar(opposite), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(t.scalar(orth), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn decoder_losses() {
        let mut t = Tape::new();
        let p = t.constant(array![[0.0]]);
        let n = t.constant(array![[0.0]]);
        let bce = decoder_loss(&mut t, p, n, crate::config::DecoderLoss::Bce);
        let ls = decoder_loss(&mut t, p, n, crate::config::DecoderLoss::LogSig);
        assert_abs_diff_eq!(t.scalar(bce), 2.0 * 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(t.scalar(ls), 2f64.ln(), epsilon = 1e-15);
    }
}
