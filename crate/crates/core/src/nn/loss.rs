/// Two-class softmax with max-subtraction.
pub fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `-ln softmax(logits)[label]` and its gradient `softmax(logits) - onehot(label)`.
///
/// With two classes the loss is `softplus(l_other - l_label)`, which stays
/// exact for saturated logits.
pub fn softmax_cross_entropy(logits: [f64; 2], label: u8) -> (f64, [f64; 2]) {
    let y = usize::from(label != 0);
    let loss = softplus(logits[1 - y] - logits[y]);
    let mut grad = softmax2(logits);
    grad[y] -= 1.0;
    (loss, grad)
}
