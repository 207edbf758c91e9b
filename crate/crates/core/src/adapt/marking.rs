use crate::error::{Error, Result};

/// Bulk-marking parameters: a set `M` is accepted when
/// `theta * sum eta^2 <= sum_{Q in M} eta(Q)^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarkParams {
    pub theta: f64,
    /// `1` asks for a set of minimal size, `inf` marks everything.
    pub c_min: f64,
}

impl MarkParams {
    pub fn new(theta: f64, c_min: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::Argument(format!("marking parameter {theta} is not in (0, 1]")));
        }
        if !(c_min >= 1.0) {
            return Err(Error::Argument(format!("marking constant {c_min} is below 1")));
        }
        Ok(MarkParams { theta, c_min })
    }

    /// Marks every element.
    pub fn uniform() -> Self {
        MarkParams {
            theta: 1.0,
            c_min: f64::INFINITY,
        }
    }

    pub fn is_uniform(&self) -> bool {
        self.c_min.is_infinite()
    }
}

/// Dörfler marking on squared indicators. Returns element ids in ascending
/// order. With a finite `c_min` the set is the shortest prefix of the
/// indicators sorted by decreasing size (ties by id) reaching the bulk
/// fraction, which is a set of minimal cardinality.
pub fn dorfler_mark(eta_sq: &[f64], params: MarkParams) -> Result<Vec<usize>> {
    if eta_sq.is_empty() {
        return Err(Error::Argument("no indicators to mark from".into()));
    }
    if let Some((i, v)) = eta_sq.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Argument(format!("indicator {i} is {v}")));
    }
    if params.is_uniform() {
        return Ok((0..eta_sq.len()).collect());
    }
    let mut order: Vec<usize> = (0..eta_sq.len()).collect();
    order.sort_by(|&a, &b| eta_sq[b].total_cmp(&eta_sq[a]).then(a.cmp(&b)));
    // summing in the same order makes theta = 1 land exactly on the total
    let total: f64 = order.iter().map(|&i| eta_sq[i]).sum();
    let goal = params.theta * total;
    let mut acc = 0.0;
    let mut n = 0;
    while acc < goal && n < order.len() {
        acc += eta_sq[order[n]];
        n += 1;
    }
    let mut marked = order[..n].to_vec();
    marked.sort_unstable();
    Ok(marked)
}
