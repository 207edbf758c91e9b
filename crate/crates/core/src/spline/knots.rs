use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

/// Largest supported polynomial degree per direction.
pub const MAX_DEGREE: usize = 8;

/// A `p`-open knot vector on `[0, 1]` with exact dyadic breakpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct KnotVector {
    degree: usize,
    breakpoints: Vec<Dyadic>,
    multiplicities: Vec<usize>,
    knots: Vec<f64>,
    // index of the first knot equal to breakpoint j; last entry = knots.len()
    bp_start: Vec<usize>,
    // breakpoint index of each knot
    knot_bp: Vec<u32>,
    bp_values: Vec<f64>,
}

impl KnotVector {
    pub fn new(degree: usize, breakpoints: Vec<Dyadic>, multiplicities: Vec<usize>) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(Error::InvalidKnots(format!(
                "degree {degree} exceeds the supported maximum {MAX_DEGREE}"
            )));
        }
        if breakpoints.len() < 2 || breakpoints.len() != multiplicities.len() {
            return Err(Error::InvalidKnots(
                "need at least two breakpoints with one multiplicity each".into(),
            ));
        }
        if breakpoints[0] != Dyadic::ZERO || *breakpoints.last().unwrap() != Dyadic::ONE {
            return Err(Error::InvalidKnots("breakpoints must start at 0 and end at 1".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidKnots("breakpoints must be strictly increasing".into()));
        }
        let nb = breakpoints.len();
        if multiplicities[0] != degree + 1 || multiplicities[nb - 1] != degree + 1 {
            return Err(Error::InvalidKnots(format!(
                "end breakpoints need multiplicity {} (open knot vector)",
                degree + 1
            )));
        }
        if let Some(&m) = multiplicities[1..nb - 1].iter().find(|&&m| m == 0 || m > degree.max(1)) {
            return Err(Error::InvalidKnots(format!(
                "interior multiplicity {m} outside 1..={}",
                degree.max(1)
            )));
        }
        if degree == 0 && nb > 2 && multiplicities[1..nb - 1].iter().any(|&m| m != 1) {
            return Err(Error::InvalidKnots("degree 0 needs simple interior knots".into()));
        }

        let mut knots = Vec::new();
        let mut bp_start = Vec::with_capacity(nb + 1);
        let mut knot_bp = Vec::new();
        for (j, (bp, &m)) in breakpoints.iter().zip(&multiplicities).enumerate() {
            bp_start.push(knots.len());
            for _ in 0..m {
                knots.push(bp.to_f64());
                knot_bp.push(j as u32);
            }
        }
        bp_start.push(knots.len());
        let bp_values = breakpoints.iter().map(|b| b.to_f64()).collect();
        Ok(KnotVector {
            degree,
            breakpoints,
            multiplicities,
            knots,
            bp_start,
            knot_bp,
            bp_values,
        })
    }

    /// `n_elements` equal elements, interior knots repeated `multiplicity` times.
    pub fn uniform(degree: usize, n_elements: usize, multiplicity: usize) -> Result<Self> {
        if n_elements == 0 || !n_elements.is_power_of_two() {
            // non-power-of-two counts are not dyadic
            return Err(Error::InvalidKnots(format!(
                "uniform dyadic grids need a power-of-two element count, got {n_elements}"
            )));
        }
        let e = n_elements.trailing_zeros();
        let bps = (0..=n_elements).map(|k| Dyadic::new(k as i64, e)).collect();
        let mut mults = vec![multiplicity; n_elements + 1];
        mults[0] = degree + 1;
        mults[n_elements] = degree + 1;
        Self::new(degree, bps, mults)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of B-splines `n`.
    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn num_elements(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn breakpoints(&self) -> &[Dyadic] {
        &self.breakpoints
    }

    pub fn breakpoint_values(&self) -> &[f64] {
        &self.bp_values
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn element_bounds(&self, element: usize) -> (f64, f64) {
        (self.bp_values[element], self.bp_values[element + 1])
    }

    /// Index of the first of the `p + 1` B-splines that are nonzero on `element`.
    pub fn first_basis(&self, element: usize) -> usize {
        self.bp_start[element + 1] - 1 - self.degree
    }

    /// Inclusive element range covered by the support of B-spline `i`.
    pub fn support_elements(&self, i: usize) -> (usize, usize) {
        let lo = self.knot_bp[i] as usize;
        let hi = self.knot_bp[i + self.degree + 1] as usize;
        (lo, hi - 1)
    }

    /// Support of B-spline `i` as a coordinate interval.
    pub fn support(&self, i: usize) -> (f64, f64) {
        (self.knots[i], self.knots[i + self.degree + 1])
    }

    /// Inclusive element range of the support extension of `element`: the union
    /// of the supports of all B-splines that do not vanish on it.
    pub fn support_extension(&self, element: usize) -> (usize, usize) {
        let first = self.first_basis(element);
        (
            self.support_elements(first).0,
            self.support_elements(first + self.degree).1,
        )
    }

    /// Element containing `x`; the last element is used at `x = 1`.
    pub fn find_element(&self, x: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(x));
        }
        let k = self.bp_values.partition_point(|&b| b <= x);
        Ok(k.saturating_sub(1).min(self.num_elements() - 1))
    }

    /// Values of the `p + 1` B-splines that may be nonzero at `x`, together with
    /// the index of the first one.
    pub fn eval_nonzero_basis(&self, x: f64) -> Result<(usize, Vec<f64>)> {
        let el = self.find_element(x)?;
        let mut out = vec![0.0; self.degree + 1];
        self.eval_on_element(el, x, 0, &mut out);
        Ok((self.first_basis(el), out))
    }

    /// Values and derivatives up to `order` (at most 2) of the local B-splines.
    /// `result[k][a]` is the `k`-th derivative of B-spline `first + a`.
    pub fn eval_basis_derivatives(&self, x: f64, order: usize) -> Result<(usize, Vec<Vec<f64>>)> {
        if order > 2 {
            return Err(Error::UnsupportedOrder(order));
        }
        let el = self.find_element(x)?;
        let p1 = self.degree + 1;
        let mut flat = vec![0.0; (order + 1) * p1];
        self.eval_on_element(el, x, order, &mut flat);
        Ok((
            self.first_basis(el),
            flat.chunks(p1).map(|c| c.to_vec()).collect(),
        ))
    }

    /// Evaluates the polynomial pieces living on `element` at `x` (which may lie
    /// on the element's closure, giving one-sided values).
    ///
    /// `out` has length `(order + 1) * (p + 1)`; entry `k * (p + 1) + a` holds the
    /// `k`-th derivative of B-spline `first_basis(element) + a`.
    pub fn eval_on_element(&self, element: usize, x: f64, order: usize, out: &mut [f64]) {
        let p = self.degree;
        let span = self.bp_start[element + 1] - 1;
        ders_basis_funs(&self.knots, span, p, x, order, out);
    }

    /// Bisects every element; all interior breakpoints get `multiplicity`.
    pub fn bisect(&self, multiplicity: usize) -> Result<Self> {
        let nb = self.breakpoints.len();
        let mut bps = Vec::with_capacity(2 * nb - 1);
        for w in self.breakpoints.windows(2) {
            bps.push(w[0]);
            bps.push(w[0].midpoint(w[1]));
        }
        bps.push(Dyadic::ONE);
        let mut mults = vec![multiplicity; bps.len()];
        mults[0] = self.degree + 1;
        *mults.last_mut().unwrap() = self.degree + 1;
        Self::new(self.degree, bps, mults)
    }

    /// True when every knot of `self` (with multiplicity) is a knot of `fine`
    /// and both share the degree.
    pub fn is_nested_in(&self, fine: &KnotVector) -> bool {
        if self.degree != fine.degree {
            return false;
        }
        let mut j = 0;
        for (bp, &m) in self.breakpoints.iter().zip(&self.multiplicities) {
            while j < fine.breakpoints.len() && fine.breakpoints[j] < *bp {
                j += 1;
            }
            if j == fine.breakpoints.len() || fine.breakpoints[j] != *bp || fine.multiplicities[j] < m {
                return false;
            }
        }
        true
    }

    /// Greville-like midpoint `(t_i + t_{i+p+1}) / 2` of the support of B-spline `i`.
    pub fn support_midpoint(&self, i: usize) -> f64 {
        0.5 * (self.knots[i] + self.knots[i + self.degree + 1])
    }
}

/// Derivatives of the nonzero B-splines on knot span `span` (de Boor / Piegl–Tiller).
pub(crate) fn ders_basis_funs(knots: &[f64], span: usize, p: usize, x: f64, order: usize, out: &mut [f64]) {
    const N: usize = MAX_DEGREE + 1;
    let p1 = p + 1;
    debug_assert!(out.len() >= (order + 1) * p1);
    out[..(order + 1) * p1].iter_mut().for_each(|v| *v = 0.0);

    let mut ndu = [[0.0f64; N]; N];
    let mut left = [0.0f64; N];
    let mut right = [0.0f64; N];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    for j in 0..=p {
        out[j] = ndu[j][p];
    }
    let n = order.min(p);
    if n == 0 {
        return;
    }
    let mut a = [[0.0f64; N]; 2];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=n {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if r >= k {
                let rk = rk as usize;
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                d = a[s2][0] * ndu[rk][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            out[k * p1 + r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut fac = p as f64;
    for k in 1..=n {
        for j in 0..=p {
            out[k * p1 + j] *= fac;
        }
        fac *= (p - k) as f64;
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct Cox–de Boor recursion with the 0/0 = 0 convention; independent
    /// of the span-based evaluator above.
    pub(crate) fn cox_de_boor(knots: &[f64], i: usize, p: usize, x: f64) -> f64 {
        let last = *knots.last().unwrap();
        if p == 0 {
            let (a, b) = (knots[i], knots[i + 1]);
            if (a <= x && x < b) || (x == last && b == last && a < b) {
                return 1.0;
            }
            return 0.0;
        }
        let mut v = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            v += (x - knots[i]) / d1 * cox_de_boor(knots, i, p - 1, x);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + p + 1] - x) / d2 * cox_de_boor(knots, i + 1, p - 1, x);
        }
        v
    }

    pub(crate) fn random_knot_vector(rng: &mut impl rand::Rng, p: usize) -> KnotVector {
        let level = rng.random_range(1..=4u32);
        let n = 1u64 << level;
        let mut bps = vec![Dyadic::ZERO];
        let mut mults = vec![p + 1];
        for k in 1..n {
            if rng.random_bool(0.6) {
                bps.push(Dyadic::new(k as i64, level));
                mults.push(rng.random_range(1..=p.max(1)));
            }
        }
        bps.push(Dyadic::ONE);
        mults.push(p + 1);
        KnotVector::new(p, bps, mults).unwrap()
    }

    #[test]
    fn rejects_bad_input() {
        assert!(KnotVector::uniform(9, 4, 1).is_err());
        assert!(KnotVector::uniform(2, 3, 1).is_err());
        assert!(KnotVector::new(2, vec![Dyadic::ZERO, Dyadic::ONE], vec![2, 3]).is_err());
        let half = Dyadic::new(1, 1);
        assert!(KnotVector::new(2, vec![Dyadic::ZERO, half, Dyadic::ONE], vec![3, 3, 3]).is_err());
        assert!(KnotVector::new(2, vec![Dyadic::ZERO, half, half, Dyadic::ONE], vec![3, 1, 1, 3]).is_err());
        let kv = KnotVector::uniform(2, 4, 1).unwrap();
        assert_eq!(kv.find_element(1.5), Err(Error::Domain(1.5)));
        assert_eq!(kv.eval_basis_derivatives(0.5, 3), Err(Error::UnsupportedOrder(3)));
    }

    #[test]
    fn piecewise_constant_indicator() {
        let kv = KnotVector::uniform(0, 2, 1).unwrap();
        let (first, vals) = kv.eval_nonzero_basis(0.25).unwrap();
        assert_eq!(first, 0);
        assert_eq!(vals, vec![1.0]);
        let (first, _) = kv.eval_nonzero_basis(0.75).unwrap();
        assert_eq!(first, 1);
    }

    #[test]
    fn cubic_center_values() {
        // hand-unrolled recursion: uniform cubic B-spline at a knot is (1/6, 2/3, 1/6)
        let kv = KnotVector::uniform(3, 4, 1).unwrap();
        let (first, vals) = kv.eval_nonzero_basis(0.5).unwrap();
        assert_eq!(first, 2);
        assert!((vals[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((vals[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((vals[2] - 1.0 / 6.0).abs() < 1e-15);
        assert!(vals[3].abs() < 1e-15);
    }

    #[test]
    fn linear_hat_slopes() {
        let kv = KnotVector::uniform(1, 1, 1).unwrap();
        let (_, d) = kv.eval_basis_derivatives(0.3, 1).unwrap();
        assert!((d[1][0] + 1.0).abs() < 1e-15);
        assert!((d[1][1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cubic_derivatives_match_finite_differences() {
        let kv = KnotVector::uniform(3, 4, 1).unwrap();
        let h = 1e-5;
        for &x in &[0.1, 0.3, 0.55, 0.8] {
            let (first, d) = kv.eval_basis_derivatives(x, 2).unwrap();
            let (f1, vp) = kv.eval_nonzero_basis(x + h).unwrap();
            let (f2, vm) = kv.eval_nonzero_basis(x - h).unwrap();
            assert_eq!((first, first), (f1, f2));
            for a in 0..4 {
                let fd = (vp[a] - vm[a]) / (2.0 * h);
                assert!((fd - d[1][a]).abs() < 1e-6, "x={x} a={a}");
            }
            let s: f64 = d[1].iter().sum();
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn support_extension_examples() {
        let kv = KnotVector::uniform(1, 4, 1).unwrap();
        assert_eq!(kv.support_extension(2), (1, 3));
        let kv = KnotVector::uniform(3, 1, 1).unwrap();
        assert_eq!(kv.support_extension(0), (0, 0));
        // enumerate the supports meeting element 5 directly
        let kv = KnotVector::uniform(2, 8, 1).unwrap();
        let meeting: Vec<_> = (0..kv.num_basis())
            .map(|i| kv.support_elements(i))
            .filter(|&(lo, hi)| lo <= 5 && 5 <= hi)
            .collect();
        let lo = meeting.iter().map(|r| r.0).min().unwrap();
        let hi = meeting.iter().map(|r| r.1).max().unwrap();
        assert_eq!((lo, hi), (3, 7));
        assert_eq!(kv.support_extension(5), (3, 7));
    }

    #[test]
    fn nesting_check() {
        let c = KnotVector::uniform(2, 2, 1).unwrap();
        let f = c.bisect(1).unwrap();
        assert!(c.is_nested_in(&f));
        assert!(!f.is_nested_in(&c));
        let f2 = c.bisect(2).unwrap();
        assert!(c.is_nested_in(&f2));
        let c2 = KnotVector::uniform(2, 2, 2).unwrap();
        assert!(!c2.is_nested_in(&f));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn matches_recursive_definition(seed in any::<u64>(), p in 0usize..=5) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let kv = random_knot_vector(&mut rng, p);
            for _ in 0..20 {
                let x: f64 = rand::Rng::random(&mut rng);
                let (first, vals) = kv.eval_nonzero_basis(x).unwrap();
                let sum: f64 = vals.iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
                for i in 0..kv.num_basis() {
                    let reference = cox_de_boor(kv.knots(), i, p, x);
                    let ours = if i >= first && i <= first + p { vals[i - first] } else { 0.0 };
                    prop_assert!((reference - ours).abs() < 1e-12, "i={} x={} {} vs {}", i, x, reference, ours);
                    prop_assert!(ours >= 0.0);
                    let (a, b) = kv.support(i);
                    if x < a || x > b {
                        prop_assert_eq!(ours, 0.0);
                    }
                }
            }
        }
    }
}
