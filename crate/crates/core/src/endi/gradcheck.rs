//! Central finite differences against analytic gradients.

use crate::rng::Rng;

use super::params::EndiParams;

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor for the relative error. Central differences at
/// `FD_STEP` carry about 1e-10 of rounding noise on losses of order one, so
/// gradients smaller than this are compared on an absolute scale.
pub const REL_FLOOR: f64 = 1e-3;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub checked: usize,
    /// (input, coordinate, analytic, numeric) at the worst coordinate.
    pub worst: Option<(usize, usize, f64, f64)>,
}

impl GradCheck {
    pub fn merge(&mut self, other: &GradCheck) {
        self.checked += other.checked;
        self.max_abs_err = self.max_abs_err.max(other.max_abs_err);
        if other.max_rel_err > self.max_rel_err || self.worst.is_none() {
            self.max_rel_err = self.max_rel_err.max(other.max_rel_err);
            if other.worst.is_some() {
                self.worst = other.worst;
            }
        }
    }
}

/// Compares `analytic[i][j]` against the central difference of `f` in
/// coordinate `j` of input `i`. At most `per_input` coordinates of each
/// input are probed, chosen by `rng`; `None` probes all of them.
pub fn check(
    f: &dyn Fn(&[Vec<f64>]) -> f64,
    inputs: &[Vec<f64>],
    analytic: &[Vec<f64>],
    per_input: Option<usize>,
    rng: &mut Rng,
) -> GradCheck {
    assert_eq!(inputs.len(), analytic.len(), "one gradient per input");
    let mut out = GradCheck::default();
    let mut x = inputs.to_vec();
    for i in 0..inputs.len() {
        assert_eq!(inputs[i].len(), analytic[i].len(), "gradient length");
        let coords: Vec<usize> = match per_input {
            Some(k) if k < inputs[i].len() => rng.sample_indices(inputs[i].len(), k),
            _ => (0..inputs[i].len()).collect(),
        };
        for j in coords {
            let orig = x[i][j];
            x[i][j] = orig + FD_STEP;
            let up = f(&x);
            x[i][j] = orig - FD_STEP;
            let down = f(&x);
            x[i][j] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let e = rel_err(analytic[i][j], numeric);
            out.checked += 1;
            out.max_abs_err = out.max_abs_err.max((analytic[i][j] - numeric).abs());
            if out.worst.is_none() || e > out.max_rel_err {
                out.max_rel_err = e;
                out.worst = Some((i, j, analytic[i][j], numeric));
            }
        }
    }
    out
}

/// `check` over every parameter tensor, with `loss` evaluated on perturbed
/// copies of `params`.
pub fn check_params(
    loss: &dyn Fn(&EndiParams) -> f64,
    params: &EndiParams,
    grads: &EndiParams,
    per_input: Option<usize>,
    rng: &mut Rng,
) -> GradCheck {
    let inputs: Vec<Vec<f64>> = params.tensors().iter().map(|t| t.data().to_vec()).collect();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.data().to_vec()).collect();
    let f = |x: &[Vec<f64>]| {
        let mut p = params.clone();
        for (t, v) in p.tensors_mut().into_iter().zip(x) {
            t.data_mut().copy_from_slice(v);
        }
        loss(&p)
    };
    check(&f, &inputs, &analytic, per_input, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let f = |x: &[Vec<f64>]| x[0].iter().map(|v| v * v).sum::<f64>();
        let x = vec![vec![1.0, -2.0, 0.5]];
        let g = vec![vec![2.0, -4.0, 1.0]];
        let mut rng = Rng::split(0, "fd");
        let r = check(&f, &x, &g, None, &mut rng);
        assert_eq!(r.checked, 3);
        assert!(r.max_rel_err < 1e-9);
        let wrong = vec![vec![2.0, -4.0, 1.1]];
        assert!(check(&f, &x, &wrong, None, &mut rng).max_rel_err > 0.05);
    }
}
