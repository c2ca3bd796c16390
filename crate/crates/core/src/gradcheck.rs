//! Central finite-difference gradient checking, the test oracle for every
//! differentiable op. Runs in f64; the autodiff path under test is the
//! same one used at f32 in production.

use crate::error::Result;
use crate::tensor::{no_grad, Tensor};

/// Outcome of a gradient check over a set of leaves.
#[derive(Debug)]
pub struct GradCheckReport {
    /// Largest relative error seen across all leaf elements.
    pub max_rel_err: f64,
    /// (leaf index, element index) of the worst entry.
    pub worst: Option<(usize, usize)>,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= self.tol
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / f64::max(1.0, f64::max(a.abs(), b.abs()))
}

/// Compare analytic gradients of the scalar `f(leaves)` against central
/// finite differences (f(x+h) - f(x-h)) / 2h, element by element.
///
/// `f` must rebuild its graph from the given leaves on every call; the
/// perturbation passes run with recording disabled.
pub fn grad_check<F>(f: F, leaves: &[Tensor<f64>], h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&[Tensor<f64>]) -> Result<Tensor<f64>>,
{
    for leaf in leaves {
        leaf.zero_grad();
    }
    let loss = f(leaves)?;
    loss.backward()?;
    let analytic: Vec<Vec<f64>> = leaves
        .iter()
        .map(|l| l.grad().map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; l.numel()]))
        .collect();

    let mut report = GradCheckReport { max_rel_err: 0.0, worst: None, tol };
    let _guard = no_grad();
    for (li, leaf) in leaves.iter().enumerate() {
        for ei in 0..leaf.numel() {
            let orig = leaf.data()[ei];
            leaf.with_data_mut(|d| d[ei] = orig + h);
            let up = f(leaves)?.item();
            leaf.with_data_mut(|d| d[ei] = orig - h);
            let down = f(leaves)?.item();
            leaf.with_data_mut(|d| d[ei] = orig);
            let fd = (up - down) / (2.0 * h);
            let err = rel_err(analytic[li][ei], fd);
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = Some((li, ei));
            }
        }
    }
    Ok(report)
}
