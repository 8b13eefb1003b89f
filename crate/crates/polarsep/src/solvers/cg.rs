//! Matrix-free conjugate gradient for symmetric positive definite systems.

/// Outcome of a CG run.
#[derive(Debug, Clone)]
pub struct CgSummary {
    pub iterations: usize,
    /// ‖b − Ax‖ / ‖b‖ at exit.
    pub relative_residual: f64,
    pub converged: bool,
    /// Quadratic energy ½xᵀAx − bᵀx per iterate, tracked by the step
    /// recurrence φ ← φ − ½α·rsold, so it is non-increasing by construction.
    pub energy_trace: Vec<f64>,
}

/// Solves `A x = b` in place, where `apply(x, out)` writes `A x` into `out`.
///
/// `x` is the initial guess on entry and the solution on exit. Terminates when
/// the relative residual drops below `tol` or after `max_iter` iterations.
pub fn conjugate_gradient<A>(
    mut apply: A,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> CgSummary
where
    A: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    assert_eq!(x.len(), n);
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.fill(0.0);
        return CgSummary {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
            energy_trace: vec![0.0],
        };
    }

    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];

    let mut rsold = dot(&r, &r);
    // ½xᵀAx − bᵀx at the initial guess.
    let mut energy = 0.5 * dot(x, &ax) - dot(b, x);
    let mut energy_trace = vec![energy];

    let mut converged = rsold.sqrt() <= tol * b_norm;
    let mut iterations = 0;

    while !converged && iterations < max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            // Not SPD along p (or numerically exhausted); stop with what we have.
            break;
        }
        let alpha = rsold / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        energy -= 0.5 * alpha * rsold;
        energy_trace.push(energy);

        let rsnew = dot(&r, &r);
        iterations += 1;
        if rsnew.sqrt() <= tol * b_norm {
            converged = true;
            rsold = rsnew;
            break;
        }
        let beta = rsnew / rsold;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rsold = rsnew;
    }

    CgSummary {
        iterations,
        relative_residual: rsold.sqrt() / b_norm,
        converged,
        energy_trace,
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
