use super::{norm2, Matrix, Rng};
use crate::error::{Error, Result};

const RESTART_SEED: u64 = 0x5eed_0f_5ca1e;

struct PowerRun {
    sigma: f64,
    converged: bool,
}

fn power_run(m: &Matrix, mut v: Vec<f64>, max_iters: usize, tol: f64) -> Result<PowerRun> {
    let nv = norm2(&v);
    if nv == 0.0 {
        return Ok(PowerRun {
            sigma: 0.0,
            converged: false,
        });
    }
    v.iter_mut().for_each(|x| *x /= nv);
    let mut sigma = 0.0;
    for _ in 0..max_iters {
        let mv = m.matvec(&v);
        let est = norm2(&mv);
        if !est.is_finite() {
            return Err(Error::NonFinite("power iteration"));
        }
        let w = m.tmatvec(&mv);
        let nw = norm2(&w);
        if nw == 0.0 {
            // v lies in the null space: the Rayleigh quotient is stuck at 0.
            return Ok(PowerRun {
                sigma: est,
                converged: false,
            });
        }
        let done = (est - sigma).abs() <= 1e-2 * tol * est;
        sigma = est;
        if done {
            return Ok(PowerRun {
                sigma,
                converged: true,
            });
        }
        v = w.into_iter().map(|x| x / nw).collect();
    }
    Ok(PowerRun {
        sigma,
        converged: false,
    })
}

/// Largest singular value by power iteration on `mᵀm`.
///
/// Starts from the normalized all-ones vector and then from one fixed-seed
/// Gaussian vector; both runs give lower bounds on `σ_max`, so the larger is
/// returned. The second run covers starts that are (numerically) orthogonal to
/// the leading singular vector.
pub fn spectral_norm(m: &Matrix, max_iters: usize, tol: f64) -> Result<f64> {
    if m.is_empty() {
        return Err(Error::InvalidArgument(
            "spectral norm of an empty matrix".into(),
        ));
    }
    if !m.all_finite() {
        return Err(Error::NonFinite("spectral norm input"));
    }
    let n = m.cols();
    let first = power_run(m, vec![1.0; n], max_iters, tol)?;
    let mut rng = Rng::new(RESTART_SEED);
    let second = power_run(m, rng.normal_vec(n), max_iters, tol)?;
    if !first.converged && !second.converged {
        log::debug!("power iteration did not converge in {max_iters} iterations");
    }
    Ok(first.sigma.max(second.sigma))
}
