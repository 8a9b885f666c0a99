use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::contraction::kl_divergence;
use crate::error::{Error, Result};

/// Largest joint state count `|x| · Π_s |h_s|` handled by exact enumeration.
pub const MAX_JOINT_STATES: usize = 1_000_000;

const PMF_TOL: f64 = 1e-12;

/// Generative chain `h_S → … → h_1 → x` over finite state sets.
///
/// `down[0][h_1, x] = p(x | h_1)` and `down[s][h_{s+1}, h_s] = p(h_s | h_{s+1})`;
/// `prior` is the distribution of the top scale `h_S`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredModel {
    prior: Vec<f64>,
    down: Vec<DMatrix<f64>>,
}

fn check_pmf(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Domain(format!("{what} is empty")));
    }
    if let Some(v) = p.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("{what} has invalid probability {v}")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > PMF_TOL {
        return Err(Error::Domain(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

fn check_rows(m: &DMatrix<f64>, what: &str) -> Result<()> {
    for (i, row) in m.row_iter().enumerate() {
        let r: Vec<f64> = row.iter().copied().collect();
        check_pmf(&r, &format!("{what} row {i}"))?;
    }
    Ok(())
}

impl LayeredModel {
    pub fn new(prior: Vec<f64>, down: Vec<DMatrix<f64>>) -> Result<Self> {
        if down.is_empty() {
            return Err(Error::Domain("model needs at least one latent scale".into()));
        }
        check_pmf(&prior, "prior")?;
        for (s, k) in down.iter().enumerate() {
            check_rows(k, &format!("down kernel {s}"))?;
            if let Some(next) = down.get(s + 1) {
                if next.ncols() != k.nrows() {
                    return Err(Error::Shape(format!(
                        "down kernel {} emits {} states but kernel {s} expects {}",
                        s + 1,
                        next.ncols(),
                        k.nrows()
                    )));
                }
            }
        }
        if down[down.len() - 1].nrows() != prior.len() {
            return Err(Error::Shape(format!(
                "prior has {} states but the top kernel has {} rows",
                prior.len(),
                down[down.len() - 1].nrows()
            )));
        }
        let states = std::iter::once(down[0].ncols())
            .chain(down.iter().map(|k| k.nrows()))
            .try_fold(1usize, |acc, n| acc.checked_mul(n))
            .filter(|n| *n <= MAX_JOINT_STATES);
        if states.is_none() {
            return Err(Error::Capacity(format!(
                "joint state space exceeds {MAX_JOINT_STATES} states"
            )));
        }
        Ok(LayeredModel { prior, down })
    }

    /// Number of latent scales `S`.
    pub fn scales(&self) -> usize {
        self.down.len()
    }

    /// `[|x|, |h_1|, …, |h_S|]`.
    pub fn state_counts(&self) -> Vec<usize> {
        std::iter::once(self.down[0].ncols())
            .chain(self.down.iter().map(|k| k.nrows()))
            .collect()
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn down(&self) -> &[DMatrix<f64>] {
        &self.down
    }

    /// Marginals `[p(x), p(h_1), …, p(h_S)]`.
    pub fn marginals(&self) -> Vec<DVector<f64>> {
        let s = self.scales();
        let mut out = vec![DVector::zeros(0); s + 1];
        out[s] = DVector::from_column_slice(&self.prior);
        for k in (0..s).rev() {
            out[k] = self.down[k].tr_mul(&out[k + 1]);
        }
        out
    }

    /// Exact posterior conditionals `p(h_s | h_{s-1})` (with `h_0 = x`) as
    /// row-stochastic matrices. Rows of zero-probability conditioning states
    /// are left uniform; they carry no weight under the posterior.
    pub fn posterior(&self) -> Vec<DMatrix<f64>> {
        let m = self.marginals();
        (0..self.scales())
            .map(|s| {
                let k = &self.down[s];
                let (rows, cols) = (k.ncols(), k.nrows());
                DMatrix::from_fn(rows, cols, |i, j| {
                    if m[s][i] > 0.0 {
                        m[s + 1][j] * k[(j, i)] / m[s][i]
                    } else {
                        1.0 / cols as f64
                    }
                })
            })
            .collect()
    }

    fn check_nu(&self, nu: &[DMatrix<f64>]) -> Result<()> {
        let counts = self.state_counts();
        if nu.len() != self.scales() {
            return Err(Error::Shape(format!(
                "{} assigned conditionals for {} scales",
                nu.len(),
                self.scales()
            )));
        }
        for (s, v) in nu.iter().enumerate() {
            if v.shape() != (counts[s], counts[s + 1]) {
                return Err(Error::Shape(format!(
                    "assigned conditional {} has shape {:?}, expected {:?}",
                    s + 1,
                    v.shape(),
                    (counts[s], counts[s + 1])
                )));
            }
            check_rows(v, &format!("assigned conditional {}", s + 1))?;
        }
        Ok(())
    }

    /// Builds a model and data/assignment from the JSON description.
    pub fn from_file(file: &LayeredModelFile) -> Result<LoadedModel> {
        let down = file
            .down
            .iter()
            .enumerate()
            .map(|(i, m)| nested(m, &format!("down kernel {i}")))
            .collect::<Result<Vec<_>>>()?;
        let model = LayeredModel::new(file.prior.clone(), down)?;
        let nu = match &file.nu {
            Some(nu) => Some(
                nu.iter()
                    .enumerate()
                    .map(|(i, m)| nested(m, &format!("assigned conditional {}", i + 1)))
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        Ok((model, file.data.clone(), nu))
    }
}

fn nested(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let c = rows.first().map_or(0, |r| r.len());
    if rows.is_empty() || c == 0 || rows.iter().any(|r| r.len() != c) {
        return Err(Error::Shape(format!("{what} is not a non-empty rectangular matrix")));
    }
    Ok(DMatrix::from_fn(rows.len(), c, |i, j| rows[i][j]))
}

/// Model, data pmf and optional assigned conditionals.
pub type LoadedModel = (LayeredModel, Vec<f64>, Option<Vec<DMatrix<f64>>>);

/// JSON description read by the `decompose` command. Matrices are nested
/// row arrays; `nu` defaults to the exact posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredModelFile {
    pub prior: Vec<f64>,
    pub down: Vec<Vec<Vec<f64>>>,
    pub data: Vec<f64>,
    #[serde(default)]
    pub nu: Option<Vec<Vec<Vec<f64>>>>,
}

impl LayeredModelFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("layered model: {e}")))
    }
}

/// `ln p = ℒ + Σ_s D_KL^s` evaluated on an enumerable model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    /// `Σ_x d(x) ln p(x)` by enumeration of the joint.
    pub complete_ll: f64,
    /// `ℒ = Σ_x d(x) Σ_h q(h|x) ln(p(x,h) / q(h|x))`.
    pub expected_ll: f64,
    /// Per-scale `E_q[KL(ν_s(·|h_{s-1}) ‖ p(·|h_{s-1}))]`, `s = 1..S`.
    pub kl_terms: Vec<f64>,
    /// `|complete_ll − (expected_ll + Σ kl_terms)|`.
    pub identity_defect: f64,
}

fn ln0(v: f64) -> f64 {
    if v > 0.0 {
        v.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Decomposes the data log-likelihood under assigned conditionals `nu`
/// (`nu[0][x, h_1]`, `nu[s][h_s, h_{s+1}]`).
pub fn decompose_likelihood(model: &LayeredModel, data: &[f64], nu: &[DMatrix<f64>]) -> Result<DecompositionReport> {
    let counts = model.state_counts();
    if data.len() != counts[0] {
        return Err(Error::Shape(format!(
            "data pmf over {} states for {} observable states",
            data.len(),
            counts[0]
        )));
    }
    check_pmf(data, "data")?;
    model.check_nu(nu)?;
    let s_count = model.scales();

    // Enumerate latent tuples (h_1..h_S) with an odometer.
    let nx = counts[0];
    let mut px = vec![0.0; nx];
    let mut elbo = vec![0.0; nx];
    let mut h = vec![0usize; s_count];
    loop {
        let mut latent = model.prior[h[s_count - 1]];
        for s in 1..s_count {
            latent *= model.down[s][(h[s], h[s - 1])];
        }
        let mut q_upper = 1.0;
        for s in 1..s_count {
            q_upper *= nu[s][(h[s - 1], h[s])];
        }
        for x in 0..nx {
            let joint = latent * model.down[0][(h[0], x)];
            px[x] += joint;
            if data[x] > 0.0 {
                let q = nu[0][(x, h[0])] * q_upper;
                if q > 0.0 {
                    elbo[x] += q * (ln0(joint) - q.ln());
                }
            }
        }
        // advance
        let mut k = 0;
        loop {
            if k == s_count {
                break;
            }
            h[k] += 1;
            if h[k] < counts[k + 1] {
                break;
            }
            h[k] = 0;
            k += 1;
        }
        if k == s_count {
            break;
        }
    }
    let mut complete_ll = 0.0;
    let mut expected_ll = 0.0;
    for x in 0..nx {
        if data[x] > 0.0 {
            if px[x] == 0.0 {
                return Err(Error::Domain(format!(
                    "observed state x={x} has zero probability under the model"
                )));
            }
            complete_ll += data[x] * px[x].ln();
            expected_ll += data[x] * elbo[x];
        }
    }

    // Chain rule of KL over scales, weighted by the assigned marginals.
    let marg = model.marginals();
    let post = model.posterior();
    let mut weight = DVector::from_column_slice(data);
    let mut kl_terms = Vec::with_capacity(s_count);
    for s in 0..s_count {
        let mut term = 0.0;
        for i in 0..weight.len() {
            if weight[i] == 0.0 {
                continue;
            }
            if marg[s][i] == 0.0 {
                let name = if s == 0 { format!("x={i}") } else { format!("h{s}={i}") };
                return Err(Error::Domain(format!(
                    "conditioning state {name} has zero probability under the model"
                )));
            }
            let a: Vec<f64> = nu[s].row(i).iter().copied().collect();
            let b: Vec<f64> = post[s].row(i).iter().copied().collect();
            term += weight[i] * kl_divergence(&a, &b);
        }
        kl_terms.push(term.max(0.0));
        weight = nu[s].tr_mul(&weight);
    }
    let identity_defect = (complete_ll - (expected_ll + kl_terms.iter().sum::<f64>())).abs();
    Ok(DecompositionReport {
        complete_ll,
        expected_ll,
        kl_terms,
        identity_defect,
    })
}

/// Forward/backward semantics on an enumerable model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FpBpReport {
    /// `ℒ` with every conditional set to the exact posterior.
    pub posterior_elbo: f64,
    /// Best `ℒ` among the random competitors.
    pub best_competitor_elbo: f64,
    pub competitors: usize,
    /// No competitor exceeded the posterior's `ℒ` (beyond 1e-12).
    pub fp_holds: bool,
    /// Max-abs central-difference gradient of the top-scale KL term with
    /// respect to the model log-probabilities, at the posterior assignment.
    pub top_kl_gradient_at_minimum: f64,
    /// Top-scale KL for a random assignment before and after one step of
    /// `1e-4` along its negative gradient.
    pub bp_kl_before: f64,
    pub bp_kl_after: f64,
    pub bp_decreases: bool,
}

fn random_row_stochastic<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(Exp1));
    for mut r in m.row_iter_mut() {
        let s = r.sum();
        r /= s;
    }
    m
}

// Model parameters as log-probabilities: prior first, then each kernel
// (column-major). Rows are renormalized with a softmax on the way back.
fn to_logits(model: &LayeredModel) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = model.prior.clone();
    for k in &model.down {
        out.extend_from_slice(k.as_slice());
    }
    if out.iter().any(|v| *v <= 0.0) {
        return Err(Error::Domain(
            "log-probability parametrization needs strictly positive model probabilities".into(),
        ));
    }
    Ok(out.iter().map(|v| v.ln()).collect())
}

fn from_logits(model: &LayeredModel, logits: &[f64]) -> LayeredModel {
    let softmax = |v: &[f64]| -> Vec<f64> {
        let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = v.iter().map(|x| (x - top).exp()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|x| x / s).collect()
    };
    let np = model.prior.len();
    let prior = softmax(&logits[..np]);
    let mut offset = np;
    let down = model
        .down
        .iter()
        .map(|k| {
            let raw = DMatrix::from_column_slice(k.nrows(), k.ncols(), &logits[offset..offset + k.len()]);
            offset += k.len();
            let mut m = DMatrix::zeros(k.nrows(), k.ncols());
            for i in 0..k.nrows() {
                let row: Vec<f64> = raw.row(i).iter().copied().collect();
                for (j, v) in softmax(&row).into_iter().enumerate() {
                    m[(i, j)] = v;
                }
            }
            m
        })
        .collect();
    LayeredModel { prior, down }
}

fn top_kl(model: &LayeredModel, data: &[f64], nu: &[DMatrix<f64>]) -> Result<f64> {
    Ok(*decompose_likelihood(model, data, nu)?.kl_terms.last().unwrap())
}

fn top_kl_gradient(model: &LayeredModel, data: &[f64], nu: &[DMatrix<f64>]) -> Result<Vec<f64>> {
    let theta = to_logits(model)?;
    let step = 1e-5;
    let mut grad = vec![0.0; theta.len()];
    for i in 0..theta.len() {
        let mut up = theta.clone();
        let mut down = theta.clone();
        up[i] += step;
        down[i] -= step;
        grad[i] = (top_kl(&from_logits(model, &up), data, nu)? - top_kl(&from_logits(model, &down), data, nu)?)
            / (2.0 * step);
    }
    Ok(grad)
}

/// Checks that the exact posterior maximizes `ℒ` against `competitors`
/// random assignments (FP), that the top-scale KL is stationary in the model
/// parameters at the posterior, and that a `1e-4` step along its negative
/// gradient decreases it for a random assignment (BP).
pub fn fp_bp_semantics_check<R: Rng + ?Sized>(
    model: &LayeredModel,
    data: &[f64],
    competitors: usize,
    rng: &mut R,
) -> Result<FpBpReport> {
    let post = model.posterior();
    let posterior_elbo = decompose_likelihood(model, data, &post)?.expected_ll;
    let mut best = f64::NEG_INFINITY;
    let mut last_random = None;
    for _ in 0..competitors {
        let t: f64 = if rng.random_bool(0.5) {
            1.0
        } else {
            rng.random_range(0.0..1.0)
        };
        let nu: Vec<DMatrix<f64>> = post
            .iter()
            .map(|p| p * (1.0 - t) + random_row_stochastic(p.nrows(), p.ncols(), rng) * t)
            .collect();
        best = best.max(decompose_likelihood(model, data, &nu)?.expected_ll);
        last_random = Some(nu);
    }
    let target = match last_random {
        Some(nu) => nu,
        None => post
            .iter()
            .map(|p| random_row_stochastic(p.nrows(), p.ncols(), rng))
            .collect(),
    };

    let grad0 = top_kl_gradient(model, data, &post)?;
    let top_kl_gradient_at_minimum = grad0.iter().fold(0.0f64, |a, g| a.max(g.abs()));

    let before = top_kl(model, data, &target)?;
    let grad = top_kl_gradient(model, data, &target)?;
    let theta: Vec<f64> = to_logits(model)?.iter().zip(&grad).map(|(t, g)| t - 1e-4 * g).collect();
    let after = top_kl(&from_logits(model, &theta), data, &target)?;
    Ok(FpBpReport {
        posterior_elbo,
        best_competitor_elbo: best,
        competitors,
        fp_holds: best <= posterior_elbo + 1e-12,
        top_kl_gradient_at_minimum,
        bp_kl_before: before,
        bp_kl_after: after,
        bp_decreases: after < before,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// One binary latent with posterior (0.8, 0.2) given the single observation.
    fn one_scale() -> LayeredModel {
        // p(h) = (0.5, 0.5); p(x=0|h) = (0.8, 0.2) → posterior (0.8, 0.2)
        LayeredModel::new(
            vec![0.5, 0.5],
            vec![DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.2, 0.8])],
        )
        .unwrap()
    }

    #[test]
    fn uniform_assignment_against_posterior() {
        let m = one_scale();
        let data = [1.0, 0.0];
        let nu = vec![DMatrix::from_element(2, 2, 0.5)];
        let r = decompose_likelihood(&m, &data, &nu).unwrap();
        let expected = 0.5 * (0.5f64 / 0.8).ln() + 0.5 * (0.5f64 / 0.2).ln();
        assert!((r.kl_terms[0] - expected).abs() < 1e-15);
        assert!((r.kl_terms[0] - 0.2231).abs() < 1e-4);
        assert!(r.identity_defect < 1e-12);
        assert!((r.complete_ll - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn posterior_is_tight() {
        let m = LayeredModel::new(
            vec![0.3, 0.7],
            vec![
                DMatrix::from_row_slice(3, 2, &[0.9, 0.1, 0.5, 0.5, 0.2, 0.8]),
                DMatrix::from_row_slice(2, 3, &[0.6, 0.3, 0.1, 0.1, 0.2, 0.7]),
            ],
        )
        .unwrap();
        let r = decompose_likelihood(&m, &[0.4, 0.6], &m.posterior()).unwrap();
        assert!(r.kl_terms.iter().all(|k| k.abs() < 1e-14));
        assert!((r.expected_ll - r.complete_ll).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let m = one_scale();
        let nu = vec![DMatrix::from_element(2, 2, 0.5)];
        assert!(matches!(
            decompose_likelihood(&m, &[0.5, 0.6], &nu),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            decompose_likelihood(&m, &[1.0, 0.0], &[DMatrix::from_element(2, 3, 1.0 / 3.0)]),
            Err(Error::Shape(_))
        ));
        let big = LayeredModel::new(
            vec![1.0 / 1000.0; 1000],
            vec![DMatrix::from_element(1000, 1001, 1.0 / 1001.0)],
        );
        assert!(matches!(big, Err(Error::Capacity(_))));

        // h=1 never emits x=1 and the prior never picks h=1: conditioning on
        // a zero-probability latent must name it.
        let m = LayeredModel::new(
            vec![1.0, 0.0],
            vec![
                DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]),
                DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            ],
        )
        .unwrap();
        let nu = vec![
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0]),
            DMatrix::from_element(2, 2, 0.5),
        ];
        match decompose_likelihood(&m, &[0.5, 0.5], &nu) {
            Err(Error::Domain(msg)) => assert!(msg.contains("h1=1"), "{msg}"),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn fp_bp_on_small_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = LayeredModel::new(
            vec![0.3, 0.7],
            vec![
                DMatrix::from_row_slice(3, 2, &[0.9, 0.1, 0.5, 0.5, 0.2, 0.8]),
                DMatrix::from_row_slice(2, 3, &[0.6, 0.3, 0.1, 0.1, 0.2, 0.7]),
            ],
        )
        .unwrap();
        let r = fp_bp_semantics_check(&m, &[0.4, 0.6], 200, &mut rng).unwrap();
        assert!(r.fp_holds);
        assert!(r.top_kl_gradient_at_minimum < 1e-8);
        assert!(r.bp_decreases);
    }

    #[test]
    fn file_roundtrip() {
        let text = r#"{"prior":[0.5,0.5],"down":[[[0.8,0.2],[0.2,0.8]]],"data":[1.0,0.0]}"#;
        let f = LayeredModelFile::from_json(text).unwrap();
        let (m, d, nu) = LayeredModel::from_file(&f).unwrap();
        assert_eq!(m, one_scale());
        assert_eq!(d, vec![1.0, 0.0]);
        assert!(nu.is_none());
    }
}
