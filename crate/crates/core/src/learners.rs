//! Linear regression and nearest-neighbour predictors, plus the feature
//! assembly that augments real-time measurements with pseudo-measurements
//! from the unobservable estimate.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};
use crate::estimator::{pseudo_from_un, un, SolverOptions};
use crate::grid::AdmittanceMatrix;
use crate::measurement::{MeasurementPlan, StateVector};

/// Floor on per-output residual standard deviation.
pub const RESIDUAL_SIGMA_FLOOR: f64 = 1e-6;
/// Relative singular-value cutoff for the regression solve.
const OLS_RCOND: f64 = 1e-12;

/// Affine multi-output model `y = W x + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// outputs × features
    pub weights: DMatrix<f64>,
    pub intercept: DVector<f64>,
    pub feature_names: Vec<String>,
    pub output_names: Vec<String>,
    /// Training-residual standard deviation per output, floored.
    pub residual_sigma: DVector<f64>,
    /// Training mean squared error per output (unfloored).
    pub train_mse: DVector<f64>,
    /// Training residual mean per output.
    pub train_residual_mean: DVector<f64>,
    pub rank: usize,
}

/// Ordinary least squares with intercept for every column of `y`.
///
/// Columns of `x` are centred and scaled before an SVD solve; directions
/// with singular value below `1e-12 * s_max` get zero weight, which yields
/// the minimal-norm solution (in scaled coordinates) when the design is
/// rank deficient.
pub fn fit_linear(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<LinearModel> {
    let (n, p) = x.shape();
    if y.nrows() != n {
        return Err(Error::Shape {
            expected: n,
            got: y.nrows(),
        });
    }
    if n <= p + 1 {
        return Err(Error::Config(format!(
            "linear fit needs more than {} instances, got {n}",
            p + 1
        )));
    }
    let x_mean = x.row_mean().transpose();
    let y_mean = y.row_mean().transpose();
    let mut xs = x.clone();
    let mut scale = DVector::from_element(p, 1.0);
    for (j, mut col) in xs.column_iter_mut().enumerate() {
        col.add_scalar_mut(-x_mean[j]);
        let s = (col.norm_squared() / n as f64).sqrt();
        if s > 0.0 {
            col /= s;
            scale[j] = s;
        }
    }
    let mut yc = y.clone();
    for (j, mut col) in yc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-y_mean[j]);
    }

    let svd = SVD::new(xs.clone(), true, true);
    let u = svd.u.as_ref().expect("U computed");
    let v_t = svd.v_t.as_ref().expect("V^T computed");
    let s_max = svd.singular_values.max();
    let mut c = u.tr_mul(&yc);
    let mut rank = 0;
    for (i, mut row) in c.row_iter_mut().enumerate() {
        let s = svd.singular_values[i];
        if s > OLS_RCOND * s_max && s > 0.0 {
            row /= s;
            rank += 1;
        } else {
            row.fill(0.0);
        }
    }
    if rank < p {
        log::warn!(
            "rank-deficient design ({rank} of {p} columns); using minimal-norm coefficients"
        );
    }
    // coefficients in scaled coordinates, features × outputs
    let beta_scaled = v_t.tr_mul(&c);
    let residual = &yc - &xs * &beta_scaled;

    let mut weights = beta_scaled.transpose();
    for (j, mut col) in weights.column_iter_mut().enumerate() {
        col /= scale[j];
    }
    let intercept = &y_mean - &weights * &x_mean;

    let train_mse = DVector::from_iterator(
        residual.ncols(),
        residual.column_iter().map(|c| c.norm_squared() / n as f64),
    );
    let train_residual_mean = residual.row_mean().transpose();
    let residual_sigma = train_mse.map(|m| m.sqrt().max(RESIDUAL_SIGMA_FLOOR));

    Ok(LinearModel {
        weights,
        intercept,
        feature_names: (1..=p).map(|k| format!("x{k}")).collect(),
        output_names: (1..=y.ncols()).map(|k| format!("y{k}")).collect(),
        residual_sigma,
        train_mse,
        train_residual_mean,
        rank,
    })
}

impl LinearModel {
    pub fn n_features(&self) -> usize {
        self.weights.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn with_names(mut self, features: Vec<String>, outputs: Vec<String>) -> Result<Self> {
        if features.len() != self.n_features() {
            return Err(Error::Shape {
                expected: self.n_features(),
                got: features.len(),
            });
        }
        if outputs.len() != self.n_outputs() {
            return Err(Error::Shape {
                expected: self.n_outputs(),
                got: outputs.len(),
            });
        }
        self.feature_names = features;
        self.output_names = outputs;
        Ok(self)
    }

    pub fn predict(&self, features: &DVector<f64>) -> Result<DVector<f64>> {
        if features.len() != self.n_features() {
            return Err(Error::Shape {
                expected: self.n_features(),
                got: features.len(),
            });
        }
        Ok(&self.weights * features + &self.intercept)
    }

    /// Coefficients as CSV: one row per output with intercept, one column
    /// per feature, and the residual sigma.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("output,intercept");
        for f in &self.feature_names {
            out.push(',');
            out.push_str(f);
        }
        out.push_str(",residual_sigma\n");
        for (i, name) in self.output_names.iter().enumerate() {
            out.push_str(name);
            out.push_str(&format!(",{:?}", self.intercept[i]));
            for w in self.weights.row(i).iter() {
                out.push_str(&format!(",{w:?}"));
            }
            out.push_str(&format!(",{:?}\n", self.residual_sigma[i]));
        }
        out
    }
}

/// Total order on distances; ties resolve to the lower training index.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Brute-force k-nearest-neighbour regressor under Euclidean distance.
#[derive(Debug, Clone)]
pub struct KnnRegressor {
    /// features × instances, one training point per column
    points: DMatrix<f64>,
    /// targets × instances
    targets: DMatrix<f64>,
    /// per-feature (mean, std) when standardising
    scaling: Option<(DVector<f64>, DVector<f64>)>,
}

impl KnnRegressor {
    /// `train_x` and `train_y` hold one instance per row.
    pub fn new(train_x: &DMatrix<f64>, train_y: &DMatrix<f64>, standardize: bool) -> Result<Self> {
        if train_x.nrows() == 0 {
            return Err(Error::Empty("k-NN training set".into()));
        }
        if train_y.nrows() != train_x.nrows() {
            return Err(Error::Shape {
                expected: train_x.nrows(),
                got: train_y.nrows(),
            });
        }
        let mut points = train_x.transpose();
        let scaling = standardize.then(|| {
            let n = train_x.nrows() as f64;
            let mean = train_x.row_mean().transpose();
            let std = DVector::from_iterator(
                train_x.ncols(),
                train_x.column_iter().zip(mean.iter()).map(|(c, m)| {
                    let s = (c.map(|v| (v - m).powi(2)).sum() / n).sqrt();
                    if s > 0.0 {
                        s
                    } else {
                        1.0
                    }
                }),
            );
            for mut col in points.column_iter_mut() {
                col -= &mean;
                col.component_div_assign(&std);
            }
            (mean, std)
        });
        Ok(KnnRegressor {
            points,
            targets: train_y.transpose(),
            scaling,
        })
    }

    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.points.ncols() == 0
    }

    /// Training indices of the `k` nearest points, closest first.
    pub fn neighbors(&self, query: &DVector<f64>, k: usize) -> Result<Vec<usize>> {
        if query.len() != self.points.nrows() {
            return Err(Error::Shape {
                expected: self.points.nrows(),
                got: query.len(),
            });
        }
        if k == 0 || k > self.len() {
            return Err(Error::Config(format!(
                "k = {k} must lie in 1..={}",
                self.len()
            )));
        }
        let q = match &self.scaling {
            Some((mean, std)) => (query - mean).component_div(std),
            None => query.clone(),
        };
        let mut heap = BinaryHeap::with_capacity(k + 1);
        for (index, col) in self.points.column_iter().enumerate() {
            let dist = col
                .iter()
                .zip(q.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            let cand = Candidate { dist, index };
            if heap.len() < k {
                heap.push(cand);
            } else if cand < *heap.peek().expect("heap is full") {
                heap.pop();
                heap.push(cand);
            }
        }
        Ok(heap
            .into_sorted_vec()
            .into_iter()
            .map(|c| c.index)
            .collect())
    }

    /// Unweighted mean of the `k` nearest training targets.
    pub fn predict(&self, query: &DVector<f64>, k: usize) -> Result<DVector<f64>> {
        let idx = self.neighbors(query, k)?;
        let mut sum = DVector::zeros(self.targets.nrows());
        for &i in &idx {
            sum += self.targets.column(i);
        }
        Ok(sum / idx.len() as f64)
    }
}

/// One-shot k-NN prediction on raw features.
pub fn knn_predict(
    train_z_a: &DMatrix<f64>,
    train_targets: &DMatrix<f64>,
    query_z_a: &DVector<f64>,
    k: usize,
) -> Result<DVector<f64>> {
    KnnRegressor::new(train_z_a, train_targets, false)?.predict(query_z_a, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureMode {
    /// Real-time measurements only.
    Plain,
    /// Real-time measurements followed by pseudo-measurements evaluated at
    /// the unobservable estimate.
    Enhanced,
}

/// Result of assembling one instance's features.
#[derive(Debug, Clone, PartialEq)]
pub struct Assembled {
    pub features: DVector<f64>,
    /// The unobservable estimate, when one was computed.
    pub x_tilde: Option<StateVector>,
    /// False when the unobservable solve did not converge; such instances
    /// are excluded downstream.
    pub ok: bool,
}

/// Builds feature vectors for a fixed real-time/delayed plan split.
#[derive(Debug, Clone)]
pub struct FeatureAssembler<'a> {
    pub realtime: MeasurementPlan,
    pub delayed: MeasurementPlan,
    pub adm: &'a AdmittanceMatrix,
    pub opts: SolverOptions,
}

impl<'a> FeatureAssembler<'a> {
    pub fn new(plan: &MeasurementPlan, adm: &'a AdmittanceMatrix, opts: SolverOptions) -> Self {
        FeatureAssembler {
            realtime: plan.realtime(),
            delayed: plan.delayed(),
            adm,
            opts,
        }
    }

    pub fn len(&self, mode: FeatureMode) -> usize {
        match mode {
            FeatureMode::Plain => self.realtime.m(),
            FeatureMode::Enhanced => self.realtime.m() + self.delayed.m(),
        }
    }

    /// Solve the unobservable problem for `z_a` from flat start.
    pub fn unobservable(&self, z_a: &DVector<f64>) -> Result<(StateVector, bool)> {
        let init = StateVector::flat(self.adm.n_buses(), self.adm.slack);
        let rep = un(
            z_a,
            &self.realtime,
            &self.realtime.weights(),
            &init,
            self.adm,
            &self.opts,
        )?;
        Ok((rep.x_hat, rep.converged))
    }

    pub fn assemble(&self, z_a: &DVector<f64>, mode: FeatureMode) -> Result<Assembled> {
        if z_a.len() != self.realtime.m() {
            return Err(Error::Shape {
                expected: self.realtime.m(),
                got: z_a.len(),
            });
        }
        if mode == FeatureMode::Plain || self.delayed.m() == 0 {
            return Ok(Assembled {
                features: z_a.clone(),
                x_tilde: None,
                ok: true,
            });
        }
        let (x_tilde, ok) = self.unobservable(z_a)?;
        Ok(Assembled {
            features: self.enhanced_from(z_a, &x_tilde),
            x_tilde: Some(x_tilde),
            ok,
        })
    }

    /// `[z_a, h_d(x_tilde)]` for an already solved unobservable estimate.
    pub fn enhanced_from(&self, z_a: &DVector<f64>, x_tilde: &StateVector) -> DVector<f64> {
        let pseudo = pseudo_from_un(x_tilde, &self.delayed, self.adm);
        let mut f = z_a.clone().resize_vertically(z_a.len() + pseudo.len(), 0.0);
        f.rows_mut(z_a.len(), pseudo.len()).copy_from(&pseudo);
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_admittance, parse_case, IEEE33_CASE};
    use crate::measurement::{default_plan, Placement};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn exact_linear_data_is_reproduced() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_matrix(&mut rng, 40, 5);
        let w = random_matrix(&mut rng, 3, 5);
        let c = DVector::from_vec(vec![0.5, -2.0, 3.0]);
        let mut y = &x * w.transpose();
        for mut row in y.row_iter_mut() {
            row += c.transpose();
        }
        let m = fit_linear(&x, &y).unwrap();
        assert!(m.train_mse.iter().all(|&v| v <= 1e-18));
        assert!((&m.weights - &w).amax() < 1e-10);
        assert!((&m.intercept - &c).amax() < 1e-10);
        let row = x.row(7).transpose();
        let pred = m.predict(&row).unwrap();
        assert!((pred - y.row(7).transpose()).amax() < 1e-10);
    }

    #[test]
    fn constant_target_gives_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_matrix(&mut rng, 30, 4);
        let y = DMatrix::from_element(30, 1, 2.5);
        let m = fit_linear(&x, &y).unwrap();
        assert!(m.weights.amax() < 1e-12);
        assert!((m.intercept[0] - 2.5).abs() < 1e-12);
        assert_eq!(m.residual_sigma[0], RESIDUAL_SIGMA_FLOOR);
    }

    #[test]
    fn zero_features_predict_intercept() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_matrix(&mut rng, 30, 4);
        let y = random_matrix(&mut rng, 30, 2);
        let m = fit_linear(&x, &y).unwrap();
        assert_eq!(m.predict(&DVector::zeros(4)).unwrap(), m.intercept);
        assert!(matches!(
            m.predict(&DVector::zeros(3)),
            Err(Error::Shape {
                expected: 4,
                got: 3
            })
        ));
    }

    #[test]
    fn too_few_instances() {
        let x = DMatrix::zeros(5, 4);
        let y = DMatrix::zeros(5, 1);
        assert!(fit_linear(&x, &y).is_err());
    }

    #[test]
    fn duplicated_column_takes_minimal_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base = random_matrix(&mut rng, 50, 2);
        let x = DMatrix::from_fn(50, 3, |i, j| base[(i, j.min(1))]);
        let y = DMatrix::from_fn(50, 1, |i, _| 2.0 * base[(i, 1)] + 1.0);
        let m = fit_linear(&x, &y).unwrap();
        assert_eq!(m.rank, 2);
        // the weight is split evenly across the duplicated columns
        assert!((m.weights[(0, 1)] - 1.0).abs() < 1e-9);
        assert!((m.weights[(0, 2)] - 1.0).abs() < 1e-9);
        assert!(m.train_mse[0] < 1e-20);
    }

    #[test]
    fn knn_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_matrix(&mut rng, 25, 3);
        let y = random_matrix(&mut rng, 25, 2);
        let q = x.row(4).transpose();
        assert_eq!(knn_predict(&x, &y, &q, 1).unwrap(), y.row(4).transpose());
        let all = knn_predict(&x, &y, &q, 25).unwrap();
        assert!((all - y.row_mean().transpose()).amax() < 1e-12);
        assert!(knn_predict(&x, &y, &q, 26).is_err());
        let empty = DMatrix::<f64>::zeros(0, 3);
        assert!(matches!(
            knn_predict(&empty, &DMatrix::zeros(0, 2), &q, 1),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn standardized_knn_ignores_feature_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_matrix(&mut rng, 30, 2);
        let mut stretched = x.clone();
        stretched.column_mut(1).scale_mut(1e6);
        let y = random_matrix(&mut rng, 30, 1);
        let q = DVector::from_vec(vec![0.1, -0.2]);
        let mut q2 = q.clone();
        q2[1] *= 1e6;
        let a = KnnRegressor::new(&x, &y, true).unwrap();
        let b = KnnRegressor::new(&stretched, &y, true).unwrap();
        assert_eq!(a.neighbors(&q, 5).unwrap(), b.neighbors(&q2, 5).unwrap());
    }

    #[test]
    fn feature_lengths() {
        let net = parse_case(IEEE33_CASE).unwrap();
        let adm = build_admittance(&net).unwrap();
        let plan = default_plan(&net, 5, 15, &Placement::reference()).unwrap();
        let fa = FeatureAssembler::new(&plan, &adm, SolverOptions::default());
        assert_eq!(fa.len(FeatureMode::Plain), 43);
        assert_eq!(fa.len(FeatureMode::Enhanced), 79);
        let z = crate::measurement::eval_h(&StateVector::flat(33, 0), &fa.realtime, &adm);
        let enh = fa.assemble(&z, FeatureMode::Enhanced).unwrap();
        assert!(enh.ok);
        assert_eq!(enh.features.len(), 79);
        assert_eq!(enh.features.rows(0, 43), z.rows(0, 43));

        let full = default_plan(&net, 0, 32, &Placement::default()).unwrap();
        let fa = FeatureAssembler::new(&full, &adm, SolverOptions::default());
        let z = DVector::zeros(full.m_a());
        let a = fa.assemble(&z, FeatureMode::Enhanced).unwrap();
        assert_eq!(a.features, z);
        assert!(a.x_tilde.is_none());
    }

    #[test]
    fn model_csv_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_matrix(&mut rng, 20, 2);
        let y = random_matrix(&mut rng, 20, 2);
        let m = fit_linear(&x, &y)
            .unwrap()
            .with_names(
                vec!["za_1".into(), "za_2".into()],
                vec!["v_1".into(), "v_2".into()],
            )
            .unwrap();
        let csv = m.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("output,intercept,za_1,za_2,residual_sigma")
        );
        assert!(lines.next().unwrap().starts_with("v_1,"));
        assert_eq!(csv.lines().count(), 3);
    }
}
