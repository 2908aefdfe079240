//! The nine estimation approaches as uniform train/estimate pipelines.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{pseudo_from_un, wls, SolverOptions, WlsProblem};
use crate::grid::{AdmittanceMatrix, Network};
use crate::learners::{fit_linear, FeatureAssembler, FeatureMode, KnnRegressor, LinearModel};
use crate::measurement::{power_outputs, MeasurementPlan, PowerOutputs, StateVector};
use crate::scenario::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Full WLS with the delayed measurements available.
    Bn,
    /// Flat voltage profile.
    Fl,
    /// Underdetermined WLS on real-time measurements.
    Un,
    /// Linear state regression on real-time measurements.
    Sf,
    /// Linear state regression on enhanced features.
    SfStar,
    Nn1,
    Nn20,
    /// WLS with linearly predicted pseudo-measurements.
    Pm,
    /// WLS with pseudo-measurements predicted from enhanced features.
    PmStar,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Bn,
        Method::Fl,
        Method::Un,
        Method::Sf,
        Method::SfStar,
        Method::Nn1,
        Method::Nn20,
        Method::Pm,
        Method::PmStar,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Bn => "BN",
            Method::Fl => "FL",
            Method::Un => "UN",
            Method::Sf => "SF",
            Method::SfStar => "SF*",
            Method::Nn1 => "NN1",
            Method::Nn20 => "NN20",
            Method::Pm => "PM",
            Method::PmStar => "PM*",
        }
    }

    /// Whether the method trains on retrospective state labels.
    pub fn needs_labels(self) -> bool {
        matches!(
            self,
            Method::Sf | Method::SfStar | Method::Nn1 | Method::Nn20
        )
    }

    /// Whether the method produces estimates of the delayed measurements.
    pub fn has_pseudo(self) -> bool {
        matches!(self, Method::Un | Method::Pm | Method::PmStar)
    }

    fn neighbors(self) -> Option<usize> {
        match self {
            Method::Nn1 => Some(1),
            Method::Nn20 => Some(20),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase().replace("STAR", "*");
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == key)
            .ok_or_else(|| Error::UnsupportedMethod(s.trim().to_string()))
    }
}

/// Parse a comma-separated method list, keeping the given order and
/// dropping repeats.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for item in list.split(',').filter(|s| !s.trim().is_empty()) {
        let m: Method = item.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

/// Outcome of one state-estimation solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Solved {
    pub x_hat: StateVector,
    pub converged: bool,
    pub objective: f64,
}

/// Per-instance estimates of one method over the test split.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSet {
    pub method: Method,
    /// Dataset indices, aligned with every other vector.
    pub instances: Vec<usize>,
    pub states: Vec<StateVector>,
    /// Injections and flows recomputed from each estimate.
    pub outputs: Vec<PowerOutputs>,
    pub converged: Vec<bool>,
    /// Estimated delayed measurements, for methods that produce them.
    pub pseudo: Option<Vec<DVector<f64>>>,
}

impl EstimateSet {
    fn new(
        method: Method,
        instances: Vec<usize>,
        states: Vec<StateVector>,
        converged: Vec<bool>,
        pseudo: Option<Vec<DVector<f64>>>,
        adm: &AdmittanceMatrix,
    ) -> Self {
        let outputs = states.par_iter().map(|x| derived_outputs(x, adm)).collect();
        EstimateSet {
            method,
            instances,
            states,
            outputs,
            converged,
            pseudo,
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn n_flagged(&self) -> usize {
        self.converged.iter().filter(|c| !**c).count()
    }

    /// Rows keyed by instance and method: flag, magnitudes, angles (rad).
    pub fn to_csv(&self, net: &Network) -> String {
        let mut out = String::from("instance,method,converged");
        for b in &net.buses {
            out.push_str(&format!(",v_{}", b.id));
        }
        for b in &net.buses {
            out.push_str(&format!(",th_{}", b.id));
        }
        out.push('\n');
        self.append_rows(&mut out);
        out
    }

    pub(crate) fn append_rows(&self, out: &mut String) {
        for ((idx, x), ok) in self.instances.iter().zip(&self.states).zip(&self.converged) {
            out.push_str(&format!("{idx},{},{}", self.method, u8::from(*ok)));
            for v in x.v.iter().chain(&x.theta) {
                out.push_str(&format!(",{v:?}"));
            }
            out.push('\n');
        }
    }
}

/// Injections and from-end flows of an estimated state.
pub fn derived_outputs(x_hat: &StateVector, adm: &AdmittanceMatrix) -> PowerOutputs {
    power_outputs(x_hat, adm)
}

/// Training data for the learned methods. Holds nothing from the test split.
#[derive(Debug, Clone)]
pub struct TrainingView {
    /// Dataset indices of the rows kept for fitting.
    pub indices: Vec<usize>,
    /// Training indices dropped because a label or `un` solve failed.
    pub excluded: Vec<usize>,
    /// instances × m_a
    pub z_a: DMatrix<f64>,
    /// instances × m_d, delayed measurements evaluated at the `un` estimate
    pub pseudo: DMatrix<f64>,
    /// instances × m_d
    pub z_d: DMatrix<f64>,
    /// instances × (2n-1) retrospective states, when computed
    pub labels: Option<DMatrix<f64>>,
}

impl TrainingView {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn features(&self, mode: FeatureMode) -> DMatrix<f64> {
        match mode {
            FeatureMode::Plain => self.z_a.clone(),
            FeatureMode::Enhanced => {
                let (n, ma) = self.z_a.shape();
                let md = self.pseudo.ncols();
                let mut f = DMatrix::zeros(n, ma + md);
                f.columns_mut(0, ma).copy_from(&self.z_a);
                f.columns_mut(ma, md).copy_from(&self.pseudo);
                f
            }
        }
    }

    fn labels(&self) -> Result<&DMatrix<f64>> {
        self.labels
            .as_ref()
            .ok_or_else(|| Error::Config("retrospective labels were not computed".into()))
    }
}

/// Inputs available when estimating a test instance.
#[derive(Debug, Clone)]
pub struct TestView {
    pub indices: Vec<usize>,
    pub z_a: Vec<DVector<f64>>,
    /// Only read by the full-information benchmark.
    pub z_d: Vec<DVector<f64>>,
    pub un: Vec<Solved>,
}

/// Models fitted on a training view.
#[derive(Debug, Clone, Default)]
pub struct FittedModels {
    pub sf: Option<LinearModel>,
    pub sf_star: Option<LinearModel>,
    pub knn: Option<KnnRegressor>,
    pub pm: Option<LinearModel>,
    pub pm_star: Option<LinearModel>,
}

impl FittedModels {
    fn get(&self, method: Method) -> Result<&LinearModel> {
        let m = match method {
            Method::Sf => &self.sf,
            Method::SfStar => &self.sf_star,
            Method::Pm => &self.pm,
            Method::PmStar => &self.pm_star,
            _ => &None,
        };
        m.as_ref()
            .ok_or_else(|| Error::Config(format!("no fitted model for {method}")))
    }
}

/// Everything produced by running a set of methods on a dataset.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub sets: Vec<EstimateSet>,
    pub models: FittedModels,
    pub n_train_used: usize,
    pub train_excluded: Vec<usize>,
    /// `un` solutions on the test split, aligned with `test_indices`.
    pub test_un: Vec<Solved>,
    pub test_indices: Vec<usize>,
    /// Solves attempted and solves that failed to converge, all stages.
    pub solves: usize,
    pub diverged: usize,
}

impl PipelineOutcome {
    pub fn set(&self, method: Method) -> Option<&EstimateSet> {
        self.sets.iter().find(|s| s.method == method)
    }

    pub fn divergence_fraction(&self) -> f64 {
        if self.solves == 0 {
            0.0
        } else {
            self.diverged as f64 / self.solves as f64
        }
    }
}

/// Shared state for running estimation methods on one network and plan.
#[derive(Debug, Clone)]
pub struct Pipeline<'a> {
    pub net: &'a Network,
    pub adm: &'a AdmittanceMatrix,
    pub plan: MeasurementPlan,
    pub assembler: FeatureAssembler<'a>,
    pub opts: SolverOptions,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        net: &'a Network,
        adm: &'a AdmittanceMatrix,
        plan: &MeasurementPlan,
        opts: SolverOptions,
    ) -> Self {
        Pipeline {
            net,
            adm,
            plan: plan.clone(),
            assembler: FeatureAssembler::new(plan, adm, opts.clone()),
            opts,
        }
    }

    fn flat(&self) -> StateVector {
        StateVector::flat(self.adm.n_buses(), self.adm.slack)
    }

    fn wls_from(
        &self,
        z: &DVector<f64>,
        weights: &DVector<f64>,
        init: StateVector,
    ) -> Result<Solved> {
        let rep = wls(
            &WlsProblem {
                plan: &self.plan,
                adm: self.adm,
                z: z.clone(),
                weights: weights.clone(),
                init,
            },
            &self.opts,
        )?;
        Ok(Solved {
            x_hat: rep.x_hat,
            converged: rep.converged,
            objective: rep.objective,
        })
    }

    /// Full-plan WLS from flat start, retried from the `un` estimate of
    /// `z_a` when the first attempt does not converge.
    fn full_wls(
        &self,
        z_a: &DVector<f64>,
        z_d: &DVector<f64>,
        weights: &DVector<f64>,
        un_hint: Option<&Solved>,
    ) -> Result<Solved> {
        let mut z = z_a.clone().resize_vertically(self.plan.m(), 0.0);
        z.rows_mut(z_a.len(), z_d.len()).copy_from(z_d);
        let first = self.wls_from(&z, weights, self.flat())?;
        if first.converged {
            return Ok(first);
        }
        let restart = match un_hint {
            Some(s) => s.x_hat.clone(),
            None => self.solve_un(z_a)?.x_hat,
        };
        let second = self.wls_from(&z, weights, restart)?;
        Ok(if second.converged || second.objective < first.objective {
            second
        } else {
            first
        })
    }

    fn solve_un(&self, z_a: &DVector<f64>) -> Result<Solved> {
        let rep = crate::estimator::un(
            z_a,
            &self.assembler.realtime,
            &self.assembler.realtime.weights(),
            &self.flat(),
            self.adm,
            &self.opts,
        )?;
        Ok(Solved {
            x_hat: rep.x_hat,
            converged: rep.converged,
            objective: rep.objective,
        })
    }

    /// Retrospective estimates `wls(z_a, z_d)` for the given instances.
    pub fn retrospective(&self, dataset: &Dataset, indices: &[usize]) -> Result<Vec<Solved>> {
        let weights = self.plan.weights();
        indices
            .par_iter()
            .map(|&k| {
                let inst = &dataset.instances[k];
                self.full_wls(&inst.z_a, &inst.z_d, &weights, None)
            })
            .collect()
    }

    /// Unobservable estimates `un(z_a)` for the given instances.
    pub fn unobservable(&self, dataset: &Dataset, indices: &[usize]) -> Result<Vec<Solved>> {
        indices
            .par_iter()
            .map(|&k| self.solve_un(&dataset.instances[k].z_a))
            .collect()
    }

    /// Collect the training rows whose `un` solve (and label, if given)
    /// converged. `un` and `labels` are aligned with `dataset.train`.
    pub fn training_view(
        &self,
        dataset: &Dataset,
        un: &[Solved],
        labels: Option<&[Solved]>,
    ) -> Result<TrainingView> {
        let train = &dataset.train;
        if un.len() != train.len() {
            return Err(Error::Shape {
                expected: train.len(),
                got: un.len(),
            });
        }
        if let Some(l) = labels {
            if l.len() != train.len() {
                return Err(Error::Shape {
                    expected: train.len(),
                    got: l.len(),
                });
            }
        }
        let keep: Vec<usize> = (0..train.len())
            .filter(|&r| un[r].converged && labels.map_or(true, |l| l[r].converged))
            .collect();
        let excluded = (0..train.len())
            .filter(|r| !keep.contains(r))
            .map(|r| train[r])
            .collect::<Vec<_>>();
        if keep.is_empty() {
            return Err(Error::Empty("training view".into()));
        }
        let (ma, md) = (self.plan.m_a(), self.plan.m_d());
        let n = keep.len();
        let delayed = &self.assembler.delayed;
        let z_a = DMatrix::from_fn(n, ma, |i, j| dataset.instances[train[keep[i]]].z_a[j]);
        let z_d = DMatrix::from_fn(n, md, |i, j| dataset.instances[train[keep[i]]].z_d[j]);
        let pseudo_rows: Vec<DVector<f64>> = keep
            .par_iter()
            .map(|&r| pseudo_from_un(&un[r].x_hat, delayed, self.adm))
            .collect();
        let pseudo = DMatrix::from_fn(n, md, |i, j| pseudo_rows[i][j]);
        let labels = labels.map(|l| {
            let rows: Vec<DVector<f64>> = keep.iter().map(|&r| l[r].x_hat.to_free()).collect();
            DMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j])
        });
        if !excluded.is_empty() {
            log::warn!(
                "{} training instances excluded after failed solves",
                excluded.len()
            );
        }
        Ok(TrainingView {
            indices: keep.iter().map(|&r| train[r]).collect(),
            excluded,
            z_a,
            pseudo,
            z_d,
            labels,
        })
    }

    fn feature_names(&self, mode: FeatureMode) -> Vec<String> {
        let mut names: Vec<String> = self
            .assembler
            .realtime
            .specs()
            .iter()
            .map(|s| format!("za_{}", s.kind.label(self.net)))
            .collect();
        if mode == FeatureMode::Enhanced {
            names.extend(
                self.assembler
                    .delayed
                    .specs()
                    .iter()
                    .map(|s| format!("pseudo_{}", s.kind.label(self.net))),
            );
        }
        names
    }

    fn state_names(&self) -> Vec<String> {
        let slack = self.adm.slack;
        let mut names: Vec<String> = self
            .net
            .buses
            .iter()
            .map(|b| format!("v_{}", b.id))
            .collect();
        names.extend(
            self.net
                .buses
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != slack)
                .map(|(_, b)| format!("th_{}", b.id)),
        );
        names
    }

    fn delayed_names(&self) -> Vec<String> {
        self.assembler
            .delayed
            .specs()
            .iter()
            .map(|s| s.kind.label(self.net))
            .collect()
    }

    /// Fit every model the requested methods need.
    pub fn fit(&self, view: &TrainingView, methods: &[Method]) -> Result<FittedModels> {
        let mut fitted = FittedModels::default();
        let linear = |mode: FeatureMode, targets: &DMatrix<f64>, outputs: Vec<String>| {
            fit_linear(&view.features(mode), targets)?.with_names(self.feature_names(mode), outputs)
        };
        for &m in methods {
            match m {
                Method::Sf if fitted.sf.is_none() => {
                    fitted.sf = Some(linear(
                        FeatureMode::Plain,
                        view.labels()?,
                        self.state_names(),
                    )?);
                }
                Method::SfStar if fitted.sf_star.is_none() => {
                    fitted.sf_star = Some(linear(
                        FeatureMode::Enhanced,
                        view.labels()?,
                        self.state_names(),
                    )?);
                }
                Method::Nn1 | Method::Nn20 if fitted.knn.is_none() => {
                    fitted.knn = Some(KnnRegressor::new(&view.z_a, view.labels()?, false)?);
                }
                Method::Pm if fitted.pm.is_none() => {
                    fitted.pm = Some(linear(FeatureMode::Plain, &view.z_d, self.delayed_names())?);
                }
                Method::PmStar if fitted.pm_star.is_none() => {
                    fitted.pm_star = Some(linear(
                        FeatureMode::Enhanced,
                        &view.z_d,
                        self.delayed_names(),
                    )?);
                }
                _ => {}
            }
        }
        Ok(fitted)
    }

    /// Gather the test-split inputs, including `un` solutions.
    pub fn test_view(&self, dataset: &Dataset, un: Vec<Solved>) -> Result<TestView> {
        if un.len() != dataset.test.len() {
            return Err(Error::Shape {
                expected: dataset.test.len(),
                got: un.len(),
            });
        }
        Ok(TestView {
            indices: dataset.test.clone(),
            z_a: dataset
                .test
                .iter()
                .map(|&k| dataset.instances[k].z_a.clone())
                .collect(),
            z_d: dataset
                .test
                .iter()
                .map(|&k| dataset.instances[k].z_d.clone())
                .collect(),
            un,
        })
    }

    fn features(&self, test: &TestView, r: usize, mode: FeatureMode) -> DVector<f64> {
        match mode {
            FeatureMode::Plain => test.z_a[r].clone(),
            FeatureMode::Enhanced => self
                .assembler
                .enhanced_from(&test.z_a[r], &test.un[r].x_hat),
        }
    }

    /// Estimate every test instance with one method.
    pub fn run_method(
        &self,
        method: Method,
        models: &FittedModels,
        test: &TestView,
    ) -> Result<EstimateSet> {
        let n = self.adm.n_buses();
        let slack = self.adm.slack;
        let rows: Vec<usize> = (0..test.indices.len()).collect();
        let (states, converged, pseudo): (Vec<StateVector>, Vec<bool>, Option<Vec<DVector<f64>>>) =
            match method {
                Method::Fl => (vec![self.flat(); rows.len()], vec![true; rows.len()], None),
                Method::Un => {
                    let pseudo = rows
                        .par_iter()
                        .map(|&r| {
                            pseudo_from_un(&test.un[r].x_hat, &self.assembler.delayed, self.adm)
                        })
                        .collect();
                    (
                        test.un.iter().map(|s| s.x_hat.clone()).collect(),
                        test.un.iter().map(|s| s.converged).collect(),
                        Some(pseudo),
                    )
                }
                Method::Bn => {
                    let weights = self.plan.weights();
                    let solved: Vec<Solved> = rows
                        .par_iter()
                        .map(|&r| {
                            self.full_wls(&test.z_a[r], &test.z_d[r], &weights, Some(&test.un[r]))
                        })
                        .collect::<Result<_>>()?;
                    unzip_solved(solved, None)
                }
                Method::Sf | Method::SfStar => {
                    let model = models.get(method)?;
                    let mode = feature_mode(method);
                    let states: Vec<StateVector> = rows
                        .par_iter()
                        .map(|&r| {
                            let y = model.predict(&self.features(test, r, mode))?;
                            Ok(StateVector::from_free(&y, n, slack))
                        })
                        .collect::<Result<_>>()?;
                    let converged = rows
                        .iter()
                        .map(|&r| mode == FeatureMode::Plain || test.un[r].converged)
                        .collect();
                    (states, converged, None)
                }
                Method::Nn1 | Method::Nn20 => {
                    let knn = models
                        .knn
                        .as_ref()
                        .ok_or_else(|| Error::Config(format!("no fitted model for {method}")))?;
                    let k = method.neighbors().expect("neighbour method");
                    let states: Vec<StateVector> = rows
                        .par_iter()
                        .map(|&r| {
                            Ok(StateVector::from_free(
                                &knn.predict(&test.z_a[r], k)?,
                                n,
                                slack,
                            ))
                        })
                        .collect::<Result<_>>()?;
                    (states, vec![true; rows.len()], None)
                }
                Method::Pm | Method::PmStar => {
                    let model = models.get(method)?;
                    let mode = feature_mode(method);
                    let mut weights = self.assembler.realtime.weights();
                    let pseudo_w = model.residual_sigma.map(|s| s.powi(-2));
                    weights = weights.resize_vertically(self.plan.m(), 0.0);
                    weights
                        .rows_mut(self.plan.m_a(), self.plan.m_d())
                        .copy_from(&pseudo_w);
                    let solved: Vec<(Solved, DVector<f64>)> = rows
                        .par_iter()
                        .map(|&r| {
                            let z_hat = model.predict(&self.features(test, r, mode))?;
                            let mut s =
                                self.full_wls(&test.z_a[r], &z_hat, &weights, Some(&test.un[r]))?;
                            if mode == FeatureMode::Enhanced {
                                s.converged &= test.un[r].converged;
                            }
                            Ok((s, z_hat))
                        })
                        .collect::<Result<_>>()?;
                    let (solved, pseudo): (Vec<_>, Vec<_>) = solved.into_iter().unzip();
                    unzip_solved(solved, Some(pseudo))
                }
            };
        Ok(EstimateSet::new(
            method,
            test.indices.clone(),
            states,
            converged,
            pseudo,
            self.adm,
        ))
    }

    /// Labels, `un` solves, fitting and estimation for `methods` on the
    /// dataset's own train/test split.
    pub fn run(&self, dataset: &Dataset, methods: &[Method]) -> Result<PipelineOutcome> {
        let needs_labels = methods.iter().any(|m| m.needs_labels());
        let needs_training = methods
            .iter()
            .any(|m| m.needs_labels() || matches!(m, Method::Pm | Method::PmStar));

        let mut solves = 0;
        let mut diverged = 0;
        let mut tally = |s: &[Solved]| {
            solves += s.len();
            diverged += s.iter().filter(|x| !x.converged).count();
        };

        let (models, n_train_used, train_excluded) = if needs_training {
            let un_train = self
                .unobservable(dataset, &dataset.train)
                .map_err(Error::in_stage("unobservable"))?;
            tally(&un_train);
            let labels = if needs_labels {
                let l = self
                    .retrospective(dataset, &dataset.train)
                    .map_err(Error::in_stage("labels"))?;
                tally(&l);
                Some(l)
            } else {
                None
            };
            let view = self
                .training_view(dataset, &un_train, labels.as_deref())
                .map_err(Error::in_stage("fit"))?;
            let models = self.fit(&view, methods).map_err(Error::in_stage("fit"))?;
            (models, view.len(), view.excluded)
        } else {
            (FittedModels::default(), 0, Vec::new())
        };

        let test_un = self
            .unobservable(dataset, &dataset.test)
            .map_err(Error::in_stage("unobservable"))?;
        tally(&test_un);
        let test = self.test_view(dataset, test_un)?;
        let mut sets = Vec::with_capacity(methods.len());
        for &m in methods {
            let set = self
                .run_method(m, &models, &test)
                .map_err(Error::in_stage("estimate"))?;
            if matches!(m, Method::Bn | Method::Pm | Method::PmStar) {
                solves += set.len();
                diverged += set.n_flagged();
            }
            sets.push(set);
        }
        Ok(PipelineOutcome {
            sets,
            models,
            n_train_used,
            train_excluded,
            test_indices: test.indices,
            test_un: test.un,
            solves,
            diverged,
        })
    }
}

fn feature_mode(method: Method) -> FeatureMode {
    match method {
        Method::SfStar | Method::PmStar => FeatureMode::Enhanced,
        _ => FeatureMode::Plain,
    }
}

fn unzip_solved(
    solved: Vec<Solved>,
    pseudo: Option<Vec<DVector<f64>>>,
) -> (Vec<StateVector>, Vec<bool>, Option<Vec<DVector<f64>>>) {
    let converged = solved.iter().map(|s| s.converged).collect();
    (
        solved.into_iter().map(|s| s.x_hat).collect(),
        converged,
        pseudo,
    )
}

/// Retrospective estimates for every instance of a dataset.
pub fn retrospective_labels(
    dataset: &Dataset,
    net: &Network,
    adm: &AdmittanceMatrix,
    opts: &SolverOptions,
) -> Result<Vec<Solved>> {
    let all: Vec<usize> = (0..dataset.instances.len()).collect();
    Pipeline::new(net, adm, &dataset.plan, opts.clone()).retrospective(dataset, &all)
}
