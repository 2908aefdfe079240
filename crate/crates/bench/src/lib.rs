//! Shared inputs for the `lbse-core` benchmarks.

use lbse_core::nalgebra::{DMatrix, DVector};
use lbse_core::{
    build_admittance, build_dataset, default_plan, parse_case, AdmittanceMatrix, Dataset,
    MeasurementPlan, Network, Placement, VariabilityScenario, IEEE33_CASE,
};

pub struct Fixture {
    pub net: Network,
    pub adm: AdmittanceMatrix,
    pub plan: MeasurementPlan,
    pub dataset: Dataset,
}

impl Fixture {
    /// The bundled feeder with the reference plan and `n` medium-variability
    /// instances.
    pub fn new(n: usize) -> Self {
        let net = parse_case(IEEE33_CASE).expect("bundled case parses");
        let adm = build_admittance(&net).expect("bundled case is valid");
        let plan = default_plan(&net, 5, 15, &Placement::reference()).expect("reference plan");
        let dataset = build_dataset(n, 0.8, &VariabilityScenario::medium(), &plan, &adm, 7)
            .expect("dataset builds");
        Fixture {
            net,
            adm,
            plan,
            dataset,
        }
    }

    /// Real-time followed by delayed readings of instance `k`.
    pub fn full_z(&self, k: usize) -> DVector<f64> {
        let inst = &self.dataset.instances[k];
        let mut z = inst.z_a.clone().resize_vertically(self.plan.m(), 0.0);
        z.rows_mut(self.plan.m_a(), self.plan.m_d())
            .copy_from(&inst.z_d);
        z
    }

    /// Training rows stacked as `(z_a, z_d)` matrices.
    pub fn training_matrices(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let rows = &self.dataset.train;
        let x = DMatrix::from_fn(rows.len(), self.plan.m_a(), |i, j| {
            self.dataset.instances[rows[i]].z_a[j]
        });
        let y = DMatrix::from_fn(rows.len(), self.plan.m_d(), |i, j| {
            self.dataset.instances[rows[i]].z_d[j]
        });
        (x, y)
    }
}
