use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::global::{deviations_from_coefficients, DeviationRecord, GlobalLatentModel};
use super::subgroups::SubgroupReport;
use crate::dataio::Dataset;
use crate::localreg::fit_at_points;
use crate::training::TrainedModel;
use crate::{Error, Parallelism, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestProjection {
    pub z: Array2<f64>,
    /// Local coefficients per test subject (`n_test × (d + 1)`).
    pub coefficients: Array2<f64>,
    pub records: Vec<DeviationRecord>,
    /// Indices into the training subgroup list, per test subject.
    pub assignments: Vec<Vec<usize>>,
}

/// Encodes the test rows, fits each one's local model over the training
/// latent points and compares it with the training global model.
pub fn project_test(
    model: &TrainedModel,
    train: &Dataset,
    test: &Dataset,
    global: &GlobalLatentModel,
    subgroups: &[SubgroupReport],
    par: Parallelism,
) -> Result<TestProjection> {
    if test.p() != train.p() {
        return Err(Error::Shape("test and train predictors differ".into()));
    }
    let z_train = model.encode(train.x.view())?;
    let z = model.encode(test.x.view())?;
    let coefficients = fit_at_points(
        z_train.view(),
        train.y.view(),
        z.view(),
        &model.config.kernel,
        par,
    )?;
    let records = deviations_from_coefficients(coefficients.view(), global)?;
    let mut assignments = vec![Vec::new(); test.n()];
    for r in records.iter().filter(|r| r.flagged) {
        for (g, sg) in subgroups.iter().enumerate() {
            if sg.dim == r.dim && Some(sg.direction) == r.direction {
                assignments[r.patient].push(g);
            }
        }
    }
    Ok(TestProjection {
        z,
        coefficients,
        records,
        assignments,
    })
}

pub fn assignments_csv(assignments: &[Vec<usize>], row_ids: &[usize]) -> String {
    let mut out = String::from("patient,row_id,subgroups\n");
    for (i, a) in assignments.iter().enumerate() {
        let ids: Vec<String> = a.iter().map(|g| g.to_string()).collect();
        out.push_str(&format!("{i},{},{}\n", row_ids[i], ids.join(";")));
    }
    out
}
