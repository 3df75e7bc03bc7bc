//! Global latent model, per-subject deviations, subgroup characterization,
//! latent naming, test projection and cross-seed rank stability.

mod global;
mod naming;
mod projection;
mod stability;
mod subgroups;

use ndarray::{ArrayView1, ArrayView2};

pub use global::{
    default_latent_names, deviations, deviations_csv, deviations_from_coefficients, fit_global,
    DeviationRecord, Direction, GlobalLatentModel,
};
pub use naming::{latent_names_csv, name_latent_dims, LatentDimensionName, NamedVariable};
pub use projection::{assignments_csv, project_test, TestProjection};
pub use stability::{
    align_dims, deviation_ranks, rank_stability, rank_stability_for_study, DimAlignment,
    RunDeviations, StabilityTable, UNSTABLE_CORRELATION,
};
pub use subgroups::{
    form_subgroups, interaction_check, rmse_contrast, zscore_profile, InteractionTest,
    RmseContrast, SubgroupReport, ZScoreProfile,
};

/// Scatter data per dimension: latent value, outcome and deviation.
pub fn deviation_plot_csv(
    z: ArrayView2<f64>,
    y: ArrayView1<f64>,
    records: &[DeviationRecord],
) -> String {
    let mut out = String::from("patient,dim,latent,outcome,delta,flagged\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.patient,
            r.dim,
            z[[r.patient, r.dim]],
            y[r.patient],
            r.delta,
            r.flagged
        ));
    }
    out
}
