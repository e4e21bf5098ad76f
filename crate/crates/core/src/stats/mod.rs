//! Significance tests across clusters, relative risk, and the special
//! functions behind the p-values.

mod disparity;
mod hypothesis;
mod risk;
mod special;

pub use disparity::{
    cluster_disparity_report, cluster_relative_risks, render_star_grid, ClusterRisk, DisparityReport, RiskComparison,
    TestKind, Variable, VariableTest,
};
pub use hypothesis::{anova_f_test, chi_square_test, ContingencyTable, TestResult};
pub use risk::{describe_risk, relative_risk, Incidence, RelativeRisk};
pub use special::{chi_square_sf, f_sf, incomplete_beta, incomplete_gamma_p, incomplete_gamma_q, ln_gamma};
