use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::hypothesis::{anova_f_test, chi_square_test, ContingencyTable, TestResult};
use super::risk::{relative_risk, Incidence, RelativeRisk};
use crate::error::{Error, Result};
use crate::ingest::{AgeGroup, Cohort, CohortMember, Gender, Income, Insurance, Race, Residence};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variable {
    AgeGroup,
    Income,
    Insurance,
    Race,
    Residence,
    Gender,
    Hba1c,
    Sbp,
    Dbp,
    Ldl,
}

impl Variable {
    pub const ALL: [Variable; 10] = [
        Variable::AgeGroup,
        Variable::Income,
        Variable::Insurance,
        Variable::Race,
        Variable::Residence,
        Variable::Gender,
        Variable::Hba1c,
        Variable::Sbp,
        Variable::Dbp,
        Variable::Ldl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::AgeGroup => "age_group",
            Variable::Income => "income",
            Variable::Insurance => "insurance",
            Variable::Race => "race",
            Variable::Residence => "residence",
            Variable::Gender => "gender",
            Variable::Hba1c => "hba1c",
            Variable::Sbp => "sbp",
            Variable::Dbp => "dbp",
            Variable::Ldl => "ldl",
        }
    }

    pub fn is_categorical(self) -> bool {
        !matches!(self, Variable::Hba1c | Variable::Sbp | Variable::Dbp | Variable::Ldl)
    }

    /// Category index and category count for a categorical variable.
    fn category(self, m: &CohortMember<impl Scalar>) -> Option<(usize, usize)> {
        let s = &m.static_info;
        Some(match self {
            Variable::AgeGroup => (s.age_group.index(), AgeGroup::ALL.len()),
            Variable::Income => (s.income.index(), Income::ALL.len()),
            Variable::Insurance => (s.insurance.index(), Insurance::ALL.len()),
            Variable::Race => (s.race.index(), Race::ALL.len()),
            Variable::Residence => (s.residence.index(), Residence::ALL.len()),
            Variable::Gender => (s.gender.index(), Gender::ALL.len()),
            _ => return None,
        })
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variable::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variable {s:?}")))
    }
}

impl Serialize for Variable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Variable {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    ChiSquare,
    Anova,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct VariableTest<T: Scalar> {
    pub variable: Variable,
    pub test: TestKind,
    pub result: Option<TestResult<T>>,
    /// Why the variable could not be tested (absent or too sparse).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl<T: Scalar> VariableTest<T> {
    pub fn stars(&self) -> &'static str {
        self.result.as_ref().map_or("", TestResult::stars)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DisparityReport<T: Scalar> {
    pub k: usize,
    pub yates: bool,
    pub tests: Vec<VariableTest<T>>,
}

impl<T: Scalar> DisparityReport<T> {
    pub fn get(&self, v: Variable) -> Option<&VariableTest<T>> {
        self.tests.iter().find(|t| t.variable == v)
    }
}

fn check_assignments<T: Scalar>(cohort: &Cohort<T>, assignments: &[usize], k: usize) -> Result<()> {
    if assignments.len() != cohort.members.len() {
        return Err(Error::Dimension {
            expected: cohort.members.len(),
            got: assignments.len(),
        });
    }
    if let Some(&a) = assignments.iter().find(|&&a| a >= k) {
        return Err(Error::InvalidArgument(format!("cluster id {a} out of range for k = {k}")));
    }
    Ok(())
}

/// Chi-squared tests for categorical variables and one-way ANOVA for labs,
/// comparing clusters. Members without a lab value are left out of that
/// variable's test. Variables that cannot be tested carry an error message
/// instead of a result. No multiple-comparison correction is applied.
pub fn cluster_disparity_report<T: Scalar>(
    cohort: &Cohort<T>,
    assignments: &[usize],
    k: usize,
    variables: &[Variable],
    yates: bool,
) -> Result<DisparityReport<T>> {
    check_assignments(cohort, assignments, k)?;
    let tests = variables
        .par_iter()
        .map(|&v| {
            let outcome = if v.is_categorical() {
                let mut counts: Vec<Vec<u64>> = Vec::new();
                for (m, &a) in cohort.members.iter().zip(assignments) {
                    let (idx, n_cat) = v.category(m).expect("categorical");
                    if counts.is_empty() {
                        counts = vec![vec![0; n_cat]; k];
                    }
                    counts[a][idx] += 1;
                }
                ContingencyTable::new(counts).and_then(|t| chi_square_test(&t, yates))
            } else {
                let mut groups: Vec<Vec<T>> = vec![Vec::new(); k];
                for (m, &a) in cohort.members.iter().zip(assignments) {
                    if let Some(x) = m.mean_measurements.get(v.name()) {
                        groups[a].push(x);
                    }
                }
                if groups.iter().all(Vec::is_empty) {
                    Err(Error::InsufficientData(format!("{v} is absent from the cohort")))
                } else {
                    // clusters with fewer than two readings cannot contribute a variance
                    let usable: Vec<Vec<T>> = groups.into_iter().filter(|g| g.len() >= 2).collect();
                    anova_f_test(&usable)
                }
            };
            let test = if v.is_categorical() { TestKind::ChiSquare } else { TestKind::Anova };
            match outcome {
                Ok(r) => VariableTest {
                    variable: v,
                    test,
                    result: Some(r),
                    error: None,
                },
                Err(e) => VariableTest {
                    variable: v,
                    test,
                    result: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(DisparityReport { k, yates, tests })
}

/// Stars grid with variables as rows and one column per named report.
/// Untestable cells are shown as `n/a`.
pub fn render_star_grid<T: Scalar>(columns: &[(String, &DisparityReport<T>)]) -> String {
    let mut vars: Vec<Variable> = Vec::new();
    for (_, r) in columns {
        for t in &r.tests {
            if !vars.contains(&t.variable) {
                vars.push(t.variable);
            }
        }
    }
    vars.sort();
    let w0 = vars.iter().map(|v| v.name().len()).max().unwrap_or(0).max("variable".len());
    let widths: Vec<usize> = columns.iter().map(|(n, _)| n.len().max(3)).collect();
    let mut out = format!("{:<w0$}", "variable");
    for ((name, _), w) in columns.iter().zip(&widths) {
        out.push_str(&format!("  {name:^w$}"));
    }
    out.push('\n');
    for v in vars {
        out.push_str(&format!("{:<w0$}", v.name()));
        for ((_, r), w) in columns.iter().zip(&widths) {
            let cell = match r.get(v) {
                Some(t) if t.result.is_some() => t.stars(),
                _ => "n/a",
            };
            out.push_str(&format!("  {cell:^w$}"));
        }
        out.push('\n');
    }
    out.push_str("* p < 0.05, ** p < 0.01\n");
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RiskComparison<T: Scalar> {
    /// Cluster id, or `None` for all members outside the exposed cluster.
    pub reference: Option<usize>,
    pub reference_incidence: Incidence,
    #[serde(flatten)]
    pub risk: Option<RelativeRisk<T>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ClusterRisk<T: Scalar> {
    pub cluster_id: usize,
    pub incidence: Incidence,
    pub positive_rate: f64,
    /// `"positive"` when most members are disease-positive, else `"negative"`.
    pub dominance: String,
    pub vs_rest: RiskComparison<T>,
    pub vs_clusters: Vec<RiskComparison<T>>,
}

fn compare<T: Scalar>(exposed: Incidence, reference: Option<usize>, reference_incidence: Incidence) -> RiskComparison<T> {
    let (risk, error) = match relative_risk(exposed, reference_incidence) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    RiskComparison {
        reference,
        reference_incidence,
        risk,
        error,
    }
}

/// Relative risk of each non-empty cluster against the remaining members and
/// against each other non-empty cluster.
pub fn cluster_relative_risks<T: Scalar>(labels: &[u8], assignments: &[usize], k: usize) -> Result<Vec<ClusterRisk<T>>> {
    if labels.len() != assignments.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            got: assignments.len(),
        });
    }
    let mut inc = vec![Incidence::new(0, 0); k];
    for (&y, &a) in labels.iter().zip(assignments) {
        if a >= k {
            return Err(Error::InvalidArgument(format!("cluster id {a} out of range for k = {k}")));
        }
        inc[a].total += 1;
        inc[a].positive += u64::from(y != 0);
    }
    let all = Incidence::new(inc.iter().map(|i| i.positive).sum(), inc.iter().map(|i| i.total).sum());
    Ok((0..k)
        .filter(|&c| inc[c].total > 0)
        .map(|c| {
            let rest = Incidence::new(all.positive - inc[c].positive, all.total - inc[c].total);
            let vs_rest = if rest.total == 0 {
                RiskComparison {
                    reference: None,
                    reference_incidence: rest,
                    risk: None,
                    error: Some("no members outside this cluster".into()),
                }
            } else {
                compare(inc[c], None, rest)
            };
            let vs_clusters = (0..k)
                .filter(|&d| d != c && inc[d].total > 0)
                .map(|d| compare(inc[c], Some(d), inc[d]))
                .collect();
            let rate = inc[c].rate();
            ClusterRisk {
                cluster_id: c,
                incidence: inc[c],
                positive_rate: rate,
                dominance: if rate > 0.5 { "positive" } else { "negative" }.into(),
                vs_rest,
                vs_clusters,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn risk_against_rest_and_clusters() {
        let labels = [1, 1, 1, 0, 1, 0, 0, 0, 0, 0];
        let assign = [0, 0, 0, 0, 1, 1, 1, 1, 2, 2];
        let r: Vec<ClusterRisk<f64>> = cluster_relative_risks(&labels, &assign, 3).unwrap();
        assert_eq!(r.len(), 3);
        // cluster 0: 3/4 vs rest 1/6
        assert!((r[0].vs_rest.risk.as_ref().unwrap().rr - 4.5).abs() < 1e-12);
        assert_eq!(r[0].dominance, "positive");
        // cluster 1 vs cluster 0: (1/4)/(3/4)
        let c10 = r[1].vs_clusters.iter().find(|c| c.reference == Some(0)).unwrap();
        assert!((c10.risk.as_ref().unwrap().rr - 1.0 / 3.0).abs() < 1e-12);
        // cluster 0 vs cluster 2 has no reference positives
        let c02 = r[0].vs_clusters.iter().find(|c| c.reference == Some(2)).unwrap();
        assert!(c02.risk.is_none() && c02.error.is_some());
    }

    #[test]
    fn grid_layout() {
        let mk = |p: f64| TestResult::<f64> {
            statistic: 1.0,
            dof: vec![1],
            p_value: p,
            significant_05: p < 0.05,
            significant_01: p < 0.01,
            warning: None,
        };
        let a = DisparityReport {
            k: 3,
            yates: false,
            tests: vec![
                VariableTest { variable: Variable::AgeGroup, test: TestKind::ChiSquare, result: Some(mk(0.001)), error: None },
                VariableTest { variable: Variable::Ldl, test: TestKind::Anova, result: None, error: Some("absent".into()) },
            ],
        };
        let b = DisparityReport {
            k: 2,
            yates: false,
            tests: vec![VariableTest { variable: Variable::AgeGroup, test: TestKind::ChiSquare, result: Some(mk(0.03)), error: None }],
        };
        let g = render_star_grid(&[("diabetes".into(), &a), ("copd".into(), &b)]);
        let lines: Vec<&str> = g.lines().collect();
        assert!(lines[0].contains("diabetes") && lines[0].contains("copd"));
        assert!(lines[1].starts_with("age_group") && lines[1].contains("**") && lines[1].contains(" * "));
        assert!(lines[2].starts_with("ldl") && lines[2].matches("n/a").count() == 2);
    }
}
