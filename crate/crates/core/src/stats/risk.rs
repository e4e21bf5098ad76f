use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const Z_95: f64 = 1.959_963_984_540_054;

/// Positive count and group size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Incidence {
    pub positive: u64,
    pub total: u64,
}

impl Incidence {
    pub fn new(positive: u64, total: u64) -> Self {
        Incidence { positive, total }
    }

    pub fn rate(self) -> f64 {
        self.positive as f64 / self.total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RelativeRisk<T: Scalar> {
    pub rr: T,
    /// 95% interval on the log scale; absent when the exposed group has no
    /// positives.
    pub ci95: Option<[T; 2]>,
    pub description: String,
}

/// Ratio of positive rates with a Katz log-method 95% interval.
pub fn relative_risk<T: Scalar>(exposed: Incidence, reference: Incidence) -> Result<RelativeRisk<T>> {
    for (name, g) in [("exposed", exposed), ("reference", reference)] {
        if g.total == 0 {
            return Err(Error::InvalidArgument(format!("{name} group is empty")));
        }
        if g.positive > g.total {
            return Err(Error::InvalidArgument(format!("{name} group has more positives than members")));
        }
    }
    if reference.positive == 0 {
        return Err(Error::Domain("reference group has no positives".into()));
    }
    // cross-multiplied so that exact ratios such as 30/100 vs 10/100 stay exact
    let num = T::from_u128(exposed.positive as u128 * reference.total as u128).expect("fits");
    let den = T::from_u128(exposed.total as u128 * reference.positive as u128).expect("fits");
    let rr = num / den;
    let ci95 = (exposed.positive > 0).then(|| {
        let inv = |x: u64| T::one() / T::from_u64(x).unwrap();
        let se = (inv(exposed.positive) - inv(exposed.total) + inv(reference.positive) - inv(reference.total))
            .max(T::zero())
            .sqrt();
        let half = T::lit(Z_95) * se;
        [(rr.ln() - half).exp(), (rr.ln() + half).exp()]
    });
    Ok(RelativeRisk {
        rr,
        ci95,
        description: describe_risk(rr),
    })
}

/// `"35% less risk"` below 1, `"1.66 times the risk"` otherwise.
pub fn describe_risk<T: Scalar>(rr: T) -> String {
    let rr = rr.to_f64_lossy();
    if rr < 1.0 {
        format!("{:.0}% less risk", (1.0 - rr) * 100.0)
    } else {
        format!("{rr:.2} times the risk")
    }
}
