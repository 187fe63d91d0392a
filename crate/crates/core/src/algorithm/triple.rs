use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, SymSpectrum, SNAP_TOL, STRICT_TOL};

/// Consensus matrix `C` together with `√C` and its pseudo-inverse.
#[derive(Debug, Clone)]
pub struct ConsensusOperator {
    c: Mat,
    sqrt_c: Mat,
    sqrt_c_pinv: Mat,
    range_projector: Mat,
}

impl ConsensusOperator {
    pub fn new(c: Mat) -> Self {
        let spectrum = SymSpectrum::of(&c);
        let sqrt_c = spectrum.map(|v| if v > SNAP_TOL { v.sqrt() } else { 0.0 });
        let sqrt_c_pinv = spectrum.map(|v| if v > SNAP_TOL { 1.0 / v.sqrt() } else { 0.0 });
        let range_projector = spectrum.map(|v| if v > SNAP_TOL { 1.0 } else { 0.0 });
        ConsensusOperator {
            c,
            sqrt_c,
            sqrt_c_pinv,
            range_projector,
        }
    }

    pub fn c(&self) -> &Mat {
        &self.c
    }

    pub fn sqrt_c(&self) -> &Mat {
        &self.sqrt_c
    }

    pub fn sqrt_c_pinv(&self) -> &Mat {
        &self.sqrt_c_pinv
    }

    /// Orthogonal projector onto `range(C) = range(√C)`.
    pub fn range_projector(&self) -> &Mat {
        &self.range_projector
    }

    pub fn m(&self) -> usize {
        self.c.nrows()
    }
}

/// Weight matrices `(A, B, C)` of the unified iteration together with the
/// factor `D` satisfying `A = BD`.
#[derive(Debug, Clone)]
pub struct WeightTriple {
    a: Mat,
    b: Mat,
    d: Mat,
    consensus: ConsensusOperator,
    label: String,
}

impl WeightTriple {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat, label: impl Into<String>) -> Result<Self> {
        let m = a.nrows();
        for (name, mat) in [("A", &a), ("B", &b), ("C", &c), ("D", &d)] {
            if mat.shape() != (m, m) {
                return Err(Error::Dimension {
                    expected: format!("{name} of shape {m}x{m}"),
                    got: format!("{}x{}", mat.nrows(), mat.ncols()),
                });
            }
        }
        Ok(WeightTriple {
            a,
            b,
            d,
            consensus: ConsensusOperator::new(c),
            label: label.into(),
        })
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self) -> &Mat {
        &self.b
    }

    pub fn c(&self) -> &Mat {
        self.consensus.c()
    }

    pub fn d(&self) -> &Mat {
        &self.d
    }

    pub fn sqrt_c(&self) -> &Mat {
        self.consensus.sqrt_c()
    }

    pub fn consensus(&self) -> &ConsensusOperator {
        &self.consensus
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    /// Checks every condition the rate theory needs, reporting a signed
    /// margin per condition (negative means violated).
    pub fn validate(&self, mu: f64, l: f64) -> TripleReport {
        let m = self.m();
        let ones = linalg::Vector::from_element(m, 1.0);
        let mut checks = Vec::with_capacity(11);
        let mut push = |condition, margin: f64| {
            checks.push(ConditionCheck {
                condition,
                passed: margin >= 0.0,
                margin,
            })
        };

        let mass = ones.dot(&(&self.a * &ones));
        push(Condition::ATotalMass, 1e-9 * m as f64 - (mass - m as f64).abs());

        let col_dev = linalg::column_sums(&self.b).iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
        push(Condition::BColumnStochastic, 1e-9 - col_dev);

        let c = self.c();
        let c_spec = SymSpectrum::of(c);
        let c_sym_dev = linalg::max_abs_diff(c, &c.transpose());
        let psd_margin = if c_sym_dev > 1e-9 * (1.0 + c.amax()) {
            -c_sym_dev
        } else {
            linalg::snap(c_spec.min(), 0.0)
        };
        push(Condition::CPositiveSemidefinite, psd_margin);

        let c_ones = (c * &ones).amax();
        let lambda2 = if m >= 2 { c_spec.values[1] } else { 0.0 };
        push(
            Condition::CNullSpace,
            (lambda2 - STRICT_TOL).min(1e-9 - c_ones),
        );

        let sym_margin = |x: &Mat| 1e-9 * (1.0 + x.amax()) - linalg::max_abs_diff(x, &x.transpose());
        push(Condition::BSymmetric, sym_margin(&self.b));
        push(Condition::DSymmetric, sym_margin(&self.d));

        let bd = &self.b * &self.d;
        push(
            Condition::DFactorization,
            1e-9 * (1.0 + self.a.amax()) - linalg::max_abs_diff(&self.a, &bd),
        );

        let d_spec = SymSpectrum::of(&self.d);
        let (d_min, d_max) = (d_spec.min(), linalg::snap(d_spec.max(), 1.0));
        push(Condition::DSpectrum, (d_min + 1.0 - STRICT_TOL).min(1.0 - d_max));

        let identity = Mat::identity(m, m);
        let i_minus_c = &identity - c;
        push(Condition::IMinusCPositive, linalg::lambda_min(&i_minus_c) - STRICT_TOL);

        let commutator = (&self.b * c - c * &self.b).norm();
        push(
            Condition::BCCommute,
            1e-9 * (1.0 + self.b.norm() * c.norm()) - commutator,
        );

        let step_margin = if !(mu > 0.0 && l >= mu) {
            f64::NAN
        } else {
            let denom = l * d_max - mu * d_min;
            if denom <= 0.0 {
                f64::INFINITY
            } else {
                let scale = ((l + mu) / denom).powi(2);
                linalg::lambda_min(&(&i_minus_c * scale - &self.b * &self.b)) - STRICT_TOL
            }
        };
        checks.push(ConditionCheck {
            condition: Condition::StepCondition,
            passed: step_margin >= 0.0,
            margin: step_margin,
        });

        TripleReport {
            label: self.label.clone(),
            checks,
        }
    }
}

/// Individual assumption on a weight triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `1ᵀA1 = m`.
    ATotalMass,
    /// `1ᵀB = 1ᵀ`.
    BColumnStochastic,
    /// `C` symmetric positive semidefinite.
    CPositiveSemidefinite,
    /// `Null(C) = span(1)`.
    CNullSpace,
    BSymmetric,
    DSymmetric,
    /// `A = BD`.
    DFactorization,
    /// `−I ≺ D ⪯ I`.
    DSpectrum,
    /// `I − C ≻ 0`.
    IMinusCPositive,
    /// `BC = CB`.
    #[serde(rename = "bc_commute")]
    BCCommute,
    /// `B² ≺ ((L+μ)/(Lλ_max(D) − μλ_min(D)))² (I − C)`.
    StepCondition,
}

impl Condition {
    /// Consensus and mass conditions; the rest only matter for the rate.
    pub fn is_structural(self) -> bool {
        matches!(
            self,
            Condition::CPositiveSemidefinite | Condition::CNullSpace | Condition::ATotalMass | Condition::BColumnStochastic
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Condition::ATotalMass => "a_total_mass",
            Condition::BColumnStochastic => "b_column_stochastic",
            Condition::CPositiveSemidefinite => "c_positive_semidefinite",
            Condition::CNullSpace => "c_null_space",
            Condition::BSymmetric => "b_symmetric",
            Condition::DSymmetric => "d_symmetric",
            Condition::DFactorization => "d_factorization",
            Condition::DSpectrum => "d_spectrum",
            Condition::IMinusCPositive => "i_minus_c_positive",
            Condition::BCCommute => "bc_commute",
            Condition::StepCondition => "step_condition",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub condition: Condition,
    pub passed: bool,
    pub margin: f64,
}

/// Pass/fail certificate for every assumption on a triple.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripleReport {
    pub label: String,
    pub checks: Vec<ConditionCheck>,
}

impl TripleReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn passed(&self, condition: Condition) -> bool {
        self.checks
            .iter()
            .find(|c| c.condition == condition)
            .is_some_and(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Passes the structural conditions, the ones the fixed-point/KKT
    /// equivalence depends on.
    pub fn passes_structural(&self) -> bool {
        self.checks
            .iter()
            .filter(|c| c.condition.is_structural())
            .all(|c| c.passed)
    }

    pub fn summary(&self) -> String {
        let failed: Vec<String> = self
            .failures()
            .map(|c| {
                format!("{} (margin {:e})", c.condition.name(), c.margin)
            })
            .collect();
        if failed.is_empty() {
            format!("{}: all conditions hold", self.label)
        } else {
            format!("{}: {}", self.label, failed.join(", "))
        }
    }
}
