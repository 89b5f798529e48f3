//! The scenario registry: every data-generating process as code.
//!
//! Shared notation below: `U, C1..C4 ~ Unif(-2, 2)`, `Z ~ Bern(0.5)`,
//! `g(C) = 2 sqrt|C1| + sin C4`, `pi0(C) = expit{C1 + expit(C2) + sin C3}`,
//! and `M ~ Bern(expit{k A - 1 + C2 + ...})` is written `M: kA + ...`.
//! Outcomes carry unit-variance normal noise, `Y ~ N(mean, 1)`.
//!
//! Treatment mechanisms:
//! * monotone: draw `A1 ~ Bern(p)`, `A0 ~ Bern(1 - p)`, convert defiers
//!   (`A1 = 0, A0 = 1`) to compliers, and set `A = A(Z)`;
//! * raw: the same draws without the conversion, so defiers remain;
//! * direct: `A ~ Bern(p)`, no instrument.

use std::fmt;
use std::str::FromStr;

use super::rng::SimRng;
use super::SimulateError;
use crate::data::{Column, ModelSpec, ObservationTable};
use crate::stats::expit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioFamily {
    /// Backdoor, front-door, and IV models together.
    Bfi,
    /// Backdoor and front-door.
    Bf,
    /// Backdoor and IV.
    Bi,
    /// Front-door and IV.
    Fi,
    /// Three backdoor models with different adjustment sets.
    Mbd,
    /// Exact-cancellation (faithfulness violation) demonstration.
    Faith,
}

impl ScenarioFamily {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioFamily::Bfi => "BFI",
            ScenarioFamily::Bf => "BF",
            ScenarioFamily::Bi => "BI",
            ScenarioFamily::Fi => "FI",
            ScenarioFamily::Mbd => "MBD",
            ScenarioFamily::Faith => "FAITH",
        }
    }

    pub fn anchor(self) -> &'static str {
        match self {
            ScenarioFamily::Bfi => "Appendix C.1",
            ScenarioFamily::Bf => "Appendix C.2",
            ScenarioFamily::Bi => "Appendix C.3",
            ScenarioFamily::Fi => "Appendix C.4",
            ScenarioFamily::Mbd => "Appendix C.5",
            ScenarioFamily::Faith => "Appendix B",
        }
    }

    fn has_instrument(self) -> bool {
        matches!(self, ScenarioFamily::Bfi | ScenarioFamily::Bi | ScenarioFamily::Fi)
    }

    fn has_mediator(self) -> bool {
        matches!(self, ScenarioFamily::Bfi | ScenarioFamily::Bf | ScenarioFamily::Fi)
    }
}

impl fmt::Display for ScenarioFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

macro_rules! scenarios {
    ($( $(#[$doc:meta])* $id:ident => $key:literal, $family:ident, $desc:literal; )*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum ScenarioId {
            $( $(#[$doc])* $id, )*
        }

        impl ScenarioId {
            /// Every registered scenario, in listing order.
            pub const ALL: &'static [ScenarioId] = &[$(ScenarioId::$id),*];

            pub fn key(self) -> &'static str {
                match self { $(ScenarioId::$id => $key,)* }
            }

            pub fn family(self) -> ScenarioFamily {
                match self { $(ScenarioId::$id => ScenarioFamily::$family,)* }
            }

            pub fn description(self) -> &'static str {
                match self { $(ScenarioId::$id => $desc,)* }
            }
        }
    };
}

scenarios! {
    /// Monotone A with p = pi0; M: 5A; Y = bM + 3U + g.
    BfiA => "BFI-a", Bfi, "all three models valid";
    /// As BFI-a with p = expit{C1 + expit(C2) + sin C3 + U}.
    BfiBNonzero => "BFI-b-nonzero", Bfi, "U enters the treatment propensity (backdoor-invalid design)";
    /// As BFI-a with p = expit{C1 + expit(C2) + sin C3 - U}; Y = bM + U + g.
    BfiBZeroNull => "BFI-b-zero-null", Bfi, "U enters the propensity with opposite sign; Y loads U once";
    /// A ~ Bern(p(Z)) drawn directly with
    /// p(z) = expit{-0.5 + 5z + C1 + expit(C2) - 0.97U}; M: 2A;
    /// Y = bM + 5U - 2 sqrt|C1| + sin C4. The propensity takes the observed
    /// instrument as an argument, so A is not built from potential
    /// treatments here; this is the reading under which the backdoor
    /// functional vanishes at b = 10.
    BfiBZeroAlt => "BFI-b-zero-alt", Bfi, "instrument- and U-dependent propensity tuned so the backdoor functional vanishes";
    /// As BFI-a with Y = bM + U + g + 2Z. Backdoor adjusts for Z.
    BfiCExclusion => "BFI-c-exclusion", Bfi, "direct Z -> Y effect (IV invalid)";
    /// Raw A with p = pi0; M: 5A - 3 I{A0 < A1} A; Y = bM + U + g.
    BfiCMonoNull => "BFI-c-mono-null", Bfi, "defiers present (IV invalid), null mediator coefficients";
    /// As BFI-c-mono-null with M: 5A - 2.838 I{A0 < A1} A.
    BfiCMonoAltZero => "BFI-c-mono-alt-zero", Bfi, "defiers present, mediator coefficients tuned so the IV functional vanishes";
    /// As BFI-c-mono-null with M: 2A + 3 I{A0 < A1} A.
    BfiCMonoAltNonzero => "BFI-c-mono-alt-nonzero", Bfi, "defiers present, nonzero IV functional";
    /// V ~ Unif(-2, 2); Z ~ Bern(expit{2 + 2U}); monotone A with
    /// p = expit{C1 + expit(C2) + sin C3 + V}; M: 2A; Y = bM + 2U + V + g.
    BfiD => "BFI-d", Bfi, "V confounds A-Y and U confounds Z-Y (only front-door valid)";
    /// Raw A with p = expit{C1 + expit(C2) + sin C3 + U};
    /// M: 5A - 3 I{A0 < A1} A; Y = bM + U + g.
    BfiFonlyMonoNull => "BFI-fonly-mono-null", Bfi, "U-dependent propensity and defiers (only front-door valid), null coefficients";
    /// As BFI-fonly-mono-null with M: 5A - 2.63 I{A0 < A1} A.
    BfiFonlyMonoAlt => "BFI-fonly-mono-alt", Bfi, "U-dependent propensity and defiers, coefficients tuned for zero wrong-model functionals";
    /// Monotone A with p = pi0; M: 2A; Y = bM + 3U + g + 2Z.
    BfiE => "BFI-e", Bfi, "Z affects A and Y directly (backdoor and IV invalid)";
    /// As BFI-a with Y = bA + 3U + g.
    BfiF => "BFI-f", Bfi, "direct A -> Y effect (front-door invalid)";
    /// As BFI-a with M: 3A + U.
    BfiG => "BFI-g", Bfi, "U confounds M-Y (front-door invalid)";
    /// Monotone A with p = expit{C4 + expit(C2) + sin C3}; M: 5A + 2U;
    /// Y = bM + U + sin C4; C5 ~ N(3A - Y, 1) is adjusted for.
    BfiH => "BFI-h", Bfi, "collider C5 adjusted and U confounds M-Y (only IV valid)";
    /// As BFI-a with p = expit{C1 + expit(C2) + sin C3 + U} and M: 3A + U.
    BfiI => "BFI-i", Bfi, "U enters propensity and mediator (only IV valid)";
    /// Monotone A with p = expit{C4 + sin C3 - U}; M: 5A - 2U;
    /// Y = bM - 5 sin C4; C5 ~ N(-2A - 5Y, 1) is adjusted for.
    BfiJ => "BFI-j", Bfi, "collider C5 adjusted and U confounds A-M (only IV valid)";
    /// As BFI-a with M: 2A + U and Y = bM - 3U + g + 2Z. Backdoor adjusts for Z.
    BfiK => "BFI-k", Bfi, "U confounds M-Y and Z affects Y (only backdoor valid)";
    /// Raw A with p = pi0; M: 5A + U for compliers, 2A + U otherwise;
    /// Y = bM - 3U + g.
    BfiBonlyMonoA => "BFI-bonly-mono-a", Bfi, "defiers and U confounding M-Y (only backdoor valid)";
    /// Raw A with p = pi0; M: 2A for compliers, 5A otherwise; Y = bA + 3U + g.
    BfiBonlyMonoB => "BFI-bonly-mono-b", Bfi, "defiers and a direct A -> Y effect (only backdoor valid)";

    /// Direct A with p = pi0; M: 2A; Y = bM + 2U + g.
    BfA => "BF-a", Bf, "both models valid";
    /// As BF-a with p = expit{C1 + expit(C2) + sin C3 + U}.
    BfBNonzero => "BF-b-nonzero", Bf, "U confounds A-Y (backdoor invalid)";
    /// p = expit{C1 + expit(C2) + sin C3 - 0.05U}; M: 5A; Y = bM + 0.05U + g.
    BfBZeroNull => "BF-b-zero-null", Bf, "weak U confounding of A-Y";
    /// p = expit{C1 - expit(C2) - sin C3 + 0.6U}; M: 0.37A; Y = bM - 0.9U + g.
    BfBZeroAlt => "BF-b-zero-alt", Bf, "U confounding tuned so the backdoor functional vanishes";
    /// As BF-a with Y = bA + 2U + g.
    BfCDirect => "BF-c-direct", Bf, "direct A -> Y effect (front-door invalid)";
    /// As BF-a with M: 2A + U.
    BfCPath => "BF-c-path", Bf, "U confounds M-Y (front-door invalid)";

    /// Monotone A with p = pi0; Y = bA + 2U + g.
    BiA => "BI-a", Bi, "both models valid";
    /// As BI-a with p = expit{C1 + expit(C2) + sin C3 + U}.
    BiB => "BI-b", Bi, "U enters the treatment propensity (backdoor-invalid design)";
    /// p = expit{C4 + expit(C2) + sin C3}; Y = bA + 2U + sin C4;
    /// C5 ~ N(2A + Y, 1) is adjusted for.
    BiCColliderNull => "BI-c-collider-null", Bi, "collider C5 = 2A + Y adjusted (backdoor invalid)";
    /// As BI-c-collider-null with C5 ~ N(A + Y, 1).
    BiCColliderAlt => "BI-c-collider-alt", Bi, "collider C5 = A + Y adjusted (backdoor invalid)";
    /// As BI-c-collider-null with Y = bA - 3U - sin C4 and C5 ~ N(0.6A + 2Y, 1).
    BiCColliderAltZero => "BI-c-collider-alt-zero", Bi, "collider tuned so the backdoor functional vanishes";
    /// As BI-a with Y = bA + 2U + g + 2Z. Backdoor adjusts for Z.
    BiDExclusion => "BI-d-exclusion", Bi, "direct Z -> Y effect (IV invalid)";
    /// Raw A with p = pi0; Y = (b/10)(5.75A + 4.25 I{A0 > A1} A) + 2U + g.
    BiEMonoZero => "BI-e-mono-zero", Bi, "defiers with effect heterogeneity tuned so the IV functional vanishes";
    /// Raw A with p = pi0; Y = (b/10)(10A - 8 I{A0 > A1} A) + 2U + g.
    BiEMonoNonzero => "BI-e-mono-nonzero", Bi, "defiers with effect heterogeneity, nonzero IV functional";

    /// Monotone A with p = expit{C1 + expit(C2) + sin C3 + U}; M: 5A; Y = bM + 3U + g.
    FiA => "FI-a", Fi, "both models valid";
    /// Monotone A with p = pi0; M: 5A; Y = bA + 3U + g.
    FiBDirect => "FI-b-direct", Fi, "direct A -> Y effect (front-door invalid)";
    /// Monotone A with p = pi0; M: 3A + U; Y = bM + 3U + g.
    FiBPath => "FI-b-path", Fi, "U confounds M-Y (front-door invalid)";
    /// As FI-a with Y = bM + 3U + g + 2Z.
    FiCExclusion => "FI-c-exclusion", Fi, "direct Z -> Y effect (IV invalid)";
    /// Raw A with p = expit{C1 + expit(C2) + sin C3 + U}; M: 2A for
    /// compliers, 5A otherwise; Y = bM + 2U + g.
    FiDMonoNull => "FI-d-mono-null", Fi, "defiers present (IV invalid), null design";
    /// As FI-d-mono-null with M: 2.38A for compliers and Y = bM + U + g.
    FiDMonoAlt => "FI-d-mono-alt", Fi, "defiers present, coefficients tuned so the IV functional vanishes";

    /// A ~ Bern(expit{C1 + C2}); Y = bA + 4C2 + C3 + U. Models adjust for
    /// {C1..C4}, {C1, C3}, {C1, C4}.
    Mbd => "MBD", Mbd, "three backdoor adjustment sets, only the first valid";

    /// Binary analog of the exact-cancellation example: C1 ~ Unif(-1, 1),
    /// U ~ Unif(0, 2), A = I{U > 2 expit(-3 C1)} so P(A = 1 | C1) = expit(3 C1),
    /// Y = bA - 2U + 4C1. E[U | A = 1, C1] - E[U | A = 0, C1] = 1, so the
    /// backdoor functional is b - 2, which vanishes at the true effect b = 2.
    Faith => "FAITH", Faith, "faithfulness violation: backdoor functional is b - 2";
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ScenarioId {
    type Err = SimulateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioId::ALL
            .iter()
            .copied()
            .find(|id| id.key().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| SimulateError::UnknownScenario(s.to_string()))
    }
}

impl ScenarioId {
    pub fn anchor(self) -> &'static str {
        self.family().anchor()
    }

    pub fn has_instrument(self) -> bool {
        self.family().has_instrument()
    }

    pub fn has_mediator(self) -> bool {
        self.family().has_mediator()
    }

    /// Whether the scenario exports the collider `c5`.
    pub fn has_collider(self) -> bool {
        use ScenarioId::*;
        matches!(
            self,
            BfiH | BfiJ | BiCColliderNull | BiCColliderAlt | BiCColliderAltZero
        )
    }

    /// Whether the backdoor model adjusts for the instrument, which is needed
    /// when Z affects Y directly but the backdoor model is meant to be valid.
    pub fn backdoor_adjusts_instrument(self) -> bool {
        use ScenarioId::*;
        matches!(self, BfiCExclusion | BfiK | BiDExclusion)
    }

    /// Covariate column names, in table order.
    pub fn covariate_names(self) -> Vec<String> {
        let count = match self {
            ScenarioId::Faith => 1,
            s if s.has_collider() => 5,
            _ => 4,
        };
        (1..=count).map(|i| format!("c{i}")).collect()
    }

    /// The model set fitted by default in sweeps.
    pub fn default_models(self) -> Vec<ModelSpec> {
        let base: Vec<String> = (1..=4).map(|i| format!("c{i}")).collect();
        let mut backdoor_set = self.covariate_names();
        if self.backdoor_adjusts_instrument() {
            backdoor_set.push(INSTRUMENT.to_string());
        }
        let backdoor = ModelSpec::backdoor(backdoor_set);
        let frontdoor = ModelSpec::frontdoor(base);
        match self.family() {
            ScenarioFamily::Bfi => vec![backdoor, frontdoor, ModelSpec::iv()],
            ScenarioFamily::Bf => vec![backdoor, frontdoor],
            ScenarioFamily::Bi => vec![backdoor, ModelSpec::iv()],
            ScenarioFamily::Fi => vec![frontdoor, ModelSpec::iv()],
            ScenarioFamily::Mbd => vec![
                ModelSpec::backdoor(["c1", "c2", "c3", "c4"]),
                ModelSpec::backdoor(["c1", "c3"]),
                ModelSpec::backdoor(["c1", "c4"]),
            ],
            ScenarioFamily::Faith => vec![ModelSpec::backdoor(["c1"])],
        }
    }
}

pub const INSTRUMENT: &str = "z";
pub const TREATMENT: &str = "a";
pub const MEDIATOR: &str = "m";
pub const OUTCOME: &str = "y";

/// Parameters for one draw of one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub id: ScenarioId,
    pub n: usize,
    pub beta: f64,
    pub seed: u64,
}

/// Unobserved quantities of a draw, for tests and diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Latents {
    pub u: Vec<f64>,
    /// Second latent confounder (BFI-d only; zeros elsewhere).
    pub v: Vec<f64>,
    /// Potential treatments `A(0)`, `A(1)` after any defier conversion
    /// (empty for scenarios without an instrument).
    pub a0: Vec<f64>,
    pub a1: Vec<f64>,
    /// Defiers among the initial potential-treatment draws.
    pub defiers_before: usize,
    /// Defiers remaining in the exported potential treatments.
    pub defiers_after: usize,
}

#[derive(Debug, Clone)]
pub struct GeneratedSample {
    pub table: ObservationTable,
    pub latents: Latents,
}

#[derive(Debug, Clone, Copy, Default)]
struct Row {
    c: [f64; 5],
    z: f64,
    a: f64,
    m: f64,
    y: f64,
    u: f64,
    v: f64,
    a0: f64,
    a1: f64,
    defier_before: bool,
}

impl Row {
    fn complier(&self) -> bool {
        self.a0 < self.a1
    }

    fn defier(&self) -> bool {
        self.a0 > self.a1
    }
}

enum Treatment {
    /// Defiers converted to compliers.
    Monotone(f64),
    Raw(f64),
    Direct(f64),
}

impl Treatment {
    fn apply(self, rng: &mut SimRng, row: &mut Row) {
        match self {
            Treatment::Monotone(p) => {
                let a1 = rng.bernoulli(p);
                let a0 = rng.bernoulli(1.0 - p);
                row.defier_before = a1 == 0.0 && a0 == 1.0;
                (row.a1, row.a0) = if row.defier_before { (1.0, 0.0) } else { (a1, a0) };
                row.a = if row.z == 1.0 { row.a1 } else { row.a0 };
            }
            Treatment::Raw(p) => {
                row.a1 = rng.bernoulli(p);
                row.a0 = rng.bernoulli(1.0 - p);
                row.defier_before = row.defier();
                row.a = if row.z == 1.0 { row.a1 } else { row.a0 };
            }
            Treatment::Direct(p) => row.a = rng.bernoulli(p),
        }
    }
}

fn draw_faith(beta: f64, rng: &mut SimRng) -> Row {
    let mut r = Row::default();
    r.c[0] = rng.uniform(-1.0, 1.0);
    r.u = rng.uniform(0.0, 2.0);
    r.a = if r.u > 2.0 * expit(-3.0 * r.c[0]) { 1.0 } else { 0.0 };
    r.y = rng.normal(beta * r.a - 2.0 * r.u + 4.0 * r.c[0], 1.0);
    r
}

fn draw_row(id: ScenarioId, beta: f64, rng: &mut SimRng) -> Row {
    use ScenarioId::*;
    if id == Faith {
        return draw_faith(beta, rng);
    }

    let mut r = Row {
        u: rng.uniform(-2.0, 2.0),
        ..Row::default()
    };
    for i in 0..4 {
        r.c[i] = rng.uniform(-2.0, 2.0);
    }
    if id == BfiD {
        r.v = rng.uniform(-2.0, 2.0);
    }
    let [c1, c2, c3, c4, _] = r.c;
    let (u, v) = (r.u, r.v);
    if id.has_instrument() {
        r.z = if id == BfiD {
            rng.bernoulli(expit(2.0 + 2.0 * u))
        } else {
            rng.bernoulli(0.5)
        };
    }

    let base = c1 + expit(c2) + c3.sin();
    let pi0 = expit(base);
    let pi_u = expit(base + u);
    let pi_c4 = expit(c4 + expit(c2) + c3.sin());
    let treatment = match id {
        BfiA | BfiCExclusion | BfiE | BfiF | BfiG | BfiK => Treatment::Monotone(pi0),
        BfiBNonzero | BfiI => Treatment::Monotone(pi_u),
        BfiBZeroNull => Treatment::Monotone(expit(base - u)),
        BfiBZeroAlt => {
            let p = |z: f64| expit(-0.5 + 5.0 * z + c1 + expit(c2) - 0.97 * u);
            Treatment::Direct(p(r.z))
        }
        BfiCMonoNull | BfiCMonoAltZero | BfiCMonoAltNonzero | BfiBonlyMonoA | BfiBonlyMonoB => Treatment::Raw(pi0),
        BfiD => Treatment::Monotone(expit(base + v)),
        BfiFonlyMonoNull | BfiFonlyMonoAlt => Treatment::Raw(pi_u),
        BfiH => Treatment::Monotone(pi_c4),
        BfiJ => Treatment::Monotone(expit(c4 + c3.sin() - u)),

        BfA | BfCDirect | BfCPath => Treatment::Direct(pi0),
        BfBNonzero => Treatment::Direct(pi_u),
        BfBZeroNull => Treatment::Direct(expit(base - 0.05 * u)),
        BfBZeroAlt => Treatment::Direct(expit(c1 - expit(c2) - c3.sin() + 0.6 * u)),

        BiA | BiDExclusion => Treatment::Monotone(pi0),
        BiB => Treatment::Monotone(pi_u),
        BiCColliderNull | BiCColliderAlt | BiCColliderAltZero => Treatment::Monotone(pi_c4),
        BiEMonoZero | BiEMonoNonzero => Treatment::Raw(pi0),

        FiA | FiCExclusion => Treatment::Monotone(pi_u),
        FiBDirect | FiBPath => Treatment::Monotone(pi0),
        FiDMonoNull | FiDMonoAlt => Treatment::Raw(pi_u),

        Mbd => Treatment::Direct(expit(c1 + c2)),
        Faith => unreachable!(),
    };
    treatment.apply(rng, &mut r);
    let a = r.a;

    if id.has_mediator() {
        let lin = |k: f64| k * a - 1.0 + c2;
        let complier_a = if r.complier() { a } else { 0.0 };
        let logit = match id {
            BfiA | BfiBNonzero | BfiBZeroNull | BfiCExclusion | BfiF => lin(5.0),
            BfiBZeroAlt | BfiD | BfiE => lin(2.0),
            BfiCMonoNull | BfiFonlyMonoNull => lin(5.0) - 3.0 * complier_a,
            BfiCMonoAltZero => lin(5.0) - 2.838 * complier_a,
            BfiCMonoAltNonzero => lin(2.0) + 3.0 * complier_a,
            BfiFonlyMonoAlt => lin(5.0) - 2.63 * complier_a,
            BfiG | BfiI => lin(3.0) + u,
            BfiH => lin(5.0) + 2.0 * u,
            BfiJ => lin(5.0) - 2.0 * u,
            BfiK => lin(2.0) + u,
            BfiBonlyMonoA => (if r.complier() { lin(5.0) } else { lin(2.0) }) + u,
            BfiBonlyMonoB => {
                if r.complier() {
                    lin(2.0)
                } else {
                    lin(5.0)
                }
            }
            BfA | BfBNonzero | BfCDirect => lin(2.0),
            BfBZeroNull => lin(5.0),
            BfBZeroAlt => lin(0.37),
            BfCPath => lin(2.0) + u,
            FiA | FiBDirect | FiCExclusion => lin(5.0),
            FiBPath => lin(3.0) + u,
            FiDMonoNull => {
                if r.complier() {
                    lin(2.0)
                } else {
                    lin(5.0)
                }
            }
            FiDMonoAlt => {
                if r.complier() {
                    lin(2.38)
                } else {
                    lin(5.0)
                }
            }
            _ => unreachable!("{id} has no mediator"),
        };
        r.m = rng.bernoulli(expit(logit));
    }
    let m = r.m;

    let g = 2.0 * c1.abs().sqrt() + c4.sin();
    let z = r.z;
    let defier_a = if r.defier() { a } else { 0.0 };
    let mean = match id {
        BfiA | BfiBNonzero | BfiG | BfiI => beta * m + 3.0 * u + g,
        BfiBZeroNull | BfiCMonoNull | BfiCMonoAltZero | BfiCMonoAltNonzero => beta * m + u + g,
        BfiFonlyMonoNull | BfiFonlyMonoAlt => beta * m + u + g,
        BfiBZeroAlt => beta * m + 5.0 * u - 2.0 * c1.abs().sqrt() + c4.sin(),
        BfiCExclusion => beta * m + u + g + 2.0 * z,
        BfiD => beta * m + 2.0 * u + v + g,
        BfiE => beta * m + 3.0 * u + g + 2.0 * z,
        BfiF | BfiBonlyMonoB => beta * a + 3.0 * u + g,
        BfiH => beta * m + u + c4.sin(),
        BfiJ => beta * m - 5.0 * c4.sin(),
        BfiK => beta * m - 3.0 * u + g + 2.0 * z,
        BfiBonlyMonoA => beta * m - 3.0 * u + g,

        BfA | BfBNonzero | BfCPath => beta * m + 2.0 * u + g,
        BfBZeroNull => beta * m + 0.05 * u + g,
        BfBZeroAlt => beta * m - 0.9 * u + g,
        BfCDirect => beta * a + 2.0 * u + g,

        BiA | BiB => beta * a + 2.0 * u + g,
        BiCColliderNull | BiCColliderAlt => beta * a + 2.0 * u + c4.sin(),
        BiCColliderAltZero => beta * a - 3.0 * u - c4.sin(),
        BiDExclusion => beta * a + 2.0 * u + g + 2.0 * z,
        // The two coefficients are the displayed alternative values at b = 10
        // and vanish together under the null.
        BiEMonoZero => beta / 10.0 * (5.75 * a + 4.25 * defier_a) + 2.0 * u + g,
        BiEMonoNonzero => beta / 10.0 * (10.0 * a - 8.0 * defier_a) + 2.0 * u + g,

        FiA | FiBPath => beta * m + 3.0 * u + g,
        FiBDirect => beta * a + 3.0 * u + g,
        FiCExclusion => beta * m + 3.0 * u + g + 2.0 * z,
        FiDMonoNull => beta * m + 2.0 * u + g,
        FiDMonoAlt => beta * m + u + g,

        Mbd => beta * a + 4.0 * c2 + c3 + u,
        Faith => unreachable!(),
    };
    r.y = rng.normal(mean, 1.0);
    let y = r.y;

    r.c[4] = match id {
        BfiH => rng.normal(3.0 * a - y, 1.0),
        BfiJ => rng.normal(-2.0 * a - 5.0 * y, 1.0),
        BiCColliderNull => rng.normal(2.0 * a + y, 1.0),
        BiCColliderAlt => rng.normal(a + y, 1.0),
        BiCColliderAltZero => rng.normal(0.6 * a + 2.0 * y, 1.0),
        _ => 0.0,
    };
    r
}

/// Draws `config.n` rows and keeps the latent bookkeeping.
pub fn generate_detailed(config: &ScenarioConfig) -> Result<GeneratedSample, SimulateError> {
    if config.n < 2 {
        return Err(SimulateError::InvalidConfig(format!(
            "n must be at least 2, got {}",
            config.n
        )));
    }
    if !config.beta.is_finite() {
        return Err(SimulateError::InvalidConfig(format!(
            "beta must be finite, got {}",
            config.beta
        )));
    }
    let id = config.id;
    let mut rng = SimRng::new(config.seed);
    let rows: Vec<Row> = (0..config.n).map(|_| draw_row(id, config.beta, &mut rng)).collect();

    let col = |name: &str, f: &dyn Fn(&Row) -> f64| Column::new(name, rows.iter().map(f).collect());
    let covariates = id
        .covariate_names()
        .iter()
        .enumerate()
        .map(|(j, name)| col(name, &|r: &Row| r.c[j]))
        .collect();
    let table = ObservationTable::new(
        col(OUTCOME, &|r| r.y),
        col(TREATMENT, &|r| r.a),
        id.has_instrument().then(|| col(INSTRUMENT, &|r| r.z)),
        id.has_mediator().then(|| col(MEDIATOR, &|r| r.m)),
        covariates,
    )?;

    let has_potential = id.has_instrument();
    let latents = Latents {
        u: rows.iter().map(|r| r.u).collect(),
        v: rows.iter().map(|r| r.v).collect(),
        a0: if has_potential {
            rows.iter().map(|r| r.a0).collect()
        } else {
            Vec::new()
        },
        a1: if has_potential {
            rows.iter().map(|r| r.a1).collect()
        } else {
            Vec::new()
        },
        defiers_before: rows.iter().filter(|r| r.defier_before).count(),
        defiers_after: if has_potential {
            rows.iter().filter(|r| r.defier()).count()
        } else {
            0
        },
    };
    Ok(GeneratedSample { table, latents })
}

/// Draws `config.n` rows of the scenario's observed columns.
pub fn generate(config: &ScenarioConfig) -> Result<ObservationTable, SimulateError> {
    generate_detailed(config).map(|s| s.table)
}
