//! Mechanisms that combine a query, a sensitivity and a noise family into a
//! sanitized answer, and the ledger that meters the session budget.
//!
//! | regime      | sensitivity                 | noise                                   |
//! |-------------|-----------------------------|-----------------------------------------|
//! | `dp-global` | global `Δf`                 | Laplace `Δf/ε` or discrete `exp(−ε/Δf)` |
//! | `dp-smooth` | smooth, `β = ε/γ`           | `4γ·S/ε · Z`, `Z ∝ 1/(1+|z|^γ)`         |
//! | `idp`       | local `LS_f(D)`             | Laplace `LS/ε` or discrete `exp(−ε/LS)` |
//! | `gdp`       | `max_i GLS_i(D)/i`          | Laplace or discrete, same calibration   |
//!
//! A zero sensitivity releases `f(D)` unchanged.

mod ledger;
mod mechanism;

pub use ledger::{
    load_session, save_session, BudgetLedger, LedgerEntry, PartitionTag, SharedLedger,
    SESSION_VERSION,
};
pub use mechanism::{
    answer, prepare, release, AnswerValue, CalibratedNoise, MechanismConfig, NoiseFamily,
    NoisyAnswer, PreparedAnswer, Regime,
};
