use std::fmt;
use std::str::FromStr;

/// Annotation attached to a portfolio or report when a fallback or repair
/// was applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Flag {
    /// Target return above the bounded maximum; the max-return vertex was used.
    ReturnInfeasible,
    /// Target volatility below the bounded minimum; the min-variance portfolio was used.
    VolatilityInfeasible,
    /// Covariance was singular and a ridge `eps * I` was added.
    RidgeRepaired,
    /// No asset beats the risk-free rate, so the Sharpe maximum is not meaningful.
    NoExcessReturn,
    /// The annealer selected no asset; equal weights were used.
    ZeroSelectionFallback,
    /// The gradient iteration hit `max_iterations` before converging.
    IterationLimit,
    /// The last backtest window has fewer test periods than configured.
    ShortTestWindow,
}

impl Flag {
    pub const ALL: [Flag; 7] = [
        Flag::ReturnInfeasible,
        Flag::VolatilityInfeasible,
        Flag::RidgeRepaired,
        Flag::NoExcessReturn,
        Flag::ZeroSelectionFallback,
        Flag::IterationLimit,
        Flag::ShortTestWindow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Flag::ReturnInfeasible => "return-infeasible",
            Flag::VolatilityInfeasible => "volatility-infeasible",
            Flag::RidgeRepaired => "ridge-repaired",
            Flag::NoExcessReturn => "no-excess-return",
            Flag::ZeroSelectionFallback => "zero-selection-fallback",
            Flag::IterationLimit => "iteration-limit",
            Flag::ShortTestWindow => "short-test-window",
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Flag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Flag::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown flag `{s}`"))
    }
}

/// Sorted, de-duplicated flag set joined with `;`.
pub fn join(flags: &[Flag]) -> String {
    let mut v = flags.to_vec();
    v.sort();
    v.dedup();
    v.iter().map(|f| f.as_str()).collect::<Vec<_>>().join(";")
}

pub fn push_unique(flags: &mut Vec<Flag>, flag: Flag) {
    if !flags.contains(&flag) {
        flags.push(flag);
    }
}
