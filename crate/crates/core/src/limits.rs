/// Resource caps shared by inference and policy search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Largest factor (in table entries) variable elimination may create.
    pub max_factor: u128,
    /// Largest number of pure policies / joint profiles an exhaustive search may visit.
    pub max_policies: u128,
    /// Largest number of response functions a single functionalized node may have.
    pub max_response_functions: u128,
}

pub const DEFAULT_MAX_FACTOR: u128 = 1 << 22;
pub const DEFAULT_MAX_POLICIES: u128 = 1_000_000;
pub const DEFAULT_MAX_RESPONSE_FUNCTIONS: u128 = 10_000;

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_factor: DEFAULT_MAX_FACTOR,
            max_policies: DEFAULT_MAX_POLICIES,
            max_response_functions: DEFAULT_MAX_RESPONSE_FUNCTIONS,
        }
    }
}

impl Limits {
    /// Defaults overridden by `CID_MAX_FACTOR` / `CID_MAX_POLICIES` when set to a positive integer.
    pub fn from_env() -> Self {
        let mut limits = Limits::default();
        if let Some(v) = read_positive("CID_MAX_FACTOR") {
            limits.max_factor = v;
        }
        if let Some(v) = read_positive("CID_MAX_POLICIES") {
            limits.max_policies = v;
        }
        limits
    }
}

fn read_positive(var: &str) -> Option<u128> {
    std::env::var(var).ok()?.trim().parse::<u128>().ok().filter(|v| *v > 0)
}
