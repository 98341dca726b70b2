/// Resource caps and search budgets shared by the library operations.
///
/// Every limit is configurable; the defaults keep each operation well inside
/// desk-scale memory and time. Environment overrides (`PDLWB_*`) are applied
/// by the CLI, not here.
#[derive(Debug, Clone)]
pub struct Caps {
    /// Maximum number of points `p_extension` will materialize.
    pub p_extension_max: u64,
    /// Maximum poset size for subset enumeration (`max_closed_subsets`).
    pub enum_max_bits: usize,
    /// Largest variable count handled by the exhaustive decision path.
    pub decide_k_max: usize,
    /// Largest `n` for which `free_pdl(n)` materializes the algebra.
    pub free_n_max: usize,
    /// Assignment budget for `holds_universal` and the decide fallback.
    pub eval_budget: u64,
    /// Node budget for map searches (`find_surjective_wpm`, `embeds`).
    pub search_budget: u64,
    /// Leaf budget for `brute_force_skeleton`.
    pub skeleton_bf_budget: u64,
    /// Sample count for the statistical part of surjection re-verification.
    pub verify_samples: u32,
    /// Largest coordinate count for synthesized surjection domains `P(2^k)`.
    pub surject_k_max: usize,
    /// Seed for all randomized verification.
    pub seed: u64,
    /// Worker threads for partitioned enumeration (0 = rayon default).
    pub threads: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            p_extension_max: 100_000,
            enum_max_bits: 26,
            decide_k_max: 2,
            free_n_max: 2,
            eval_budget: 10_000_000,
            search_budget: 50_000_000,
            skeleton_bf_budget: 20_000_000,
            verify_samples: 2000,
            surject_k_max: 120,
            seed: 0,
            threads: 0,
        }
    }
}
