// SPDX-License-Identifier: Apache-2.0

//! Bundled configurations on the twelve-node reference network.
//!
//! Every node uses k = 2, r = 4, δ = 1 over GF(16) unless stated otherwise.

use crate::topology::DsnTopology;

pub const FIG3_JSON: &str = include_str!("../data/fig3.json");
pub const FIG4_JSON: &str = include_str!("../data/fig4.json");
pub const FIG4_OVERLAP_JSON: &str = include_str!("../data/fig4_overlap.json");
pub const EXAMPLE2_JSON: &str = include_str!("../data/example2.json");

/// Seventeen-link reference network with single-level cooperation M_i = N_i.
pub fn fig3_uniform() -> DsnTopology {
    DsnTopology::from_json(FIG3_JSON).expect("bundled preset is valid")
}

/// The reference network plus ten cycles at levels 2 and 3, γ = 1.
pub fn fig4() -> DsnTopology {
    DsnTopology::from_json(FIG4_JSON).expect("bundled preset is valid")
}

/// [`fig4`] plus a level-2 cycle on rows {2,4} and columns {9,12}.
pub fn fig4_overlap() -> DsnTopology {
    DsnTopology::from_json(FIG4_OVERLAP_JSON).expect("bundled preset is valid")
}

/// Weighted reference network with δ_1 = 0; t(2,3) = t(3,4) = 0.6, other links 1.
pub fn example2() -> DsnTopology {
    DsnTopology::from_json(EXAMPLE2_JSON).expect("bundled preset is valid")
}

/// Look a preset up by name.
pub fn by_name(name: &str) -> Option<DsnTopology> {
    match name {
        "fig3" | "fig3-uniform" => Some(fig3_uniform()),
        "fig4" => Some(fig4()),
        "fig4-overlap" => Some(fig4_overlap()),
        "example2" => Some(example2()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn reference_neighbourhoods() {
        let t = fig3_uniform();
        assert_eq!(t.len(), 12);
        assert_eq!(t.edges().count(), 17);
        assert_eq!(t.neighborhood(2).unwrap(), &BTreeSet::from([1, 3, 5]));
        assert_eq!(t.neighborhood(5).unwrap(), &BTreeSet::from([2, 4, 6, 8]));
        assert_eq!(t.neighborhood(1).unwrap(), &BTreeSet::from([2]));
    }

    #[test]
    fn all_presets_load() {
        for name in ["fig3", "fig4", "fig4-overlap", "example2"] {
            assert!(by_name(name).is_some(), "{name}");
        }
    }
}
