use serde::{Deserialize, Serialize};

use crate::phys::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentLabel {
    /// F=1, m_F=−1
    Trapped,
    /// F=1, m_F=0
    Untrapped,
    /// F=1, m_F=+1
    Antitrapped,
    /// F=2, m_F=0
    F2Untrapped,
}

impl ComponentLabel {
    pub fn name(self) -> &'static str {
        match self {
            ComponentLabel::Trapped => "trapped",
            ComponentLabel::Untrapped => "untrapped",
            ComponentLabel::Antitrapped => "antitrapped",
            ComponentLabel::F2Untrapped => "f2_untrapped",
        }
    }

    /// Counts toward the atom-laser beam.
    pub fn is_outcoupled(self) -> bool {
        matches!(self, ComponentLabel::Untrapped | ComponentLabel::F2Untrapped)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComponentSpec {
    pub label: ComponentLabel,
    /// Multiplies the magnetic term ħδ(z) in the rotating frame.
    pub potential_sign: i8,
    /// Number of ħκ kicks (downward) acquired on the way into this component.
    pub kick_order: i32,
}

const fn spec(label: ComponentLabel, potential_sign: i8, kick_order: i32) -> ComponentSpec {
    ComponentSpec {
        label,
        potential_sign,
        kick_order,
    }
}

/// Components in coupling-chain order; the first one carries the condensate.
pub fn components_for(scheme: Scheme) -> Vec<ComponentSpec> {
    use ComponentLabel::*;
    match scheme {
        Scheme::RfThreeState => vec![spec(Trapped, 1, 0), spec(Untrapped, 0, 0), spec(Antitrapped, -1, 0)],
        Scheme::RamanTwoState => vec![spec(Trapped, 1, 0), spec(F2Untrapped, 0, 1)],
        Scheme::RamanThreeState => vec![spec(Trapped, 1, 0), spec(Untrapped, 0, 1), spec(Antitrapped, -1, 2)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactly_one_trapped_component_first() {
        for s in Scheme::ALL {
            let c = components_for(s);
            assert_eq!(c.len(), s.n_components());
            assert_eq!(c.iter().filter(|c| c.potential_sign == 1).count(), 1);
            assert_eq!(c[0].label, ComponentLabel::Trapped);
            if !s.is_raman() {
                assert!(c.iter().all(|c| c.kick_order == 0));
            }
        }
    }
}
