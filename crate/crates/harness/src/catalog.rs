use serde::Serialize;

use crate::config::ExperimentId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CatalogEntry {
    pub id: ExperimentId,
    pub title: &'static str,
    pub figures: &'static str,
}

pub const CATALOG: [CatalogEntry; 10] = [
    CatalogEntry {
        id: ExperimentId::E1,
        title: "Im λ₁ / Im λ₂ correlation map of centred two-solitons after a noisy fiber",
        figures: "Fig. 2",
    },
    CatalogEntry {
        id: ExperimentId::E2,
        title: "constellation packing with Euclidean and Mahalanobis decoding",
        figures: "Fig. 3",
    },
    CatalogEntry {
        id: ExperimentId::E3,
        title: "pairwise correlations of a three-soliton",
        figures: "Fig. 4",
    },
    CatalogEntry {
        id: ExperimentId::E4,
        title: "segment scatter at taps along the fiber",
        figures: "Fig. 5",
    },
    CatalogEntry {
        id: ExperimentId::E5,
        title: "principal angle against nonlinear phase difference",
        figures: "Fig. 6",
    },
    CatalogEntry {
        id: ExperimentId::E6,
        title: "decoupled segment perturbations against end-to-end perturbation",
        figures: "Fig. 7",
    },
    CatalogEntry {
        id: ExperimentId::E7,
        title: "scaling and residual noise components, amplitude sweep",
        figures: "Figs. 8-10",
    },
    CatalogEntry {
        id: ExperimentId::E8,
        title: "transceiver noise taxonomy",
        figures: "Fig. 11",
    },
    CatalogEntry {
        id: ExperimentId::E9,
        title: "linearity of eigenvalue perturbations",
        figures: "Fig. 12",
    },
    CatalogEntry {
        id: ExperimentId::E10,
        title: "transmitter and propagation noise",
        figures: "Figs. 13-14",
    },
];

pub fn list_experiments() -> &'static [CatalogEntry] {
    &CATALOG
}
