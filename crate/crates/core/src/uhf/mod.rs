//! Realizing glued KMS structure on a UHF algebra.
//!
//! A diagram is first embedded into a prescribed UHF diagram by enlarging
//! every block to a rank-one multiplicity matrix ([`embed`]). The new arrows
//! get potentials `t_k` so large that the transfer matrices barely move for
//! β > 0 while they dominate for β < 0 ([`extend`]); the ε-schedule
//! ([`schedule`]) fixes how small "barely" must be, and the intertwiners
//! ([`intertwine`]) turn that closeness into maps between the cones. Two such
//! factors, one for `F` and one for `-F`, are tensored ([`realize`]).

pub mod embed;
pub mod extend;
pub mod intertwine;
pub mod realize;
pub mod schedule;

pub use crate::spec::UhfSpec;
pub use embed::{
    embed_into_uhf, Embedding, EmbeddingCertificate, LevelCertificate, Window, DEFAULT_WINDOW_CAP,
    PHI_SLACK,
};
pub use extend::{extend_potential, ExtendedDiagram, ExtendedLevel};
pub use intertwine::{
    intertwine_s, intertwine_t, roundtrip_steps, CauchyStep, IntertwinerResult, MatrixSystem,
};
pub use realize::{realize_on_uhf, realized_report, Factor, Realization, RealizedReport};
pub use schedule::{epsilon_schedule, epsilon_schedule_from_logs, BetaChoice, EpsilonSchedule};
