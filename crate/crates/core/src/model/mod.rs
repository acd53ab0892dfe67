//! State machines, timed automata and their composition.

pub mod expr;
pub mod mdp;
pub mod prtesm;
pub mod pta;
pub mod transform;

pub use expr::{ExprError, StateExpr};
pub use mdp::{compose, compose_with, ActionKind, ComposeError, ComposeOptions, DigitalMdp, MdpAction, StateView};
pub use prtesm::{
    validate_prtesm, ClockInterval, Direction, EsmTransition, ParameterEvent, Prtesm, PrtesmIssue, Trigger, INITIAL,
};
pub use pta::{
    saturate_clock_bound, Branch, ClockConstraint, Cmp, ConstValue, Constant, FlagTest, Guard, LocationVar,
    NetworkError, PtaCommand, PtaModule, PtaNetwork, TickBound, Update,
};
pub use transform::{prtesm_to_pta, GuardStyle, TransformError, TransformOptions, Transformed};
