//! Observation / cleaning / docking behavior machine. The reasoning
//! pipeline (or an operator) is the only source of mode transitions.

mod cleaning;
mod config;
mod docking;
mod machine;
mod mode;
mod robot;
mod sweep;
mod transition;

pub use cleaning::{
    cleaning_tick, random_escape_turn, BurstRun, BurstStep, CleaningStep, EvaluationGate, TurnInPlace,
    ESCAPE_TURN_MAX, ESCAPE_TURN_MIN,
};
pub use config::{CadenceConfig, ConfigViolation, SpeedConfig};
pub use docking::{DockEvent, DockStep, DockingRun};
pub use machine::{ActivityKind, Applied, Controller, ControllerEvent, TickOutput};
pub use mode::{Decision, DecisionSource, DecisionToken, Mode, UnknownMode, UnknownToken};
pub use robot::{DrivableRobot, RobotIo};
pub use sweep::{run_observation_sweep, SweepRun, SweepStep};
pub use transition::{decision_allowed, transition, ControllerState, TransitionError};
