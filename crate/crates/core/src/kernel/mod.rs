//! Program syntax, state model and single-step evaluation.

pub mod command;
pub mod expr;
pub mod render;
pub mod routine;
pub mod state;
pub mod value;

pub use command::{apply_update, fire_atomic, Action, AtomicPoint, Command, CommandError, Cond, PointKind, Update};
pub use expr::{eval_pred, Builtin, ControlView, Ctx, Env, EvalError, Expr};
pub use routine::{RoutineId, RoutineKind, Routines};
pub use state::{GlobalState, Layout, LayoutError, VarDecl, VarId};
pub use value::{NatSet, Type, Value};

use crate::echronos::SystemConfig;

/// One sequential component of a [`System`].
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Task {
    pub name: String,
    /// The routine this task implements; `at(r, ..)` in invariants refers to it.
    pub owner: u32,
    pub body: Command,
}

/// Parallel composition of tasks over a shared state.
#[derive(Clone, Debug)]
pub struct System {
    pub name: String,
    pub tasks: Vec<Task>,
    pub layout: Layout,
    pub init: GlobalState,
    pub env: Env,
    pub config: SystemConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SystemError {
    #[error("task name `{0}` used twice")]
    DuplicateTask(String),
    #[error("task `{task}`: {source}")]
    Command { task: String, source: CommandError },
    #[error("task `{task}` is owned by {owner}, outside the routine domain")]
    BadOwner { task: String, owner: u32 },
    #[error("initial value of `{0}` is outside its type")]
    IllTypedInit(String),
}

impl System {
    /// Checks task names, labels, owners and the initial state.
    pub fn validate(&self) -> Result<(), SystemError> {
        let mut names = std::collections::HashSet::new();
        for t in &self.tasks {
            if !names.insert(t.name.as_str()) {
                return Err(SystemError::DuplicateTask(t.name.clone()));
            }
            if t.owner >= self.env.routines.count() {
                return Err(SystemError::BadOwner {
                    task: t.name.clone(),
                    owner: t.owner,
                });
            }
            t.body.validate(&self.layout).map_err(|source| SystemError::Command {
                task: t.name.clone(),
                source,
            })?;
        }
        for id in self.layout.ids() {
            if !self.layout.ty(id).admits(self.init.get(id)) {
                return Err(SystemError::IllTypedInit(self.layout.name(id).to_string()));
            }
        }
        Ok(())
    }

    pub fn task_index(&self, name: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.name == name)
    }

    /// The initial state a model file starts from before its `init` block:
    /// the canonical boot state for the hardware/OS variables and type
    /// defaults for everything else.
    pub fn default_init(&self) -> GlobalState {
        crate::echronos::initial_state(&self.config, &self.layout)
    }

    pub fn ctx(&self) -> Ctx<'_> {
        Ctx::new(&self.env)
    }
}
