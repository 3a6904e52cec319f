//! The reusable module template.
//!
//! A module is described by an immutable [`ModuleDescriptor`] (name, version,
//! typed state slots, supported verbs, lifecycle). Descriptors can inherit
//! from a parent. Live modules are [`ModuleInstance`]s whose state is only
//! reachable through verb invocations routed by a [`Dispatcher`].

mod descriptor;
mod dispatch;
mod toolkit;
mod verb;

pub use descriptor::{
    define_module, inherit_module, renew, Bump, Lifecycle, ModuleCollection, ModuleDescriptor,
    SlotType, Version,
};
pub use dispatch::{Dispatcher, ModuleInstance, VerbFn};
pub use toolkit::{toolkit_modules, CLI_SUBCOMMANDS};
pub use verb::Verb;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModuleError {
    #[error("unknown verb '{verb}'; legal verbs: {legal}")]
    UnknownVerb { verb: String, legal: String },
    #[error("duplicate slot '{0}'")]
    DuplicateSlot(String),
    #[error("module name must be nonempty")]
    EmptyName,
    #[error("malformed version '{0}': expected major.minor.patch")]
    BadVersion(String),
    #[error("parent '{0}' is deprecated")]
    DeprecatedParent(String),
    #[error("cannot un-deprecate module '{0}'")]
    Undeprecate(String),
    #[error("module '{0}' already present in collection")]
    DuplicateModule(String),
    #[error("unknown module '{0}'")]
    UnknownModule(String),
    #[error("module '{module}' supports: {supported}")]
    UnsupportedVerb { module: String, supported: String },
    #[error("{module}.{verb}: no implementation registered")]
    NotImplemented { module: String, verb: Verb },
    #[error("{module}.{verb}: {message}")]
    Invocation { module: String, verb: Verb, message: String },
    #[error("slot '{slot}' expects {expected:?}, got {got}")]
    SlotType { slot: String, expected: SlotType, got: String },
    #[error("module '{module}' has no slot '{slot}'")]
    UnknownSlot { module: String, slot: String },
}
