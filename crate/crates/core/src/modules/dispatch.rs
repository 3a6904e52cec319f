use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde_json::Value;

use super::{ModuleCollection, ModuleDescriptor, ModuleError, Verb};

/// A verb implementation: mutates a private copy of the instance state and
/// returns the verb output, or a message describing the failure.
pub type VerbFn = Arc<dyn Fn(&mut BTreeMap<String, Value>, &Value) -> Result<Value, String> + Send + Sync>;

/// A live module: descriptor plus encapsulated slot state.
///
/// State is only changed by [`Dispatcher::invoke`]. Instances never share
/// state; cloning one produces an independent copy.
#[derive(Debug, Clone)]
pub struct ModuleInstance {
    descriptor: Arc<ModuleDescriptor>,
    state: BTreeMap<String, Value>,
}

impl ModuleInstance {
    pub fn descriptor(&self) -> &ModuleDescriptor {
        &self.descriptor
    }

    /// Serialized state, suitable for equality checks and persistence.
    pub fn snapshot(&self) -> String {
        serde_json::to_string(&self.state).expect("state serializes")
    }
}

/// Table-driven verb dispatch keyed by module name.
#[derive(Default, Clone)]
pub struct Dispatcher {
    modules: ModuleCollection,
    table: HashMap<(String, Verb), VerbFn>,
}

impl Dispatcher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_module(&mut self, d: ModuleDescriptor) -> Result<(), ModuleError> {
        self.modules.insert(d)
    }

    pub fn modules(&self) -> &ModuleCollection {
        &self.modules
    }

    pub fn register<F>(&mut self, module: &str, verb: Verb, f: F) -> Result<(), ModuleError>
    where
        F: Fn(&mut BTreeMap<String, Value>, &Value) -> Result<Value, String> + Send + Sync + 'static,
    {
        let d = self.modules.get(module).ok_or_else(|| ModuleError::UnknownModule(module.to_string()))?;
        if !d.supports(verb) {
            return Err(ModuleError::UnsupportedVerb { module: d.name.clone(), supported: d.supported_list() });
        }
        self.table.insert((module.to_string(), verb), Arc::new(f));
        Ok(())
    }

    /// Creates an instance of a registered module. Slots not given start as null.
    pub fn instantiate(
        &self,
        module: &str,
        initial: impl IntoIterator<Item = (String, Value)>,
    ) -> Result<ModuleInstance, ModuleError> {
        let d = self.modules.get(module).ok_or_else(|| ModuleError::UnknownModule(module.to_string()))?;
        let mut state: BTreeMap<String, Value> = d.slots.keys().map(|k| (k.clone(), Value::Null)).collect();
        for (k, v) in initial {
            state.insert(k, v);
        }
        check_state(d, &state)?;
        Ok(ModuleInstance { descriptor: Arc::new(d.clone()), state })
    }

    fn resolve(&self, module: &str, verb: Verb) -> Option<&VerbFn> {
        let mut current = Some(module.to_string());
        while let Some(name) = current {
            if let Some(f) = self.table.get(&(name.clone(), verb)) {
                return Some(f);
            }
            current = self.modules.get(&name).and_then(|d| d.parent.clone());
        }
        None
    }

    /// Runs `verb` on `instance`. The state update is all-or-nothing: on any
    /// error the instance is left exactly as it was.
    pub fn invoke(&self, instance: &mut ModuleInstance, verb: &str, payload: &Value) -> Result<Value, ModuleError> {
        let verb: Verb = verb.parse()?;
        let d = instance.descriptor.clone();
        if !d.supports(verb) {
            return Err(ModuleError::UnsupportedVerb { module: d.name.clone(), supported: d.supported_list() });
        }
        let f = self
            .resolve(&d.name, verb)
            .ok_or_else(|| ModuleError::NotImplemented { module: d.name.clone(), verb })?;
        let mut staged = instance.state.clone();
        let out = f(&mut staged, payload).map_err(|message| ModuleError::Invocation {
            module: d.name.clone(),
            verb,
            message,
        })?;
        check_state(&d, &staged)?;
        instance.state = staged;
        Ok(out)
    }
}

fn check_state(d: &ModuleDescriptor, state: &BTreeMap<String, Value>) -> Result<(), ModuleError> {
    for (k, v) in state {
        let ty = d
            .slots
            .get(k)
            .ok_or_else(|| ModuleError::UnknownSlot { module: d.name.clone(), slot: k.clone() })?;
        if !ty.accepts(v) {
            return Err(ModuleError::SlotType { slot: k.clone(), expected: *ty, got: v.to_string() });
        }
    }
    Ok(())
}
