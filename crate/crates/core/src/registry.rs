//! Name-keyed factories for interchangeable strategies.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

type Factory<P, T> = Box<dyn Fn(&P) -> Box<T> + Send + Sync>;

/// Maps strategy names to constructors taking shared parameters `P`.
pub struct Registry<P, T: ?Sized> {
    kind: &'static str,
    factories: BTreeMap<String, Factory<P, T>>,
}

impl<P, T: ?Sized> Registry<P, T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            factories: BTreeMap::new(),
        }
    }

    /// Registers `factory` under `name`, replacing any previous entry.
    pub fn register(
        &mut self,
        name: impl Into<String>,
        factory: impl Fn(&P) -> Box<T> + Send + Sync + 'static,
    ) -> &mut Self {
        self.factories.insert(name.into(), Box::new(factory));
        self
    }

    pub fn create(&self, name: &str, params: &P) -> Result<Box<T>> {
        match self.factories.get(name) {
            Some(factory) => Ok(factory(params)),
            None => Err(Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().collect::<Vec<_>>().join(", "),
            }),
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }
}

impl<P, T: ?Sized> fmt::Debug for Registry<P, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("names", &self.factories.keys().collect::<Vec<_>>())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    trait Greeter {
        fn greet(&self) -> String;
    }

    struct Fixed(String);

    impl Greeter for Fixed {
        fn greet(&self) -> String {
            self.0.clone()
        }
    }

    #[test]
    fn create_by_name() {
        let mut reg: Registry<u32, dyn Greeter> = Registry::new("greeter");
        reg.register("plain", |n: &u32| Box::new(Fixed(format!("hi {n}"))));
        assert_eq!(reg.create("plain", &3).unwrap().greet(), "hi 3");
        let err = reg.create("fancy", &3).err().unwrap();
        assert!(err.to_string().contains("available: plain"));
    }
}
