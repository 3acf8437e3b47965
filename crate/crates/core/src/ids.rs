//! Dense integer identifiers for vocabulary entries.
//!
//! Ids are assigned in interning order starting at zero and never reused, so
//! every table in a [`Model`](crate::Model) is a plain `Vec` indexed by id.

use std::fmt;

macro_rules! dense_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }

            #[inline]
            pub(crate) fn from_index(index: usize) -> Self {
                Self(u32::try_from(index).expect("id space exhausted"))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

dense_id!(
    /// Index into the token vocabulary.
    TokenId
);
dense_id!(
    /// Index into the feature vocabulary.
    FeatureId
);
dense_id!(
    /// Index into the domain table.
    DomainId
);
dense_id!(
    /// Index into the category table (global across domains).
    CategoryId
);
