//! Problems bundled with the binary.

use crate::config::{parse_problem, ConfigError};
use crate::problem::ProblemSpec;

pub const BUNDLED: &[(&str, &str)] = &[
    ("heat", include_str!("../problems/heat.json")),
    ("lower_barrier", include_str!("../problems/lower_barrier.json")),
    ("two_barrier", include_str!("../problems/two_barrier.json")),
    ("smooth_lower", include_str!("../problems/smooth_lower.json")),
    ("atom", include_str!("../problems/atom.json")),
    ("absorption", include_str!("../problems/absorption.json")),
    ("heat2d", include_str!("../problems/heat2d.json")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load(name: &str) -> Result<ProblemSpec, ConfigError> {
    let text = source(name).ok_or_else(|| ConfigError::Invalid(format!("no bundled problem named `{name}`")))?;
    parse_problem(text)
}
