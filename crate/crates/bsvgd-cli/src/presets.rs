//! Embedded run configurations for the two benchmark targets, one per
//! algorithm. `run --config <name>` falls back to these when the argument
//! is not a file on disk.

pub const GAUSS25_SVGD: &str = "paper-gauss25-svgd";
pub const GAUSS25_BSVGD: &str = "paper-gauss25-bsvgd";
pub const BANANA3_SVGD: &str = "paper-banana3-svgd";
pub const BANANA3_BSVGD: &str = "paper-banana3-bsvgd";

pub const NAMES: [&str; 4] = [GAUSS25_SVGD, GAUSS25_BSVGD, BANANA3_SVGD, BANANA3_BSVGD];

pub fn lookup(name: &str) -> Option<&'static str> {
    match name {
        GAUSS25_SVGD => Some(GAUSS25_SVGD_TOML),
        GAUSS25_BSVGD => Some(GAUSS25_BSVGD_TOML),
        BANANA3_SVGD => Some(BANANA3_SVGD_TOML),
        BANANA3_BSVGD => Some(BANANA3_BSVGD_TOML),
        _ => None,
    }
}

const GAUSS25_SVGD_TOML: &str = r#"algorithm = "svgd"
seed = 2024

[target]
preset = "paper-gauss25"

[kernel]
type = "gaussian"
bandwidth = 1.0

[svgd]
max_iterations = 2000
threshold = 0.001

[svgd.schedule]
kind = "sigmoid"
e_start = 1.0
e_end = 0.01

[init]
count = 500
std = 1.0

[metrics]
enabled = true
replicates = 10
"#;

const GAUSS25_BSVGD_TOML: &str = r#"algorithm = "bsvgd"
seed = 2024

[target]
preset = "paper-gauss25"

[kernel]
type = "gaussian"
bandwidth = 1.0

[svgd]
max_iterations = 2000
threshold = 0.001

[svgd.schedule]
kind = "sigmoid"
e_start = 1.0
e_end = 0.01

[branching]
proposal_std = 2.0
q_E = [
  { value = 0, probability = 0.5 },
  { value = 1, probability = 0.2 },
  { value = 2, probability = 0.3 },
]
q_S = [
  { value = 1, probability = 0.3333333333333333 },
  { value = 2, probability = 0.3333333333333333 },
  { value = 3, probability = 0.3333333333333333 },
]

[bsvgd]
max_population = 500
precision = "one_over_ell"

[bsvgd.initial]
count = 1
std = 1.0

[metrics]
enabled = true
replicates = 10
"#;

const BANANA3_SVGD_TOML: &str = r#"algorithm = "svgd"
seed = 2024

[target]
preset = "paper-banana3"
dof = 7.0

[kernel]
type = "gaussian"
bandwidth = 1.0

[svgd]
max_iterations = 2000
threshold = 0.001

[svgd.schedule]
kind = "sigmoid"
e_start = 10.0
e_end = 1.0

[init]
count = 500
std = 1.0

[metrics]
enabled = true
replicates = 10
"#;

const BANANA3_BSVGD_TOML: &str = r#"algorithm = "bsvgd"
seed = 2024

[target]
preset = "paper-banana3"
dof = 7.0

[kernel]
type = "gaussian"
bandwidth = 1.0

[svgd]
max_iterations = 2000
threshold = 0.001

[svgd.schedule]
kind = "sigmoid"
e_start = 10.0
e_end = 1.0

[branching]
proposal_std = 5.0
q_E = [
  { value = 0, probability = 0.5 },
  { value = 1, probability = 0.2 },
  { value = 2, probability = 0.3 },
]
q_S = [
  { value = 1, probability = 0.3333333333333333 },
  { value = 2, probability = 0.3333333333333333 },
  { value = 3, probability = 0.3333333333333333 },
]

[bsvgd]
max_population = 500
precision = "one_over_ell"

[bsvgd.initial]
count = 1
std = 1.0

[metrics]
enabled = true
replicates = 10
"#;
