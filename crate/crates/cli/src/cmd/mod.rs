pub mod fit;
pub mod gen;
pub mod prune;
pub mod report;
pub mod theory;

use std::path::Path;

use mrprune::annotation::{read_log_path, RepeatRecord};

use crate::output::{CliError, CliResult};

pub fn load_log(path: &Path) -> CliResult<Vec<RepeatRecord>> {
    if !path.exists() {
        return Err(CliError::io(format!("{}: no such file", path.display())));
    }
    read_log_path(path).map_err(|e| CliError::from(e).context(path.display()))
}
