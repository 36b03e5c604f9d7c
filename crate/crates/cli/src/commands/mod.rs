pub mod annotate;
pub mod geometry;
pub mod metrics;
pub mod ntk;
pub mod train;
pub mod vq;

use std::path::Path;

use latentlab_core::geometry::LatentRecord;
use latentlab_core::io::read_records;
use latentlab_core::Tensor;

use crate::CliError;

pub fn load_records(path: &Path) -> Result<Vec<LatentRecord>, CliError> {
    Ok(read_records(path)?)
}

pub fn find_record<'a>(
    records: &'a [LatentRecord],
    id: &str,
) -> Result<&'a LatentRecord, CliError> {
    records
        .iter()
        .find(|r| r.id == id)
        .ok_or_else(|| CliError::validation(format!("no record with id {id:?}")))
}

pub fn vector_row(v: &Tensor) -> Vec<String> {
    v.data().iter().map(|x| format!("{x}")).collect()
}
