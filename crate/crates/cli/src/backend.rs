use anyhow::{anyhow, Result};
use blanc::{MaskedLm, ReferenceBackend};

pub const BUNDLE_ENV: &str = "BLANC_BUNDLE";

/// `reference` selects the built-in frequency backend; anything else is a
/// bundle directory.
pub fn open(choice: &str, batch_size: Option<usize>) -> Result<Box<dyn MaskedLm>> {
    if choice == "reference" {
        return Ok(Box::new(ReferenceBackend::builtin()));
    }
    open_bundle(choice, batch_size)
}

#[cfg(feature = "onnx")]
fn open_bundle(choice: &str, batch_size: Option<usize>) -> Result<Box<dyn MaskedLm>> {
    let mut backend = blanc::backend::load_bundle(std::path::Path::new(choice))
        .map_err(|e| anyhow!("cannot load bundle {choice}: {e}"))?;
    if let Some(n) = batch_size {
        backend = backend.with_max_batch(n);
    }
    if let Some(report) = backend.self_test() {
        eprintln!(
            "bundle self-test: {}/{} positions agree, {} tokenization cases",
            report.agreeing, report.positions, report.tokenization_cases
        );
    }
    Ok(Box::new(backend))
}

#[cfg(not(feature = "onnx"))]
fn open_bundle(choice: &str, _batch_size: Option<usize>) -> Result<Box<dyn MaskedLm>> {
    Err(anyhow!("cannot load bundle {choice}: built without the `onnx` feature"))
}
