use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rdim::io::{read_bundle, read_idx_dataset};
use rdim::network::FcnModel;
use rdim::trainer::{LabeledDataset, SyntheticSpec};

use crate::args::DataArgs;
use crate::Failure;

pub fn load_model(path: &Path) -> Result<FcnModel, Failure> {
    let bundle = read_bundle(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    bundle
        .to_model()
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

pub fn load_source(
    images: Option<&PathBuf>,
    labels: Option<&PathBuf>,
    synthetic: Option<&SyntheticSpec>,
    seed: u64,
) -> Result<LabeledDataset, Failure> {
    match (images, labels, synthetic) {
        (Some(i), Some(l), None) => read_idx_dataset(i, l).map_err(|e| {
            Failure::Input(format!("{} / {}: {e}", i.display(), l.display()))
        }),
        (None, None, Some(spec)) => Ok(spec.generate(seed)?),
        _ => Err(Failure::Input(
            "give either --idx-images with --idx-labels, or --synthetic".into(),
        )),
    }
}

pub fn load_data(args: &DataArgs, seed: u64) -> Result<LabeledDataset, Failure> {
    load_source(
        args.idx_images.as_ref(),
        args.idx_labels.as_ref(),
        args.synthetic.as_ref(),
        seed,
    )
}

pub fn check_input_dim(model: &FcnModel, data: &LabeledDataset) -> Result<(), Failure> {
    if model.input_dim() != data.inputs.rows() {
        return Err(Failure::Input(format!(
            "entry \"W1\" expects {} inputs, data has dimension {}",
            model.input_dim(),
            data.inputs.rows()
        )));
    }
    Ok(())
}

/// File at `path`, or stdout.
pub fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}
