use clap::ValueEnum;
use meanslab_core::constants::{beta, gamma, kantorovich, specht};

use crate::fmt::format_sig;
use crate::Failure;

#[derive(Clone, Copy, ValueEnum)]
pub enum Name {
    Kantorovich,
    Specht,
    Beta,
    Gamma,
}

#[derive(clap::Args)]
pub struct Args {
    name: Name,
    /// Positional parameters of the constant.
    #[arg(allow_negative_numbers = true)]
    params: Vec<f64>,
}

pub fn value(name: Name, p: &[f64]) -> Result<f64, Failure> {
    let (expected, usage) = match name {
        Name::Kantorovich => (2, "kantorovich H P"),
        Name::Specht => (1, "specht H"),
        Name::Beta => (3, "beta m M ALPHA"),
        Name::Gamma => (4, "gamma m M R ALPHA"),
    };
    if p.len() != expected {
        return Err(Failure::Invalid(format!("expected {expected} parameter(s): {usage}")));
    }
    let v = match name {
        Name::Kantorovich => kantorovich(p[0], p[1]),
        Name::Specht => specht(p[0]),
        Name::Beta => beta(p[0], p[1], p[2]),
        Name::Gamma => gamma(p[0], p[1], p[2], p[3]),
    }?;
    Ok(v)
}

pub fn run(args: Args) -> Result<(), Failure> {
    println!("{}", format_sig(value(args.name, &args.params)?, 15));
    Ok(())
}
