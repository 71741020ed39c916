//! Erases cells of a complete dataset with the Adult and COMPAS per-group rates and
//! prints the realized rates with their standard errors.

use fairmip::dataset::synthetic::{adult_like, compas_like};
use fairmip::dataset::{inject_missingness, MissingnessSpec};

fn main() -> fairmip::Result<()> {
    for (name, ds, spec) in [
        ("adult", adult_like(4000, 1), MissingnessSpec::adult()),
        ("compas", compas_like(4000, 1), MissingnessSpec::compas()),
    ] {
        let erased = inject_missingness(&ds, &spec, 42)?;
        let report = erased.missingness_report();
        println!("{name}:");
        for e in &spec.entries {
            let f = report.feature(&e.feature).expect("spec features exist");
            println!(
                "  {:<15} group 0 {:.3} (target {:.1}, se {:.3})  group 1 {:.3} (target {:.1}, se {:.3})",
                e.feature, f.group0.rate, e.p0, f.group0.se, f.group1.rate, e.p1, f.group1.se
            );
        }
    }
    Ok(())
}
