//! Fits mean, per-group mean and KNN imputers on data with group-dependent
//! missingness and reports each imputer's per-group squared error on the erased cells.

use fairmip::dataset::synthetic::compas_like;
use fairmip::dataset::{inject_missingness, MissingnessSpec};
use fairmip::imputation::{fit, imputer_disc, optimal_constant, theorem1_disc, Imputer, Theorem1Inputs};

fn main() -> fairmip::Result<()> {
    let truth = compas_like(2000, 5).scale_unit_interval()?;
    let spec = MissingnessSpec::compas();
    let erased = inject_missingness(&truth, &spec, 11)?;
    let d = truth.n_features();
    let full: Vec<Vec<f64>> = (0..truth.n_rows())
        .map(|i| (0..d).map(|j| truth.get(i, j).expect("ground truth is complete")).collect())
        .collect();
    let mask: Vec<Vec<bool>> = (0..truth.n_rows())
        .map(|i| (0..d).map(|j| erased.is_missing(i, j)).collect())
        .collect();

    for imputer in [Imputer::MeanFill, Imputer::PerGroupMeanFill, Imputer::knn()] {
        let fitted = fit(&imputer, &erased)?;
        let disc = imputer_disc(&fitted, &full, &mask, erased.groups())?;
        println!("{imputer:?}: group 0 error {:.4}, group 1 error {:.4}, gap {:.4}", disc.l0, disc.l1, disc.disc);
    }

    let t = Theorem1Inputs { p0_ms: 0.3, p1_ms: 0.7, m0: 0.0, m1: 1.0, var0: 1.0, var1: 2.0 };
    println!(
        "closed form: best constant {} has squared-error gap {}",
        optimal_constant(t.p0_ms, t.p1_ms, t.m0, t.m1)?,
        theorem1_disc(&t)?
    );
    Ok(())
}
