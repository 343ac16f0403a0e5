use quantkit::aggregative::AdjustedClassifyAndCount;
use quantkit::classify::LogisticRegression;
use quantkit::data::synth_gaussian;
use quantkit::eval::{app_evaluate, ProtocolConfig};
use quantkit::Quantifier;

fn main() -> quantkit::Result<()> {
    let data = synth_gaussian(2000, 2, 2.07, 7)?;
    let mut acc = AdjustedClassifyAndCount::acc(Box::new(LogisticRegression::default()));
    acc.fit(&data.training)?;
    println!("{:?}", acc.quantify(data.test.instances())?);

    let cfg = ProtocolConfig { sample_size: 100, n_repetitions: 10, ..Default::default() };
    let report = app_evaluate(&acc, &data.test, &cfg, &["mae".into()])?;
    print!("{}", report.to_csv_string());
    Ok(())
}
