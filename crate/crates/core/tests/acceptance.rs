//! Acceptance runner: one line per criterion, non-zero exit if any fails.

mod common;

use common::*;

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("worked example", worked_example),
        ("algorithm oracle (200 instances)", || algorithm_oracle(200)),
        ("metrics oracle (1000 instances)", || metrics_oracle(1000)),
        ("invariance: scale", || scale_invariance(100)),
        ("invariance: prompt permutation", || {
            permutation_invariance(100)
        }),
        ("invariance: sum/mean argmax", || sum_mean_equivalence(100)),
        ("invariance: AUC label flip", || auc_label_flip(100)),
        ("invariance: joint shuffle", || {
            joint_shuffle_invariance(100)
        }),
        ("synthetic end-to-end", synthetic_end_to_end),
        ("fold-plan properties", fold_plan_properties),
        ("per-source consistency", per_source_consistency),
        ("exchange format", || exchange_format(100)),
        ("report fidelity", report_fidelity),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
