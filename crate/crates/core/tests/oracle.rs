use cosine_audit::solvers::{loss, loss_and_gradients, solve};
use cosine_audit::{gradient_descent_oracle, svd, DataMatrix, Objective, OracleConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OBJECTIVES: [Objective; 2] = [Objective::ProductReg, Objective::SplitReg];

fn seeded(rows: usize, cols: usize, seed: u64) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DataMatrix::from_fn(rows, cols, |_, _| rng.gen::<f64>())
}

fn centered(rows: usize, cols: usize, seed: u64) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DataMatrix::from_fn(rows, cols, |_, _| rng.gen::<f64>() - 0.5)
}

fn add(m: &DataMatrix, d: &DataMatrix, t: f64) -> DataMatrix {
    DataMatrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j) + t * d.get(i, j))
}

#[test]
fn oracle_reaches_closed_form_loss() {
    for seed in 0..3u64 {
        let x = seeded(8, 6, seed);
        for lambda in [0.1, 1.0, 10.0] {
            for obj in OBJECTIVES {
                let pair = solve(&x, 3, lambda, obj).unwrap();
                let closed = loss(&x, &pair.a, &pair.b, lambda, obj).unwrap();
                let outcome =
                    gradient_descent_oracle(&x, 3, lambda, obj, &OracleConfig::default()).unwrap();
                let rel = (outcome.final_loss - closed).abs() / closed;
                assert!(rel <= 1e-4, "seed {seed} λ {lambda} {obj:?}: rel {rel:e}");
                // closed form is the global minimum
                assert!(outcome.final_loss >= closed * (1.0 - 1e-10));
                assert!(outcome.checkpoints.windows(2).all(|w| w[1] <= w[0]));
            }
        }
    }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let h = 1e-6;
    for seed in 0..5u64 {
        let x = seeded(4, 3, seed);
        let a = centered(3, 2, seed + 100);
        let b = centered(3, 2, seed + 200);
        for lambda in [0.0, 0.5, 3.0] {
            for obj in OBJECTIVES {
                let (_, ga, gb) = loss_and_gradients(&x, &a, &b, lambda, obj).unwrap();
                let mut num = 0.0;
                let mut den = 0.0;
                for (which, grad) in [(0, &ga), (1, &gb)] {
                    for i in 0..3 {
                        for j in 0..2 {
                            let bump = |t: f64| {
                                let e = DataMatrix::from_fn(3, 2, |r, c| {
                                    if (r, c) == (i, j) { 1.0 } else { 0.0 }
                                });
                                let (a2, b2) = if which == 0 {
                                    (add(&a, &e, t), b.clone())
                                } else {
                                    (a.clone(), add(&b, &e, t))
                                };
                                loss(&x, &a2, &b2, lambda, obj).unwrap()
                            };
                            let fd = (bump(h) - bump(-h)) / (2.0 * h);
                            num += (fd - grad.get(i, j)).powi(2);
                            den += grad.get(i, j).powi(2);
                        }
                    }
                }
                let rel = num.sqrt() / den.sqrt();
                assert!(rel <= 1e-5, "seed {seed} λ {lambda} {obj:?}: rel {rel:e}");
            }
        }
    }
}

#[test]
fn closed_forms_are_local_minima() {
    let x = seeded(8, 6, 42);
    for obj in OBJECTIVES {
        for lambda in [0.1, 1.0] {
            let pair = solve(&x, 3, lambda, obj).unwrap();
            let base = loss(&x, &pair.a, &pair.b, lambda, obj).unwrap();
            for seed in 0..25u64 {
                let da = centered(6, 3, 1000 + seed);
                let db = centered(6, 3, 2000 + seed);
                let norm = (da.frobenius_norm_sq() + db.frobenius_norm_sq()).sqrt();
                let t = 1e-3 / norm;
                let moved = loss(&x, &add(&pair.a, &da, t), &add(&pair.b, &db, t), lambda, obj).unwrap();
                assert!(
                    moved >= base * (1.0 - 1e-13),
                    "{obj:?} λ {lambda} seed {seed}: {moved} < {base}"
                );
            }
        }
    }
}

#[test]
fn split_objective_balances_penalties() {
    for seed in 0..10u64 {
        let x = seeded(9, 7, seed);
        let lambda = 0.5;
        let pair = solve(&x, 4, lambda, Objective::SplitReg).unwrap();
        let xa = x.matmul(&pair.a).unwrap();
        let (lhs, rhs) = (xa.frobenius_norm_sq(), pair.b.frobenius_norm_sq());
        assert!((lhs - rhs).abs() <= 1e-8 * rhs.max(1e-300));

        let f = svd(&x, 4).unwrap();
        let expected = f
            .left
            .scale_columns(
                &f.singular_values
                    .iter()
                    .map(|s| (s - lambda).max(0.0).sqrt())
                    .collect::<Vec<_>>(),
            )
            .unwrap();
        assert!(xa.max_abs_diff(&expected).unwrap() <= 1e-8);
    }
}
