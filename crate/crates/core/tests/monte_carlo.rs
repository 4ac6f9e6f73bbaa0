//! Brute-force Monte-Carlo oracle for PD and marginal curves on
//! bivariate-normal inputs: the estimators run on a modest sample, the oracle
//! averages the model directly over 10^6 independent draws, and the two must
//! agree within three combined standard errors.

use atdev::effects::{self, column_bins};
use atdev::simgen::{generate, CaseId, SimSpec};
use atdev::{AnalyticModel, ModelId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const M: usize = 1_000_000;
const RHO: f64 = 0.5;

struct Moments {
    n: f64,
    sum: f64,
    sq: f64,
}

impl Moments {
    fn new() -> Self {
        Moments { n: 0.0, sum: 0.0, sq: 0.0 }
    }
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        self.sum += v;
        self.sq += v * v;
    }
    fn mean(&self) -> f64 {
        self.sum / self.n
    }
    /// Squared standard error of the mean.
    fn se2(&self) -> f64 {
        let m = self.mean();
        (self.sq / self.n - m * m).max(0.0) / (self.n - 1.0)
    }
}

fn draws(seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..M)
        .map(|_| {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            [z1, RHO * z1 + (1.0 - RHO * RHO).sqrt() * z2]
        })
        .collect()
}

#[test]
fn estimators_match_brute_force_averages() {
    let oracle_draws = draws(0xC0FFEE);
    let mut checked = 0;
    for (mi, id) in [ModelId::AdditiveLinear, ModelId::Multiplicative, ModelId::QuadPlusInteraction]
        .into_iter()
        .enumerate()
    {
        let m = AnalyticModel::catalog(id).unwrap();
        let case = CaseId::BivariateNormal {
            mu1: 0.0,
            mu2: 0.0,
            sigma1: 1.0,
            sigma2: 1.0,
            rho: RHO,
            model: id,
        };
        let d = generate(&SimSpec::new(case, 20_000, 40 + mi as u64)).unwrap().without_response();
        let bins = column_bins(&d, 20).unwrap();
        for j in 0..2 {
            let b = &bins[j];
            let other = 1 - j;

            let pd = effects::pdp(&m, &d, j, b).unwrap();
            for (g, (&z, &est)) in b.midpoints.iter().zip(&pd.values).enumerate() {
                let mut row = [0.0; 2];
                row[j] = z;
                let mut sample = Moments::new();
                for &xo in d.column(other) {
                    row[other] = xo;
                    sample.push(m.eval_row(&row));
                }
                let mut brute = Moments::new();
                for x in &oracle_draws {
                    row[other] = x[other];
                    brute.push(m.eval_row(&row));
                }
                let se = (sample.se2() + brute.se2()).sqrt();
                assert!(
                    (est - brute.mean()).abs() <= 3.0 * se + 1e-12,
                    "{} PD x{} bin {g}: {est} vs {} (se {se})",
                    id.as_str(),
                    j + 1,
                    brute.mean()
                );
                checked += 1;
            }

            let marginal = effects::marginal(&m, &d, j, b).unwrap();
            let mut sample: Vec<Moments> = (0..b.k()).map(|_| Moments::new()).collect();
            for (i, &bin) in b.assignment().iter().enumerate() {
                sample[bin].push(m.eval_row(&[d.column(0)[i], d.column(1)[i]]));
            }
            let mut brute: Vec<Moments> = (0..b.k()).map(|_| Moments::new()).collect();
            for x in &oracle_draws {
                if x[j] < b.edges[0] || x[j] > b.edges[b.k()] {
                    continue;
                }
                brute[b.bin_of(x[j])].push(m.eval_row(x));
            }
            for g in 0..b.k() {
                let est = marginal.values[g];
                assert!((est - sample[g].mean()).abs() < 1e-9);
                let se = (sample[g].se2() + brute[g].se2()).sqrt();
                assert!(
                    (est - brute[g].mean()).abs() <= 3.0 * se + 1e-12,
                    "{} marginal x{} bin {g}: {est} vs {} (se {se})",
                    id.as_str(),
                    j + 1,
                    brute[g].mean()
                );
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 3 * 2 * 2 * 20);
}
