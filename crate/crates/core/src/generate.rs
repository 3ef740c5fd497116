//! Seeded random influence diagrams for tests and benchmarks.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::model::{DiagramBuilder, InfluenceDiagram, VarId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenParams {
    pub chance: usize,
    pub decisions: usize,
    /// Cardinality of every chance and decision variable.
    pub card: usize,
    /// Maximum number of parents of any variable.
    pub max_parents: usize,
    pub values: usize,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams { chance: 4, decisions: 2, card: 2, max_parents: 2, values: 2, seed: 0 }
    }
}

fn pick_parents(rng: &mut ChaCha8Rng, pool: &[VarId], max: usize) -> Vec<VarId> {
    let k = rng.random_range(0..=max.min(pool.len()));
    let mut parents: Vec<VarId> = pool.choose_multiple(rng, k).copied().collect();
    parents.sort();
    parents
}

/// Chance and decision variables in a random order, each drawing up to
/// `max_parents` parents uniformly from earlier ones. CPT columns are
/// Dirichlet(1, ..., 1), rewards uniform on `[0, 1)`, and value variables take
/// their parents from the chance and decision variables.
pub fn random_diagram(p: &GenParams) -> InfluenceDiagram {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut kinds: Vec<bool> = std::iter::repeat_n(true, p.decisions).chain(std::iter::repeat_n(false, p.chance)).collect();
    kinds.shuffle(&mut rng);

    let mut b = DiagramBuilder::new();
    let mut made: Vec<VarId> = Vec::new();
    let (mut nc, mut nd) = (0, 0);
    for is_decision in kinds {
        let parents = pick_parents(&mut rng, &made, p.max_parents);
        let id = if is_decision {
            nd += 1;
            b.decision(&format!("D{:02}", nd - 1), p.card, &parents)
        } else {
            nc += 1;
            let columns = parents.len() as u32;
            let mut table = Vec::new();
            for _ in 0..p.card.pow(columns) {
                let draws: Vec<f64> = (0..p.card).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                let total: f64 = draws.iter().sum();
                table.extend(draws.iter().map(|x| x / total));
            }
            b.chance(&format!("C{:02}", nc - 1), p.card, &parents, table)
        };
        made.push(id);
    }
    for v in 0..p.values {
        let parents = pick_parents(&mut rng, &made, p.max_parents);
        let table = (0..p.card.pow(parents.len() as u32)).map(|_| rng.random::<f64>()).collect();
        b.value(&format!("V{v:02}"), &parents, table);
    }
    b.build()
}
