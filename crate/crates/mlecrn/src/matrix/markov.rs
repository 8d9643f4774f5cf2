//! Saturated generating sets for kernel lattices.
//!
//! [`markov_basis`] upgrades a lattice basis of `Z^n ∩ ker A` to a Markov
//! basis: a set of kernel vectors whose pure-difference binomials
//! `x^{v⁺} − x^{v⁻}` generate the entire ideal of lattice relations (the
//! toric ideal of the matrix), not merely some sub-ideal with the same
//! positive zero set. The distinction matters for network construction:
//! reaction systems assembled from a bare lattice basis can have critical
//! siphons — boundary faces able to trap trajectories — whereas systems
//! assembled from a Markov basis never do, because the full relation ideal
//! is prime. A two-row example where the gap is visible: for
//! `A = [[3,2,1,0],[0,1,2,3]]` the lattice basis gives only two of the three
//! needed relations; the third, `x1·x4 = x2·x3`, is reachable only by
//! saturation.
//!
//! The computation is the classical iterated-saturation scheme, run in exact
//! integer arithmetic on exponent vectors: starting from the lattice-basis
//! binomials, saturate by each variable in turn, where one saturation step is
//! a Buchberger completion under a graded reverse-lexicographic order that
//! makes the chosen variable cheapest, followed by dividing each generator by
//! that variable's shared power. Because the kernel lattice is saturated
//! (it is the full integer kernel, not a finite-index sublattice), the final
//! ideal is exactly the toric ideal.

use super::{DesignMatrix, MatrixError};
use std::cmp::Ordering;
use std::collections::VecDeque;

/// Elementary rewrite/S-pair steps allowed per completion run. The corpus
/// sizes here (n ≤ 10 or so) stay at a few thousand steps; the bound only
/// guards against pathological inputs, and tripping it is an error rather
/// than a silently weaker generating set.
const MAX_STEPS: usize = 5_000_000;
/// Generating-set size bound during completion.
const MAX_GENERATORS: usize = 20_000;

/// Pure-difference binomial `x^lead − x^tail`, oriented so that `lead` is the
/// strictly larger monomial in the active term order. Entries nonnegative.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Binomial {
    lead: Vec<i64>,
    tail: Vec<i64>,
}

impl Binomial {
    fn signed_vector(&self) -> Vec<i64> {
        self.lead.iter().zip(&self.tail).map(|(&l, &t)| l - t).collect()
    }
}

/// Graded reverse-lexicographic comparison of exponent vectors. Total degree
/// decides first; on ties the monomial with the larger exponent at the
/// cheapest variable where the two differ is the smaller one. `scan` lists
/// variable indices from cheapest to most expensive.
fn grevlex(a: &[i64], b: &[i64], scan: &[usize]) -> Ordering {
    let da: i64 = a.iter().sum();
    let db: i64 = b.iter().sum();
    if da != db {
        return da.cmp(&db);
    }
    for &k in scan {
        if a[k] != b[k] {
            return b[k].cmp(&a[k]);
        }
    }
    Ordering::Equal
}

/// Variable scan order (cheapest first) for the canonical order
/// `x1 > x2 > … > xn`, optionally promoting one variable to cheapest.
fn scan_order(n: usize, cheapest: Option<usize>) -> Vec<usize> {
    match cheapest {
        None => (0..n).rev().collect(),
        Some(i) => std::iter::once(i)
            .chain((0..n).rev().filter(|&k| k != i))
            .collect(),
    }
}

/// Monomial divisibility `x^d | x^m`.
fn divides(d: &[i64], m: &[i64]) -> bool {
    d.iter().zip(m).all(|(&x, &y)| x <= y)
}

fn disjoint_support(a: &[i64], b: &[i64]) -> bool {
    a.iter().zip(b).all(|(&x, &y)| x == 0 || y == 0)
}

/// One budgeted Buchberger completion under a fixed term order.
struct Completion<'a> {
    scan: &'a [usize],
    steps: usize,
}

impl Completion<'_> {
    fn charge(&mut self) -> Result<(), MatrixError> {
        self.steps += 1;
        if self.steps > MAX_STEPS {
            return Err(MatrixError::CompletionOverflow);
        }
        Ok(())
    }

    /// Fully reduces `x^u − x^v` modulo the leads of `gens` (element `skip`
    /// excluded); `None` when the difference reduces to zero. Each rewrite
    /// strictly decreases one side in the term order, so this terminates.
    fn reduce(
        &mut self,
        mut u: Vec<i64>,
        mut v: Vec<i64>,
        gens: &[Binomial],
        skip: Option<usize>,
    ) -> Result<Option<Binomial>, MatrixError> {
        'rewrite: loop {
            self.charge()?;
            if u == v {
                return Ok(None);
            }
            if grevlex(&u, &v, self.scan) == Ordering::Less {
                std::mem::swap(&mut u, &mut v);
            }
            for side in [&mut u, &mut v] {
                for (idx, g) in gens.iter().enumerate() {
                    if Some(idx) == skip || !divides(&g.lead, side) {
                        continue;
                    }
                    for (s, (l, t)) in side.iter_mut().zip(g.lead.iter().zip(&g.tail)) {
                        *s += *t - *l;
                    }
                    continue 'rewrite;
                }
            }
            return Ok(Some(Binomial { lead: u, tail: v }));
        }
    }

    /// Buchberger completion of the seed differences, returning the reduced
    /// basis (unique for the ideal and order, so the output is deterministic
    /// and independent of seed presentation).
    fn complete(
        &mut self,
        seed: Vec<(Vec<i64>, Vec<i64>)>,
    ) -> Result<Vec<Binomial>, MatrixError> {
        let mut gens: Vec<Binomial> = Vec::new();
        let mut pairs: VecDeque<(usize, usize)> = VecDeque::new();
        for (u, v) in seed {
            if let Some(b) = self.reduce(u, v, &gens, None)? {
                for k in 0..gens.len() {
                    pairs.push_back((k, gens.len()));
                }
                gens.push(b);
            }
        }
        while let Some((i, j)) = pairs.pop_front() {
            self.charge()?;
            // Coprime leading monomials: the S-difference always rewrites to
            // zero, no new information.
            if disjoint_support(&gens[i].lead, &gens[j].lead) {
                continue;
            }
            let w: Vec<i64> = gens[i]
                .lead
                .iter()
                .zip(&gens[j].lead)
                .map(|(&x, &y)| x.max(y))
                .collect();
            let lift = |g: &Binomial| -> Vec<i64> {
                w.iter()
                    .zip(&g.lead)
                    .zip(&g.tail)
                    .map(|((&wk, &l), &t)| wk - l + t)
                    .collect()
            };
            let (u, v) = (lift(&gens[i]), lift(&gens[j]));
            if let Some(b) = self.reduce(u, v, &gens, None)? {
                if gens.len() == MAX_GENERATORS {
                    return Err(MatrixError::CompletionOverflow);
                }
                for k in 0..gens.len() {
                    pairs.push_back((k, gens.len()));
                }
                gens.push(b);
            }
        }
        self.interreduce(gens)
    }

    /// Minimizes a Gröbner basis (drops elements whose lead another lead
    /// divides) and reduces every tail modulo the surviving leads.
    fn interreduce(&mut self, mut gens: Vec<Binomial>) -> Result<Vec<Binomial>, MatrixError> {
        gens.sort_by(|f, g| {
            grevlex(&f.lead, &g.lead, self.scan).then_with(|| grevlex(&f.tail, &g.tail, self.scan))
        });
        gens.dedup();
        let mut kept: Vec<Binomial> = Vec::new();
        for g in gens {
            if kept.iter().all(|k| !divides(&k.lead, &g.lead)) {
                kept.push(g);
            }
        }
        for idx in 0..kept.len() {
            let g = kept[idx].clone();
            kept[idx] = self
                .reduce(g.lead, g.tail, &kept, Some(idx))?
                .expect("lead is irreducible modulo the other kept leads");
        }
        Ok(kept)
    }
}

fn completed(
    n: usize,
    cheapest: Option<usize>,
    seed: Vec<(Vec<i64>, Vec<i64>)>,
) -> Result<Vec<Binomial>, MatrixError> {
    let scan = scan_order(n, cheapest);
    Completion { scan: &scan, steps: 0 }.complete(seed)
}

/// Markov basis of the integer kernel lattice of `a`; see the module docs.
///
/// The output generates the same lattice as `a.kernel_basis()` but may have
/// more vectors. It is canonical: the reduced completion under the order
/// `x1 > x2 > … > xn`, each vector oriented with its first nonzero entry
/// positive, sorted by molecule count, then lexicographically. Every vector
/// has disjoint positive/negative supports, so splitting signs recovers the
/// two binomial sides exactly.
pub(super) fn markov_basis(a: &DesignMatrix) -> Result<Vec<Vec<i64>>, MatrixError> {
    let n = a.cols();
    let mut seed: Vec<(Vec<i64>, Vec<i64>)> = a
        .kernel_basis()?
        .vectors()
        .iter()
        .map(|v| {
            (
                v.iter().map(|&x| x.max(0)).collect(),
                v.iter().map(|&x| (-x).max(0)).collect(),
            )
        })
        .collect();
    if seed.is_empty() {
        return Ok(Vec::new());
    }
    for i in 0..n {
        let gens = completed(n, Some(i), seed)?;
        // Divide each generator by the shared power of variable i. Together
        // with the completion this saturates the ideal by that variable;
        // after one pass over all variables the ideal is fully saturated.
        seed = gens
            .into_iter()
            .map(|mut g| {
                let s = g.lead[i].min(g.tail[i]);
                g.lead[i] -= s;
                g.tail[i] -= s;
                (g.lead, g.tail)
            })
            .collect();
    }
    let gens = completed(n, None, seed)?;
    let mut out: Vec<Vec<i64>> = gens
        .iter()
        .map(|g| {
            let mut v = g.signed_vector();
            if v.iter().find(|&&x| x != 0).is_some_and(|&x| x < 0) {
                for x in &mut v {
                    *x = -*x;
                }
            }
            v
        })
        .collect();
    out.sort_by(|p, q| {
        let dp: i64 = p.iter().map(|&x| x.max(0)).sum();
        let dq: i64 = q.iter().map(|&x| x.max(0)).sum();
        dp.cmp(&dq).then_with(|| p.cmp(q))
    });
    Ok(out)
}
