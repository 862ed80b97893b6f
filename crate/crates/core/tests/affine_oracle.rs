//! Cross-checks against the faithful affine representation
//! `x·z^k ↦ [[A^k, x], [0, 1]]`, in which the group law is matrix multiplication.
//! Nothing here goes through the library's multiplication, BFS or automorphism code.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unstretch_core::matrix::int_vector;
use unstretch_core::{
    iterate_once, neighborhood, set_diameter, word_ball, Diameter, ElementSet, GeneratingSet, GroupAutomorphism,
    GroupContext, GroupElement, IntMatrix, ToralMatrix,
};

type Affine = Vec<i128>;

struct Oracle {
    d: usize,
    a: Affine,
    a_inv: Affine,
}

impl Oracle {
    fn new(rows: &[Vec<i64>]) -> Self {
        let d = rows.len();
        let m = IntMatrix::from_rows(rows).unwrap();
        let inv = m.inverse_unimodular().unwrap().to_i64().unwrap();
        let flat = |v: &[i64]| -> Affine {
            let mut out = vec![0i128; (d + 1) * (d + 1)];
            for i in 0..d {
                for j in 0..d {
                    out[i * (d + 1) + j] = i128::from(v[i * d + j]);
                }
            }
            out[d * (d + 1) + d] = 1;
            out
        };
        let a: Vec<i64> = rows.iter().flatten().copied().collect();
        Oracle { d, a: flat(&a), a_inv: flat(&inv) }
    }

    fn mul(&self, p: &Affine, q: &Affine) -> Affine {
        let n = self.d + 1;
        let mut out = vec![0i128; n * n];
        for i in 0..n {
            for k in 0..n {
                let pik = p[i * n + k];
                if pik != 0 {
                    for j in 0..n {
                        out[i * n + j] += pik * q[k * n + j];
                    }
                }
            }
        }
        out
    }

    fn identity(&self) -> Affine {
        let n = self.d + 1;
        (0..n * n).map(|i| i128::from(i % (n + 1) == 0)).collect()
    }

    fn translation(&self, x: &[i64]) -> Affine {
        let n = self.d + 1;
        let mut t = self.identity();
        for (i, &c) in x.iter().enumerate() {
            t[i * n + self.d] = i128::from(c);
        }
        t
    }

    fn power(&self, base: &Affine, base_inv: &Affine, k: i64) -> Affine {
        let step = if k >= 0 { base } else { base_inv };
        (0..k.unsigned_abs()).fold(self.identity(), |acc, _| self.mul(&acc, step))
    }

    fn embed(&self, g: &GroupElement) -> Affine {
        let x: Vec<i64> = g.x.iter().map(|c| i64::try_from(c).unwrap()).collect();
        let z = self.power(&self.a, &self.a_inv, g.k);
        self.mul(&self.translation(&x), &z)
    }

    /// Reads off `x` from the last column and recovers `k` by matching the linear block.
    fn unembed(&self, m: &Affine, k_range: i64) -> GroupElement {
        let n = self.d + 1;
        let x: Vec<i64> = (0..self.d).map(|i| i64::try_from(m[i * n + self.d]).unwrap()).collect();
        let linear = |p: &Affine| (0..self.d).flat_map(|i| (0..self.d).map(move |j| p[i * n + j])).collect::<Vec<_>>();
        let ks: Vec<i64> =
            (-k_range..=k_range).filter(|&k| linear(&self.power(&self.a, &self.a_inv, k)) == linear(m)).collect();
        assert_eq!(ks.len(), 1, "A^k must determine k");
        GroupElement::from_i64(&x, ks[0])
    }

    fn generators(&self) -> Vec<Affine> {
        let mut out = Vec::new();
        for i in 0..self.d {
            for s in [1, -1] {
                let mut e = vec![0i64; self.d];
                e[i] = s;
                out.push(self.translation(&e));
            }
        }
        out.push(self.a.clone());
        out.push(self.a_inv.clone());
        out
    }

    /// Plain BFS over affine matrices.
    fn ball(&self, radius: u32) -> HashMap<Affine, u32> {
        let gens = self.generators();
        let mut dist = HashMap::from([(self.identity(), 0u32)]);
        let mut queue = VecDeque::from([self.identity()]);
        while let Some(g) = queue.pop_front() {
            let dg = dist[&g];
            if dg == radius {
                continue;
            }
            for s in &gens {
                let h = self.mul(&g, s);
                if !dist.contains_key(&h) {
                    dist.insert(h.clone(), dg + 1);
                    queue.push_back(h);
                }
            }
        }
        dist
    }

    fn inverse(&self, m: &Affine, k: i64) -> Affine {
        // (x, A^k)^{-1} = (−A^{−k} x, A^{−k})
        let n = self.d + 1;
        let lin_inv = self.power(&self.a, &self.a_inv, -k);
        let x: Vec<i128> = (0..self.d).map(|i| m[i * n + self.d]).collect();
        let mut out = lin_inv.clone();
        for i in 0..self.d {
            out[i * n + self.d] = -(0..self.d).map(|j| lin_inv[i * n + j] * x[j]).sum::<i128>();
        }
        out
    }
}

const CAT: [[i64; 2]; 2] = [[2, 1], [1, 1]];

fn cat_rows() -> Vec<Vec<i64>> {
    CAT.iter().map(|r| r.to_vec()).collect()
}

/// Characteristic polynomial t³ − t − 1: no roots on the unit circle.
fn d3_rows() -> Vec<Vec<i64>> {
    vec![vec![0, 0, 1], vec![1, 0, 1], vec![0, 1, 0]]
}

fn random_element(rng: &mut ChaCha8Rng, d: usize) -> GroupElement {
    let x: Vec<i64> = (0..d).map(|_| rng.gen_range(-40..=40)).collect();
    GroupElement::from_i64(&x, rng.gen_range(-4..=4))
}

fn check_axioms(rows: Vec<Vec<i64>>, seed: u64) {
    let oracle = Oracle::new(&rows);
    let ctx = GroupContext::new(ToralMatrix::new(IntMatrix::from_rows(&rows).unwrap()).unwrap());
    let d = rows.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = ctx.identity();
    for _ in 0..10_000 {
        let (g, h, w) = (random_element(&mut rng, d), random_element(&mut rng, d), random_element(&mut rng, d));
        let gh = ctx.multiply(&g, &h).unwrap();
        assert_eq!(oracle.embed(&gh), oracle.mul(&oracle.embed(&g), &oracle.embed(&h)));
        assert_eq!(ctx.multiply(&gh, &w).unwrap(), ctx.multiply(&g, &ctx.multiply(&h, &w).unwrap()).unwrap());
        let gi = ctx.inverse(&g).unwrap();
        assert_eq!(ctx.multiply(&g, &gi).unwrap(), e);
        assert_eq!(ctx.multiply(&gi, &g).unwrap(), e);
        assert_eq!(ctx.multiply(&e, &g).unwrap(), g);
        assert_eq!(ctx.multiply(&g, &e).unwrap(), g);
        // the normal form is the only preimage of its affine matrix
        assert_eq!(oracle.unembed(&oracle.embed(&gh), 10), gh);
    }
}

#[test]
fn cat_map_axioms_against_affine_matrices() {
    check_axioms(cat_rows(), 11);
}

#[test]
fn three_dimensional_axioms_against_affine_matrices() {
    check_axioms(d3_rows(), 12);
}

#[test]
fn word_lengths_match_independent_bfs() {
    for rows in [cat_rows(), d3_rows()] {
        let oracle = Oracle::new(&rows);
        let ctx = GroupContext::new(ToralMatrix::new(IntMatrix::from_rows(&rows).unwrap()).unwrap());
        let gens = GeneratingSet::standard(rows.len());
        let radius = if rows.len() == 2 { 7 } else { 5 };
        let table = word_ball(&ctx, &gens, radius, usize::MAX).unwrap();
        let naive = oracle.ball(radius);
        assert_eq!(table.len(), naive.len());
        for (g, wl) in table.entries() {
            assert_eq!(naive[&oracle.embed(&g)], wl, "{g}");
        }
        let start: ElementSet = [ctx.identity()].into_iter().collect();
        let u = neighborhood(&ctx, &gens, &start, radius, usize::MAX).unwrap();
        let embedded: HashSet<Affine> = u.iter().map(|g| oracle.embed(g)).collect();
        assert_eq!(embedded, naive.keys().cloned().collect());
    }
}

/// `φ` on affine matrices from its values on generators, `φ(x·z^k) = φ(x)·φ(z)^k`.
fn naive_phi(oracle: &Oracle, b: &[i64], v: &[i64], e: i64, m: &Affine, k: i64) -> Affine {
    let d = oracle.d;
    let n = d + 1;
    let x: Vec<i64> = (0..d).map(|i| i64::try_from(m[i * n + d]).unwrap()).collect();
    let bx: Vec<i64> = (0..d).map(|i| (0..d).map(|j| b[i * d + j] * x[j]).sum()).collect();
    let z_img = oracle.mul(&oracle.translation(v), &oracle.power(&oracle.a, &oracle.a_inv, e));
    let z_img_inv = oracle.inverse(&z_img, e);
    oracle.mul(&oracle.translation(&bx), &oracle.power(&z_img, &z_img_inv, k))
}

fn naive_u(oracle: &Oracle, set: &HashSet<Affine>, n: u32) -> HashSet<Affine> {
    let gens = oracle.generators();
    let mut out = set.clone();
    for _ in 0..n {
        let next: Vec<Affine> = out.iter().flat_map(|g| gens.iter().map(|s| oracle.mul(g, s))).collect();
        out.extend(next);
    }
    out
}

#[test]
fn iteration_matches_naive_recomputation() {
    let oracle = Oracle::new(&cat_rows());
    let ctx = GroupContext::new(ToralMatrix::cat_map());
    let gens = GeneratingSet::standard(2);
    let b = [2i64, 1, 1, 1];
    let cases: [(&[i64], i64, u32); 3] = [(&[0, 0], 1, 1), (&[1, -1], 1, 1), (&[0, 2], -1, 2)];
    for (v, e, n) in cases {
        let phi = if e == 1 {
            GroupAutomorphism::new(IntMatrix::from_i64(2, &b).unwrap(), int_vector(v), 1).unwrap()
        } else {
            // B A B^{-1} = A^{-1}, so this B pairs with e = -1
            GroupAutomorphism::new(IntMatrix::from_i64(2, &[0, 1, -1, 0]).unwrap(), int_vector(v), -1).unwrap()
        };
        let bm = phi.b().to_i64().unwrap();
        let start = [GroupElement::identity(2), GroupElement::z_power(2, 1), GroupElement::from_i64(&[1, 0], 0)];
        let mut lib: ElementSet = start.iter().cloned().collect();
        let mut naive: HashSet<Affine> = start.iter().map(|g| oracle.embed(g)).collect();
        for _ in 0..3 {
            lib = iterate_once(&ctx, &gens, &phi, n, &lib, usize::MAX).unwrap();
            let imaged: HashSet<Affine> = naive
                .iter()
                .map(|m| {
                    let k = oracle.unembed(m, 40).k;
                    naive_phi(&oracle, &bm, v, e, m, k)
                })
                .collect();
            naive = naive_u(&oracle, &imaged, n);
            let embedded: HashSet<Affine> = lib.iter().map(|g| oracle.embed(g)).collect();
            assert_eq!(embedded, naive);
        }
    }
}

#[test]
fn small_diameters_match_naive_pairs() {
    let oracle = Oracle::new(&cat_rows());
    let ctx = GroupContext::new(ToralMatrix::cat_map());
    let gens = GeneratingSet::standard(2);
    let table = word_ball(&ctx, &gens, 9, usize::MAX).unwrap();
    let naive_ball = oracle.ball(9);
    let phi = GroupAutomorphism::new(ctx.toral().matrix().clone(), int_vector(&[0, 0]), 1).unwrap();
    let mut set: ElementSet = [ctx.identity(), ctx.z(), GroupElement::from_i64(&[1, 0], 0)].into_iter().collect();
    for _ in 0..3 {
        let elems = set.sorted();
        let mut naive = Some(0u32);
        'outer: for g in &elems {
            let gi = oracle.inverse(&oracle.embed(g), g.k);
            for h in &elems {
                match naive_ball.get(&oracle.mul(&gi, &oracle.embed(h))) {
                    Some(&l) => naive = naive.map(|m| m.max(l)),
                    None => {
                        naive = None;
                        break 'outer;
                    }
                }
            }
        }
        let expected = naive.map_or(Diameter::AtLeast(10), |m| Diameter::Exact(u64::from(m)));
        assert_eq!(set_diameter(&ctx, &table, &set).unwrap(), expected);
        set = iterate_once(&ctx, &gens, &phi, 1, &set, usize::MAX).unwrap();
    }
}
