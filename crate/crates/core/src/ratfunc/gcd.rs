//! Multivariate polynomial GCD over an exact coefficient field.
//!
//! Recursive content / primitive-part scheme: pick a main variable, split
//! off the content (a GCD in one fewer variable), and run a primitive
//! pseudo-remainder sequence on the primitive parts. Before the sequence
//! starts, a single modular image decides the common case of coprime
//! inputs; that test can only report "coprime" when it is certain.

use super::monomial::Monomial;
use super::polynomial::Polynomial;
use crate::scalar::{inv_mod, mul_mod, sub_mod, Coefficient};

type Univariate<C> = Vec<Polynomial<C>>;

/// GCD of `a` and `b`, normalised by [`Polynomial::primitive`].
/// `gcd(0, 0) = 0`.
pub fn gcd<C: Coefficient>(a: &Polynomial<C>, b: &Polynomial<C>) -> Polynomial<C> {
    if a.is_zero() {
        return b.primitive();
    }
    if b.is_zero() {
        return a.primitive();
    }
    if a.is_constant() || b.is_constant() {
        return Polynomial::one();
    }
    let ma = a.monomial_content();
    let mb = b.monomial_content();
    let shared = ma.gcd(&mb);
    let a = strip_monomial(a, &ma);
    let b = strip_monomial(b, &mb);
    let g = gcd_stripped(&a, &b);
    g.mul_term(&shared, &C::one()).primitive()
}

fn strip_monomial<C: Coefficient>(p: &Polynomial<C>, m: &Monomial) -> Polynomial<C> {
    if m.is_one() {
        return p.clone();
    }
    p.div_exact(&Polynomial::monomial(m.clone(), C::one()))
        .expect("monomial content divides")
}

fn gcd_stripped<C: Coefficient>(a: &Polynomial<C>, b: &Polynomial<C>) -> Polynomial<C> {
    if a.is_constant() || b.is_constant() {
        return Polynomial::one();
    }
    let pa = a.primitive();
    let pb = b.primitive();
    if pa == pb {
        return pa;
    }
    for v in pa.vars() {
        if !pb.uses_var(v) {
            return gcd(&content(&pa.to_univariate(v)), &pb);
        }
    }
    for v in pb.vars() {
        if !pa.uses_var(v) {
            return gcd(&pa, &content(&pb.to_univariate(v)));
        }
    }
    let var = pa
        .vars()
        .into_iter()
        .min_by_key(|&v| (pa.degree_in(v) + pb.degree_in(v), v))
        .expect("non-constant polynomial has a variable");
    let ua = pa.to_univariate(var);
    let ub = pb.to_univariate(var);
    let ca = content(&ua);
    let cb = content(&ub);
    let c = gcd(&ca, &cb);
    let fa = divide_coefficients(&ua, &ca);
    let fb = divide_coefficients(&ub, &cb);
    let g = primitive_prs(fa, fb);
    Polynomial::from_univariate(var, &g).mul(&c)
}

/// GCD of all coefficients.
fn content<C: Coefficient>(coeffs: &[Polynomial<C>]) -> Polynomial<C> {
    let mut acc = Polynomial::zero();
    for c in coeffs.iter().filter(|c| !c.is_zero()) {
        acc = if acc.is_zero() { c.primitive() } else { gcd(&acc, c) };
        if acc.is_constant() {
            return Polynomial::one();
        }
    }
    acc
}

fn divide_coefficients<C: Coefficient>(u: &Univariate<C>, by: &Polynomial<C>) -> Univariate<C> {
    if by.is_one() {
        return u.clone();
    }
    u.iter()
        .map(|c| c.div_exact(by).expect("content divides every coefficient"))
        .collect()
}

fn degree<C>(u: &Univariate<C>) -> usize {
    u.len().saturating_sub(1)
}

fn trim<C: Coefficient>(u: &mut Univariate<C>) {
    while u.last().is_some_and(|c| c.is_zero()) {
        u.pop();
    }
}

/// Primitive part: coefficient content removed, then scaled to coprime
/// integer coefficients.
fn primitive_part<C: Coefficient>(mut u: Univariate<C>) -> Univariate<C> {
    trim(&mut u);
    let c = content(&u);
    let mut u = divide_coefficients(&u, &c);
    let mut scale = C::primitive_scale(u.iter().flat_map(|p| p.coefficients()));
    if let Some(lc) = u.last().and_then(|p| p.leading_coefficient()) {
        if lc.is_negative() {
            scale = scale.neg_ref();
        }
    }
    for p in u.iter_mut() {
        *p = p.scale(&scale);
    }
    u
}

/// Pseudo-remainder of `f` by `g` up to a factor free of the main variable.
fn pseudo_remainder<C: Coefficient>(f: &Univariate<C>, g: &Univariate<C>) -> Univariate<C> {
    let dg = degree(g);
    let lc = &g[dg];
    let mut r = f.clone();
    trim(&mut r);
    if let Some(lc_value) = lc.constant_value() {
        let inv = C::one().div_ref(&lc_value).expect("leading coefficient is nonzero");
        while !r.is_empty() && degree(&r) >= dg {
            let dr = degree(&r);
            let factor = r[dr].scale(&inv);
            for (i, gc) in g.iter().enumerate() {
                let k = i + dr - dg;
                r[k] = r[k].sub(&gc.mul(&factor));
            }
            trim(&mut r);
        }
        return r;
    }
    while !r.is_empty() && degree(&r) >= dg {
        let dr = degree(&r);
        let lr = r[dr].clone();
        for c in r.iter_mut() {
            *c = c.mul(lc);
        }
        for (i, gc) in g.iter().enumerate() {
            let k = i + dr - dg;
            r[k] = r[k].sub(&gc.mul(&lr));
        }
        trim(&mut r);
    }
    r
}

fn primitive_prs<C: Coefficient>(a: Univariate<C>, b: Univariate<C>) -> Univariate<C> {
    let (mut f, mut g) = if degree(&a) >= degree(&b) { (a, b) } else { (b, a) };
    if degree(&g) == 0 {
        return vec![Polynomial::one()];
    }
    if certainly_coprime(&f, &g) {
        return vec![Polynomial::one()];
    }
    loop {
        let r = pseudo_remainder(&f, &g);
        if r.is_empty() {
            return primitive_part(g);
        }
        if degree(&r) == 0 {
            return vec![Polynomial::one()];
        }
        f = g;
        g = primitive_part(r);
    }
}

/// Sample points for the modular coprimality test, one per parameter.
fn sample_point(width: usize) -> Vec<u64> {
    (0..width)
        .map(|i| 1_000_003u64.wrapping_mul(i as u64 + 7).wrapping_add(918_273_645) % crate::scalar::MODULUS)
        .collect()
}

/// True only if `f` and `g` (primitive in the main variable) provably share
/// no factor of positive degree: their images at a point where neither
/// leading coefficient vanishes are coprime modulo a prime.
fn certainly_coprime<C: Coefficient>(f: &Univariate<C>, g: &Univariate<C>) -> bool {
    let width = f.iter().chain(g.iter()).map(|c| c.width()).max().unwrap_or(0);
    let point = sample_point(width);
    let image = |u: &Univariate<C>| -> Option<Vec<u64>> {
        u.iter().map(|c| c.eval_residue(&point)).collect()
    };
    let (Some(fi), Some(gi)) = (image(f), image(g)) else {
        return false;
    };
    if fi.last() == Some(&0) || gi.last() == Some(&0) {
        return false;
    }
    residue_gcd_degree(fi, gi) == 0
}

fn residue_gcd_degree(mut a: Vec<u64>, mut b: Vec<u64>) -> usize {
    let strip = |v: &mut Vec<u64>| {
        while v.last() == Some(&0) {
            v.pop();
        }
    };
    strip(&mut a);
    strip(&mut b);
    if a.len() < b.len() {
        std::mem::swap(&mut a, &mut b);
    }
    while !b.is_empty() {
        // a <- a mod b
        let db = b.len() - 1;
        let inv = inv_mod(b[db]);
        while a.len() >= b.len() {
            let da = a.len() - 1;
            let factor = mul_mod(a[da], inv);
            for (i, &bc) in b.iter().enumerate() {
                let k = i + da - db;
                a[k] = sub_mod(a[k], mul_mod(bc, factor));
            }
            strip(&mut a);
            if a.is_empty() {
                break;
            }
        }
        std::mem::swap(&mut a, &mut b);
    }
    a.len().saturating_sub(1)
}
