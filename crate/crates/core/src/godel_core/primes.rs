use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use super::GodelError;

/// The first `m` primes, in increasing order. Candidate `j` (0-based) is
/// identified with `primes[j]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PrimeBase {
    primes: Vec<u64>,
}

impl PrimeBase {
    /// Returns the first `m` primes.
    pub fn first(m: usize) -> Result<Self, GodelError> {
        if m == 0 {
            return Err(GodelError::EmptyBase);
        }
        let mut primes = Vec::with_capacity(m);
        let mut candidate = 2u64;
        while primes.len() < m {
            if primes
                .iter()
                .take_while(|&&p| p * p <= candidate)
                .all(|&p| !candidate.is_multiple_of(p))
            {
                primes.push(candidate);
            }
            candidate += if candidate == 2 { 1 } else { 2 };
        }
        Ok(Self { primes })
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// Number of candidates.
    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    pub fn prime(&self, candidate: usize) -> Option<u64> {
        self.primes.get(candidate).copied()
    }

    pub fn index_of(&self, prime: u64) -> Option<usize> {
        self.primes.binary_search(&prime).ok()
    }

    /// Product of every base prime, i.e. the encoding of a ballot approving everyone.
    pub fn primorial(&self) -> BigUint {
        self.primes.iter().map(|&p| BigUint::from(p)).product()
    }
}

/// Shorthand for [`PrimeBase::first`].
pub fn first_primes(m: usize) -> Result<PrimeBase, GodelError> {
    PrimeBase::first(m)
}

const SMALL_PRIMES: [u32; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

// Miller-Rabin witnesses. The first 13 primes make the test exact below 3.3e24;
// above that it is a fixed-base probable-prime test, reproducible run to run.
const MR_WITNESSES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Deterministic Miller-Rabin over a fixed witness set.
pub fn is_probable_prime(n: &BigUint) -> bool {
    if n < &BigUint::from(2u32) {
        return false;
    }
    for &p in &SMALL_PRIMES {
        let p = BigUint::from(p);
        if n == &p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    if let Some(small) = n.to_u64() {
        if small < 97 * 97 {
            return true;
        }
    }

    let one = BigUint::one();
    let n_minus_one = n - &one;
    let twos = n_minus_one.trailing_zeros().unwrap_or(0);
    let odd = &n_minus_one >> twos;

    'witness: for &a in &MR_WITNESSES {
        let a = BigUint::from(a);
        if &a >= n {
            continue;
        }
        let mut x = a.modpow(&odd, n);
        if x == one || x == n_minus_one {
            continue;
        }
        for _ in 1..twos {
            x = (&x * &x) % n;
            if x == n_minus_one {
                continue 'witness;
            }
            if x == one {
                return false;
            }
        }
        return false;
    }
    true
}

/// Least prime strictly greater than `bound`.
pub fn next_prime_above(bound: &BigUint) -> BigUint {
    let two = BigUint::from(2u32);
    if bound < &two {
        return two;
    }
    let mut candidate = bound + 1u32;
    if candidate.is_even() {
        if candidate == two {
            return candidate;
        }
        candidate += 1u32;
    }
    // Residues of the candidate modulo the small primes let most composites be
    // skipped without touching big-integer division.
    let sieve: Vec<u32> = SMALL_PRIMES[1..].to_vec();
    let mut residues: Vec<u32> = sieve
        .iter()
        .map(|&p| (&candidate % p).to_u32().expect("residue below a u32 modulus"))
        .collect();
    loop {
        let small_factor = sieve
            .iter()
            .zip(&residues)
            .any(|(&p, &r)| r == 0 && candidate != BigUint::from(p));
        if !small_factor && is_probable_prime(&candidate) {
            return candidate;
        }
        candidate += 2u32;
        for (r, &p) in residues.iter_mut().zip(&sieve) {
            *r = (*r + 2) % p;
        }
    }
}
