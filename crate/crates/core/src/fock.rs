//! Antisymmetric N-particle states on a d-dimensional single-particle space.
//!
//! A basis state is a strictly increasing tuple of occupied single-particle
//! indices. States are enumerated in lexicographic order, and a
//! [`WaveFunction`] stores one second-quantized coefficient `C_X` per ordered
//! tuple `X`. The first-quantized amplitude at ordered arguments is
//! `C_X / sqrt(N!)`, extended to all arguments by antisymmetry.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};

/// Binomial coefficient, saturating at `usize::MAX`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

/// Upper limit on the number of basis states we are willing to enumerate.
pub const MAX_BASIS_LEN: usize = 20_000_000;

/// Lexicographically ordered list of all increasing `n`-tuples over `[0, d)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockBasis {
    d: usize,
    n: usize,
    // flat storage, `n` entries per state
    states: Vec<usize>,
}

impl FockBasis {
    /// Enumerate the basis; fails unless `1 <= n <= d`.
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if n < 1 || n > d {
            return Err(Error::InvalidDimension(format!(
                "need 1 <= n <= d, got d={d}, n={n}"
            )));
        }
        let len = binomial(d, n);
        if len > MAX_BASIS_LEN {
            return Err(Error::InvalidDimension(format!(
                "C({d},{n}) = {len} basis states is too many for dense treatment"
            )));
        }
        let mut states = Vec::with_capacity(len * n);
        let mut cur: Vec<usize> = (0..n).collect();
        loop {
            states.extend_from_slice(&cur);
            // advance to the next combination in lexicographic order
            let mut i = n;
            loop {
                if i == 0 {
                    debug_assert_eq!(states.len(), len * n);
                    return Ok(Self { d, n, states });
                }
                i -= 1;
                if cur[i] < d - n + i {
                    cur[i] += 1;
                    for j in i + 1..n {
                        cur[j] = cur[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    pub fn shared(d: usize, n: usize) -> Result<Arc<Self>> {
        Self::new(d, n).map(Arc::new)
    }

    /// Single-particle dimension `d`.
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_particles(&self) -> usize {
        self.n
    }

    /// Number of basis states, `C(d, n)`.
    pub fn len(&self) -> usize {
        self.states.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// The `k`-th tuple. Panics when `k` is out of range.
    pub fn state(&self, k: usize) -> &[usize] {
        &self.states[k * self.n..(k + 1) * self.n]
    }

    pub fn unrank(&self, k: usize) -> Result<&[usize]> {
        if k >= self.len() {
            return Err(Error::InvalidArgument {
                value: k,
                dim: self.len(),
            });
        }
        Ok(self.state(k))
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[usize]> + '_ {
        self.states.chunks_exact(self.n)
    }

    /// Lexicographic index of an increasing tuple.
    pub fn rank(&self, tuple: &[usize]) -> Result<usize> {
        self.check_tuple(tuple)?;
        Ok(self.rank_unchecked(tuple))
    }

    pub(crate) fn rank_unchecked(&self, tuple: &[usize]) -> usize {
        let (d, n) = (self.d, self.n);
        let mut index = 0;
        let mut lo = 0;
        for (i, &x) in tuple.iter().enumerate() {
            // every tuple that agrees on the prefix and has a smaller entry here
            for v in lo..x {
                index += binomial(d - 1 - v, n - 1 - i);
            }
            lo = x + 1;
        }
        index
    }

    fn check_tuple(&self, tuple: &[usize]) -> Result<()> {
        let bad = |reason: &str| Error::InvalidTuple {
            tuple: tuple.to_vec(),
            reason: reason.to_string(),
        };
        if tuple.len() != self.n {
            return Err(bad(&format!("expected {} entries", self.n)));
        }
        if tuple.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("entries must be strictly increasing"));
        }
        if tuple.last().is_some_and(|&x| x >= self.d) {
            return Err(bad(&format!("entries must lie in [0, {})", self.d)));
        }
        Ok(())
    }
}

/// Complex amplitude vector over a [`FockBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    basis: Arc<FockBasis>,
    amplitudes: Vec<C64>,
}

impl WaveFunction {
    pub fn new(basis: Arc<FockBasis>, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != basis.len() {
            return Err(Error::mismatch(
                format!("{} amplitudes", basis.len()),
                amplitudes.len(),
            ));
        }
        Ok(Self { basis, amplitudes })
    }

    pub fn zeros(basis: Arc<FockBasis>) -> Self {
        let amplitudes = vec![ZERO; basis.len()];
        Self { basis, amplitudes }
    }

    /// The single basis state `tuple` with amplitude one.
    pub fn basis_state(basis: Arc<FockBasis>, tuple: &[usize]) -> Result<Self> {
        let k = basis.rank(tuple)?;
        let mut f = Self::zeros(basis);
        f.amplitudes[k] = C64::new(1.0, 0.0);
        Ok(f)
    }

    /// Normalized state with i.i.d. complex Gaussian amplitudes.
    pub fn random(basis: Arc<FockBasis>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amplitudes = (0..basis.len())
            .map(|_| {
                C64::new(
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                )
            })
            .collect();
        let mut f = Self { basis, amplitudes };
        f.normalize();
        f
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn n_particles(&self) -> usize {
        self.basis.n_particles()
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::vec_norm(&self.amplitudes)
    }

    /// Scale to unit norm. A zero vector is left untouched.
    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for z in &mut self.amplitudes {
                *z /= n;
            }
        }
    }

    /// `<self|other>`; both states must live on the same basis.
    pub fn inner(&self, other: &WaveFunction) -> Result<C64> {
        self.check_same_basis(other)?;
        Ok(crate::linalg::vdot(&self.amplitudes, &other.amplitudes))
    }

    pub(crate) fn check_same_basis(&self, other: &WaveFunction) -> Result<()> {
        if self.basis.dim() != other.basis.dim()
            || self.basis.n_particles() != other.basis.n_particles()
        {
            return Err(Error::mismatch(
                format!("basis d={} n={}", self.dim(), self.n_particles()),
                format!("basis d={} n={}", other.dim(), other.n_particles()),
            ));
        }
        Ok(())
    }

    /// First-quantized amplitude `f(x_1, ..., x_N)` at arbitrary arguments.
    pub fn pointwise_value(&self, args: &[usize]) -> Result<C64> {
        let n = self.n_particles();
        if args.len() != n {
            return Err(Error::InvalidTuple {
                tuple: args.to_vec(),
                reason: format!("expected {n} arguments"),
            });
        }
        if let Some(&x) = args.iter().find(|&&x| x >= self.dim()) {
            return Err(Error::InvalidArgument {
                value: x,
                dim: self.dim(),
            });
        }
        let mut sorted = args.to_vec();
        // insertion sort, counting transpositions for the permutation sign
        let mut odd = false;
        for i in 1..sorted.len() {
            let mut j = i;
            while j > 0 && sorted[j - 1] > sorted[j] {
                sorted.swap(j - 1, j);
                odd = !odd;
                j -= 1;
            }
        }
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Ok(ZERO);
        }
        let c = self.amplitudes[self.basis.rank_unchecked(&sorted)];
        let value = c / factorial(n).sqrt();
        Ok(if odd { -value } else { value })
    }

    /// Text dump: `# d=<d> n=<n> count=<D>` then `index x1,...,xN re im` per state.
    pub fn to_dump_string(&self) -> String {
        let mut out = String::with_capacity(self.amplitudes.len() * 64);
        let _ = writeln!(
            out,
            "# d={} n={} count={}",
            self.dim(),
            self.n_particles(),
            self.basis.len()
        );
        for (k, (tuple, c)) in self.basis.iter().zip(&self.amplitudes).enumerate() {
            let coords: Vec<String> = tuple.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(out, "{k} {} {:.16e} {:.16e}", coords.join(","), c.re, c.im);
        }
        out
    }

    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_dump_string().as_bytes())?;
        Ok(())
    }

    pub fn read_dump<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (d, n, count) = loop {
            let Some((i, line)) = lines.next() else {
                return Err(Error::Parse {
                    line: 0,
                    msg: "empty wave-function dump".into(),
                });
            };
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            break parse_header(t, i + 1, &["d", "n", "count"]).map(|v| (v[0], v[1], v[2]))?;
        };
        let basis = FockBasis::shared(d, n)?;
        if basis.len() != count {
            return Err(Error::Parse {
                line: 1,
                msg: format!("count={count} but C({d},{n}) = {}", basis.len()),
            });
        }
        let mut amplitudes = vec![ZERO; count];
        let mut seen = vec![false; count];
        for (i, line) in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            let fields: Vec<&str> = t.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(err(format!("expected 4 fields, found {}", fields.len())));
            }
            let index: usize = fields[0].parse().map_err(|e| err(format!("index: {e}")))?;
            let tuple = fields[1]
                .split(',')
                .map(|s| s.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| err(format!("tuple: {e}")))?;
            let k = basis.rank(&tuple).map_err(|e| err(e.to_string()))?;
            if k != index {
                return Err(err(format!("tuple {tuple:?} has index {k}, not {index}")));
            }
            let re: f64 = fields[2].parse().map_err(|e| err(format!("re: {e}")))?;
            let im: f64 = fields[3].parse().map_err(|e| err(format!("im: {e}")))?;
            amplitudes[k] = C64::new(re, im);
            seen[k] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Parse {
                line: 0,
                msg: format!("basis state {missing} missing from dump"),
            });
        }
        Self::new(basis, amplitudes)
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Parse `# k1=v1 k2=v2 ...` headers, returning values in the order of `keys`.
pub(crate) fn parse_header(line: &str, line_no: usize, keys: &[&str]) -> Result<Vec<usize>> {
    let err = |msg: String| Error::Parse { line: line_no, msg };
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| err(format!("expected header starting with '#', got {line:?}")))?;
    let mut values = vec![None; keys.len()];
    for token in body.split_whitespace() {
        let (k, v) = token
            .split_once('=')
            .ok_or_else(|| err(format!("malformed header token {token:?}")))?;
        if let Some(pos) = keys.iter().position(|&key| key == k) {
            values[pos] = Some(v.parse::<usize>().map_err(|e| err(format!("{k}: {e}")))?);
        }
    }
    keys.iter()
        .zip(values)
        .map(|(k, v)| v.ok_or_else(|| err(format!("header is missing {k}="))))
        .collect()
}
