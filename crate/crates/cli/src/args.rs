//! Parsers for the compound flag values.

use regmdp::Identity;

/// `A..B` (inclusive), `A,B,C`, or a single seed.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let num = |s: &str| {
        s.trim()
            .parse::<u64>()
            .map_err(|_| format!("invalid seed `{}`", s.trim()))
    };
    let mut seeds = if let Some((lo, hi)) = text.split_once("..") {
        let (lo, hi) = (num(lo)?, num(hi)?);
        if lo > hi {
            return Err(format!("empty seed range `{text}`"));
        }
        (lo..=hi).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    seeds.sort_unstable();
    seeds.dedup();
    Ok(seeds)
}

/// `NxM` with both parts positive.
pub fn parse_sizes(text: &str) -> Result<(usize, usize), String> {
    let bad = || format!("invalid sizes `{text}` (expected NxM, e.g. 5x3)");
    let (n, m) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    let m: usize = m.trim().parse().map_err(|_| bad())?;
    if n == 0 || m == 0 {
        return Err(bad());
    }
    Ok((n, m))
}

/// Comma-separated identity names. `all` selects every identity; the caller
/// drops the KL form when the regularizer is not entropic.
pub fn parse_identities(text: &str) -> Result<(Vec<Identity>, bool), String> {
    let mut out = Vec::new();
    let mut all = false;
    for token in text.split(',') {
        let id = match token.trim() {
            "all" => {
                all = true;
                out.extend(Identity::ALL);
                continue;
            }
            "pdl" => Identity::Pdl,
            "basic" | "basic_lemma" => Identity::BasicLemma,
            "normalcone" | "normal_cone" => Identity::NormalCone,
            "relint" | "relint_lemma" => Identity::RelintLemma,
            "main" | "main_theorem" => Identity::MainTheorem,
            "kl" | "kl_corollary" => Identity::KlCorollary,
            other => return Err(format!("unknown identity `{other}`")),
        };
        out.push(id);
    }
    out.sort_unstable();
    out.dedup();
    Ok((out, all))
}
