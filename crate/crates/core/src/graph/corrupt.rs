use rand::Rng as _;

use crate::error::{Error, Result};
use crate::ingest::{Triple, TripleStore};
use crate::seed::{self, Rng};

const RANDOM_ATTEMPTS: usize = 64;

/// Replaces the head or the tail (fair coin) of `(h, r, t)` with a uniform
/// entity so that the result is neither a known triple nor a self-loop. Falls back to
/// enumerating the legal replacements when random draws keep hitting
/// positives; `Ok(None)` if no replacement exists.
pub fn corrupt_one(store: &TripleStore, triple: (u32, u32, u32), rng: &mut Rng) -> Result<Option<(u32, u32, u32)>> {
    let n = store.entities().len() as u32;
    if n < 2 {
        return Err(Error::InvalidArgument("cannot corrupt triples over fewer than two entities".into()));
    }
    let (h, r, t) = triple;
    for _ in 0..RANDOM_ATTEMPTS {
        let e = rng.random_range(0..n);
        let candidate = if rng.random::<bool>() { (e, r, t) } else { (h, r, e) };
        if legal(store, candidate) {
            return Ok(Some(candidate));
        }
    }
    let legal: Vec<(u32, u32, u32)> = (0..n)
        .map(|e| (e, r, t))
        .chain((0..n).map(|e| (h, r, e)))
        .filter(|&c| legal(store, c))
        .collect();
    if legal.is_empty() {
        return Ok(None);
    }
    Ok(Some(legal[rng.random_range(0..legal.len())]))
}

fn legal(store: &TripleStore, (h, r, t): (u32, u32, u32)) -> bool {
    h != t && !store.contains_indexed(h, r, t)
}

/// One corruption per positive triple, in store order.
pub fn corrupt(store: &TripleStore, seed: u64) -> Result<Vec<Triple>> {
    if store.is_empty() {
        return Err(Error::EmptyInput("triple store is empty"));
    }
    let mut rng = seed::rng(seed);
    let mut out = Vec::with_capacity(store.len());
    for &triple in store.indexed() {
        if let Some((h, r, t)) = corrupt_one(store, triple, &mut rng)? {
            let ents = store.entities();
            out.push(Triple::new(&ents[h as usize], &store.relations()[r as usize], &ents[t as usize]));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn only_legal_outcomes() {
        // C appears only through a second relation so the entity set is {A,B,C}
        let store = TripleStore::from_triples([Triple::new("A", "p", "B"), Triple::new("C", "q", "C")]);
        let mut rng = seed::rng(0);
        let ok = [Triple::new("C", "p", "B"), Triple::new("A", "p", "C")];
        for _ in 0..200 {
            let (h, r, t) = corrupt_one(&store, (0, 0, 1), &mut rng).unwrap().unwrap();
            let e = store.entities();
            let got = Triple::new(&e[h as usize], &store.relations()[r as usize], &e[t as usize]);
            assert!(ok.contains(&got), "{got:?}");
        }
    }

    #[test]
    fn single_entity_cannot_corrupt() {
        let store = TripleStore::from_triples([Triple::new("A", "p", "A")]);
        assert!(corrupt(&store, 0).is_err());
    }

    #[test]
    fn seed_determinism() {
        let store = TripleStore::from_triples((0..20).map(|k| Triple::new(format!("E{k}"), "p", format!("E{}", (k + 1) % 20))));
        assert_eq!(corrupt(&store, 3).unwrap(), corrupt(&store, 3).unwrap());
        assert_ne!(corrupt(&store, 3).unwrap(), corrupt(&store, 4).unwrap());
    }

    proptest! {
        #[test]
        fn negatives_never_positive(edges in prop::collection::vec((0u8..6, 0u8..2, 0u8..6), 1..25), seed in any::<u64>()) {
            let store = TripleStore::from_triples(
                edges.iter().map(|&(h, r, t)| Triple::new(format!("E{h}"), format!("P{r}"), format!("E{t}"))),
            );
            prop_assume!(store.entities().len() >= 2);
            for neg in corrupt(&store, seed).unwrap() {
                prop_assert!(!store.contains(&neg));
            }
        }
    }
}
