use ftm_core::gmachine::GMachine;
use ftm_core::params::ParamSet;
use ftm_core::rules::{to_tokens, RuleProgram};

fn main() {
    let mp = ftm_core::program::build(ParamSet::toy(), GMachine::incrementer());
    let mut sizes: Vec<(usize, String)> = mp
        .prog
        .rules
        .iter()
        .map(|r| {
            let one = RuleProgram { rules: vec![r.clone()] };
            (to_tokens(&one).len() - 1, r.name.clone())
        })
        .collect();
    let total: usize = sizes.iter().map(|s| s.0).sum();
    println!("rules {} raw tokens {} padded {}", sizes.len(), total, mp.r_tokens.len());
    sizes.sort();
    sizes.reverse();
    for (sz, name) in sizes.iter().take(20) {
        println!("{sz:5} {name}");
    }
    // Aggregate by prefix family
    use std::collections::BTreeMap;
    let mut agg: BTreeMap<String, usize> = BTreeMap::new();
    for (sz, name) in &sizes {
        let fam = name.split('-').next().unwrap_or("").to_string();
        *agg.entry(fam).or_insert(0) += sz;
    }
    let mut v: Vec<_> = agg.into_iter().collect();
    v.sort_by_key(|(_, s)| std::cmp::Reverse(*s));
    for (fam, sz) in v.iter().take(12) {
        println!("family {fam:12} {sz}");
    }
}
