use ftm_core::gmachine::GMachine;
use ftm_core::params::ParamSet;

fn main() {
    let mp = ftm_core::program::build(ParamSet::toy(), GMachine::incrementer());
    for (i, r) in mp.prog.rules.iter().enumerate() {
        if r.name.contains("bm-c0-r-end") || r.name.contains("comply-wr-c1-j3-l-end")
            || r.name.contains("bm-c0-r-adv") || r.name.contains("comply-wr-c1-j3-l-adv") {
            println!("{i:4} {}", r.name);
        }
    }
}
