use ftm_core::engine::*;
use ftm_core::gmachine::GMachine;
use ftm_core::params::ParamSet;

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let max: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let mp = ftm_core::program::build(ParamSet::toy(), GMachine::incrementer());
    let cfg = boot_config_level2(&mp, n).unwrap();
    let opts = RunOptions { max_steps: max, stop_on_output: true, ..Default::default() };
    struct Obs { last: (i64, i64), last_t: u64, periods: u64 }
    impl StepObserver for Obs {
        fn on_step(&mut self, t: u64, _rec: &ftm_core::history::StepRec, cfg: &ftm_core::tape::Configuration) {
            let mut max_age = 0;
            let mut base0 = i64::MAX;
            for (p, s) in cfg.tape.iter() {
                if let Some(c) = s.cell() {
                    if matches!(c.kind, ftm_core::tape::Kind::Member0) {
                        base0 = base0.min(p);
                        max_age = max_age.max(c.age);
                    } else if matches!(c.kind, ftm_core::tape::Kind::Member1) {
                        max_age = max_age.max(c.age);
                    }
                }
            }
            if (max_age, base0) != self.last {
                if max_age == 1 && self.last.0 > 1 {
                    self.periods += 1;
                    println!("== period {} begins t={t} base0={base0}", self.periods);
                } else if max_age != self.last.0 && (max_age <= 2 || max_age - self.last.0 != 0) {
                    println!("t={t} age->{max_age} base0={base0} (dt {})", t - self.last_t, );
                }
                self.last = (max_age, base0);
                self.last_t = t;
            }
        }
    }
    let mut obs = Obs { last: (-1, 0), last_t: 0, periods: 0 };
    match run(&mp, cfg, &opts, Some(&mut obs)) {
        Ok(res) => println!(
            "stopped={:?} out={:?} steps={} alarms={} wpb={}",
            res.stopped, res.output, res.steps, res.alarms, res.wpb_total
        ),
        Err(e) => println!("error: {e}"),
    }
}
