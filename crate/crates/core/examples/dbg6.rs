use ftm_core::engine::*;
use ftm_core::gmachine::GMachine;
use ftm_core::params::ParamSet;
use ftm_core::tape::Kind;

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let max: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(50_000);
    let mp = ftm_core::program::build(ParamSet::toy(), GMachine::incrementer());
    let cfg = boot_config_level2(&mp, n).unwrap();
    let opts = RunOptions { max_steps: max, stop_on_output: true, trace_keep: Some(64), ..Default::default() };
    // Count period restarts via CLEAR coverage on the pair.
    struct Obs { periods: u64, last_clear_t: u64 }
    impl StepObserver for Obs {
        fn on_step(&mut self, t: u64, rec: &ftm_core::history::StepRec, _cfg: &ftm_core::tape::Configuration) {
            for w in &rec.writes {
                if let ftm_core::history::CellDelta::Field { field, new, .. } = w {
                    if *field == ftm_core::tape::FieldId::Age
                        && *new == ftm_core::tape::FieldValue::I(1)
                        && t > self.last_clear_t + 50
                    {
                        self.periods += 1;
                        self.last_clear_t = t;
                        if self.periods % 5 == 0 || self.periods < 8 {
                            println!("period {} clear at t={t}", self.periods);
                        }
                    }
                }
            }
        }
    }
    let mut obs = Obs { periods: 0, last_clear_t: 0 };
    match run(&mp, cfg, &opts, Some(&mut obs)) {
        Ok(res) => {
            println!(
                "stopped={:?} out={:?} steps={} alarms={} periods={}",
                res.stopped, res.output, res.steps, res.alarms, obs.periods
            );
            let (lo, hi) = res.config.tape.span().unwrap();
            println!("span [{lo},{hi})");
            let mut line = String::new();
            for p in lo..hi.min(lo + 140) {
                let ch = match res.config.tape.get_cell(p) {
                    None => '.',
                    Some(c) => match c.kind {
                        Kind::New => 'n',
                        Kind::Booting => 'B',
                        Kind::Stem => 's',
                        Kind::Member0 => 'L',
                        Kind::Member1 => 'R',
                        Kind::Bridge => 'b',
                        Kind::Outer => 'o',
                    },
                };
                line.push(ch);
            }
            println!("{line}");
        }
        Err(e) => println!("error: {e}"),
    }
}
