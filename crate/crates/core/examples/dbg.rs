use ftm_core::engine::*;
use ftm_core::gmachine::GMachine;
use ftm_core::history::{apply_transition, Action};
use ftm_core::params::ParamSet;
use ftm_core::rules;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let t0: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let t1: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(t0 + 60);
    let n: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(8);
    let mp = ftm_core::program::build(ParamSet::toy(), GMachine::incrementer());
    let env = mp.env(1);
    let mut cfg = boot_config_level2(&mp, n).unwrap();
    cfg.pos = cfg.cur.0;
    for t in 1..=t1 {
        let (cx, cy) = cfg.cur;
        let x = cfg.tape.get_cell(cx).unwrap().clone();
        let y = cfg.tape.get_cell(cy).unwrap().clone();
        let alpha = cy - cx == cfg.tape.b;
        let out = match rules::eval(&mp.prog, &env, (&x, &y), alpha) {
            Ok(o) => o,
            Err(e) => {
                println!("t={t} cur=({cx},{cy}) EVAL ERROR: {e}");
                return;
            }
        };
        if t >= t0 {
            println!(
                "t={t} ({cx},{cy}) {} d={} | x:[{:?} a{} ag{} m{:?} i{:?}] y:[{:?} a{} ag{} m{:?} i{:?}]",
                out.fired, out.dir,
                x.kind, x.addr, x.age, x.work.mode, x.index,
                y.kind, y.addr, y.age, y.work.mode, y.index
            );
        }
        let action = Action { a: out.a, b: out.b, dir: out.dir };
        if let Err(e) = apply_transition(&mut cfg, &action, false) {
            println!("t={t} APPLY ERROR: {e}");
            return;
        }
        if let Some(c) = cfg.tape.get_cell(0) {
            if let Some(v) = c.output {
                println!("OUTPUT {v} at t={t}");
                return;
            }
        }
    }
}
