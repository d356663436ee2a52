use ftm_core::engine::*;
use ftm_core::gmachine::GMachine;
use ftm_core::history::{apply_transition, Action};
use ftm_core::params::ParamSet;
use ftm_core::rules;
use ftm_core::tape::FieldValue;

fn main() {
    let mp = ftm_core::program::build(ParamSet::toy(), GMachine::incrementer());
    let env = mp.env(1);
    println!("rlen {} va_base {} cells {}..{}", mp.r_tokens.len(), mp.r_tokens.len()+2, (mp.r_tokens.len()+2)/512, (mp.r_tokens.len()+2+67)/512);
    let mut cfg = boot_config_level2(&mp, 8).unwrap();
    cfg.pos = cfg.cur.0;
    for t in 1..=700u64 {
        let (cx, cy) = cfg.cur;
        let x = cfg.tape.get_cell(cx).unwrap().clone();
        let y = cfg.tape.get_cell(cy).unwrap().clone();
        let alpha = cy - cx == cfg.tape.b;
        let out = rules::eval(&mp.prog, &env, (&x, &y), alpha).unwrap();
        if t > 560 {
            let ctlx = matches!(x.work.regs[5], FieldValue::Ctl(_));
            let ctly = matches!(y.work.regs[5], FieldValue::Ctl(_));
            let phase = match (&x.work.regs[5], &y.work.regs[5]) {
                (FieldValue::Ctl(c), _) | (_, FieldValue::Ctl(c)) => format!("{:?} cur={} re={} z={}", c.phase, c.cursor, c.r_end, c.zeros),
                _ => "-".into(),
            };
            println!("t={t} ({cx},{cy}) {} d={} ctl(x{},y{}) {}", out.fired, out.dir, ctlx as u8, ctly as u8, phase);
            if t > 600 { break; }
        }
        let action = Action { a: out.a, b: out.b, dir: out.dir };
        apply_transition(&mut cfg, &action, false).unwrap();
    }
}
