use heatline::thermal::*;
use heatline::config::Config;
use heatline::channel::*;
use heatline::partition::*;

fn main() {
    // symmetric heating delta
    let t = ChipTopology::default();
    let mut schedule = PowerSchedule::constant(t.n_cores, 0.0);
    schedule.set_from(3, 0.0, 18.0);
    let trace = simulate(&t, &schedule, &t.ambient_state(), 5.0, 0.001).unwrap();
    let last = trace.len() - 1;
    println!("T2={:.6} T4={:.6} delta={:.3e}",
        trace.core_temp(last, 2), trace.core_temp(last, 4),
        (trace.core_temp(last, 2) - trace.core_temp(last, 4)).abs());
    let ss = steady_state(&t, &[0.,0.,0.,18.,0.,0.,0.,0.]).unwrap();
    println!("ss: {:?}", ss.die_temps.iter().map(|x| format!("{:.4}", x)).collect::<Vec<_>>());

    // temporal sample phases
    let cfg = Config::default();
    let t_s = 0.010;
    let sched = ActivitySchedule::Temporal { slice_len: t_s, slice_bits: vec![1,0,1,1,0] };
    let plan = TemporalPlan { shared_core: 3, slice_len: t_s, frequency_ghz: 2.9, duration: sched.duration() + 1.0 };
    let tr = run_temporal(&plan, &sched, &cfg).unwrap();
    for s in tr.samples.iter().take(20) {
        let phase = (s.time / t_s).floor() as i64;
        if phase % 2 != 1 { println!("BAD sample t={:.9} phase={}", s.time, phase); }
    }
    let bad = tr.samples.iter().filter(|s| ((s.time / t_s).floor() as i64) % 2 != 1).count();
    println!("temporal: {} samples, {} bad-phase", tr.samples.len(), bad);
}
