//! Per-node agents exchanging max-Q summaries reproduce the centralized
//! trainer bit for bit; the stale-cache mode shows what delayed summaries
//! cost.

use qspt::dist::trace_csv;
use qspt::{generate_graph, train, DistributedRuntime, GridParams, Hyperparams, Location, SummaryMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> qspt::Result<()> {
    let g = generate_graph(GridParams::new(30, 8.0)?, 40, Location::new(15, 15), 4)?;
    let h = Hyperparams::standard(20_000);
    let graphs = std::slice::from_ref(&g);
    let central = train(graphs, &h, &mut ChaCha8Rng::seed_from_u64(9))?;

    let run = DistributedRuntime::new(h)?
        .trace(true)
        .run(graphs, &mut ChaCha8Rng::seed_from_u64(9))?;
    println!(
        "pull-fresh: identical={} messages={} updates={} payload={}B",
        run.qtable.bit_eq(&central),
        run.stats.messages,
        run.stats.updates,
        run.stats.max_payload_bytes
    );
    print!("{}", trace_csv(&run.trace[..5.min(run.trace.len())]));

    // short budget, before both runs settle on the same fixed point
    let short = Hyperparams::standard(200);
    let early = train(graphs, &short, &mut ChaCha8Rng::seed_from_u64(9))?;
    for delay in [0, 10, 1_000] {
        let stale = DistributedRuntime::new(short)?
            .mode(SummaryMode::StaleCache { delay })
            .run(graphs, &mut ChaCha8Rng::seed_from_u64(9))?;
        println!(
            "stale cache, delay {delay:>5}, 200 episodes: max |Q - Q_central| = {:.3e}",
            stale.qtable.max_abs_diff(&early).unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
