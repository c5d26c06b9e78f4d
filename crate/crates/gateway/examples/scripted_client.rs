//! Serves a scenario on `/teleop` and drives it from a scripted client over
//! the websocket, stepping in lockstep with the server.
//!
//! `cargo run -p teleop-gateway --example scripted_client -- [scenario.json]`

use std::net::SocketAddr;
use std::path::PathBuf;
use std::thread;

use teleop_ass::operator::SimulatedOperator;
use teleop_ass::scenario::{compare_runs, load_scenario, run};
use teleop_gateway::client::TeleopClient;
use teleop_gateway::{ENDPOINT, Pacing, bind, serve};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios/overtake.json"));
    let config = load_scenario(&path)?;

    let listener = bind(SocketAddr::from(([127, 0, 0, 1], 0)))?;
    let url = format!("ws://{}{ENDPOINT}", listener.local_addr()?);
    let server = {
        let config = config.clone();
        thread::spawn(move || serve(config, listener, Pacing::Lockstep))
    };

    let mut client = TeleopClient::connect(&url, "scripted")?;
    let mut operator = SimulatedOperator::new(config.operator.clone(), config.vehicle);
    let mut frames = 0;
    while let Some(frame) = client.next_frame()? {
        if frame.step % 40 == 0 {
            println!(
                "t={:5.2}  ghost ({:6.2}, {:5.2})  v {:4.2}  slack {}",
                frame.t, frame.ghost.x, frame.ghost.y, frame.telemetry.v, frame.flags.slack_active
            );
        }
        client.send(frame.t, operator.reference(&frame.ghost, frame.t))?;
        frames += 1;
    }
    let outcome = server.join().expect("server thread panicked")?;

    let (_, offline) = run(&config)?;
    let gap = compare_runs(&outcome.records, &offline);
    println!("{frames} frames, {:?}", outcome.report);
    println!("largest gap to the offline run: {:.1e} m", gap.max);
    Ok(())
}
