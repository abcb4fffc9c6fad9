//! Ask the planning agent for a deployment and turn it into commands.
//!
//! With AGENT_LLM_BASE_URL (and optionally AGENT_LLM_API_KEY, AGENT_LLM_MODEL)
//! set, an OpenAI-compatible chat endpoint is consulted; otherwise the
//! rule-based planner answers.
//!
//! cargo run --example agent_plan

use semrobo::agent::{apply_commands, brief, emit_commands, plan_llm, HttpChatBackend, Plan};
use semrobo::world::ScenarioConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ScenarioConfig { n_devices: 30, ..Default::default() };
    let b = brief(&config);
    println!("{}\n", b.render_prompt());

    let plan = match HttpChatBackend::from_env() {
        Some(backend) => plan_llm(&b, &backend),
        None => Plan::rule_based(&b),
    };
    println!("source: {:?} after {} call(s)", plan.source, plan.attempts);
    if let Some(why) = &plan.fallback_reason {
        println!("fell back: {why}");
    }
    println!("rationale: {}", plan.recommendation.rationale);

    let commands = emit_commands(&plan.recommendation, &b);
    for c in &commands.task_commands {
        println!("task: {c}");
    }
    for c in &commands.connectivity_commands {
        println!("link: {c}");
    }
    let applied = apply_commands(&config, &commands)?;
    println!(
        "\nrobots {} -> {}, strategy {:?}, branch {:?}",
        config.n_robots, applied.n_robots, applied.strategy, applied.branch
    );
    Ok(())
}
