//! Trajectory state machines: the monolithic ReAct loop and the supervised
//! architectures built on it.
//!
//! Every architecture shares one executor loop. Supervised runs add a
//! verification call after the environment step of each turn `t` with
//! `t mod T_v == 0`; an applied intervention resets the executor context and
//! re-seeds it with a resume prompt. Audit runs make the same calls but never
//! apply a verdict.

use std::collections::BTreeMap;

use crate::accounting::{self, AccountingError, RoleProfiles};
use crate::analysis::{score_answer, task_success};
use crate::backends::{BackendError, ChatBackend, ChatMessage, ChatRequest, ChatResponse};
use crate::context::{whitespace_tokens, ExecutorContext};
use crate::environments::Environment;
use crate::prompting::{
    format_executor_context, format_memory, parse_eva_verdict, parse_pevr_verdict, parse_plan,
    parse_tool_call, render, ParseError, RenderError, TemplateId,
};
use crate::trajectory::{PlanningRecord, SupervisorCallRecord, Termination, TrajectoryRecord};
use crate::types::{
    Architecture, Handoff, Plan, PlanOrigin, RunConfig, RunConfigError, TaskInstance, TokenUsage,
    TurnRecord, VerifierDecision,
};

type VerdictParser = fn(&str) -> Result<VerifierDecision, ParseError>;

/// Observation shown to the executor when its reply has no parsable call.
pub const INVALID_FORMAT_OBSERVATION: &str =
    "Invalid tool call format. Emit exactly one call as tool[argument].";

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("{entry} cannot run architecture {actual}")]
    WrongArchitecture {
        entry: &'static str,
        actual: Architecture,
    },
    #[error(transparent)]
    Config(#[from] RunConfigError),
    #[error("architecture {0} needs a supervisor backend")]
    MissingSupervisorBackend(Architecture),
    #[error(transparent)]
    Template(#[from] RenderError),
    #[error(transparent)]
    Accounting(#[from] AccountingError),
}

/// Backends bound to the two roles of a trajectory.
#[derive(Clone, Copy)]
pub struct Agents<'a> {
    pub executor: &'a dyn ChatBackend,
    pub supervisor: Option<&'a dyn ChatBackend>,
}

pub fn run_monolithic(
    task: &TaskInstance,
    config: &RunConfig,
    executor: &dyn ChatBackend,
    env: &mut dyn Environment,
) -> Result<TrajectoryRecord, OrchestratorError> {
    expect_arch("run_monolithic", config, &[Architecture::Monolithic])?;
    run_trajectory(
        task,
        config,
        Agents {
            executor,
            supervisor: None,
        },
        env,
    )
}

pub fn run_pevr(
    task: &TaskInstance,
    config: &RunConfig,
    executor: &dyn ChatBackend,
    supervisor: &dyn ChatBackend,
    env: &mut dyn Environment,
) -> Result<TrajectoryRecord, OrchestratorError> {
    expect_arch("run_pevr", config, &[Architecture::Pevr])?;
    run_trajectory(task, config, supervised(executor, supervisor), env)
}

pub fn run_eva(
    task: &TaskInstance,
    config: &RunConfig,
    executor: &dyn ChatBackend,
    supervisor: &dyn ChatBackend,
    env: &mut dyn Environment,
) -> Result<TrajectoryRecord, OrchestratorError> {
    expect_arch(
        "run_eva",
        config,
        &[Architecture::Eva, Architecture::EvaNosummary],
    )?;
    run_trajectory(task, config, supervised(executor, supervisor), env)
}

pub fn run_audit(
    task: &TaskInstance,
    config: &RunConfig,
    executor: &dyn ChatBackend,
    supervisor: &dyn ChatBackend,
    env: &mut dyn Environment,
) -> Result<TrajectoryRecord, OrchestratorError> {
    expect_arch(
        "run_audit",
        config,
        &[Architecture::PevrAudit, Architecture::EvaAudit],
    )?;
    run_trajectory(task, config, supervised(executor, supervisor), env)
}

fn supervised<'a>(executor: &'a dyn ChatBackend, supervisor: &'a dyn ChatBackend) -> Agents<'a> {
    Agents {
        executor,
        supervisor: Some(supervisor),
    }
}

fn expect_arch(
    entry: &'static str,
    config: &RunConfig,
    allowed: &[Architecture],
) -> Result<(), OrchestratorError> {
    if allowed.contains(&config.architecture) {
        Ok(())
    } else {
        Err(OrchestratorError::WrongArchitecture {
            entry,
            actual: config.architecture,
        })
    }
}

/// Runs one task under `config.architecture`, scores it against the task's
/// gold answers, and accounts its cost.
///
/// Backend failures, context overflow, and the turn budget end the
/// trajectory and are recorded in it; only misconfiguration is an `Err`.
pub fn run_trajectory(
    task: &TaskInstance,
    config: &RunConfig,
    agents: Agents<'_>,
    env: &mut dyn Environment,
) -> Result<TrajectoryRecord, OrchestratorError> {
    config.validate()?;
    let arch = config.architecture;
    let supervisor = match (arch.needs_supervisor(), agents.supervisor) {
        (true, None) => return Err(OrchestratorError::MissingSupervisorBackend(arch)),
        (true, Some(s)) => Some(s),
        (false, _) => None,
    };
    env.reset();
    let mut run = Run {
        task,
        config,
        executor: agents.executor,
        supervisor,
        tools: env.tool_names(),
        tool_prompt: env.tool_prompt(),
        record: TrajectoryRecord {
            task_id: task.id.clone(),
            architecture: arch,
            config_digest: config.digest(),
            verify_interval: config.verify_interval,
            max_turns: config.max_turns_for(task.benchmark_tag),
            planning: None,
            turns: Vec::new(),
            supervisor_calls: Vec::new(),
            resets: Vec::new(),
            final_answer: None,
            termination: Termination::TurnBudgetExhausted,
            error: None,
            score: None,
            success: None,
            totals: Default::default(),
        },
    };
    run.execute(env)?;

    let mut record = run.record;
    if let Some(answer) = &record.final_answer {
        record.score = score_answer(task.benchmark_tag, answer, &task.gold_answers).ok();
    }
    if !task.gold_answers.is_empty() {
        record.success = Some(task_success(
            task.benchmark_tag,
            &record,
            &task.gold_answers,
        ));
    }
    record.totals = accounting::aggregate(
        &record,
        RoleProfiles {
            executor: &config.executor,
            supervisor: config.supervisor.as_ref(),
        },
    )?;
    Ok(record)
}

/// What the supervisor's guidance currently is, for building prompts.
enum Guidance {
    None,
    Plan(Plan),
}

struct Run<'a> {
    task: &'a TaskInstance,
    config: &'a RunConfig,
    executor: &'a dyn ChatBackend,
    supervisor: Option<&'a dyn ChatBackend>,
    tools: Vec<String>,
    tool_prompt: String,
    record: TrajectoryRecord,
}

enum Step {
    Continue(ExecutorContext),
    Stop,
}

impl<'a> Run<'a> {
    fn request(&self, messages: Vec<ChatMessage>) -> ChatRequest {
        ChatRequest {
            messages,
            temperature: self.config.sampling.temperature,
            max_generated_tokens: self.config.sampling.max_generated_tokens,
        }
    }

    fn stop(&mut self, termination: Termination, error: Option<String>) {
        self.record.termination = termination;
        self.record.error = error;
    }

    fn stop_backend(&mut self, err: &BackendError) {
        match err {
            BackendError::ContextOverflow(_) => {
                self.stop(Termination::OutOfContext, Some(err.to_string()))
            }
            _ => self.stop(Termination::BackendError, Some(err.to_string())),
        }
    }

    fn render(
        &self,
        id: TemplateId,
        extra: &[(&'static str, &str)],
    ) -> Result<String, RenderError> {
        let mut bindings: BTreeMap<&str, &str> = BTreeMap::new();
        let placeholders = id.placeholders();
        if placeholders.contains("user_query") {
            bindings.insert("user_query", &self.task.query);
        }
        if placeholders.contains("available_tools") {
            bindings.insert("available_tools", &self.tool_prompt);
        }
        for (k, v) in extra {
            bindings.insert(k, v);
        }
        render(id, &bindings)
    }

    /// Seeds the executor context, or records why it could not be seeded.
    fn seed(&mut self, prompt: String) -> Option<ExecutorContext> {
        let len = whitespace_tokens(&prompt);
        match ExecutorContext::new(prompt, len, self.config.executor.context_cap) {
            Ok(ctx) => Some(ctx),
            Err(e) => {
                self.stop(Termination::OutOfContext, Some(e.to_string()));
                None
            }
        }
    }

    fn execute(&mut self, env: &mut dyn Environment) -> Result<(), OrchestratorError> {
        let arch = self.config.architecture;
        let (mut guidance, seed_prompt) = if arch.is_plan_based() {
            let Some(plan) = self.initial_plan()? else {
                return Ok(());
            };
            let prompt = self.render(TemplateId::PlanExec, &[("plan", &plan.text)])?;
            (Guidance::Plan(plan), prompt)
        } else {
            (Guidance::None, self.render(TemplateId::DirectExec, &[])?)
        };
        let Some(mut ctx) = self.seed(seed_prompt) else {
            return Ok(());
        };

        let max_turns = self.record.max_turns;
        for t in 1..=max_turns {
            ctx = match self.executor_turn(t, ctx, env) {
                Step::Continue(ctx) => ctx,
                Step::Stop => return Ok(()),
            };
            if self.supervisor.is_some() && t % self.config.verify_interval == 0 {
                ctx = match self.verify(t, ctx, &mut guidance)? {
                    Step::Continue(ctx) => ctx,
                    Step::Stop => return Ok(()),
                };
            }
        }
        self.stop(Termination::TurnBudgetExhausted, None);
        Ok(())
    }

    fn executor_turn(&mut self, t: u32, ctx: ExecutorContext, env: &mut dyn Environment) -> Step {
        let request = self.request(ctx.messages());
        let response = match self.executor.complete(&request) {
            Ok(r) => r,
            Err(e) => {
                self.stop_backend(&e);
                return Step::Stop;
            }
        };
        let (action, reasoning) = match parse_tool_call(&response.text, &self.tools) {
            Ok(parsed) => (Some(parsed.call), parsed.reasoning),
            Err(_) => (None, response.text.trim().to_string()),
        };
        let mut turn = TurnRecord {
            t,
            reasoning,
            action,
            observation: None,
            usage: response.usage,
            wall_time_ms: response.latency_ms,
        };

        // Reported lengths can dip below the previous turn's when a reply
        // carried text after its tool call that the context does not keep.
        let new_len = response.usage.context_tokens().max(ctx.token_len());
        if !ctx.fits(new_len) {
            self.record.turns.push(turn);
            self.stop(
                Termination::OutOfContext,
                Some(format!(
                    "context of {new_len} tokens exceeds cap of {} at turn {t}",
                    ctx.cap()
                )),
            );
            return Step::Stop;
        }

        let observation = match &turn.action {
            Some(call) => env.step(call),
            None => crate::environments::Observation::text(INVALID_FORMAT_OBSERVATION),
        };
        turn.observation = Some(observation.text);
        self.record.turns.push(turn.clone());
        if observation.terminal {
            self.record.final_answer = observation.final_answer;
            self.stop(Termination::Finished, None);
            return Step::Stop;
        }
        match ctx.append_turn(turn, new_len) {
            Ok(ctx) => Step::Continue(ctx),
            Err(e) => {
                self.stop(Termination::OutOfContext, Some(e.to_string()));
                Step::Stop
            }
        }
    }

    /// Sends `prompt` to the supervisor, re-requesting once if `parse` fails.
    /// Returns the last reply, the parse result, summed usage, and attempts.
    fn ask_supervisor<T>(
        &mut self,
        prompt: String,
        parse: impl Fn(&str) -> Result<T, ParseError>,
    ) -> Result<(String, Result<T, ParseError>, TokenUsage, u32), BackendError> {
        let supervisor = self.supervisor.expect("supervisor bound");
        let request = self.request(vec![ChatMessage::user(prompt)]);
        let mut usage = TokenUsage::default();
        let mut attempts = 0;
        loop {
            let ChatResponse { text, usage: u, .. } = supervisor.complete(&request)?;
            usage += u;
            attempts += 1;
            let parsed = parse(&text);
            if parsed.is_ok() || attempts == 2 {
                return Ok((text, parsed, usage, attempts));
            }
        }
    }

    fn initial_plan(&mut self) -> Result<Option<Plan>, OrchestratorError> {
        let prompt = self.render(TemplateId::Plan, &[])?;
        let (raw_text, parsed, usage, attempts) = match self.ask_supervisor(prompt, parse_plan) {
            Ok(r) => r,
            Err(e) => {
                self.stop_backend(&e);
                return Ok(None);
            }
        };
        self.record.planning = Some(PlanningRecord {
            plan: parsed.as_ref().ok().map(|p| p.text.clone()),
            raw_text,
            usage,
            attempts,
        });
        match parsed {
            Ok(plan) => Ok(Some(plan)),
            Err(e) => {
                self.stop(Termination::BackendError, Some(e.to_string()));
                Ok(None)
            }
        }
    }

    fn verify(
        &mut self,
        t: u32,
        ctx: ExecutorContext,
        guidance: &mut Guidance,
    ) -> Result<Step, OrchestratorError> {
        let arch = self.config.architecture;
        let memory = format_memory(&self.record.turns);
        let executor_context = format_executor_context(ctx.turns());
        let (prompt, parse): (String, VerdictParser) = match guidance {
            Guidance::Plan(plan) => (
                self.render(
                    TemplateId::VerifyReplan,
                    &[
                        ("plan", &plan.text),
                        ("executor_context", &executor_context),
                        ("memory", &memory),
                    ],
                )?,
                parse_pevr_verdict,
            ),
            Guidance::None => (
                self.render(
                    TemplateId::VerifyAdvice,
                    &[("executor_context", &executor_context), ("memory", &memory)],
                )?,
                parse_eva_verdict,
            ),
        };
        let (raw_text, parsed, usage, _) = match self.ask_supervisor(prompt, parse) {
            Ok(r) => r,
            Err(e) => {
                self.stop_backend(&e);
                return Ok(Step::Stop);
            }
        };
        let (decision, protocol_violation) = match parsed {
            Ok(d) => (d, false),
            Err(_) => (VerifierDecision::continue_(raw_text), true),
        };
        let mut call = SupervisorCallRecord {
            at_turn: t,
            decision,
            usage,
            applied: false,
            protocol_violation,
            reset_context_tokens: None,
        };

        // Complete the payload with what the executor will be handed.
        let resume = match call.decision.payload.take() {
            None => None,
            Some(Handoff::Replan { replan, .. }) => {
                let replan = Plan {
                    text: replan.text,
                    origin: PlanOrigin::Replan(t),
                };
                let seed = self.render(
                    TemplateId::ReplanResume,
                    &[("replan", &replan.text), ("memory", &memory)],
                )?;
                call.decision.payload = Some(Handoff::Replan {
                    replan: replan.clone(),
                    memory: memory.clone(),
                });
                Some((seed, Some(replan)))
            }
            Some(Handoff::Advice { advice, .. }) if arch == Architecture::EvaNosummary => {
                let seed = self.render(
                    TemplateId::AdviceResume,
                    &[("summary", &memory), ("advice", &advice)],
                )?;
                call.decision.payload = Some(Handoff::AdviceMemory {
                    memory: memory.clone(),
                    advice,
                });
                Some((seed, None))
            }
            Some(Handoff::Advice { summary, advice }) => {
                let seed = self.render(
                    TemplateId::AdviceResume,
                    &[("summary", &summary), ("advice", &advice)],
                )?;
                call.decision.payload = Some(Handoff::Advice { summary, advice });
                Some((seed, None))
            }
            Some(other) => {
                call.decision.payload = Some(other);
                None
            }
        };

        let Some((seed, replan)) = resume.filter(|_| !arch.is_audit()) else {
            self.record.supervisor_calls.push(call);
            return Ok(Step::Continue(ctx));
        };
        let seed_len = whitespace_tokens(&seed);
        call.applied = true;
        call.reset_context_tokens = Some(seed_len);
        self.record.supervisor_calls.push(call);
        self.record.resets.push(t);
        if let Some(replan) = replan {
            *guidance = Guidance::Plan(replan);
        }
        match ctx.reset_context(seed, seed_len) {
            Ok(ctx) => Ok(Step::Continue(ctx)),
            Err(e) => {
                self.stop(Termination::OutOfContext, Some(e.to_string()));
                Ok(Step::Stop)
            }
        }
    }
}
