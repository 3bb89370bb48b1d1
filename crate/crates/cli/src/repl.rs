//! Line-oriented teaching loop. Reads from any `BufRead` so scripts can
//! drive it in tests.

use std::io::{BufRead, Write};
use std::path::Path;

use anyhow::Result;
use sola_core::agent::{Agent, AgentReply, Phase, SideAnswer, Turn};
use sola_core::knowledge::{SideQuestion, Vote};
use sola_core::model::{ActionId, SessionId, UserId};
use sola_core::snapshot::save_snapshot;
use sola_core::world::WorldState;
use sola_server::journal::bindings;

pub const HELP: &str = "\
commands:
  <text>                 say something to the agent
  <n> | none             pick an option, or none of them
  yes | no | skip        answer a verification question
  :demo ACTION k=v ...   perform an action yourself after a failed task
  :user NAME             start a new session as NAME
  :save                  write the snapshot (needs --snapshot)
  :help                  this text
  :quit                  leave";

pub fn render(reply: &AgentReply) -> String {
    match reply {
        AgentReply::Options { options } => {
            let mut s = String::from("Sorry, I didn't get you. Do you mean to:");
            for (i, o) in options.iter().enumerate() {
                s.push_str(&format!("\n  {}. {o}", i + 1));
            }
            s.push_str("\n  0. none of these");
            s
        }
        AgentReply::ExecuteResult { text }
        | AgentReply::AskRephrase { text }
        | AgentReply::Answer { text }
        | AgentReply::Apology { text } => text.clone(),
        AgentReply::AskSlot { prompt, .. } => prompt.clone(),
        AgentReply::AskVerify { question, .. } => format!("{question} (yes/no/skip)"),
        AgentReply::AskDeferred { question, .. } => format!("{question} (answer, or skip)"),
    }
}

fn render_turn(turn: &Turn) -> String {
    match &turn.follow_up {
        Some(f) => format!("{}\n{}", render(&turn.reply), render(f)),
        None => render(&turn.reply),
    }
}

pub struct Repl<'a> {
    pub agent: Agent,
    pub world: WorldState,
    pub snapshot: Option<&'a Path>,
    session: SessionId,
}

impl<'a> Repl<'a> {
    pub fn new(mut agent: Agent, world: WorldState, user: &str, snapshot: Option<&'a Path>) -> Self {
        let session = agent.open_session(UserId::from(user), None);
        Repl { agent, world, snapshot, session }
    }

    pub fn session(&self) -> SessionId {
        self.session
    }

    /// Handles one input line. `Ok(None)` means quit.
    pub fn line(&mut self, line: &str) -> Result<Option<String>> {
        let line = line.trim();
        if line.is_empty() {
            return Ok(Some(String::new()));
        }
        if let Some(cmd) = line.strip_prefix(':') {
            return self.command(cmd);
        }
        let phase = self.agent.session(self.session).map(|s| s.phase.clone()).unwrap_or(Phase::Idle);
        let sid = self.session;
        let exec = &mut self.world;
        let turn = match phase {
            Phase::AwaitOptionChoice { .. } => {
                let choice = match line {
                    "none" | "0" => None,
                    n => match n.parse::<usize>() {
                        Ok(i) => Some(i),
                        Err(_) => return Ok(Some("pick a number, or none".into())),
                    },
                };
                self.agent.on_option_choice(sid, choice, exec)
            }
            Phase::AwaitRephrase { .. } => self.agent.on_rephrase(sid, line, exec),
            Phase::AwaitSlot { pending, .. } => self.agent.on_slot_answer(sid, &pending[0], line, exec),
            Phase::AwaitSideAnswer { question } => {
                let answer = match (&question, line.to_lowercase().as_str()) {
                    (_, "skip") => Some(SideAnswer::Skip),
                    (SideQuestion::Verify { .. }, "yes" | "y") => Some(SideAnswer::Vote(Vote::Yes)),
                    (SideQuestion::Verify { .. }, "no" | "n") => Some(SideAnswer::Vote(Vote::No)),
                    (SideQuestion::Deferred { .. }, _) => Some(SideAnswer::Text(line.to_string())),
                    // anything else is a new command; the question is dropped
                    (SideQuestion::Verify { .. }, _) => None,
                };
                match answer {
                    Some(a) => self.agent.on_side_answer(sid, a),
                    None => self.agent.handle_utterance(sid, line, exec),
                }
            }
            Phase::Idle => self.agent.handle_utterance(sid, line, exec),
        };
        Ok(Some(match turn {
            Ok(t) => render_turn(&t),
            Err(e) => format!("error: {e}"),
        }))
    }

    fn command(&mut self, cmd: &str) -> Result<Option<String>> {
        let mut words = cmd.split_whitespace();
        let out = match words.next().unwrap_or("") {
            "quit" | "q" => return Ok(None),
            "help" => HELP.to_string(),
            "user" => match words.next() {
                Some(name) => {
                    self.agent.close_session(self.session);
                    self.session = self.agent.open_session(UserId::from(name), None);
                    format!("session {} as {name}", self.session)
                }
                None => "usage: :user NAME".into(),
            },
            "save" => match self.snapshot {
                Some(p) => {
                    let h = save_snapshot(self.agent.state(), &self.agent.config().knowledge, p)?;
                    format!("saved {} ({} seed commands, {} facts)", p.display(), h.counts.seed_commands, h.counts.facts)
                }
                None => "no snapshot path; start with --snapshot".into(),
            },
            "demo" => {
                let Some(action) = words.next() else {
                    return Ok(Some("usage: :demo ACTION k=v ...".into()));
                };
                let mut args = std::collections::BTreeMap::new();
                for kv in words {
                    match kv.split_once('=') {
                        Some((k, v)) => args.insert(k.to_string(), v.replace('_', " ")),
                        None => return Ok(Some(format!("bad argument `{kv}`, expected k=v"))),
                    };
                }
                match self.agent.on_demonstration(self.session, &ActionId::from(action), bindings(&args), &mut self.world) {
                    Ok(t) => render_turn(&t),
                    Err(e) => format!("error: {e}"),
                }
            }
            other => format!("unknown command :{other}; try :help"),
        };
        Ok(Some(out))
    }
}

/// Runs until `:quit` or end of input, echoing a prompt before each line.
pub fn run(repl: &mut Repl, input: impl BufRead, out: &mut impl Write) -> Result<()> {
    write!(out, "> ")?;
    out.flush()?;
    for line in input.lines() {
        match repl.line(&line?)? {
            Some(reply) => {
                if !reply.is_empty() {
                    writeln!(out, "{reply}")?;
                }
            }
            None => break,
        }
        write!(out, "> ")?;
        out.flush()?;
    }
    writeln!(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use sola_core::config::DomainConfig;

    fn repl() -> Repl<'static> {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/smart_home.json");
        let cfg = DomainConfig::load(&path).unwrap();
        let agent = Agent::from_config_with(&cfg, |t| t.as_str() == "lights").unwrap();
        Repl::new(agent, WorldState::from_config(&cfg.world), "alice", None)
    }

    #[test]
    fn scripted_teaching() {
        let mut r = repl();
        let script = "turn off the light in the kitchen\n1\nturn off the light in the bedroom\n:quit\nignored\n";
        let mut out = Vec::new();
        run(&mut r, script.as_bytes(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("Do you mean to:\n  1. switch off the light in the kitchen"), "{text}");
        assert!(text.contains("switched off the light in the kitchen"));
        assert!(text.contains("switched off the light in the bedroom"));
        assert!(!text.contains("ignored"));
        assert!(!r.world.devices["kitchen"].light_on && !r.world.devices["bedroom"].light_on);
    }

    #[test]
    fn bad_input_keeps_phase() {
        let mut r = repl();
        r.line("turn off the light in the kitchen").unwrap();
        assert_eq!(r.line("seven").unwrap().unwrap(), "pick a number, or none");
        assert!(r.line("9").unwrap().unwrap().starts_with("error:"));
        let phase = r.agent.session(r.session()).unwrap().phase.name();
        assert_eq!(phase, "AwaitOptionChoice");
        assert!(r.line(":save").unwrap().unwrap().contains("no snapshot path"));
        assert!(r.line(":demo").unwrap().unwrap().starts_with("usage"));
    }
}
