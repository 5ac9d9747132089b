use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use endi::agents::{evaluate, PolicyKind};
use endi::episode::{parse_actions, DEFAULT_AGENTS};
use endi::interface::checks::{self, Scale};
use endi::manualgen::{Split, SplitSpec, TemplateCorpus};
use endi::rng::derive_seed;
use endi::transcript::Transcript;
use endi::{EnvKind, Episode, EpisodeConfig, Stage};

#[derive(Parser)]
#[command(name = "endi", version, about = "Multi-agent RTFM and MESSENGER engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write oracle or random episodes as transcript and manual files.
    Gen(GenArgs),
    /// Step through one episode in the terminal.
    Play(PlayArgs),
    /// Win rate, return and length of a scripted policy.
    Eval(EvalArgs),
    /// Serve the line-delimited JSON protocol over TCP.
    Serve(ServeArgs),
    /// Run the invariant suites.
    Check(CheckArgs),
    /// Validate template counts and split disjointness.
    Corpus(CorpusArgs),
    /// Replay a transcript file and compare it with the recorded one.
    Replay(ReplayArgs),
}

#[derive(Args, Clone)]
struct GameArgs {
    #[arg(long, default_value = "rtfm")]
    env: EnvKind,
    #[arg(long, default_value = "S1")]
    stage: Stage,
    #[arg(long, default_value = "train")]
    split: Split,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "agents", default_value_t = DEFAULT_AGENTS)]
    agents: usize,
}

impl GameArgs {
    fn config(&self) -> Result<EpisodeConfig> {
        let c = EpisodeConfig::new(self.env, self.stage, self.split, self.seed, self.agents);
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PlayPolicy {
    Oracle,
    Random,
    Manual,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    game: GameArgs,
    #[arg(long, default_value_t = 1)]
    episodes: usize,
    #[arg(long, default_value = "oracle")]
    policy: PolicyKind,
    /// Output directory.
    #[arg(long, default_value = ".", conflicts_with = "stdout")]
    out: PathBuf,
    /// Print transcripts to stdout instead of writing files.
    #[arg(long)]
    stdout: bool,
}

#[derive(Args)]
struct PlayArgs {
    #[command(flatten)]
    game: GameArgs,
    /// `manual` reads one joint action per line from stdin, e.g. `up,stay`.
    #[arg(long, value_enum, default_value = "oracle")]
    policy: PlayPolicy,
    /// Read joint actions from a file instead of choosing them.
    #[arg(long, conflicts_with = "policy")]
    script: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    max_steps: u32,
    /// Only print the final board and outcome.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    game: GameArgs,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value = "oracle")]
    policy: PolicyKind,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7878")]
    addr: String,
}

#[derive(Args)]
struct CheckArgs {
    /// Smaller sample sizes.
    #[arg(long)]
    quick: bool,
}

#[derive(Args)]
struct CorpusArgs {
    /// Check counts and split disjointness; exit non-zero on failure.
    #[arg(long)]
    verify: bool,
    /// Corpus file to load instead of the bundled one.
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    path: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Gen(a) => gen(&a),
        Command::Play(a) => play(&a),
        Command::Eval(a) => {
            let report = evaluate(a.policy, a.game.config()?, a.episodes, a.game.seed)?;
            if a.json {
                println!("{}", report.json());
            } else {
                print!("{}", report.key_values());
            }
            Ok(true)
        }
        Command::Serve(a) => {
            endi::interface::serve(&a.addr).with_context(|| format!("serving on {}", a.addr))?;
            Ok(true)
        }
        Command::Check(a) => {
            let scale = if a.quick { Scale::Quick } else { Scale::Full };
            let mut ok = true;
            for r in checks::run_all(scale) {
                println!("{r}");
                ok &= r.passed;
            }
            Ok(ok)
        }
        Command::Corpus(a) => corpus(&a),
        Command::Replay(a) => {
            let text = fs::read_to_string(&a.path).with_context(|| format!("reading {}", a.path.display()))?;
            let t = Transcript::parse(&text)?;
            let same = t.verify()?;
            println!("{} steps, replay {}", t.steps.len(), if same { "matches" } else { "differs" });
            Ok(same)
        }
    }
}

fn file_stem(c: &EpisodeConfig, i: usize) -> String {
    format!("{}-{}-{}-{:04}", c.env, c.stage, c.split.name(), i)
}

fn manual_text(ep: &Episode) -> String {
    let m = ep.manual();
    let mut out = format!("goal: {}\n", m.goal_text());
    for s in m.sentences() {
        out.push_str(&s);
        out.push('\n');
    }
    out
}

fn gen(a: &GenArgs) -> Result<bool> {
    let base = a.game.config()?;
    if !a.stdout {
        fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    }
    for i in 0..a.episodes {
        let seed = derive_seed(a.game.seed, i as u64);
        let cfg = base.with_seed(seed);
        let mut policy = a.policy.build(seed);
        let ep = endi::agents::run_episode(cfg, policy.as_mut())?;
        let transcript = ep.transcript().to_text();
        if a.stdout {
            print!("{transcript}");
            continue;
        }
        let stem = file_stem(&cfg, i);
        write_file(&a.out.join(format!("{stem}.transcript")), &transcript)?;
        write_file(&a.out.join(format!("{stem}.manual")), &manual_text(&ep))?;
        println!("{stem} seed={seed} steps={} outcome={:?}", ep.step_count(), ep.outcome());
    }
    Ok(true)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn play(a: &PlayArgs) -> Result<bool> {
    let cfg = a.game.config()?;
    let mut ep = Episode::new(cfg)?;
    let mut script = match &a.script {
        Some(p) => Some(
            fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))?
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(str::to_owned)
                .collect::<Vec<_>>()
                .into_iter(),
        ),
        None => None,
    };
    let mut auto: Option<Box<dyn endi::agents::Policy>> = match a.policy {
        PlayPolicy::Oracle => Some(PolicyKind::Oracle.build(cfg.seed)),
        PlayPolicy::Random => Some(PolicyKind::Random.build(cfg.seed)),
        PlayPolicy::Manual => None,
    };
    let stdin = io::stdin();
    let mut input = stdin.lock().lines();
    let mut out = io::stdout().lock();

    if !a.quiet {
        writeln!(out, "{}", manual_text(&ep))?;
    }
    while !ep.is_done() && ep.step_count() < a.max_steps {
        if !a.quiet {
            for line in ep.render() {
                writeln!(out, "{line}")?;
            }
        }
        let actions = if let Some(lines) = script.as_mut() {
            match lines.next() {
                Some(l) => parse_actions(&l)?,
                None => break,
            }
        } else if let Some(p) = auto.as_mut() {
            p.act(&ep)
        } else {
            write!(out, "t={} actions> ", ep.step_count())?;
            out.flush()?;
            let Some(line) = input.next() else { break };
            match parse_actions(&line?) {
                Ok(act) if act.len() == ep.n_agents() => act,
                Ok(act) => {
                    writeln!(out, "need {} actions, got {}", ep.n_agents(), act.len())?;
                    continue;
                }
                Err(e) => {
                    writeln!(out, "{e}")?;
                    continue;
                }
            }
        };
        let r = ep.step(&actions)?;
        if !a.quiet {
            let events: Vec<String> = r.events.iter().map(|e| e.to_string()).collect();
            writeln!(out, "t={} rewards={:?} events=[{}]", ep.step_count(), r.rewards, events.join(" "))?;
        }
    }
    for line in ep.render() {
        writeln!(out, "{line}")?;
    }
    writeln!(
        out,
        "outcome={:?} steps={} returns={:?}",
        ep.outcome(),
        ep.step_count(),
        ep.returns()
    )?;
    Ok(true)
}

fn corpus(a: &CorpusArgs) -> Result<bool> {
    let corpus = match &a.file {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            TemplateCorpus::parse(&text)?
        }
        None => TemplateCorpus::standard(),
    };
    let c = corpus.counts();
    println!("rtfm_goal={}", c.rtfm_goal);
    println!("rtfm_team={}", c.rtfm_team);
    println!("rtfm_modifier={}", c.rtfm_modifier);
    println!(
        "messenger={}x{}={}",
        c.messenger, c.messenger_fillings, c.messenger_descriptions
    );
    println!("messenger_train={} messenger_eval={}", c.messenger_train, c.messenger_eval);
    println!("split_digest={}", SplitSpec::standard().digest());
    if !a.verify {
        return Ok(true);
    }
    let mut ok = true;
    for r in [checks::corpus_counts_of(&corpus), checks::split_disjointness()] {
        println!("{r}");
        ok &= r.passed;
    }
    if !ok {
        bail!("corpus verification failed");
    }
    Ok(true)
}
