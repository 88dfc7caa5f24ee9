use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use fcm_cli::api::{router, AppState};
use fcm_cli::commands;

#[derive(Parser)]
#[command(name = "fcm", version, about = "Fragment-based case models: validate, compile, explore, run and serve")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Checks a model document and lists its violations.
    Validate { model: PathBuf },
    /// Compiles a model to a colored Petri net (JSON).
    Compile {
        model: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Also writes a Graphviz rendering of the net.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Explores the state space of a model's net and prints the report.
    Explore {
        model: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        max_states: usize,
    },
    /// Executes a case interactively.
    Run { model: PathBuf },
    /// Serves the models of a directory over HTTP.
    Serve {
        model_dir: PathBuf,
        /// Listening port; the FCM_PORT environment variable takes precedence.
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

fn serve(dir: PathBuf, port: u16) -> i32 {
    let state = AppState::default();
    match state.load_dir(&dir) {
        Ok(skipped) => {
            for (path, reason) in skipped {
                eprintln!("skipping {path}: {reason}");
            }
        }
        Err(e) => {
            eprintln!("{}: {e}", dir.display());
            return commands::EXIT_PARSE;
        }
    }
    let app = router(Arc::new(state));
    let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
    rt.block_on(async move {
        let addr = SocketAddr::from(([0, 0, 0, 0], port));
        let listener = match tokio::net::TcpListener::bind(addr).await {
            Ok(l) => l,
            Err(e) => {
                eprintln!("{addr}: {e}");
                return 1;
            }
        };
        eprintln!("listening on {addr}");
        match axum::serve(listener, app).await {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("{e}");
                1
            }
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mut out, mut err) = (io::stdout(), io::stderr());
    let code = match cli.command {
        Command::Validate { model } => commands::validate(&model, &mut out, &mut err),
        Command::Compile { model, output, dot } => {
            commands::compile(&model, &output, dot.as_deref(), &mut out, &mut err)
        }
        Command::Explore { model, max_states } => commands::explore(&model, max_states, &mut out, &mut err),
        Command::Run { model } => commands::run(&model, &mut io::stdin().lock(), &mut out, &mut err),
        Command::Serve { model_dir, port } => {
            let port = match std::env::var("FCM_PORT") {
                Ok(v) => match v.parse() {
                    Ok(p) => p,
                    Err(_) => {
                        eprintln!("FCM_PORT: not a port number: {v}");
                        return ExitCode::from(2);
                    }
                },
                Err(_) => port,
            };
            serve(model_dir, port)
        }
    };
    ExitCode::from(code as u8)
}
