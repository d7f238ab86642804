use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context};
use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Command, ValueHint};

/// Turns a config file into extra command-line arguments for `subcommand`.
///
/// Top-level keys apply wherever the subcommand has a matching flag; keys in
/// a `[subcommand]` table must all exist. Keys use the flag's long name with
/// either `-` or `_`. Flags already given on the command line are skipped, and
/// relative paths are taken relative to the config file.
pub fn config_args(path: &Path, cmd: &Command, matches: &ArgMatches) -> anyhow::Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let (name, sub_matches) = matches.subcommand().context("no subcommand")?;
    let sub = cmd.find_subcommand(name).context("unknown subcommand")?;
    let base = path.parent().unwrap_or(Path::new("."));

    let mut pairs: Vec<(String, toml::Value, bool)> = Vec::new();
    for (k, v) in &table {
        match v {
            toml::Value::Table(section) if k == name => {
                pairs.extend(section.iter().map(|(k, v)| (k.clone(), v.clone(), true)));
            }
            toml::Value::Table(_) => {}
            _ => pairs.push((k.clone(), v.clone(), false)),
        }
    }
    // section entries override top-level entries with the same key
    pairs.sort_by_key(|p| p.2);

    let mut chosen: Vec<(&clap::Arg, toml::Value)> = Vec::new();
    for (key, value, strict) in pairs {
        let long = key.replace('_', "-");
        let arg = sub
            .get_arguments()
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(long.as_str()) && !a.is_positional());
        let Some(arg) = arg else {
            if strict {
                bail!("config key '{key}' is not a flag of '{name}'");
            }
            continue;
        };
        if long == "config" {
            bail!("config files cannot include other config files");
        }
        if sub_matches.value_source(arg.get_id().as_str()) == Some(ValueSource::CommandLine) {
            continue;
        }
        chosen.retain(|(a, _)| a.get_id() != arg.get_id());
        chosen.push((arg, value));
    }

    let mut out = Vec::new();
    for (arg, value) in chosen {
        let flag = format!("--{}", arg.get_long().expect("long flag"));
        let key = arg.get_long().unwrap_or_default();
        match arg.get_action() {
            ArgAction::SetTrue => match value {
                toml::Value::Boolean(true) => out.push(flag.into()),
                toml::Value::Boolean(false) => {}
                _ => bail!("config key '{key}' must be true or false"),
            },
            ArgAction::Count => match value {
                toml::Value::Integer(n) if n >= 0 => out.extend((0..n).map(|_| OsString::from(&flag))),
                _ => bail!("config key '{key}' must be a non-negative integer"),
            },
            _ => {
                let text = match value {
                    toml::Value::String(s) => s,
                    toml::Value::Integer(i) => i.to_string(),
                    toml::Value::Float(f) => f.to_string(),
                    toml::Value::Boolean(b) => b.to_string(),
                    toml::Value::Array(items) => items
                        .iter()
                        .map(|v| match v {
                            toml::Value::Integer(i) => Ok(i.to_string()),
                            toml::Value::Float(f) => Ok(f.to_string()),
                            toml::Value::String(s) => Ok(s.clone()),
                            _ => bail!("config key '{key}' has a nested value"),
                        })
                        .collect::<anyhow::Result<Vec<_>>>()?
                        .join(","),
                    _ => bail!("config key '{key}' has an unsupported value"),
                };
                let is_path = matches!(arg.get_value_hint(), ValueHint::FilePath | ValueHint::DirPath | ValueHint::AnyPath);
                out.push(flag.into());
                if is_path && Path::new(&text).is_relative() {
                    out.push(base.join(text).into_os_string());
                } else {
                    out.push(text.into());
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::args::Cli;
    use clap::{CommandFactory, Parser};

    fn run(config: &str, argv: &[&str]) -> anyhow::Result<Vec<String>> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, config).unwrap();
        let cmd = Cli::command();
        let m = cmd.clone().ignore_errors(true).try_get_matches_from(argv).unwrap();
        let base = dir.path().to_string_lossy().to_string();
        Ok(config_args(&p, &cmd, &m)?
            .into_iter()
            .map(|s| s.to_string_lossy().replace(&base, "<dir>"))
            .collect())
    }

    #[test]
    fn flags_win_over_file() {
        let extra = run(
            "steps = 50\nseed = 4\n[fit]\nstage = 2\nbg = [1, 1, 1]\nno_preview = true\n[bind]\nbeta = 3.0\n",
            &["meshsplat", "fit", "--scene", "s.toml", "--out", "o.ply", "--steps", "7"],
        )
        .unwrap();
        assert_eq!(extra, ["--seed", "4", "--bg", "1,1,1", "--no-preview", "--stage", "2"]);
    }

    #[test]
    fn paths_are_relative_to_the_file() {
        let extra = run("[fit]\nscene = \"bundle.toml\"\n", &["meshsplat", "fit", "--stage", "1", "--out", "o"]).unwrap();
        assert_eq!(extra, ["--scene", "<dir>/bundle.toml"]);
    }

    #[test]
    fn unknown_section_keys_fail() {
        assert!(run("[bind]\nwibble = 1\n", &["meshsplat", "bind", "--mesh", "m.obj", "--out", "o"]).is_err());
        // unknown top-level keys are shared across subcommands and ignored
        assert!(run("steps = 3\n", &["meshsplat", "bind", "--mesh", "m.obj", "--out", "o"]).unwrap().is_empty());
    }

    #[test]
    fn merged_arguments_parse() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "[bind]\nper_tri = 4\nmode = \"mesh-offset\"\n").unwrap();
        let argv = ["meshsplat", "bind", "--mesh", "m.obj", "--out", "o", "--mode", "on-mesh-flat"];
        let cmd = Cli::command();
        let m = cmd.clone().ignore_errors(true).try_get_matches_from(argv).unwrap();
        let mut full: Vec<OsString> = argv.iter().map(OsString::from).collect();
        full.extend(config_args(&p, &cmd, &m).unwrap());
        let cli = Cli::try_parse_from(full).unwrap();
        let crate::args::Command::Bind(b) = cli.command else { panic!() };
        assert_eq!(b.per_tri, 4);
        assert_eq!(b.mode, meshsplat::splat::BindingMode::OnMeshFlat);
    }
}
