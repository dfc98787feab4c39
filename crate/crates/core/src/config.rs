//! Flat `key = value` config files merged into the argument list.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::Path;

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("config line {}: expected `key = value`", i + 1))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(format!("config line {}: bad key `{}`", i + 1, k.trim()));
        }
        let value = v.trim().trim_matches('"').to_string();
        if out.insert(key.clone(), value).is_some() {
            return Err(format!("config line {}: duplicate key `{key}`", i + 1));
        }
    }
    Ok(out)
}

fn read(path: &Path) -> Result<BTreeMap<String, String>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse(&text)
}

/// Removes `--config FILE` and appends `--key value` for every entry whose
/// flag is absent from the command line. `true`/`false` values toggle flags.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut args = Vec::with_capacity(argv.len());
    let mut file = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy().into_owned();
        if s == "--config" {
            file = Some(it.next().ok_or("--config needs a file")?);
        } else if let Some(p) = s.strip_prefix("--config=") {
            file = Some(OsString::from(p));
        } else {
            args.push(a);
        }
    }
    let Some(file) = file else {
        return Ok(args);
    };
    let present: Vec<String> = args
        .iter()
        .filter_map(|a| a.to_str())
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    for (key, value) in read(Path::new(&file))? {
        if present.contains(&key) {
            continue;
        }
        match value.as_str() {
            "true" => args.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                args.push(format!("--{key}").into());
                args.push(value.into());
            }
        }
    }
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_comments_and_underscores() {
        let m = parse("# run\nseed = 7\nm_se=1000  # small\n\nmodel = \"logistic\"\n").unwrap();
        assert_eq!(m["seed"], "7");
        assert_eq!(m["m-se"], "1000");
        assert_eq!(m["model"], "logistic");
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse("seed 7").is_err());
        assert!(parse("seed = 1\nseed = 2").is_err());
        assert!(parse("bad key = 1").is_err());
    }

    #[test]
    fn command_line_wins() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "seed = 7\nkappa = 0.3\nwall-time = true\nno-classical = false\n").unwrap();
        let argv = os(&["hdglm", "se-solve", "--kappa", "0.2", "--config", path.to_str().unwrap()]);
        let out = expand(argv).unwrap();
        let out: Vec<String> = out.iter().map(|s| s.to_string_lossy().into_owned()).collect();
        assert_eq!(out, ["hdglm", "se-solve", "--kappa", "0.2", "--seed", "7", "--wall-time"]);
    }

    #[test]
    fn no_config_is_identity() {
        let argv = os(&["hdglm", "prox-eval", "--eta", "1", "--x", "0"]);
        assert_eq!(expand(argv.clone()).unwrap(), argv);
    }
}
