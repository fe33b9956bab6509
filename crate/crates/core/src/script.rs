//! Line-oriented scenario language read by the command-line tool.
//!
//! One statement per line; `#` starts a comment. Tokens follow shell quoting
//! rules. `for VAR in LIST : STATEMENT` repeats a statement, substituting
//! `$VAR` or `${VAR}`; a list is comma-separated values and inclusive ranges
//! such as `150..161`.
//!
//! ```text
//! seed 7
//! ix 100
//! network 150 net0
//! router 150 router0 net0 ix100
//! for i in 0..2 : host 150 host$i net0
//! peer 100 2 150 provider
//! ```

use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use ipnet::Ipv4Net;

use crate::base::{Base, NodeBuilder, PrefixSource, RemoteAccessSpec};
use crate::dns::DnsLayer;
use crate::emulator::{Action, Binding, Emulator, Filter, Layer};
use crate::routing::{Ebgp, PeerRelationship, Routing};
use crate::service::ServiceLayer;
use crate::{Asn, Error, Result};

/// Number of statements: non-blank lines that are not comments.
pub fn statement_count(text: &str) -> usize {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .count()
}

/// A parsed scenario ready to become an [`Emulator`].
#[derive(Debug, Default)]
pub struct Scenario {
    seed: u64,
    base: Base,
    routing: bool,
    ebgp: Option<Ebgp>,
    dns: Option<DnsLayer>,
    service: Option<ServiceLayer>,
    components: Vec<Layer>,
    bindings: Vec<Binding>,
    dir: Option<PathBuf>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Scenario::default();
        s.run(text)?;
        Ok(s)
    }

    /// Parses a file; relative paths inside it resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut s = Scenario {
            dir: path.parent().map(Path::to_path_buf),
            ..Scenario::default()
        };
        s.run(&text)?;
        Ok(s)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The seed given on the command line wins over the script's.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    pub fn into_emulator(self) -> Result<Emulator> {
        let mut emu = Emulator::new(self.seed);
        emu.add_layer(self.base)?;
        if self.routing {
            emu.add_layer(Routing::new())?;
        }
        if let Some(ebgp) = self.ebgp {
            emu.add_layer(ebgp)?;
        }
        if let Some(dns) = self.dns {
            emu.add_layer(dns)?;
        }
        if let Some(svc) = self.service {
            emu.add_layer(svc)?;
        }
        for layer in self.components {
            emu.add_layer(layer)?;
        }
        for b in self.bindings {
            emu.add_binding(b)?;
        }
        Ok(emu)
    }

    fn run(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let tokens = shell_words::split(line).map_err(|e| Error::Script {
                line: i + 1,
                message: e.to_string(),
            })?;
            self.statement(&tokens).map_err(|e| match e {
                Error::Script { line: 0, message } => Error::Script {
                    line: i + 1,
                    message,
                },
                Error::Script { .. } => e,
                other => Error::Script {
                    line: i + 1,
                    message: other.to_string(),
                },
            })?;
        }
        Ok(())
    }

    fn statement(&mut self, t: &[String]) -> Result<()> {
        let Some((cmd, args)) = t.split_first() else {
            return Ok(());
        };
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        match cmd.as_str() {
            "for" => self.for_loop(&args),
            "seed" => {
                arity(&args, 1, 1)?;
                self.seed = num(args[0])?;
                Ok(())
            }
            "ix" => {
                arity(&args, 1, 2)?;
                let id = num(args[0])?;
                match args.get(1) {
                    Some(p) => self
                        .base
                        .create_internet_exchange_with_prefix(id, net(p)?)?,
                    None => self.base.create_internet_exchange(id)?,
                };
                Ok(())
            }
            "as" => {
                arity(&args, 1, 1)?;
                self.base.create_autonomous_system(num(args[0])?)?;
                Ok(())
            }
            "network" => {
                arity(&args, 2, 3)?;
                let asn = self.known_as(args[0])?;
                let mut asys = self.base.autonomous_system_mut(asn)?;
                match args.get(2) {
                    Some(p) => asys.create_network_with_prefix(args[1], net(p)?)?,
                    None => asys.create_network(args[1])?,
                };
                Ok(())
            }
            "router" | "host" => {
                arity(&args, 2, usize::MAX)?;
                let asn = self.known_as(args[0])?;
                let mut asys = self.base.autonomous_system_mut(asn)?;
                let b = if cmd == "router" {
                    asys.create_router(args[1])?
                } else {
                    asys.create_host(args[1])?
                };
                join_all(b, &args[2..])?;
                Ok(())
            }
            "rw" => {
                arity(&args, 3, usize::MAX)?;
                let asn = self.known_as(args[0])?;
                let prefixes = args[2].split(',').map(net).collect::<Result<Vec<_>>>()?;
                let mut asys = self.base.autonomous_system_mut(asn)?;
                let b = asys.create_real_world_router(args[1], PrefixSource::Static(prefixes))?;
                join_all(b, &args[3..])?;
                Ok(())
            }
            "remote-access" => {
                arity(&args, 3, 3)?;
                let asn = self.known_as(args[0])?;
                let port = num(args[2])?;
                self.base
                    .autonomous_system_mut(asn)?
                    .network(args[1])?
                    .enable_remote_access(RemoteAccessSpec::openvpn(port))?;
                Ok(())
            }
            "software" | "file" | "import" | "build" | "start" | "display" | "describe" => {
                self.node_statement(cmd, &args)
            }
            "routing" => {
                arity(&args, 0, 0)?;
                self.routing = true;
                Ok(())
            }
            "peer" => {
                arity(&args, 4, 4)?;
                let ix = num(args[0])?;
                let left = asn_list(args[1])?;
                let right = asn_list(args[2])?;
                let rel: PeerRelationship = args[3].parse().map_err(script_err)?;
                self.ebgp
                    .get_or_insert_with(Ebgp::new)
                    .add_private_peerings(ix, &left, &right, rel)?;
                Ok(())
            }
            "rs" => {
                arity(&args, 2, 2)?;
                let ix = num(args[0])?;
                let members = asn_list(args[1])?;
                self.ebgp
                    .get_or_insert_with(Ebgp::new)
                    .add_rs_peers(ix, &members)?;
                Ok(())
            }
            "dns-zone" => {
                arity(&args, 2, 3)?;
                let dns = self.dns.get_or_insert_with(DnsLayer::new);
                let handle = dns.install(args[0]).add_zone(args[1])?;
                match args.get(2) {
                    Some(&"master") => {
                        handle.set_master()?;
                    }
                    Some(other) => return Err(script_err(format!("unexpected `{other}`"))),
                    None => {}
                }
                Ok(())
            }
            "dns-record" => {
                arity(&args, 2, usize::MAX)?;
                let record = args[1..].join(" ");
                self.dns
                    .get_or_insert_with(DnsLayer::new)
                    .get_zone(args[0])?
                    .add_record(&record)?;
                Ok(())
            }
            "service" => self.service_statement(&args),
            "component" => {
                arity(&args, 1, 1)?;
                let path = self.resolve(args[0]);
                self.components.extend(Emulator::import_component(path)?);
                Ok(())
            }
            "bind" => self.bind_statement(&args),
            other => Err(script_err(format!("unknown statement `{other}`"))),
        }
    }

    fn for_loop(&mut self, args: &[&str]) -> Result<()> {
        if args.len() < 5 || args[1] != "in" || args[3] != ":" {
            return Err(script_err("expected `for VAR in LIST : STATEMENT`"));
        }
        let var = args[0];
        for value in expand_list(args[2])? {
            let body: Vec<String> = args[4..]
                .iter()
                .map(|t| {
                    t.replace(&format!("${{{var}}}"), &value)
                        .replace(&format!("${var}"), &value)
                })
                .collect();
            self.statement(&body)?;
        }
        Ok(())
    }

    fn node_statement(&mut self, cmd: &str, args: &[&str]) -> Result<()> {
        arity(args, 3, usize::MAX)?;
        let asn = self.known_as(args[0])?;
        let rest = args[2..].join(" ");
        let import_src = (cmd == "import").then(|| self.resolve(args[2]));
        let mut asys = self.base.autonomous_system_mut(asn)?;
        let b = asys.node(args[1])?;
        match cmd {
            "software" => {
                args[2..].iter().fold(b, |b, p| b.add_software(p));
            }
            "file" => {
                arity(args, 4, 4)?;
                b.set_file(args[2], &unescape(args[3]))?;
            }
            "import" => {
                arity(args, 4, 4)?;
                b.import_file(import_src.expect("set above"), args[3])?;
            }
            "build" => {
                b.add_build_command(&rest);
            }
            "start" => {
                b.append_start_command(&rest);
            }
            "display" => {
                b.set_display_name(&rest);
            }
            "describe" => {
                b.set_description(&rest);
            }
            _ => unreachable!("dispatched by caller"),
        }
        Ok(())
    }

    fn service_statement(&mut self, args: &[&str]) -> Result<()> {
        arity(args, 3, usize::MAX)?;
        let svc = self.service.get_or_insert_with(ServiceLayer::new);
        let h = svc.install(args[0]);
        let rest = args[2..].join(" ");
        match args[1] {
            "software" => {
                args[2..].iter().fold(h, |h, p| h.add_software(p));
            }
            "file" => {
                arity(args, 4, 4)?;
                h.set_file(args[2], &unescape(args[3]))?;
            }
            "build" => {
                h.add_build_command(&rest);
            }
            "start" => {
                h.append_start_command(&rest);
            }
            other => return Err(script_err(format!("unknown service action `{other}`"))),
        }
        Ok(())
    }

    fn bind_statement(&mut self, args: &[&str]) -> Result<()> {
        arity(args, 1, usize::MAX)?;
        let mut filter = Filter::any();
        let mut action = Action::First;
        for opt in &args[1..] {
            match *opt {
                "first" => action = Action::First,
                "random" => action = Action::Random,
                "new" => action = Action::New,
                "reuse" => filter.allow_reuse = true,
                _ => match opt.split_once('=') {
                    Some(("asn", v)) => filter.asn = Some(num(v)?),
                    Some(("name", v)) => filter.node_name = Some(v.to_string()),
                    Some(("ip", v)) => filter.ip = Some(v.parse().map_err(script_err)?),
                    _ => return Err(script_err(format!("unknown bind option `{opt}`"))),
                },
            }
        }
        self.bindings
            .push(Binding::new(args[0], filter).with_action(action));
        Ok(())
    }

    fn known_as(&mut self, text: &str) -> Result<Asn> {
        let asn: Asn = num(text)?;
        if self.base.autonomous_system(asn).is_none() {
            self.base.create_autonomous_system(asn)?;
        }
        Ok(asn)
    }

    fn resolve(&self, path: &str) -> PathBuf {
        let p = PathBuf::from(path);
        match &self.dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p,
        }
    }
}

fn join_all(mut b: NodeBuilder<'_>, nets: &[&str]) -> Result<()> {
    for spec in nets {
        b = match spec.split_once('@') {
            Some((net, addr)) => {
                let addr: Ipv4Addr = addr.parse().map_err(script_err)?;
                b.join_network_at(net, addr)?
            }
            None => b.join_network(spec)?,
        };
    }
    Ok(())
}

fn script_err(e: impl ToString) -> Error {
    Error::Script {
        line: 0,
        message: e.to_string(),
    }
}

fn arity(args: &[&str], min: usize, max: usize) -> Result<()> {
    if args.len() < min || args.len() > max {
        let expected = match (min, max) {
            (a, b) if a == b => format!("{a}"),
            (a, usize::MAX) => format!("at least {a}"),
            (a, b) => format!("{a} to {b}"),
        };
        return Err(script_err(format!(
            "expected {expected} arguments, got {}",
            args.len()
        )));
    }
    Ok(())
}

fn num<T: std::str::FromStr>(text: &str) -> Result<T> {
    text.parse()
        .map_err(|_| script_err(format!("`{text}` is not a number")))
}

fn net(text: &str) -> Result<Ipv4Net> {
    text.parse()
        .map_err(|_| script_err(format!("`{text}` is not a prefix")))
}

fn asn_list(text: &str) -> Result<Vec<Asn>> {
    expand_list(text)?.iter().map(|v| num(v)).collect()
}

/// `1,3..5,x` -> `["1", "3", "4", "5", "x"]`.
pub fn expand_list(text: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for part in text.split(',').filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (num(a)?, num(b)?);
                if a > b {
                    return Err(script_err(format!("empty range `{part}`")));
                }
                out.extend((a..=b).map(|v| v.to_string()));
            }
            None => out.push(part.to_string()),
        }
    }
    Ok(out)
}

fn unescape(text: &str) -> String {
    text.replace("\\n", "\n").replace("\\t", "\t")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_expand() {
        assert_eq!(expand_list("1,3..5").unwrap(), ["1", "3", "4", "5"]);
        assert!(expand_list("5..3").is_err());
    }

    #[test]
    fn counts_statements() {
        assert_eq!(statement_count("# c\n\nix 100\n  as 2\n"), 2);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = Scenario::parse("ix 100\n\nbogus 1\n").unwrap_err();
        match err {
            Error::Script { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("bogus"));
            }
            other => panic!("{other:?}"),
        }
        let err = Scenario::parse("ix 100\nix 100\n").unwrap_err();
        assert!(matches!(err, Error::Script { line: 2, .. }));
    }

    #[test]
    fn loops_build_hosts() {
        let s = Scenario::parse(
            "network 150 net0\nrouter 150 r0 net0\nfor i in 0..2 : host 150 h$i net0\n\
             start 150 h1 \"echo hi\"\n",
        )
        .unwrap();
        let mut emu = s.into_emulator().unwrap();
        let r = emu.render().unwrap();
        let asys = r.base().autonomous_system(150).unwrap();
        assert_eq!(asys.hosts().count(), 3);
        assert_eq!(asys.nodes["h1"].start_commands, ["echo hi"]);
        assert_eq!(
            asys.nodes["h2"].interfaces[0].address.to_string(),
            "10.150.0.73"
        );
    }
}
