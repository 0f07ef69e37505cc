//! Plain-text manipulator descriptions.
//!
//! ```text
//! # comment
//! root_bounds xlo xhi ylo yhi zlo zhi
//! link upper parent - origin 0 0 0 a 0 0 0 b 0 0 0.3 radius 0.05 joint ball limits -1 1 -1 1 -1 1
//! link fore parent upper origin 0 0 0.3 a 0 0 0 b 0 0 0.27 radius 0.04 joint hinge axis 1 0 0 limits 0 2.4
//! spheres auto
//! ```
//!
//! Instead of `spheres auto`, explicit `sphere <link> <t> [leading]` lines place a sphere
//! at fraction `t` along a link's medial segment.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::chain::{JointKind, KinematicChain, Link};
use super::layout::{HapticSphere, HapticSphereLayout};
use crate::error::ManipulatorError;
use crate::geom::Vec3;

/// A chain with its haptic-sphere layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Manipulator {
    pub chain: KinematicChain,
    pub layout: HapticSphereLayout,
}

fn perr(line: usize, detail: impl Into<String>) -> ManipulatorError {
    ManipulatorError::Parse { line, detail: detail.into() }
}

struct Tokens<'a> {
    items: Vec<&'a str>,
    pos: usize,
    line: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str, ManipulatorError> {
        let t = self.items.get(self.pos).copied().ok_or_else(|| perr(self.line, format!("missing {what}")))?;
        self.pos += 1;
        Ok(t)
    }

    fn num(&mut self, what: &str) -> Result<f64, ManipulatorError> {
        let t = self.next(what)?;
        t.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| perr(self.line, format!("bad number `{t}` for {what}")))
    }

    fn vec3(&mut self, what: &str) -> Result<Vec3, ManipulatorError> {
        Ok(Vec3::new(self.num(what)?, self.num(what)?, self.num(what)?))
    }

    fn expect(&mut self, key: &str) -> Result<(), ManipulatorError> {
        let t = self.next(key)?;
        if t == key {
            Ok(())
        } else {
            Err(perr(self.line, format!("expected `{key}`, found `{t}`")))
        }
    }

    fn done(&self) -> Result<(), ManipulatorError> {
        match self.items.get(self.pos) {
            None => Ok(()),
            Some(t) => Err(perr(self.line, format!("unexpected `{t}`"))),
        }
    }
}

fn parse_link(t: &mut Tokens<'_>, names: &[String]) -> Result<Link, ManipulatorError> {
    let name = t.next("link name")?.to_string();
    if names.contains(&name) {
        return Err(perr(t.line, format!("duplicate link {name}")));
    }
    t.expect("parent")?;
    let parent = match t.next("parent")? {
        "-" => None,
        p => Some(names.iter().position(|n| n == p).ok_or_else(|| perr(t.line, format!("unknown parent {p}")))?),
    };
    t.expect("origin")?;
    let origin = t.vec3("origin")?;
    t.expect("a")?;
    let a = t.vec3("a")?;
    t.expect("b")?;
    let b = t.vec3("b")?;
    t.expect("radius")?;
    let radius = t.num("radius")?;
    t.expect("joint")?;
    let joint = match t.next("joint type")? {
        "hinge" => {
            t.expect("axis")?;
            JointKind::Hinge { axis: t.vec3("axis")? }
        }
        "ball" => JointKind::Ball,
        other => return Err(perr(t.line, format!("unknown joint type {other}"))),
    };
    t.expect("limits")?;
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    for _ in 0..joint.dofs() {
        lo.push(t.num("limit")?);
        hi.push(t.num("limit")?);
    }
    t.done()?;
    Ok(Link { name, parent, origin, joint, lo, hi, a, b, radius })
}

pub fn parse_manipulator(text: &str) -> Result<Manipulator, ManipulatorError> {
    let mut bounds = None;
    let mut links: Vec<Link> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut auto = false;
    let mut spheres: Vec<(usize, String, f64, bool)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let items: Vec<&str> = line.split_whitespace().collect();
        if items.is_empty() {
            continue;
        }
        let mut t = Tokens { items, pos: 1, line: ln + 1 };
        match t.items[0] {
            "root_bounds" => {
                let mut v = [0.0; 6];
                for x in v.iter_mut() {
                    *x = t.num("root bound")?;
                }
                t.done()?;
                bounds = Some((Vec3::new(v[0], v[2], v[4]), Vec3::new(v[1], v[3], v[5])));
            }
            "link" => {
                let l = parse_link(&mut t, &names)?;
                names.push(l.name.clone());
                links.push(l);
            }
            "spheres" => {
                t.expect("auto")?;
                t.done()?;
                auto = true;
            }
            "sphere" => {
                let link = t.next("sphere link")?.to_string();
                let frac = t.num("sphere position")?;
                let leading = match t.items.get(t.pos) {
                    Some(&"leading") => {
                        t.pos += 1;
                        true
                    }
                    _ => false,
                };
                t.done()?;
                if !(0.0..=1.0).contains(&frac) {
                    return Err(perr(ln + 1, "sphere position must lie in [0, 1]"));
                }
                spheres.push((ln + 1, link, frac, leading));
            }
            other => return Err(perr(ln + 1, format!("unknown record {other}"))),
        }
    }
    let (lo, hi) = bounds.ok_or_else(|| perr(0, "missing root_bounds"))?;
    let chain = KinematicChain::new(links, lo, hi)?;
    let layout = if auto {
        if !spheres.is_empty() {
            return Err(perr(spheres[0].0, "explicit spheres conflict with `spheres auto`"));
        }
        HapticSphereLayout::auto(&chain)
    } else {
        let mut list = Vec::with_capacity(spheres.len());
        for (line, name, frac, leading) in spheres {
            let i = names.iter().position(|n| *n == name).ok_or_else(|| perr(line, format!("unknown link {name}")))?;
            let l = &chain.links[i];
            list.push(HapticSphere { link: i, local: l.a.lerp(l.b, frac), leading });
        }
        HapticSphereLayout::new(&chain, list)?
    };
    Ok(Manipulator { chain, layout })
}

pub fn read_manipulator(path: &Path) -> Result<Manipulator, ManipulatorError> {
    let text = fs::read_to_string(path).map_err(|source| ManipulatorError::Io { path: path.to_path_buf(), source })?;
    parse_manipulator(&text)
}

/// Serializes with explicit sphere lines.
pub fn write_manipulator(m: &Manipulator) -> String {
    let c = &m.chain;
    let v = |p: Vec3| format!("{} {} {}", p.x, p.y, p.z);
    let mut s = format!(
        "root_bounds {} {} {} {} {} {}\n",
        c.root_lo.x, c.root_hi.x, c.root_lo.y, c.root_hi.y, c.root_lo.z, c.root_hi.z
    );
    for l in &c.links {
        let parent = l.parent.map(|p| c.links[p].name.clone()).unwrap_or_else(|| "-".into());
        let joint = match l.joint {
            JointKind::Hinge { axis } => format!("hinge axis {}", v(axis)),
            JointKind::Ball => "ball".into(),
        };
        let limits: Vec<String> = l.lo.iter().zip(&l.hi).map(|(a, b)| format!("{a} {b}")).collect();
        let _ = writeln!(
            s,
            "link {} parent {parent} origin {} a {} b {} radius {} joint {joint} limits {}",
            l.name,
            v(l.origin),
            v(l.a),
            v(l.b),
            l.radius,
            limits.join(" ")
        );
    }
    for sp in &m.layout.spheres {
        let l = &c.links[sp.link];
        let seg = l.b - l.a;
        let t = if seg.norm_squared() > 0.0 { (sp.local - l.a).dot(seg) / seg.norm_squared() } else { 0.0 };
        let _ = writeln!(s, "sphere {} {t}{}", l.name, if sp.leading { " leading" } else { "" });
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(name: &str) -> std::path::PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
    }

    /// Rest-pose sphere centres from a golden file: one `x y z` line per sphere.
    fn golden(name: &str) -> Vec<Vec3> {
        fs::read_to_string(data(name))
            .unwrap()
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|l| {
                let v: Vec<f64> = l.split_whitespace().map(|t| t.parse().unwrap()).collect();
                Vec3::new(v[0], v[1], v[2])
            })
            .collect()
    }

    #[test]
    fn golden_rest_poses() {
        for (file, gold) in [("arm.manip", "arm_rest_spheres.txt"), ("leg.manip", "leg_rest_spheres.txt"), ("sphere.manip", "sphere_rest_spheres.txt")] {
            let m = read_manipulator(&data(file)).unwrap();
            let pose = m.chain.forward_kinematics(&vec![0.0; m.chain.num_dofs()]);
            let got = m.layout.centers(&m.chain, &pose);
            let want = golden(gold);
            assert_eq!(got.len(), want.len(), "{file}");
            for (g, w) in got.iter().zip(&want) {
                assert!(g.distance(*w) < 1e-12, "{file}: {g:?} vs {w:?}");
            }
        }
    }

    #[test]
    fn round_trip() {
        let m = read_manipulator(&data("arm.manip")).unwrap();
        let back = parse_manipulator(&write_manipulator(&m)).unwrap();
        assert_eq!(back.chain.links, m.chain.links);
        for (a, b) in back.layout.spheres.iter().zip(&m.layout.spheres) {
            assert_eq!((a.link, a.leading), (b.link, b.leading));
            assert!(a.local.distance(b.local) < 1e-12);
        }
    }

    #[test]
    fn parse_errors_name_the_line() {
        let base = "root_bounds 0 0 0 0 0 0\nlink a parent - origin 0 0 0 a 0 0 0 b 0 0 1 radius 0.1 joint hinge axis 1 0 0 limits -1 1\n";
        assert!(parse_manipulator(&format!("{base}spheres auto\n")).is_ok());
        let cases = [
            (format!("{base}sphere a 0.5\n"), None),
            (format!("{base}sphere b 0.5 leading\n"), Some(3)),
            (format!("{base}wobble\n"), Some(3)),
            (format!("{base}link c parent zz origin 0 0 0 a 0 0 0 b 0 0 1 radius 0.1 joint ball limits 0 1 0 1 0 1\n"), Some(3)),
            (format!("{base}link c parent a origin 0 0 0 a 0 0 0 b 0 0 1 radius 0.1 joint ball limits 0 1 0 1\n"), Some(3)),
            ("link a parent - origin 0 0 x\n".to_string(), Some(1)),
        ];
        for (text, line) in cases {
            match parse_manipulator(&text) {
                Err(ManipulatorError::Parse { line: l, .. }) => assert_eq!(Some(l), line, "{text}"),
                Err(ManipulatorError::Invalid(_)) => assert!(line.is_none(), "{text}"),
                other => panic!("expected error for {text}: {other:?}"),
            }
        }
    }
}
