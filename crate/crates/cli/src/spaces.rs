//! Named spaces for `verify`.
//!
//! ```text
//! class[:l1,l2,...]      conjugacy class (complex eigenvalues such as 0.3+0.8i)
//! double:N               the double D of GL_N
//! fused-double:N         the internally fused double of GL_N
//! fission:s1,s2,...:r    fission space for the block sizes, r factors each way
//! vdb:dv,dw              Van den Bergh space B(V, W)
//! stokes                 A(Q) for the irregular type in --input
//! stokes-two-level       A(Q) for a fixed two-level GL_3 type
//! scaled:s:NAME          NAME with its two-form multiplied by s
//! ```

use stokes_core::irregular::{IrregularType, Term};
use stokes_core::lie::BlockGrading;
use stokes_core::linalg::{c, C};
use stokes_core::qh::{ConjugacyClass, InternallyFusedDouble, QhSpace, ScaledForm, UnipotentList, VanDenBergh};

use crate::config::CliError;

pub fn two_level() -> IrregularType {
    let re = |v: &[f64]| v.iter().map(|&x| c(x, 0.0)).collect();
    IrregularType::new(3, vec![Term { k: 2, a: re(&[1.0, 1.0, -2.0]) }, Term { k: 1, a: re(&[0.0, 1.0, 3.0]) }])
        .expect("valid two-level type")
}

/// The default menu.
pub fn default_menu() -> Vec<String> {
    let mut m = vec!["class".to_string(), "double:2".into(), "fused-double:2".into()];
    for g in ["1,1", "2,1"] {
        for r in 1..=3 {
            m.push(format!("fission:{}:{}", g, r));
        }
    }
    m.extend(["vdb:1,1", "vdb:2,1", "vdb:2,2", "stokes-two-level"].map(String::from));
    m
}

fn bad(name: &str, why: &str) -> CliError {
    CliError::Input(format!("--space {:?}: {}", name, why))
}

fn list<T: std::str::FromStr>(name: &str, s: &str) -> Result<Vec<T>, CliError> {
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad(name, &format!("cannot parse {:?}", x)))).collect()
}

fn size(name: &str, s: &str) -> Result<usize, CliError> {
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(bad(name, "expected a positive size")),
    }
}

pub fn build(name: &str, input: Option<&IrregularType>) -> Result<Box<dyn QhSpace>, CliError> {
    let (head, rest) = match name.split_once(':') {
        Some((h, r)) => (h, Some(r)),
        None => (name, None),
    };
    let arg = || rest.ok_or_else(|| bad(name, "missing parameters"));
    Ok(match head {
        "class" => {
            let eig: Vec<C> = match rest {
                Some(r) => list(name, r)?,
                None => vec![c(1.0, 0.0), c(0.3, 0.8), c(-1.2, 0.4)],
            };
            Box::new(ConjugacyClass::new(eig))
        }
        "double" => Box::new(UnipotentList::double(size(name, arg()?)?)),
        "fused-double" => Box::new(InternallyFusedDouble { n: size(name, arg()?)? }),
        "fission" => {
            let (sizes, r) = arg()?.rsplit_once(':').ok_or_else(|| bad(name, "expected fission:sizes:r"))?;
            let grading = BlockGrading::new(list(name, sizes)?).map_err(CliError::from)?;
            Box::new(UnipotentList::fission(&grading, size(name, r)?))
        }
        "vdb" => {
            let d: Vec<usize> = list(name, arg()?)?;
            if d.len() != 2 || d.contains(&0) {
                return Err(bad(name, "expected vdb:dv,dw"));
            }
            Box::new(VanDenBergh { dv: d[0], dw: d[1] })
        }
        "stokes" => {
            let q = input.ok_or_else(|| bad(name, "needs an irregular type in --input"))?;
            Box::new(UnipotentList::stokes_space(q))
        }
        "stokes-two-level" => Box::new(UnipotentList::stokes_space(&two_level())),
        "scaled" => {
            let (s, inner) = arg()?.split_once(':').ok_or_else(|| bad(name, "expected scaled:s:NAME"))?;
            let scale: f64 = s.parse().map_err(|_| bad(name, "bad scale"))?;
            Box::new(ScaledForm { inner: build(inner, input)?, scale })
        }
        _ => return Err(bad(name, "unknown space")),
    })
}
