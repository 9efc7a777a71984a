//! The compile pipeline as one call, used by the CLI and the tests.

use crate::cps::{analyze_relations, lower_program, ExplicitSystem, SystemRelations};
use crate::dae::{apply_dae, strip_dae_marks};
use crate::frontend::{compile_source, Diagnostics, Program};
use crate::implicit_ir::{build_program, ImplicitProgram};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompileOptions {
    pub entry: Option<String>,
    pub dae: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { entry: None, dae: true }
    }
}

/// Every intermediate form of one compilation.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub ast: Program,
    pub implicit: ImplicitProgram,
    /// The implicit IR after the DAE pass (or with pragmas dropped).
    pub post_dae: ImplicitProgram,
    pub explicit: ExplicitSystem,
    pub relations: SystemRelations,
}

pub fn compile(source: &str, options: &CompileOptions) -> Result<Compiled, Diagnostics> {
    let ast = compile_source(source, options.entry.as_deref())?;
    let implicit = build_program(&ast);
    let post_dae = if options.dae { apply_dae(&implicit).map_err(Diagnostics)? } else { strip_dae_marks(&implicit) };
    let explicit = lower_program(&post_dae).map_err(Diagnostics)?;
    let relations = analyze_relations(&explicit);
    Ok(Compiled { ast, implicit, post_dae, explicit, relations })
}

/// The graph-traversal program used by `bench`.
pub const VISIT_SOURCE: &str = include_str!("../corpus/visit.mc");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn visit_decomposes_into_three_tasks_with_dae() {
        let on = compile(VISIT_SOURCE, &CompileOptions::default()).unwrap();
        let names: Vec<&str> = on.explicit.tasks.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, vec!["visit", "visit__cont0", "visit__access0"]);
        let off = compile(VISIT_SOURCE, &CompileOptions { dae: false, ..Default::default() }).unwrap();
        assert_eq!(off.explicit.tasks.len(), 1);
    }
}
