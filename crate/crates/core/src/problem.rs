//! Source terms and initial temperature of a thermoelastic run.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use evalexpr::{
    build_operator_tree, ContextWithMutableFunctions, ContextWithMutableVariables,
    DefaultNumericTypes, Function, HashMapContext, Node, Value,
};
use serde::{Deserialize, Serialize};

use crate::assembly::{self, LoadVectors};
use crate::grid::Mesh;
use crate::{Error, Result};

pub type VectorFn = Arc<dyn Fn(f64, f64, f64) -> [f64; 2] + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Body force `f(x, y, t)`, heat source `g(x, y, t)` and initial temperature
/// `theta0(x, y)` (called with `t = 0`).
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub f: VectorFn,
    pub g: ScalarFn,
    pub theta0: ScalarFn,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem").field("name", &self.name).finish_non_exhaustive()
    }
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64, f64, f64) -> [f64; 2] + Send + Sync + 'static,
        g: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        theta0: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
            g: Arc::new(g),
            theta0: Arc::new(theta0),
        }
    }

    /// No forcing and zero initial temperature.
    pub fn zero() -> Self {
        Self::new("zero", |_, _, _| [0.0; 2], |_, _, _| 0.0, |_, _, _| 0.0)
    }

    /// `f = 0`, `g = 10`, `theta0 = 500 sin(pi x) sin(pi y)`.
    pub fn test1() -> Self {
        Self::new(
            "test1",
            |_, _, _| [0.0; 2],
            |_, _, _| 10.0,
            |x, y, _| 500.0 * (PI * x).sin() * (PI * y).sin(),
        )
    }

    /// Same data as [`Problem::test1`]; the experiments differ only in the
    /// coefficients.
    pub fn test2() -> Self {
        Self {
            name: "test2".into(),
            ..Self::test1()
        }
    }

    /// Gaussian heat source centred at `(0.2, 0.8)` and a polynomial bump as
    /// initial temperature.
    pub fn test3() -> Self {
        Self::new(
            "test3",
            |_, _, _| [0.0; 2],
            |x, y, _| {
                let r2 = (x - 0.2).powi(2) + (y - 0.8).powi(2);
                10.0 * (-r2 / (2.0 * 0.2 * 0.2)).exp()
            },
            |x, y, _| 1000.0 * x * (1.0 - x) * y * (1.0 - y),
        )
    }

    pub fn from_spec(spec: &ProblemSpec) -> Result<Self> {
        Ok(match spec {
            ProblemSpec::Test1 {} => Self::test1(),
            ProblemSpec::Test2 {} => Self::test2(),
            ProblemSpec::Test3 {} => Self::test3(),
            ProblemSpec::Custom { fx, fy, g, theta0 } => {
                let fx = Expr::parse("fx", fx)?;
                let fy = Expr::parse("fy", fy)?;
                let g = Expr::parse("g", g)?;
                let theta0 = Expr::parse("theta0", theta0)?;
                Self::new(
                    "custom",
                    move |x, y, t| [fx.eval(x, y, t), fy.eval(x, y, t)],
                    move |x, y, t| g.eval(x, y, t),
                    move |x, y, t| theta0.eval(x, y, t),
                )
            }
        })
    }

    pub fn loads(&self, mesh: &Mesh, t: f64) -> LoadVectors {
        assembly::assemble_loads(mesh, &*self.f, &*self.g, t)
    }

    /// Nodal interpolant of `theta0` on the interior nodes.
    pub fn theta0_interpolant(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.interior_nodes
            .iter()
            .map(|&v| {
                let p = mesh.nodes[v];
                (self.theta0)(p[0], p[1], 0.0)
            })
            .collect()
    }
}

/// Serializable selector for a [`Problem`].
///
/// Custom expressions are functions of `x`, `y` and `t` using `+ - * / ^`,
/// the constant `pi` and the functions `sin`, `cos`, `exp`, `sqrt`, `ln`,
/// `abs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    // Empty braces make serde reject unknown keys for these variants too.
    Test1 {},
    Test2 {},
    Test3 {},
    Custom {
        #[serde(default = "zero_expr")]
        fx: String,
        #[serde(default = "zero_expr")]
        fy: String,
        #[serde(default = "zero_expr")]
        g: String,
        #[serde(default = "zero_expr")]
        theta0: String,
    },
}

fn zero_expr() -> String {
    "0".into()
}

/// A compiled expression in `x`, `y`, `t`.
struct Expr {
    tree: Node<DefaultNumericTypes>,
    context: HashMapContext<DefaultNumericTypes>,
}

impl Expr {
    fn parse(name: &str, src: &str) -> Result<Self> {
        let bad = |e: &dyn fmt::Display| Error::Config(format!("expression {name} = {src:?}: {e}"));
        let tree = build_operator_tree::<DefaultNumericTypes>(src).map_err(|e| bad(&e))?;
        let mut context = HashMapContext::<DefaultNumericTypes>::new();
        context.set_value("pi".into(), Value::Float(PI)).map_err(|e| bad(&e))?;
        for (fname, op) in [
            ("sin", f64::sin as fn(f64) -> f64),
            ("cos", f64::cos),
            ("exp", f64::exp),
            ("sqrt", f64::sqrt),
            ("ln", f64::ln),
            ("abs", f64::abs),
        ] {
            let function = Function::new(move |arg: &Value<DefaultNumericTypes>| {
                Ok(Value::Float(op(arg.as_number()?)))
            });
            context.set_function(fname.into(), function).map_err(|e| bad(&e))?;
        }
        let expr = Self { tree, context };
        // Reject unknown identifiers and non-numeric results up front.
        expr.try_eval(0.5, 0.5, 0.0).map_err(|e| bad(&e))?;
        Ok(expr)
    }

    fn try_eval(&self, x: f64, y: f64, t: f64) -> std::result::Result<f64, evalexpr::EvalexprError> {
        let mut ctx = self.context.clone();
        ctx.set_value("x".into(), Value::Float(x))?;
        ctx.set_value("y".into(), Value::Float(y))?;
        ctx.set_value("t".into(), Value::Float(t))?;
        self.tree.eval_number_with_context(&ctx)
    }

    fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        // Parsing already evaluated the expression once; later failures can
        // only come from domain errors, which surface as NaN.
        self.try_eval(x, y, t).unwrap_or(f64::NAN)
    }
}
