use super::{BinaryOp, Node, TimeExpr, UnaryOp};

pub(super) fn differentiate(e: &TimeExpr) -> TimeExpr {
    match e.node() {
        Node::Const(_) => TimeExpr::zero(),
        Node::Var => TimeExpr::one(),
        Node::Unary(op, g) => {
            let dg = differentiate(g);
            if dg.is_zero() {
                return TimeExpr::zero();
            }
            let g = g.clone();
            match op {
                UnaryOp::Neg => -dg,
                UnaryOp::Sin => g.cos() * dg,
                UnaryOp::Cos => -(g.sin() * dg),
                UnaryOp::Exp => e.clone() * dg,
                UnaryOp::Sqrt => dg / (TimeExpr::real(2.0) * e.clone()),
                // real-valued argument assumed: d|g| = g' g / |g|
                UnaryOp::Abs => dg * g.clone() / g.abs(),
                UnaryOp::Recip => -(dg * g.recip().powi(2)),
            }
        }
        Node::Binary(op, f, g) => {
            let df = differentiate(f);
            let dg = differentiate(g);
            match op {
                BinaryOp::Add => df + dg,
                BinaryOp::Sub => df - dg,
                BinaryOp::Mul => df * g.clone() + f.clone() * dg,
                BinaryOp::Div => {
                    if dg.is_zero() {
                        df / g.clone()
                    } else {
                        (df * g.clone() - f.clone() * dg) / g.clone().powi(2)
                    }
                }
            }
        }
        Node::Pow(b, k) => {
            let db = differentiate(b);
            if db.is_zero() {
                return TimeExpr::zero();
            }
            TimeExpr::real(*k as f64) * b.clone().powi(k - 1) * db
        }
        Node::Piecewise { branches, default } => TimeExpr::piecewise(
            branches
                .iter()
                .map(|(g, e)| (*g, differentiate(e)))
                .collect(),
            differentiate(default),
        ),
    }
}
