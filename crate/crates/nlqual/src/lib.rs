pub mod error;
pub mod expr;
pub mod kkt;
pub mod model;
pub mod penalty;
pub mod proxsolve;
pub mod rational;
pub mod qualify;
pub mod subdiff;
pub mod setalg;
