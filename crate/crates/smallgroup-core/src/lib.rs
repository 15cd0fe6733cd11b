//! Finite-depth computations on towers of finite groups and on the dyadic torus:
//! level sets, coordinatization, witness arithmetic, cylinder games and cube families.

pub mod coords;
pub mod game;
pub mod group;
pub mod levels;
pub mod skeleton;
pub mod torus;

pub(crate) fn decimal<S: serde::Serializer>(x: &num_bigint::BigUint, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}
