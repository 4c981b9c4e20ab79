//! Point-cloud registration and cost-aware motion planning for a robotic
//! welding cell. See the guide in `book/` for a tour.

pub mod geometry;
pub mod perception;
pub mod kinematics;
pub mod scene;
pub mod cost;
pub mod planners;
pub mod workcell;

/// The guide's code listings, compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/perception.md")]
    mod perception {}
    #[doc = include_str!("../../../book/src/kinematics.md")]
    mod kinematics {}
    #[doc = include_str!("../../../book/src/scene.md")]
    mod scene {}
    #[doc = include_str!("../../../book/src/planning.md")]
    mod planning {}
    #[doc = include_str!("../../../book/src/cost.md")]
    mod cost {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
