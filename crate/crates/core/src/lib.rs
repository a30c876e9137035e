//! Railway network modelling, timetable verification and virtual
//! subsection layout design for hybrid train detection.

pub mod control;
pub mod design;
pub mod error;
pub mod io;
pub mod kinematics;
pub mod network;
pub mod operator;
pub mod reduction;
pub mod render;
pub mod report;
pub mod sections;
pub mod solver;
pub mod timetable;

pub use error::{Error, Result};
