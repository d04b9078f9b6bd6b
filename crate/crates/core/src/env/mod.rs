//! Benchmark environments.

mod corridor;
mod discretize;
mod gridworld;
mod mountain_car;
mod pinball;
mod planar;
mod puddle;
mod rooms;

pub use corridor::{make_corridor, make_s_corridor, CorridorSpec, CorridorWorld};
pub use discretize::{discretize, discretize_local, Discretized};
pub use gridworld::{gridworld_grid, make_gridworld, TabularEnv};
pub use mountain_car::{make_mountain_car, MountainCar, MountainCarSpec};
pub use pinball::{make_pinball, Disc, Pinball, PinballSpec, Polygon};
pub use planar::{AxisBox, StartDistribution, ACTION_EAST, ACTION_NORTH, ACTION_SOUTH, ACTION_WEST};
pub use puddle::{make_puddle_world, Capsule, PuddleSpec, PuddleWorld};
pub use rooms::{make_two_rooms, RoomsSpec, TwoRooms, Wall, WallAxis};
