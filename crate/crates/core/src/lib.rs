pub mod checks;
pub mod gale;
pub mod lie;
pub mod monopole;
pub mod quiver;
pub mod series;
