pub mod closed_form;
pub mod flow;
pub mod geometry;
pub mod models;
pub mod verify;
