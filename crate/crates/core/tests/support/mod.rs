pub mod bird;
pub mod oracle;
pub mod zonewalk;
