pub struct Placeholder_io;
