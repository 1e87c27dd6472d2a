pub struct Placeholder_verify;
