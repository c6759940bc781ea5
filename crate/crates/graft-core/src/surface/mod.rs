//! Surface language: lexer, AST, parser, printer.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod print;

pub use ast::*;
pub use parser::{parse_program, parse_tree_literal};
pub use print::{print_program, print_stmt_line, print_tree_lit};
