#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "crtforest/tree.hpp"

namespace crt::newick {

/// Serializes a tree on one line, terminated by ';'. Leaves are named L<label>
/// and internal vertices I<label>; every vertex carries ":length" with 17
/// significant digits, the root ":0". Child order is preserved.
std::string write(const Tree& tree);

/// Parses one tree. Names of the form L<digits> or I<digits> set the vertex
/// label; other vertices get their preorder index. Unary vertices are
/// accepted. Every non-root vertex needs a length; the root may omit it or
/// give 0. Throws ParseError with the position of the problem, including
/// non-positive or non-finite lengths.
Tree parse(std::string_view text);

/// One tree per line; blank lines and lines starting with '#' are skipped.
/// ParseError line numbers refer to the input.
std::vector<Tree> parse_many(std::istream& in);

}  // namespace crt::newick
