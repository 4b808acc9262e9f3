#include "crtforest/newick.hpp"

#include <charconv>
#include <cmath>
#include <utility>

#include "crtforest/errors.hpp"

namespace crt::newick {

namespace {

void append_length(std::string& out, double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  out.push_back(':');
  out.append(buf, res.ptr);
}

void append_name(std::string& out, const Tree& tree, Tree::Vertex v) {
  out.push_back(tree.is_leaf(v) ? 'L' : 'I');
  out += std::to_string(tree.label(v));
}

class Parser {
 public:
  Parser(std::string_view text, std::size_t line) : text_(text), line_(line) {}

  Tree run() {
    skip_space();
    TreeBuilder builder;
    // Each frame is a vertex whose child list is open.
    std::vector<TreeBuilder::Handle> open;
    if (peek() == '(') {
      ++pos_;
      open.push_back(builder.root());
      start_child(builder, open);
    } else {
      finish_vertex(builder, builder.root(), true);
    }
    while (!open.empty()) {
      skip_space();
      const char c = peek();
      if (c == ',') {
        ++pos_;
        start_child(builder, open);
      } else if (c == ')') {
        ++pos_;
        const auto v = open.back();
        open.pop_back();
        finish_vertex(builder, v, open.empty());
      } else {
        fail(c == '\0' ? "unexpected end of input" : "expected ',' or ')'");
      }
    }
    skip_space();
    if (peek() != ';') fail("expected ';'");
    ++pos_;
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters after ';'");
    return builder.build();
  }

 private:
  // Opens a child of open.back(): either a nested list or a leaf.
  void start_child(TreeBuilder& builder, std::vector<TreeBuilder::Handle>& open) {
    for (;;) {
      skip_space();
      const auto child = builder.add_child(open.back(), 0.0);
      if (peek() != '(') {
        finish_vertex(builder, child, false);
        return;
      }
      ++pos_;
      open.push_back(child);
    }
  }

  void finish_vertex(TreeBuilder& builder, TreeBuilder::Handle v, bool is_root) {
    skip_space();
    const std::size_t name_start = pos_;
    while (pos_ < text_.size() && !is_delimiter(text_[pos_])) ++pos_;
    const std::string_view name = text_.substr(name_start, pos_ - name_start);
    if (name.size() > 1 && (name[0] == 'L' || name[0] == 'I')) {
      std::uint64_t label = 0;
      const auto res = std::from_chars(name.data() + 1, name.data() + name.size(), label);
      if (res.ec == std::errc() && res.ptr == name.data() + name.size()) builder.set_label(v, label);
    }
    skip_space();
    if (peek() == ':') {
      ++pos_;
      skip_space();
      const std::size_t num_start = pos_;
      while (pos_ < text_.size() && !is_delimiter(text_[pos_])) ++pos_;
      double length = 0.0;
      const char* first = text_.data() + num_start;
      const char* last = text_.data() + pos_;
      const auto res = std::from_chars(first, last, length);
      if (res.ec != std::errc() || res.ptr != last || first == last) {
        pos_ = num_start;
        fail("malformed branch length");
      }
      if (is_root) {
        if (length != 0.0) {
          pos_ = num_start;
          fail("root branch length must be 0");
        }
      } else {
        if (!(length > 0.0) || !std::isfinite(length)) {
          pos_ = num_start;
          fail("branch length must be positive and finite");
        }
        builder.set_length(v, length);
      }
    } else if (!is_root) {
      fail("missing branch length");
    }
  }

  static bool is_delimiter(char c) {
    return c == '(' || c == ')' || c == ',' || c == ':' || c == ';' || c == ' ' || c == '\t' ||
           c == '\r' || c == '\n';
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_space() {
    while (pos_ < text_.size() &&
           (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\r' || text_[pos_] == '\n')) {
      ++pos_;
    }
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line_, pos_); }

  std::string_view text_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string write(const Tree& tree) {
  std::string out;
  out.reserve(tree.size() * 24);
  // (vertex, index of the next child to emit)
  std::vector<std::pair<Tree::Vertex, std::uint32_t>> stack{{tree.root(), 0}};
  if (!tree.is_leaf(tree.root())) out.push_back('(');
  while (!stack.empty()) {
    auto& [v, next] = stack.back();
    const auto kids = tree.children(v);
    if (next < kids.size()) {
      if (next > 0) out.push_back(',');
      const auto c = kids[next++];
      if (tree.is_leaf(c)) {
        append_name(out, tree, c);
        append_length(out, tree.length(c));
      } else {
        out.push_back('(');
        stack.emplace_back(c, 0);
      }
      continue;
    }
    const Tree::Vertex done = v;
    stack.pop_back();
    if (!kids.empty()) out.push_back(')');
    append_name(out, tree, done);
    append_length(out, tree.length(done));
  }
  out.push_back(';');
  return out;
}

Tree parse(std::string_view text) { return Parser(text, 0).run(); }

std::vector<Tree> parse_many(std::istream& in) {
  std::vector<Tree> trees;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    trees.push_back(Parser(line, number).run());
  }
  return trees;
}

}  // namespace crt::newick
