#include "bgwtilt/tree.hpp"

#include <algorithm>
#include <sstream>

#include "bgwtilt/errors.hpp"

namespace bgwtilt {

namespace {

// Iterative so that deep trees cannot exhaust the call stack.
void encode(const MultitypeTree& t, int r, std::string& out) {
  // (vertex, index of the next child to write); -1 means the vertex itself.
  std::vector<std::pair<int, int>> stack{{0, -1}};
  while (!stack.empty()) {
    auto& [v, next] = stack.back();
    const auto& kids = t.children(v);
    const bool expand = t.node(v).depth < r && !kids.empty();
    if (next == -1) {
      out += std::to_string(t.node(v).type + 1);
      if (!expand) {
        stack.pop_back();
        continue;
      }
      out += '(';
      next = 0;
    }
    if (next == static_cast<int>(kids.size())) {
      out += ')';
      stack.pop_back();
      continue;
    }
    if (next > 0) out += ',';
    const int child = kids[next++];
    stack.emplace_back(child, -1);
  }
}

}  // namespace

MultitypeTree::MultitypeTree(int types, std::vector<TreeNode> preorder)
    : types_(types), nodes_(std::move(preorder)) {
  if (types_ < 1) throw InputError("a tree needs at least one type");
  if (nodes_.empty()) throw InputError("a tree has at least one node");
  kids_.assign(nodes_.size(), {});
  // Open nodes with child slots left; the next node must be a child of the
  // deepest open one.
  std::vector<std::pair<int, int>> open;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    TreeNode& n = nodes_[i];
    if (n.type < 0 || n.type >= types_) throw InputError("node type out of range");
    if (n.children < 0) throw InputError("negative child count");
    if (i == 0) {
      if (n.parent != -1) throw InputError("root must have parent -1");
      n.depth = 0;
    } else {
      while (!open.empty() && open.back().second == 0) open.pop_back();
      if (open.empty() || open.back().first != n.parent)
        throw InputError("records are not a preorder listing (node " + std::to_string(i) + ")");
      --open.back().second;
      n.depth = nodes_[n.parent].depth + 1;
      kids_[n.parent].push_back(static_cast<int>(i));
    }
    open.emplace_back(static_cast<int>(i), n.children);
  }
  for (const auto& [v, left] : open)
    if (left != 0) throw InputError("node " + std::to_string(v) + " is missing children");
}

int MultitypeTree::height() const {
  int h = 0;
  for (const auto& n : nodes_) h = std::max(h, n.depth);
  return h;
}

Counts MultitypeTree::counts() const {
  Counts c(types_, 0);
  for (const auto& n : nodes_) ++c[n.type];
  return c;
}

Counts MultitypeTree::counts_without_root() const {
  Counts c = counts();
  --c[nodes_.front().type];
  return c;
}

std::string MultitypeTree::serialize() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    out << i << ' ' << nodes_[i].parent << ' ' << nodes_[i].type + 1 << '\n';
  return out.str();
}

MultitypeTree MultitypeTree::deserialize(int types, const std::string& text) {
  std::istringstream in(text);
  std::vector<TreeNode> nodes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    long index = 0;
    long parent = 0;
    long type = 0;
    if (!(fields >> index >> parent >> type)) throw InputError("bad tree record: " + line);
    if (index != static_cast<long>(nodes.size())) throw InputError("tree records out of order");
    if (parent >= index || parent < -1) throw InputError("bad parent in record: " + line);
    TreeNode n;
    n.parent = static_cast<int>(parent);
    n.type = static_cast<int>(type - 1);
    if (parent >= 0) ++nodes[parent].children;
    nodes.push_back(n);
  }
  return MultitypeTree(types, std::move(nodes));
}

std::string MultitypeTree::signature() const { return ball(*this, height()); }

std::string ball(const MultitypeTree& tree, int r) {
  if (r < 0) throw InputError("ball radius must be >= 0");
  std::string out;
  encode(tree, r, out);
  return out;
}

}  // namespace bgwtilt
