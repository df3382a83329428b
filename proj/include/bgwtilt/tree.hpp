#pragma once

// Rooted plane trees with type labels, stored in depth-first preorder.

#include <string>
#include <vector>

#include "bgwtilt/family.hpp"

namespace bgwtilt {

struct TreeNode {
  int parent = -1;  // -1 for the root
  int type = 0;     // 0-based
  int children = 0;
  int depth = 0;
  bool operator==(const TreeNode&) const = default;
};

class MultitypeTree {
 public:
  // `preorder` gives parent, type and child count per node; depths are
  // recomputed. Throws InputError unless the records form a preorder listing.
  MultitypeTree(int types, std::vector<TreeNode> preorder);

  int types() const { return types_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const TreeNode& node(int i) const { return nodes_.at(i); }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const std::vector<int>& children(int i) const { return kids_.at(i); }
  int height() const;

  Counts counts() const;               // N(T), root included
  Counts counts_without_root() const;  // N~(T)

  // One "index parent type" record per line, 1-based types, root parent -1.
  std::string serialize() const;
  static MultitypeTree deserialize(int types, const std::string& text);

  // Parenthesized preorder encoding of the whole tree, e.g. "1(2,1(2))".
  std::string signature() const;

  bool operator==(const MultitypeTree& other) const {
    return types_ == other.types_ && nodes_ == other.nodes_;
  }

 private:
  int types_ = 0;
  std::vector<TreeNode> nodes_;
  std::vector<std::vector<int>> kids_;
};

// Typed plane ball of radius r around the root; vertices at depth r are
// written without their children.
std::string ball(const MultitypeTree& tree, int r);

}  // namespace bgwtilt
