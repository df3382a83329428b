#include <gtest/gtest.h>

#include "bgwtilt/errors.hpp"
#include "bgwtilt/tree.hpp"

using namespace bgwtilt;

namespace {

// 1 -> (2, 1 -> (2)), types 0-based internally.
MultitypeTree small() {
  return MultitypeTree(2, {{-1, 0, 2, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {2, 1, 0, 0}});
}

}  // namespace

TEST(Tree, Structure) {
  const MultitypeTree t = small();
  EXPECT_EQ(t.size(), 4);
  EXPECT_EQ(t.height(), 2);
  EXPECT_EQ(t.children(0), (std::vector<int>{1, 2}));
  EXPECT_EQ(t.node(3).depth, 2);
  EXPECT_EQ(t.counts(), (Counts{2, 2}));
  EXPECT_EQ(t.counts_without_root(), (Counts{1, 2}));
}

TEST(Tree, Signature) {
  EXPECT_EQ(small().signature(), "1(2,1(2))");
  EXPECT_EQ(ball(small(), 0), "1");
  EXPECT_EQ(ball(small(), 1), "1(2,1)");
  EXPECT_EQ(ball(small(), 5), "1(2,1(2))");
  EXPECT_THROW(ball(small(), -1), InputError);
}

TEST(Tree, SerializeRoundTrip) {
  const MultitypeTree t = small();
  EXPECT_EQ(t.serialize(), "0 -1 1\n1 0 2\n2 0 1\n3 2 2\n");
  EXPECT_EQ(MultitypeTree::deserialize(2, t.serialize()), t);
}

TEST(Tree, RejectsBadRecords) {
  EXPECT_THROW(MultitypeTree(2, {}), InputError);
  EXPECT_THROW(MultitypeTree(2, {{0, 0, 0, 0}}), InputError);                  // root with a parent
  EXPECT_THROW(MultitypeTree(2, {{-1, 0, 2, 0}, {0, 1, 0, 0}}), InputError);   // missing child
  EXPECT_THROW(MultitypeTree(2, {{-1, 5, 0, 0}}), InputError);                 // bad type
  EXPECT_THROW(MultitypeTree(2, {{-1, 0, 1, 0}, {0, 0, 1, 0}, {0, 0, 0, 0}}), InputError);  // not preorder
  EXPECT_THROW(MultitypeTree::deserialize(2, "0 -1 1\n2 0 1\n"), InputError);
  EXPECT_THROW(MultitypeTree::deserialize(2, "0 -1 x\n"), InputError);
}

TEST(Tree, DeepChainDoesNotRecurse) {
  std::vector<TreeNode> nodes;
  const int n = 200000;
  for (int i = 0; i < n; ++i) nodes.push_back({i - 1, 0, i + 1 < n ? 1 : 0, 0});
  const MultitypeTree t(1, std::move(nodes));
  EXPECT_EQ(t.height(), n - 1);
  EXPECT_EQ(t.signature().size(), static_cast<std::size_t>(n + 2 * (n - 1)));
}
