#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tfhtmm {

using NodeId = std::size_t;

/// One node of a positional tree. Child slots are 0-based positions; an empty
/// optional marks an absent child.
struct Node {
  int label = 0;
  std::vector<std::optional<NodeId>> children;
  std::optional<NodeId> parent;
  /// Slot index of this node inside its parent, -1 for the root.
  int position = -1;
};

/// Immutable rooted tree with categorical labels and positional children.
///
/// Construction validates the structure (single root, reachability, no
/// cycles, consistent parent/position links) and caches the leaf set and a
/// children-before-parent visiting order.
class LabelledTree {
 public:
  LabelledTree(std::vector<Node> nodes, NodeId root, int max_degree,
               int alphabet_size);

  std::size_t size() const noexcept { return nodes_.size(); }
  NodeId root() const noexcept { return root_; }
  int max_degree() const noexcept { return max_degree_; }
  int alphabet_size() const noexcept { return alphabet_size_; }

  const Node& node(NodeId id) const { return nodes_.at(id); }
  int label(NodeId id) const { return nodes_[id].label; }
  std::optional<NodeId> child(NodeId id, int slot) const {
    return nodes_[id].children[static_cast<std::size_t>(slot)];
  }
  bool is_leaf(NodeId id) const noexcept { return occupied_[id] == 0; }
  int occupied_slots(NodeId id) const noexcept { return occupied_[id]; }

  /// Position used to pick the leaf prior: the slot index, or 0 for the root.
  int prior_position(NodeId id) const noexcept {
    return nodes_[id].position < 0 ? 0 : nodes_[id].position;
  }

  /// Leaf node ids in increasing id order.
  const std::vector<NodeId>& leaves() const noexcept { return leaves_; }

  /// Every node appears after all of its children; the root is last.
  const std::vector<NodeId>& bottom_up_order() const noexcept { return order_; }

  std::vector<int> labels() const;

  /// Same structure with new labels (one per node, in node-id order).
  LabelledTree with_labels(const std::vector<int>& labels) const;

  /// Structural and label equality (node ids included).
  friend bool operator==(const LabelledTree& a, const LabelledTree& b);

 private:
  std::vector<Node> nodes_;
  NodeId root_;
  int max_degree_;
  int alphabet_size_;
  std::vector<int> occupied_;
  std::vector<NodeId> leaves_;
  std::vector<NodeId> order_;
};

/// A dataset of i.i.d. trees sharing the out-degree bound L and alphabet M.
struct TreeCorpus {
  int max_degree = 1;
  int alphabet_size = 1;
  std::optional<int> class_count;
  std::map<int, std::string> symbols;
  std::vector<LabelledTree> trees;
  std::optional<std::vector<int>> class_labels;

  /// Throws DomainError/StructureError when a tree or class label breaks the
  /// corpus-level bounds.
  void validate() const;

  /// Number of classes: the declared count, or 1 + largest class label.
  int num_classes() const;

  /// Trees whose class label equals `cls` (requires class labels).
  TreeCorpus select_class(int cls) const;
};

/// Parses the line-based corpus format:
///
///   L=<int> M=<int> [CLASSES=<int>]
///   SYM <int> <string>          (optional, any number)
///   (<label> <slot1> ... <slotL>) [| <class>]
///
/// Each slot is `_` or a nested tree; trailing `_` slots may be omitted.
TreeCorpus parse_corpus(std::string_view text);

/// Canonical text form: trailing empty slots dropped, single spaces.
std::string serialise_corpus(const TreeCorpus& corpus);

/// S-expression for one tree, without class suffix.
std::string serialise_tree(const LabelledTree& tree);

TreeCorpus read_corpus_file(const std::string& path);
void write_corpus_file(const std::string& path, const TreeCorpus& corpus);

/// Leaf ids of `tree` (same as tree.leaves()).
std::vector<NodeId> leaves(const LabelledTree& tree);

/// Children-before-parent order (same as tree.bottom_up_order()).
std::vector<NodeId> bottom_up_order(const LabelledTree& tree);

}  // namespace tfhtmm
