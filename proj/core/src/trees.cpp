#include "tfhtmm/trees.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include "tfhtmm/errors.hpp"
#include "tfhtmm/io.hpp"

namespace tfhtmm {

LabelledTree::LabelledTree(std::vector<Node> nodes, NodeId root, int max_degree,
                           int alphabet_size)
    : nodes_(std::move(nodes)),
      root_(root),
      max_degree_(max_degree),
      alphabet_size_(alphabet_size) {
  if (max_degree_ < 1) throw DomainError("max out-degree L must be >= 1");
  if (alphabet_size_ < 1) throw DomainError("alphabet size M must be >= 1");
  if (nodes_.empty()) throw StructureError("tree has no nodes");
  if (root_ >= nodes_.size()) throw StructureError("root id out of range");
  const std::size_t n = nodes_.size();

  std::size_t roots = 0;
  for (NodeId id = 0; id < n; ++id) {
    const Node& nd = nodes_[id];
    if (nd.label < 0 || nd.label >= alphabet_size_)
      throw DomainError("node " + std::to_string(id) + " label " +
                        std::to_string(nd.label) + " outside [0, " +
                        std::to_string(alphabet_size_) + ")");
    if (nd.children.size() > static_cast<std::size_t>(max_degree_))
      throw DomainError("node " + std::to_string(id) + " has more than L=" +
                        std::to_string(max_degree_) + " child slots");
    if (!nd.parent) ++roots;
  }
  if (roots != 1) throw StructureError("tree must have exactly one root");
  if (nodes_[root_].parent) throw StructureError("declared root has a parent");

  for (auto& nd : nodes_) nd.children.resize(static_cast<std::size_t>(max_degree_));
  nodes_[root_].position = -1;

  occupied_.assign(n, 0);
  for (NodeId id = 0; id < n; ++id) {
    for (int slot = 0; slot < max_degree_; ++slot) {
      const auto c = nodes_[id].children[static_cast<std::size_t>(slot)];
      if (!c) continue;
      if (*c >= n) throw StructureError("child id out of range");
      const Node& ch = nodes_[*c];
      if (ch.parent != id || ch.position != slot)
        throw StructureError("node " + std::to_string(*c) +
                             " parent/position link disagrees with slot " +
                             std::to_string(slot) + " of node " + std::to_string(id));
      ++occupied_[id];
    }
  }

  // Iterative DFS from the root; a visited-twice node means a cycle or a
  // shared child, an unvisited node means an orphan.
  std::vector<char> seen(n, 0);
  std::vector<std::pair<NodeId, int>> stack{{root_, 0}};
  order_.reserve(n);
  seen[root_] = 1;
  while (!stack.empty()) {
    auto& [id, slot] = stack.back();
    if (slot == max_degree_) {
      order_.push_back(id);
      stack.pop_back();
      continue;
    }
    const auto c = nodes_[id].children[static_cast<std::size_t>(slot++)];
    if (!c) continue;
    if (seen[*c]) throw StructureError("cycle or shared child at node " + std::to_string(*c));
    seen[*c] = 1;
    stack.emplace_back(*c, 0);
  }
  if (order_.size() != n) throw StructureError("tree has nodes unreachable from the root");

  for (NodeId id = 0; id < n; ++id)
    if (occupied_[id] == 0) leaves_.push_back(id);
}

std::vector<int> LabelledTree::labels() const {
  std::vector<int> out(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) out[i] = nodes_[i].label;
  return out;
}

LabelledTree LabelledTree::with_labels(const std::vector<int>& labels) const {
  if (labels.size() != nodes_.size()) throw DomainError("label count differs from node count");
  auto nodes = nodes_;
  for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i].label = labels[i];
  return LabelledTree(std::move(nodes), root_, max_degree_, alphabet_size_);
}

bool operator==(const LabelledTree& a, const LabelledTree& b) {
  if (a.root_ != b.root_ || a.max_degree_ != b.max_degree_ || a.nodes_.size() != b.nodes_.size())
    return false;
  for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
    const Node& x = a.nodes_[i];
    const Node& y = b.nodes_[i];
    if (x.label != y.label || x.children != y.children || x.parent != y.parent ||
        x.position != y.position)
      return false;
  }
  return true;
}

void TreeCorpus::validate() const {
  if (max_degree < 1) throw DomainError("corpus L must be >= 1");
  if (alphabet_size < 1) throw DomainError("corpus M must be >= 1");
  for (const auto& t : trees) {
    if (t.max_degree() != max_degree || t.alphabet_size() != alphabet_size)
      throw DomainError("tree bounds differ from corpus L/M");
  }
  if (class_labels) {
    if (class_labels->size() != trees.size())
      throw StructureError("class label count differs from tree count");
    for (int c : *class_labels) {
      if (c < 0) throw DomainError("negative class label");
      if (class_count && c >= *class_count)
        throw DomainError("class label " + std::to_string(c) + " >= CLASSES=" +
                          std::to_string(*class_count));
    }
  }
}

int TreeCorpus::num_classes() const {
  if (class_count) return *class_count;
  if (!class_labels || class_labels->empty()) return 1;
  return *std::max_element(class_labels->begin(), class_labels->end()) + 1;
}

TreeCorpus TreeCorpus::select_class(int cls) const {
  if (!class_labels) throw ConfigError("corpus has no class labels");
  TreeCorpus out;
  out.max_degree = max_degree;
  out.alphabet_size = alphabet_size;
  out.symbols = symbols;
  for (std::size_t i = 0; i < trees.size(); ++i)
    if ((*class_labels)[i] == cls) out.trees.push_back(trees[i]);
  return out;
}

namespace {

class LineParser {
 public:
  LineParser(std::string_view text, std::size_t line_no, int max_degree, int alphabet)
      : text_(text), line_(line_no), max_degree_(max_degree), alphabet_(alphabet) {}

  LabelledTree parse_tree() {
    skip_ws();
    const NodeId root = parse_node(std::nullopt, -1);
    return LabelledTree(std::move(nodes_), root, max_degree_, alphabet_);
  }

  std::size_t pos() const { return pos_; }
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(line_, what + " at column " + std::to_string(pos_ + 1));
  }

  void expect(char c) {
    skip_ws();
    if (pos_ >= text_.size() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  int parse_int() {
    skip_ws();
    int value = 0;
    const char* first = text_.data() + pos_;
    const char* last = text_.data() + text_.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr == first) fail("expected integer label");
    pos_ += static_cast<std::size_t>(ptr - first);
    return value;
  }

  NodeId parse_node(std::optional<NodeId> parent, int position) {
    expect('(');
    const NodeId id = nodes_.size();
    nodes_.emplace_back();
    const int label = parse_int();
    if (label < 0 || label >= alphabet_)
      throw DomainError("line " + std::to_string(line_) + ": label " + std::to_string(label) +
                        " outside [0, " + std::to_string(alphabet_) + ")");
    nodes_[id].label = label;
    nodes_[id].parent = parent;
    nodes_[id].position = position;
    nodes_[id].children.assign(static_cast<std::size_t>(max_degree_), std::nullopt);
    int slot = 0;
    for (;;) {
      skip_ws();
      if (pos_ >= text_.size()) fail("unterminated tree");
      const char c = text_[pos_];
      if (c == ')') {
        ++pos_;
        break;
      }
      if (slot >= max_degree_)
        throw DomainError("line " + std::to_string(line_) + ": slot " + std::to_string(slot + 1) +
                          " exceeds L=" + std::to_string(max_degree_));
      if (c == '_') {
        ++pos_;
      } else if (c == '(') {
        const NodeId child = parse_node(id, slot);
        nodes_[id].children[static_cast<std::size_t>(slot)] = child;
      } else {
        fail(std::string("unexpected character '") + c + "'");
      }
      ++slot;
    }
    return id;
  }

  std::string_view text_;
  std::size_t line_;
  std::size_t pos_ = 0;
  int max_degree_;
  int alphabet_;
  std::vector<Node> nodes_;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

int parse_header_int(std::string_view value, std::size_t line, std::string_view key) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ParseError(line, "bad value for " + std::string(key));
  return out;
}

void serialise_node(const LabelledTree& t, NodeId id, std::string& out) {
  out += '(';
  out += std::to_string(t.label(id));
  int last = -1;
  for (int s = 0; s < t.max_degree(); ++s)
    if (t.child(id, s)) last = s;
  for (int s = 0; s <= last; ++s) {
    out += ' ';
    if (const auto c = t.child(id, s))
      serialise_node(t, *c, out);
    else
      out += '_';
  }
  out += ')';
}

}  // namespace

TreeCorpus parse_corpus(std::string_view text) {
  TreeCorpus corpus;
  bool have_header = false;
  bool any_class = false;
  bool any_unclassed = false;
  std::vector<int> classes;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = trim(text.substr(start, end - start));
    ++line_no;
    start = end + 1;
    if (line.empty() || line.front() == '#') {
      if (end == text.size()) break;
      continue;
    }

    if (!have_header) {
      bool have_l = false, have_m = false;
      std::istringstream ss{std::string(line)};
      std::string tok;
      while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw ParseError(line_no, "bad header token '" + tok + "'");
        const std::string key = tok.substr(0, eq);
        const std::string_view val = std::string_view(tok).substr(eq + 1);
        if (key == "L") {
          corpus.max_degree = parse_header_int(val, line_no, key);
          have_l = true;
        } else if (key == "M") {
          corpus.alphabet_size = parse_header_int(val, line_no, key);
          have_m = true;
        } else if (key == "CLASSES") {
          corpus.class_count = parse_header_int(val, line_no, key);
        } else {
          throw ParseError(line_no, "unknown header key '" + key + "'");
        }
      }
      if (!have_l || !have_m) throw ParseError(line_no, "header must declare L and M");
      if (corpus.max_degree < 1) throw DomainError("header L must be >= 1");
      if (corpus.alphabet_size < 1) throw DomainError("header M must be >= 1");
      if (corpus.class_count && *corpus.class_count < 1)
        throw DomainError("header CLASSES must be >= 1");
      have_header = true;
    } else if (line.substr(0, 4) == "SYM ") {
      std::string_view rest = trim(line.substr(4));
      const auto sp = rest.find_first_of(" \t");
      if (sp == std::string_view::npos) throw ParseError(line_no, "SYM line needs <int> <string>");
      const int code = parse_header_int(rest.substr(0, sp), line_no, "SYM");
      if (code < 0 || code >= corpus.alphabet_size)
        throw DomainError("line " + std::to_string(line_no) + ": symbol code outside [0, M)");
      corpus.symbols[code] = std::string(trim(rest.substr(sp)));
    } else {
      const auto bar = line.find('|');
      std::string_view tree_text = trim(line.substr(0, bar));
      LineParser p(tree_text, line_no, corpus.max_degree, corpus.alphabet_size);
      corpus.trees.push_back(p.parse_tree());
      p.skip_ws();
      if (p.pos() != tree_text.size()) throw ParseError(line_no, "trailing characters after tree");
      if (bar != std::string_view::npos) {
        const std::string_view cls_text = trim(line.substr(bar + 1));
        const int cls = parse_header_int(cls_text, line_no, "class");
        if (cls < 0 || (corpus.class_count && cls >= *corpus.class_count))
          throw DomainError("line " + std::to_string(line_no) + ": class label out of range");
        classes.push_back(cls);
        any_class = true;
      } else {
        any_unclassed = true;
      }
      if (any_class && any_unclassed)
        throw ParseError(line_no, "class suffix must be present on all tree lines or none");
    }
    if (end == text.size()) break;
  }
  if (!have_header) throw ParseError(line_no, "missing header line");
  if (any_class) corpus.class_labels = std::move(classes);
  corpus.validate();
  return corpus;
}

std::string serialise_tree(const LabelledTree& tree) {
  std::string out;
  serialise_node(tree, tree.root(), out);
  return out;
}

std::string serialise_corpus(const TreeCorpus& corpus) {
  std::string out = "L=" + std::to_string(corpus.max_degree) +
                    " M=" + std::to_string(corpus.alphabet_size);
  if (corpus.class_count) out += " CLASSES=" + std::to_string(*corpus.class_count);
  out += '\n';
  for (const auto& [code, name] : corpus.symbols)
    out += "SYM " + std::to_string(code) + ' ' + name + '\n';
  for (std::size_t i = 0; i < corpus.trees.size(); ++i) {
    out += serialise_tree(corpus.trees[i]);
    if (corpus.class_labels) out += " | " + std::to_string((*corpus.class_labels)[i]);
    out += '\n';
  }
  return out;
}

TreeCorpus read_corpus_file(const std::string& path) {
  return parse_corpus(read_text_file(path));
}

void write_corpus_file(const std::string& path, const TreeCorpus& corpus) {
  write_text_file_atomic(path, serialise_corpus(corpus));
}

std::vector<NodeId> leaves(const LabelledTree& tree) { return tree.leaves(); }

std::vector<NodeId> bottom_up_order(const LabelledTree& tree) { return tree.bottom_up_order(); }

}  // namespace tfhtmm
