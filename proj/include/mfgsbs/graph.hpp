#ifndef MFGSBS_GRAPH_HPP
#define MFGSBS_GRAPH_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mfgsbs/error.hpp"

namespace mfgsbs {

enum class Mark : std::int8_t { Tail = 0, Arrow = 1, Circle = 2 };

/// An edge a *-* b. `at_a` is the mark drawn at a, `at_b` the mark at b.
struct Edge {
  int a = 0;
  int b = 0;
  Mark at_a = Mark::Tail;
  Mark at_b = Mark::Tail;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Nodes with at most one edge per unordered pair, each endpoint carrying a
/// tail, arrowhead or circle. DAGs, CPDAGs, MAGs and PAGs are all views of
/// this one representation.
class MixedGraph {
public:
  MixedGraph() = default;

  explicit MixedGraph(std::vector<std::string> names) : names_(std::move(names)) {
    const auto n = names_.size();
    ends_.assign(n * n, kNone);
    for (std::size_t i = 0; i < n; ++i) {
      if (!index_.emplace(names_[i], static_cast<int>(i)).second) {
        throw ValidationError("duplicate node name '" + names_[i] + "'");
      }
    }
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(int v) const { return names_.at(static_cast<std::size_t>(v)); }

  int index(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) {
      throw ValidationError("unknown node '" + std::string(name) + "'");
    }
    return it->second;
  }

  bool contains(std::string_view name) const { return index_.count(std::string(name)) > 0; }

  bool adjacent(int a, int b) const { return ends_[slot(a, b)] != kNone; }

  /// Marks (at a, at b), or nullopt when a and b are not adjacent.
  std::optional<std::pair<Mark, Mark>> marks(int a, int b) const {
    if (!adjacent(a, b)) return std::nullopt;
    return std::pair{static_cast<Mark>(ends_[slot(b, a)]), static_cast<Mark>(ends_[slot(a, b)])};
  }

  /// Mark drawn at `at` on the edge between `other` and `at`.
  Mark mark_at(int at, int other) const { return static_cast<Mark>(ends_[slot(other, at)]); }

  void add_edge(int a, int b, Mark at_a, Mark at_b) {
    check_pair(a, b);
    if (adjacent(a, b)) {
      throw InvalidGraph("duplicate edge " + name(a) + " - " + name(b));
    }
    set_edge(a, b, at_a, at_b);
  }

  /// Inserts or overwrites the edge between a and b.
  void set_edge(int a, int b, Mark at_a, Mark at_b) {
    check_pair(a, b);
    ends_[slot(b, a)] = static_cast<std::int8_t>(at_a);
    ends_[slot(a, b)] = static_cast<std::int8_t>(at_b);
  }

  void add_directed(int from, int to) { add_edge(from, to, Mark::Tail, Mark::Arrow); }
  void add_undirected(int a, int b) { add_edge(a, b, Mark::Tail, Mark::Tail); }
  void add_bidirected(int a, int b) { add_edge(a, b, Mark::Arrow, Mark::Arrow); }

  void remove_edge(int a, int b) {
    check_pair(a, b);
    ends_[slot(a, b)] = kNone;
    ends_[slot(b, a)] = kNone;
  }

  bool has_marks(int a, int b, Mark at_a, Mark at_b) const {
    auto m = marks(a, b);
    return m && m->first == at_a && m->second == at_b;
  }
  bool has_directed(int from, int to) const { return has_marks(from, to, Mark::Tail, Mark::Arrow); }
  bool has_undirected(int a, int b) const { return has_marks(a, b, Mark::Tail, Mark::Tail); }
  bool has_bidirected(int a, int b) const { return has_marks(a, b, Mark::Arrow, Mark::Arrow); }

  std::vector<int> neighbors(int v) const {
    std::vector<int> out;
    for (int w = 0; w < static_cast<int>(size()); ++w) {
      if (w != v && adjacent(v, w)) out.push_back(w);
    }
    return out;
  }

  /// Nodes u with u --> v.
  std::vector<int> parents(int v) const {
    std::vector<int> out;
    for (int u = 0; u < static_cast<int>(size()); ++u) {
      if (u != v && has_directed(u, v)) out.push_back(u);
    }
    return out;
  }

  std::vector<int> children(int v) const {
    std::vector<int> out;
    for (int w = 0; w < static_cast<int>(size()); ++w) {
      if (w != v && has_directed(v, w)) out.push_back(w);
    }
    return out;
  }

  /// All edges with a < b, in lexicographic (a, b) order.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    const int n = static_cast<int>(size());
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        if (adjacent(a, b)) out.push_back({a, b, mark_at(a, b), mark_at(b, a)});
      }
    }
    return out;
  }

  std::size_t num_edges() const {
    std::size_t count = 0;
    for (auto e : ends_) count += e != kNone;
    return count / 2;
  }

  friend bool operator==(const MixedGraph& x, const MixedGraph& y) {
    return x.names_ == y.names_ && x.ends_ == y.ends_;
  }

private:
  static constexpr std::int8_t kNone = -1;

  std::size_t slot(int from, int to) const {
    return static_cast<std::size_t>(from) * size() + static_cast<std::size_t>(to);
  }

  void check_pair(int a, int b) const {
    const int n = static_cast<int>(size());
    if (a < 0 || b < 0 || a >= n || b >= n) throw DomainError("node index out of range");
    if (a == b) throw InvalidGraph("self-loop on " + name(a));
  }

  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
  // ends_[from * n + to] is the mark at `to` on edge from-to, kNone when absent.
  std::vector<std::int8_t> ends_;
};

/// reach[u][v] is true when a directed path u --> ... --> v of length >= 1
/// exists using Tail-Arrow edges only.
inline std::vector<std::vector<bool>> directed_reachability(const MixedGraph& g) {
  const int n = static_cast<int>(g.size());
  std::vector<std::vector<int>> kids(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) kids[static_cast<std::size_t>(v)] = g.children(v);
  std::vector<std::vector<bool>> reach(static_cast<std::size_t>(n),
                                       std::vector<bool>(static_cast<std::size_t>(n), false));
  for (int s = 0; s < n; ++s) {
    auto& row = reach[static_cast<std::size_t>(s)];
    std::vector<int> stack = kids[static_cast<std::size_t>(s)];
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      if (row[static_cast<std::size_t>(v)]) continue;
      row[static_cast<std::size_t>(v)] = true;
      for (int w : kids[static_cast<std::size_t>(v)]) {
        if (!row[static_cast<std::size_t>(w)]) stack.push_back(w);
      }
    }
  }
  return reach;
}

inline bool has_directed_cycle(const MixedGraph& g) {
  auto reach = directed_reachability(g);
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (reach[v][v]) return true;
  }
  return false;
}

/// True when the Tail-Arrow edges contain a directed cycle, or some A <-> B
/// has a directed path between its endpoints.
inline bool has_almost_directed_cycle(const MixedGraph& g) {
  auto reach = directed_reachability(g);
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (reach[v][v]) return true;
  }
  for (const auto& e : g.edges()) {
    if (e.at_a == Mark::Arrow && e.at_b == Mark::Arrow) {
      auto a = static_cast<std::size_t>(e.a), b = static_cast<std::size_t>(e.b);
      if (reach[a][b] || reach[b][a]) return true;
    }
  }
  return false;
}

inline bool is_dag(const MixedGraph& g) {
  for (const auto& e : g.edges()) {
    bool forward = e.at_a == Mark::Tail && e.at_b == Mark::Arrow;
    bool backward = e.at_a == Mark::Arrow && e.at_b == Mark::Tail;
    if (!forward && !backward) return false;
  }
  return !has_directed_cycle(g);
}

inline void require_dag(const MixedGraph& g) {
  if (!is_dag(g)) throw InvalidGraph("graph is not a DAG");
}

/// Kahn's algorithm with ready nodes released in ascending index order.
inline std::vector<int> topological_order(const MixedGraph& dag) {
  require_dag(dag);
  const int n = static_cast<int>(dag.size());
  std::vector<int> indegree(static_cast<std::size_t>(n), 0);
  for (int v = 0; v < n; ++v) indegree[static_cast<std::size_t>(v)] = static_cast<int>(dag.parents(v).size());
  std::vector<int> order;
  std::vector<bool> done(static_cast<std::size_t>(n), false);
  order.reserve(static_cast<std::size_t>(n));
  while (static_cast<int>(order.size()) < n) {
    int next = -1;
    for (int v = 0; v < n; ++v) {
      if (!done[static_cast<std::size_t>(v)] && indegree[static_cast<std::size_t>(v)] == 0) {
        next = v;
        break;
      }
    }
    if (next < 0) throw InvalidGraph("graph contains a directed cycle");
    done[static_cast<std::size_t>(next)] = true;
    order.push_back(next);
    for (int w : dag.children(next)) --indegree[static_cast<std::size_t>(w)];
  }
  return order;
}

/// Compelled-edge labeling of a DAG: compelled edges stay directed, reversible
/// edges become undirected.
inline MixedGraph dag_to_cpdag(const MixedGraph& dag) {
  const auto order = topological_order(dag);
  const int n = static_cast<int>(dag.size());
  std::vector<int> pos(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pos[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i;

  // Edge order: targets by ascending position, and for each target its
  // parents by descending position.
  std::vector<std::pair<int, int>> ordered;
  for (int y : order) {
    auto ps = dag.parents(y);
    std::sort(ps.begin(), ps.end(), [&](int u, int v) {
      return pos[static_cast<std::size_t>(u)] > pos[static_cast<std::size_t>(v)];
    });
    for (int x : ps) ordered.emplace_back(x, y);
  }

  enum class Label : std::int8_t { Unknown, Compelled, Reversible };
  std::vector<Label> label(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), Label::Unknown);
  auto at = [&](int x, int y) -> Label& {
    return label[static_cast<std::size_t>(x) * static_cast<std::size_t>(n) + static_cast<std::size_t>(y)];
  };
  auto label_into = [&](int y, Label l, bool only_unknown) {
    for (int z : dag.parents(y)) {
      if (!only_unknown || at(z, y) == Label::Unknown) at(z, y) = l;
    }
  };

  for (auto [x, y] : ordered) {
    if (at(x, y) != Label::Unknown) continue;
    bool finished = false;
    for (int w : dag.parents(x)) {
      if (at(w, x) != Label::Compelled) continue;
      if (!dag.has_directed(w, y)) {
        label_into(y, Label::Compelled, false);
        finished = true;
        break;
      }
      at(w, y) = Label::Compelled;
    }
    if (finished) continue;
    bool v_structure = false;
    for (int z : dag.parents(y)) {
      if (z != x && !dag.adjacent(z, x)) {
        v_structure = true;
        break;
      }
    }
    at(x, y) = v_structure ? Label::Compelled : Label::Reversible;
    label_into(y, v_structure ? Label::Compelled : Label::Reversible, true);
  }

  MixedGraph cpdag(dag.names());
  for (auto [x, y] : ordered) {
    if (at(x, y) == Label::Compelled) {
      cpdag.add_directed(x, y);
    } else {
      cpdag.add_undirected(x, y);
    }
  }
  return cpdag;
}

/// A DAG with the same skeleton and v-structures as a pattern of directed
/// and undirected edges (Dor and Tarsi's sink elimination). Throws
/// InvalidGraph when no such extension exists.
inline MixedGraph pdag_to_dag(const MixedGraph& pdag) {
  const int n = static_cast<int>(pdag.size());
  for (const auto& e : pdag.edges()) {
    const bool directed = (e.at_a == Mark::Tail && e.at_b == Mark::Arrow) || (e.at_a == Mark::Arrow && e.at_b == Mark::Tail);
    if (!directed && !(e.at_a == Mark::Tail && e.at_b == Mark::Tail)) {
      throw InvalidGraph("pattern may only hold directed and undirected edges");
    }
  }
  MixedGraph dag(pdag.names());
  for (const auto& e : pdag.edges()) {
    if (e.at_b == Mark::Arrow) dag.add_directed(e.a, e.b);
    if (e.at_a == Mark::Arrow) dag.add_directed(e.b, e.a);
  }
  std::vector<bool> alive(static_cast<std::size_t>(n), true);
  auto live = [&](int v) { return alive[static_cast<std::size_t>(v)]; };
  for (int removed = 0; removed < n; ++removed) {
    int sink = -1;
    for (int x = 0; x < n && sink < 0; ++x) {
      if (!live(x)) continue;
      bool ok = true;
      std::vector<int> adj;
      for (int y = 0; y < n; ++y) {
        if (y == x || !live(y) || !pdag.adjacent(x, y)) continue;
        adj.push_back(y);
        if (pdag.has_directed(x, y)) ok = false;
      }
      for (int y : adj) {
        if (!ok) break;
        if (!pdag.has_undirected(x, y)) continue;
        for (int z : adj) {
          if (z != y && !pdag.adjacent(y, z)) {
            ok = false;
            break;
          }
        }
      }
      if (ok) sink = x;
    }
    if (sink < 0) throw InvalidGraph("pattern has no consistent DAG extension");
    for (int y = 0; y < n; ++y) {
      if (y != sink && live(y) && pdag.has_undirected(sink, y)) dag.add_directed(y, sink);
    }
    alive[static_cast<std::size_t>(sink)] = false;
  }
  return dag;
}

/// Projects a DAG onto its non-latent nodes as a MAG. Two observed nodes are
/// adjacent iff an inducing path relative to the latents joins them; the edge
/// is oriented by ancestry, and is bidirected when neither endpoint is an
/// ancestor of the other. Node order of the result follows the DAG's order.
inline MixedGraph latent_project(const MixedGraph& dag, const std::vector<int>& latents) {
  require_dag(dag);
  const int n = static_cast<int>(dag.size());
  std::vector<bool> latent(static_cast<std::size_t>(n), false);
  for (int l : latents) {
    if (l < 0 || l >= n) throw DomainError("latent node index out of range");
    latent[static_cast<std::size_t>(l)] = true;
  }
  const auto anc = directed_reachability(dag);
  auto is_anc = [&](int u, int v) { return anc[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)]; };

  std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) nbrs[static_cast<std::size_t>(v)] = dag.neighbors(v);

  std::vector<bool> visited(static_cast<std::size_t>(n), false);
  // Depth-first search over simple paths; `v` is an interior node reached
  // from `prev`, every interior node must be latent or a collider, and every
  // collider must be an ancestor of an endpoint.
  std::function<bool(int, int, int, int)> extend = [&](int v, int prev, int a, int b) -> bool {
    visited[static_cast<std::size_t>(v)] = true;
    const bool arrow_in = dag.mark_at(v, prev) == Mark::Arrow;
    bool found = false;
    for (int w : nbrs[static_cast<std::size_t>(v)]) {
      if (visited[static_cast<std::size_t>(w)]) continue;
      const bool collider = arrow_in && dag.mark_at(v, w) == Mark::Arrow;
      const bool ok = collider ? (is_anc(v, a) || is_anc(v, b)) : latent[static_cast<std::size_t>(v)];
      if (!ok) continue;
      if (w == b || extend(w, v, a, b)) {
        found = true;
        break;
      }
    }
    visited[static_cast<std::size_t>(v)] = false;
    return found;
  };
  auto inducing = [&](int a, int b) {
    if (dag.adjacent(a, b)) return true;
    visited[static_cast<std::size_t>(a)] = true;
    bool found = false;
    for (int w : nbrs[static_cast<std::size_t>(a)]) {
      if (w != b && extend(w, a, a, b)) {
        found = true;
        break;
      }
    }
    visited[static_cast<std::size_t>(a)] = false;
    return found;
  };

  std::vector<int> observed;
  std::vector<std::string> names;
  for (int v = 0; v < n; ++v) {
    if (!latent[static_cast<std::size_t>(v)]) {
      observed.push_back(v);
      names.push_back(dag.name(v));
    }
  }
  MixedGraph mag(names);
  for (std::size_t i = 0; i < observed.size(); ++i) {
    for (std::size_t j = i + 1; j < observed.size(); ++j) {
      int a = observed[i], b = observed[j];
      if (!inducing(a, b)) continue;
      int ia = static_cast<int>(i), ib = static_cast<int>(j);
      if (is_anc(a, b)) {
        mag.add_directed(ia, ib);
      } else if (is_anc(b, a)) {
        mag.add_directed(ib, ia);
      } else {
        mag.add_bidirected(ia, ib);
      }
    }
  }
  return mag;
}

namespace detail {

inline char left_glyph(Mark m) {
  switch (m) {
    case Mark::Tail: return '-';
    case Mark::Arrow: return '<';
    case Mark::Circle: return 'o';
  }
  return '?';
}

inline char right_glyph(Mark m) {
  switch (m) {
    case Mark::Tail: return '-';
    case Mark::Arrow: return '>';
    case Mark::Circle: return 'o';
  }
  return '?';
}

inline Mark parse_left(char c) {
  switch (c) {
    case '-': return Mark::Tail;
    case '<': return Mark::Arrow;
    case 'o': return Mark::Circle;
    default: throw ValidationError(std::string("bad edge mark '") + c + "'");
  }
}

inline Mark parse_right(char c) {
  switch (c) {
    case '-': return Mark::Tail;
    case '>': return Mark::Arrow;
    case 'o': return Mark::Circle;
    default: throw ValidationError(std::string("bad edge mark '") + c + "'");
  }
}

inline std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  auto last = s.find_last_not_of(ws);
  return std::string(s.substr(first, last - first + 1));
}

// Canonical forms are written left to right; anything else is flipped.
inline bool canonical(Mark left, Mark right) {
  if (left == right) return true;
  return (left == Mark::Tail || left == Mark::Circle) && right == Mark::Arrow;
}

}  // namespace detail

/// Text form: `#nodes: A,B,C` followed by one `NAME1 <m><m> NAME2` line per
/// edge, e.g. `A --> B`, `A <-> B`, `A o-o B`, `A o-> B`, `A --- B`.
inline std::string to_text(const MixedGraph& g) {
  std::ostringstream out;
  out << "#nodes: ";
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (i) out << ',';
    out << g.names()[i];
  }
  out << '\n';
  for (const auto& e : g.edges()) {
    int left = e.a, right = e.b;
    Mark ml = e.at_a, mr = e.at_b;
    if (!detail::canonical(ml, mr)) {
      std::swap(left, right);
      std::swap(ml, mr);
    }
    out << g.name(left) << ' ' << detail::left_glyph(ml) << '-' << detail::right_glyph(mr) << ' '
        << g.name(right) << '\n';
  }
  return out.str();
}

inline MixedGraph from_text(std::string_view text) {
  std::vector<std::string> names;
  struct Pending {
    std::string left, right;
    Mark ml, mr;
  };
  std::vector<Pending> pending;
  bool header = false;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  auto note = [&](const std::string& name) {
    if (!header && std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
  };
  while (std::getline(in, line)) {
    ++line_no;
    auto s = detail::trim(line);
    if (s.empty()) continue;
    if (s.rfind("#nodes:", 0) == 0) {
      if (header) throw ValidationError("duplicate #nodes header");
      header = true;
      names.clear();
      std::istringstream list(s.substr(7));
      std::string item;
      while (std::getline(list, item, ',')) {
        auto nm = detail::trim(item);
        if (!nm.empty()) names.push_back(nm);
      }
      continue;
    }
    if (s[0] == '#') continue;
    std::istringstream fields(s);
    std::string left, glyph, right, extra;
    if (!(fields >> left >> glyph >> right) || (fields >> extra) || glyph.size() != 3 || glyph[1] != '-') {
      throw ValidationError("malformed edge on line " + std::to_string(line_no) + ": '" + s + "'");
    }
    pending.push_back({left, right, detail::parse_left(glyph[0]), detail::parse_right(glyph[2])});
    note(left);
    note(right);
  }
  MixedGraph g(names);
  for (const auto& p : pending) {
    g.add_edge(g.index(p.left), g.index(p.right), p.ml, p.mr);
  }
  return g;
}

}  // namespace mfgsbs

#endif  // MFGSBS_GRAPH_HPP
