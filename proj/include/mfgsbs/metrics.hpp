#ifndef MFGSBS_METRICS_HPP
#define MFGSBS_METRICS_HPP

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "mfgsbs/error.hpp"
#include "mfgsbs/graph.hpp"

namespace mfgsbs {

using MarkPair = std::pair<Mark, Mark>;  // (mark at first node, mark at second node)

/// True-positive credit for a predicted edge over a true MAG edge. The
/// default rule: a predicted tail or arrow that disagrees with the truth at
/// its endpoint earns nothing; otherwise each circle costs 0.25. Individual
/// cells can be overridden.
class PenaltyMatrix {
public:
  double credit(MarkPair truth, MarkPair predicted) const {
    if (truth.first == Mark::Circle || truth.second == Mark::Circle) {
      throw DomainError("true marks cannot contain circles");
    }
    if (auto it = overrides_.find({truth, predicted}); it != overrides_.end()) return it->second;
    // The same edge read from the other end.
    const MarkPair t2{truth.second, truth.first};
    const MarkPair p2{predicted.second, predicted.first};
    if (auto it = overrides_.find({t2, p2}); it != overrides_.end()) return it->second;
    return default_credit(truth, predicted);
  }

  void set(MarkPair truth, MarkPair predicted, double value) {
    if (!(value >= 0.0 && value <= 1.0)) throw DomainError("edge credit must lie in [0, 1]");
    overrides_[{truth, predicted}] = value;
  }

  static double default_credit(MarkPair truth, MarkPair predicted) {
    int circles = 0;
    for (auto [t, p] : {std::pair{truth.first, predicted.first}, std::pair{truth.second, predicted.second}}) {
      if (p == Mark::Circle) {
        ++circles;
      } else if (p != t) {
        return 0.0;
      }
    }
    return 1.0 - 0.25 * circles;
  }

  /// Reads `[{"true": "-->", "predicted": "o-o", "credit": 0.5}, ...]`, with
  /// edges written in the graph text notation.
  static PenaltyMatrix from_json(const nlohmann::json& doc) {
    PenaltyMatrix m;
    try {
      for (const auto& row : doc) {
        m.set(parse_glyph(row.at("true").get<std::string>()), parse_glyph(row.at("predicted").get<std::string>()),
              row.at("credit").get<double>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("penalty matrix: ") + e.what());
    }
    return m;
  }

  static PenaltyMatrix load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open penalty matrix '" + path.string() + "'");
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ": " + e.what());
    }
    return from_json(doc);
  }

private:
  static MarkPair parse_glyph(const std::string& s) {
    if (s.size() != 3 || s[1] != '-') throw ValidationError("bad edge glyph '" + s + "'");
    return {detail::parse_left(s[0]), detail::parse_right(s[2])};
  }

  std::map<std::pair<MarkPair, MarkPair>, double> overrides_;
};

inline double score_edge(MarkPair truth, MarkPair predicted, const PenaltyMatrix& penalties = {}) {
  return penalties.credit(truth, predicted);
}

/// Penalty-weighted confusion counts over unordered node pairs.
struct ConfusionTally {
  double tp = 0.0;
  double fp = 0.0;
  double fn = 0.0;
  double tn = 0.0;
  std::size_t a = 0;  // edges of the true graph
  std::size_t i = 0;  // non-adjacent pairs of the true graph
  std::size_t n = 0;  // nodes
};

/// Tallies `learnt` against `truth`. Nodes are matched by name, so the two
/// graphs may list them in different orders.
inline ConfusionTally compare(const MixedGraph& learnt, const MixedGraph& truth, const PenaltyMatrix& penalties = {}) {
  const auto n = truth.size();
  if (learnt.size() != n) throw DomainError("graphs have different node counts");
  std::vector<int> map(n);
  for (std::size_t v = 0; v < n; ++v) {
    if (!learnt.contains(truth.name(static_cast<int>(v)))) {
      throw DomainError("node '" + truth.name(static_cast<int>(v)) + "' is missing from the learnt graph");
    }
    map[v] = learnt.index(truth.name(static_cast<int>(v)));
  }
  ConfusionTally t;
  t.n = n;
  for (int x = 0; x < static_cast<int>(n); ++x) {
    for (int y = x + 1; y < static_cast<int>(n); ++y) {
      const auto tm = truth.marks(x, y);
      const auto pm = learnt.marks(map[static_cast<std::size_t>(x)], map[static_cast<std::size_t>(y)]);
      if (tm) {
        ++t.a;
        if (pm) {
          const double s = penalties.credit(*tm, *pm);
          t.tp += s;
          t.fn += 1.0 - s;
        } else {
          t.fn += 1.0;
        }
      } else {
        ++t.i;
        if (pm) {
          t.fp += 1.0;
        } else {
          t.tn += 1.0;
        }
      }
    }
  }
  return t;
}

struct F1Score {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline double harmonic_f1(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

inline F1Score f1(const ConfusionTally& t) {
  F1Score s;
  s.precision = t.tp + t.fp > 0.0 ? t.tp / (t.tp + t.fp) : 0.0;
  s.recall = t.a > 0 ? t.tp / static_cast<double>(t.a) : 0.0;
  s.f1 = harmonic_f1(s.precision, s.recall);
  return s;
}

/// 0.5 (TP/a + TN/i - FP/i - FN/a): 1 for a perfect match, 0 for the empty
/// graph, -1 for its complement.
inline double bsf(const ConfusionTally& t) {
  if (t.a == 0 || t.i == 0) throw DomainError("balanced scoring needs at least one edge and one non-edge in the truth");
  const double a = static_cast<double>(t.a);
  const double i = static_cast<double>(t.i);
  return 0.5 * (t.tp / a + t.tn / i - t.fp / i - t.fn / a);
}

inline nlohmann::json metrics_json(const ConfusionTally& t, std::size_t learnt_edges) {
  const auto s = f1(t);
  nlohmann::json j{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
                   {"tp", t.tp},               {"fp", t.fp},         {"fn", t.fn},
                   {"tn", t.tn},               {"learnt_edges", learnt_edges}, {"true_edges", t.a}};
  j["bsf"] = (t.a > 0 && t.i > 0) ? nlohmann::json(bsf(t)) : nlohmann::json(nullptr);
  return j;
}

}  // namespace mfgsbs

#endif  // MFGSBS_METRICS_HPP
