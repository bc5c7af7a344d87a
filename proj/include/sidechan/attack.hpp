#pragma once

// The combined-channel attack model: stratified train/test splitting, a
// small CART-style decision tree over the (time, llc) feature pair with
// Gini splits, and precision/recall/F1 evaluation.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sidechan/common.hpp"
#include "sidechan/hwmodel.hpp"

namespace sidechan::attack {

using hwmodel::Observation;

struct LabeledSample {
  Observation features;
  std::string label;
};

enum class Feature { Time, Llc };

inline std::string to_string(Feature f) {
  return f == Feature::Time ? "time" : "llc";
}

inline double feature_of(const Observation& obs, Feature f) {
  return f == Feature::Time ? obs.time_s : obs.llc_misses;
}

struct SplitResult {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> test;
};

// Per-class shuffle, then round(fraction * class_size) samples into train.
// Classes are processed in sorted label order off one seeded stream, so the
// partition replays exactly.
inline SplitResult stratified_split(const std::vector<LabeledSample>& samples,
                                    double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("stratified_split: train_fraction must be in (0,1)");
  }
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    by_label[samples[i].label].push_back(i);
  }
  for (const auto& [label, idx] : by_label) {
    if (idx.size() < 2) {
      throw DataError("stratified_split: class '" + label +
                      "' has fewer than 2 samples");
    }
  }
  Rng rng(seed);
  SplitResult out;
  for (auto& [label, idx] : by_label) {
    deterministic_shuffle(idx, rng);
    const auto train_n = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      (k < train_n ? out.train : out.test).push_back(samples[idx[k]]);
    }
  }
  return out;
}

inline double gini(const std::vector<std::string>& labels) {
  if (labels.empty()) throw DataError("gini of empty label set");
  std::map<std::string, std::size_t> counts;
  for (const std::string& l : labels) ++counts[l];
  double sum_sq = 0.0;
  for (const auto& [l, n] : counts) {
    const double p = static_cast<double>(n) / static_cast<double>(labels.size());
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

struct TreeNode {
  bool is_leaf = true;
  Feature feature = Feature::Time;
  double threshold = 0.0;
  int left = -1;   // feature < threshold
  int right = -1;  // feature >= threshold
  std::string label;
  std::map<std::string, int> histogram;  // training labels reaching the node
};

class DecisionTree {
 public:
  // Greedy recursive partitioning. Candidate thresholds sit at midpoints
  // between consecutive distinct sorted feature values; the split with the
  // lowest weighted child Gini wins, ties broken by feature order (time
  // before llc) then smaller threshold. A node stays a leaf when it is pure,
  // the depth limit is reached, or no split leaves both children with at
  // least min_leaf samples and strictly lower impurity.
  static DecisionTree fit(const std::vector<LabeledSample>& train,
                          int max_depth, int min_leaf = 5) {
    if (train.empty()) throw DataError("fit: empty training set");
    if (max_depth < 1) throw ConfigError("fit: max_depth must be >= 1");
    if (min_leaf < 1) throw ConfigError("fit: min_leaf must be >= 1");
    DecisionTree tree;
    tree.max_depth_ = max_depth;
    std::vector<std::size_t> all(train.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    tree.build(train, all, 0, max_depth, min_leaf);
    return tree;
  }

  const std::string& predict(const Observation& obs) const {
    int at = 0;
    while (!nodes_[at].is_leaf) {
      const TreeNode& n = nodes_[at];
      at = feature_of(obs, n.feature) < n.threshold ? n.left : n.right;
    }
    return nodes_[at].label;
  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& root() const { return nodes_.front(); }

  int depth() const { return depth_below(0); }

  // One node per line, two-space indent per level:
  //   time < 80.5
  //     leaf: Portrait [Portrait:175]
  std::string to_text() const {
    std::ostringstream os;
    render(os, 0, 0);
    return os.str();
  }

 private:
  std::vector<TreeNode> nodes_;
  int max_depth_ = 0;

  struct BestSplit {
    Feature feature = Feature::Time;
    double threshold = 0.0;
    double weighted_gini = 0.0;
  };

  static double gini_of_counts(const std::map<std::string, int>& counts,
                               int total) {
    double sum_sq = 0.0;
    for (const auto& [l, n] : counts) {
      const double p = static_cast<double>(n) / total;
      sum_sq += p * p;
    }
    return 1.0 - sum_sq;
  }

  static std::optional<BestSplit> best_split(
      const std::vector<LabeledSample>& data,
      const std::vector<std::size_t>& idx, int min_leaf, double parent_gini) {
    std::optional<BestSplit> best;
    const int total = static_cast<int>(idx.size());
    for (Feature f : {Feature::Time, Feature::Llc}) {
      std::vector<std::size_t> order = idx;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double va = feature_of(data[a].features, f);
        const double vb = feature_of(data[b].features, f);
        return va != vb ? va < vb : a < b;
      });
      std::map<std::string, int> left_counts, right_counts;
      for (std::size_t i : order) ++right_counts[data[i].label];
      int left_n = 0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        const std::string& lbl = data[order[k]].label;
        ++left_counts[lbl];
        if (--right_counts[lbl] == 0) right_counts.erase(lbl);
        ++left_n;
        const double v = feature_of(data[order[k]].features, f);
        const double v_next = feature_of(data[order[k + 1]].features, f);
        if (v == v_next) continue;  // threshold only between distinct values
        const int right_n = total - left_n;
        if (left_n < min_leaf || right_n < min_leaf) continue;
        const double w =
            (left_n * gini_of_counts(left_counts, left_n) +
             right_n * gini_of_counts(right_counts, right_n)) /
            total;
        // Strict improvement keeps pure-noise nodes from splitting; the
        // strict '<' on w plus the scan order implements the tie-break.
        if (w >= parent_gini - 1e-12) continue;
        if (!best || w < best->weighted_gini - 1e-12) {
          best = BestSplit{f, 0.5 * (v + v_next), w};
        }
      }
    }
    return best;
  }

  int build(const std::vector<LabeledSample>& data,
            const std::vector<std::size_t>& idx, int depth, int max_depth,
            int min_leaf) {
    const int self = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    std::map<std::string, int> hist;
    for (std::size_t i : idx) ++hist[data[i].label];
    nodes_[self].histogram = hist;

    const double node_gini = gini_of_counts(hist, static_cast<int>(idx.size()));
    std::optional<BestSplit> split;
    if (node_gini > 0.0 && depth < max_depth) {
      split = best_split(data, idx, min_leaf, node_gini);
    }
    if (!split) {
      // Majority label; ties go to the lexicographically smallest (map order).
      int best_n = -1;
      for (const auto& [l, n] : hist) {
        if (n > best_n) {
          best_n = n;
          nodes_[self].label = l;
        }
      }
      return self;
    }

    std::vector<std::size_t> left_idx, right_idx;
    for (std::size_t i : idx) {
      (feature_of(data[i].features, split->feature) < split->threshold
           ? left_idx
           : right_idx)
          .push_back(i);
    }
    nodes_[self].is_leaf = false;
    nodes_[self].feature = split->feature;
    nodes_[self].threshold = split->threshold;
    const int l = build(data, left_idx, depth + 1, max_depth, min_leaf);
    const int r = build(data, right_idx, depth + 1, max_depth, min_leaf);
    nodes_[self].left = l;
    nodes_[self].right = r;
    return self;
  }

  int depth_below(int at) const {
    if (nodes_[at].is_leaf) return 0;
    return 1 + std::max(depth_below(nodes_[at].left),
                        depth_below(nodes_[at].right));
  }

  void render(std::ostringstream& os, int at, int indent) const {
    const TreeNode& n = nodes_[at];
    for (int i = 0; i < indent; ++i) os << "  ";
    if (n.is_leaf) {
      os << "leaf: " << n.label << " [";
      bool first = true;
      for (const auto& [l, c] : n.histogram) {
        if (!first) os << " ";
        os << l << ":" << c;
        first = false;
      }
      os << "]\n";
    } else {
      os << to_string(n.feature) << " < " << format_double(n.threshold)
         << "\n";
      render(os, n.left, indent + 1);
      render(os, n.right, indent + 1);
    }
  }
};

struct ConfusionMatrix {
  std::vector<std::string> labels;  // sorted; indexes rows and columns
  std::vector<std::vector<int>> counts;  // counts[true][predicted]

  int total() const {
    int t = 0;
    for (const auto& row : counts) {
      for (int c : row) t += c;
    }
    return t;
  }

  int trace() const {
    int t = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
    return t;
  }
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int support = 0;
};

struct ClassReport {
  std::map<std::string, ClassMetrics> per_class;
  double accuracy = 0.0;
  ConfusionMatrix confusion;
};

// Metrics are derived from the confusion matrix alone; denominators of zero
// yield zero rather than NaN.
inline ClassReport report_from_confusion(const ConfusionMatrix& cm) {
  ClassReport rep;
  rep.confusion = cm;
  const std::size_t k = cm.labels.size();
  for (std::size_t i = 0; i < k; ++i) {
    int row_sum = 0, col_sum = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row_sum += cm.counts[i][j];
      col_sum += cm.counts[j][i];
    }
    ClassMetrics m;
    m.support = row_sum;
    const int tp = cm.counts[i][i];
    m.precision = col_sum > 0 ? static_cast<double>(tp) / col_sum : 0.0;
    m.recall = row_sum > 0 ? static_cast<double>(tp) / row_sum : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    rep.per_class[cm.labels[i]] = m;
  }
  rep.accuracy = cm.total() > 0
                     ? static_cast<double>(cm.trace()) / cm.total()
                     : 0.0;
  return rep;
}

inline ClassReport evaluate(const DecisionTree& tree,
                            const std::vector<LabeledSample>& test) {
  if (test.empty()) throw DataError("evaluate: empty test set");
  std::set<std::string> label_set;
  std::vector<std::string> predictions;
  predictions.reserve(test.size());
  for (const LabeledSample& s : test) {
    label_set.insert(s.label);
    predictions.push_back(tree.predict(s.features));
    label_set.insert(predictions.back());
  }
  ConfusionMatrix cm;
  cm.labels.assign(label_set.begin(), label_set.end());
  cm.counts.assign(cm.labels.size(),
                   std::vector<int>(cm.labels.size(), 0));
  auto index_of = [&](const std::string& l) {
    return static_cast<std::size_t>(
        std::lower_bound(cm.labels.begin(), cm.labels.end(), l) -
        cm.labels.begin());
  };
  for (std::size_t i = 0; i < test.size(); ++i) {
    ++cm.counts[index_of(test[i].label)][index_of(predictions[i])];
  }
  return report_from_confusion(cm);
}

inline std::string confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream os;
  os << "true\\predicted";
  for (const std::string& l : cm.labels) os << "," << l;
  os << "\n";
  for (std::size_t i = 0; i < cm.labels.size(); ++i) {
    os << cm.labels[i];
    for (std::size_t j = 0; j < cm.labels.size(); ++j) {
      os << "," << cm.counts[i][j];
    }
    os << "\n";
  }
  return os.str();
}

inline std::string report_csv(const ClassReport& rep) {
  std::ostringstream os;
  os << "class,precision,recall,f1,support\n";
  for (const auto& [label, m] : rep.per_class) {
    os << label << "," << format_double(m.precision) << ","
       << format_double(m.recall) << "," << format_double(m.f1) << ","
       << m.support << "\n";
  }
  os << "overall_accuracy," << format_double(rep.accuracy) << ",,,\n";
  return os.str();
}

}  // namespace sidechan::attack
